#include <algorithm>
#include <cmath>
#include <limits>

#include "qrproxy/qr_likelihood.hpp"
#include "qrproxy/sampler.hpp"
#include "qrproxy/simd/kernels.hpp"

namespace qrproxy {

std::string to_string(CurveFamily family) {
  return family == CurveFamily::Ncs ? "ncs" : "pspline";
}

CurveFamily parse_curve_family(const std::string& text) {
  if (text == "ncs") return CurveFamily::Ncs;
  if (text == "pspline") return CurveFamily::Pspline;
  throw Error("unknown spline family: " + text);
}

std::string to_string(GProposal kind) {
  return kind == GProposal::Spherical ? "spherical" : "adaptive";
}

GProposal parse_g_proposal(const std::string& text) {
  if (text == "spherical") return GProposal::Spherical;
  if (text == "adaptive") return GProposal::Adaptive;
  throw Error("unknown curve proposal: " + text);
}

void SamplerConfig::validate() const {
  if (iterations <= burnin) throw Error("iterations must exceed burn-in");
  if (thin < 1) throw Error("thin must be at least 1");
  if (draws() < 1) throw Error("configuration keeps no draws");
  if (knots < 4) throw Error("knot grid needs at least 4 knots");
  if (proxy_knots != 0 && proxy_knots < 4) throw Error("knot grid needs at least 4 knots");
  if (spline_degree < 1) throw Error("spline degree must be at least 1");
  if (!(knot_pad >= 0.0)) throw Error("knot padding must be nonnegative");
  if (!(lambda_scale0 >= 0.0) || !(x_scale0 >= 0.0)) throw Error("proposal scales must be >= 0");
  if (knot_range && !(knot_range->first < knot_range->second)) {
    throw Error("knot range needs lo < hi");
  }
}

// ---------------------------------------------------------------------------

void PosteriorSamples::curve_at(std::size_t d, std::span<const double> x,
                                std::span<double> out) const {
  if (family == CurveFamily::Ncs) {
    spline::NcsCurve(ncs, curve.row(static_cast<Eigen::Index>(d)).transpose()).evaluate(x, out);
  } else {
    pspline->evaluate(curve.row(static_cast<Eigen::Index>(d)).transpose(), x, out);
  }
}

Mat PosteriorSamples::curve_draws_at(std::span<const double> x) const {
  Mat out(draws(), x.size());
  std::vector<double> row(x.size());
  for (std::size_t d = 0; d < draws(); ++d) {
    curve_at(d, x, row);
    for (std::size_t j = 0; j < x.size(); ++j) out(d, j) = row[j];
  }
  return out;
}

Mat PosteriorSamples::proxy_draws_at(std::size_t k, std::span<const double> x) const {
  const ProxySpec& spec = proxies.at(k);
  Mat out(draws(), x.size());
  for (std::size_t d = 0; d < draws(); ++d) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      switch (spec.kind) {
        case ProxyKind::Benchmark:
          out(d, j) = x[j];
          break;
        case ProxyKind::Polynomial:
          out(d, j) = poly_eval(proxy_coef[k].row(d).transpose(), x[j]);
          break;
        case ProxyKind::Spline:
          out(d, j) = proxy_basis[k]->evaluate(proxy_coef[k].row(d).transpose(), x[j]);
          break;
      }
    }
  }
  return out;
}

const BlockAcceptance* PosteriorSamples::find_acceptance(const std::string& name) const {
  for (const auto& a : acceptance) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

namespace detail {

double clamp_positive(double v, std::uint64_t& events) {
  constexpr double lo = 1e-12;
  constexpr double hi = 1e12;
  if (!(v >= lo)) {
    ++events;
    return lo;
  }
  if (v > hi) {
    ++events;
    return hi;
  }
  return v;
}

spline::KnotGrid curve_grid(const ModelSpec& spec, const SamplerConfig& config, const Vec& x0,
                            std::size_t count) {
  if (config.knot_range) {
    return spline::build_knot_grid(config.knot_range->first, config.knot_range->second, count);
  }
  const Vec& base = config.fixed_x ? *config.fixed_x : spec.benchmark_proxy();
  (void)x0;
  const double mean = base.mean();
  const double sd = std::sqrt((base.array() - mean).square().sum() /
                              std::max<double>(1.0, static_cast<double>(base.size()) - 1.0));
  const double pad = config.knot_pad * sd;
  double lo = base.minCoeff() - pad;
  double hi = base.maxCoeff() + pad;
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  return spline::build_knot_grid(lo, hi, count);
}

std::shared_ptr<const spline::PsplineBasis> proxy_basis_for(const ModelSpec& spec,
                                                            const SamplerConfig& config,
                                                            const spline::KnotGrid& grid) {
  bool any = false;
  for (const auto& ps : spec.proxies) any = any || ps.kind == ProxyKind::Spline;
  if (!any) return nullptr;
  int degree = config.spline_degree;
  for (const auto& ps : spec.proxies) {
    if (ps.kind == ProxyKind::Spline) degree = ps.degree;
  }
  const std::size_t count = config.proxy_knots == 0 ? grid.size() : config.proxy_knots;
  return std::make_shared<const spline::PsplineBasis>(
      count == grid.size() ? grid : spline::build_knot_grid(grid.lo(), grid.hi(), count), degree);
}

double empirical_quantile(std::vector<double> v, double p) {
  if (v.empty()) throw Error("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

// ---------------------------------------------------------------------------

double PilotFit::operator()(double x) const {
  const double z = (x - center) / scale;
  double acc = theta[theta.size() - 1];
  for (Eigen::Index j = theta.size() - 2; j >= 0; --j) acc = acc * z + theta[j];
  return acc;
}

PilotFit pilot_quantile_poly(const Vec& x, const Vec& y, double p, int degree) {
  if (x.size() != y.size() || x.size() == 0) throw Error("length mismatch");
  const auto n = static_cast<std::size_t>(x.size());
  PilotFit fit;
  fit.theta = Vec::Zero(degree + 1);
  const double qy = detail::empirical_quantile({y.data(), y.data() + n}, p);
  fit.theta[0] = qy;
  fit.center = x.mean();
  const double sd = std::sqrt((x.array() - fit.center).square().mean());
  if (!(sd > 0.0) || !std::isfinite(sd)) return fit;
  fit.scale = sd;

  Mat F(n, degree + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (x[i] - fit.center) / sd;
    double pw = 1.0;
    for (int j = 0; j <= degree; ++j) {
      F(i, j) = pw;
      pw *= z;
    }
  }
  auto objective = [&](const Vec& th) {
    const Vec r = y - F * th;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += check_loss(r[i], p);
    return s / static_cast<double>(n);
  };
  const double f_const = objective(fit.theta);
  const double ysd = std::sqrt((y.array() - y.mean()).square().mean());
  const double eta0 = ysd > 0.0 ? ysd : 1.0;

  Vec th = fit.theta;
  Vec best = th;
  double f_best = f_const;
  Vec grad(degree + 1);
  auto descend = [&](double eta, std::size_t steps, bool decay) {
    for (std::size_t k = 0; k < steps; ++k) {
      const Vec r = y - F * th;
      grad.setZero();
      for (std::size_t i = 0; i < n; ++i) {
        const double psi = r[i] > 0.0 ? p : (r[i] < 0.0 ? p - 1.0 : 0.0);
        grad -= psi * F.row(i).transpose();
      }
      grad /= static_cast<double>(n);
      const double gn = grad.norm();
      if (gn == 0.0) break;
      const double step = decay ? eta / std::sqrt(static_cast<double>(k) + 1.0) : eta;
      th -= step * grad / gn;
      const double f = objective(th);
      if (f < f_best) {
        f_best = f;
        best = th;
      }
    }
  };
  descend(eta0, 3000, true);
  double eta = eta0 / std::sqrt(3000.0);
  for (int epoch = 0; epoch < 25; ++epoch) {
    th = best;
    descend(eta, 200, false);
    eta *= 0.5;
  }
  if (best.allFinite() && f_best <= f_const) {
    fit.theta = best;
    fit.converged = true;
  }
  return fit;
}

namespace {

GcvFit gcv_search(const Mat& B, const Mat& K, const Vec& y, double lo_exp, double hi_exp) {
  const auto n = B.rows();
  const Mat BtB = B.transpose() * B;
  const Vec Bty = B.transpose() * y;
  GcvFit best{1.0, 1.0, Vec::Zero(B.cols())};
  double best_score = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 25; ++k) {
    const double alpha = std::pow(10.0, lo_exp + (hi_exp - lo_exp) * k / 24.0);
    const Mat A = BtB + alpha * K;
    Eigen::LDLT<Mat> ldlt(A);
    if (ldlt.info() != Eigen::Success) continue;
    const Vec g = ldlt.solve(Bty);
    const double tr = ldlt.solve(BtB).trace();
    const double rss = (y - B * g).squaredNorm();
    const double denom = static_cast<double>(n) - tr;
    if (!(denom > 0.0) || !std::isfinite(rss) || !g.allFinite()) continue;
    const double score = static_cast<double>(n) * rss / (denom * denom);
    if (score < best_score) {
      best_score = score;
      best = {alpha, std::max(rss / denom, 1e-12), g};
    }
  }
  return best;
}

}  // namespace

GcvFit gcv_smoothing_spline(const spline::NcsBasis& basis, const Vec& x, const Vec& y) {
  const auto N = static_cast<Eigen::Index>(basis.size());
  const auto n = x.size();
  auto shared = std::make_shared<const spline::NcsBasis>(basis);
  Mat B(n, N);
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < N; ++j) {
    spline::NcsCurve unit(shared, Vec::Unit(N, j));
    unit.evaluate({x.data(), static_cast<std::size_t>(n)}, col);
    for (Eigen::Index i = 0; i < n; ++i) B(i, j) = col[static_cast<std::size_t>(i)];
  }
  return gcv_search(B, basis.penalty().K, y, -4.0, 6.0);
}

GcvFit gcv_penalized_fit(const Mat& Z, const Mat& K, const Vec& y) {
  return gcv_search(Z, K, y, -8.0, 4.0);
}

// ---------------------------------------------------------------------------

ProxyLayer::ProxyLayer(const ModelSpec& spec,
                       std::shared_ptr<const spline::PsplineBasis> proxy_basis, const Vec& x0)
    : spec_(&spec), basis_(std::move(proxy_basis)) {
  const std::size_t K = spec.proxies.size();
  const std::size_t n = spec.data.n();
  params_.reserve(K);
  means_.assign(K, Vec(static_cast<Eigen::Index>(n)));
  star_.assign(K, Vec(static_cast<Eigen::Index>(n)));
  const std::span<const double> xs(x0.data(), n);
  for (std::size_t k = 0; k < K; ++k) {
    const ProxySpec& ps = spec.proxies[k];
    const Vec& w = spec.data.w[k];
    const double var_w = (w.array() - w.mean()).square().mean();
    switch (ps.kind) {
      case ProxyKind::Benchmark:
        params_.emplace_back(BenchmarkProxyParams{});
        break;
      case ProxyKind::Polynomial: {
        const Mat X = poly_design(xs, ps.degree);
        const Mat XtX = X.transpose() * X;
        const Vec alpha = JitteredCholesky(XtX + 1e-8 * Mat::Identity(XtX.rows(), XtX.cols()), true)
                              .solve(X.transpose() * w);
        params_.emplace_back(PolyProxyParams{alpha, 1.0});
        break;
      }
      case ProxyKind::Spline: {
        if (!basis_) throw Error("spline proxy needs a basis");
        const GcvFit fit = gcv_penalized_fit(basis_->design(xs), basis_->penalty().K, w);
        params_.emplace_back(
            SplineProxyParams{basis_, fit.g, std::clamp(fit.alpha / fit.sigma2, 1e-12, 1e12), 1.0});
        break;
      }
    }
    proxy_mean(ps, params_[k], xs, {means_[k].data(), n});
    const double rv = (w - means_[k]).squaredNorm() / static_cast<double>(n);
    set_proxy_sigma2(params_[k], std::max(rv, 0.25 * var_w));
  }
  int max_degree = 0;
  for (const auto& ps : spec.proxies) {
    if (ps.kind == ProxyKind::Polynomial) max_degree = std::max(max_degree, ps.degree);
  }
  prior_mean_ = Vec::Constant(max_degree + 1, spec.priors.alpha_mean);
  prior_cov_ = spec.priors.alpha_var * Mat::Identity(max_degree + 1, max_degree + 1);
}

void ProxyLayer::refresh(const Vec& x) {
  const auto n = static_cast<std::size_t>(x.size());
  for (std::size_t k = 0; k < params_.size(); ++k) {
    proxy_mean(spec_->proxies[k], params_[k], {x.data(), n}, {means_[k].data(), n});
  }
}

void ProxyLayer::add_log_ratio(std::span<const double> x_star, std::span<double> acc) {
  const std::size_t n = x_star.size();
  for (std::size_t k = 0; k < params_.size(); ++k) {
    proxy_mean(spec_->proxies[k], params_[k], x_star, {star_[k].data(), n});
    const Vec& w = spec_->data.w[k];
    simd::gauss_logratio_acc({w.data(), n}, {star_[k].data(), n}, {means_[k].data(), n},
                             0.5 / proxy_sigma2(params_[k]), acc);
  }
}

void ProxyLayer::accept_sites(const std::vector<char>& accepted) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    for (std::size_t i = 0; i < accepted.size(); ++i) {
      if (accepted[i]) means_[k][static_cast<Eigen::Index>(i)] = star_[k][static_cast<Eigen::Index>(i)];
    }
  }
}

void ProxyLayer::update_coefficients(std::size_t k, const Vec& x, SeededRng& rng,
                                     std::uint64_t& clamps) {
  const ProxySpec& ps = spec_->proxies[k];
  const Vec& w = spec_->data.w[k];
  const auto n = static_cast<std::size_t>(x.size());
  const std::span<const double> xs(x.data(), n);
  if (ps.kind == ProxyKind::Polynomial) {
    auto& pp = std::get<PolyProxyParams>(params_[k]);
    pp.alpha = update_poly_coeffs(xs, w, pp.sigma2, ps.degree, prior_mean_.head(ps.degree + 1),
                                  prior_cov_.topLeftCorner(ps.degree + 1, ps.degree + 1), rng);
  } else if (ps.kind == ProxyKind::Spline) {
    auto& sp = std::get<SplineProxyParams>(params_[k]);
    const Mat Z = basis_->design(xs);
    const auto& pen = basis_->penalty();
    sp.beta = update_spline_proxy_coeffs(Z, w, sp.sigma2, sp.lambda, pen.K, rng);
    sp.lambda = detail::clamp_positive(
        update_penalty_precision(pen.quad(sp.beta), pen.rank, spec_->priors.proxy_precision, rng),
        clamps);
  } else {
    return;
  }
  proxy_mean(ps, params_[k], xs, {means_[k].data(), n});
}

void ProxyLayer::update_variance(std::size_t k, SeededRng& rng, std::uint64_t& clamps) {
  const double s2 = update_proxy_variance(spec_->data.w[k], means_[k], spec_->priors.proxy_prior(k),
                                          rng);
  set_proxy_sigma2(params_[k], detail::clamp_positive(s2, clamps));
}

// ---------------------------------------------------------------------------

SampleRecorder::SampleRecorder(const ModelSpec& spec, const SamplerConfig& config,
                               std::size_t curve_dim, std::size_t n)
    : config_(&config), record_x_(config.record_x) {
  const auto D = static_cast<Eigen::Index>(config.draws());
  out_.proxies = spec.proxies;
  out_.curve.resize(D, static_cast<Eigen::Index>(curve_dim));
  out_.lambda.resize(D);
  out_.delta2 = Vec::Ones(D);
  out_.mu_x.resize(D);
  out_.sigma2_x.resize(D);
  out_.sigma2.assign(spec.proxies.size(), Vec(D));
  out_.proxy_coef.resize(spec.proxies.size());
  out_.proxy_lambda.resize(spec.proxies.size());
  out_.x_mean = Vec::Zero(static_cast<Eigen::Index>(n));
  if (record_x_) out_.x.resize(D, static_cast<Eigen::Index>(n));
  out_.iterations = config.iterations;
  out_.burnin = config.burnin;
  out_.thin = config.thin;
}

bool SampleRecorder::keep(std::size_t t) const {
  return t >= config_->burnin && (t - config_->burnin + 1) % config_->thin == 0;
}

void SampleRecorder::record(std::size_t row, const Vec& curve, double lambda, double delta2,
                            const LatentState& latent, const std::vector<ProxyParams>& proxies) {
  const auto r = static_cast<Eigen::Index>(row);
  out_.curve.row(r) = curve.transpose();
  out_.lambda[r] = lambda;
  out_.delta2[r] = delta2;
  out_.mu_x[r] = latent.mu_x;
  out_.sigma2_x[r] = latent.sigma2_x;
  for (std::size_t k = 0; k < proxies.size(); ++k) {
    out_.sigma2[k][r] = proxy_sigma2(proxies[k]);
    const Vec* coef = nullptr;
    if (const auto* pp = std::get_if<PolyProxyParams>(&proxies[k])) coef = &pp->alpha;
    if (const auto* sp = std::get_if<SplineProxyParams>(&proxies[k])) {
      coef = &sp->beta;
      if (out_.proxy_lambda[k].size() == 0) out_.proxy_lambda[k].resize(out_.curve.rows());
      out_.proxy_lambda[k][r] = sp->lambda;
    }
    if (coef) {
      if (out_.proxy_coef[k].rows() == 0) out_.proxy_coef[k].resize(out_.curve.rows(), coef->size());
      out_.proxy_coef[k].row(r) = coef->transpose();
    }
  }
  out_.x_mean += latent.x;
  if (record_x_) out_.x.row(r) = latent.x.transpose();
  if (row + 1 == static_cast<std::size_t>(out_.curve.rows())) {
    out_.x_mean /= static_cast<double>(out_.curve.rows());
  }
}

}  // namespace qrproxy
