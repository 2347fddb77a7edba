#include "qrproxy/sampler_pspline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qrproxy/simd/kernels.hpp"

namespace qrproxy {

namespace {

constexpr double kTargetScalar = 0.44;
constexpr double kResidualFloor = 1e-10;

double sample_sd(const Vec& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() /
                   std::max<double>(1.0, static_cast<double>(v.size()) - 1.0));
}

std::span<const double> as_span(const Vec& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

PsplineChainState init_pspline(const ModelSpec& spec, const SamplerConfig& config) {
  config.validate();
  const Vec& y = spec.data.y;
  PsplineChainState st;
  st.latent.x = config.fixed_x     ? *config.fixed_x
                 : config.initial_x ? *config.initial_x
                                    : spec.benchmark_proxy();
  if (st.latent.x.size() != y.size()) throw Error("length mismatch between y and fixed x");
  const Vec& x0 = st.latent.x;

  st.basis = std::make_shared<const spline::PsplineBasis>(
      detail::curve_grid(spec, config, x0, config.knots), config.spline_degree);
  const auto& grid = st.basis->grid();
  // Starting points outside the knot range are pulled onto its boundary.
  if (!config.fixed_x) {
    for (Eigen::Index i = 0; i < st.latent.x.size(); ++i) {
      st.latent.x[i] = std::clamp(st.latent.x[i], grid.lo(), grid.hi());
    }
  }

  const Mat Z = st.basis->design(as_span(st.latent.x));
  const GcvFit fit = gcv_penalized_fit(Z, st.basis->penalty().K, y);
  st.beta = fit.g;
  const Vec r = y - Z * st.beta;
  st.beta[0] += detail::empirical_quantile({r.data(), r.data() + r.size()}, spec.p.value());
  std::uint64_t unused = 0;
  st.lambda = detail::clamp_positive(fit.alpha / fit.sigma2, unused);
  st.s = Vec::Ones(y.size());
  st.delta2 = 1.0;

  st.latent.mu_x = st.latent.x.mean();
  const double sx = sample_sd(st.latent.x);
  st.latent.sigma2_x = std::max(sx * sx, 1e-8);
  const double wsd = sample_sd(spec.benchmark_proxy());
  st.x_scale = Vec::Constant(y.size(), config.x_scale0 * (wsd > 0.0 ? wsd : 1.0));
  return st;
}

PsplineSampler::PsplineSampler(const ModelSpec& spec, SamplerConfig config, SeededRng rng)
    : spec_(&spec),
      config_(std::move(config)),
      rng_(std::move(rng)),
      state_(init_pspline(spec, config_)),
      proxies_(spec, detail::proxy_basis_for(spec, config_, state_.basis->grid()), state_.latent.x),
      mix_(ald_mixture_params(spec.p.value())),
      frozen_(config_.fixed_x.has_value()) {
  state_.proxies = proxies_.params();
  sync();
}

void PsplineSampler::sync() {
  proxies_.mutable_params() = state_.proxies;
  proxies_.refresh(state_.latent.x);
  Z_ = state_.basis->design(as_span(state_.latent.x));
  fitted_ = Z_ * state_.beta;
}

Vec PsplineSampler::x_log_ratio(const Vec& x_star) {
  const auto n = static_cast<std::size_t>(x_star.size());
  const auto& grid = state_.basis->grid();
  const Vec& y = spec_->data.y;
  Vec fit_star(x_star.size());
  state_.basis->evaluate(state_.beta, as_span(x_star), {fit_star.data(), n});
  Vec acc(x_star.size());
  const double mu = state_.latent.mu_x;
  const double inv2 = 0.5 / state_.latent.sigma2_x;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double shift = mix_.A * state_.s[ii];
    const double c = state_.delta2 / (2.0 * mix_.B * state_.s[ii]);
    const double r0 = y[ii] - fitted_[ii] - shift;
    const double r1 = y[ii] - fit_star[ii] - shift;
    const double dn = x_star[ii] - mu;
    const double d0 = state_.latent.x[ii] - mu;
    acc[ii] = c * (r0 * r0 - r1 * r1) + (d0 * d0 - dn * dn) * inv2;
  }
  proxies_.add_log_ratio(as_span(x_star), {acc.data(), n});
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (!grid.contains(x_star[ii])) acc[ii] = -std::numeric_limits<double>::infinity();
  }
  fitted_star_ = std::move(fit_star);
  return acc;
}

void PsplineSampler::step_x() {
  if (frozen_) return;
  const auto n = static_cast<std::size_t>(state_.latent.x.size());
  Vec x_star(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    x_star[ii] = state_.latent.x[ii] + state_.x_scale[ii] * rng_.normal();
  }
  const Vec acc = x_log_ratio(x_star);
  std::vector<char> accepted(n, 0);
  last_x_prob_.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double u = rng_.uniform();
    ++state_.x_acc.proposed;
    last_x_prob_[ii] = acc[ii] >= 0.0 ? 1.0 : std::exp(acc[ii]);
    if (std::log(u) < acc[ii]) {
      accepted[i] = 1;
      ++state_.x_acc.accepted;
      state_.latent.x[ii] = x_star[ii];
      fitted_[ii] = fitted_star_[ii];
      Z_.row(ii) = state_.basis->row(x_star[ii]).transpose();
    }
  }
  proxies_.accept_sites(accepted);
}

void PsplineSampler::beta_system(Mat& prec, Vec& h) const {
  const Vec wts = (state_.delta2 / mix_.B) * state_.s.cwiseInverse();
  const Mat Zw = Z_.transpose() * wts.asDiagonal();
  prec = state_.lambda * state_.basis->penalty().K + Zw * Z_;
  h = Zw * (spec_->data.y - mix_.A * state_.s);
}

GaussianPosterior PsplineSampler::beta_posterior() const {
  GaussianPosterior post;
  Vec h;
  beta_system(post.precision, h);
  post.mean = JitteredCholesky(post.precision, true).solve(h);
  return post;
}

void PsplineSampler::step_beta() {
  Mat prec;
  Vec h;
  beta_system(prec, h);
  state_.beta = sample_mvn_canonical(prec, h, rng_).draw;
  fitted_ = Z_ * state_.beta;
}

GammaParams PsplineSampler::lambda_posterior() const {
  const auto& pen = state_.basis->penalty();
  return penalty_precision_posterior(pen.quad(state_.beta), pen.rank, spec_->priors.curve_precision);
}

void PsplineSampler::step_lambda() {
  const GammaParams g = lambda_posterior();
  state_.lambda = detail::clamp_positive(sample_gamma(g.shape, g.rate, rng_), clamps_);
}

std::pair<double, double> PsplineSampler::inv_s_params(std::size_t i) const {
  const auto ii = static_cast<Eigen::Index>(i);
  const double r = std::max(std::abs(spec_->data.y[ii] - fitted_[ii]), kResidualFloor);
  const double k = mix_.A * mix_.A + 2.0 * mix_.B;
  return {std::sqrt(k) / r, state_.delta2 * k / mix_.B};
}

void PsplineSampler::step_s() {
  for (std::size_t i = 0; i < static_cast<std::size_t>(state_.s.size()); ++i) {
    const auto [mean, shape] = inv_s_params(i);
    const double inv = sample_inverse_gaussian(mean, shape, rng_);
    state_.s[static_cast<Eigen::Index>(i)] = detail::clamp_positive(1.0 / inv, clamps_);
  }
}

GammaParams PsplineSampler::delta2_posterior() const {
  const GammaPrior& prior = spec_->priors.ald_precision;
  const Vec& y = spec_->data.y;
  double quad = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = y[i] - fitted_[i] - mix_.A * state_.s[i];
    quad += e * e / state_.s[i];
  }
  const auto n = static_cast<double>(y.size());
  return {prior.shape + 1.5 * n, prior.b + quad / (2.0 * mix_.B) + state_.s.sum()};
}

void PsplineSampler::step_delta2() {
  const GammaParams g = delta2_posterior();
  state_.delta2 = detail::clamp_positive(sample_gamma(g.shape, g.rate, rng_), clamps_);
}

void PsplineSampler::step_hyper() {
  if (frozen_) return;
  const PriorConfig& pr = spec_->priors;
  const auto mpost =
      latent_mean_posterior(state_.latent.x, state_.latent.sigma2_x, pr.mu_mean, pr.mu_var);
  state_.latent.mu_x = sample_normal(mpost.mean, std::sqrt(mpost.var), rng_);
  const auto vpost = latent_variance_posterior(state_.latent.x, state_.latent.mu_x, pr.latent_variance);
  state_.latent.sigma2_x =
      detail::clamp_positive(sample_inverse_gamma(vpost.shape, vpost.scale, rng_), clamps_);
  for (std::size_t k = 0; k < proxies_.size(); ++k) {
    proxies_.update_coefficients(k, state_.latent.x, rng_, clamps_);
    proxies_.update_variance(k, rng_, clamps_);
  }
  state_.proxies = proxies_.params();
}

void PsplineSampler::iterate(bool adapt) {
  step_x();
  step_beta();
  step_lambda();
  step_s();
  step_delta2();
  step_hyper();
  if (adapt && !frozen_) {
    const std::size_t t = state_.iteration;
    for (Eigen::Index i = 0; i < state_.x_scale.size(); ++i) {
      if (state_.x_scale[i] > 0.0) {
        state_.x_scale[i] = std::exp(detail::adapt_log_scale(std::log(state_.x_scale[i]),
                                                             last_x_prob_[i], kTargetScalar, t));
      }
    }
  }
  ++state_.iteration;
}

PosteriorSamples PsplineSampler::run() {
  const auto n = static_cast<std::size_t>(spec_->data.n());
  SampleRecorder rec(*spec_, config_, static_cast<std::size_t>(state_.beta.size()), n);
  std::size_t row = 0;
  for (std::size_t t = 0; t < config_.iterations; ++t) {
    iterate(config_.adapt && t < config_.burnin);
    if (rec.keep(t)) {
      rec.record(row++, state_.beta, state_.lambda, state_.delta2, state_.latent, state_.proxies);
    }
  }
  PosteriorSamples out = std::move(rec.samples());
  out.family = CurveFamily::Pspline;
  out.pspline = state_.basis;
  out.proxy_basis.assign(spec_->proxies.size(), nullptr);
  for (std::size_t k = 0; k < spec_->proxies.size(); ++k) {
    if (spec_->proxies[k].kind == ProxyKind::Spline) out.proxy_basis[k] = proxies_.basis();
  }
  if (!frozen_) out.acceptance.push_back(state_.x_acc);
  out.clamp_events = clamps_;
  out.seed = rng_.seed();
  out.stream = rng_.stream();
  return out;
}

PosteriorSamples run_pspline_chain(const ModelSpec& spec, const SamplerConfig& config,
                                   std::uint64_t seed, std::uint64_t stream) {
  PsplineSampler sampler(spec, config, SeededRng(seed, stream));
  return sampler.run();
}

}  // namespace qrproxy
