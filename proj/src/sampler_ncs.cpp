#include "qrproxy/sampler_ncs.hpp"

#include <cmath>

#include "qrproxy/qr_likelihood.hpp"
#include "qrproxy/simd/kernels.hpp"

namespace qrproxy {

namespace {

constexpr double kTargetJoint = 0.234;
constexpr double kTargetScalar = 0.44;

double sample_sd(const Vec& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() /
                   std::max<double>(1.0, static_cast<double>(v.size()) - 1.0));
}

std::span<const double> as_span(const Vec& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<double> as_span(Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

NcsChainState init_ncs(const ModelSpec& spec, const SamplerConfig& config) {
  config.validate();
  const Vec& y = spec.data.y;
  NcsChainState st;
  st.latent.x = config.fixed_x     ? *config.fixed_x
                 : config.initial_x ? *config.initial_x
                                    : spec.benchmark_proxy();
  if (st.latent.x.size() != y.size()) throw Error("length mismatch between y and fixed x");
  const Vec& x0 = st.latent.x;

  st.basis = std::make_shared<const spline::NcsBasis>(
      detail::curve_grid(spec, config, x0, config.knots));
  const auto& grid = st.basis->grid();
  const double p = spec.p.value();

  const PilotFit pilot = pilot_quantile_poly(x0, y, p, 2);
  st.g.resize(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    st.g[static_cast<Eigen::Index>(j)] = pilot.converged ? pilot(grid[j]) : pilot.theta[0];
  }

  const GcvFit gcv = gcv_smoothing_spline(*st.basis, x0, y);
  std::uint64_t unused = 0;
  st.lambda = detail::clamp_positive(gcv.alpha / gcv.sigma2, unused);

  st.latent.mu_x = x0.mean();
  st.latent.sigma2_x = std::max(sample_sd(x0) * sample_sd(x0), 1e-8);
  const double ysd = sample_sd(y);
  st.g_scale = 0.05 * (ysd > 0.0 ? ysd : 1.0);
  st.lambda_scale = config.lambda_scale0;
  const double wsd = sample_sd(spec.benchmark_proxy());
  st.x_scale = Vec::Constant(x0.size(), config.x_scale0 * (wsd > 0.0 ? wsd : 1.0));
  return st;
}

NcsSampler::NcsSampler(const ModelSpec& spec, SamplerConfig config, SeededRng rng)
    : spec_(&spec),
      config_(std::move(config)),
      rng_(std::move(rng)),
      state_(init_ncs(spec, config_)),
      proxies_(spec, detail::proxy_basis_for(spec, config_, state_.basis->grid()), state_.latent.x),
      frozen_(config_.fixed_x.has_value()) {
  state_.proxies = proxies_.params();
  sync();
}

void NcsSampler::sync() {
  proxies_.mutable_params() = state_.proxies;
  proxies_.refresh(state_.latent.x);
  const auto& grid = state_.basis->grid();
  const auto n = state_.latent.x.size();
  idx_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx_[static_cast<std::size_t>(i)] = grid.interval(state_.latent.x[i]);
  fitted_.resize(n);
  resid_scratch_.resize(n);
  loss_ = curve_loss(state_.g, fitted_);
  quad_ = state_.basis->penalty().quad(state_.g);
}

double NcsSampler::curve_loss(const Vec& g, Vec& fitted_out) const {
  const spline::NcsCurve curve(state_.basis, g);
  curve.evaluate(as_span(state_.latent.x), idx_, as_span(fitted_out));
  const Vec r = spec_->data.y - fitted_out;
  return simd::check_loss_sum(as_span(r), spec_->p.value());
}

double NcsSampler::g_log_ratio(const Vec& g_star) const {
  Vec fit(fitted_.size());
  const double loss = curve_loss(g_star, fit);
  const double quad = state_.basis->penalty().quad(g_star);
  return -(loss - loss_) - 0.5 * state_.lambda * (quad - quad_);
}

double NcsSampler::lambda_log_ratio(double lambda_star) const {
  const GammaPrior& prior = spec_->priors.curve_precision;
  const double half_rank = 0.5 * static_cast<double>(state_.basis->penalty().rank);
  return (half_rank + prior.shape) * (std::log(lambda_star) - std::log(state_.lambda)) -
         (lambda_star - state_.lambda) * (0.5 * quad_ + 1.0 / prior.b);
}

void NcsSampler::x_ratio_into(std::span<const double> x_star, std::span<double> acc,
                              std::vector<std::int32_t>& idx_star, std::vector<double>& fit_star) {
  const std::size_t n = x_star.size();
  const auto& grid = state_.basis->grid();
  const auto& x = state_.latent.x;
  const Vec& y = spec_->data.y;
  const double p = spec_->p.value();
  idx_star.resize(n);
  fit_star.resize(n);
  for (std::size_t i = 0; i < n; ++i) idx_star[i] = grid.interval(x_star[i]);
  spline::NcsCurve(state_.basis, state_.g).evaluate(x_star, idx_star, fit_star);

  std::vector<double> r_new(n), r_old(n), l_new(n), l_old(n);
  for (std::size_t i = 0; i < n; ++i) {
    r_new[i] = y[static_cast<Eigen::Index>(i)] - fit_star[i];
    r_old[i] = y[static_cast<Eigen::Index>(i)] - fitted_[static_cast<Eigen::Index>(i)];
  }
  simd::check_loss(r_new, p, l_new);
  simd::check_loss(r_old, p, l_old);
  const double mu = state_.latent.mu_x;
  const double inv2 = 0.5 / state_.latent.sigma2_x;
  for (std::size_t i = 0; i < n; ++i) {
    const double dn = x_star[i] - mu;
    const double d0 = x[static_cast<Eigen::Index>(i)] - mu;
    acc[i] = (l_old[i] - l_new[i]) + (d0 * d0 - dn * dn) * inv2;
  }
  proxies_.add_log_ratio(x_star, acc);
}

Vec NcsSampler::x_log_ratio(const Vec& x_star) {
  Vec acc(x_star.size());
  std::vector<std::int32_t> idx;
  std::vector<double> fit;
  x_ratio_into(as_span(x_star), as_span(acc), idx, fit);
  return acc;
}

void NcsSampler::step_g() {
  const auto N = state_.g.size();
  Vec z(N);
  for (Eigen::Index j = 0; j < N; ++j) z[j] = rng_.normal();
  Vec g_star = state_.g;
  if (state_.g_scale > 0.0) {
    g_star += state_.g_scale * (g_chol_ready_ ? Vec(g_chol_ * z) : z);
  }
  Vec fit(fitted_.size());
  const double loss = curve_loss(g_star, fit);
  const double quad = state_.basis->penalty().quad(g_star);
  const double lr = -(loss - loss_) - 0.5 * state_.lambda * (quad - quad_);
  const double u = rng_.uniform();
  ++state_.g_acc.proposed;
  const bool accept = std::log(u) < lr;
  if (accept) {
    ++state_.g_acc.accepted;
    state_.g = std::move(g_star);
    fitted_ = std::move(fit);
    loss_ = loss;
    quad_ = quad;
  }
  last_g_prob_ = lr >= 0.0 ? 1.0 : std::exp(lr);
}

void NcsSampler::step_lambda() {
  const double z = rng_.normal();
  const double lambda_star = state_.lambda * std::exp(state_.lambda_scale * z);
  const double lr = lambda_log_ratio(lambda_star);
  const double u = rng_.uniform();
  ++state_.lambda_acc.proposed;
  if (std::log(u) < lr) {
    ++state_.lambda_acc.accepted;
    state_.lambda = detail::clamp_positive(lambda_star, clamps_);
  }
  last_lambda_prob_ = lr >= 0.0 ? 1.0 : std::exp(lr);
}

void NcsSampler::step_x() {
  if (frozen_) return;
  const auto n = static_cast<std::size_t>(state_.latent.x.size());
  Vec x_star(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    x_star[ii] = state_.latent.x[ii] + state_.x_scale[ii] * rng_.normal();
  }
  Vec acc(static_cast<Eigen::Index>(n));
  std::vector<std::int32_t> idx_star;
  std::vector<double> fit_star;
  x_ratio_into(as_span(x_star), as_span(acc), idx_star, fit_star);
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
      idx_[i] = idx_star[i];
      fitted_[ii] = fit_star[i];
    }
  }
  proxies_.accept_sites(accepted);
  const Vec r = spec_->data.y - fitted_;
  loss_ = simd::check_loss_sum(as_span(r), spec_->p.value());
}

void NcsSampler::step_conjugates() {
  if (frozen_) return;
  const PriorConfig& pr = spec_->priors;
  for (std::size_t k = 0; k < proxies_.size(); ++k) proxies_.update_variance(k, rng_, clamps_);
  const auto vpost = latent_variance_posterior(state_.latent.x, state_.latent.mu_x, pr.latent_variance);
  state_.latent.sigma2_x =
      detail::clamp_positive(sample_inverse_gamma(vpost.shape, vpost.scale, rng_), clamps_);
  const auto mpost = latent_mean_posterior(state_.latent.x, state_.latent.sigma2_x, pr.mu_mean, pr.mu_var);
  state_.latent.mu_x = sample_normal(mpost.mean, std::sqrt(mpost.var), rng_);
  for (std::size_t k = 0; k < proxies_.size(); ++k) {
    proxies_.update_coefficients(k, state_.latent.x, rng_, clamps_);
  }
  state_.proxies = proxies_.params();
}

void NcsSampler::adapt_g_proposal(double accept_prob) {
  const std::size_t t = state_.iteration;
  const auto N = state_.g.size();
  if (state_.g_scale > 0.0) {
    state_.g_scale = std::exp(detail::adapt_log_scale(std::log(state_.g_scale), accept_prob,
                                                      kTargetJoint, t));
  }
  if (config_.g_proposal != GProposal::Adaptive) return;
  if (g_count_ == 0) {
    g_sum_ = Vec::Zero(N);
    g_outer_ = Mat::Zero(N, N);
  }
  g_sum_ += state_.g;
  g_outer_.noalias() += state_.g * state_.g.transpose();
  ++g_count_;
  const std::size_t start = std::max<std::size_t>(200, config_.burnin / 10);
  if (g_count_ >= start && g_count_ % 100 == 0 && t + 1 < config_.burnin) {
    const double c = static_cast<double>(g_count_);
    const Vec mean = g_sum_ / c;
    Mat cov = (g_outer_ - c * mean * mean.transpose()) / (c - 1.0);
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += 1e-10 * std::max(cov.diagonal().mean(), 1e-300);
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() == Eigen::Success) {
      if (!g_chol_ready_ && state_.g_scale > 0.0) {
        state_.g_scale = 2.38 / std::sqrt(static_cast<double>(N));
      }
      g_chol_ = llt.matrixL();
      g_chol_ready_ = true;
    }
  }
}

void NcsSampler::iterate(bool adapt) {
  step_g();
  step_lambda();
  step_x();
  step_conjugates();
  if (adapt) {
    const std::size_t t = state_.iteration;
    adapt_g_proposal(last_g_prob_);
    if (state_.lambda_scale > 0.0) {
      state_.lambda_scale = std::exp(detail::adapt_log_scale(std::log(state_.lambda_scale),
                                                             last_lambda_prob_, kTargetScalar, t));
    }
    if (!frozen_) {
      for (Eigen::Index i = 0; i < state_.x_scale.size(); ++i) {
        if (state_.x_scale[i] > 0.0) {
          state_.x_scale[i] = std::exp(detail::adapt_log_scale(std::log(state_.x_scale[i]),
                                                               last_x_prob_[i], kTargetScalar, t));
        }
      }
    }
  }
  ++state_.iteration;
}

PosteriorSamples NcsSampler::run() {
  const auto n = static_cast<std::size_t>(spec_->data.n());
  SampleRecorder rec(*spec_, config_, static_cast<std::size_t>(state_.g.size()), n);
  std::size_t row = 0;
  for (std::size_t t = 0; t < config_.iterations; ++t) {
    iterate(config_.adapt && t < config_.burnin);
    if (rec.keep(t)) {
      rec.record(row++, state_.g, state_.lambda, 1.0, state_.latent, state_.proxies);
    }
  }
  PosteriorSamples out = std::move(rec.samples());
  out.family = CurveFamily::Ncs;
  out.ncs = state_.basis;
  out.proxy_basis.assign(spec_->proxies.size(), nullptr);
  for (std::size_t k = 0; k < spec_->proxies.size(); ++k) {
    if (spec_->proxies[k].kind == ProxyKind::Spline) out.proxy_basis[k] = proxies_.basis();
  }
  out.acceptance = {state_.g_acc, state_.lambda_acc};
  if (!frozen_) out.acceptance.push_back(state_.x_acc);
  out.clamp_events = clamps_;
  out.seed = rng_.seed();
  out.stream = rng_.stream();
  return out;
}

PosteriorSamples run_ncs_chain(const ModelSpec& spec, const SamplerConfig& config,
                               std::uint64_t seed, std::uint64_t stream) {
  NcsSampler sampler(spec, config, SeededRng(seed, stream));
  return sampler.run();
}

}  // namespace qrproxy
