#pragma once

#include "qrproxy/sampler.hpp"

namespace qrproxy {

struct NcsChainState {
  std::shared_ptr<const spline::NcsBasis> basis;
  Vec g;
  double lambda = 1.0;
  LatentState latent;
  std::vector<ProxyParams> proxies;
  std::size_t iteration = 0;
  BlockAcceptance g_acc{"g"};
  BlockAcceptance lambda_acc{"lambda"};
  BlockAcceptance x_acc{"x"};
  double g_scale = 0.1;
  double lambda_scale = 0.5;
  Vec x_scale;
};

/// Initial state: x = w_benchmark (or the frozen x), g from a quadratic
/// pilot quantile fit evaluated at the knots, lambda from GCV.
NcsChainState init_ncs(const ModelSpec& spec, const SamplerConfig& config);

/// Gibbs / Metropolis-Hastings sampler for the natural cubic spline
/// quantile curve with latent covariate and K proxies.
class NcsSampler {
 public:
  NcsSampler(const ModelSpec& spec, SamplerConfig config, SeededRng rng);

  const NcsChainState& state() const { return state_; }
  /// For tests: edit the state, then call sync() to rebuild caches.
  NcsChainState& mutable_state() { return state_; }
  void sync();

  void step_g();
  void step_lambda();
  void step_x();
  void step_conjugates();
  /// One full sweep; adapts proposal scales when `adapt` is set.
  void iterate(bool adapt);

  /// log of the MH ratio for moving the current state to the candidate.
  double g_log_ratio(const Vec& g_star) const;
  double lambda_log_ratio(double lambda_star) const;
  /// Per-site log ratios for a candidate x (all sites at once).
  Vec x_log_ratio(const Vec& x_star);

  /// Curve at the current x.
  const Vec& fitted() const { return fitted_; }
  const SamplerConfig& config() const { return config_; }
  std::uint64_t clamp_events() const { return clamps_; }

  PosteriorSamples run();

 private:
  double curve_loss(const Vec& g, Vec& fitted_out) const;
  void x_ratio_into(std::span<const double> x_star, std::span<double> acc,
                    std::vector<std::int32_t>& idx_star, std::vector<double>& fit_star);
  void adapt_g_proposal(double accept_prob);

  const ModelSpec* spec_;
  SamplerConfig config_;
  SeededRng rng_;
  NcsChainState state_;
  ProxyLayer proxies_;
  bool frozen_;

  std::vector<std::int32_t> idx_;
  Vec fitted_;
  Vec resid_scratch_;
  double loss_ = 0.0;
  double quad_ = 0.0;
  std::uint64_t clamps_ = 0;
  double last_g_prob_ = 0.0;
  double last_lambda_prob_ = 0.0;
  Vec last_x_prob_;

  // Adaptive curve proposal.
  Vec g_sum_;
  Mat g_outer_;
  std::size_t g_count_ = 0;
  Mat g_chol_;
  bool g_chol_ready_ = false;
};

PosteriorSamples run_ncs_chain(const ModelSpec& spec, const SamplerConfig& config,
                               std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace qrproxy
