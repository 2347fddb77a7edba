#pragma once

#include "qrproxy/qr_likelihood.hpp"
#include "qrproxy/sampler.hpp"

namespace qrproxy {

struct PsplineChainState {
  std::shared_ptr<const spline::PsplineBasis> basis;
  Vec beta;
  double lambda = 1.0;
  /// Latent exponential scales of the ALD mixture.
  Vec s;
  double delta2 = 1.0;
  LatentState latent;
  std::vector<ProxyParams> proxies;
  std::size_t iteration = 0;
  BlockAcceptance x_acc{"x"};
  Vec x_scale;
};

/// Initial state: beta_g from a GCV penalized least-squares fit on the
/// starting x with its intercept shifted to the p-quantile of the residuals,
/// lambda_g from the same fit, s = 1, delta2 = 1.
PsplineChainState init_pspline(const ModelSpec& spec, const SamplerConfig& config);

/// Gibbs sampler for the P-spline quantile curve under the ALD scale
/// mixture, with Metropolis-Hastings steps for the latent covariate.
class PsplineSampler {
 public:
  PsplineSampler(const ModelSpec& spec, SamplerConfig config, SeededRng rng);

  const PsplineChainState& state() const { return state_; }
  PsplineChainState& mutable_state() { return state_; }
  void sync();

  void step_x();
  void step_beta();
  void step_lambda();
  void step_s();
  void step_delta2();
  void step_hyper();
  void iterate(bool adapt);

  /// Per-site log ratios for a candidate x; -inf outside the knot range.
  Vec x_log_ratio(const Vec& x_star);
  /// Full conditional of beta_g in canonical form.
  GaussianPosterior beta_posterior() const;
  GammaParams lambda_posterior() const;
  GammaParams delta2_posterior() const;
  /// Inverse-Gaussian parameters of 1/s_i.
  std::pair<double, double> inv_s_params(std::size_t i) const;

  const Vec& fitted() const { return fitted_; }
  const Mat& design() const { return Z_; }
  const AldMixture& mixture() const { return mix_; }
  std::uint64_t clamp_events() const { return clamps_; }

  PosteriorSamples run();

 private:
  void beta_system(Mat& prec, Vec& h) const;

  const ModelSpec* spec_;
  SamplerConfig config_;
  SeededRng rng_;
  PsplineChainState state_;
  ProxyLayer proxies_;
  AldMixture mix_;
  bool frozen_;

  Mat Z_;
  Vec fitted_;
  std::uint64_t clamps_ = 0;
  Vec last_x_prob_;
  Vec fitted_star_;
};

PosteriorSamples run_pspline_chain(const ModelSpec& spec, const SamplerConfig& config,
                                   std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace qrproxy
