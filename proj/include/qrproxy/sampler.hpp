#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrproxy/distributions.hpp"
#include "qrproxy/model.hpp"
#include "qrproxy/proxy_models.hpp"
#include "qrproxy/spline.hpp"

namespace qrproxy {

enum class CurveFamily { Ncs, Pspline };

std::string to_string(CurveFamily family);
CurveFamily parse_curve_family(const std::string& text);

/// Random-walk proposal for the joint NCS curve block.
enum class GProposal {
  Spherical,  // g* = g + s z
  Adaptive,   // g* = g + s L z, L from the burn-in empirical covariance
};

std::string to_string(GProposal kind);
GProposal parse_g_proposal(const std::string& text);

struct SamplerConfig {
  std::size_t iterations = 20000;
  std::size_t burnin = 5000;
  std::size_t thin = 10;
  std::size_t knots = 30;
  /// Knot count of the spline proxy basis; 0 reuses `knots`.
  std::size_t proxy_knots = 0;
  int spline_degree = 3;
  /// Knot range padding in units of sd(w_benchmark).
  double knot_pad = 0.5;
  /// Explicit knot range; overrides the padded proxy range when set.
  std::optional<std::pair<double, double>> knot_range;
  /// Frozen covariate. When set, x is not sampled and neither are the
  /// latent or proxy parameters (they do not enter the curve's conditional).
  std::optional<Vec> fixed_x;
  /// Starting x; defaults to the benchmark proxy.
  std::optional<Vec> initial_x;
  GProposal g_proposal = GProposal::Spherical;
  bool adapt = true;
  bool record_x = false;
  double lambda_scale0 = 0.5;
  /// Initial per-site x scale as a multiple of sd(w_benchmark).
  double x_scale0 = 0.5;

  void validate() const;
  std::size_t draws() const { return (iterations - burnin) / thin; }
};

struct BlockAcceptance {
  std::string name;
  std::uint64_t accepted = 0;
  std::uint64_t proposed = 0;

  double rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

/// Thinned posterior draws of one chain.
struct PosteriorSamples {
  CurveFamily family = CurveFamily::Ncs;
  std::shared_ptr<const spline::NcsBasis> ncs;
  std::shared_ptr<const spline::PsplineBasis> pspline;
  std::vector<ProxySpec> proxies;
  /// draws x dim: g at the knots (NCS) or beta_g (P-spline).
  Mat curve;
  Vec lambda;
  Vec delta2;
  Vec mu_x;
  Vec sigma2_x;
  /// Per proxy: sigma_k^2 draws, coefficient draws (rows; empty for the
  /// benchmark) and lambda_h draws (spline proxies only).
  std::vector<Vec> sigma2;
  std::vector<Mat> proxy_coef;
  std::vector<Vec> proxy_lambda;
  std::vector<std::shared_ptr<const spline::PsplineBasis>> proxy_basis;
  /// Posterior mean of x over kept draws, and the draws when recorded.
  Vec x_mean;
  Mat x;
  std::vector<BlockAcceptance> acceptance;
  std::uint64_t clamp_events = 0;

  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::size_t iterations = 0;
  std::size_t burnin = 0;
  std::size_t thin = 1;

  std::size_t draws() const { return static_cast<std::size_t>(curve.rows()); }
  /// Curve of draw d evaluated at x.
  void curve_at(std::size_t d, std::span<const double> x, std::span<double> out) const;
  /// draws x m matrix of curve values.
  Mat curve_draws_at(std::span<const double> x) const;
  /// draws x m matrix of h_k values for proxy k.
  Mat proxy_draws_at(std::size_t k, std::span<const double> x) const;
  const BlockAcceptance* find_acceptance(const std::string& name) const;
};

namespace detail {

/// Robbins-Monro step on a log proposal scale toward a target acceptance.
inline double adapt_log_scale(double log_scale, double accept_prob, double target,
                              std::size_t t) {
  const double gain = std::pow(static_cast<double>(t) + 1.0, -0.6);
  return log_scale + gain * (accept_prob - target);
}

/// Clamp a positive parameter into [1e-12, 1e12], counting clamps.
double clamp_positive(double v, std::uint64_t& events);

spline::KnotGrid curve_grid(const ModelSpec& spec, const SamplerConfig& config, const Vec& x0,
                            std::size_t count);

/// Basis for spline proxies on `grid` (or a regrid with config.proxy_knots);
/// null when the model has no spline proxy.
std::shared_ptr<const spline::PsplineBasis> proxy_basis_for(const ModelSpec& spec,
                                                            const SamplerConfig& config,
                                                            const spline::KnotGrid& grid);

/// Empirical p-quantile (type 7).
double empirical_quantile(std::vector<double> v, double p);

}  // namespace detail

/// Quantile fit of y on a polynomial in x by subgradient descent on the
/// check loss, in standardized x. `converged` is false when the fit is not
/// finite or does not beat the best constant.
struct PilotFit {
  Vec theta;
  double center = 0.0;
  double scale = 1.0;
  bool converged = false;

  double operator()(double x) const;
};
PilotFit pilot_quantile_poly(const Vec& x, const Vec& y, double p, int degree);

/// GCV-selected smoothing parameter alpha of the mean smoothing spline
/// min sum (y - g(x))^2 + alpha g^T K g over NCS values at the knots, with
/// its residual variance RSS / (n - tr H).
struct GcvFit {
  double alpha;
  double sigma2;
  Vec g;
};
GcvFit gcv_smoothing_spline(const spline::NcsBasis& basis, const Vec& x, const Vec& y);
/// Same criterion for a generic penalized fit min |y - Z b|^2 + alpha b^T K b;
/// alpha searched over 10^{-8..4}.
GcvFit gcv_penalized_fit(const Mat& Z, const Mat& K, const Vec& y);

/// Proxy parameters, fitted means at the current x, and the conjugate
/// updates shared by both samplers.
class ProxyLayer {
 public:
  ProxyLayer(const ModelSpec& spec, std::shared_ptr<const spline::PsplineBasis> proxy_basis,
             const Vec& x0);

  std::size_t size() const { return params_.size(); }
  const std::vector<ProxyParams>& params() const { return params_; }
  std::vector<ProxyParams>& mutable_params() { return params_; }
  const Vec& mean_at_x(std::size_t k) const { return means_[k]; }
  const std::shared_ptr<const spline::PsplineBasis>& basis() const { return basis_; }

  /// Recompute every fitted mean at x.
  void refresh(const Vec& x);
  /// Per-site log ratio of the proxy likelihoods at x_star versus the
  /// current x, added to acc. Leaves candidate means in the scratch buffers.
  void add_log_ratio(std::span<const double> x_star, std::span<double> acc);
  /// Adopt candidate means at accepted sites.
  void accept_sites(const std::vector<char>& accepted);

  void update_coefficients(std::size_t k, const Vec& x, SeededRng& rng, std::uint64_t& clamps);
  void update_variance(std::size_t k, SeededRng& rng, std::uint64_t& clamps);

 private:
  const ModelSpec* spec_;
  std::shared_ptr<const spline::PsplineBasis> basis_;
  std::vector<ProxyParams> params_;
  std::vector<Vec> means_;
  std::vector<Vec> star_;
  Vec prior_mean_;
  Mat prior_cov_;
};

/// Collects thinned draws while a chain runs.
class SampleRecorder {
 public:
  SampleRecorder(const ModelSpec& spec, const SamplerConfig& config, std::size_t curve_dim,
                 std::size_t n);
  bool keep(std::size_t t) const;
  void record(std::size_t row, const Vec& curve, double lambda, double delta2,
              const LatentState& latent, const std::vector<ProxyParams>& proxies);
  PosteriorSamples& samples() { return out_; }

 private:
  const SamplerConfig* config_;
  PosteriorSamples out_;
  bool record_x_;
};

}  // namespace qrproxy
