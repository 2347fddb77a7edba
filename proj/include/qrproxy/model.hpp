#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qrproxy {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised for every contract violation in the engine (bad input, bad config,
/// numerical factorization failure).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QuantileLevel {
 public:
  explicit QuantileLevel(double p);
  double value() const { return p_; }

 private:
  double p_;
};

/// Outcome y and the K proxy columns w_1..w_K, all of length n.
struct ObservedData {
  Vec y;
  std::vector<Vec> w;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t num_proxies() const { return w.size(); }
};

enum class ProxyKind { Benchmark, Polynomial, Spline };

/// How proxy k relates to the latent covariate: identity (benchmark),
/// polynomial of a fixed degree, or a penalized truncated-power spline.
struct ProxySpec {
  ProxyKind kind = ProxyKind::Benchmark;
  int degree = 1;

  static ProxySpec benchmark() { return {ProxyKind::Benchmark, 1}; }
  static ProxySpec polynomial(int degree) { return {ProxyKind::Polynomial, degree}; }
  static ProxySpec spline(int degree = 3) { return {ProxyKind::Spline, degree}; }

  std::string to_string() const;
  static ProxySpec parse(const std::string& text);

  bool operator==(const ProxySpec&) const = default;
};

/// Inverse gamma with shape/scale; density proportional to v^{-a-1} exp(-b/v).
struct InvGammaPrior {
  double shape = 0.01;
  double scale = 0.01;
};

/// Gamma prior pair. `b` is read as a scale for the NCS smoothing precision
/// (density lambda^{a-1} exp(-lambda/b)) and as a rate for the P-spline
/// precisions and delta^2; see the samplers for where each is consumed.
struct GammaPrior {
  double shape = 0.01;
  double b = 0.01;
};

struct PriorConfig {
  InvGammaPrior proxy_variance;          // default for every sigma_k^2
  std::vector<InvGammaPrior> per_proxy;  // optional overrides, size K when set
  InvGammaPrior latent_variance;         // sigma_x^2
  GammaPrior curve_precision;            // lambda (NCS) or lambda_g (P-spline)
  GammaPrior proxy_precision;            // lambda_h for spline proxies
  GammaPrior ald_precision;              // delta^2
  double mu_mean = 0.0;                  // M_mu
  double mu_var = 100.0;                 // sigma_mu^2
  double alpha_mean = 0.0;               // entries of mu_alpha
  double alpha_var = 100.0;              // V_alpha = alpha_var * I

  const InvGammaPrior& proxy_prior(std::size_t k) const {
    return per_proxy.empty() ? proxy_variance : per_proxy.at(k);
  }
  void validate(std::size_t num_proxies) const;
};

struct LatentState {
  Vec x;
  double mu_x = 0.0;
  double sigma2_x = 1.0;
};

/// A validated model: data, proxy structure, quantile level and priors.
/// Immutable once built by validate_model().
struct ModelSpec {
  ObservedData data;
  std::vector<ProxySpec> proxies;
  QuantileLevel p{0.5};
  PriorConfig priors;
  std::size_t benchmark = 0;

  const Vec& benchmark_proxy() const { return data.w[benchmark]; }
};

ModelSpec validate_model(ObservedData data, std::vector<ProxySpec> specs, double p,
                         PriorConfig priors = {});

}  // namespace qrproxy
