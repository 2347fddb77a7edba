#pragma once

#include <memory>
#include <span>
#include <variant>

#include "qrproxy/distributions.hpp"
#include "qrproxy/model.hpp"
#include "qrproxy/spline.hpp"

namespace qrproxy {

struct BenchmarkProxyParams {
  double sigma2 = 1.0;
};

/// h(x) = sum_j alpha_j x^j.
struct PolyProxyParams {
  Vec alpha;
  double sigma2 = 1.0;
};

/// h(x) = Z(x)^T beta with the truncated-power basis of `basis`.
struct SplineProxyParams {
  std::shared_ptr<const spline::PsplineBasis> basis;
  Vec beta;
  double lambda = 1.0;
  double sigma2 = 1.0;
};

using ProxyParams = std::variant<BenchmarkProxyParams, PolyProxyParams, SplineProxyParams>;

double proxy_sigma2(const ProxyParams& params);
void set_proxy_sigma2(ProxyParams& params, double sigma2);

double proxy_mean(const ProxySpec& spec, const ProxyParams& params, double x);
void proxy_mean(const ProxySpec& spec, const ProxyParams& params, std::span<const double> x,
                std::span<double> out);

/// Rows (1, x_i, .., x_i^degree).
Mat poly_design(std::span<const double> x, int degree);
double poly_eval(const Vec& alpha, double x);

/// Gaussian in canonical form: precision P and mean P^{-1} h.
struct GaussianPosterior {
  Mat precision;
  Vec mean;
};

/// alpha | x, w ~ N(mu*, V*) with V* = (X^T X / s2 + V_a^{-1})^{-1} and
/// mu* = V* (X^T w / s2 + V_a^{-1} mu_a).
GaussianPosterior poly_coeff_posterior(std::span<const double> x, const Vec& w, double sigma2,
                                       int degree, const Vec& prior_mean, const Mat& prior_cov);
Vec update_poly_coeffs(std::span<const double> x, const Vec& w, double sigma2, int degree,
                       const Vec& prior_mean, const Mat& prior_cov, SeededRng& rng);

/// beta_h | x, w ~ N(V* Z^T w / s2, V*) with V* = (lambda K + Z^T Z / s2)^{-1}.
GaussianPosterior spline_proxy_posterior(const Mat& Z, const Vec& w, double sigma2, double lambda,
                                         const Mat& K);
Vec update_spline_proxy_coeffs(const Mat& Z, const Vec& w, double sigma2, double lambda,
                               const Mat& K, SeededRng& rng);

struct InvGammaParams {
  double shape;
  double scale;
};
struct GammaParams {
  double shape;
  double rate;
};

/// IG(n/2 + a, b + sum (w - fitted)^2 / 2).
InvGammaParams proxy_variance_posterior(const Vec& w, const Vec& fitted, const InvGammaPrior& prior);
double update_proxy_variance(const Vec& w, const Vec& fitted, const InvGammaPrior& prior,
                             SeededRng& rng);

/// GA(a + rank/2, rate b + quad/2) for a penalty precision with a rate prior.
GammaParams penalty_precision_posterior(double quad, int rank, const GammaPrior& prior);
double update_penalty_precision(double quad, int rank, const GammaPrior& prior, SeededRng& rng);

/// mu_x | x ~ N(V (sum x / s2x + M / s2mu), V), V = (n / s2x + 1 / s2mu)^{-1}.
struct NormalParams {
  double mean;
  double var;
};
NormalParams latent_mean_posterior(const Vec& x, double sigma2_x, double prior_mean,
                                   double prior_var);
/// sigma_x^2 | x, mu ~ IG(n/2 + a, b + sum (x - mu)^2 / 2).
InvGammaParams latent_variance_posterior(const Vec& x, double mu_x, const InvGammaPrior& prior);

}  // namespace qrproxy
