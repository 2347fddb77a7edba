#include "qrproxy/proxy_models.hpp"

#include <cmath>

#include "qrproxy/simd/kernels.hpp"

namespace qrproxy {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_match(const ProxySpec& spec, const ProxyParams& params) {
  const bool ok = (spec.kind == ProxyKind::Benchmark &&
                   std::holds_alternative<BenchmarkProxyParams>(params)) ||
                  (spec.kind == ProxyKind::Polynomial &&
                   std::holds_alternative<PolyProxyParams>(params) &&
                   std::get<PolyProxyParams>(params).alpha.size() == spec.degree + 1) ||
                  (spec.kind == ProxyKind::Spline &&
                   std::holds_alternative<SplineProxyParams>(params));
  if (!ok) throw Error("proxy parameters do not match proxy spec");
}

}  // namespace

double proxy_sigma2(const ProxyParams& params) {
  return std::visit([](const auto& p) { return p.sigma2; }, params);
}

void set_proxy_sigma2(ProxyParams& params, double sigma2) {
  std::visit([sigma2](auto& p) { p.sigma2 = sigma2; }, params);
}

double poly_eval(const Vec& alpha, double x) {
  double acc = alpha[alpha.size() - 1];
  for (Eigen::Index j = alpha.size() - 2; j >= 0; --j) acc = acc * x + alpha[j];
  return acc;
}

double proxy_mean(const ProxySpec& spec, const ProxyParams& params, double x) {
  check_match(spec, params);
  return std::visit(overloaded{[x](const BenchmarkProxyParams&) { return x; },
                               [x](const PolyProxyParams& p) { return poly_eval(p.alpha, x); },
                               [x](const SplineProxyParams& p) {
                                 return p.basis->evaluate(p.beta, x);
                               }},
                    params);
}

void proxy_mean(const ProxySpec& spec, const ProxyParams& params, std::span<const double> x,
                std::span<double> out) {
  check_match(spec, params);
  std::visit(overloaded{[&](const BenchmarkProxyParams&) {
                          std::copy(x.begin(), x.end(), out.begin());
                        },
                        [&](const PolyProxyParams& p) {
                          for (std::size_t i = 0; i < x.size(); ++i) out[i] = poly_eval(p.alpha, x[i]);
                        },
                        [&](const SplineProxyParams& p) { p.basis->evaluate(p.beta, x, out); }},
             params);
}

Mat poly_design(std::span<const double> x, int degree) {
  Mat X(x.size(), degree + 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pw = 1.0;
    for (int j = 0; j <= degree; ++j) {
      X(i, j) = pw;
      pw *= x[i];
    }
  }
  return X;
}

GaussianPosterior poly_coeff_posterior(std::span<const double> x, const Vec& w, double sigma2,
                                       int degree, const Vec& prior_mean, const Mat& prior_cov) {
  if (static_cast<std::size_t>(w.size()) != x.size()) throw Error("length mismatch");
  if (prior_mean.size() != degree + 1 || prior_cov.rows() != degree + 1) {
    throw Error("prior dimension mismatch");
  }
  const Mat X = poly_design(x, degree);
  const JitteredCholesky prior_chol(prior_cov);
  const Mat prior_prec = prior_chol.inverse();
  GaussianPosterior post;
  post.precision = X.transpose() * X / sigma2 + prior_prec;
  const Vec h = X.transpose() * w / sigma2 + prior_prec * prior_mean;
  post.mean = JitteredCholesky(post.precision, true).solve(h);
  return post;
}

Vec update_poly_coeffs(std::span<const double> x, const Vec& w, double sigma2, int degree,
                       const Vec& prior_mean, const Mat& prior_cov, SeededRng& rng) {
  const auto post = poly_coeff_posterior(x, w, sigma2, degree, prior_mean, prior_cov);
  return sample_mvn_precision(post.mean, post.precision, rng);
}

GaussianPosterior spline_proxy_posterior(const Mat& Z, const Vec& w, double sigma2, double lambda,
                                         const Mat& K) {
  if (Z.rows() != w.size()) throw Error("length mismatch");
  if (K.rows() != Z.cols()) throw Error("penalty dimension mismatch");
  GaussianPosterior post;
  post.precision = lambda * K + Z.transpose() * Z / sigma2;
  post.mean = JitteredCholesky(post.precision, true).solve(Z.transpose() * w / sigma2);
  return post;
}

Vec update_spline_proxy_coeffs(const Mat& Z, const Vec& w, double sigma2, double lambda,
                               const Mat& K, SeededRng& rng) {
  if (Z.rows() != w.size()) throw Error("length mismatch");
  if (K.rows() != Z.cols()) throw Error("penalty dimension mismatch");
  const Mat prec = lambda * K + Z.transpose() * Z / sigma2;
  return sample_mvn_canonical(prec, Z.transpose() * w / sigma2, rng).draw;
}

InvGammaParams proxy_variance_posterior(const Vec& w, const Vec& fitted,
                                        const InvGammaPrior& prior) {
  if (w.size() != fitted.size()) throw Error("length mismatch");
  const auto n = static_cast<std::size_t>(w.size());
  const double ss = simd::sq_diff_sum({w.data(), n}, {fitted.data(), n});
  return {0.5 * static_cast<double>(n) + prior.shape, prior.scale + 0.5 * ss};
}

double update_proxy_variance(const Vec& w, const Vec& fitted, const InvGammaPrior& prior,
                             SeededRng& rng) {
  const auto post = proxy_variance_posterior(w, fitted, prior);
  return sample_inverse_gamma(post.shape, post.scale, rng);
}

GammaParams penalty_precision_posterior(double quad, int rank, const GammaPrior& prior) {
  return {prior.shape + 0.5 * rank, prior.b + 0.5 * std::max(quad, 0.0)};
}

double update_penalty_precision(double quad, int rank, const GammaPrior& prior, SeededRng& rng) {
  const auto post = penalty_precision_posterior(quad, rank, prior);
  return sample_gamma(post.shape, post.rate, rng);
}

NormalParams latent_mean_posterior(const Vec& x, double sigma2_x, double prior_mean,
                                   double prior_var) {
  const double n = static_cast<double>(x.size());
  const double v = 1.0 / (n / sigma2_x + 1.0 / prior_var);
  return {v * (x.sum() / sigma2_x + prior_mean / prior_var), v};
}

InvGammaParams latent_variance_posterior(const Vec& x, double mu_x, const InvGammaPrior& prior) {
  const double ss = (x.array() - mu_x).square().sum();
  return {0.5 * static_cast<double>(x.size()) + prior.shape, prior.scale + 0.5 * ss};
}

}  // namespace qrproxy
