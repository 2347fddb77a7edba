#include "qrproxy/qr_likelihood.hpp"

#include <cmath>
#include <numbers>
#include <span>

#include "qrproxy/simd/kernels.hpp"

namespace qrproxy {

double qr_loglik(const Vec& y, const Vec& ghat, double p) {
  if (y.size() != ghat.size()) throw Error("length mismatch between y and fitted values");
  const auto n = static_cast<std::size_t>(y.size());
  const Vec r = y - ghat;
  const double loss = simd::check_loss_sum(std::span<const double>(r.data(), n), p);
  return static_cast<double>(n) * (std::log(p) + std::log1p(-p)) - loss;
}

AldMixture ald_mixture_params(double p) {
  const double q = p * (1.0 - p);
  return {(1.0 - 2.0 * p) / q, 2.0 / q};
}

double ald_density(double r, double p, double delta2) {
  return p * (1.0 - p) * delta2 * std::exp(-delta2 * check_loss(r, p));
}

double ald_conditional_logdensity(double r, double s, double delta2, const AldMixture& m) {
  const double var = m.B * s / delta2;
  const double d = r - m.A * s;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
}

}  // namespace qrproxy
