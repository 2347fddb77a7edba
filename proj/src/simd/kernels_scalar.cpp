#include "qrproxy/simd/kernels.hpp"

#include <algorithm>

namespace qrproxy::simd::scalar {

double check_loss_sum(std::span<const double> r, double p) {
  const double pm1 = p - 1.0;
  double sum = 0.0;
  for (double v : r) sum += v * (v < 0.0 ? pm1 : p);
  return sum;
}

void check_loss(std::span<const double> r, double p, std::span<double> out) {
  const double pm1 = p - 1.0;
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = r[i] * (r[i] < 0.0 ? pm1 : p);
}

double sq_diff_sum(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void ncs_eval(const NcsView& s, std::span<const std::int32_t> idx, std::span<const double> x,
              std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::int32_t j = idx[i];
    const double a = s.knots[j];
    const double b = s.knots[j + 1];
    const double h = b - a;
    const double dl = x[i] - a;
    const double dr = b - x[i];
    const double lin = (dl * s.values[j + 1] + dr * s.values[j]) / h;
    const double curv = ((1.0 + dl / h) * s.second[j + 1] + (1.0 + dr / h) * s.second[j]);
    out[i] = lin - (dl * dr / 6.0) * curv;
  }
}

void tpow_eval(const TpowView& s, std::span<const double> x, std::span<double> out) {
  const int l = s.degree;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    double acc = s.beta[l];
    for (int j = l - 1; j >= 0; --j) acc = acc * xi + s.beta[j];
    for (std::size_t k = 0; k < s.knots.size(); ++k) {
      const double t = std::max(xi - s.knots[k], 0.0);
      double tp = t;
      for (int m = 1; m < l; ++m) tp = tp * t;
      acc = acc + s.beta[l + 1 + k] * tp;
    }
    out[i] = acc;
  }
}

void gauss_logratio_acc(std::span<const double> w, std::span<const double> mean_new,
                        std::span<const double> mean_old, double inv_two_var,
                        std::span<double> acc) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double dn = w[i] - mean_new[i];
    const double d0 = w[i] - mean_old[i];
    acc[i] = acc[i] + (d0 * d0 - dn * dn) * inv_two_var;
  }
}

}  // namespace qrproxy::simd::scalar
