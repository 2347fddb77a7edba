#include "qrproxy/metrics.hpp"

#include <cmath>

namespace qrproxy::metrics {

double curve_mse(const Vec& g_true, const Vec& g_hat) {
  if (g_true.size() != g_hat.size()) throw Error("length mismatch");
  if (g_true.size() == 0) throw Error("empty curve");
  return (g_true - g_hat).squaredNorm() / static_cast<double>(g_true.size());
}

Vec column_mean(const Mat& draws) { return draws.colwise().mean().transpose(); }

Vec column_variance(const Mat& draws) {
  if (draws.rows() < 2) throw Error("need at least 2 draws");
  const Vec mean = column_mean(draws);
  return (draws.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() /
         static_cast<double>(draws.rows() - 1);
}

namespace {

double weight(double m) {
  if (!(m > 0.0)) throw Error("ppl weight must be positive");
  return std::isinf(m) ? 1.0 : m / (m + 1.0);
}

}  // namespace

double ppl(const Vec& g_true, const Mat& draws, double m) {
  if (draws.cols() != g_true.size()) throw Error("length mismatch");
  if (draws.rows() < 2) throw Error("need at least 2 draws");
  const Vec mean = column_mean(draws);
  return column_variance(draws).sum() + weight(m) * (g_true - mean).squaredNorm();
}

double x_recovery_mse(const Vec& x_true, const Vec& x_post_mean) {
  return curve_mse(x_true, x_post_mean);
}

double x_recovery_mse(const Vec& x_true, const Mat& x_draws) {
  if (x_draws.rows() < 1) throw Error("need at least 1 draw");
  return curve_mse(x_true, column_mean(x_draws));
}

CurveScore score_curve(const Vec& g_true, const Mat& draws) {
  if (draws.cols() != g_true.size()) throw Error("length mismatch");
  CurveScore s;
  const Vec mean = column_mean(draws);
  s.variance = column_variance(draws);
  s.errors = g_true - mean;
  s.mse = s.errors.squaredNorm() / static_cast<double>(g_true.size());
  const double vsum = s.variance.sum();
  const double sse = s.errors.squaredNorm();
  s.ppl1 = vsum + 0.5 * sse;
  s.ppl_inf = vsum + sse;
  return s;
}

}  // namespace qrproxy::metrics
