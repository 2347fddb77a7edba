#pragma once

#include <limits>

#include "qrproxy/model.hpp"

namespace qrproxy::metrics {

/// (1/n) sum (g_true - g_hat)^2.
double curve_mse(const Vec& g_true, const Vec& g_hat);

/// Posterior predictive loss: sum of per-point posterior variances plus
/// m/(m+1) times the squared-error sum of the posterior mean. `draws` is
/// draws x n; pass m = infinity for weight one.
double ppl(const Vec& g_true, const Mat& draws, double m);

/// (1/n) sum (x_true - posterior mean of x)^2.
double x_recovery_mse(const Vec& x_true, const Vec& x_post_mean);
double x_recovery_mse(const Vec& x_true, const Mat& x_draws);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct CurveScore {
  double mse = 0.0;
  double ppl1 = 0.0;
  double ppl_inf = 0.0;
  Vec errors;    // g_true - posterior mean, pointwise
  Vec variance;  // posterior variance, pointwise
};

/// All curve metrics from one set of draws. Throws with fewer than 2 draws.
CurveScore score_curve(const Vec& g_true, const Mat& draws);

/// Column means and unbiased column variances of a draws x n matrix.
Vec column_mean(const Mat& draws);
Vec column_variance(const Mat& draws);

}  // namespace qrproxy::metrics
