#pragma once

// Data-parallel inner loops of the samplers. Every kernel has a scalar
// reference in namespace `scalar` and an AVX2 variant in namespace `avx2`;
// the unqualified entry points dispatch on the level chosen at startup.
//
// Elementwise kernels perform the same IEEE operations in the same order in
// both variants and are bitwise identical. Reductions differ only in
// summation order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace qrproxy::simd {

enum class Level { Scalar, Avx2 };

/// Level in use. Detected from CPUID on first call; the QRPROXY_SIMD
/// environment variable ("scalar" or "avx2") overrides detection.
Level active_level();
/// Forces a level (tests). Requesting AVX2 on a CPU without it throws.
void set_level(Level level);
bool avx2_supported();
std::string_view level_name(Level level);

/// Natural cubic spline pieces: knots, values and second derivatives at the
/// knots, plus the interval index of every point.
struct NcsView {
  std::span<const double> knots;
  std::span<const double> values;
  std::span<const double> second;
};

/// Truncated-power spline: beta = (poly coeffs 0..degree, knot coeffs).
struct TpowView {
  std::span<const double> knots;
  std::span<const double> beta;
  int degree;
};

#define QRPROXY_KERNEL_DECLS                                                              \
  double check_loss_sum(std::span<const double> r, double p);                             \
  void check_loss(std::span<const double> r, double p, std::span<double> out);            \
  double sq_diff_sum(std::span<const double> a, std::span<const double> b);               \
  void ncs_eval(const NcsView& s, std::span<const std::int32_t> idx,                      \
                std::span<const double> x, std::span<double> out);                        \
  void tpow_eval(const TpowView& s, std::span<const double> x, std::span<double> out);    \
  void gauss_logratio_acc(std::span<const double> w, std::span<const double> mean_new,    \
                          std::span<const double> mean_old, double inv_two_var,           \
                          std::span<double> acc);

namespace scalar {
QRPROXY_KERNEL_DECLS
}
namespace avx2 {
QRPROXY_KERNEL_DECLS
}

/// Sum of rho_p(r_i).
double check_loss_sum(std::span<const double> r, double p);
/// out_i = rho_p(r_i).
void check_loss(std::span<const double> r, double p, std::span<double> out);
/// Sum of (a_i - b_i)^2.
double sq_diff_sum(std::span<const double> a, std::span<const double> b);
/// Cubic-piece evaluation of a natural spline; idx[i] is the left knot of
/// the interval holding x[i]. Points outside the knot range are evaluated on
/// the clamped boundary piece; callers apply linear extrapolation.
void ncs_eval(const NcsView& s, std::span<const std::int32_t> idx, std::span<const double> x,
              std::span<double> out);
/// out_i = Z(x_i)^T beta for the truncated-power basis.
void tpow_eval(const TpowView& s, std::span<const double> x, std::span<double> out);
/// acc_i += ((w_i - old_i)^2 - (w_i - new_i)^2) * inv_two_var: the per-site
/// log ratio contributed by a Gaussian proxy likelihood.
void gauss_logratio_acc(std::span<const double> w, std::span<const double> mean_new,
                        std::span<const double> mean_old, double inv_two_var,
                        std::span<double> acc);

#undef QRPROXY_KERNEL_DECLS

}  // namespace qrproxy::simd
