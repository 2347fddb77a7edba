#include "qrproxy/spline.hpp"

#include <algorithm>
#include <cmath>

#include "qrproxy/simd/kernels.hpp"

namespace qrproxy::spline {

KnotGrid::KnotGrid(std::vector<double> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 4) throw Error("knot grid needs at least 4 knots");
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i])) throw Error("non-finite knot");
    if (i > 0 && !(knots_[i] > knots_[i - 1])) throw Error("knots must be strictly increasing");
  }
  const double step = (hi() - lo()) / static_cast<double>(knots_.size() - 1);
  uniform_ = true;
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (std::abs((knots_[i] - knots_[i - 1]) - step) > 1e-9 * step) {
      uniform_ = false;
      break;
    }
  }
  inv_step_ = 1.0 / step;
}

std::int32_t KnotGrid::interval(double x) const {
  const auto last = static_cast<std::int32_t>(knots_.size()) - 2;
  std::int32_t j;
  if (uniform_) {
    const double f = std::floor((x - lo()) * inv_step_);
    j = f <= 0.0 ? 0 : (f >= last ? last : static_cast<std::int32_t>(f));
    // floor() on the scaled offset can land one cell off near a knot.
    while (j > 0 && x < knots_[j]) --j;
    while (j < last && x >= knots_[j + 1]) ++j;
  } else {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    j = static_cast<std::int32_t>(it - knots_.begin()) - 1;
    j = std::clamp(j, 0, last);
  }
  return j;
}

KnotGrid build_knot_grid(double lo, double hi, std::size_t count) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error("knot grid needs lo < hi");
  }
  if (count < 4) throw Error("knot grid needs at least 4 knots");
  std::vector<double> knots(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) knots[i] = lo + step * static_cast<double>(i);
  knots.back() = hi;
  return KnotGrid(std::move(knots));
}

// ---------------------------------------------------------------------------
// Natural cubic spline

NcsBasis::NcsBasis(KnotGrid grid) : grid_(std::move(grid)) {
  const std::size_t N = grid_.size();
  const std::size_t m = N - 2;
  gaps_.resize(N - 1);
  for (std::size_t i = 0; i + 1 < N; ++i) gaps_[i] = grid_[i + 1] - grid_[i];

  // R is tridiagonal with r_jj = (h_j + h_{j+1}) / 3 and r_{j,j+1} = h_{j+1} / 6
  // (interior knots indexed from zero).
  Vec rdiag(m), roff(m > 0 ? m - 1 : 0);
  for (std::size_t j = 0; j < m; ++j) rdiag[j] = (gaps_[j] + gaps_[j + 1]) / 3.0;
  for (std::size_t j = 0; j + 1 < m; ++j) roff[j] = gaps_[j + 1] / 6.0;

  diag_.resize(m);
  upper_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double sub = j > 0 ? roff[j - 1] : 0.0;
    diag_[j] = rdiag[j] - (j > 0 ? sub * upper_[j - 1] : 0.0);
    upper_[j] = j + 1 < m ? roff[j] / diag_[j] : 0.0;
  }

  Mat Q = Mat::Zero(N, m);
  for (std::size_t j = 0; j < m; ++j) {
    Q(j, j) = 1.0 / gaps_[j];
    Q(j + 1, j) = -1.0 / gaps_[j] - 1.0 / gaps_[j + 1];
    Q(j + 2, j) = 1.0 / gaps_[j + 1];
  }
  // X = R^{-1} Q^T, one Thomas solve per column of Q^T.
  Mat X(m, N);
  Vec rhs(m), z(m);
  for (std::size_t c = 0; c < N; ++c) {
    for (std::size_t j = 0; j < m; ++j) rhs[j] = Q(c, j);
    for (std::size_t j = 0; j < m; ++j) {
      const double sub = j > 0 ? roff[j - 1] : 0.0;
      z[j] = (rhs[j] - (j > 0 ? sub * z[j - 1] : 0.0)) / diag_[j];
    }
    for (std::size_t j = m; j-- > 0;) {
      if (j + 1 < m) z[j] -= upper_[j] * z[j + 1];
    }
    X.col(c) = z;
  }
  Mat K = Q * X;
  penalty_.K = 0.5 * (K + K.transpose());
  penalty_.rank = static_cast<int>(m);
}

Vec NcsBasis::second_derivatives(const Vec& g) const {
  const std::size_t N = grid_.size();
  const std::size_t m = N - 2;
  if (static_cast<std::size_t>(g.size()) != N) throw Error("curve length does not match grid");
  Vec gamma = Vec::Zero(N);
  Vec z(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double rhs = (g[j + 2] - g[j + 1]) / gaps_[j + 1] - (g[j + 1] - g[j]) / gaps_[j];
    const double sub = j > 0 ? gaps_[j] / 6.0 : 0.0;
    z[j] = (rhs - (j > 0 ? sub * z[j - 1] : 0.0)) / diag_[j];
  }
  for (std::size_t j = m; j-- > 0;) {
    if (j + 1 < m) z[j] -= upper_[j] * z[j + 1];
    gamma[j + 1] = z[j];
  }
  return gamma;
}

PenaltyMatrix ncs_penalty_matrix(const KnotGrid& grid) { return NcsBasis(grid).penalty(); }

NcsCurve::NcsCurve(std::shared_ptr<const NcsBasis> basis, Vec g)
    : basis_(std::move(basis)), g_(std::move(g)) {
  gamma_ = basis_->second_derivatives(g_);
}

double NcsCurve::slope_lo() const {
  const auto& grid = basis_->grid();
  const double h = grid[1] - grid[0];
  return (g_[1] - g_[0]) / h - h * gamma_[1] / 6.0;
}

double NcsCurve::slope_hi() const {
  const auto& grid = basis_->grid();
  const std::size_t N = grid.size();
  const double h = grid[N - 1] - grid[N - 2];
  return (g_[N - 1] - g_[N - 2]) / h + h * gamma_[N - 2] / 6.0;
}

double NcsCurve::evaluate(double x) const {
  if (!std::isfinite(x)) throw Error("non-finite evaluation point");
  const auto& grid = basis_->grid();
  if (x < grid.lo()) return g_[0] + slope_lo() * (x - grid.lo());
  if (x > grid.hi()) return g_[g_.size() - 1] + slope_hi() * (x - grid.hi());
  const std::int32_t j = grid.interval(x);
  double out;
  simd::scalar::ncs_eval({grid.knots(), {g_.data(), static_cast<std::size_t>(g_.size())},
                          {gamma_.data(), static_cast<std::size_t>(gamma_.size())}},
                         std::span<const std::int32_t>(&j, 1), std::span<const double>(&x, 1),
                         std::span<double>(&out, 1));
  return out;
}

void NcsCurve::evaluate(std::span<const double> x, std::span<double> out) const {
  std::vector<std::int32_t> idx(x.size());
  const auto& grid = basis_->grid();
  for (std::size_t i = 0; i < x.size(); ++i) idx[i] = grid.interval(x[i]);
  evaluate(x, idx, out);
}

void NcsCurve::evaluate(std::span<const double> x, std::span<const std::int32_t> idx,
                        std::span<double> out) const {
  const auto& grid = basis_->grid();
  simd::ncs_eval({grid.knots(), {g_.data(), static_cast<std::size_t>(g_.size())},
                  {gamma_.data(), static_cast<std::size_t>(gamma_.size())}},
                 idx, x, out);
  const double lo = grid.lo();
  const double hi = grid.hi();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo) {
      out[i] = g_[0] + slope_lo() * (x[i] - lo);
    } else if (x[i] > hi) {
      out[i] = g_[g_.size() - 1] + slope_hi() * (x[i] - hi);
    }
  }
}

double ncs_evaluate(const NcsCurve& curve, double x) { return curve.evaluate(x); }

// ---------------------------------------------------------------------------
// Truncated-power P-spline

PenaltyMatrix pspline_penalty(std::size_t count, int degree) {
  if (degree < 1) throw Error("spline degree must be at least 1");
  const std::size_t d = count + static_cast<std::size_t>(degree) + 1;
  Mat D = Mat::Zero(d - 1, d);
  for (std::size_t i = 0; i + 1 < d; ++i) {
    D(i, i) = -1.0;
    D(i, i + 1) = 1.0;
  }
  return {D.transpose() * D, static_cast<int>(d - 1)};
}

PsplineBasis::PsplineBasis(KnotGrid grid, int degree)
    : grid_(std::move(grid)), degree_(degree), penalty_(pspline_penalty(grid_.size(), degree)) {}

Vec PsplineBasis::row(double x) const { return pspline_basis(grid_.knots(), degree_, x); }

Mat PsplineBasis::design(std::span<const double> x) const {
  Mat Z(x.size(), dim());
  for (std::size_t i = 0; i < x.size(); ++i) Z.row(i) = row(x[i]).transpose();
  return Z;
}

double PsplineBasis::evaluate(const Vec& beta, double x) const {
  double out;
  simd::scalar::tpow_eval({grid_.knots(), {beta.data(), static_cast<std::size_t>(beta.size())}, degree_},
                          std::span<const double>(&x, 1), std::span<double>(&out, 1));
  return out;
}

void PsplineBasis::evaluate(const Vec& beta, std::span<const double> x,
                            std::span<double> out) const {
  if (static_cast<std::size_t>(beta.size()) != dim()) throw Error("coefficient length mismatch");
  simd::tpow_eval({grid_.knots(), {beta.data(), static_cast<std::size_t>(beta.size())}, degree_},
                  x, out);
}

Vec pspline_basis(std::span<const double> knots, int degree, double x) {
  if (degree < 1) throw Error("spline degree must be at least 1");
  if (!std::isfinite(x)) throw Error("non-finite evaluation point");
  Vec z(knots.size() + static_cast<std::size_t>(degree) + 1);
  double pw = 1.0;
  for (int j = 0; j <= degree; ++j) {
    z[j] = pw;
    pw *= x;
  }
  for (std::size_t k = 0; k < knots.size(); ++k) {
    const double t = std::max(x - knots[k], 0.0);
    double tp = t;
    for (int m = 1; m < degree; ++m) tp *= t;
    z[degree + 1 + static_cast<Eigen::Index>(k)] = tp;
  }
  return z;
}

PsplineCurve::PsplineCurve(std::shared_ptr<const PsplineBasis> basis, Vec beta)
    : basis_(std::move(basis)), beta_(std::move(beta)) {
  if (static_cast<std::size_t>(beta_.size()) != basis_->dim()) {
    throw Error("coefficient length mismatch");
  }
}

}  // namespace qrproxy::spline
