#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "qrproxy/model.hpp"

namespace qrproxy::spline {

/// Strictly increasing knots tau_1 < ... < tau_N with N >= 4.
class KnotGrid {
 public:
  explicit KnotGrid(std::vector<double> knots);

  std::size_t size() const { return knots_.size(); }
  double operator[](std::size_t i) const { return knots_[i]; }
  double lo() const { return knots_.front(); }
  double hi() const { return knots_.back(); }
  std::span<const double> knots() const { return knots_; }
  bool contains(double x) const { return x >= lo() && x <= hi(); }

  /// Left knot of the interval holding x, clamped to [0, N-2].
  std::int32_t interval(double x) const;

 private:
  std::vector<double> knots_;
  bool uniform_ = false;
  double inv_step_ = 0.0;
};

KnotGrid build_knot_grid(double lo, double hi, std::size_t count);

/// Dense symmetric roughness penalty with its known rank.
struct PenaltyMatrix {
  Mat K;
  int rank = 0;

  double quad(const Vec& v) const { return v.dot(K * v); }
};

/// Grid-dependent NCS machinery: gaps, the factored tridiagonal Gram matrix
/// R, and K = Q R^{-1} Q^T. Shared read-only by every curve on that grid.
class NcsBasis {
 public:
  explicit NcsBasis(KnotGrid grid);

  const KnotGrid& grid() const { return grid_; }
  const PenaltyMatrix& penalty() const { return penalty_; }
  std::size_t size() const { return grid_.size(); }

  /// Second derivatives at all N knots (zero at both ends) solving
  /// R gamma = Q^T g.
  Vec second_derivatives(const Vec& g) const;

 private:
  KnotGrid grid_;
  Vec gaps_;
  // Thomas factorization of R.
  Vec diag_;
  Vec upper_;
  PenaltyMatrix penalty_;
};

PenaltyMatrix ncs_penalty_matrix(const KnotGrid& grid);

/// Natural cubic spline through (tau_i, g_i). Linear beyond the boundary
/// knots with the boundary slope.
class NcsCurve {
 public:
  NcsCurve(std::shared_ptr<const NcsBasis> basis, Vec g);

  const Vec& values() const { return g_; }
  const Vec& second() const { return gamma_; }
  const NcsBasis& basis() const { return *basis_; }

  double evaluate(double x) const;
  void evaluate(std::span<const double> x, std::span<double> out) const;
  /// Same as evaluate() but reuses precomputed interval indices.
  void evaluate(std::span<const double> x, std::span<const std::int32_t> idx,
                std::span<double> out) const;
  double slope_lo() const;
  double slope_hi() const;

 private:
  std::shared_ptr<const NcsBasis> basis_;
  Vec g_;
  Vec gamma_;
};

double ncs_evaluate(const NcsCurve& curve, double x);

/// Truncated-power basis Z(x) = (1, x, .., x^l, (x - tau_1)_+^l, .., (x - tau_N)_+^l).
class PsplineBasis {
 public:
  PsplineBasis(KnotGrid grid, int degree);

  const KnotGrid& grid() const { return grid_; }
  int degree() const { return degree_; }
  std::size_t dim() const { return grid_.size() + static_cast<std::size_t>(degree_) + 1; }
  const PenaltyMatrix& penalty() const { return penalty_; }

  Vec row(double x) const;
  /// n x dim design matrix.
  Mat design(std::span<const double> x) const;
  double evaluate(const Vec& beta, double x) const;
  void evaluate(const Vec& beta, std::span<const double> x, std::span<double> out) const;

 private:
  KnotGrid grid_;
  int degree_;
  PenaltyMatrix penalty_;
};

/// Basis row for an arbitrary knot list (no minimum knot count).
Vec pspline_basis(std::span<const double> knots, int degree, double x);

/// K = D^T D with D the first-order difference operator on a coefficient
/// vector of length count + degree + 1.
PenaltyMatrix pspline_penalty(std::size_t count, int degree);

class PsplineCurve {
 public:
  PsplineCurve(std::shared_ptr<const PsplineBasis> basis, Vec beta);

  const Vec& coefficients() const { return beta_; }
  double evaluate(double x) const { return basis_->evaluate(beta_, x); }

 private:
  std::shared_ptr<const PsplineBasis> basis_;
  Vec beta_;
};

}  // namespace qrproxy::spline
