#pragma once

#include <cstdint>
#include <random>

#include "qrproxy/model.hpp"

namespace qrproxy {

/// Reproducible random stream identified by (seed, stream). The engine is
/// mt19937_64 seeded through std::seed_seq, both fully specified by the
/// standard, and every variate below is generated by code in this library,
/// so draw sequences do not depend on the standard library vendor.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Independent stream derived from this one's identity (not its position).
  SeededRng child(std::uint64_t id) const;

  std::uint64_t next() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

double sample_normal(double mean, double sd, SeededRng& rng);
double sample_exponential(double rate, SeededRng& rng);
/// Gamma with shape a and rate b (mean a / b).
double sample_gamma(double shape, double rate, SeededRng& rng);
/// Inverse gamma with shape a and scale b (density ~ x^{-a-1} exp(-b/x)).
double sample_inverse_gamma(double shape, double scale, SeededRng& rng);
/// Michael-Schucany-Haas transform; mean m, variance m^3 / shape.
double sample_inverse_gaussian(double mean, double shape, SeededRng& rng);

/// Cholesky factor of a symmetric matrix with escalating diagonal jitter
/// (eps grows x10 up to 1e-6 times the mean diagonal). With `equilibrate`
/// the matrix is first scaled to unit diagonal.
class JitteredCholesky {
 public:
  explicit JitteredCholesky(const Mat& a, bool equilibrate = false);

  /// Solves A v = b.
  Vec solve(const Vec& b) const;
  Mat inverse() const;
  /// v with cov(v) = A^{-1} for z ~ N(0, I): v = A^{-T/2} z.
  Vec solve_upper(const Vec& z) const;
  /// L z with cov = A.
  Vec multiply_lower(const Vec& z) const;
  double jitter() const { return jitter_; }

 private:
  Eigen::LLT<Mat> llt_;
  Vec scale_;  // D^{-1/2} of the equilibration, ones otherwise
  double jitter_ = 0.0;
};

Vec sample_standard_normal(Eigen::Index dim, SeededRng& rng);
Vec sample_mvn(const Vec& mean, const Mat& cov, SeededRng& rng);
Vec sample_mvn_precision(const Vec& mean, const Mat& prec, SeededRng& rng);

/// Draw from N(P^{-1} h, P^{-1}); also returns the mean.
struct CanonicalDraw {
  Vec draw;
  Vec mean;
};
CanonicalDraw sample_mvn_canonical(const Mat& prec, const Vec& h, SeededRng& rng);

}  // namespace qrproxy
