#include "qrproxy/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qrproxy {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string(what) + " must be positive");
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

SeededRng SeededRng::child(std::uint64_t id) const {
  return SeededRng(seed_, splitmix64(stream_ ^ splitmix64(id + 1)));
}

double SeededRng::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double SeededRng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  cached_ = v * f;
  has_cached_ = true;
  return u * f;
}

double sample_normal(double mean, double sd, SeededRng& rng) { return mean + sd * rng.normal(); }

double sample_exponential(double rate, SeededRng& rng) {
  require_positive(rate, "exponential rate");
  return -std::log(rng.uniform()) / rate;
}

double sample_gamma(double shape, double rate, SeededRng& rng) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  // Marsaglia-Tsang; shapes below one are boosted by U^{1/a}.
  const double a = shape < 1.0 ? shape + 1.0 : shape;
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  double v;
  for (;;) {
    double z;
    do {
      z = rng.normal();
      v = 1.0 + c * z;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * z * z * z * z) break;
    if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) break;
  }
  double g = d * v;
  if (shape < 1.0) g *= std::pow(rng.uniform(), 1.0 / shape);
  // Floor at the smallest normal double.
  return std::max(g / rate, std::numeric_limits<double>::min());
}

double sample_inverse_gamma(double shape, double scale, SeededRng& rng) {
  require_positive(shape, "inverse gamma shape");
  require_positive(scale, "inverse gamma scale");
  return 1.0 / sample_gamma(shape, scale, rng);
}

double sample_inverse_gaussian(double mean, double shape, SeededRng& rng) {
  require_positive(mean, "inverse Gaussian mean");
  require_positive(shape, "inverse Gaussian shape");
  const double nu = rng.normal();
  const double t = mean * nu * nu / (2.0 * shape);
  // Smaller root of the chi-square transform, written without cancellation.
  const double x = mean / (1.0 + t + std::sqrt(t * (t + 2.0)));
  return rng.uniform() * (mean + x) <= mean ? x : mean * (mean / x);
}

JitteredCholesky::JitteredCholesky(const Mat& a, bool equilibrate) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw Error("matrix must be square");
  if (!a.allFinite()) throw Error("matrix has non-finite entries");
  const double amax = a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(amax, 1e-300)) {
    throw Error("matrix not symmetric");
  }
  scale_ = Vec::Ones(n);
  Mat m = a;
  if (equilibrate) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(a(i, i) > 0.0)) throw Error("cholesky failed: nonpositive diagonal");
      scale_[i] = 1.0 / std::sqrt(a(i, i));
    }
    m = scale_.asDiagonal() * a * scale_.asDiagonal();
  }
  const double mean_diag = m.diagonal().mean();
  const double cap = 1e-6 * std::abs(mean_diag);
  llt_.compute(m);
  if (llt_.info() == Eigen::Success) return;
  for (double eps = 1e-12 * std::abs(mean_diag); eps <= cap * (1.0 + 1e-9); eps *= 10.0) {
    Mat mj = m;
    mj.diagonal().array() += eps;
    llt_.compute(mj);
    if (llt_.info() == Eigen::Success) {
      jitter_ = eps;
      return;
    }
  }
  throw Error("cholesky failed after maximum jitter");
}

Vec JitteredCholesky::solve(const Vec& b) const {
  return scale_.asDiagonal() * llt_.solve(scale_.asDiagonal() * b);
}

Mat JitteredCholesky::inverse() const {
  const Eigen::Index n = scale_.size();
  return scale_.asDiagonal() * llt_.solve(Mat::Identity(n, n)) * scale_.asDiagonal();
}

Vec JitteredCholesky::solve_upper(const Vec& z) const {
  return scale_.asDiagonal() * Vec(llt_.matrixU().solve(z));
}

Vec JitteredCholesky::multiply_lower(const Vec& z) const {
  return scale_.cwiseInverse().asDiagonal() * (llt_.matrixL() * z);
}

Vec sample_standard_normal(Eigen::Index dim, SeededRng& rng) {
  Vec z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z[i] = rng.normal();
  return z;
}

Vec sample_mvn(const Vec& mean, const Mat& cov, SeededRng& rng) {
  if (cov.rows() != mean.size()) throw Error("dimension mismatch");
  JitteredCholesky chol(cov);
  return mean + chol.multiply_lower(sample_standard_normal(mean.size(), rng));
}

Vec sample_mvn_precision(const Vec& mean, const Mat& prec, SeededRng& rng) {
  if (prec.rows() != mean.size()) throw Error("dimension mismatch");
  JitteredCholesky chol(prec, true);
  return mean + chol.solve_upper(sample_standard_normal(mean.size(), rng));
}

CanonicalDraw sample_mvn_canonical(const Mat& prec, const Vec& h, SeededRng& rng) {
  if (prec.rows() != h.size()) throw Error("dimension mismatch");
  JitteredCholesky chol(prec, true);
  CanonicalDraw out;
  out.mean = chol.solve(h);
  out.draw = out.mean + chol.solve_upper(sample_standard_normal(h.size(), rng));
  return out;
}

}  // namespace qrproxy
