#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "oracles.hpp"
#include "qrproxy/proxy_models.hpp"

using namespace qrproxy;

namespace {

std::span<const double> span_of(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TEST_SUITE("proxy_models") {
  TEST_CASE("proxy means") {
    CHECK(proxy_mean(ProxySpec::benchmark(), BenchmarkProxyParams{}, 3.7) == 3.7);
    const PolyProxyParams poly{(Vec(3) << 3.0, 0.25, 0.75).finished(), 1.0};
    CHECK(proxy_mean(ProxySpec::polynomial(2), poly, 2.0) == doctest::Approx(6.5));
    auto basis = std::make_shared<const spline::PsplineBasis>(spline::build_knot_grid(-1.0, 1.0, 6), 3);
    const SplineProxyParams sp{basis, Vec::Zero(static_cast<Eigen::Index>(basis->dim())), 1.0, 1.0};
    for (double x = -2.0; x <= 2.0; x += 0.5) CHECK(proxy_mean(ProxySpec::spline(), sp, x) == 0.0);
    CHECK_THROWS_AS(proxy_mean(ProxySpec::polynomial(2), BenchmarkProxyParams{}, 1.0), Error);
    CHECK_THROWS_AS(proxy_mean(ProxySpec::polynomial(3), poly, 1.0), Error);

    std::vector<double> xs{-1.0, 0.5, 2.0}, out(3);
    proxy_mean(ProxySpec::polynomial(2), poly, xs, out);
    for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(poly_eval(poly.alpha, xs[i])));
  }

  TEST_CASE("polynomial coefficients approach least squares under a vague prior") {
    const Eigen::Index n = 2000;
    const Vec x = Vec::LinSpaced(n, -3.0, 3.0);
    const Vec w = (1.0 + 2.0 * x.array()).matrix();
    const GaussianPosterior post =
        poly_coeff_posterior(span_of(x), w, 1.0, 1, Vec::Zero(2), 1e8 * Mat::Identity(2, 2));
    CHECK(std::abs(post.mean[0] - 1.0) < 1e-3);
    CHECK(std::abs(post.mean[1] - 2.0) < 1e-3);
  }

  TEST_CASE("polynomial coefficients fall back to the prior") {
    const Vec m0 = (Vec(2) << 0.5, -1.0).finished();
    const Mat V0 = (Mat(2, 2) << 2.0, 0.0, 0.0, 0.5).finished();
    const Vec x = Vec::LinSpaced(30, -1.0, 1.0);
    const Vec w = x * 3.0;
    for (int mode = 0; mode < 2; ++mode) {
      SeededRng rng(11 + mode);
      std::vector<double> a0, a1;
      for (int t = 0; t < 10000; ++t) {
        const Vec a = mode == 0 ? update_poly_coeffs({}, Vec(), 1.0, 1, m0, V0, rng)
                                : update_poly_coeffs(span_of(x), w, 1e12, 1, m0, V0, rng);
        a0.push_back(a[0]);
        a1.push_back(a[1]);
      }
      const boost::math::normal_distribution<> d0(0.5, std::sqrt(2.0)), d1(-1.0, std::sqrt(0.5));
      CHECK(oracle::ks_statistic(a0, [&](double v) { return boost::math::cdf(d0, v); }) <
            oracle::ks_critical_1pct(10000));
      CHECK(oracle::ks_statistic(a1, [&](double v) { return boost::math::cdf(d1, v); }) <
            oracle::ks_critical_1pct(10000));
    }
  }

  TEST_CASE("spline proxy coefficients: heavy penalty collapses onto the null space") {
    const spline::PsplineBasis basis(spline::build_knot_grid(-2.0, 2.0, 10), 3);
    std::mt19937_64 eng(3);
    std::normal_distribution<double> nd;
    const Vec x = Vec::LinSpaced(80, -2.0, 2.0);
    Vec w(80);
    for (int i = 0; i < 80; ++i) w[i] = std::cos(2.0 * x[i]) + 0.3 * nd(eng);
    const Mat Z = basis.design(span_of(x));
    const GaussianPosterior post = spline_proxy_posterior(Z, w, 0.09, 1e10, basis.penalty().K);
    // The first-difference null space is beta = c 1, so the limit fit is the
    // least-squares projection of w on Z 1.
    const Vec z1 = Z * Vec::Ones(Z.cols());
    const Vec limit = z1 * (z1.dot(w) / z1.squaredNorm());
    CHECK((Z * post.mean - limit).cwiseAbs().maxCoeff() < 1e-3);
    const Vec beta = post.mean;
    CHECK((beta.array() - beta.mean()).abs().maxCoeff() < 1e-4 * std::max(1.0, std::abs(beta.mean())));
  }

  TEST_CASE("spline proxy coefficients: weak penalty recovers noiseless fits") {
    const spline::PsplineBasis basis(spline::build_knot_grid(-2.0, 2.0, 8), 3);
    std::mt19937_64 eng(4);
    std::normal_distribution<double> nd;
    Vec beta_star(static_cast<Eigen::Index>(basis.dim()));
    for (Eigen::Index j = 0; j < beta_star.size(); ++j) beta_star[j] = 0.3 * nd(eng);
    const Vec x = Vec::LinSpaced(200, -2.0, 2.0);
    const Mat Z = basis.design(span_of(x));
    const Vec w = Z * beta_star;
    const GaussianPosterior post = spline_proxy_posterior(Z, w, 1.0, 1e-8, basis.penalty().K);
    const double rms = std::sqrt((Z * post.mean - w).squaredNorm() / 200.0);
    CHECK(rms < 1e-3);
    SeededRng rng(5);
    const Vec draw = update_spline_proxy_coeffs(Mat(0, Z.cols()), Vec(), 1.0, 1.0, basis.penalty().K, rng);
    CHECK(draw.allFinite());
    CHECK_THROWS_AS(spline_proxy_posterior(Z, Vec::Zero(3), 1.0, 1.0, basis.penalty().K), Error);
  }

  TEST_CASE("proxy variance parameters") {
    const InvGammaPrior prior{0.01, 0.01};
    const Vec w = Vec::LinSpaced(100, 0.0, 1.0);
    const InvGammaParams z = proxy_variance_posterior(w, w, prior);
    CHECK(z.shape == doctest::Approx(50.01));
    CHECK(z.scale == doctest::Approx(0.01));
    CHECK(z.scale / (z.shape - 1.0) == doctest::Approx(0.0002).epsilon(0.01));
    const InvGammaParams one = proxy_variance_posterior(Vec::Constant(1, 3.0), Vec::Constant(1, 1.0), prior);
    CHECK(one.shape == doctest::Approx(0.51));
    CHECK(one.scale == doctest::Approx(2.01));
    CHECK_THROWS_AS(proxy_variance_posterior(w, Vec::Zero(3), prior), Error);
  }

  TEST_CASE("proxy variance is consistent") {
    SeededRng rng(6);
    Vec w(10000);
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
    const InvGammaParams post = proxy_variance_posterior(w, Vec::Zero(10000), InvGammaPrior{});
    const double mean = post.scale / (post.shape - 1.0);
    CHECK(mean >= 0.95);
    CHECK(mean <= 1.05);
  }

  TEST_CASE("penalty precision with a flat curve is its prior shifted by the rank") {
    const GammaParams g = penalty_precision_posterior(0.0, 23, GammaPrior{0.01, 0.01});
    CHECK(g.shape == doctest::Approx(0.01 + 11.5));
    CHECK(g.rate == doctest::Approx(0.01));
    const GammaParams h = penalty_precision_posterior(4.0, 10, GammaPrior{1.0, 2.0});
    CHECK(h.shape == doctest::Approx(6.0));
    CHECK(h.rate == doctest::Approx(4.0));
  }

  TEST_CASE("latent mean and variance") {
    const Vec x = Vec::Constant(50, 1.3);
    const NormalParams m = latent_mean_posterior(x, 1.0, 0.0, 1e12);
    CHECK(m.mean == doctest::Approx(1.3));
    CHECK(m.var == doctest::Approx(1.0 / 50.0));
    const InvGammaParams v = latent_variance_posterior(x, 1.3, InvGammaPrior{2.0, 3.0});
    CHECK(v.shape == doctest::Approx(27.0));
    CHECK(v.scale == doctest::Approx(3.0));
  }

  TEST_CASE("poly design rows") {
    std::vector<double> x{2.0, -1.0};
    const Mat X = poly_design(x, 3);
    CHECK(X.row(0) == (Eigen::RowVectorXd(4) << 1.0, 2.0, 4.0, 8.0).finished());
    CHECK(X.row(1) == (Eigen::RowVectorXd(4) << 1.0, -1.0, 1.0, -1.0).finished());
  }
}
