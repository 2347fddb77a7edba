#include "oracle_suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "oracles.hpp"
#include "qrproxy/distributions.hpp"
#include "qrproxy/proxy_models.hpp"
#include "qrproxy/qr_likelihood.hpp"
#include "qrproxy/sampler_ncs.hpp"
#include "qrproxy/sampler_pspline.hpp"
#include "qrproxy/simgen.hpp"
#include "qrproxy/spline.hpp"

namespace qrproxy::oracle {

namespace {

constexpr std::size_t kDraws = 10000;
constexpr double kMhTol = 1e-10;

Check ks_check(std::string name, std::vector<double> draws, const std::function<double(double)>& cdf) {
  Check c{std::move(name)};
  c.bound = ks_critical_1pct(draws.size());
  c.worst = ks_statistic(std::move(draws), cdf);
  c.pass = c.worst < c.bound;
  return c;
}

Check worst_of(std::string name, const std::vector<Check>& parts) {
  Check c = parts.front();
  for (const auto& p : parts) {
    if (p.worst / p.bound > c.worst / c.bound) c = p;
  }
  c.name = std::move(name);
  c.pass = std::all_of(parts.begin(), parts.end(), [](const Check& p) { return p.pass; });
  return c;
}

Vec random_normal(Eigen::Index n, std::mt19937_64& eng, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(eng);
  return v;
}

double uniform(std::mt19937_64& eng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(eng);
}

std::function<double(double)> normal_cdf(double mean, double var) {
  return [d = boost::math::normal_distribution<>(mean, std::sqrt(var))](double v) {
    return boost::math::cdf(d, v);
  };
}

std::function<double(double)> gamma_cdf(double shape, double rate) {
  return [d = boost::math::gamma_distribution<>(shape, 1.0 / rate)](double v) {
    return boost::math::cdf(d, v);
  };
}

std::function<double(double)> inv_gamma_cdf(double shape, double scale) {
  return [d = boost::math::inverse_gamma_distribution<>(shape, scale)](double v) {
    return boost::math::cdf(d, v);
  };
}

void track(Check& c, double diff, double scale) {
  const double rel = std::abs(diff) / std::max(1.0, std::abs(scale));
  if (!(rel <= c.worst)) c.worst = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
}

ModelSpec full_spec(double p) {
  PriorConfig pr;
  pr.curve_precision = {1.0, 0.5};
  pr.ald_precision = {2.0, 1.5};
  return toy_spec(60, 77, {ProxySpec::benchmark(), ProxySpec::polynomial(2), ProxySpec::spline()},
                  p, pr);
}

SamplerConfig small_config(std::size_t knots) {
  SamplerConfig c;
  c.iterations = 10;
  c.burnin = 5;
  c.thin = 1;
  c.knots = knots;
  return c;
}

void randomize_proxies(std::vector<ProxyParams>& params, std::mt19937_64& eng) {
  for (auto& pp : params) {
    set_proxy_sigma2(pp, uniform(eng, 0.5, 2.0));
    if (auto* poly = std::get_if<PolyProxyParams>(&pp)) {
      poly->alpha += random_normal(poly->alpha.size(), eng, 0.1);
    } else if (auto* sp = std::get_if<SplineProxyParams>(&pp)) {
      sp->beta += random_normal(sp->beta.size(), eng, 0.01);
    }
  }
}

}  // namespace

ModelSpec toy_spec(std::size_t n, std::uint64_t seed, const std::vector<ProxySpec>& proxies,
                   double p, PriorConfig priors) {
  const sim::SimDataset ds = sim::gen_dataset(sim::Regime{}, n, seed);
  ObservedData data;
  data.y = ds.y;
  for (const auto& ps : proxies) {
    switch (ps.kind) {
      case ProxyKind::Benchmark:
        data.w.push_back(ds.w1);
        break;
      case ProxyKind::Polynomial:
        data.w.push_back(ds.w2);
        break;
      case ProxyKind::Spline:
        data.w.push_back(ds.w3);
        break;
    }
  }
  return validate_model(std::move(data), proxies, p, std::move(priors));
}

// ---------------------------------------------------------------------------

Check ncs_penalty_quadrature(std::size_t cases) {
  Check c{"ncs penalty vs quadrature of g''^2", true, 0.0, 1e-6};
  std::mt19937_64 eng(101);
  for (std::size_t t = 0; t < cases; ++t) {
    const auto N = static_cast<std::size_t>(std::uniform_int_distribution<int>(4, 30)(eng));
    std::vector<double> knots{uniform(eng, -3.0, 3.0)};
    while (knots.size() < N) knots.push_back(knots.back() + uniform(eng, 0.1, 1.5));
    const Vec g = random_normal(static_cast<Eigen::Index>(N), eng);
    const spline::NcsBasis basis{spline::KnotGrid(knots)};
    const double q = basis.penalty().quad(g);
    const double r = DenseNcs(knots, g).roughness();
    track(c, q - r, 1.0 + q);
  }
  c.pass = c.worst <= c.bound;
  return c;
}

Check ncs_linear_null_space() {
  Check c{"ncs penalty null space and rank", true, 0.0, 1e-9};
  const spline::NcsBasis basis{spline::build_knot_grid(-5.0, 5.0, 30)};
  const Mat& K = basis.penalty().K;
  Vec g(30);
  for (Eigen::Index i = 0; i < 30; ++i) g[i] = 1.7 - 0.6 * basis.grid()[static_cast<std::size_t>(i)];
  track(c, basis.penalty().quad(g), 1.0);
  Eigen::JacobiSVD<Mat> svd(K);
  const Vec sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > 1e-9 * sv[0] ? 1 : 0;
  c.pass = c.worst <= c.bound && rank == 28 && basis.penalty().rank == 28;
  return c;
}

Check pspline_penalty_structure() {
  Check c{"p-spline penalty null space and rank", true, 0.0, 1e-12};
  const spline::PenaltyMatrix pen = spline::pspline_penalty(20, 3);
  const Vec ones = Vec::Ones(pen.K.rows());
  track(c, pen.quad(ones), 1.0);
  Eigen::JacobiSVD<Mat> svd(pen.K);
  const Vec sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > 1e-9 * sv[0] ? 1 : 0;
  const spline::PenaltyMatrix small = spline::pspline_penalty(2, 1);
  Vec b = Vec::Zero(4);
  b[1] = 1.0;
  track(c, small.quad(b) - 2.0, 2.0);
  std::mt19937_64 eng(7);
  for (int t = 0; t < 20; ++t) {
    const Vec beta = random_normal(pen.K.rows(), eng);
    double ref = 0.0;
    for (Eigen::Index i = 0; i + 1 < beta.size(); ++i) ref += (beta[i + 1] - beta[i]) * (beta[i + 1] - beta[i]);
    track(c, pen.quad(beta) - ref, ref);
  }
  c.pass = c.worst <= c.bound && rank == 23 && pen.rank == 23;
  return c;
}

Check ald_mixture_marginalization() {
  Check c{"ALD scale-mixture marginalization", true, 0.0, 1e-5};
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const AldMixture m = ald_mixture_params(p);
    for (double delta2 : {1.0, 2.5}) {
      for (int k = -20; k <= 20; ++k) {
        const double r = 0.25 * k;
        const double target = p * (1.0 - p) * delta2 * std::exp(-delta2 * check_loss(r, p));
        const double mix = ald_mixture_marginal(r, m.A, m.B, delta2);
        c.worst = std::max(c.worst, std::abs(mix - target) / target);
        c.worst = std::max(c.worst, std::abs(ald_density(r, p, delta2) - target) / target);
      }
    }
  }
  c.pass = c.worst <= c.bound;
  return c;
}

Check check_loss_identities() {
  Check c{"check-loss identities", true, 0.0, 1e-12};
  std::mt19937_64 eng(3);
  Vec y(50), g(50);
  for (int t = 0; t < 1000; ++t) {
    const double u = uniform(eng, -10.0, 10.0);
    const double p = uniform(eng, 0.01, 0.99);
    track(c, qrproxy::check_loss(u, p) + qrproxy::check_loss(-u, p) - std::abs(u), u);
    track(c, qrproxy::check_loss(-u, 1.0 - p) - qrproxy::check_loss(u, p), u);
    track(c, qrproxy::check_loss(u, p) - check_loss(u, p), u);
    if (qrproxy::check_loss(u, p) < 0.0) c.worst = std::numeric_limits<double>::infinity();
  }
  for (int t = 0; t < 20; ++t) {
    const double p = uniform(eng, 0.05, 0.95);
    y = random_normal(50, eng);
    g = random_normal(50, eng);
    double ref = 50.0 * (std::log(p) + std::log(1.0 - p));
    for (Eigen::Index i = 0; i < 50; ++i) ref -= check_loss(y[i] - g[i], p);
    track(c, qr_loglik(y, g, p) - ref, ref);
  }
  c.pass = c.worst <= c.bound;
  return c;
}

// ---------------------------------------------------------------------------

Check ks_proxy_variance() {
  std::mt19937_64 eng(21);
  const Vec w = random_normal(30, eng);
  const Vec fitted = w + random_normal(30, eng, 0.8);
  const InvGammaPrior prior{0.5, 0.3};
  const double shape = 15.0 + 0.5;
  const double scale = 0.3 + 0.5 * (w - fitted).squaredNorm();
  SeededRng rng(21);
  std::vector<double> draws;
  for (std::size_t i = 0; i < kDraws; ++i) draws.push_back(update_proxy_variance(w, fitted, prior, rng));
  return ks_check("KS proxy variance", std::move(draws), inv_gamma_cdf(shape, scale));
}

Check ks_latent_variance() {
  std::mt19937_64 eng(22);
  const Vec x = random_normal(25, eng, 1.5);
  const double mu = 0.3;
  const InvGammaPrior prior{1.0, 0.7};
  const double shape = 12.5 + 1.0;
  const double scale = 0.7 + 0.5 * (x.array() - mu).square().sum();
  SeededRng rng(22);
  std::vector<double> draws;
  for (std::size_t i = 0; i < kDraws; ++i) {
    const InvGammaParams post = latent_variance_posterior(x, mu, prior);
    draws.push_back(sample_inverse_gamma(post.shape, post.scale, rng));
  }
  return ks_check("KS latent variance", std::move(draws), inv_gamma_cdf(shape, scale));
}

Check ks_latent_mean() {
  std::mt19937_64 eng(23);
  const Vec x = random_normal(25, eng, 1.5);
  const double s2 = 2.0;
  const double var = 1.0 / (25.0 / s2 + 1.0 / 4.0);
  const double mean = var * (x.sum() / s2 + 1.0 / 4.0);
  SeededRng rng(23);
  std::vector<double> draws;
  for (std::size_t i = 0; i < kDraws; ++i) {
    const NormalParams post = latent_mean_posterior(x, s2, 1.0, 4.0);
    draws.push_back(sample_normal(post.mean, std::sqrt(post.var), rng));
  }
  return ks_check("KS latent mean", std::move(draws), normal_cdf(mean, var));
}

Check ks_poly_coeffs() {
  std::mt19937_64 eng(24);
  const Eigen::Index n = 40;
  Vec x(n), w(n);
  Mat X(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = uniform(eng, -2.0, 2.0);
    X.row(i) << 1.0, x[i], x[i] * x[i];
  }
  w = X * Vec((Vec(3) << 1.0, 0.5, 0.25).finished()) + random_normal(n, eng, std::sqrt(0.5));
  const double s2 = 0.5;
  const Vec m0 = Vec::Constant(3, 0.1);
  const Mat V0 = 3.0 * Mat::Identity(3, 3);
  const Mat V = (X.transpose() * X / s2 + Mat::Identity(3, 3) / 3.0).inverse();
  const Vec mu = V * (X.transpose() * w / s2 + m0 / 3.0);
  SeededRng rng(24);
  std::vector<std::vector<double>> draws(3);
  for (std::size_t t = 0; t < kDraws; ++t) {
    const Vec a = update_poly_coeffs({x.data(), static_cast<std::size_t>(n)}, w, s2, 2, m0, V0, rng);
    for (int j = 0; j < 3; ++j) draws[j].push_back(a[j]);
  }
  std::vector<Check> parts;
  for (int j = 0; j < 3; ++j) parts.push_back(ks_check("", draws[j], normal_cdf(mu[j], V(j, j))));
  return worst_of("KS polynomial proxy coefficients", parts);
}

Check ks_spline_proxy_coeffs() {
  std::mt19937_64 eng(25);
  const spline::PsplineBasis basis(spline::build_knot_grid(-3.0, 3.0, 8), 3);
  const auto knots = basis.grid().knots();
  const Eigen::Index n = 60;
  const Eigen::Index d = static_cast<Eigen::Index>(basis.dim());
  Vec x(n), w(n);
  Mat Z(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = uniform(eng, -3.0, 3.0);
    w[i] = std::sin(x[i]) + 0.5 * std::normal_distribution<double>()(eng);
    Z.row(i) = tpow_row(knots, 3, x[i]).transpose();
  }
  const double s2 = 0.3;
  const double lambda = 2.0;
  const Mat P = lambda * first_difference_penalty(d) + Z.transpose() * Z / s2;
  const Mat V = P.inverse();
  const Vec mu = V * Z.transpose() * w / s2;
  const Vec probe = tpow_row(knots, 3, 0.7);
  const Mat Zlib = basis.design({x.data(), static_cast<std::size_t>(n)});
  SeededRng rng(25);
  std::vector<double> at_probe, first;
  for (std::size_t t = 0; t < kDraws; ++t) {
    const Vec b = update_spline_proxy_coeffs(Zlib, w, s2, lambda, basis.penalty().K, rng);
    at_probe.push_back(probe.dot(b));
    first.push_back(b[0]);
  }
  return worst_of("KS spline proxy coefficients",
                  {ks_check("", at_probe, normal_cdf(probe.dot(mu), probe.dot(V * probe))),
                   ks_check("", first, normal_cdf(mu[0], V(0, 0)))});
}

Check ks_penalty_precision() {
  const GammaPrior prior{0.5, 0.2};
  SeededRng rng(26);
  std::vector<double> draws;
  for (std::size_t i = 0; i < kDraws; ++i) draws.push_back(update_penalty_precision(3.7, 23, prior, rng));
  return ks_check("KS smoothing precision", std::move(draws), gamma_cdf(0.5 + 11.5, 0.2 + 1.85));
}

namespace {

struct PsplineToy {
  ModelSpec spec;
  PsplineSampler sampler;
  double A, B;

  explicit PsplineToy(double p)
      : spec(full_spec(p)),
        sampler(spec, small_config(10), SeededRng(31)),
        A((1.0 - 2.0 * p) / (p * (1.0 - p))),
        B(2.0 / (p * (1.0 - p))) {
    std::mt19937_64 eng(31);
    auto& st = sampler.mutable_state();
    std::exponential_distribution<double> ex(1.0);
    for (Eigen::Index i = 0; i < st.s.size(); ++i) st.s[i] = 0.05 + ex(eng);
    st.delta2 = 1.7;
    st.lambda = 3.0;
    sampler.sync();
  }

  double fitted(std::size_t i) const {
    const auto& st = sampler.state();
    return tpow_eval(st.basis->grid().knots(), st.basis->degree(), st.beta,
                     st.latent.x[static_cast<Eigen::Index>(i)]);
  }
};

}  // namespace

Check ks_pspline_beta() {
  PsplineToy toy(0.25);
  const auto& st = toy.sampler.state();
  const auto knots = st.basis->grid().knots();
  const int l = st.basis->degree();
  const Eigen::Index d = static_cast<Eigen::Index>(st.basis->dim());
  Mat P = st.lambda * first_difference_penalty(d);
  Vec h = Vec::Zero(d);
  const Vec& y = toy.spec.data.y;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const Vec z = tpow_row(knots, l, st.latent.x[i]);
    const double wgt = st.delta2 / (toy.B * st.s[i]);
    P += wgt * z * z.transpose();
    h += wgt * (y[i] - toy.A * st.s[i]) * z;
  }
  const Eigen::LDLT<Mat> ldlt(P);
  const Vec mu = ldlt.solve(h);
  const double x0 = 0.5 * (knots.front() + knots.back()) + 0.3;
  const Vec probe = tpow_row(knots, l, x0);
  const double var = probe.dot(ldlt.solve(probe));
  std::vector<double> draws;
  for (std::size_t t = 0; t < kDraws; ++t) {
    toy.sampler.step_beta();
    draws.push_back(probe.dot(toy.sampler.state().beta));
  }
  return ks_check("KS P-spline curve coefficients", std::move(draws), normal_cdf(probe.dot(mu), var));
}

Check ks_pspline_lambda() {
  PsplineToy toy(0.25);
  const auto& st = toy.sampler.state();
  const Vec& b = st.beta;
  double quad = 0.0;
  for (Eigen::Index i = 0; i + 1 < b.size(); ++i) quad += (b[i + 1] - b[i]) * (b[i + 1] - b[i]);
  const double shape = 1.0 + 0.5 * static_cast<double>(b.size() - 1);
  const double rate = 0.5 + 0.5 * quad;
  std::vector<double> draws;
  for (std::size_t t = 0; t < kDraws; ++t) {
    toy.sampler.step_lambda();
    draws.push_back(toy.sampler.state().lambda);
  }
  return ks_check("KS P-spline smoothing precision", std::move(draws), gamma_cdf(shape, rate));
}

Check ks_pspline_s() {
  PsplineToy toy(0.25);
  const auto& st = toy.sampler.state();
  std::vector<Check> parts;
  for (std::size_t i : {std::size_t{0}, std::size_t{7}}) {
    const double r = toy.spec.data.y[static_cast<Eigen::Index>(i)] - toy.fitted(i);
    const double d2 = st.delta2;
    const double A = toy.A;
    const double B = toy.B;
    // Unnormalized full conditional of s_i from the mixture representation.
    auto f = [=](double s) {
      if (s <= 0.0) return 0.0;
      const double e = r - A * s;
      return std::exp(-0.5 * std::log(s) - d2 * e * e / (2.0 * B * s) - d2 * s);
    };
    boost::math::quadrature::exp_sinh<double> tail;
    boost::math::quadrature::tanh_sinh<double> finite;
    const double Z = tail.integrate(f, 0.0, std::numeric_limits<double>::infinity());
    std::vector<double> draws;
    for (std::size_t t = 0; t < kDraws; ++t) {
      toy.sampler.step_s();
      draws.push_back(toy.sampler.state().s[static_cast<Eigen::Index>(i)]);
    }
    parts.push_back(ks_check("", std::move(draws), [&](double s) {
      return s <= 0.0 ? 0.0 : finite.integrate(f, 0.0, s) / Z;
    }));
  }
  return worst_of("KS ALD latent scales", parts);
}

Check ks_pspline_delta2() {
  PsplineToy toy(0.25);
  const auto& st = toy.sampler.state();
  const Vec& y = toy.spec.data.y;
  double quad = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = y[i] - toy.fitted(static_cast<std::size_t>(i)) - toy.A * st.s[i];
    quad += e * e / st.s[i];
  }
  const double n = static_cast<double>(y.size());
  const double shape = 2.0 + 1.5 * n;
  const double rate = 1.5 + quad / (2.0 * toy.B) + st.s.sum();
  std::vector<double> draws;
  for (std::size_t t = 0; t < kDraws; ++t) {
    toy.sampler.step_delta2();
    draws.push_back(toy.sampler.state().delta2);
  }
  return ks_check("KS ALD precision", std::move(draws), gamma_cdf(shape, rate));
}

// ---------------------------------------------------------------------------

namespace {

struct NcsToy {
  ModelSpec spec;
  NcsSampler sampler;
  Vec g0;
  std::mt19937_64 eng{41};

  NcsToy() : spec(full_spec(0.3)), sampler(spec, small_config(12), SeededRng(41)) {
    g0 = sampler.state().g;
  }

  void randomize() {
    auto& st = sampler.mutable_state();
    st.g = g0 + random_normal(g0.size(), eng, 0.3);
    st.lambda = std::exp(uniform(eng, -3.0, 1.0));
    st.latent.x = spec.benchmark_proxy() + random_normal(st.latent.x.size(), eng, 0.5);
    st.latent.mu_x = uniform(eng, -1.0, 1.0);
    st.latent.sigma2_x = uniform(eng, 0.5, 3.0);
    randomize_proxies(st.proxies, eng);
    sampler.sync();
  }

  std::vector<double> knots() const {
    const auto k = sampler.state().basis->grid().knots();
    return {k.begin(), k.end()};
  }

  double loss(const DenseNcs& g) const {
    const auto& x = sampler.state().latent.x;
    double v = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) v += check_loss(spec.data.y[i] - g(x[i]), spec.p.value());
    return v;
  }
};

}  // namespace

Check mh_ncs_g() {
  Check c{"MH ratio: NCS curve", true, 0.0, kMhTol};
  NcsToy toy;
  for (int t = 0; t < 100; ++t) {
    toy.randomize();
    const auto& st = toy.sampler.state();
    const Vec g_star = st.g + random_normal(st.g.size(), toy.eng, 0.1);
    const DenseNcs cur(toy.knots(), st.g);
    const DenseNcs prop(toy.knots(), g_star);
    const double ref = -(toy.loss(prop) - toy.loss(cur)) -
                       0.5 * st.lambda * (prop.roughness() - cur.roughness());
    track(c, toy.sampler.g_log_ratio(g_star) - ref, ref);
  }
  c.pass = c.worst <= c.bound;
  return c;
}

Check mh_ncs_lambda() {
  Check c{"MH ratio: NCS smoothing precision", true, 0.0, kMhTol};
  NcsToy toy;
  const GammaPrior prior = toy.spec.priors.curve_precision;
  for (int t = 0; t < 100; ++t) {
    toy.randomize();
    const auto& st = toy.sampler.state();
    const double lam = st.lambda;
    const double lam_star = lam * std::exp(0.5 * std::normal_distribution<double>()(toy.eng));
    const double R = DenseNcs(toy.knots(), st.g).roughness();
    const double half_rank = 0.5 * static_cast<double>(st.g.size() - 2);
    auto log_target = [&](double l) {
      return half_rank * std::log(l) - 0.5 * l * R + (prior.shape - 1.0) * std::log(l) - l / prior.b;
    };
    const double sd = 0.5;
    const double q_fwd = std::log(boost::math::pdf(boost::math::lognormal_distribution<>(std::log(lam), sd), lam_star));
    const double q_back = std::log(boost::math::pdf(boost::math::lognormal_distribution<>(std::log(lam_star), sd), lam));
    const double ref = log_target(lam_star) - log_target(lam) + q_back - q_fwd;
    track(c, toy.sampler.lambda_log_ratio(lam_star) - ref, ref);
  }
  c.pass = c.worst <= c.bound;
  return c;
}

Check mh_ncs_x() {
  Check c{"MH ratio: NCS latent covariate", true, 0.0, kMhTol};
  NcsToy toy;
  const auto& data = toy.spec.data;
  for (int t = 0; t < 100; ++t) {
    toy.randomize();
    const auto& st = toy.sampler.state();
    const Vec x_star = st.latent.x + random_normal(st.latent.x.size(), toy.eng, 0.5);
    const Vec lib = toy.sampler.x_log_ratio(x_star);
    const DenseNcs g(toy.knots(), st.g);
    for (Eigen::Index i = 0; i < x_star.size(); ++i) {
      std::vector<double> w;
      for (const auto& col : data.w) w.push_back(col[i]);
      auto dens = [&](double x) {
        return ncs_site_log_density(g, toy.spec.p.value(), data.y[i], w, toy.spec.proxies, st.proxies,
                                    st.latent.mu_x, st.latent.sigma2_x, x);
      };
      const double ref = dens(x_star[i]) - dens(st.latent.x[i]);
      track(c, lib[i] - ref, ref);
    }
  }
  c.pass = c.worst <= c.bound;
  return c;
}

Check mh_pspline_x() {
  Check c{"MH ratio: P-spline latent covariate", true, 0.0, kMhTol};
  PsplineToy toy(0.7);
  std::mt19937_64 eng(51);
  std::exponential_distribution<double> ex(1.0);
  const auto& data = toy.spec.data;
  for (int t = 0; t < 100; ++t) {
    auto& ms = toy.sampler.mutable_state();
    ms.beta += random_normal(ms.beta.size(), eng, 0.01);
    for (Eigen::Index i = 0; i < ms.s.size(); ++i) ms.s[i] = 0.1 + ex(eng);
    ms.delta2 = uniform(eng, 0.5, 2.0);
    ms.latent.x = data.w[0] + random_normal(ms.latent.x.size(), eng, 0.5);
    ms.latent.mu_x = uniform(eng, -1.0, 1.0);
    ms.latent.sigma2_x = uniform(eng, 0.5, 3.0);
    randomize_proxies(ms.proxies, eng);
    toy.sampler.sync();

    const auto& st = toy.sampler.state();
    const auto knots = st.basis->grid().knots();
    const Vec x_star = st.latent.x + random_normal(st.latent.x.size(), eng, 0.5);
    const Vec lib = toy.sampler.x_log_ratio(x_star);
    for (Eigen::Index i = 0; i < x_star.size(); ++i) {
      auto dens = [&](double x) {
        const double r = data.y[i] - tpow_eval(knots, st.basis->degree(), st.beta, x);
        double v = log_normal_pdf(r, toy.A * st.s[i], toy.B * st.s[i] / st.delta2) +
                   log_normal_pdf(x, st.latent.mu_x, st.latent.sigma2_x);
        for (std::size_t k = 0; k < data.w.size(); ++k) {
          v += log_normal_pdf(data.w[k][i], proxy_mean_ref(toy.spec.proxies[k], st.proxies[k], x),
                              proxy_sigma2(st.proxies[k]));
        }
        return v;
      };
      const bool outside = x_star[i] < knots.front() || x_star[i] > knots.back();
      if (outside) {
        if (!(lib[i] == -std::numeric_limits<double>::infinity())) c.worst = std::numeric_limits<double>::infinity();
        continue;
      }
      const double ref = dens(x_star[i]) - dens(st.latent.x[i]);
      track(c, lib[i] - ref, ref);
    }
  }
  c.pass = c.worst <= c.bound;
  return c;
}

std::vector<Check> run_oracle_suite() {
  return {ncs_penalty_quadrature(),
          ncs_linear_null_space(),
          pspline_penalty_structure(),
          ald_mixture_marginalization(),
          check_loss_identities(),
          ks_proxy_variance(),
          ks_latent_variance(),
          ks_latent_mean(),
          ks_poly_coeffs(),
          ks_spline_proxy_coeffs(),
          ks_penalty_precision(),
          ks_pspline_beta(),
          ks_pspline_lambda(),
          ks_pspline_s(),
          ks_pspline_delta2(),
          mh_ncs_g(),
          mh_ncs_lambda(),
          mh_ncs_x(),
          mh_pspline_x()};
}

}  // namespace qrproxy::oracle
