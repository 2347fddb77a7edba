#include "qrproxy/simgen.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

namespace qrproxy::sim {

std::string to_string(ErrorLaw law) {
  switch (law) {
    case ErrorLaw::Normal:
      return "normal";
    case ErrorLaw::StudentT2:
      return "t2";
    case ErrorLaw::Gamma41:
      return "gamma";
  }
  return "normal";
}

ErrorLaw parse_error_law(const std::string& text) {
  if (text == "normal") return ErrorLaw::Normal;
  if (text == "t2" || text == "t" || text == "student") return ErrorLaw::StudentT2;
  if (text == "gamma") return ErrorLaw::Gamma41;
  throw Error("unknown error law: " + text);
}

std::string Regime::name() const { return "dataset" + std::to_string(dataset) + "-" + to_string(error); }

Regime parse_regime(int dataset, const std::string& error) {
  if (dataset != 1 && dataset != 2) throw Error("unknown regime: dataset" + std::to_string(dataset));
  return {dataset, parse_error_law(error)};
}

Regime parse_regime(const std::string& text) {
  std::string t = text;
  if (t.rfind("dataset", 0) == 0) t = t.substr(7);
  const auto dash = t.find('-');
  const std::string ds = t.substr(0, dash);
  const std::string err = dash == std::string::npos ? "normal" : t.substr(dash + 1);
  if (ds != "1" && ds != "2") throw Error("unknown regime: " + text);
  return parse_regime(ds == "1" ? 1 : 2, err);
}

namespace {

double unit_coordinate(double x) { return (x - kXLo) / (kXHi - kXLo); }

}  // namespace

double response_mean(int dataset, double x) {
  if (dataset == 1) return 0.4 * x + 0.5 * std::sin(2.7 * x) + 1.1 / (1.0 + x * x);
  if (dataset == 2) {
    const double u = unit_coordinate(x);
    const double d = u - 0.5;
    return std::sin(2.0 * (4.0 * u - 2.0)) + 2.0 * std::exp(-256.0 * d * d);
  }
  throw Error("unknown regime: dataset" + std::to_string(dataset));
}

double response_scale(int dataset, double x) {
  if (dataset == 1) return 1.0;
  if (dataset == 2) return 1.5 * unit_coordinate(x);
  throw Error("unknown regime: dataset" + std::to_string(dataset));
}

double sample_error(ErrorLaw law, SeededRng& rng) {
  switch (law) {
    case ErrorLaw::Normal:
      return rng.normal();
    case ErrorLaw::StudentT2:
      // chi-square(2) / 2 is a unit exponential.
      return rng.normal() / std::sqrt(sample_exponential(1.0, rng));
    case ErrorLaw::Gamma41:
      return sample_gamma(4.0, 1.0, rng);
  }
  return 0.0;
}

double draw_response(const Regime& regime, double x, SeededRng& rng) {
  return response_mean(regime.dataset, x) + response_scale(regime.dataset, x) * sample_error(regime.error, rng);
}

double error_quantile(ErrorLaw law, double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("quantile level out of range");
  switch (law) {
    case ErrorLaw::Normal:
      return boost::math::quantile(boost::math::normal_distribution<double>(), p);
    case ErrorLaw::StudentT2:
      return (2.0 * p - 1.0) / std::sqrt(2.0 * p * (1.0 - p));
    case ErrorLaw::Gamma41:
      return boost::math::gamma_p_inv(4.0, p);
  }
  return 0.0;
}

double true_quantile(const Regime& regime, double p, double x) {
  return response_mean(regime.dataset, x) + response_scale(regime.dataset, x) * error_quantile(regime.error, p);
}

double h1(double x) { return x; }
double h2(double x) { return 3.0 + 0.25 * x + 0.75 * x * x; }
double h3(double x) {
  const double t = x + 0.1;
  if (std::abs(t) < 1e-8) return 12.0 * (1.0 - 24.0 * t * t);
  return std::sin(12.0 * t) / t;
}

Proxies gen_proxies(const Vec& x_true, std::uint64_t seed) {
  const auto n = x_true.size();
  SeededRng base(seed, 0);
  SeededRng r1 = base.child(2), r2 = base.child(3), r3 = base.child(4);
  Proxies out{Vec(n), Vec(n), Vec(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = x_true[i];
    if (!std::isfinite(x)) throw Error("non-finite covariate");
    out.w1[i] = h1(x) + r1.normal();
    out.w2[i] = h2(x) + r2.normal();
    out.w3[i] = h3(x) + r3.normal();
  }
  return out;
}

SimDataset gen_dataset(const Regime& regime, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error("dataset needs n >= 1");
  if (regime.dataset != 1 && regime.dataset != 2) {
    throw Error("unknown regime: dataset" + std::to_string(regime.dataset));
  }
  SeededRng base(seed, 0);
  SeededRng rx = base.child(0), re = base.child(1);
  SimDataset ds;
  ds.regime = regime;
  ds.seed = seed;
  const auto m = static_cast<Eigen::Index>(n);
  ds.x_true.resize(m);
  ds.y.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) ds.x_true[i] = kXLo + (kXHi - kXLo) * rx.uniform();
  for (Eigen::Index i = 0; i < m; ++i) ds.y[i] = draw_response(regime, ds.x_true[i], re);
  Proxies w = gen_proxies(ds.x_true, seed);
  ds.w1 = std::move(w.w1);
  ds.w2 = std::move(w.w2);
  ds.w3 = std::move(w.w3);
  return ds;
}

void write_dataset(const SimDataset& ds, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw Error("cannot open " + csv_path);
  out << "y,x_true,w1,w2,w3\n" << std::setprecision(17);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out << ds.y[ii] << ',' << ds.x_true[ii] << ',' << ds.w1[ii] << ',' << ds.w2[ii] << ','
        << ds.w3[ii] << '\n';
  }
  if (!out) throw Error("write failed: " + csv_path);
  nlohmann::json meta{{"regime", ds.regime.name()},
                      {"dataset", ds.regime.dataset},
                      {"error", to_string(ds.regime.error)},
                      {"n", ds.n()},
                      {"seed", ds.seed}};
  std::ofstream js(csv_path + ".json");
  js << meta.dump(2) << '\n';
  if (!js) throw Error("write failed: " + csv_path + ".json");
}

}  // namespace qrproxy::sim
