#pragma once

#include <cstdint>
#include <string>

#include "qrproxy/distributions.hpp"
#include "qrproxy/model.hpp"

namespace qrproxy::sim {

enum class ErrorLaw { Normal, StudentT2, Gamma41 };

struct Regime {
  int dataset = 1;  // 1 or 2
  ErrorLaw error = ErrorLaw::Normal;

  std::string name() const;  // e.g. "dataset1-normal"
  bool operator==(const Regime&) const = default;
};

std::string to_string(ErrorLaw law);
ErrorLaw parse_error_law(const std::string& text);
Regime parse_regime(int dataset, const std::string& error);
/// Accepts "dataset1-normal", "2-t2", ...
Regime parse_regime(const std::string& text);

struct SimDataset {
  Regime regime;
  std::uint64_t seed = 0;
  Vec y;
  Vec x_true;
  Vec w1, w2, w3;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
};

/// Lower and upper ends of the covariate after rescaling.
inline constexpr double kXLo = -5.0;
inline constexpr double kXHi = 5.0;

/// Mean function and error scale of y at a covariate value on [-5, 5].
/// Dataset2 is evaluated at the unit-interval coordinate u = (x + 5) / 10
/// it was written for.
double response_mean(int dataset, double x);
double response_scale(int dataset, double x);

double sample_error(ErrorLaw law, SeededRng& rng);
/// y = mean(x) + scale(x) e.
double draw_response(const Regime& regime, double x, SeededRng& rng);

/// F^{-1}(p) for the error law.
double error_quantile(ErrorLaw law, double p);
double true_quantile(const Regime& regime, double p, double x);

/// Proxy mean functions: h1(x) = x, h2(x) = 3 + 0.25x + 0.75x^2,
/// h3(x) = sin(12(x + 0.1)) / (x + 0.1) (12 at the removable singularity).
double h1(double x);
double h2(double x);
double h3(double x);

struct Proxies {
  Vec w1, w2, w3;
};
Proxies gen_proxies(const Vec& x_true, std::uint64_t seed);

SimDataset gen_dataset(const Regime& regime, std::size_t n, std::uint64_t seed);

/// CSV with columns y,x_true,w1,w2,w3 plus `<path>.json` holding regime and seed.
void write_dataset(const SimDataset& ds, const std::string& csv_path);

}  // namespace qrproxy::sim
