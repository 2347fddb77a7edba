#include "qrproxy/model.hpp"

#include <cmath>

namespace qrproxy {

QuantileLevel::QuantileLevel(double p) : p_(p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error("quantile level out of range: " + std::to_string(p));
  }
}

std::string ProxySpec::to_string() const {
  switch (kind) {
    case ProxyKind::Benchmark:
      return "benchmark";
    case ProxyKind::Polynomial:
      return "poly" + std::to_string(degree);
    case ProxyKind::Spline:
      return "spline" + std::to_string(degree);
  }
  return "?";
}

ProxySpec ProxySpec::parse(const std::string& text) {
  auto with_degree = [&](const std::string& prefix, int fallback) {
    const std::string rest = text.substr(prefix.size());
    if (rest.empty()) return fallback;
    std::size_t used = 0;
    int d = std::stoi(rest, &used);
    if (used != rest.size() || d < 1) throw Error("bad proxy degree in '" + text + "'");
    return d;
  };
  if (text == "benchmark" || text == "identity") return benchmark();
  if (text.rfind("poly", 0) == 0) return polynomial(with_degree("poly", 2));
  if (text.rfind("spline", 0) == 0) return spline(with_degree("spline", 3));
  throw Error("unknown proxy kind '" + text + "'");
}

void PriorConfig::validate(std::size_t num_proxies) const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(std::string("prior hyperparameter must be positive: ") + what);
    }
  };
  positive(proxy_variance.shape, "proxy variance shape");
  positive(proxy_variance.scale, "proxy variance scale");
  if (!per_proxy.empty() && per_proxy.size() != num_proxies) {
    throw Error("per-proxy priors must have one entry per proxy");
  }
  for (const auto& pr : per_proxy) {
    positive(pr.shape, "proxy variance shape");
    positive(pr.scale, "proxy variance scale");
  }
  positive(latent_variance.shape, "latent variance shape");
  positive(latent_variance.scale, "latent variance scale");
  positive(curve_precision.shape, "curve precision shape");
  positive(curve_precision.b, "curve precision b");
  positive(proxy_precision.shape, "proxy precision shape");
  positive(proxy_precision.b, "proxy precision b");
  positive(ald_precision.shape, "ald precision shape");
  positive(ald_precision.b, "ald precision b");
  positive(mu_var, "mu variance");
  positive(alpha_var, "alpha variance");
  if (!std::isfinite(mu_mean) || !std::isfinite(alpha_mean)) {
    throw Error("prior means must be finite");
  }
}

ModelSpec validate_model(ObservedData data, std::vector<ProxySpec> specs, double p,
                         PriorConfig priors) {
  QuantileLevel level(p);
  const std::size_t n = data.n();
  if (n < 3) throw Error("need at least 3 observations");
  if (data.w.empty()) throw Error("need at least one proxy");
  if (specs.size() != data.w.size()) {
    throw Error("proxy spec count does not match proxy columns");
  }
  for (const auto& col : data.w) {
    if (static_cast<std::size_t>(col.size()) != n) throw Error("length mismatch between y and proxies");
    if (!col.allFinite()) throw Error("non-finite proxy value");
  }
  if (!data.y.allFinite()) throw Error("non-finite outcome value");

  std::size_t bench = specs.size();
  for (std::size_t k = 0; k < specs.size(); ++k) {
    if (specs[k].kind == ProxyKind::Benchmark) {
      if (bench != specs.size()) throw Error("multiple benchmark proxies");
      bench = k;
    } else if (specs[k].degree < 1) {
      throw Error("proxy degree must be at least 1");
    }
  }
  if (bench == specs.size()) throw Error("no benchmark proxy");
  priors.validate(specs.size());

  ModelSpec spec{std::move(data), std::move(specs), level, std::move(priors), bench};
  return spec;
}

}  // namespace qrproxy
