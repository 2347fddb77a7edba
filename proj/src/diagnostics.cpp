#include "qrproxy/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qrproxy::diag {

namespace {

bool is_constant(const Vec& v) {
  const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
  return (v.maxCoeff() - v.minCoeff()) <= 1e-14 * scale;
}

}  // namespace

double effective_sample_size(const Vec& trace, bool* degenerate) {
  const auto n = trace.size();
  if (n < 2) throw Error("diagnostics need at least 2 draws");
  if (degenerate) *degenerate = false;
  if (is_constant(trace)) {
    if (degenerate) *degenerate = true;
    return 1.0;
  }
  const Vec c = trace.array() - trace.mean();
  auto autocov = [&](Eigen::Index lag) {
    return c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n);
  };
  const double g0 = autocov(0);
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  const double tau = -1.0 + 2.0 * sum / g0;
  return static_cast<double>(n) / std::max(tau, 1e-12);
}

double split_rhat(const Vec& trace) {
  const auto half = trace.size() / 2;
  if (half < 2) throw Error("diagnostics need at least 4 draws for split R-hat");
  if (is_constant(trace)) return 1.0;
  const Vec a = trace.head(half);
  const Vec b = trace.segment(trace.size() - half, half);
  const double h = static_cast<double>(half);
  auto var = [h](const Vec& v) { return (v.array() - v.mean()).square().sum() / (h - 1.0); };
  const double w = 0.5 * (var(a) + var(b));
  const double ma = a.mean();
  const double mb = b.mean();
  const double mm = 0.5 * (ma + mb);
  const double bvar = h * ((ma - mm) * (ma - mm) + (mb - mm) * (mb - mm));
  if (!(w > 0.0)) return 1.0;
  const double vplus = (h - 1.0) / h * w + bvar / h;
  return std::sqrt(vplus / w);
}

TraceSummary summarize_trace(const std::string& name, const Vec& trace) {
  TraceSummary s;
  s.name = name;
  s.ess = effective_sample_size(trace, &s.degenerate);
  s.rhat = trace.size() >= 4 ? split_rhat(trace) : 1.0;
  return s;
}

std::vector<TraceSummary> diagnose(const PosteriorSamples& samples, bool latent_sampled) {
  std::vector<TraceSummary> out;
  out.push_back(summarize_trace("lambda", samples.lambda));
  if (samples.family == CurveFamily::Pspline) out.push_back(summarize_trace("delta2", samples.delta2));
  if (latent_sampled) {
    out.push_back(summarize_trace("mu_x", samples.mu_x));
    out.push_back(summarize_trace("sigma2_x", samples.sigma2_x));
    for (std::size_t k = 0; k < samples.sigma2.size(); ++k) {
      out.push_back(summarize_trace("sigma2_" + std::to_string(k + 1), samples.sigma2[k]));
    }
  }
  const spline::KnotGrid& grid =
      samples.family == CurveFamily::Ncs ? samples.ncs->grid() : samples.pspline->grid();
  const std::size_t N = grid.size();
  const double probes[3] = {grid[N / 4], grid[N / 2], grid[(3 * N) / 4]};
  const Mat at = samples.curve_draws_at(probes);
  const char* names[3] = {"curve_q1", "curve_q2", "curve_q3"};
  for (int j = 0; j < 3; ++j) out.push_back(summarize_trace(names[j], at.col(j)));
  return out;
}

}  // namespace qrproxy::diag
