#pragma once

#include <string>
#include <vector>

#include "qrproxy/sampler.hpp"

namespace qrproxy::diag {

struct TraceSummary {
  std::string name;
  double ess = 0.0;
  double rhat = 1.0;
  /// Constant trace: ESS forced to 1, R-hat to 1.
  bool degenerate = false;
};

/// Effective sample size with Geyer's initial monotone sequence estimator.
/// Throws with fewer than 2 draws.
double effective_sample_size(const Vec& trace, bool* degenerate = nullptr);

/// Potential scale reduction from the two halves of one chain.
double split_rhat(const Vec& trace);

TraceSummary summarize_trace(const std::string& name, const Vec& trace);

/// Scalar traces of a run: lambda, delta2 (P-spline), mu_x and sigma2_x
/// (latent x only), each proxy variance, and the curve at its quartile knots.
std::vector<TraceSummary> diagnose(const PosteriorSamples& samples, bool latent_sampled);

}  // namespace qrproxy::diag
