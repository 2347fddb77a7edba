#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qrproxy/diagnostics.hpp"
#include "qrproxy/sampler.hpp"
#include "qrproxy/simgen.hpp"

namespace qrproxy::harness {

enum class Variant { WoME, Naive, BempPoly, BempNonlinear, BempAll, Bemp };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

/// A proxy column of an input CSV with its relation to x, e.g. "w2:poly2".
struct ColumnProxy {
  std::string column;
  ProxySpec spec;

  static ColumnProxy parse(const std::string& text);
  std::string to_string() const;
};

struct RunConfig {
  /// Simulation regime; unset when reading `input`.
  std::optional<sim::Regime> regime = sim::Regime{};
  std::string input;
  std::string y_column = "y";
  /// CSV mode proxy columns; the first is the benchmark.
  std::vector<ColumnProxy> proxies;
  std::vector<Variant> variants{Variant::WoME, Variant::Naive, Variant::BempPoly,
                                Variant::BempNonlinear, Variant::BempAll};
  std::vector<double> levels{0.1, 0.25, 0.5, 0.75, 0.9};
  std::size_t n = 300;
  std::size_t iterations = 20000;
  std::size_t burnin = 5000;
  std::size_t thin = 10;
  std::size_t knots = 30;
  std::size_t proxy_knots = 0;
  CurveFamily family = CurveFamily::Ncs;
  GProposal g_proposal = GProposal::Spherical;
  std::size_t reps = 5;
  std::uint64_t seed = 20240601;
  PriorConfig priors;
  std::string out;
  bool log_y = false;
  /// Per-column trimming quantile q; rows outside [q, 1 - q] are dropped.
  double trim = 0.0;
  /// Proxy the naive estimator substitutes for x (simulation: w1, w2 or w3).
  std::string naive_proxy = "w2";
  /// Worker threads; 0 picks the hardware concurrency.
  std::size_t workers = 0;
  std::size_t curve_points = 101;

  void validate() const;
  SamplerConfig sampler() const;
};

/// "desk", "paper" or "smoke".
RunConfig preset(const std::string& name);

void to_json(nlohmann::json& j, const RunConfig& c);
/// Fields present in j override `base`.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

struct RunRow {
  Variant variant = Variant::BempAll;
  double p = 0.5;
  std::size_t rep = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t chain_seed = 0;
  std::uint64_t chain_stream = 0;
  /// NaN when not applicable (no truth, or x not sampled, or no spline proxy).
  double mse = 0.0;
  double ppl1 = 0.0;
  double ppl_inf = 0.0;
  double x_mse = 0.0;
  double h3_mse = 0.0;
  double acc_g = 0.0;
  double acc_lambda = 0.0;
  double acc_x = 0.0;
  double min_ess = 0.0;
  double max_rhat = 0.0;
  std::uint64_t clamp_events = 0;
  std::size_t draws = 0;
};

struct CurveBand {
  Vec grid;
  Vec mean;
  Vec lo;
  Vec hi;
  Vec truth;  // empty without a known truth
};

struct RunResult {
  RunRow row;
  CurveBand band;
  std::vector<diag::TraceSummary> traces;
  /// Posterior mean of x, kept for CSV fits.
  Vec x_mean;
  double seconds = 0.0;
};

struct SummaryRow {
  Variant variant;
  double p;
  std::size_t reps;
  double mse_mean, mse_sd;
  double ppl1_mean, ppl1_sd;
  double ppl_inf_mean, ppl_inf_sd;
  double x_mse_mean, x_mse_sd;
  double h3_mse_mean, h3_mse_sd;
};

struct ReplicateReport {
  /// Ordered by replicate, then variant (config order), then level.
  std::vector<RunResult> runs;
  std::vector<SummaryRow> summary;
};

/// Seeds of one run: data seed = base + rep; chain stream depends on p only
/// so every variant of a replicate shares the chain's random stream.
std::uint64_t data_seed(const RunConfig& c, std::size_t rep);
std::uint64_t chain_stream(double p);

/// Model and sampler settings for one variant on a simulated dataset.
struct Prepared {
  ModelSpec spec;
  SamplerConfig sampler;
  /// Covariate values at which the curve estimates g_p(x_i); x_true except
  /// for the naive estimator, which estimates g at its substitute proxy.
  Vec score_at;
  bool latent = true;
  std::optional<std::size_t> spline_proxy;
};
Prepared prepare_sim(const RunConfig& c, Variant v, const sim::SimDataset& ds, double p);

/// One chain plus its scores.
RunResult run_one(const RunConfig& c, Variant v, double p, std::size_t rep);

/// Full Monte Carlo grid on a worker pool. Output is independent of the
/// worker count and scheduling order.
ReplicateReport run_experiment(const RunConfig& c);

std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows,
                                  const std::vector<Variant>& variants,
                                  const std::vector<double>& levels);

/// Writes runs.csv, summary.csv, diagnostics.csv, timing.csv, curves/ and
/// manifest.json under c.out.
void write_outputs(const RunConfig& c, const ReplicateReport& report);

std::string format_runs_csv(const std::vector<RunResult>& runs);
std::string format_summary_csv(const std::vector<SummaryRow>& rows);

/// CSV input: loaded, log-transformed and trimmed observed data.
struct CsvData {
  ObservedData data;
  std::vector<ProxySpec> proxies;
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
};
CsvData load_csv(const RunConfig& c);

/// Fit a CSV dataset at each level (variants BEMP and naive only) and write
/// curve files, x posterior means and diagnostics.
ReplicateReport fit_csv(const RunConfig& c);

}  // namespace qrproxy::harness
