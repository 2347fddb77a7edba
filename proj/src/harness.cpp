#include "qrproxy/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/tokenizer.hpp>
#include <nlohmann/json.hpp>

#include "qrproxy/metrics.hpp"
#include "qrproxy/sampler_ncs.hpp"
#include "qrproxy/sampler_pspline.hpp"
#include "qrproxy/simd/kernels.hpp"

namespace qrproxy::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_level(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", p);
  return buf;
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::WoME: return "woME";
    case Variant::Naive: return "naive";
    case Variant::BempPoly: return "BEMP-poly";
    case Variant::BempNonlinear: return "BEMP-nonlinear";
    case Variant::BempAll: return "BEMP-all";
    case Variant::Bemp: return "BEMP";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (t == "wome") return Variant::WoME;
  if (t == "naive") return Variant::Naive;
  if (t == "bemp-poly") return Variant::BempPoly;
  if (t == "bemp-nonlinear") return Variant::BempNonlinear;
  if (t == "bemp-all") return Variant::BempAll;
  if (t == "bemp") return Variant::Bemp;
  throw Error("unknown variant: " + text);
}

ColumnProxy ColumnProxy::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error("proxy must look like column:kind, got '" + text + "'");
  }
  return {text.substr(0, colon), ProxySpec::parse(text.substr(colon + 1))};
}

std::string ColumnProxy::to_string() const { return column + ":" + spec.to_string(); }

// ---------------------------------------------------------------------------
// Configuration

void RunConfig::validate() const {
  sampler().validate();
  if (levels.empty()) throw Error("no quantile levels");
  for (double p : levels) QuantileLevel{p};
  if (variants.empty()) throw Error("no variants");
  if (reps < 1) throw Error("reps must be at least 1");
  if (!(trim >= 0.0 && trim < 0.5)) throw Error("trim must lie in [0, 0.5)");
  if (curve_points < 2) throw Error("curve_points must be at least 2");
  priors.validate(3);
  if (regime) {
    if (!input.empty()) throw Error("choose either a regime or an input file");
    if (n < 1) throw Error("n must be at least 1");
    if (naive_proxy != "w1" && naive_proxy != "w2" && naive_proxy != "w3") {
      throw Error("naive proxy must be w1, w2 or w3");
    }
    for (Variant v : variants) {
      if (v == Variant::Bemp) throw Error("variant BEMP needs input data; use BEMP-all");
    }
  } else {
    if (input.empty()) throw Error("no regime and no input file");
    if (proxies.empty()) throw Error("input mode needs at least one proxy column");
    if (proxies.front().spec.kind != ProxyKind::Benchmark) {
      throw Error("the first proxy column must be the benchmark");
    }
    for (Variant v : variants) {
      if (v != Variant::Bemp && v != Variant::Naive) {
        throw Error("input mode supports variants BEMP and naive only");
      }
    }
  }
}

SamplerConfig RunConfig::sampler() const {
  SamplerConfig s;
  s.iterations = iterations;
  s.burnin = burnin;
  s.thin = thin;
  s.knots = knots;
  s.proxy_knots = proxy_knots;
  s.g_proposal = g_proposal;
  return s;
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.n = 1000;
    c.iterations = 300000;
    c.burnin = 50000;
    c.thin = 50;
    c.reps = 100;
    return c;
  }
  if (name == "smoke") {
    c.n = 100;
    c.iterations = 2000;
    c.burnin = 500;
    c.thin = 5;
    c.reps = 2;
    c.levels = {0.5};
    return c;
  }
  throw Error("unknown preset: " + name);
}

namespace {

json ig_json(const InvGammaPrior& p) { return {{"shape", p.shape}, {"scale", p.scale}}; }
json ga_json(const GammaPrior& p) { return {{"shape", p.shape}, {"b", p.b}}; }

void ig_read(const json& j, InvGammaPrior& p) {
  p.shape = j.value("shape", p.shape);
  p.scale = j.value("scale", p.scale);
}
void ga_read(const json& j, GammaPrior& p) {
  p.shape = j.value("shape", p.shape);
  p.b = j.value("b", p.b);
}

}  // namespace

void to_json(json& j, const RunConfig& c) {
  std::vector<std::string> variants;
  for (Variant v : c.variants) variants.push_back(to_string(v));
  std::vector<std::string> proxies;
  for (const auto& p : c.proxies) proxies.push_back(p.to_string());
  json priors = {{"proxy_variance", ig_json(c.priors.proxy_variance)},
                 {"latent_variance", ig_json(c.priors.latent_variance)},
                 {"curve_precision", ga_json(c.priors.curve_precision)},
                 {"proxy_precision", ga_json(c.priors.proxy_precision)},
                 {"ald_precision", ga_json(c.priors.ald_precision)},
                 {"mu_mean", c.priors.mu_mean},
                 {"mu_var", c.priors.mu_var},
                 {"alpha_mean", c.priors.alpha_mean},
                 {"alpha_var", c.priors.alpha_var}};
  j = json{{"regime", c.regime ? json(c.regime->name()) : json(nullptr)},
           {"input", c.input},
           {"y_column", c.y_column},
           {"proxies", proxies},
           {"variants", variants},
           {"levels", c.levels},
           {"n", c.n},
           {"iterations", c.iterations},
           {"burnin", c.burnin},
           {"thin", c.thin},
           {"knots", c.knots},
           {"proxy_knots", c.proxy_knots},
           {"spline", to_string(c.family)},
           {"g_proposal", to_string(c.g_proposal)},
           {"reps", c.reps},
           {"seed", c.seed},
           {"priors", priors},
           {"out", c.out},
           {"log_y", c.log_y},
           {"trim", c.trim},
           {"naive_proxy", c.naive_proxy},
           {"workers", c.workers},
           {"curve_points", c.curve_points}};
}

RunConfig config_from_json(const json& j, RunConfig c) {
  try {
    if (j.contains("preset")) c = preset(j.at("preset").get<std::string>());
    if (j.contains("regime")) {
      if (j.at("regime").is_null()) {
        c.regime.reset();
      } else {
        c.regime = sim::parse_regime(j.at("regime").get<std::string>());
      }
    }
    if (j.contains("input")) {
      c.input = j.at("input").get<std::string>();
      if (!c.input.empty() && !j.contains("regime")) c.regime.reset();
    }
    c.y_column = j.value("y_column", c.y_column);
    if (j.contains("proxies")) {
      c.proxies.clear();
      for (const auto& s : j.at("proxies")) c.proxies.push_back(ColumnProxy::parse(s.get<std::string>()));
    }
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& s : j.at("variants")) c.variants.push_back(parse_variant(s.get<std::string>()));
    }
    if (j.contains("levels")) c.levels = j.at("levels").get<std::vector<double>>();
    c.n = j.value("n", c.n);
    c.iterations = j.value("iterations", c.iterations);
    c.burnin = j.value("burnin", c.burnin);
    c.thin = j.value("thin", c.thin);
    c.knots = j.value("knots", c.knots);
    c.proxy_knots = j.value("proxy_knots", c.proxy_knots);
    if (j.contains("spline")) c.family = parse_curve_family(j.at("spline").get<std::string>());
    if (j.contains("g_proposal")) c.g_proposal = parse_g_proposal(j.at("g_proposal").get<std::string>());
    c.reps = j.value("reps", c.reps);
    c.seed = j.value("seed", c.seed);
    if (j.contains("priors")) {
      const json& p = j.at("priors");
      if (p.contains("proxy_variance")) ig_read(p.at("proxy_variance"), c.priors.proxy_variance);
      if (p.contains("latent_variance")) ig_read(p.at("latent_variance"), c.priors.latent_variance);
      if (p.contains("curve_precision")) ga_read(p.at("curve_precision"), c.priors.curve_precision);
      if (p.contains("proxy_precision")) ga_read(p.at("proxy_precision"), c.priors.proxy_precision);
      if (p.contains("ald_precision")) ga_read(p.at("ald_precision"), c.priors.ald_precision);
      c.priors.mu_mean = p.value("mu_mean", c.priors.mu_mean);
      c.priors.mu_var = p.value("mu_var", c.priors.mu_var);
      c.priors.alpha_mean = p.value("alpha_mean", c.priors.alpha_mean);
      c.priors.alpha_var = p.value("alpha_var", c.priors.alpha_var);
    }
    c.out = j.value("out", c.out);
    c.log_y = j.value("log_y", c.log_y);
    c.trim = j.value("trim", c.trim);
    c.naive_proxy = j.value("naive_proxy", c.naive_proxy);
    c.workers = j.value("workers", c.workers);
    c.curve_points = j.value("curve_points", c.curve_points);
  } catch (const json::exception& e) {
    throw Error(std::string("bad config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Runs

std::uint64_t data_seed(const RunConfig& c, std::size_t rep) { return c.seed + rep; }

std::uint64_t chain_stream(double p) {
  return 1 + static_cast<std::uint64_t>(std::llround(p * 1e6));
}

Prepared prepare_sim(const RunConfig& c, Variant v, const sim::SimDataset& ds, double p) {
  ObservedData od;
  od.y = ds.y;
  std::vector<ProxySpec> ps;
  Prepared out;
  out.sampler = c.sampler();
  out.score_at = ds.x_true;
  const int degree = out.sampler.spline_degree;
  switch (v) {
    case Variant::WoME:
      od.w = {ds.w1};
      ps = {ProxySpec::benchmark()};
      out.sampler.fixed_x = ds.x_true;
      out.latent = false;
      break;
    case Variant::Naive: {
      const Vec& w = c.naive_proxy == "w1" ? ds.w1 : (c.naive_proxy == "w2" ? ds.w2 : ds.w3);
      od.w = {w};
      ps = {ProxySpec::benchmark()};
      out.sampler.fixed_x = w;
      out.score_at = w;
      out.latent = false;
      break;
    }
    case Variant::BempPoly:
      od.w = {ds.w1, ds.w2};
      ps = {ProxySpec::benchmark(), ProxySpec::polynomial(2)};
      break;
    case Variant::BempNonlinear:
      od.w = {ds.w1, ds.w3};
      ps = {ProxySpec::benchmark(), ProxySpec::spline(degree)};
      out.spline_proxy = 1;
      break;
    case Variant::BempAll:
      od.w = {ds.w1, ds.w2, ds.w3};
      ps = {ProxySpec::benchmark(), ProxySpec::polynomial(2), ProxySpec::spline(degree)};
      out.spline_proxy = 2;
      break;
    case Variant::Bemp:
      throw Error("variant BEMP needs input data; use BEMP-all");
  }
  PriorConfig priors = c.priors;
  priors.per_proxy.clear();
  out.spec = validate_model(std::move(od), std::move(ps), p, priors);
  return out;
}

namespace {

PosteriorSamples run_chain(const RunConfig& c, const ModelSpec& spec, const SamplerConfig& sc,
                           std::uint64_t seed, std::uint64_t stream) {
  return c.family == CurveFamily::Ncs ? run_ncs_chain(spec, sc, seed, stream)
                                      : run_pspline_chain(spec, sc, seed, stream);
}

double acceptance_of(const PosteriorSamples& s, const char* name) {
  const BlockAcceptance* a = s.find_acceptance(name);
  return a ? a->rate() : kNaN;
}

CurveBand make_band(const PosteriorSamples& post, std::size_t points) {
  const spline::KnotGrid& grid =
      post.family == CurveFamily::Ncs ? post.ncs->grid() : post.pspline->grid();
  CurveBand b;
  b.grid = Vec::LinSpaced(static_cast<Eigen::Index>(points), grid.lo(), grid.hi());
  const Mat draws = post.curve_draws_at({b.grid.data(), points});
  b.mean = metrics::column_mean(draws);
  b.lo.resize(b.grid.size());
  b.hi.resize(b.grid.size());
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    std::vector<double> col(draws.col(j).data(), draws.col(j).data() + draws.rows());
    b.lo[j] = detail::empirical_quantile(col, 0.025);
    b.hi[j] = detail::empirical_quantile(col, 0.975);
  }
  return b;
}

void fill_chain_fields(RunResult& r, const PosteriorSamples& post, bool latent) {
  r.row.acc_g = acceptance_of(post, "g");
  r.row.acc_lambda = acceptance_of(post, "lambda");
  r.row.acc_x = acceptance_of(post, "x");
  r.row.clamp_events = post.clamp_events;
  r.row.draws = post.draws();
  r.traces = diag::diagnose(post, latent);
  double min_ess = std::numeric_limits<double>::infinity();
  double max_rhat = 0.0;
  for (const auto& t : r.traces) {
    if (t.degenerate) continue;
    min_ess = std::min(min_ess, t.ess);
    max_rhat = std::max(max_rhat, t.rhat);
  }
  r.row.min_ess = std::isinf(min_ess) ? kNaN : min_ess;
  r.row.max_rhat = max_rhat > 0.0 ? max_rhat : kNaN;
}

}  // namespace

RunResult run_one(const RunConfig& c, Variant v, double p, std::size_t rep) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t dseed = data_seed(c, rep);
  const sim::SimDataset ds = sim::gen_dataset(*c.regime, c.n, dseed);
  const Prepared prep = prepare_sim(c, v, ds, p);

  RunResult r;
  r.row.variant = v;
  r.row.p = p;
  r.row.rep = rep;
  r.row.data_seed = dseed;
  r.row.chain_seed = dseed;
  r.row.chain_stream = chain_stream(p);
  const PosteriorSamples post = run_chain(c, prep.spec, prep.sampler, dseed, r.row.chain_stream);

  const auto n = static_cast<std::size_t>(ds.n());
  Vec truth(ds.x_true.size());
  for (Eigen::Index i = 0; i < truth.size(); ++i) truth[i] = sim::true_quantile(ds.regime, p, ds.x_true[i]);
  const metrics::CurveScore score =
      metrics::score_curve(truth, post.curve_draws_at({prep.score_at.data(), n}));
  r.row.mse = score.mse;
  r.row.ppl1 = score.ppl1;
  r.row.ppl_inf = score.ppl_inf;
  r.row.x_mse = prep.latent ? metrics::x_recovery_mse(ds.x_true, post.x_mean) : kNaN;
  r.row.h3_mse = kNaN;
  if (prep.spline_proxy) {
    const Mat hd = post.proxy_draws_at(*prep.spline_proxy, {ds.x_true.data(), n});
    Vec ht(ds.x_true.size());
    for (Eigen::Index i = 0; i < ht.size(); ++i) ht[i] = sim::h3(ds.x_true[i]);
    r.row.h3_mse = metrics::curve_mse(ht, metrics::column_mean(hd));
  }
  fill_chain_fields(r, post, prep.latent);
  r.band = make_band(post, c.curve_points);
  if (v != Variant::Naive) {
    r.band.truth.resize(r.band.grid.size());
    for (Eigen::Index j = 0; j < r.band.grid.size(); ++j) {
      r.band.truth[j] = sim::true_quantile(ds.regime, p, r.band.grid[j]);
    }
  }
  if (prep.latent) r.x_mean = post.x_mean;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

namespace {

struct Task {
  std::size_t rep;
  Variant variant;
  double p;
};

template <class Fn>
std::vector<RunResult> run_pool(const std::vector<Task>& tasks, std::size_t workers, Fn fn) {
  std::vector<RunResult> results(tasks.size());
  std::size_t nthreads = workers != 0 ? workers : std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min(nthreads, tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        results[i] = fn(tasks[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace

ReplicateReport run_experiment(const RunConfig& c) {
  c.validate();
  if (!c.regime) return fit_csv(c);
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < c.reps; ++r) {
    for (Variant v : c.variants) {
      for (double p : c.levels) tasks.push_back({r, v, p});
    }
  }
  ReplicateReport report;
  report.runs = run_pool(tasks, c.workers, [&](const Task& t) { return run_one(c, t.variant, t.p, t.rep); });
  std::vector<RunRow> rows;
  for (const auto& r : report.runs) rows.push_back(r.row);
  report.summary = summarize(rows, c.variants, c.levels);
  return report;
}

std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows,
                                  const std::vector<Variant>& variants,
                                  const std::vector<double>& levels) {
  auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
    std::vector<double> xs;
    for (double x : v) {
      if (!std::isnan(x)) xs.push_back(x);
    }
    if (xs.empty()) {
      mean = sd = kNaN;
      return;
    }
    double s = 0.0;
    for (double x : xs) s += x;
    mean = s / static_cast<double>(xs.size());
    if (xs.size() < 2) {
      sd = kNaN;
      return;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  };
  std::vector<SummaryRow> out;
  for (Variant v : variants) {
    for (double p : levels) {
      std::vector<double> mse, p1, pi, xm, hm;
      for (const auto& r : rows) {
        if (r.variant != v || r.p != p) continue;
        mse.push_back(r.mse);
        p1.push_back(r.ppl1);
        pi.push_back(r.ppl_inf);
        xm.push_back(r.x_mse);
        hm.push_back(r.h3_mse);
      }
      SummaryRow s{v, p, mse.size(), 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
      mean_sd(mse, s.mse_mean, s.mse_sd);
      mean_sd(p1, s.ppl1_mean, s.ppl1_sd);
      mean_sd(pi, s.ppl_inf_mean, s.ppl_inf_sd);
      mean_sd(xm, s.x_mse_mean, s.x_mse_sd);
      mean_sd(hm, s.h3_mse_mean, s.h3_mse_sd);
      out.push_back(s);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

std::string format_runs_csv(const std::vector<RunResult>& runs) {
  std::ostringstream os;
  os << "variant,p,rep,data_seed,chain_seed,chain_stream,mse,ppl1,ppl_inf,x_mse,h3_mse,"
        "acc_g,acc_lambda,acc_x,min_ess,max_rhat,clamp_events,draws\n";
  for (const auto& run : runs) {
    const RunRow& r = run.row;
    os << to_string(r.variant) << ',' << fmt_level(r.p) << ',' << r.rep << ',' << r.data_seed << ','
       << r.chain_seed << ',' << r.chain_stream << ',' << fmt(r.mse) << ',' << fmt(r.ppl1) << ','
       << fmt(r.ppl_inf) << ',' << fmt(r.x_mse) << ',' << fmt(r.h3_mse) << ',' << fmt(r.acc_g)
       << ',' << fmt(r.acc_lambda) << ',' << fmt(r.acc_x) << ',' << fmt(r.min_ess) << ','
       << fmt(r.max_rhat) << ',' << r.clamp_events << ',' << r.draws << '\n';
  }
  return os.str();
}

std::string format_summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "variant,p,reps,mse_mean,mse_sd,ppl1_mean,ppl1_sd,ppl_inf_mean,ppl_inf_sd,x_mse_mean,"
        "x_mse_sd,h3_mse_mean,h3_mse_sd\n";
  for (const auto& s : rows) {
    os << to_string(s.variant) << ',' << fmt_level(s.p) << ',' << s.reps << ',' << fmt(s.mse_mean)
       << ',' << fmt(s.mse_sd) << ',' << fmt(s.ppl1_mean) << ',' << fmt(s.ppl1_sd) << ','
       << fmt(s.ppl_inf_mean) << ',' << fmt(s.ppl_inf_sd) << ',' << fmt(s.x_mse_mean) << ','
       << fmt(s.x_mse_sd) << ',' << fmt(s.h3_mse_mean) << ',' << fmt(s.h3_mse_sd) << '\n';
  }
  return os.str();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

std::string run_tag(const RunRow& r) {
  return to_string(r.variant) + "_p" + fmt_level(r.p) + "_rep" + std::to_string(r.rep);
}

}  // namespace

void write_outputs(const RunConfig& c, const ReplicateReport& report) {
  if (c.out.empty()) throw Error("no output directory");
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir / "curves", ec);
  if (ec) throw Error("cannot create " + (dir / "curves").string() + ": " + ec.message());

  write_text(dir / "runs.csv", format_runs_csv(report.runs));
  write_text(dir / "summary.csv", format_summary_csv(report.summary));

  std::ostringstream diag_os, time_os;
  diag_os << "variant,p,rep,parameter,ess,rhat,degenerate\n";
  time_os << "variant,p,rep,seconds\n";
  for (const auto& run : report.runs) {
    const RunRow& r = run.row;
    for (const auto& t : run.traces) {
      diag_os << to_string(r.variant) << ',' << fmt_level(r.p) << ',' << r.rep << ',' << t.name
              << ',' << fmt(t.ess) << ',' << fmt(t.rhat) << ',' << (t.degenerate ? 1 : 0) << '\n';
    }
    time_os << to_string(r.variant) << ',' << fmt_level(r.p) << ',' << r.rep << ','
            << fmt(run.seconds) << '\n';

    std::ostringstream cv;
    cv << "x,mean,lo95,hi95" << (run.band.truth.size() ? ",truth" : "") << '\n';
    for (Eigen::Index j = 0; j < run.band.grid.size(); ++j) {
      cv << fmt(run.band.grid[j]) << ',' << fmt(run.band.mean[j]) << ',' << fmt(run.band.lo[j])
         << ',' << fmt(run.band.hi[j]);
      if (run.band.truth.size()) cv << ',' << fmt(run.band.truth[j]);
      cv << '\n';
    }
    write_text(dir / "curves" / (run_tag(r) + ".csv"), cv.str());

    if (!c.regime && run.x_mean.size()) {
      std::ostringstream xs;
      xs << "row,x_mean\n";
      for (Eigen::Index i = 0; i < run.x_mean.size(); ++i) xs << i << ',' << fmt(run.x_mean[i]) << '\n';
      write_text(dir / "curves" / (run_tag(r) + "_x.csv"), xs.str());
    }
  }
  write_text(dir / "diagnostics.csv", diag_os.str());
  write_text(dir / "timing.csv", time_os.str());

  json manifest;
  manifest["config"] = c;
  manifest["simd"] = std::string(simd::level_name(simd::active_level()));
  json runs = json::array();
  for (const auto& run : report.runs) {
    runs.push_back({{"variant", to_string(run.row.variant)},
                    {"p", run.row.p},
                    {"rep", run.row.rep},
                    {"data_seed", run.row.data_seed},
                    {"chain_seed", run.row.chain_seed},
                    {"chain_stream", run.row.chain_stream},
                    {"clamp_events", run.row.clamp_events}});
  }
  manifest["runs"] = runs;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// CSV input

CsvData load_csv(const RunConfig& c) {
  std::ifstream f(c.input);
  if (!f) throw Error("cannot open " + c.input);
  using Tok = boost::tokenizer<boost::escaped_list_separator<char>>;
  std::string line;
  if (!std::getline(f, line)) throw Error("empty file: " + c.input);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  for (const auto& t : Tok(line)) header.push_back(t);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("column not found: " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> cols{column(c.y_column)};
  for (const auto& p : c.proxies) cols.push_back(column(p.column));

  std::vector<std::vector<double>> values(cols.size());
  std::size_t row = 0;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::vector<std::string> cells;
    for (const auto& t : Tok(line)) cells.push_back(t);
    if (cells.size() != header.size()) {
      throw Error("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                  " fields, header has " + std::to_string(header.size()));
    }
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::string& s = cells[cols[k]];
      std::size_t used = 0;
      double v = kNaN;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != s.size() || !std::isfinite(v)) {
        throw Error("non-numeric value '" + s + "' in column " + header[cols[k]] + " row " +
                    std::to_string(row));
      }
      values[k].push_back(v);
    }
  }
  if (row == 0) throw Error("no data rows in " + c.input);
  if (c.log_y) {
    for (double& y : values[0]) {
      if (!(y > 0.0)) throw Error("log transform needs positive y");
      y = std::log(y);
    }
  }
  std::vector<char> keep(row, 1);
  if (c.trim > 0.0) {
    for (const auto& col : values) {
      const double lo = detail::empirical_quantile(col, c.trim);
      const double hi = detail::empirical_quantile(col, 1.0 - c.trim);
      for (std::size_t i = 0; i < row; ++i) {
        if (col[i] < lo || col[i] > hi) keep[i] = 0;
      }
    }
  }
  CsvData out;
  out.rows_read = row;
  out.rows_kept = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1));
  if (out.rows_kept == 0) throw Error("trimming removed every row");
  auto gather = [&](const std::vector<double>& col) {
    Vec v(static_cast<Eigen::Index>(out.rows_kept));
    Eigen::Index j = 0;
    for (std::size_t i = 0; i < row; ++i) {
      if (keep[i]) v[j++] = col[i];
    }
    return v;
  };
  out.data.y = gather(values[0]);
  for (std::size_t k = 1; k < values.size(); ++k) out.data.w.push_back(gather(values[k]));
  for (const auto& p : c.proxies) out.proxies.push_back(p.spec);
  return out;
}

ReplicateReport fit_csv(const RunConfig& c) {
  c.validate();
  const CsvData csv = load_csv(c);
  std::vector<Task> tasks;
  for (Variant v : c.variants) {
    for (double p : c.levels) tasks.push_back({0, v, p});
  }
  ReplicateReport report;
  report.runs = run_pool(tasks, c.workers, [&](const Task& t) {
    const auto t0 = std::chrono::steady_clock::now();
    ObservedData od = csv.data;
    std::vector<ProxySpec> ps = csv.proxies;
    SamplerConfig sc = c.sampler();
    const bool naive = t.variant == Variant::Naive;
    if (naive) {
      od.w.resize(1);
      ps.resize(1);
      sc.fixed_x = od.w[0];
    }
    const ModelSpec spec = validate_model(std::move(od), std::move(ps), t.p, c.priors);
    RunResult r;
    r.row.variant = t.variant;
    r.row.p = t.p;
    r.row.data_seed = c.seed;
    r.row.chain_seed = c.seed;
    r.row.chain_stream = chain_stream(t.p);
    const PosteriorSamples post = run_chain(c, spec, sc, c.seed, r.row.chain_stream);
    r.row.mse = r.row.ppl1 = r.row.ppl_inf = r.row.x_mse = r.row.h3_mse = kNaN;
    fill_chain_fields(r, post, !naive);
    r.band = make_band(post, c.curve_points);
    if (!naive) r.x_mean = post.x_mean;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  });
  std::vector<RunRow> rows;
  for (const auto& r : report.runs) rows.push_back(r.row);
  report.summary = summarize(rows, c.variants, c.levels);
  return report;
}

}  // namespace qrproxy::harness
