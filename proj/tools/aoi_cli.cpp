#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aoi/aoi.hpp"
#include "table.hpp"

namespace {

using namespace aoi;
using aoi::cli::Cell;
using aoi::cli::Format;
using aoi::cli::Table;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitResource = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string out;
  std::optional<std::string> format;
  std::uint64_t seed = 42;
  unsigned threads = 0;
};

struct SystemParams {
  std::optional<double> p, T, mu, mu_a, mu_b, lambda, Tm;
  std::int64_t offset = 1;
};

Format resolve_format(const Globals& g, Format fallback) {
  if (!g.format) return fallback;
  if (*g.format == "json") return Format::json;
  if (*g.format == "csv") return Format::csv;
  return Format::human;
}

unsigned resolve_threads(const Globals& g) {
  if (g.threads > 0) return g.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw UsageError("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

double need(const std::optional<double>& v, const char* flag, const std::string& system) {
  if (!v) throw UsageError(std::string("--") + flag + " is required for system " + system);
  return *v;
}

std::int64_t integral(double x, const char* what) {
  const double r = std::round(x);
  if (std::abs(x - r) > 1e-9 * std::max(1.0, std::abs(x)) || r < 1)
    throw UsageError(std::string(what) + " must be a positive integer, got " +
                     aoi::cli::format_double(x, 17));
  return static_cast<std::int64_t>(r);
}

/// Period length from --T, or from --mu as 1/mu.
double period_from(const SystemParams& sp, const std::string& system) {
  if (sp.T) return *sp.T;
  if (sp.mu) return 1.0 / *sp.mu;
  throw UsageError("--T or --mu is required for system " + system);
}

double rate_from(const std::optional<double>& primary, const SystemParams& sp, const char* flag,
                 const std::string& system) {
  if (primary) return *primary;
  if (sp.mu) return *sp.mu;
  throw UsageError(std::string("--") + flag + " or --mu is required for system " + system);
}

PaoiForm parse_form(const std::string& s) {
  return s == "exact" ? PaoiForm::exact : PaoiForm::published;
}

const char* form_label(PaoiForm f) { return f == PaoiForm::exact ? "exact" : "published"; }

std::vector<double> grid(double from, double to, double step) {
  if (!(step > 0.0) || to < from) throw UsageError("empty grid");
  const auto n = static_cast<std::int64_t>(std::floor((to - from) / step + 1e-9)) + 1;
  std::vector<double> xs;
  for (std::int64_t i = 0; i < n; ++i) xs.push_back(from + static_cast<double>(i) * step);
  return xs;
}

void add_system_options(CLI::App* app, SystemParams& sp) {
  app->add_option("--p", sp.p, "per-slot success probability of the geometric queue");
  app->add_option("--T", sp.T, "period of the deterministic queue, slots");
  app->add_option("--mu", sp.mu, "service rate per slot (both queues for dual systems)");
  app->add_option("--mu-a", sp.mu_a, "service rate of queue A");
  app->add_option("--mu-b", sp.mu_b, "service rate of queue B");
  app->add_option("--lambda", sp.lambda, "exponential rate per second (m-d)");
  app->add_option("--Tm", sp.Tm, "deterministic period in seconds (m-d)");
}

//---------------------------------------------------------------------------//
// eval
//---------------------------------------------------------------------------//

struct EvalLine {
  std::string quantity;
  std::string formula;
  double value;
};

std::vector<EvalLine> evaluate(const std::string& system, const SystemParams& sp,
                               const std::string& metric, PaoiForm form) {
  const bool want_aoi = metric == "aoi" || metric == "both";
  const bool want_paoi = metric == "paoi" || metric == "both";
  // "both" quietly drops PAoI where no closed form exists; "paoi" is an error there.
  const bool paoi_required = metric == "paoi";
  std::vector<EvalLine> lines;

  if (metric == "reduction") {
    if (system != "geo-d") throw UsageError("--metric reduction applies to --system geo-d");
    const double mu = need(sp.mu, "mu", system);
    lines.push_back({"aoi_reduction_vs_zw_geo", "geo-d/aoi-reduction-vs-zw-geo",
                     reduction_ratio(AgeMetric::aoi, Baseline::zw_geo, mu)});
    lines.push_back({"aoi_reduction_vs_zw_d", "geo-d/aoi-reduction-vs-zw-d",
                     reduction_ratio(AgeMetric::aoi, Baseline::zw_d, mu)});
    lines.push_back({"paoi_reduction", std::string("geo-d/paoi-reduction-") + form_label(form),
                     reduction_ratio(AgeMetric::paoi, Baseline::zw_geo, mu, form)});
    return lines;
  }

  if (system == "geo-d") {
    const double p = rate_from(sp.p, sp, "p", system);
    const double T = period_from(sp, system);
    if (want_aoi) lines.push_back({"aoi", "geo-d/aoi", avg_aoi_geo_d(p, T)});
    if (want_paoi)
      lines.push_back({"paoi", std::string("geo-d/paoi-") + form_label(form),
                       avg_paoi_geo_d(p, T, form)});
  } else if (system == "zw-geo") {
    const double p = rate_from(sp.p, sp, "p", system);
    const auto m = single_queue_metrics(ServiceModel::geometric(p));
    if (want_aoi) lines.push_back({"aoi", "zw-geo/aoi", m.aoi});
    if (want_paoi) lines.push_back({"paoi", "zw-geo/paoi", m.paoi});
  } else if (system == "zw-d") {
    const auto T = integral(period_from(sp, system), "T");
    const auto m = single_queue_metrics(ServiceModel::deterministic(T));
    if (want_aoi) lines.push_back({"aoi", "zw-d/aoi", m.aoi});
    if (want_paoi) lines.push_back({"paoi", "zw-d/paoi", m.paoi});
  } else if (system == "geo-geo") {
    const double a = rate_from(sp.mu_a, sp, "mu-a", system);
    const double b = rate_from(sp.mu_b, sp, "mu-b", system);
    if (paoi_required) throw UsageError("no closed-form PAoI for geo-geo; use simulate");
    lines.push_back({"aoi", "geo-geo/aoi", avg_aoi_geo_geo(a, b)});
    lines.push_back({"aosi", "geo-geo/aosi", avg_aosi_geo_geo(a, b)});
  } else if (system == "d-d") {
    const double mu = need(sp.mu, "mu", system);
    if (paoi_required) throw UsageError("no closed-form PAoI for d-d; use simulate");
    lines.push_back({"aoi", "d-d/aoi-offset-1", avg_aoi_d_d(mu)});
  } else if (system == "m-d") {
    const auto r = continuous_reference(
        ContinuousParams::make(need(sp.lambda, "lambda", system), need(sp.Tm, "Tm", system)));
    if (want_aoi) lines.push_back({"aoi", "m-d/aoi", r.aoi});
    if (want_paoi) lines.push_back({"paoi", "m-d/paoi", *r.paoi});
  } else if (system == "m-m") {
    const double a = rate_from(sp.mu_a, sp, "mu-a", system);
    const double b = rate_from(sp.mu_b, sp, "mu-b", system);
    if (paoi_required) throw UsageError("no closed-form PAoI for m-m");
    lines.push_back({"aoi", "m-m/aoi", continuous_reference(a, b).aoi});
  }
  return lines;
}

json params_json(const std::string& system, const SystemParams& sp) {
  json j = json::object();
  const bool geo = system == "geo-d" || system == "zw-geo";
  const bool periodic = system == "geo-d" || system == "zw-d" || system == "d-d";
  const bool pair = system == "geo-geo" || system == "m-m";
  auto put = [&](const char* k, const std::optional<double>& v, bool relevant) {
    if (v && relevant) j[k] = *v;
  };
  put("p", sp.p, geo);
  put("T", sp.T, periodic);
  put("mu", sp.mu, system != "m-d");
  put("mu_a", sp.mu_a, pair);
  put("mu_b", sp.mu_b, pair);
  put("lambda", sp.lambda, system == "m-d");
  put("T_M", sp.Tm, system == "m-d");
  if (system == "d-d") j["offset"] = sp.offset;
  return j;
}

int cmd_eval(const Globals& g, const std::string& system, const SystemParams& sp,
             const std::string& metric, PaoiForm form) {
  const auto lines = evaluate(system, sp, metric, form);
  Output out(g.out);
  auto& os = out.stream();
  switch (resolve_format(g, Format::human)) {
    case Format::json: {
      json j;
      j["system"] = system;
      j["params"] = params_json(system, sp);
      j["results"] = json::array();
      for (const auto& l : lines)
        j["results"].push_back({{"quantity", l.quantity}, {"formula", l.formula}, {"value", l.value}});
      os << j.dump(2) << '\n';
      break;
    }
    case Format::csv: {
      Table t{{"system", "quantity", "formula", "value"}, {}};
      for (const auto& l : lines) t.add({system, l.quantity, l.formula, l.value});
      write_table(os, t, Format::csv);
      break;
    }
    case Format::human:
      for (const auto& l : lines)
        os << l.quantity << " = " << aoi::cli::format_double(l.value, 12) << "  [" << l.formula
           << "]\n";
      break;
  }
  return kExitOk;
}

//---------------------------------------------------------------------------//
// simulate
//---------------------------------------------------------------------------//

SystemSpec build_spec(const std::string& system, const SystemParams& sp) {
  if (system == "geo-d") {
    const double p = rate_from(sp.p, sp, "p", system);
    const auto T = integral(period_from(sp, system), "T");
    return DualQueueSpec{ServiceModel::geometric(p), ServiceModel::deterministic(T), sp.offset};
  }
  if (system == "geo-geo") {
    return DualQueueSpec{ServiceModel::geometric(rate_from(sp.mu_a, sp, "mu-a", system)),
                         ServiceModel::geometric(rate_from(sp.mu_b, sp, "mu-b", system)),
                         sp.offset};
  }
  if (system == "d-d") {
    const auto T = integral(period_from(sp, system), "T");
    return DualQueueSpec{ServiceModel::deterministic(T), ServiceModel::deterministic(T),
                         sp.offset};
  }
  if (system == "zw-geo")
    return SingleQueueSpec{ServiceModel::geometric(rate_from(sp.p, sp, "p", system))};
  if (system == "zw-d")
    return SingleQueueSpec{
        ServiceModel::deterministic(integral(period_from(sp, system), "T"))};
  throw UsageError("system " + system + " cannot be simulated");
}

json metrics_json(const std::string& system, const SystemParams& sp, const SimConfig& config,
                  const AoiMetrics& m, const std::vector<RoundResult>& rounds) {
  auto opt = [](const std::optional<double>& v) -> json {
    if (v) return *v;
    return nullptr;
  };
  auto num = [](double v) -> json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  json j;
  j["system"] = system;
  j["params"] = params_json(system, sp);
  j["config"] = {{"periods_per_round", config.periods_per_round},
                 {"warmup_periods", config.warmup_periods},
                 {"master_seed", config.master_seed},
                 {"seed_mode", config.seed_mode == SeedMode::fixed ? "fixed" : "per_round"}};
  j["rounds"] = config.rounds;
  j["avg_aoi"] = num(m.avg_aoi);
  j["stderr_aoi"] = opt(m.stderr_aoi);
  j["avg_paoi"] = num(m.avg_paoi);
  j["stderr_paoi"] = opt(m.stderr_paoi);
  j["valid_per_period"] = num(m.valid_updates_per_period);
  j["stderr_valid"] = opt(m.stderr_valid);
  j["obsolete_ratio"] = num(m.obsolete_ratio);
  if (!m.state_frequency.empty()) {
    json sf = json::object();
    for (const auto& [key, f] : m.state_frequency)
      sf[std::to_string(key.k) + "," + std::to_string(key.n)] = f;
    j["state_freq"] = sf;
  }
  if (!rounds.empty() && rounds.front().offset_degenerate) j["offset_degenerate"] = true;
  return j;
}

int cmd_simulate(const Globals& g, const std::string& system, const SystemParams& sp,
                 SimConfig config, bool fixed_seed, const std::string& trace_path) {
  config.master_seed = g.seed;
  config.seed_mode = fixed_seed ? SeedMode::fixed : SeedMode::per_round;
  const SystemSpec spec = build_spec(system, sp);
  AoiTrace trace;
  const auto rounds =
      run(spec, config, resolve_threads(g), trace_path.empty() ? nullptr : &trace);
  const AoiMetrics m = aggregate(rounds);
  if (!trace_path.empty()) {
    std::ofstream tf(trace_path);
    if (!tf) throw UsageError("cannot open trace file " + trace_path);
    write_trace(tf, trace);
  }
  Output out(g.out);
  auto& os = out.stream();
  const json j = metrics_json(system, sp, config, m, rounds);
  switch (resolve_format(g, Format::json)) {
    case Format::json:
      os << j.dump(2) << '\n';
      break;
    case Format::csv: {
      Table t{{"system", "rounds", "avg_aoi", "stderr_aoi", "avg_paoi", "stderr_paoi",
               "valid_per_period", "obsolete_ratio"},
              {}};
      t.add({system, config.rounds, m.avg_aoi, aoi::cli::opt_cell(m.stderr_aoi), m.avg_paoi,
             aoi::cli::opt_cell(m.stderr_paoi), m.valid_updates_per_period, m.obsolete_ratio});
      write_table(os, t, Format::csv);
      break;
    }
    case Format::human: {
      auto pm = [](double v, const std::optional<double>& se) {
        std::string s = aoi::cli::format_double(v, 10);
        if (se) s += " +/- " + aoi::cli::format_double(*se, 4);
        return s;
      };
      os << "system            " << system << '\n'
         << "rounds            " << config.rounds << " x " << config.periods_per_round
         << " periods (warm-up " << config.warmup_periods << ")\n"
         << "avg AoI           " << pm(m.avg_aoi, m.stderr_aoi) << '\n'
         << "avg PAoI          " << pm(m.avg_paoi, m.stderr_paoi) << '\n'
         << "valid per period  " << pm(m.valid_updates_per_period, m.stderr_valid) << '\n'
         << "obsolete ratio    " << aoi::cli::format_double(m.obsolete_ratio, 10) << '\n';
      break;
    }
  }
  return kExitOk;
}

//---------------------------------------------------------------------------//
// sweep
//---------------------------------------------------------------------------//

struct SweepOptions {
  std::string kind = "rate";
  double from = 0.05, to = 0.95, step = 0.05;
  double ratio_from = 0.05, ratio_to = 1.0, ratio_step = 0.05;
  std::vector<double> mu_a{0.1, 0.5};
  bool simulate = false;
  SimConfig sim;
};

Table sweep_rate(const Globals& g, const SweepOptions& o, PaoiForm form) {
  Table t{{"system", "mu", "aoi", "paoi"}, {}};
  if (o.simulate)
    for (const char* c : {"sim_aoi", "sim_aoi_se", "sim_paoi", "sim_paoi_se", "obsolete_ratio"})
      t.columns.push_back(c);
  SimConfig config = o.sim;
  config.master_seed = g.seed;
  const auto mus = grid(o.from, o.to, o.step);
  for (const std::string system : {"geo-d", "zw-geo", "zw-d", "geo-geo", "d-d"}) {
    for (double mu : mus) {
      const double T = 1.0 / mu;
      std::vector<Cell> row{system, mu};
      if (system == "geo-d") {
        row.push_back(avg_aoi_geo_d(mu, T));
        row.push_back(avg_paoi_geo_d(mu, T, form));
      } else if (system == "zw-geo") {
        row.push_back(2.0 / mu);
        row.push_back(2.0 / mu);
      } else if (system == "zw-d") {
        row.push_back(1.5 / mu + 0.5);
        row.push_back(2.0 / mu);
      } else if (system == "geo-geo") {
        row.push_back(avg_aoi_geo_geo(mu, mu));
        row.push_back(std::monostate{});
      } else {
        row.push_back(avg_aoi_d_d(mu));
        row.push_back(std::monostate{});
      }
      if (o.simulate) {
        const bool needs_integer_T = system != "zw-geo" && system != "geo-geo";
        const bool integer_T = std::abs(T - std::round(T)) < 1e-9;
        if (needs_integer_T && !integer_T) {
          row.insert(row.end(), 5, std::monostate{});
        } else {
          SystemParams sp;
          sp.mu = mu;
          sp.p = mu;
          sp.T = std::round(T);
          sp.mu_a = mu;
          sp.mu_b = mu;
          const auto m = estimate_with_ci(build_spec(system, sp), config, resolve_threads(g));
          row.push_back(m.avg_aoi);
          row.push_back(aoi::cli::opt_cell(m.stderr_aoi));
          row.push_back(m.avg_paoi);
          row.push_back(aoi::cli::opt_cell(m.stderr_paoi));
          row.push_back(m.obsolete_ratio);
        }
      }
      t.add(std::move(row));
    }
  }
  return t;
}

Table sweep_ratio(const SweepOptions& o) {
  Table t{{"mu_a", "ratio", "mu_b", "geo_d_aoi", "geo_geo_aoi", "geo_d_normalized",
           "geo_geo_normalized", "geo_d_better"},
          {}};
  for (double mu_a : o.mu_a) {
    for (double ratio : grid(o.ratio_from, o.ratio_to, o.ratio_step)) {
      const double mu_b = ratio * mu_a;
      const double gd = avg_aoi_geo_d(mu_a, 1.0 / mu_b);
      const double gg = avg_aoi_geo_geo(mu_a, mu_b);
      const double norm = 2.0 / mu_a;
      t.add({mu_a, ratio, mu_b, gd, gg, gd / norm, gg / norm, gd < gg});
    }
  }
  return t;
}

Table sweep_paoi_ratio(const SweepOptions& o) {
  Table t{{"mu_a", "ratio", "mu_b", "zw_geo_paoi", "geo_d_paoi_published", "geo_d_paoi_exact",
           "reduction_published", "reduction_exact"},
          {}};
  for (double mu_a : o.mu_a) {
    for (double ratio : grid(o.ratio_from, o.ratio_to, o.ratio_step)) {
      const double mu_b = ratio * mu_a;
      const double single = 2.0 / mu_a;
      const double pub = avg_paoi_geo_d(mu_a, 1.0 / mu_b, PaoiForm::published);
      const double ex = avg_paoi_geo_d(mu_a, 1.0 / mu_b, PaoiForm::exact);
      t.add({mu_a, ratio, mu_b, single, pub, ex, (single - pub) / single, (single - ex) / single});
    }
  }
  return t;
}

int cmd_sweep(const Globals& g, const SweepOptions& o, PaoiForm form) {
  Table t;
  if (o.kind == "rate") t = sweep_rate(g, o, form);
  else if (o.kind == "ratio") t = sweep_ratio(o);
  else t = sweep_paoi_ratio(o);
  Output out(g.out);
  write_table(out.stream(), t, resolve_format(g, Format::csv));
  return kExitOk;
}

//---------------------------------------------------------------------------//
// converge
//---------------------------------------------------------------------------//

struct ConvergeOptions {
  std::string system = "geo-d";
  std::string metric = "aoi";
  double lambda = 1.0;
  double Tm = 1.0;
  std::vector<double> mu{1.0, 1.0};
  double r = 1.0;
  std::vector<std::int64_t> deltas{10, 100, 1000};
};

int cmd_converge(const Globals& g, const ConvergeOptions& o, PaoiForm form) {
  Table t;
  if (o.system == "geo-exp") {
    t.columns = {"delta", "p", "sup_cdf_distance"};
    for (std::size_t i = 1; i < o.deltas.size(); ++i)
      if (o.deltas[i] <= o.deltas[i - 1]) throw UsageError("--deltas must be ascending");
    for (auto d : o.deltas)
      t.add({d, o.r / static_cast<double>(d), geo_to_exp_distance(o.r, d)});
  } else {
    ConvergenceRequest req;
    req.paoi_form = form;
    if (o.system == "geo-d") {
      req.system = o.metric == "paoi" ? LimitSystem::geo_d_paoi : LimitSystem::geo_d_aoi;
      req.lambda = o.lambda;
      req.T_M = o.Tm;
    } else {
      if (o.metric == "paoi") throw UsageError("geo-geo convergence covers AoI only");
      if (o.mu.size() != 2) throw UsageError("--mu takes two rates: mu_a,mu_b");
      req.system = LimitSystem::geo_geo_aoi;
      req.lambda = o.mu[0];
      req.mu_b = o.mu[1];
    }
    t.columns = {"delta", "p", "T", "scaled_discrete", "continuous_ref", "abs_err", "rel_err"};
    for (const auto& r : convergence_table(req, o.deltas))
      t.add({r.delta, r.p, r.T, r.scaled_discrete, r.continuous_ref, r.abs_err, r.rel_err});
  }
  Output out(g.out);
  write_table(out.stream(), t, resolve_format(g, Format::csv));
  return kExitOk;
}

//---------------------------------------------------------------------------//
// verify
//---------------------------------------------------------------------------//

struct VerifyOptions {
  int max_T = 8;
  std::vector<double> p_grid{0.1, 0.3, 0.5, 0.7, 0.9};
  double tol = 1e-12;
  std::uint64_t cap = kDefaultEnumerationCap;
};

int verify_lemma(const Globals& g, const VerifyOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto r = verify_lemma_suite(o.max_T, o.cap);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Output out(g.out);
  auto& os = out.stream();
  const bool pass = r.failures == 0;
  if (resolve_format(g, Format::human) == Format::json) {
    json j{{"suite", "lemma"}, {"max_T", o.max_T}, {"checks", r.checks},
           {"failures", r.failures}, {"seconds", secs}, {"pass", pass}};
    j["failure_messages"] = r.failure_messages;
    os << j.dump(2) << '\n';
  } else {
    os << "nested-sum identities, 1 <= n <= T <= " << o.max_T << ": " << r.checks
       << " exact checks, " << r.failures << " failures (" << aoi::cli::format_double(secs, 3)
       << " s)\n";
    for (const auto& m : r.failure_messages) os << "  " << m << '\n';
    os << (pass ? "PASS" : "FAIL") << '\n';
  }
  return pass ? kExitOk : kExitVerifyFailed;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

int verify_theorem1(const Globals& g, const VerifyOptions& o, PaoiForm form) {
  Table t{{"p", "T", "aoi_enumerated", "aoi_closed", "aoi_rel_err", "paoi_enumerated",
           "paoi_closed", "paoi_rel_err", "valid_enumerated", "valid_closed", "valid_rel_err",
           "pass"},
          {}};
  bool all = true;
  for (double p : o.p_grid) {
    for (int T = 1; T <= o.max_T; ++T) {
      const auto params = GeoDParams::make(p, T);
      const auto rec = reconstruct_theorem1(params, ExpectationSource::oracle, o.cap);
      const double aoi = avg_aoi_geo_d(params);
      const double paoi = avg_paoi_geo_d(params, form);
      const double valid = form == PaoiForm::exact ? expected_valid_geo_d_exact(p, T)
                                                   : expected_valid_geo_d_published(p, T);
      const double ea = rel_err(rec.avg_aoi, aoi);
      const double ep = rel_err(rec.avg_paoi, paoi);
      const double ev = rel_err(rec.expected_valid, valid);
      const bool ok = ea <= o.tol && ep <= o.tol && ev <= o.tol;
      all = all && ok;
      t.add({p, static_cast<std::int64_t>(T), rec.avg_aoi, aoi, ea, rec.avg_paoi, paoi, ep,
             rec.expected_valid, valid, ev, ok});
    }
  }
  Output out(g.out);
  auto& os = out.stream();
  const Format f = resolve_format(g, Format::human);
  if (f == Format::human) {
    os << "state-sum reconstruction vs closed forms (PAoI and valid-count forms: "
       << form_label(form) << ", tolerance " << aoi::cli::format_double(o.tol, 3)
       << " relative)\n";
  }
  write_table(os, t, f);
  if (f == Format::human) os << (all ? "PASS" : "FAIL") << '\n';
  return all ? kExitOk : kExitVerifyFailed;
}

std::string flag(bool match) { return match ? "match" : "MISMATCH"; }

std::string rat(const Rational& r) { return r.str(); }

int verify_table(const Globals& g, const VerifyOptions& o) {
  const auto report = adjudicate_tables(o.max_T, o.cap);
  Output out(g.out);
  auto& os = out.stream();
  const Format f = resolve_format(g, Format::human);
  if (f == Format::json) {
    json j;
    j["max_T"] = report.max_T;
    j["families"] = json::array();
    for (const auto& v : report.verdicts)
      j["families"].push_back({{"family", family_name(v.family)},
                               {"states", v.states},
                               {"table_I", {{"e_a", v.table_all.a}, {"e_v", v.table_all.v},
                                            {"e_q", v.table_all.q}}},
                               {"proof_section", {{"e_a", v.proof_all.a},
                                                  {"e_v", v.proof_all.v},
                                                  {"e_q", v.proof_all.q}}}});
    j["records"] = json::array();
    for (const auto& r : report.records) {
      auto triple = [](const StateExpectations& e) {
        return json{{"e_a", e.e_a.str()}, {"e_v", e.e_v.str()}, {"e_q", e.e_q.str()}};
      };
      j["records"].push_back({{"T", r.T},
                              {"k", r.key.k},
                              {"n", r.key.n},
                              {"family", family_name(family_of(r.key))},
                              {"oracle", triple(r.oracle)},
                              {"table_I", triple(r.table_I)},
                              {"proof_section", triple(r.proof_section)}});
    }
    j["skipped"] = report.skipped;
    os << j.dump(2) << '\n';
    return kExitOk;
  }

  Table summary{{"family", "states", "table_I_E[A]", "table_I_E[V]", "table_I_E[Q]",
                 "proof_E[A]", "proof_E[V]", "proof_E[Q]"},
                {}};
  for (const auto& v : report.verdicts)
    summary.add({std::string(family_name(v.family)), static_cast<std::int64_t>(v.states),
                 flag(v.table_all.a), flag(v.table_all.v), flag(v.table_all.q),
                 flag(v.proof_all.a), flag(v.proof_all.v), flag(v.proof_all.q)});

  Table detail{{"T", "k", "n", "family", "column", "oracle", "table_I", "proof_section"}, {}};
  for (const auto& r : report.records) {
    auto add = [&](const char* col, const Rational& oracle, const Rational& tab,
                   const Rational& prf) {
      detail.add({static_cast<std::int64_t>(r.T), static_cast<std::int64_t>(r.key.k),
                  static_cast<std::int64_t>(r.key.n), std::string(family_name(family_of(r.key))),
                  std::string(col), rat(oracle), rat(tab) + (tab == oracle ? "" : " *"),
                  rat(prf) + (prf == oracle ? "" : " *")});
    };
    add("E[A]", r.oracle.e_a, r.table_I.e_a, r.proof_section.e_a);
    add("E[V]", r.oracle.e_v, r.table_I.e_v, r.proof_section.e_v);
    add("E[Q]", r.oracle.e_q, r.table_I.e_q, r.proof_section.e_q);
  }

  if (f == Format::csv) {
    write_table(os, summary, Format::csv);
    os << '\n';
    write_table(os, detail, Format::csv);
    return kExitOk;
  }
  os << "Per-state expectations: exact enumeration vs the summary table and the\n"
        "state-by-state derivation, every state (k, n) with 2 <= T <= "
     << report.max_T << ".\n"
        "E[Q] is the sum over the period's T slots of the AoI held during each slot.\n"
        "\"match\" means exact rational equality in every state of the family.\n\n";
  write_table(os, summary, Format::human);
  os << "\nPer-state values (exact rationals; * marks a value that differs from the\n"
        "enumeration):\n\n";
  write_table(os, detail, Format::human);
  for (const auto& s : report.skipped) os << "skipped: " << s << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age of Information of zero-wait dual-queue systems: closed forms, exact "
               "state enumeration, slot simulation and continuous limits."};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--out", g.out, "write output to this file instead of stdout");
  app.add_option("--format", g.format, "output format")
      ->check(CLI::IsMember({"json", "csv", "human"}));
  app.add_option("--seed", g.seed, "master seed for simulations")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");

  std::string paoi_form = "published";
  auto add_form = [&](CLI::App* sub) {
    sub->add_option("--paoi-form", paoi_form,
                    "Geo-D PAoI closed form: the published one or the exact re-derivation")
        ->check(CLI::IsMember({"published", "exact"}))
        ->capture_default_str();
  };

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate closed-form averages");
  std::string eval_system = "geo-d", eval_metric = "both";
  SystemParams eval_sp;
  eval->add_option("--system", eval_system)
      ->check(CLI::IsMember({"geo-d", "zw-geo", "zw-d", "geo-geo", "d-d", "m-d", "m-m"}))
      ->capture_default_str();
  eval->add_option("--metric", eval_metric)
      ->check(CLI::IsMember({"aoi", "paoi", "both", "reduction"}))
      ->capture_default_str();
  add_system_options(eval, eval_sp);
  add_form(eval);

  // simulate
  auto* sim = app.add_subcommand("simulate", "slot-level Monte Carlo estimate");
  std::string sim_system = "geo-d", trace_path;
  SystemParams sim_sp;
  SimConfig sim_config;
  bool fixed_seed = false;
  sim->add_option("--system", sim_system)
      ->check(CLI::IsMember({"geo-d", "geo-geo", "d-d", "zw-geo", "zw-d"}))
      ->capture_default_str();
  add_system_options(sim, sim_sp);
  sim->add_option("--offset", sim_sp.offset, "d-d: slots between the two queues' first services")
      ->capture_default_str();
  sim->add_option("--periods", sim_config.periods_per_round, "periods per round")
      ->capture_default_str();
  sim->add_option("--rounds", sim_config.rounds)->capture_default_str();
  sim->add_option("--warmup", sim_config.warmup_periods, "warm-up periods per round")
      ->capture_default_str();
  sim->add_flag("--fixed-seed", fixed_seed, "reuse round 0's seed in every round");
  sim->add_option("--trace", trace_path, "write round 0's per-slot trace (CSV)");

  // sweep
  auto* sweep = app.add_subcommand(
      "sweep",
      "parameter sweeps as tables.\n"
      "  rate:       system,mu,aoi,paoi[,sim_aoi,sim_aoi_se,sim_paoi,sim_paoi_se,obsolete_ratio]\n"
      "              for geo-d, zw-geo, zw-d, geo-geo, d-d with equal rates mu (T = 1/mu)\n"
      "  ratio:      mu_a,ratio,mu_b,geo_d_aoi,geo_geo_aoi,geo_d_normalized,geo_geo_normalized,\n"
      "              geo_d_better; normalized by 2/mu_a\n"
      "  paoi-ratio: mu_a,ratio,mu_b,zw_geo_paoi,geo_d_paoi_published,geo_d_paoi_exact,\n"
      "              reduction_published,reduction_exact; reduction relative to 2/mu_a");
  SweepOptions sweep_opt;
  sweep->add_option("--kind", sweep_opt.kind)
      ->check(CLI::IsMember({"rate", "ratio", "paoi-ratio"}))
      ->capture_default_str();
  sweep->add_option("--from", sweep_opt.from, "rate grid start")->capture_default_str();
  sweep->add_option("--to", sweep_opt.to, "rate grid end")->capture_default_str();
  sweep->add_option("--step", sweep_opt.step, "rate grid step")->capture_default_str();
  sweep->add_option("--ratio-from", sweep_opt.ratio_from)->capture_default_str();
  sweep->add_option("--ratio-to", sweep_opt.ratio_to)->capture_default_str();
  sweep->add_option("--ratio-step", sweep_opt.ratio_step)->capture_default_str();
  sweep->add_option("--mu-a", sweep_opt.mu_a, "queue-A rates for ratio sweeps")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_flag("--simulate", sweep_opt.simulate, "add simulated columns (rate sweep)");
  sweep->add_option("--periods", sweep_opt.sim.periods_per_round)->capture_default_str();
  sweep->add_option("--rounds", sweep_opt.sim.rounds)->capture_default_str();
  add_form(sweep);

  // converge
  auto* conv = app.add_subcommand(
      "converge", "discrete-to-continuous convergence; columns " +
                      std::string(convergence_csv_header()) +
                      " (geo-exp: delta,p,sup_cdf_distance)");
  ConvergeOptions conv_opt;
  conv->add_option("--system", conv_opt.system)
      ->check(CLI::IsMember({"geo-d", "geo-geo", "geo-exp"}))
      ->capture_default_str();
  conv->add_option("--metric", conv_opt.metric)
      ->check(CLI::IsMember({"aoi", "paoi"}))
      ->capture_default_str();
  conv->add_option("--lambda", conv_opt.lambda)->capture_default_str();
  conv->add_option("--Tm", conv_opt.Tm)->capture_default_str();
  conv->add_option("--mu", conv_opt.mu, "geo-geo rates mu_a,mu_b per second")->delimiter(',');
  conv->add_option("--r", conv_opt.r, "geo-exp rate per second")->capture_default_str();
  conv->add_option("--deltas", conv_opt.deltas, "slots per second, ascending")
      ->delimiter(',')
      ->capture_default_str();
  add_form(conv);

  // verify
  auto* verify = app.add_subcommand("verify", "exact verification suites");
  std::string suite;
  VerifyOptions vopt;
  std::optional<int> max_T;
  verify->add_option("suite", suite)->required()->check(
      CLI::IsMember({"lemma", "table", "theorem1"}));
  verify->add_option("--max-T", max_T, "largest period (lemma: 8, table and theorem1: 6)");
  verify->add_option("--p-grid", vopt.p_grid, "theorem1 p values")->delimiter(',');
  verify->add_option("--tol", vopt.tol, "theorem1 relative tolerance")->capture_default_str();
  verify->add_option("--cap", vopt.cap, "enumeration cap")->capture_default_str();
  add_form(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const PaoiForm form = parse_form(paoi_form);
    if (*eval) return cmd_eval(g, eval_system, eval_sp, eval_metric, form);
    if (*sim) {
      if (sim_system == "geo-d" && !sim_sp.mu) {
        if (!sim_sp.p) sim_sp.p = 0.2;
        if (!sim_sp.T) sim_sp.T = 5;
      }
      return cmd_simulate(g, sim_system, sim_sp, sim_config, fixed_seed, trace_path);
    }
    if (*sweep) return cmd_sweep(g, sweep_opt, form);
    if (*conv) return cmd_converge(g, conv_opt, form);
    if (*verify) {
      vopt.max_T = max_T.value_or(suite == "lemma" ? 8 : 6);
      if (vopt.max_T < 1) throw UsageError("--max-T must be >= 1");
      if (suite == "lemma") return verify_lemma(g, vopt);
      if (suite == "theorem1") return verify_theorem1(g, vopt, form);
      return verify_table(g, vopt);
    }
  } catch (const ResourceLimit& e) {
    std::cerr << "resource limit: " << e.what()
              << "\n  lower --max-T or raise --cap to enumerate larger states\n";
    return kExitResource;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
