#pragma once

// Seeded Monte-Carlo runner. Trial i draws one channel set from
// derive_seed(seed, i) and evaluates every requested scheme on it, so all
// schemes are compared on common realizations. Trials are spread over a
// worker pool; results land in pre-sized per-trial slots, which keeps the
// output independent of the number of workers.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mcofdma/bounds.hpp"
#include "mcofdma/chanmodel.hpp"
#include "mcofdma/distopt.hpp"
#include "mcofdma/error.hpp"
#include "mcofdma/instances.hpp"
#include "mcofdma/model.hpp"
#include "mcofdma/optimal.hpp"
#include "mcofdma/random.hpp"
#include "mcofdma/schemes.hpp"

namespace mcofdma {

enum class SchemeId {
  kUB,
  kLB,
  kSimpleLB,
  kSingleCellIci,
  kCentA,
  kCentAHighSinr,
  kCentAGeneralSinr,
  kCentB,
  kCentBNoPower,
  kDistributed,
  kOptimal,
};

struct SchemeName {
  SchemeId id;
  const char* name;
};

inline constexpr SchemeName kSchemeNames[] = {
    {SchemeId::kUB, "UB"},
    {SchemeId::kLB, "LB"},
    {SchemeId::kSimpleLB, "simple-LB"},
    {SchemeId::kSingleCellIci, "sc-ici"},
    {SchemeId::kCentA, "centA"},
    {SchemeId::kCentAHighSinr, "centA-high-sinr"},
    {SchemeId::kCentAGeneralSinr, "centA-general-sinr"},
    {SchemeId::kCentB, "centB"},
    {SchemeId::kCentBNoPower, "centB-nopc"},
    {SchemeId::kDistributed, "distributed"},
    {SchemeId::kOptimal, "optimal"},
};

inline const char* to_string(SchemeId id) {
  for (const auto& s : kSchemeNames) {
    if (s.id == id) return s.name;
  }
  return "?";
}

inline SchemeId parse_scheme(const std::string& name) {
  for (const auto& s : kSchemeNames) {
    if (name == s.name) return s.id;
  }
  std::string known;
  for (const auto& s : kSchemeNames) known += std::string(known.empty() ? "" : ", ") + s.name;
  throw UsageError("unknown scheme '" + name + "' (known: " + known + ")");
}

/// calibrated: sigma^2 = noise PSD value taken as watts per subcarrier, the
/// scale at which the bounds land near the reference magnitudes.
/// bandwidth: sigma^2 = PSD x bandwidth / N.
enum class NoiseMode { kCalibrated, kBandwidth };

inline constexpr double kCalibratedNoise = 8.6455e-15;

struct ExperimentSpec {
  ScenarioKind scenario = ScenarioKind::kA;
  double distance_km = 0.5;  // scenario A only
  std::size_t L = 2, K = 2, N = 6;
  std::vector<SchemeId> schemes;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  std::optional<double> sigma2_override;
  NoiseMode noise_mode = NoiseMode::kCalibrated;
  double p_max = 1.0;
  GeometryConfig geometry;
  SearchBudget optimal_budget;
  DistOptions distributed;
  SchemeAOptions scheme_a;
  std::size_t workers = 0;  // 0: MCOFDMA_WORKERS or hardware concurrency

  double sigma2() const {
    if (sigma2_override) return *sigma2_override;
    return noise_mode == NoiseMode::kCalibrated ? kCalibratedNoise : noise_power(geometry, N);
  }

  NetworkConfig network() const {
    NetworkConfig cfg{L, K, N};
    cfg.p_max.assign(K, p_max);
    cfg.noise_power = sigma2();
    cfg.convergence_eps = scheme_a.epsilon;
    cfg.max_outer_iters = scheme_a.max_sweeps;
    cfg.rng_seed = seed;
    return cfg;
  }

  void check() const {
    if (trials < 1) throw UsageError("experiment: trials must be >= 1");
    if (L < 1 || K < 1 || N < 1) throw UsageError("experiment: L, K, N must be >= 1");
    if (sigma2_override && !(*sigma2_override > 0.0)) throw UsageError("experiment: sigma2 must be > 0");
    geometry.check();
    if (!(p_max > 0.0)) throw UsageError("experiment: p_max must be > 0");
    if (scenario == ScenarioKind::kA &&
        !(distance_km >= geometry.d_ref && distance_km <= geometry.cell_radius)) {
      throw UsageError("experiment: scenario A distance must lie in [d_ref, cell_radius]");
    }
    for (SchemeId s : schemes) {
      if (s == SchemeId::kOptimal) enumerate_allocations(network(), optimal_budget.max_combinations);
    }
  }
};

struct SchemeSummary {
  std::string scheme;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t trials = 0;    // trials that contributed
  std::size_t excluded = 0;  // trials where the scheme failed
  std::vector<double> values;  // per trial, NaN where excluded
  std::vector<std::string> failures;
};

struct ResultTable {
  std::vector<SchemeSummary> rows;
  nlohmann::json metadata;

  const SchemeSummary& at(const std::string& scheme) const {
    for (const auto& r : rows) {
      if (r.scheme == scheme) return r;
    }
    throw UsageError("result table has no scheme '" + scheme + "'");
  }
};

inline std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MCOFDMA_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw UsageError("MCOFDMA_WORKERS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on `workers` threads. The first
/// exception stops the pool and is rethrown.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count && !stop; i = next++) {
          try {
            body(i);
          } catch (...) {
            const std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            stop = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

struct TrialInstance {
  ChannelSet channels;
  NetworkConfig config;
};

inline TrialInstance make_trial(const ExperimentSpec& spec, std::size_t trial) {
  const std::uint64_t seed = derive_seed(spec.seed, trial);
  const auto bs = place_bs(spec.geometry, spec.L);
  const Scenario scenario{spec.scenario, spec.distance_km};
  const auto placement = place_users(spec.geometry, bs, scenario, spec.K, seed);
  return {generate_channels(spec.geometry, placement, spec.N, seed), spec.network()};
}

/// Throughput of one scheme on one instance; throws when the scheme fails.
inline double evaluate_scheme(SchemeId id, const ChannelSet& ch, const NetworkConfig& cfg, const ExperimentSpec& spec) {
  const auto require = [](GpStatus s, const char* what) {
    if (s != GpStatus::kOptimal) throw InternalError(std::string(what) + ": GP " + gp::to_string(s));
  };
  switch (id) {
    case SchemeId::kUB:
      return upper_bound(ch, cfg);
    case SchemeId::kLB: {
      const auto g = alg1_allocate(ch, cfg, BoundMode::kLB);
      return network_throughput(g.allocation, g.powers, ch, cfg);
    }
    case SchemeId::kSimpleLB:
      return lower_bound_simple(ch, cfg);
    case SchemeId::kSingleCellIci:
      return single_cell_under_ici(ch, cfg);
    case SchemeId::kCentA:
    case SchemeId::kCentAHighSinr:
    case SchemeId::kCentAGeneralSinr: {
      const PowerPhase phase = id == SchemeId::kCentA          ? PowerPhase::kNone
                               : id == SchemeId::kCentAHighSinr ? PowerPhase::kHighSinr
                                                                : PowerPhase::kGeneralSinr;
      const auto r = scheme_a(ch, cfg, phase, spec.scheme_a);
      if (r.power_status) require(*r.power_status, "scheme A power phase");
      return network_throughput(r.allocation, r.final_powers(), ch, cfg);
    }
    case SchemeId::kCentB: {
      const auto r = scheme_b(ch, cfg, spec.scheme_a.solver);
      require(r.status, "scheme B");
      return network_throughput(r.allocation, r.powers, ch, cfg);
    }
    case SchemeId::kCentBNoPower: {
      const auto g = initial_allocation(ch, cfg);
      return network_throughput(g.allocation, g.powers, ch, cfg);
    }
    case SchemeId::kDistributed: {
      const auto r = run_distributed(ch, cfg, spec.distributed);
      return network_throughput(r.allocation, r.powers, ch, cfg);
    }
    case SchemeId::kOptimal:
      return exhaustive_optimal(ch, cfg, spec.optimal_budget, spec.scheme_a.solver).throughput;
  }
  throw InternalError("unhandled scheme");
}

inline const char* to_string(ScenarioKind k) { return k == ScenarioKind::kA ? "A" : "B"; }
inline const char* to_string(NoiseMode m) { return m == NoiseMode::kCalibrated ? "calibrated" : "bandwidth"; }

inline nlohmann::json config_echo(const ExperimentSpec& spec) {
  nlohmann::json j;
  j["scenario"] = to_string(spec.scenario);
  j["distance_km"] = spec.scenario == ScenarioKind::kA ? nlohmann::json(spec.distance_km) : nlohmann::json(nullptr);
  j["L"] = spec.L;
  j["K"] = spec.K;
  j["N"] = spec.N;
  j["trials"] = spec.trials;
  j["seed"] = spec.seed;
  j["sigma2"] = spec.sigma2();
  j["noise_mode"] = spec.sigma2_override ? "override" : to_string(spec.noise_mode);
  j["p_max"] = spec.p_max;
  j["geometry"] = {{"cell_radius_km", spec.geometry.cell_radius},
                   {"d_ref_km", spec.geometry.d_ref},
                   {"pathloss_exp", spec.geometry.pathloss_exp},
                   {"shadow_sigma_db", spec.geometry.shadow_sigma_db},
                   {"bandwidth_hz", spec.geometry.bandwidth_hz},
                   {"noise_psd", spec.geometry.noise_psd},
                   {"layout", spec.geometry.layout == Layout::kHex ? "hex" : "linear"},
                   {"rayleigh_fading", spec.geometry.rayleigh_fading}};
  j["scheme_a"] = {{"epsilon", spec.scheme_a.epsilon}, {"max_sweeps", spec.scheme_a.max_sweeps}};
  j["distributed"] = {{"rounds_max", spec.distributed.rounds_max},
                      {"delta", spec.distributed.delta},
                      {"rho", spec.distributed.rho}};
  j["optimal"] = {{"max_combinations", spec.optimal_budget.max_combinations},
                  {"power_mode", spec.optimal_budget.power_mode == SearchPowerMode::kEqual ? "equal" : "high_sinr_gp"}};
  nlohmann::json names = nlohmann::json::array();
  for (SchemeId s : spec.schemes) names.push_back(to_string(s));
  j["schemes"] = names;
  return j;
}

/// Mean and standard error of the finite entries.
inline std::pair<double, double> mean_and_stderr(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  }
  if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double mean = sum / static_cast<double>(n);
  if (n == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) ss += (x - mean) * (x - mean);
  }
  return {mean, std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n))};
}

inline ResultTable run_experiment(const ExperimentSpec& spec) {
  spec.check();
  const std::size_t S = spec.schemes.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> values(S, std::vector<double>(spec.trials, nan));
  std::vector<std::vector<std::string>> errors(S, std::vector<std::string>(spec.trials));

  parallel_for(spec.trials, worker_count(spec.workers), [&](std::size_t t) {
    const TrialInstance inst = make_trial(spec, t);
    for (std::size_t s = 0; s < S; ++s) {
      try {
        values[s][t] = evaluate_scheme(spec.schemes[s], inst.channels, inst.config, spec);
      } catch (const UsageError&) {
        throw;
      } catch (const std::exception& e) {
        errors[s][t] = e.what();
      }
    }
  });

  ResultTable table;
  table.metadata = config_echo(spec);
  for (std::size_t s = 0; s < S; ++s) {
    SchemeSummary row;
    row.scheme = to_string(spec.schemes[s]);
    row.values = std::move(values[s]);
    for (std::size_t t = 0; t < spec.trials; ++t) {
      if (!errors[s][t].empty()) row.failures.push_back("trial " + std::to_string(t) + ": " + errors[s][t]);
    }
    row.excluded = row.failures.size();
    row.trials = spec.trials - row.excluded;
    std::tie(row.mean, row.stderr_) = mean_and_stderr(row.values);
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---- output ---------------------------------------------------------------

inline constexpr const char* kCsvHeader = "scenario,distance_km,L,K,N,scheme,mean,stderr,trials,excluded,seed,sigma2";

namespace detail {

/// Shortest text that reads back to the same double.
inline std::string csv_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_field(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return csv_number(v.get<double>());
  return v.dump();
}

}  // namespace detail

/// One line per scheme after the fixed header. Several tables (e.g. a
/// distance sweep) can share one file: write the header once.
inline void write_csv_rows(std::ostream& os, const ResultTable& table) {
  const auto& m = table.metadata;
  for (const auto& r : table.rows) {
    os << detail::csv_field(m.value("scenario", nlohmann::json())) << ','
       << detail::csv_field(m.value("distance_km", nlohmann::json())) << ','
       << detail::csv_field(m.value("L", nlohmann::json())) << ',' << detail::csv_field(m.value("K", nlohmann::json()))
       << ',' << detail::csv_field(m.value("N", nlohmann::json())) << ',' << r.scheme << ','
       << detail::csv_number(r.mean) << ',' << detail::csv_number(r.stderr_) << ',' << r.trials << ',' << r.excluded
       << ',' << detail::csv_field(m.value("seed", nlohmann::json())) << ','
       << detail::csv_field(m.value("sigma2", nlohmann::json())) << '\n';
  }
}

inline std::string to_csv(const ResultTable& table) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  write_csv_rows(os, table);
  return os.str();
}

inline nlohmann::json to_json(const ResultTable& table, bool per_trial = true) {
  nlohmann::json j;
  j["schema"] = "mcofdma.results/1";
  j["metadata"] = table.metadata;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json row = {{"scheme", r.scheme},         {"mean", r.mean},
                          {"stderr", r.stderr_},        {"trials", r.trials},
                          {"excluded", r.excluded},     {"failures", r.failures}};
    if (per_trial) {
      nlohmann::json vals = nlohmann::json::array();
      for (double v : r.values) vals.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
      row["values"] = vals;
    }
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j;
}

inline ResultTable result_table_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "mcofdma.results/1") throw ValidationError("not a mcofdma.results/1 document");
  ResultTable t;
  t.metadata = j.at("metadata");
  for (const auto& row : j.at("rows")) {
    SchemeSummary r;
    r.scheme = row.at("scheme").get<std::string>();
    const auto num = [](const nlohmann::json& v) {
      return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    r.mean = num(row.at("mean"));
    r.stderr_ = num(row.at("stderr"));
    r.trials = row.at("trials").get<std::size_t>();
    r.excluded = row.at("excluded").get<std::size_t>();
    r.failures = row.at("failures").get<std::vector<std::string>>();
    if (row.contains("values")) {
      for (const auto& v : row.at("values")) r.values.push_back(num(v));
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

enum class OutputFormat { kCsv, kJson };

inline void emit(const ResultTable& table, OutputFormat format, const std::string& path) {
  auto out = open_output(path);
  if (format == OutputFormat::kCsv) {
    out << to_csv(table);
  } else {
    out << to_json(table).dump(2) << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// ---- worked examples --------------------------------------------------------

struct ExampleCheck {
  std::string label;
  double expected = 0.0;
  double actual = 0.0;
  double tolerance = 0.0;  // absolute
  bool pass = false;
};

struct ExampleReport {
  std::string name;
  double sigma2 = 0.0;
  std::vector<ExampleCheck> checks;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const ExampleCheck& c) { return c.pass; });
  }

  std::string summary() const {
    std::ostringstream os;
    os.precision(6);
    os << name << " (sigma2 = " << sigma2 << ")\n";
    for (const auto& c : checks) {
      os << "  " << (c.pass ? "ok   " : "FAIL ") << c.label << ": got " << c.actual << ", want " << c.expected
         << " +/- " << c.tolerance << '\n';
    }
    return os.str();
  }
};

namespace detail {

inline ExampleCheck near_check(std::string label, double expected, double actual, double tol) {
  return {std::move(label), expected, actual, tol, std::abs(actual - expected) <= tol};
}

/// sigma^2 at which the equal-split throughput of `alloc` equals `target`,
/// by bisection in log sigma^2 (the throughput is decreasing in sigma^2).
inline double calibrate_noise(const Allocation& alloc, const ChannelSet& ch, NetworkConfig cfg, double target) {
  const auto rate = [&](double log_s) {
    cfg.noise_power = std::exp(log_s);
    return network_throughput(alloc, equal_split_powers(alloc, cfg), ch, cfg);
  };
  double lo = std::log(1e-30), hi = std::log(1e3);
  if (rate(lo) < target || rate(hi) > target) throw InternalError("noise calibration target out of range");
  for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) > target ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

inline ExampleReport example_sec3d() {
  const auto ex = instances::motivating_example();
  const auto& ch = ex.channels;
  const auto& cfg = ex.config;
  ExampleReport r{"sec3d", cfg.noise_power, {}};
  r.checks.push_back(near_check("upper bound", 1.7655, upper_bound(ch, cfg), 5e-4));
  r.checks.push_back(near_check("single cell under ICI", 1.1137, single_cell_under_ici(ch, cfg), 5e-4));
  const auto init = initial_allocation(ch, cfg);
  r.checks.push_back(
      near_check("scheme A initial", 1.5977, network_throughput(init.allocation, init.powers, ch, cfg), 5e-4));
  const auto opt = exhaustive_optimal(ch, cfg, {65536, SearchPowerMode::kEqual});
  r.checks.push_back(near_check("optimal at equal power", 1.5977, opt.throughput, 5e-4));
  return r;
}

inline ExampleReport example_sec4c() {
  auto ex = instances::power_control_example();
  const auto& ch = ex.channels;
  const auto alloc = instances::power_control_allocation();
  constexpr double kEqual = 11.8392, kControlled = 17.2734;
  ex.config.noise_power = calibrate_noise(alloc, ch, ex.config, kEqual);
  const auto& cfg = ex.config;
  ExampleReport r{"sec4c", cfg.noise_power, {}};
  const double equal = network_throughput(alloc, equal_split_powers(alloc, cfg), ch, cfg);
  r.checks.push_back(near_check("equal-power throughput", kEqual, equal, 1e-3));

  const auto pc = gp::high_sinr_power(alloc, ch, cfg);
  r.checks.push_back(near_check("GP status optimal", 1.0, pc.status == GpStatus::kOptimal ? 1.0 : 0.0, 0.0));
  // Reference matrices, rows = subcarrier, columns = user.
  struct Entry {
    std::size_t l, n, k;
    double value;
  };
  for (const Entry& e : {Entry{0, 0, 1, 0.53}, Entry{0, 1, 1, 0.47}, Entry{1, 0, 0, 0.38}, Entry{1, 1, 0, 0.62}}) {
    r.checks.push_back(near_check("P" + std::to_string(e.l + 1) + "(" + std::to_string(e.n + 1) + "," +
                                      std::to_string(e.k + 1) + ")",
                                  e.value, pc.powers(e.n, e.k, e.l), 0.02));
  }
  const double controlled = network_throughput(alloc, pc.powers, ch, cfg);
  r.checks.push_back({"throughput improves on equal power", equal, controlled, 0.0, controlled > equal});
  r.checks.push_back(near_check("power-controlled throughput", kControlled, controlled, 0.02 * kControlled));
  return r;
}

}  // namespace detail

inline ExampleReport run_worked_example(const std::string& name) {
  if (name == "sec3d") return detail::example_sec3d();
  if (name == "sec4c") return detail::example_sec4c();
  throw UsageError("unknown example '" + name + "' (known: sec3d, sec4c)");
}

}  // namespace mcofdma
