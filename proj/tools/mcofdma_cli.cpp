#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcofdma/mcofdma.hpp"

using namespace mcofdma;

namespace {

struct SweepArgs {
  std::string scenario = "A";
  std::size_t L = 2, K = 2, N = 6;
  std::vector<double> distances{0.5};
  std::vector<std::string> schemes{"UB", "centA-high-sinr", "centB", "distributed", "LB"};
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  double sigma2 = 0.0;
  std::string noise = "calibrated";
  std::string out;
  std::string format = "csv";
  std::size_t workers = 0;
};

void add_common(CLI::App* cmd, SweepArgs& a) {
  cmd->add_option("--trials", a.trials, "Monte-Carlo trials per configuration")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "base seed");
  cmd->add_option("--schemes", a.schemes, "schemes to evaluate")->delimiter(',');
  cmd->add_option("--sigma2", a.sigma2, "noise power per subcarrier in W (overrides --noise)");
  cmd->add_option("--noise", a.noise, "noise model")->check(CLI::IsMember({"calibrated", "bandwidth"}));
  cmd->add_option("--out", a.out, "output file (default stdout)");
  cmd->add_option("--format", a.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--workers", a.workers, "worker threads (default MCOFDMA_WORKERS or all cores)");
}

ExperimentSpec make_spec(const SweepArgs& a, double d) {
  ExperimentSpec s;
  s.scenario = a.scenario == "B" ? ScenarioKind::kB : ScenarioKind::kA;
  s.distance_km = d;
  s.L = a.L;
  s.K = a.K;
  s.N = a.N;
  s.trials = a.trials;
  s.seed = a.seed;
  if (a.sigma2 > 0.0) s.sigma2_override = a.sigma2;
  s.noise_mode = a.noise == "bandwidth" ? NoiseMode::kBandwidth : NoiseMode::kCalibrated;
  s.workers = a.workers;
  for (const auto& name : a.schemes) s.schemes.push_back(parse_scheme(name));
  return s;
}

/// Runs each spec and writes one CSV (shared header) or one JSON array.
void run_and_write(const std::vector<ExperimentSpec>& specs, const SweepArgs& a) {
  std::ofstream file;
  if (!a.out.empty()) file = open_output(a.out);
  std::ostream& os = a.out.empty() ? std::cout : file;
  nlohmann::json all = nlohmann::json::array();
  if (a.format == "csv") os << kCsvHeader << '\n';
  for (const auto& spec : specs) {
    const auto table = run_experiment(spec);
    for (const auto& row : table.rows) {
      for (const auto& f : row.failures) std::cerr << row.scheme << ": " << f << '\n';
    }
    if (a.format == "csv") {
      write_csv_rows(os, table);
      os.flush();
    } else {
      all.push_back(to_json(table));
    }
  }
  if (a.format == "json") os << all.dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-cell OFDMA uplink subcarrier and power allocation simulator"};
  app.require_subcommand(1);

  std::string example_name;
  auto* example = app.add_subcommand("example", "run a worked example and check its reference values");
  example->add_option("name", example_name, "sec3d or sec4c")->required();

  SweepArgs table1_args;
  table1_args.trials = 100;
  auto* table1 = app.add_subcommand("table1", "L=2, N=6, K in {2,4,6}, scenario A at d = 0.5 and 0.9 km");
  add_common(table1, table1_args);

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep over user distance");
  add_common(sweep, sweep_args);
  sweep->add_option("--scenario", sweep_args.scenario, "A (users on a circle) or B (uniform)")
      ->check(CLI::IsMember({"A", "B"}));
  sweep->add_option("--l", sweep_args.L, "cells")->check(CLI::Range(1, 7));
  sweep->add_option("--k", sweep_args.K, "users per cell")->check(CLI::PositiveNumber);
  sweep->add_option("--n", sweep_args.N, "subcarriers")->check(CLI::PositiveNumber);
  sweep->add_option("--d", sweep_args.distances, "user distances in km (scenario A)")->delimiter(',');

  auto* channels = app.add_subcommand("channels", "generate or inspect channel files");
  channels->require_subcommand(1);
  SweepArgs gen_args;
  std::size_t gen_trial = 0;
  auto* gen = channels->add_subcommand("gen", "write one trial's channel set as JSON");
  gen->add_option("--scenario", gen_args.scenario)->check(CLI::IsMember({"A", "B"}));
  gen->add_option("--l", gen_args.L)->check(CLI::Range(1, 7));
  gen->add_option("--k", gen_args.K)->check(CLI::PositiveNumber);
  gen->add_option("--n", gen_args.N)->check(CLI::PositiveNumber);
  gen->add_option("--d", gen_args.distances)->delimiter(',');
  gen->add_option("--seed", gen_args.seed);
  gen->add_option("--trial", gen_trial, "trial index within the seed's sequence");
  gen->add_option("--out", gen_args.out)->required();
  std::string dump_path;
  auto* dump = channels->add_subcommand("dump", "print a channel file");
  dump->add_option("file", dump_path)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*example) {
      const auto report = run_worked_example(example_name);
      std::cout << report.summary();
      return report.pass() ? 0 : 1;
    }
    if (*table1) {
      std::vector<ExperimentSpec> specs;
      for (double d : {0.5, 0.9}) {
        for (std::size_t K : {2, 4, 6}) {
          SweepArgs a = table1_args;
          a.L = 2;
          a.N = 6;
          a.K = K;
          specs.push_back(make_spec(a, d));
        }
      }
      run_and_write(specs, table1_args);
      return 0;
    }
    if (*sweep) {
      std::vector<ExperimentSpec> specs;
      if (sweep_args.scenario == "B") {
        specs.push_back(make_spec(sweep_args, 0.5));
      } else {
        for (double d : sweep_args.distances) specs.push_back(make_spec(sweep_args, d));
      }
      run_and_write(specs, sweep_args);
      return 0;
    }
    if (*gen) {
      ExperimentSpec s = make_spec(gen_args, gen_args.distances.front());
      s.schemes.clear();
      s.check();
      const auto inst = make_trial(s, gen_trial);
      auto meta = config_echo(s);
      meta["trial"] = gen_trial;
      write_json_file(gen_args.out, mcofdma::to_json(inst.channels, meta));
      return 0;
    }
    if (*dump) {
      const Json j = read_json_file(dump_path);
      const ChannelSet ch = channels_from_json(j);
      if (j.contains("metadata")) std::cout << "metadata: " << j["metadata"].dump() << '\n';
      const std::size_t L = ch.num_cells(), K = ch.users_per_cell(), N = ch.subcarriers();
      std::printf("L=%zu K=%zu N=%zu\n", L, K, N);
      for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t k = 0; k < K; ++k) {
          std::printf("cell %zu user %zu direct:", l, k);
          for (std::size_t n = 0; n < N; ++n) std::printf(" %.4e", ch.h(n, k, l));
          std::printf("\n");
        }
      }
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
