// Command-line front end: experiment sweeps, convergence traces, oracle checks.
#include "mmfnoma/experiment.hpp"
#include "mmfnoma/oracles.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

using namespace mmfnoma;
namespace fs = std::filesystem;

namespace {

int cmd_run(const fs::path& config, const fs::path& out, std::optional<std::uint64_t> seed,
            std::optional<int> trials, int threads, bool strict) {
  ExperimentSpec spec = load_spec(config);
  if (seed) spec.seed = *seed;
  if (trials) spec.trials = *trials;
  spec.validate();
  const ExperimentResult res = run_experiment(spec, threads);
  fs::create_directories(out);
  write_file(out / "results.csv", results_csv(res.rows));
  write_file(out / "timings.csv", timings_csv(res.rows));
  write_file(out / "aggregate.json", aggregate_json(spec, res.aggregate));

  std::printf("%-6s %10s %5s %12s %12s %10s\n", "scheme", to_string(spec.sweep).c_str(), "n",
              "mean_bits", "std_bits", "infeasible");
  for (const auto& a : res.aggregate) {
    std::printf("%-6s %10g %5d %12.4f %12.4f %10d\n", to_string(a.scheme).c_str(), a.value, a.n,
                a.mean_bits, a.std_bits, a.infeasible);
  }
  const bool any_infeasible = std::any_of(res.rows.begin(), res.rows.end(), [](const ResultRow& r) {
    return r.terminated_by == Termination::kInfeasible;
  });
  return strict && any_infeasible ? 2 : 0;
}

int cmd_converge(const fs::path& config, const fs::path& out, std::uint64_t seed,
                 const std::string& init) {
  const ExperimentSpec spec = load_spec(config);
  const double value = spec.values.front();
  const SystemConfig cfg = config_for_value(spec, value);
  const ChannelSet channels = generate_channels(cfg, seed, geometry_for_value(spec, value));
  const PowerAllocation alpha = allocate_power(channels);
  std::vector<std::string> kinds;
  if (init == "all") {
    kinds = {"identity", "svd", "random"};
  } else {
    kinds = {init};
  }
  fs::create_directories(out);
  int status = 0;
  for (const auto& name : kinds) {
    InitStrategy strategy{parse_init_kind(name), seed};
    const ConvergenceReport rep = run(channels, alpha, cfg, strategy);
    const fs::path path = out / ("trace_" + name + ".csv");
    emit_convergence_trace(rep, path);
    std::printf("%-8s iterations %3d  mmf %.4f bits  %s  -> %s\n", name.c_str(), rep.iterations,
                nats_to_bits(rep.final_report.mmf), to_string(rep.terminated_by).c_str(),
                path.string().c_str());
    if (rep.terminated_by == Termination::kInfeasible) status = 2;
  }
  return status;
}

int cmd_verify(std::uint64_t seed, int instances) {
  const auto rows = verify_suite(seed, instances);
  bool ok = true;
  std::printf("%-42s %12s %10s  %s\n", "check", "worst", "tol", "result");
  for (const auto& r : rows) {
    std::printf("%-42s %12.3e %10.0e  %s\n", r.name.c_str(), r.worst, r.tolerance,
                r.passed ? "PASS" : "FAIL");
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Max-min fair clustered MIMO-NOMA precoding experiments"};
  app.require_subcommand(1);

  fs::path config;
  fs::path out = ".";
  std::uint64_t seed_value = 0;
  int trials_value = 0;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool strict = false;

  auto* run_cmd = app.add_subcommand("run", "Run an experiment sweep");
  run_cmd->add_option("--config", config, "Experiment spec (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out, "Output directory");
  auto* seed_opt = run_cmd->add_option("--seed", seed_value, "Master seed override");
  auto* trials_opt = run_cmd->add_option("--trials", trials_value, "Trials per value")->check(CLI::PositiveNumber);
  run_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--strict", strict, "Exit with status 2 if any row is infeasible");

  std::uint64_t converge_seed = 0;
  std::string init = "all";
  auto* conv_cmd = app.add_subcommand("converge", "Trace convergence on one channel draw");
  conv_cmd->add_option("--config", config, "Experiment spec (JSON); first sweep value is used")
      ->required()
      ->check(CLI::ExistingFile);
  conv_cmd->add_option("--out", out, "Output directory");
  conv_cmd->add_option("--seed", converge_seed, "Channel seed");
  conv_cmd->add_option("--init", init, "identity, svd, random or all")
      ->check(CLI::IsMember({"identity", "svd", "random", "all"}));

  std::uint64_t verify_seed = 1;
  int instances = 200;
  auto* verify_cmd = app.add_subcommand("verify", "Run the oracle checks");
  verify_cmd->add_option("--seed", verify_seed, "Seed");
  verify_cmd->add_option("--instances", instances, "Random instances")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--threads", threads, "Accepted for symmetry; checks run serially");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      std::optional<std::uint64_t> seed;
      std::optional<int> trials;
      if (*seed_opt) seed = seed_value;
      if (*trials_opt) trials = trials_value;
      return cmd_run(config, out, seed, trials, threads, strict);
    }
    if (*conv_cmd) return cmd_converge(config, out, converge_seed, init);
    if (*verify_cmd) return cmd_verify(verify_seed, instances);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
