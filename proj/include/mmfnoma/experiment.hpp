#pragma once

#include "mmfnoma/baselines.hpp"
#include "mmfnoma/model.hpp"
#include "mmfnoma/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mmfnoma {

enum class Scheme { kNoma, kOma, kMulp };
enum class SweepVar { kSnrDb, kDInner, kL };

std::string to_string(Scheme s);
std::string to_string(SweepVar v);
Scheme parse_scheme(const std::string& name);
SweepVar parse_sweep(const std::string& name);

struct ExperimentSpec {
  std::vector<Scheme> schemes{Scheme::kNoma, Scheme::kOma, Scheme::kMulp};
  SweepVar sweep = SweepVar::kSnrDb;
  std::vector<double> values{10.0};
  int trials = 100;
  // M, K, L, SNR, thresholds and solver constants. The swept field is
  // overridden per value.
  SystemConfig base = SystemConfig::make(4, 4, 2, 10.0, 0.2);
  double r_th_bits = 0.2;
  // Geometry for snr_db and L sweeps; d_inner sweeps always use AnnulusSplit.
  Geometry geometry = UniformDisk{};
  InitStrategy init = InitStrategy::svd();
  std::uint64_t seed = 1;

  void validate() const;
};

// JSON object. System keys: M, K, L, snr_db, sigma2, rho, r_th (bits, uniform),
// eps_opt, upsilon, delta, max_iters, seed, trials, geometry ("disk",
// "annulus" with d_inner, "fixed" with d). Experiment keys: schemes, sweep,
// values, init. Missing keys keep their defaults; unknown keys are rejected.
ExperimentSpec parse_spec(const std::string& json_text);
ExperimentSpec load_spec(const std::filesystem::path& path);

struct ResultRow {
  Scheme scheme = Scheme::kNoma;
  double value = 0.0;
  int trial = 0;
  std::uint64_t trial_seed = 0;
  std::uint64_t channel_digest = 0;
  double mmf_bits = 0.0;
  std::vector<double> cluster_bits;
  int iterations = 0;
  Termination terminated_by = Termination::kPrecoderTol;
  bool qos_satisfied = false;
  double min_user_margin_bits = 0.0;  // min over users of R - R_th
  double wall_ms = 0.0;
};

struct AggregateRow {
  Scheme scheme = Scheme::kNoma;
  double value = 0.0;
  int n = 0;
  double mean_bits = 0.0;
  double std_bits = 0.0;  // sample standard deviation, 0 for n = 1
  int infeasible = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;  // (scheme, value, trial) order
  std::vector<AggregateRow> aggregate;
};

// Seed of the channel draw for (value, trial), shared by all schemes.
std::uint64_t channel_seed(std::uint64_t master, double value, int trial);
// Seed of one (scheme, value, trial) run, used by random initializations.
std::uint64_t trial_seed(std::uint64_t master, Scheme scheme, double value, int trial);

// Config and geometry for one sweep value.
SystemConfig config_for_value(const ExperimentSpec& spec, double value);
Geometry geometry_for_value(const ExperimentSpec& spec, double value);

// One scheme on one channel draw. Rates in nats.
SchemeOutcome run_scheme(Scheme scheme, const ChannelSet& channels, const SystemConfig& cfg,
                         const InitStrategy& init);

ExperimentResult run_experiment(const ExperimentSpec& spec, int threads = 1);

std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows);

// CSV with a leading "# schema=1" line. Wall times are left out so equal
// seeds give equal bytes; they go to the timing CSV instead.
std::string results_csv(const std::vector<ResultRow>& rows);
std::string timings_csv(const std::vector<ResultRow>& rows);
std::string aggregate_json(const ExperimentSpec& spec, const std::vector<AggregateRow>& agg);

// Header iter,mmf_bits,precoder_delta and one row per iteration (1-based).
std::string convergence_trace_csv(const ConvergenceReport& report);
void emit_convergence_trace(const ConvergenceReport& report, const std::filesystem::path& path);

// Writes text to path, throwing std::runtime_error with the path on failure.
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mmfnoma
