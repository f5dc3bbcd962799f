#pragma once

#include "mmfnoma/metrics.hpp"
#include "mmfnoma/model.hpp"
#include "mmfnoma/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mmfnoma {

// Upper bound on the penalty sharpness before a run is declared infeasible.
inline constexpr double kNuCap = 1e6;
// Exponent clamp for the (non-normalized) QoS multiplier.
inline constexpr double kGammaExponentCap = 50.0;

enum class InitKind { kScaledIdentity, kSvd, kRandom };

struct InitStrategy {
  InitKind kind = InitKind::kSvd;
  std::uint64_t seed = 0;  // used by kRandom only

  static InitStrategy scaled_identity() { return {InitKind::kScaledIdentity, 0}; }
  static InitStrategy svd() { return {InitKind::kSvd, 0}; }
  static InitStrategy random(std::uint64_t seed) { return {InitKind::kRandom, seed}; }
};

std::string to_string(InitKind kind);
InitKind parse_init_kind(const std::string& name);

struct Multipliers {
  std::vector<double> theta;  // per cluster, sums to one
  UserArray<double> Gamma;    // per user QoS multiplier
  PairArray<double> eta;      // per decoding pair
  bool gamma_clamped = false;
};

struct OptimizerState {
  // Precoder the receivers, errors and weights below were computed from.
  Precoder P;
  // Output of the precoder step before rescaling to the power budget.
  Precoder P_update;
  PairArray<cd> V;
  PairArray<double> b;
  PairArray<double> eps;
  std::vector<double> theta;
  UserArray<double> Gamma;
  PairArray<double> eta;
  double beta = 0.0;
  double nu = 0.0;
  int iter = 0;
  double cbar = 0.0;
  bool gamma_clamped = false;
  bool ridge_applied = false;
};

enum class Termination { kPrecoderTol, kMaxIters, kInfeasible };
std::string to_string(Termination t);

struct ConvergenceReport {
  std::vector<double> mmf_trajectory;  // nats, one entry per iteration
  std::vector<double> precoder_delta;  // trace((dP)(dP)^H) per iteration
  Termination terminated_by = Termination::kMaxIters;
  bool qos_satisfied = false;
  RateReport final_report;
  Precoder P;
  OptimizerState final_state;
  int iterations = 0;
  int ridge_iterations = 0;
};

struct RunOptions {
  // Called after every multiplier update and again after every precoder update.
  std::function<void(const OptimizerState&)> on_update;
  // Evaluate the multipliers once per iteration at the current precoder and
  // take a single closed-form precoder step, instead of solving the
  // multiplier/precoder fixed point of the majorized subproblem.
  bool literal_fixed_point = false;
  // Additional per-user noise (K x L) on top of sigma2, e.g. streams owned by
  // another solver block.
  const UserArray<double>* extra_noise = nullptr;
};

Precoder init_precoder(const ChannelSet& channels, const SystemConfig& cfg,
                       const InitStrategy& strategy);

// Rescales P so that trace(P P^H) = E_tx. A zero matrix is returned unchanged.
Precoder scale_to_power(const Precoder& P, double E_tx);

// Exponential-penalty multipliers. xi_th is in the augmented-MSE domain
// (1 - R_th). The eta softmax runs over eps unless use_xi is set, in which
// case it runs over xi_pair/xi_user.
Multipliers update_multipliers(double nu, const UserArray<double>& xi_user,
                               const PairArray<double>& xi_pair,
                               const UserArray<double>& eps_user,
                               const PairArray<double>& eps_pair,
                               const UserArray<double>& xi_th, bool use_xi = false);

// Power multiplier from the trace balance of the KKT system:
// (1/E_tx) * sum eta * b * |V|^2 * noise. With unit noise this is the plain
// weighted sum of |V|^2.
double compute_beta(const LinkContext& ctx, const OptimizerState& state, double E_tx);

struct PrecoderUpdate {
  Precoder P;  // unscaled solution of the per-cluster Hermitian systems
  bool ridge_applied = false;
};

// Solves the stationarity system for each column given V, b, eta and beta.
PrecoderUpdate update_precoder(const LinkContext& ctx, const OptimizerState& state);

// Hermitian system matrix and right-hand side of column k.
CMatrix precoder_system_matrix(const LinkContext& ctx, const OptimizerState& state, int k);
CVector precoder_rhs(const LinkContext& ctx, const OptimizerState& state, int k);

double initial_nu(const SystemConfig& cfg);

// Full alternating optimization from the given initial precoder.
ConvergenceReport run(const ChannelSet& channels, const PowerAllocation& alpha,
                      const SystemConfig& cfg, const InitStrategy& strategy,
                      const RunOptions& options = {});
ConvergenceReport run_from(const ChannelSet& channels, const PowerAllocation& alpha,
                           const SystemConfig& cfg, Precoder initial,
                           const RunOptions& options = {});

}  // namespace mmfnoma
