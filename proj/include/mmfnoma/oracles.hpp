#pragma once

#include "mmfnoma/metrics.hpp"
#include "mmfnoma/model.hpp"
#include "mmfnoma/optimizer.hpp"
#include "mmfnoma/types.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace mmfnoma {

// K clusters of L users with CN(0, 1) fading and area-uniform distances in
// [d_min, 1], bypassing the clustering rule. For randomized checks.
ChannelSet random_channels(int M, int K, int L, std::mt19937_64& rng, double d_min = 0.1);

// Random precoder scaled to trace(P P^H) = E_tx.
Precoder random_precoder(int M, int K, double E_tx, std::mt19937_64& rng);

// Multipliers of the rate Lagrangian f.
struct FMultipliers {
  std::vector<double> mu;   // per cluster
  UserArray<double> kappa;  // QoS
  PairArray<double> psi;    // decoder constraints
  double lambda = 0.0;      // power
};

// Multipliers of the WMMSE Lagrangian g (same layout, barred symbols).
using GMultipliers = FMultipliers;

struct EquivalenceProbe {
  FMultipliers multipliers_f;
  GMultipliers multipliers_g;
  std::vector<CVector> grad_f;
  std::vector<CVector> grad_g;
};

// Gradients with respect to conj(p_k): d/dp* = (d/dx + i d/dy) / 2. Under this
// convention lambda * trace(P P^H) has gradient lambda * p_k.
CVector grad_f(const LinkContext& ctx, const Precoder& P, const FMultipliers& m, int k);
CVector grad_g(const LinkContext& ctx, const Precoder& P, const PairArray<double>& b,
               const GMultipliers& m, int k);

// The P-dependent parts of f and g, for finite differencing.
double lagrangian_f_part(const LinkContext& ctx, const Precoder& P, const FMultipliers& m);
double lagrangian_g_part(const LinkContext& ctx, const Precoder& P, const PairArray<double>& b,
                         const GMultipliers& m);

// Central differences of a real function of P, combined as (dx + i dy) / 2.
CVector fd_gradient(const std::function<double(const Precoder&)>& fn, const Precoder& P, int k,
                    double step = 1e-6);

// Uniform (0, 1] draws normalized so that sum mu = 1 and
// sum_i psi(k, i, l) = mu_k + kappa(k, l).
FMultipliers sample_multipliers(int K, int L, std::mt19937_64& rng);

// Matched multipliers and b = 1 / eps at P.
EquivalenceProbe equivalence_probe(const LinkContext& ctx, const Precoder& P,
                                   std::mt19937_64& rng);

struct StationarityResidual {
  double receiver = 0.0;  // max |lhs - rhs| of the receiver condition at state.P
  double precoder = 0.0;  // max column norm of the precoder condition at state.P_update
  double total() const { return receiver + precoder; }
};

// Receiver condition uses state.P and state.V; precoder condition uses
// state.P_update together with V, b, eta and beta.
StationarityResidual stationarity_residual_h(const LinkContext& ctx, const OptimizerState& state);

// Post-multiplying the receiver conditions by eta b V* and pre-multiplying the
// precoder conditions by p_k^H give equal left sides; the beta that makes the
// right sides equal at state.P is compared with state.beta (relative gap).
// Assumes trace(P P^H) = E_tx.
double trace_balance_gap(const LinkContext& ctx, const OptimizerState& state);

// Beta accumulated independently: (1/E_tx) sum eta * b * |V|^2 * noise.
double beta_reference(const LinkContext& ctx, const OptimizerState& state, double E_tx);

struct BruteForceResult {
  Precoder P;
  double mmf = 0.0;  // nats; -violation when no grid point meets the thresholds
  bool feasible = false;
};

// Grid over per-column directions and the power split, always at full power,
// followed by a pattern-search polish of the best grid points. M, K, L <= 2.
BruteForceResult brute_force_mmf(const ChannelSet& channels, const SystemConfig& cfg,
                                 int grid_resolution = 64);

// Projected gradient ascent on a soft minimum of rate_fn over the power ball,
// several random starts, returns the best true minimum. Numerical gradients.
struct PgaResult {
  Precoder P;
  double min_rate = 0.0;
};
PgaResult pga_maxmin(const std::function<std::vector<double>(const Precoder&)>& rate_fn, int M,
                     int cols, double E_tx, int starts, std::uint64_t seed);

// Slot l of OMA and block l of MULP (other blocks fixed) for the PGA oracle.
PgaResult pga_oma_slot(const ChannelSet& channels, int l, double E_tx, double sigma2,
                       int starts, std::uint64_t seed);
PgaResult pga_mulp_block(const ChannelSet& channels, const Precoder& P_full, int l,
                         double block_power, double sigma2, int starts, std::uint64_t seed);

struct VerifyRow {
  std::string name;
  double worst = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Randomized oracle checks; rows are ordered and deterministic per seed.
std::vector<VerifyRow> verify_suite(std::uint64_t seed, int instances);

}  // namespace mmfnoma
