#pragma once

#include "mmfnoma/metrics.hpp"
#include "mmfnoma/model.hpp"
#include "mmfnoma/optimizer.hpp"
#include "mmfnoma/types.hpp"

#include <vector>

namespace mmfnoma {

// Time-division reference: slot l serves user l of every cluster with one
// stream per cluster.
struct OmaPrecoderSet {
  std::vector<Precoder> P_slot;  // L matrices, M x K
};

// Every user gets a dedicated stream; column k * L + l belongs to user (k, l).
struct MulpPrecoderSet {
  Precoder P_full;  // M x (K * L)
};

// Outcome shared by all schemes. Rates are in nats.
struct SchemeOutcome {
  double mmf = 0.0;
  std::vector<double> R_cluster;
  UserArray<double> R_user;
  int iterations = 0;
  Termination terminated_by = Termination::kPrecoderTol;
  bool qos_satisfied = false;
};

struct OmaSolution {
  OmaPrecoderSet precoders;
  SchemeOutcome outcome;
  std::vector<ConvergenceReport> slots;
};

struct MulpSolution {
  MulpPrecoderSet precoders;
  SchemeOutcome outcome;
  int sweeps = 0;
};

// SINR of user (k, l) in slot l. The slot rate is log(1 + sinr) / L.
double oma_sinr(const ChannelSet& channels, const Precoder& P_slot, int k, int l,
                double sigma2 = 1.0);
double oma_rate(const ChannelSet& channels, const Precoder& P_slot, int k, int l,
                double sigma2 = 1.0);

// SINR of user (k, l) when all K*L streams are on air. Interference from every
// other stream is weighted by the victim's own channel.
double mulp_sinr(const ChannelSet& channels, const Precoder& P_full, int k, int l,
                 double sigma2 = 1.0);

// Users (., l) as K single-user clusters, the channel set seen in slot l.
ChannelSet slot_channels(const ChannelSet& channels, int l);

// Rates of a given precoder set, recomputed from the SINR formulas above.
SchemeOutcome evaluate_oma(const ChannelSet& channels, const OmaPrecoderSet& P, double sigma2);
SchemeOutcome evaluate_mulp(const ChannelSet& channels, const MulpPrecoderSet& P, double sigma2);

// Each slot is an independent L = 1 instance of the optimizer with power E_tx
// and thresholds scaled by L (the slot rate carries the 1/L factor).
OmaSolution solve_oma(const ChannelSet& channels, const SystemConfig& cfg,
                      const InitStrategy& strategy = InitStrategy::svd());

// Block l holds the streams of users (., l) and gets power E_tx / L. Blocks are
// optimized in turn, each treating the other blocks' streams as fixed noise,
// until the cluster rates settle.
MulpSolution solve_mulp(const ChannelSet& channels, const SystemConfig& cfg,
                        const InitStrategy& strategy = InitStrategy::svd(),
                        int max_sweeps = 10);

}  // namespace mmfnoma
