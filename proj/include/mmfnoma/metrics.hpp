#pragma once

#include "mmfnoma/model.hpp"
#include "mmfnoma/types.hpp"

#include <vector>

namespace mmfnoma {

// Everything a closed-form link quantity depends on besides the precoder.
struct LinkContext {
  const ChannelSet& channels;
  const PowerAllocation& alpha;
  double sigma2 = 1.0;
  // Optional additional noise per receiving user (K x L), e.g. interference
  // from streams that are held fixed while another block is optimized.
  const UserArray<double>* extra_noise = nullptr;

  double noise(int k, int i) const {
    return extra_noise ? sigma2 + (*extra_noise)(k, i) : sigma2;
  }
};

// All per-pair quantities are in nats. Pair (k, i, l) means user i of cluster
// k decoding the message of user l, with i >= l (SIC order).
struct RateReport {
  PairArray<double> R_pair;
  UserArray<double> R_user;
  std::vector<double> R_cluster;
  double mmf = 0.0;
  int argmin_cluster = 0;
};

struct MseSet {
  PairArray<double> eps_pair;
  UserArray<double> eps_user;
  PairArray<cd> V;
  PairArray<double> b;
  PairArray<double> xi_pair;
  UserArray<double> xi_user;
};

double effective_noise(const LinkContext& ctx, const Precoder& P, int k, int i, int l);
double sinr(const LinkContext& ctx, const Precoder& P, int k, int i, int l);
double rate_pair(const LinkContext& ctx, const Precoder& P, int k, int i, int l);
RateReport rate_report(const LinkContext& ctx, const Precoder& P);

// MSE of an arbitrary scalar receiver V.
double mse(const LinkContext& ctx, const Precoder& P, cd V, int k, int i, int l);
cd mmse_receiver(const LinkContext& ctx, const Precoder& P, int k, int i, int l);
double mmse_error(const LinkContext& ctx, const Precoder& P, int k, int i, int l);

// b = 1 / eps elementwise over every valid pair.
PairArray<double> weights_from_mmse(const PairArray<double>& eps_pair);

// xi = b * eps - log(alpha_l * b) for the receiver V.
double augmented_wmse(const LinkContext& ctx, const Precoder& P, cd V, double b,
                      int k, int i, int l);
// Per-user max over decoders i >= l.
UserArray<double> xi_user_from_pairs(const PairArray<double>& xi_pair);

// MMSE receivers, their errors, b = 1/eps and the resulting xi.
MseSet mmse_set(const LinkContext& ctx, const Precoder& P);

// Builds the report from pair rates: per-user min over decoders, cluster sums,
// and the worst cluster. Ties go to the lowest index.
RateReport summarize_rates(PairArray<double> R_pair);

}  // namespace mmfnoma
