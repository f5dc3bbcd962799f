#pragma once

#include "mmfnoma/metrics.hpp"
#include "mmfnoma/optimizer.hpp"
#include "mmfnoma/types.hpp"

namespace mmfnoma {

// Convex majorizer of the max-min problem at fixed receivers V and weights b.
// Each pair contributes the quadratic xi(P) = b * eps(P; V) - log(alpha * b);
// users take the soft maximum over their decoders, clusters sum their users,
// and the cluster scores and QoS violations enter through exponential
// penalties of sharpness nu.
struct SurrogateProblem {
  const LinkContext& ctx;
  const PairArray<cd>& V;
  const PairArray<double>& b;
  const UserArray<double>& xi_th;
  double nu = 1.0;
  double E_tx = 1.0;
  // When both are set the decoder weights follow a softmax over these errors
  // (held fixed) instead of the soft maximum of xi.
  const PairArray<double>* selector_pair = nullptr;
  const UserArray<double>* selector_user = nullptr;
};

struct SurrogateSolution {
  Precoder P;
  PairArray<double> xi_pair;  // surrogate xi at P
  UserArray<double> xi_user;  // per-user aggregate used by the multipliers
  Multipliers mult;           // multipliers evaluated at P
  double beta = 0.0;          // power multiplier
  double value = 0.0;         // penalty function at P
  int newton_steps = 0;
  bool converged = false;
};

PairArray<double> surrogate_xi(const SurrogateProblem& prob, const Precoder& P);

// Penalty function whose gradient weights are exactly the multipliers.
double surrogate_value(const SurrogateProblem& prob, const Precoder& P);

// Minimizes the penalty function over trace(P P^H) <= E_tx by damped Newton
// steps on a log barrier. `start` must be strictly inside the power ball or on
// its boundary (it is pulled inward slightly).
SurrogateSolution solve_surrogate(const SurrogateProblem& prob, const Precoder& start);

}  // namespace mmfnoma
