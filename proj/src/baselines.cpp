#include "mmfnoma/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmfnoma {

namespace {

void check_user(const ChannelSet& ch, int k, int l) {
  if (k < 0 || k >= ch.K() || l < 0 || l >= ch.L()) {
    throw std::out_of_range("user index out of range");
  }
}

SchemeOutcome outcome_from_rates(UserArray<double> R) {
  SchemeOutcome out;
  out.R_cluster.assign(R.clusters(), 0.0);
  for (int k = 0; k < R.clusters(); ++k) {
    for (int l = 0; l < R.users(); ++l) out.R_cluster[k] += R(k, l);
  }
  out.mmf = out.R_cluster.empty() ? 0.0
                                  : *std::min_element(out.R_cluster.begin(), out.R_cluster.end());
  out.R_user = std::move(R);
  return out;
}

bool meets(const UserArray<double>& R, const UserArray<double>& r_th, double tol) {
  for (int k = 0; k < R.clusters(); ++k) {
    for (int l = 0; l < R.users(); ++l) {
      if (R(k, l) < r_th(k, l) - tol) return false;
    }
  }
  return true;
}

Termination combine(Termination a, Termination b) {
  if (a == Termination::kInfeasible || b == Termination::kInfeasible) return Termination::kInfeasible;
  if (a == Termination::kMaxIters || b == Termination::kMaxIters) return Termination::kMaxIters;
  return Termination::kPrecoderTol;
}

// Config of a single-stream sub-problem built from users (., l).
SystemConfig single_stream_config(const SystemConfig& cfg, int l, double E_tx, double th_scale) {
  SystemConfig sub = cfg;
  sub.L = 1;
  sub.E_tx = E_tx;
  sub.r_th = UserArray<double>(cfg.K, 1);
  for (int k = 0; k < cfg.K; ++k) sub.r_th(k, 0) = th_scale * cfg.r_th(k, l);
  sub.qos_tol = th_scale * cfg.qos_tol;
  return sub;
}

}  // namespace

double oma_sinr(const ChannelSet& channels, const Precoder& P_slot, int k, int l, double sigma2) {
  check_user(channels, k, l);
  if (P_slot.rows() != channels.M() || P_slot.cols() != channels.K()) {
    throw std::invalid_argument("oma_sinr: slot precoder must be M x K");
  }
  const CRowVector hP = channels.h(k, l) * P_slot;
  double interference = 0.0;
  for (int i = 0; i < channels.K(); ++i) {
    if (i != k) interference += std::norm(hP(i));
  }
  return std::norm(hP(k)) / (interference + sigma2);
}

double oma_rate(const ChannelSet& channels, const Precoder& P_slot, int k, int l, double sigma2) {
  return std::log1p(oma_sinr(channels, P_slot, k, l, sigma2)) / channels.L();
}

double mulp_sinr(const ChannelSet& channels, const Precoder& P_full, int k, int l, double sigma2) {
  check_user(channels, k, l);
  const int L = channels.L();
  if (P_full.rows() != channels.M() || P_full.cols() != channels.K() * L) {
    throw std::invalid_argument("mulp_sinr: precoder must be M x (K*L)");
  }
  const CRowVector hP = channels.h(k, l) * P_full;
  const int own = k * L + l;
  double interference = 0.0;
  for (int c = 0; c < hP.size(); ++c) {
    if (c != own) interference += std::norm(hP(c));
  }
  return std::norm(hP(own)) / (interference + sigma2);
}

ChannelSet slot_channels(const ChannelSet& channels, int l) {
  if (l < 0 || l >= channels.L()) throw std::out_of_range("slot_channels: bad user index");
  std::vector<std::vector<UserDraw>> clusters(channels.K());
  for (int k = 0; k < channels.K(); ++k) {
    clusters[k].push_back({channels.raw(k, l), channels.distance(k, l)});
  }
  return ChannelSet::from_clusters(channels.M(), channels.rho(), std::move(clusters));
}

SchemeOutcome evaluate_oma(const ChannelSet& channels, const OmaPrecoderSet& P, double sigma2) {
  if (static_cast<int>(P.P_slot.size()) != channels.L()) {
    throw std::invalid_argument("evaluate_oma: need one precoder per slot");
  }
  UserArray<double> R(channels.K(), channels.L());
  for (int k = 0; k < channels.K(); ++k) {
    for (int l = 0; l < channels.L(); ++l) R(k, l) = oma_rate(channels, P.P_slot[l], k, l, sigma2);
  }
  return outcome_from_rates(std::move(R));
}

SchemeOutcome evaluate_mulp(const ChannelSet& channels, const MulpPrecoderSet& P, double sigma2) {
  UserArray<double> R(channels.K(), channels.L());
  for (int k = 0; k < channels.K(); ++k) {
    for (int l = 0; l < channels.L(); ++l) {
      R(k, l) = std::log1p(mulp_sinr(channels, P.P_full, k, l, sigma2));
    }
  }
  return outcome_from_rates(std::move(R));
}

OmaSolution solve_oma(const ChannelSet& channels, const SystemConfig& cfg,
                      const InitStrategy& strategy) {
  cfg.validate();
  const int L = channels.L();
  OmaSolution sol;
  Termination term = Termination::kPrecoderTol;
  int iterations = 0;
  for (int l = 0; l < L; ++l) {
    const ChannelSet slot = slot_channels(channels, l);
    const PowerAllocation alpha = allocate_power(slot);
    const SystemConfig sub = single_stream_config(cfg, l, cfg.E_tx, static_cast<double>(L));
    ConvergenceReport rep = run(slot, alpha, sub, strategy);
    term = combine(term, rep.terminated_by);
    iterations += rep.iterations;
    sol.precoders.P_slot.push_back(rep.P);
    sol.slots.push_back(std::move(rep));
  }
  sol.outcome = evaluate_oma(channels, sol.precoders, cfg.sigma2);
  sol.outcome.iterations = iterations;
  sol.outcome.terminated_by = term;
  // Slot thresholds were scaled by L, so compare the 1/L rates against R_th.
  sol.outcome.qos_satisfied = meets(sol.outcome.R_user, cfg.r_th, cfg.qos_tol);
  return sol;
}

MulpSolution solve_mulp(const ChannelSet& channels, const SystemConfig& cfg,
                        const InitStrategy& strategy, int max_sweeps) {
  cfg.validate();
  if (max_sweeps < 1) throw std::invalid_argument("solve_mulp: max_sweeps must be positive");
  const int M = channels.M();
  const int K = channels.K();
  const int L = channels.L();
  const double block_power = cfg.E_tx / L;

  std::vector<ChannelSet> blocks;
  std::vector<PowerAllocation> alphas;
  std::vector<SystemConfig> configs;
  MulpSolution sol;
  sol.precoders.P_full = Precoder::Zero(M, K * L);
  for (int l = 0; l < L; ++l) {
    blocks.push_back(slot_channels(channels, l));
    alphas.push_back(allocate_power(blocks.back()));
    configs.push_back(single_stream_config(cfg, l, block_power, 1.0));
    const Precoder init = init_precoder(blocks.back(), configs.back(), strategy);
    for (int k = 0; k < K; ++k) sol.precoders.P_full.col(k * L + l) = init.col(k);
  }

  Termination term = Termination::kPrecoderTol;
  int iterations = 0;
  std::vector<double> previous;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    term = Termination::kPrecoderTol;
    for (int l = 0; l < L; ++l) {
      // Streams of the other blocks as seen by users (., l).
      UserArray<double> extra(K, 1);
      for (int k = 0; k < K; ++k) {
        const CRowVector hP = channels.h(k, l) * sol.precoders.P_full;
        for (int c = 0; c < K * L; ++c) {
          if (c % L != l) extra(k, 0) += std::norm(hP(c));
        }
      }
      Precoder start(M, K);
      for (int k = 0; k < K; ++k) start.col(k) = sol.precoders.P_full.col(k * L + l);
      RunOptions opts;
      opts.extra_noise = &extra;
      const ConvergenceReport rep = run_from(blocks[l], alphas[l], configs[l], start, opts);
      term = combine(term, rep.terminated_by);
      iterations += rep.iterations;
      for (int k = 0; k < K; ++k) sol.precoders.P_full.col(k * L + l) = rep.P.col(k);
    }
    sol.sweeps = sweep;
    const SchemeOutcome now = evaluate_mulp(channels, sol.precoders, cfg.sigma2);
    if (L == 1) break;
    if (!previous.empty()) {
      double change = 0.0;
      for (int k = 0; k < K; ++k) change = std::max(change, std::abs(now.R_cluster[k] - previous[k]));
      if (change < 1e-4) break;
    }
    previous = now.R_cluster;
  }

  sol.outcome = evaluate_mulp(channels, sol.precoders, cfg.sigma2);
  sol.outcome.iterations = iterations;
  sol.outcome.qos_satisfied = meets(sol.outcome.R_user, cfg.r_th, cfg.qos_tol);
  sol.outcome.terminated_by = term;
  if (term != Termination::kInfeasible && !sol.outcome.qos_satisfied) {
    // Blocks met their thresholds against stale interference only.
    sol.outcome.terminated_by = Termination::kInfeasible;
  }
  return sol;
}

}  // namespace mmfnoma
