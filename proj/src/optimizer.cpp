#include "mmfnoma/optimizer.hpp"

#include "mmfnoma/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace mmfnoma {

std::string to_string(InitKind kind) {
  switch (kind) {
    case InitKind::kScaledIdentity: return "identity";
    case InitKind::kSvd: return "svd";
    case InitKind::kRandom: return "random";
  }
  return "unknown";
}

InitKind parse_init_kind(const std::string& name) {
  if (name == "identity" || name == "scaled_identity") return InitKind::kScaledIdentity;
  if (name == "svd") return InitKind::kSvd;
  if (name == "random") return InitKind::kRandom;
  throw std::invalid_argument("unknown initialization '" + name + "'");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kPrecoderTol: return "precoder_tol";
    case Termination::kMaxIters: return "max_iters";
    case Termination::kInfeasible: return "infeasible";
  }
  return "unknown";
}

Precoder scale_to_power(const Precoder& P, double E_tx) {
  const double power = P.squaredNorm();
  if (power <= 0.0) return P;
  return P * std::sqrt(E_tx / power);
}

Precoder init_precoder(const ChannelSet& channels, const SystemConfig& cfg,
                       const InitStrategy& strategy) {
  const int M = channels.M();
  const int K = channels.K();
  const int L = channels.L();
  Precoder P = Precoder::Zero(M, K);
  switch (strategy.kind) {
    case InitKind::kScaledIdentity:
      if (M < K) throw std::invalid_argument("init_precoder: scaled identity needs M >= K");
      P.topLeftCorner(K, K).setIdentity();
      break;
    case InitKind::kSvd:
      for (int k = 0; k < K; ++k) {
        // Columns h^H of the cluster; the dominant left singular vector is the
        // direction best matched to all members jointly.
        CMatrix H(M, L);
        for (int l = 0; l < L; ++l) H.col(l) = channels.h(k, l).adjoint();
        Eigen::JacobiSVD<CMatrix> svd(H, Eigen::ComputeThinU);
        P.col(k) = svd.matrixU().col(0);
      }
      break;
    case InitKind::kRandom: {
      std::mt19937_64 rng(strategy.seed);
      std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
      for (int k = 0; k < K; ++k) {
        for (int m = 0; m < M; ++m) {
          const double re = normal(rng);
          const double im = normal(rng);
          P(m, k) = cd(re, im);
        }
      }
      break;
    }
  }
  return scale_to_power(P, cfg.E_tx);
}

Multipliers update_multipliers(double nu, const UserArray<double>& xi_user,
                               const PairArray<double>& xi_pair,
                               const UserArray<double>& eps_user,
                               const PairArray<double>& eps_pair,
                               const UserArray<double>& xi_th, bool use_xi) {
  const int K = xi_user.clusters();
  const int L = xi_user.users();
  Multipliers m;
  m.theta.assign(K, 0.0);
  m.Gamma = UserArray<double>(K, L);
  m.eta = PairArray<double>(K, L);

  std::vector<double> cluster_sum(K, 0.0);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) cluster_sum[k] += xi_user(k, l);
  }
  const double cbar = *std::max_element(cluster_sum.begin(), cluster_sum.end());
  double z = 0.0;
  for (int k = 0; k < K; ++k) {
    m.theta[k] = std::exp(nu * (cluster_sum[k] - cbar));
    z += m.theta[k];
  }
  for (double& t : m.theta) t /= z;

  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      double exponent = nu * (xi_user(k, l) - xi_th(k, l));
      if (exponent > kGammaExponentCap) {
        exponent = kGammaExponentCap;
        m.gamma_clamped = true;
      }
      m.Gamma(k, l) = std::exp(exponent);
    }
  }

  const auto& pair_src = use_xi ? xi_pair : eps_pair;
  const auto& user_src = use_xi ? xi_user : eps_user;
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      // user_src is the max over i, so every exponent is <= 0.
      double norm = 0.0;
      for (int i = l; i < L; ++i) {
        m.eta(k, i, l) = std::exp(nu * (pair_src(k, i, l) - user_src(k, l)));
        norm += m.eta(k, i, l);
      }
      const double mass = m.theta[k] + m.Gamma(k, l);
      for (int i = l; i < L; ++i) m.eta(k, i, l) *= mass / norm;
    }
  }
  return m;
}

double compute_beta(const LinkContext& ctx, const OptimizerState& state, double E_tx) {
  double acc = 0.0;
  for_each_pair(state.eta.clusters(), state.eta.users(), [&](int k, int i, int l) {
    acc += state.eta(k, i, l) * state.b(k, i, l) * std::norm(state.V(k, i, l)) * ctx.noise(k, i);
  });
  return acc / E_tx;
}

CMatrix precoder_system_matrix(const LinkContext& ctx, const OptimizerState& state, int k) {
  const auto& ch = ctx.channels;
  const int M = ch.M();
  const int K = ch.K();
  const int L = ch.L();
  CMatrix A = CMatrix::Identity(M, M) * state.beta;
  for (int t = 0; t < K; ++t) {
    for (int l = 0; l < L; ++l) {
      // Own cluster: message l sees the superposed power of j >= l after SIC.
      double scale = 1.0;
      if (t == k) {
        scale = 0.0;
        for (int j = l; j < L; ++j) scale += ctx.alpha(k, j);
      }
      for (int i = l; i < L; ++i) {
        const double w = state.eta(t, i, l) * state.b(t, i, l) * std::norm(state.V(t, i, l)) * scale;
        if (w == 0.0) continue;
        const CRowVector& h = ch.h(t, i);
        A.noalias() += w * (h.adjoint() * h);
      }
    }
  }
  return A;
}

CVector precoder_rhs(const LinkContext& ctx, const OptimizerState& state, int k) {
  const auto& ch = ctx.channels;
  CVector c = CVector::Zero(ch.M());
  for (int l = 0; l < ch.L(); ++l) {
    for (int i = l; i < ch.L(); ++i) {
      const cd coeff = state.eta(k, i, l) * state.b(k, i, l) * ctx.alpha(k, l) *
                       std::conj(state.V(k, i, l));
      c.noalias() += coeff * ch.h(k, i).adjoint();
    }
  }
  return c;
}

PrecoderUpdate update_precoder(const LinkContext& ctx, const OptimizerState& state) {
  const int M = ctx.channels.M();
  const int K = ctx.channels.K();
  PrecoderUpdate out;
  out.P = Precoder::Zero(M, K);
  for (int k = 0; k < K; ++k) {
    CMatrix A = precoder_system_matrix(ctx, state, k);
    const CVector c = precoder_rhs(ctx, state, k);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(A, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < 1e-12) {
      A += 1e-10 * CMatrix::Identity(M, M);
      out.ridge_applied = true;
    }
    Eigen::LLT<CMatrix> llt(A);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("update_precoder: system matrix is not positive definite");
    }
    out.P.col(k) = llt.solve(c);
  }
  return out;
}

double initial_nu(const SystemConfig& cfg) {
  // log(KL) vanishes for a single user; keep the penalty strictly positive.
  const double users = std::max(2.0, static_cast<double>(cfg.K) * cfg.L);
  return std::log(users) / cfg.eps_opt;
}

namespace {

bool qos_met(const RateReport& report, const UserArray<double>& r_th, double tol) {
  for (int k = 0; k < r_th.clusters(); ++k) {
    for (int l = 0; l < r_th.users(); ++l) {
      if (report.R_user(k, l) < r_th(k, l) - tol) return false;
    }
  }
  return true;
}

}  // namespace

ConvergenceReport run_from(const ChannelSet& channels, const PowerAllocation& alpha,
                           const SystemConfig& cfg, Precoder initial,
                           const RunOptions& options) {
  cfg.validate();
  if (channels.M() != cfg.M || channels.K() != cfg.K || channels.L() != cfg.L) {
    throw std::invalid_argument("run: channel dimensions do not match the config");
  }
  if (options.extra_noise && (options.extra_noise->clusters() != cfg.K ||
                              options.extra_noise->users() != cfg.L)) {
    throw std::invalid_argument("run: extra_noise must have shape K x L");
  }
  const LinkContext ctx{channels, alpha, cfg.sigma2, options.extra_noise};
  const int K = cfg.K;
  const int L = cfg.L;

  UserArray<double> xi_th(K, L);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) xi_th(k, l) = 1.0 - cfg.r_th(k, l);
  }

  ConvergenceReport report;
  OptimizerState state;
  state.P = scale_to_power(initial, cfg.E_tx);
  state.nu = initial_nu(cfg);
  bool done = false;

  for (int n = 1; n <= cfg.max_iters && !done; ++n) {
    state.iter = n;
    const MseSet ms = mmse_set(ctx, state.P);
    state.V = ms.V;
    state.eps = ms.eps_pair;
    state.b = ms.b;

    double cbar = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      double s = 0.0;
      for (int l = 0; l < L; ++l) s += ms.xi_user(k, l);
      cbar = std::max(cbar, s);
    }
    state.cbar = cbar;

    Precoder next;
    if (options.literal_fixed_point) {
      Multipliers mult = update_multipliers(state.nu, ms.xi_user, ms.xi_pair, ms.eps_user,
                                            ms.eps_pair, xi_th, cfg.eta_uses_xi);
      state.theta = std::move(mult.theta);
      state.Gamma = std::move(mult.Gamma);
      state.eta = std::move(mult.eta);
      state.gamma_clamped = mult.gamma_clamped;
      if (options.on_update) options.on_update(state);
      state.beta = compute_beta(ctx, state, cfg.E_tx);
      PrecoderUpdate upd = update_precoder(ctx, state);
      state.ridge_applied = upd.ridge_applied;
      if (upd.ridge_applied) ++report.ridge_iterations;
      state.P_update = upd.P;
      next = scale_to_power(upd.P, cfg.E_tx);
    } else {
      SurrogateProblem prob{ctx, ms.V, ms.b, xi_th, state.nu, cfg.E_tx};
      if (!cfg.eta_uses_xi) {
        prob.selector_pair = &ms.eps_pair;
        prob.selector_user = &ms.eps_user;
      }
      SurrogateSolution sol = solve_surrogate(prob, state.P);
      state.theta = std::move(sol.mult.theta);
      state.Gamma = std::move(sol.mult.Gamma);
      state.eta = std::move(sol.mult.eta);
      state.gamma_clamped = sol.mult.gamma_clamped;
      state.beta = sol.beta;
      state.ridge_applied = false;
      if (options.on_update) options.on_update(state);
      state.P_update = sol.P;
      next = scale_to_power(sol.P, cfg.E_tx);
    }

    const double delta = (next - state.P).squaredNorm();
    const RateReport rates = rate_report(ctx, next);
    report.mmf_trajectory.push_back(rates.mmf);
    report.precoder_delta.push_back(delta);
    report.iterations = n;

    if (delta < cfg.upsilon) {
      if (qos_met(rates, cfg.r_th, cfg.qos_tol)) {
        report.terminated_by = Termination::kPrecoderTol;
        done = true;
      } else {
        state.nu += cfg.delta;
        if (state.nu > kNuCap) {
          report.terminated_by = Termination::kInfeasible;
          done = true;
        }
      }
    }
    report.final_state = state;
    state.P = std::move(next);
    if (options.on_update) options.on_update(state);
  }

  report.P = state.P;
  report.final_report = rate_report(ctx, report.P);
  report.qos_satisfied = qos_met(report.final_report, cfg.r_th, cfg.qos_tol);
  if (!done) {
    report.terminated_by = report.qos_satisfied ? Termination::kMaxIters : Termination::kInfeasible;
  }
  return report;
}

ConvergenceReport run(const ChannelSet& channels, const PowerAllocation& alpha,
                      const SystemConfig& cfg, const InitStrategy& strategy,
                      const RunOptions& options) {
  return run_from(channels, alpha, cfg, init_precoder(channels, cfg, strategy), options);
}

}  // namespace mmfnoma
