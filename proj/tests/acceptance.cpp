// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "mmfnoma/baselines.hpp"
#include "mmfnoma/experiment.hpp"
#include "mmfnoma/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

using namespace mmfnoma;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Line {
  int id;
  bool pass;
  std::string text;
};

int worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// Multiplier bookkeeping shared by every optimizer run in this binary.
struct InvariantTally {
  long updates = 0;
  double worst = 0.0;
  bool negative = false;

  void check(const OptimizerState& st) {
    ++updates;
    const int K = static_cast<int>(st.theta.size());
    const int L = st.Gamma.users();
    double s = 0.0;
    for (double t : st.theta) {
      s += t;
      negative |= t < 0.0;
    }
    worst = std::max(worst, std::abs(s - 1.0));
    negative |= st.beta < 0.0;
    for (int k = 0; k < K; ++k) {
      for (int l = 0; l < L; ++l) {
        negative |= st.Gamma(k, l) < 0.0;
        double e = 0.0;
        for (int i = l; i < L; ++i) {
          negative |= st.eta(k, i, l) < 0.0;
          e += st.eta(k, i, l);
        }
        worst = std::max(worst, std::abs(e - (st.theta[k] + st.Gamma(k, l))) / std::max(1.0, e));
      }
    }
  }
};

InvariantTally g_tally;

RunOptions tallied() {
  RunOptions opt;
  opt.on_update = [](const OptimizerState& st) { g_tally.check(st); };
  return opt;
}

Line criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(1, 4);
  std::uniform_real_distribution<double> snr(-5.0, 25.0);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const int K = size(rng), L = size(rng), M = std::max(K, size(rng));
    const ChannelSet ch = random_channels(M, K, L, rng);
    const PowerAllocation alpha = allocate_power(ch);
    const LinkContext ctx{ch, alpha, 1.0};
    const Precoder P = random_precoder(M, K, std::pow(10.0, snr(rng) / 10.0), rng);
    const RateReport rep = rate_report(ctx, P);
    const MseSet ms = mmse_set(ctx, P);
    for_each_pair(K, L, [&](int k, int i, int l) {
      const double a = alpha(k, l);
      const double e = ms.eps_pair(k, i, l);
      worst = std::max({worst, std::abs(e - a / (1.0 + sinr(ctx, P, k, i, l))),
                        std::abs(rep.R_pair(k, i, l) - std::log(a / e)),
                        std::abs(ms.xi_pair(k, i, l) - (1.0 - rep.R_pair(k, i, l)))});
    });
  }
  const double t = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof buf, "rate-MSE identities, 1000 instances: worst %.2e (tol 1e-10), %.2f s (limit 10 s)",
                worst, t);
  return {1, worst < 1e-10 && t < 10.0, buf};
}

Line criterion2() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> size(1, 4);
  double fd = 0.0, eq = 0.0;
  auto rel = [](const CVector& a, const CVector& b) {
    return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm()));
  };
  for (int n = 0; n < 200; ++n) {
    const int K = size(rng), L = size(rng), M = std::max(K, size(rng));
    const ChannelSet ch = random_channels(M, K, L, rng, 0.3);
    const PowerAllocation alpha = allocate_power(ch);
    const LinkContext ctx{ch, alpha, 1.0};
    const Precoder P = random_precoder(M, K, std::pow(10.0, size(rng) / 2.0), rng);
    const FMultipliers m = sample_multipliers(K, L, rng);
    const PairArray<double> b = mmse_set(ctx, P).b;
    auto f = [&](const Precoder& Q) { return lagrangian_f_part(ctx, Q, m); };
    auto g = [&](const Precoder& Q) { return lagrangian_g_part(ctx, Q, b, m); };
    const EquivalenceProbe probe = equivalence_probe(ctx, P, rng);
    for (int k = 0; k < K; ++k) {
      fd = std::max({fd, rel(grad_f(ctx, P, m, k), fd_gradient(f, P, k)),
                     rel(grad_g(ctx, P, b, m, k), fd_gradient(g, P, k))});
      eq = std::max(eq, (probe.grad_f[k] - probe.grad_g[k]).norm() /
                            std::max(1.0, probe.grad_f[k].norm()));
    }
  }
  const double t = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "gradient oracle, 200 instances: FD rel %.2e (tol 1e-5), f/g gap %.2e (tol 1e-9), "
                "%.2f s (limit 60 s)",
                fd, eq, t);
  return {2, fd < 1e-5 && eq < 1e-9 && t < 60.0, buf};
}

Line criterion3() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> size(1, 4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  double stat = 0.0, balance = 0.0;
  for (int n = 0; n < 200; ++n) {
    const int K = size(rng), L = size(rng), M = std::max(K, size(rng));
    const ChannelSet ch = random_channels(M, K, L, rng, 0.3);
    const PowerAllocation alpha = allocate_power(ch);
    const LinkContext ctx{ch, alpha, 1.0};
    const double E = std::pow(10.0, size(rng) / 2.0);
    OptimizerState st;
    st.P = random_precoder(M, K, E, rng);
    const MseSet ms = mmse_set(ctx, st.P);
    st.V = ms.V;
    st.b = ms.b;
    st.eps = ms.eps_pair;
    st.eta = PairArray<double>(K, L);
    for_each_pair(K, L, [&](int k, int i, int l) { st.eta(k, i, l) = u(rng); });
    st.beta = compute_beta(ctx, st, E);
    st.P_update = update_precoder(ctx, st).P;
    stat = std::max(stat, stationarity_residual_h(ctx, st).total());
    balance = std::max(balance, trace_balance_gap(ctx, st));
  }
  const double t = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "fixed-point construction, 200 instances: stationarity %.2e (tol 1e-8), "
                "trace balance %.2e (tol 1e-9), %.2f s (limit 30 s)",
                stat, balance, t);
  return {3, stat < 1e-8 && balance < 1e-9 && t < 30.0, buf};
}

struct Qos {
  long runs = 0;
  long feasible = 0;
  double worst_margin_bits = 1e300;

  // Feasible means the solver did not declare the run infeasible; the margin is
  // then checked on its own rather than through the solver's QoS flag.
  void add(Termination t, double margin_bits) {
    ++runs;
    if (t == Termination::kInfeasible) return;
    ++feasible;
    worst_margin_bits = std::min(worst_margin_bits, margin_bits);
  }
};

double margin_bits(const UserArray<double>& R_user, const UserArray<double>& r_th) {
  double m = 1e300;
  for (int k = 0; k < R_user.clusters(); ++k) {
    for (int l = 0; l < R_user.users(); ++l) m = std::min(m, R_user(k, l) - r_th(k, l));
  }
  return nats_to_bits(m);
}

Line criterion5(Qos& qos) {
  const auto t0 = Clock::now();
  const SystemConfig cfg = SystemConfig::make(4, 4, 2, 10.0, 0.2);
  const ChannelSet ch = generate_channels(cfg, 0, UniformDisk{});
  const PowerAllocation alpha = allocate_power(ch);
  std::vector<double> finals;
  bool terminated = true;
  std::string detail;
  for (const auto& s : {InitStrategy::scaled_identity(), InitStrategy::svd(), InitStrategy::random(0)}) {
    const ConvergenceReport rep = run(ch, alpha, cfg, s, tallied());
    terminated &= rep.terminated_by == Termination::kPrecoderTol && rep.iterations <= 200;
    finals.push_back(nats_to_bits(rep.final_report.mmf));
    qos.add(rep.terminated_by, margin_bits(rep.final_report.R_user, cfg.r_th));
    char part[96];
    std::snprintf(part, sizeof part, " %s %.3f bits/%d it/%s;", to_string(s.kind).c_str(), finals.back(),
                  rep.iterations, to_string(rep.terminated_by).c_str());
    detail += part;
  }
  const double spread = *std::max_element(finals.begin(), finals.end()) -
                        *std::min_element(finals.begin(), finals.end());
  const double t = seconds_since(t0);
  char buf[512];
  std::snprintf(buf, sizeof buf, "convergence from three starts:%s spread %.4f bits (tol 0.05), %.1f s (limit 120 s)",
                detail.c_str(), spread, t);
  return {5, terminated && spread <= 0.05 && t < 120.0, buf};
}

std::map<std::pair<Scheme, double>, AggregateRow> by_key(const ExperimentResult& r) {
  std::map<std::pair<Scheme, double>, AggregateRow> out;
  for (const auto& a : r.aggregate) out[{a.scheme, a.value}] = a;
  return out;
}

void tally_rows(const ExperimentResult& r, Qos& qos) {
  for (const auto& row : r.rows) qos.add(row.terminated_by, row.min_user_margin_bits);
}

Line criterion6(Qos& qos) {
  const auto t0 = Clock::now();
  const auto spec = parse_spec(R"({"M": 4, "K": 4, "L": 2, "r_th": 0.2, "trials": 30, "seed": 1,
                                   "schemes": ["noma", "oma", "mulp"], "sweep": "snr_db", "values": [20]})");
  const auto res = run_experiment(spec, worker_count());
  tally_rows(res, qos);
  auto a = by_key(res);
  const double noma = a[{Scheme::kNoma, 20.0}].mean_bits;
  const double oma = a[{Scheme::kOma, 20.0}].mean_bits;
  const double mulp = a[{Scheme::kMulp, 20.0}].mean_bits;
  const double t = seconds_since(t0);
  const bool pass = noma > oma && oma > mulp && noma - mulp >= 1.5 && t < 1800.0;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "scheme ordering at 20 dB, 30 paired trials: NOMA %.3f, OMA %.3f, MULP %.3f bits "
                "(need NOMA > OMA > MULP and NOMA - MULP >= 1.5; reference 6 / 5.8 / 3.4), "
                "NOMA > OMA %s, OMA > MULP %s, gap %.3f, %.0f s (limit 1800 s)",
                noma, oma, mulp, noma > oma ? "yes" : "no", oma > mulp ? "yes" : "no", noma - mulp, t);
  return {6, pass, buf};
}

Line criterion7(Qos& qos) {
  const auto t0 = Clock::now();
  const auto spec = parse_spec(R"({"M": 3, "K": 3, "L": 2, "snr_db": 15, "r_th": 0.2, "trials": 30,
                                   "seed": 1, "schemes": ["noma", "oma", "mulp"], "sweep": "L",
                                   "values": [2, 3]})");
  const auto res = run_experiment(spec, worker_count());
  tally_rows(res, qos);
  auto a = by_key(res);
  bool pass = true;
  std::string detail;
  for (Scheme s : spec.schemes) {
    const double two = a[{s, 2.0}].mean_bits, three = a[{s, 3.0}].mean_bits;
    pass &= three < two;
    char part[96];
    std::snprintf(part, sizeof part, " %s %.3f -> %.3f%s;", to_string(s).c_str(), two, three,
                  three < two ? "" : " (not lower)");
    detail += part;
  }
  const double t = seconds_since(t0);
  pass &= t < 1800.0;
  char buf[512];
  std::snprintf(buf, sizeof buf, "cluster size L = 2 -> 3 at 15 dB, 30 paired trials, bits:%s %.0f s (limit 1800 s)",
                detail.c_str(), t);
  return {7, pass, buf};
}

Line criterion8(Qos& qos) {
  const auto t0 = Clock::now();
  const auto spec = parse_spec(R"({"M": 2, "K": 2, "L": 2, "snr_db": 10, "r_th": 0.2, "trials": 30,
                                   "seed": 1, "schemes": ["noma", "oma", "mulp"], "sweep": "d_inner",
                                   "values": [0.2, 0.5, 0.9]})");
  const auto res = run_experiment(spec, worker_count());
  tally_rows(res, qos);
  auto a = by_key(res);
  bool pass = true;
  std::string detail;
  double prev = 1e300;
  for (double d : spec.values) {
    const double m = a[{Scheme::kNoma, d}].mean_bits;
    pass &= m <= prev;
    prev = m;
    char part[48];
    std::snprintf(part, sizeof part, " d=%.1f %.3f;", d, m);
    detail += part;
  }
  const double t = seconds_since(t0);
  pass &= t < 900.0;
  char buf[512];
  std::snprintf(buf, sizeof buf, "NOMA vs near-user radius, 30 paired trials, bits:%s nonincreasing %s, %.0f s (limit 900 s)",
                detail.c_str(), pass ? "yes" : "no", t);
  return {8, pass, buf};
}

Line criterion9() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 2);
  double worst = 1e300, best = -1e300;
  for (int n = 0; n < 20; ++n) {
    const int K = size(rng), L = size(rng), M = std::max(K, size(rng));
    const SystemConfig cfg = SystemConfig::make(M, K, L, 10.0, 0.0);
    const ChannelSet ch = generate_channels(cfg, 1000 + n, UniformDisk{});
    const BruteForceResult bf = brute_force_mmf(ch, cfg, 64);
    const ConvergenceReport rep = run(ch, allocate_power(ch), cfg, InitStrategy::svd(), tallied());
    const double gap = rep.final_report.mmf - bf.mmf;
    worst = std::min(worst, gap);
    best = std::max(best, gap);
  }
  const double t = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "small-instance oracle, 20 instances: algorithm - grid in [%+.4f, %+.4f] nats "
                "(need >= -0.05), %.1f s (limit 600 s)",
                worst, best, t);
  return {9, worst >= -0.05 && t < 600.0, buf};
}

Line criterion4() {
  // A further batch across sizes and both precoder paths, on top of the runs above.
  for (int s = 0; s < 40; ++s) {
    const int M = 2 + s % 3;
    const int K = std::min(M, 1 + (s / 3) % 3);
    const int L = 1 + (s / 5) % 3;
    const SystemConfig cfg = SystemConfig::make(M, K, L, 5.0 * (s % 4), 0.2);
    const ChannelSet ch = generate_channels(cfg, 500 + s, UniformDisk{});
    RunOptions opt = tallied();
    opt.literal_fixed_point = s % 2 == 1;
    run(ch, allocate_power(ch), cfg, InitStrategy::svd(), opt);
  }
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "multiplier invariants over %ld updates: worst simplex/consistency error %.2e (tol 1e-9), "
                "negative entries %s",
                g_tally.updates, g_tally.worst, g_tally.negative ? "yes" : "no");
  return {4, g_tally.worst < 1e-9 && !g_tally.negative && g_tally.updates > 0, buf};
}

Line criterion10(const Qos& qos) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "QoS on feasible runs of suites 5-8: %ld of %ld feasible, worst margin %+.6e bits (need >= -1e-3)",
                qos.feasible, qos.runs, qos.feasible ? qos.worst_margin_bits : 0.0);
  return {10, qos.feasible > 0 && qos.worst_margin_bits >= -1e-3, buf};
}

}  // namespace

int main() {
  std::vector<Line> lines;
  Qos qos;
  auto report = [&](Line l) {
    std::printf("[%s] %2d %s\n", l.pass ? "PASS" : "FAIL", l.id, l.text.c_str());
    std::fflush(stdout);
    lines.push_back(std::move(l));
  };
  report(criterion1());
  report(criterion2());
  report(criterion3());
  // Criterion 4 tallies the runs of 5 and 9, so it is reported after them.
  Line c5 = criterion5(qos);
  Line c6 = criterion6(qos);
  Line c7 = criterion7(qos);
  Line c8 = criterion8(qos);
  Line c9 = criterion9();
  report(criterion4());
  report(c5);
  report(c6);
  report(c7);
  report(c8);
  report(c9);
  report(criterion10(qos));

  const auto failed = std::count_if(lines.begin(), lines.end(), [](const Line& l) { return !l.pass; });
  std::printf("%zu criteria, %ld failed\n", lines.size(), static_cast<long>(failed));
  return failed == 0 ? 0 : 1;
}
