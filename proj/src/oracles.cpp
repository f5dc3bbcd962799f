#include "mmfnoma/oracles.hpp"

#include "mmfnoma/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mmfnoma {

namespace {

// Everything about one decoding pair, recomputed from scratch.
struct Link {
  CRowVector hP;  // h_{k,i} P
  double own;     // |h_{k,i} p_k|^2
  double sic;     // sum_{j > l} alpha_{k,j}
  double r;
  double eps;
  double rate;
};

Link link(const LinkContext& ctx, const Precoder& P, int k, int i, int l) {
  Link s{};
  s.hP = ctx.channels.h(k, i) * P;
  s.own = std::norm(s.hP(k));
  for (int j = l + 1; j < ctx.channels.L(); ++j) s.sic += ctx.alpha(k, j);
  double inter = 0.0;
  for (int t = 0; t < ctx.channels.K(); ++t) {
    if (t != k) inter += std::norm(s.hP(t));
  }
  s.r = s.sic * s.own + inter + ctx.noise(k, i);
  const double a = ctx.alpha(k, l);
  const double gamma = a * s.own / s.r;
  s.eps = a / (1.0 + gamma);
  s.rate = std::log1p(gamma);
  return s;
}

// Shared body of the two gradients: coeff(k, i, l) multiplies the rate
// gradient that enters with a minus sign.
template <class Coeff>
CVector rate_lagrangian_gradient(const LinkContext& ctx, const Precoder& P, double lambda, int k,
                                 Coeff coeff) {
  const auto& ch = ctx.channels;
  if (k < 0 || k >= ch.K()) throw std::out_of_range("gradient: cluster index out of range");
  const CVector pk = P.col(k);
  CVector g = lambda * pk;
  for_each_pair(ch.K(), ch.L(), [&](int t, int i, int l) {
    const double c = coeff(t, i, l);
    if (c == 0.0) return;
    const Link s = link(ctx, P, t, i, l);
    const CRowVector& h = ch.h(t, i);
    const cd hpk = s.hP(k);
    const CVector Gp = h.adjoint() * hpk;  // h^H h p_k
    if (t == k) {
      g -= c * s.eps * (1.0 / s.r - s.sic * s.own / (s.r * s.r)) * Gp;
    } else {
      g += c * s.eps * std::norm(s.hP(t)) / (s.r * s.r) * Gp;
    }
  });
  return g;
}

double soft_min(const std::vector<double>& v, double tau) {
  const double lo = *std::min_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(-tau * (x - lo));
  return lo - std::log(acc) / tau;
}

// MMF (nats) with QoS: a met threshold set scores the min cluster rate, a
// violated one scores minus the worst shortfall.
struct Score {
  double value;
  bool feasible;
};

Score mmf_score(const LinkContext& ctx, const Precoder& P, const SystemConfig& cfg) {
  const auto& ch = ctx.channels;
  double worst_cluster = std::numeric_limits<double>::infinity();
  double shortfall = 0.0;
  for (int k = 0; k < ch.K(); ++k) {
    double sum = 0.0;
    for (int l = 0; l < ch.L(); ++l) {
      double R = std::numeric_limits<double>::infinity();
      for (int i = l; i < ch.L(); ++i) R = std::min(R, link(ctx, P, k, i, l).rate);
      sum += R;
      shortfall = std::max(shortfall, cfg.r_th(k, l) - R);
    }
    worst_cluster = std::min(worst_cluster, sum);
  }
  if (shortfall <= cfg.qos_tol) return {worst_cluster, true};
  return {-shortfall, false};
}

// Column k at fraction s of the power, direction (phi, omega) for M = 2.
Precoder build_precoder(int M, int K, double E, const std::vector<double>& x) {
  Precoder P = Precoder::Zero(M, K);
  double split = 1.0;
  std::size_t idx = 0;
  std::vector<double> angles;
  for (int k = 0; k < K; ++k) {
    if (M == 2) {
      angles.push_back(x[idx++]);
      angles.push_back(x[idx++]);
    }
  }
  if (K == 2) split = std::clamp(x[idx], 0.0, 1.0);
  for (int k = 0; k < K; ++k) {
    const double share = K == 1 ? 1.0 : (k == 0 ? split : 1.0 - split);
    const double amp = std::sqrt(E * share);
    if (M == 1) {
      P(0, k) = amp;
    } else {
      const double phi = angles[2 * k];
      const double omega = angles[2 * k + 1];
      P(0, k) = amp * std::cos(phi);
      P(1, k) = amp * std::sin(phi) * std::polar(1.0, omega);
    }
  }
  return P;
}

std::vector<double> to_coords(const Precoder& P) {
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(2 * P.size()));
  for (Eigen::Index c = 0; c < P.cols(); ++c) {
    for (Eigen::Index m = 0; m < P.rows(); ++m) {
      x.push_back(P(m, c).real());
      x.push_back(P(m, c).imag());
    }
  }
  return x;
}

Precoder from_coords(const std::vector<double>& x, int M, int cols) {
  Precoder P(M, cols);
  std::size_t idx = 0;
  for (int c = 0; c < cols; ++c) {
    for (int m = 0; m < M; ++m) {
      P(m, c) = cd(x[idx], x[idx + 1]);
      idx += 2;
    }
  }
  return P;
}

void project_ball(std::vector<double>& x, double E) {
  double n2 = 0.0;
  for (double v : x) n2 += v * v;
  if (n2 > E) {
    const double s = std::sqrt(E / n2);
    for (double& v : x) v *= s;
  }
}

}  // namespace

ChannelSet random_channels(int M, int K, int L, std::mt19937_64& rng, double d_min) {
  if (M < 1 || K < 1 || L < 1) throw std::invalid_argument("random_channels: sizes must be positive");
  if (!(d_min > 0.0 && d_min <= 1.0)) throw std::invalid_argument("random_channels: bad d_min");
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<UserDraw>> clusters(K);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      CRowVector raw(M);
      for (int m = 0; m < M; ++m) {
        const double re = normal(rng);
        raw(m) = cd(re, normal(rng));
      }
      const double d = std::sqrt(d_min * d_min + unit(rng) * (1.0 - d_min * d_min));
      clusters[k].push_back({raw, d});
    }
  }
  return ChannelSet::from_clusters(M, 4.0, std::move(clusters));
}

Precoder random_precoder(int M, int K, double E_tx, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Precoder P(M, K);
  for (int c = 0; c < K; ++c) {
    for (int m = 0; m < M; ++m) {
      const double re = normal(rng);
      P(m, c) = cd(re, normal(rng));
    }
  }
  return scale_to_power(P, E_tx);
}

CVector grad_f(const LinkContext& ctx, const Precoder& P, const FMultipliers& m, int k) {
  return rate_lagrangian_gradient(ctx, P, m.lambda, k,
                                  [&](int t, int i, int l) { return m.psi(t, i, l); });
}

CVector grad_g(const LinkContext& ctx, const Precoder& P, const PairArray<double>& b,
               const GMultipliers& m, int k) {
  // d(b * eps) = -b * eps * dR, so every psi picks up the factor b * eps.
  return rate_lagrangian_gradient(ctx, P, m.lambda, k, [&](int t, int i, int l) {
    const double psi = m.psi(t, i, l);
    if (psi == 0.0) return 0.0;
    return psi * b(t, i, l) * link(ctx, P, t, i, l).eps;
  });
}

double lagrangian_f_part(const LinkContext& ctx, const Precoder& P, const FMultipliers& m) {
  double v = m.lambda * P.squaredNorm();
  for_each_pair(ctx.channels.K(), ctx.channels.L(), [&](int k, int i, int l) {
    v -= m.psi(k, i, l) * link(ctx, P, k, i, l).rate;
  });
  return v;
}

double lagrangian_g_part(const LinkContext& ctx, const Precoder& P, const PairArray<double>& b,
                         const GMultipliers& m) {
  double v = m.lambda * P.squaredNorm();
  for_each_pair(ctx.channels.K(), ctx.channels.L(), [&](int k, int i, int l) {
    const double bb = b(k, i, l);
    v += m.psi(k, i, l) * (bb * link(ctx, P, k, i, l).eps - std::log(ctx.alpha(k, l) * bb));
  });
  return v;
}

CVector fd_gradient(const std::function<double(const Precoder&)>& fn, const Precoder& P, int k,
                    double step) {
  CVector g(P.rows());
  Precoder Q = P;
  for (Eigen::Index m = 0; m < P.rows(); ++m) {
    const cd base = P(m, k);
    Q(m, k) = base + step;
    const double xp = fn(Q);
    Q(m, k) = base - step;
    const double xm = fn(Q);
    Q(m, k) = base + cd(0.0, step);
    const double yp = fn(Q);
    Q(m, k) = base - cd(0.0, step);
    const double ym = fn(Q);
    Q(m, k) = base;
    g(m) = 0.5 * cd((xp - xm) / (2.0 * step), (yp - ym) / (2.0 * step));
  }
  return g;
}

FMultipliers sample_multipliers(int K, int L, std::mt19937_64& rng) {
  // (0, 1]: flip the half-open [0, 1) interval.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] { return 1.0 - unit(rng); };
  FMultipliers m;
  m.mu.resize(K);
  double total = 0.0;
  for (double& v : m.mu) total += (v = draw());
  for (double& v : m.mu) v /= total;
  m.kappa = UserArray<double>(K, L);
  m.psi = PairArray<double>(K, L);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      m.kappa(k, l) = draw();
      double s = 0.0;
      for (int i = l; i < L; ++i) s += (m.psi(k, i, l) = draw());
      const double target = m.mu[k] + m.kappa(k, l);
      for (int i = l; i < L; ++i) m.psi(k, i, l) *= target / s;
    }
  }
  m.lambda = draw();
  return m;
}

EquivalenceProbe equivalence_probe(const LinkContext& ctx, const Precoder& P,
                                   std::mt19937_64& rng) {
  const auto& ch = ctx.channels;
  EquivalenceProbe probe;
  probe.multipliers_f = sample_multipliers(ch.K(), ch.L(), rng);
  probe.multipliers_g = probe.multipliers_f;
  PairArray<double> b(ch.K(), ch.L());
  for_each_pair(ch.K(), ch.L(), [&](int k, int i, int l) {
    b(k, i, l) = 1.0 / link(ctx, P, k, i, l).eps;
  });
  for (int k = 0; k < ch.K(); ++k) {
    probe.grad_f.push_back(grad_f(ctx, P, probe.multipliers_f, k));
    probe.grad_g.push_back(grad_g(ctx, P, b, probe.multipliers_g, k));
  }
  return probe;
}

StationarityResidual stationarity_residual_h(const LinkContext& ctx, const OptimizerState& state) {
  const auto& ch = ctx.channels;
  const int K = ch.K();
  const int L = ch.L();
  StationarityResidual res;

  // Receivers: alpha_l conj(h p_k) = (sum_{j >= l} alpha_j |h p_k|^2 + inter + noise) V.
  for_each_pair(K, L, [&](int k, int i, int l) {
    const CRowVector hP = ch.h(k, i) * state.P;
    double superposed = 0.0;
    for (int j = l; j < L; ++j) superposed += ctx.alpha(k, j);
    double total = superposed * std::norm(hP(k)) + ctx.noise(k, i);
    for (int t = 0; t < K; ++t) {
      if (t != k) total += std::norm(hP(t));
    }
    const cd lhs = ctx.alpha(k, l) * std::conj(hP(k));
    res.receiver = std::max(res.receiver, std::abs(lhs - total * state.V(k, i, l)));
  });

  // Precoders, evaluated at the update.
  for (int k = 0; k < K; ++k) {
    const CVector pk = state.P_update.col(k);
    CVector diff = -state.beta * pk;
    for_each_pair(K, L, [&](int t, int i, int l) {
      const CRowVector& h = ch.h(t, i);
      const double w = state.eta(t, i, l) * state.b(t, i, l);
      if (w == 0.0) return;
      const cd hp = (h * pk)(0);
      if (t == k) {
        double superposed = 0.0;
        for (int j = l; j < L; ++j) superposed += ctx.alpha(k, j);
        diff += w * ctx.alpha(k, l) * std::conj(state.V(t, i, l)) * h.adjoint();
        diff -= w * superposed * std::norm(state.V(t, i, l)) * hp * h.adjoint();
      } else {
        diff -= w * std::norm(state.V(t, i, l)) * hp * h.adjoint();
      }
    });
    res.precoder = std::max(res.precoder, diff.norm());
  }
  return res;
}

double trace_balance_gap(const LinkContext& ctx, const OptimizerState& state) {
  const auto& ch = ctx.channels;
  const int K = ch.K();
  const int L = ch.L();
  // Receiver side: sum eta b |V|^2 (superposed + inter + noise) at state.P.
  double receiver_side = 0.0;
  for_each_pair(K, L, [&](int k, int i, int l) {
    const CRowVector hP = ch.h(k, i) * state.P;
    double superposed = 0.0;
    for (int j = l; j < L; ++j) superposed += ctx.alpha(k, j);
    double total = superposed * std::norm(hP(k)) + ctx.noise(k, i);
    for (int t = 0; t < K; ++t) {
      if (t != k) total += std::norm(hP(t));
    }
    receiver_side += state.eta(k, i, l) * state.b(k, i, l) * std::norm(state.V(k, i, l)) * total;
  });
  // Precoder side without beta: sum_k p_k^H A_k p_k.
  double precoder_side = 0.0;
  for (int k = 0; k < K; ++k) {
    const CVector pk = state.P.col(k);
    for_each_pair(K, L, [&](int t, int i, int l) {
      const double w = state.eta(t, i, l) * state.b(t, i, l) * std::norm(state.V(t, i, l));
      if (w == 0.0) return;
      double scale = 1.0;
      if (t == k) {
        scale = 0.0;
        for (int j = l; j < L; ++j) scale += ctx.alpha(k, j);
      }
      precoder_side += w * scale * std::norm((ch.h(t, i) * pk)(0));
    });
  }
  const double power = state.P.squaredNorm();
  if (power == 0.0) return std::abs(state.beta);
  const double balanced = (receiver_side - precoder_side) / power;
  return std::abs(state.beta - balanced) / std::max(1.0, std::abs(balanced));
}

double beta_reference(const LinkContext& ctx, const OptimizerState& state, double E_tx) {
  double acc = 0.0;
  for (int k = 0; k < ctx.channels.K(); ++k) {
    for (int l = 0; l < ctx.channels.L(); ++l) {
      for (int i = l; i < ctx.channels.L(); ++i) {
        acc += state.eta(k, i, l) * state.b(k, i, l) * std::norm(state.V(k, i, l)) *
               ctx.noise(k, i);
      }
    }
  }
  return acc / E_tx;
}

BruteForceResult brute_force_mmf(const ChannelSet& channels, const SystemConfig& cfg,
                                 int grid_resolution) {
  const int M = channels.M();
  const int K = channels.K();
  const int L = channels.L();
  if (M > 2 || K > 2 || L > 2) throw std::invalid_argument("brute_force_mmf: needs M, K, L <= 2");
  if (grid_resolution < 2) throw std::invalid_argument("brute_force_mmf: resolution must be >= 2");
  if (cfg.K != K || cfg.L != L) throw std::invalid_argument("brute_force_mmf: config/channel mismatch");
  const PowerAllocation alpha = allocate_power(channels);
  const LinkContext ctx{channels, alpha, cfg.sigma2};
  const double E = cfg.E_tx;

  // Axis ranges: phi in [0, pi/2], omega in [0, 2 pi), split in [0, 1].
  std::vector<double> lo, hi;
  std::vector<bool> periodic;
  for (int k = 0; k < K && M == 2; ++k) {
    lo.push_back(0.0), hi.push_back(std::numbers::pi / 2), periodic.push_back(false);
    lo.push_back(0.0), hi.push_back(2 * std::numbers::pi), periodic.push_back(true);
  }
  if (K == 2) lo.push_back(0.0), hi.push_back(1.0), periodic.push_back(false);
  const int dims = static_cast<int>(lo.size());

  BruteForceResult best;
  best.mmf = -std::numeric_limits<double>::infinity();
  if (dims == 0) {
    best.P = build_precoder(M, K, E, {});
    const Score s = mmf_score(ctx, best.P, cfg);
    best.mmf = s.value;
    best.feasible = s.feasible;
    return best;
  }

  // Keep the full grid affordable: at most ~2e6 points.
  int n = grid_resolution;
  while (n > 2 && std::pow(static_cast<double>(n), dims) > 2e6) --n;

  struct Candidate {
    double score;
    std::vector<double> x;
  };
  std::vector<Candidate> top;
  const std::size_t keep = 8;
  std::vector<int> idx(dims, 0);
  std::vector<double> x(dims);
  while (true) {
    for (int d = 0; d < dims; ++d) {
      const double span = hi[d] - lo[d];
      x[d] = lo[d] + span * (periodic[d] ? static_cast<double>(idx[d]) / n
                                         : static_cast<double>(idx[d]) / (n - 1));
    }
    const double s = mmf_score(ctx, build_precoder(M, K, E, x), cfg).value;
    if (top.size() < keep || s > top.back().score) {
      top.push_back({s, x});
      std::sort(top.begin(), top.end(), [](const Candidate& a, const Candidate& b) {
        return a.score > b.score;
      });
      if (top.size() > keep) top.pop_back();
    }
    int d = 0;
    while (d < dims && ++idx[d] == n) idx[d++] = 0;
    if (d == dims) break;
  }

  // Pattern search from each kept grid point.
  for (Candidate c : top) {
    std::vector<double> step(dims);
    for (int d = 0; d < dims; ++d) step[d] = (hi[d] - lo[d]) / n;
    double cur = c.score;
    while (*std::max_element(step.begin(), step.end()) > 1e-9) {
      bool moved = false;
      for (int d = 0; d < dims; ++d) {
        for (double sign : {1.0, -1.0}) {
          std::vector<double> y = c.x;
          y[d] += sign * step[d];
          if (!periodic[d]) y[d] = std::clamp(y[d], lo[d], hi[d]);
          const double s = mmf_score(ctx, build_precoder(M, K, E, y), cfg).value;
          if (s > cur + 1e-15) {
            cur = s;
            c.x = y;
            moved = true;
          }
        }
      }
      if (!moved) {
        for (double& s : step) s *= 0.5;
      }
    }
    if (cur > best.mmf) {
      best.mmf = cur;
      best.P = build_precoder(M, K, E, c.x);
    }
  }
  best.feasible = mmf_score(ctx, best.P, cfg).feasible;
  return best;
}

PgaResult pga_maxmin(const std::function<std::vector<double>(const Precoder&)>& rate_fn, int M,
                     int cols, double E_tx, int starts, std::uint64_t seed) {
  if (starts < 1) throw std::invalid_argument("pga_maxmin: need at least one start");
  std::mt19937_64 rng(seed);
  auto true_min = [&](const Precoder& P) {
    const auto r = rate_fn(P);
    return *std::min_element(r.begin(), r.end());
  };
  PgaResult best;
  best.min_rate = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < starts; ++s) {
    std::vector<double> x = to_coords(random_precoder(M, cols, E_tx, rng));
    for (double tau : {5.0, 20.0, 100.0, 500.0, 2000.0}) {
      auto objective = [&](const std::vector<double>& y) {
        return soft_min(rate_fn(from_coords(y, M, cols)), tau);
      };
      double f = objective(x);
      double lr = 1.0;
      for (int it = 0; it < 300; ++it) {
        std::vector<double> g(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) {
          const double h = 1e-6 * std::max(1.0, std::abs(x[d]));
          std::vector<double> y = x;
          y[d] = x[d] + h;
          const double fp = objective(y);
          y[d] = x[d] - h;
          g[d] = (fp - objective(y)) / (2 * h);
        }
        bool improved = false;
        for (int bt = 0; bt < 40; ++bt) {
          std::vector<double> y = x;
          for (std::size_t d = 0; d < x.size(); ++d) y[d] += lr * g[d];
          project_ball(y, E_tx);
          const double fy = objective(y);
          if (fy > f) {
            x = y;
            f = fy;
            improved = true;
            lr *= 2.0;
            break;
          }
          lr *= 0.5;
        }
        if (!improved) break;
      }
    }
    const Precoder P = from_coords(x, M, cols);
    const double v = true_min(P);
    if (v > best.min_rate) {
      best.min_rate = v;
      best.P = P;
    }
  }
  return best;
}

PgaResult pga_oma_slot(const ChannelSet& channels, int l, double E_tx, double sigma2, int starts,
                       std::uint64_t seed) {
  const int K = channels.K();
  auto rates = [&](const Precoder& P) {
    std::vector<double> r(K);
    for (int k = 0; k < K; ++k) r[k] = oma_rate(channels, P, k, l, sigma2);
    return r;
  };
  return pga_maxmin(rates, channels.M(), K, E_tx, starts, seed);
}

PgaResult pga_mulp_block(const ChannelSet& channels, const Precoder& P_full, int l,
                         double block_power, double sigma2, int starts, std::uint64_t seed) {
  const int K = channels.K();
  const int L = channels.L();
  auto rates = [&](const Precoder& block) {
    Precoder full = P_full;
    for (int k = 0; k < K; ++k) full.col(k * L + l) = block.col(k);
    std::vector<double> r(K);
    for (int k = 0; k < K; ++k) r[k] = std::log1p(mulp_sinr(channels, full, k, l, sigma2));
    return r;
  };
  return pga_maxmin(rates, channels.M(), K, block_power, starts, seed);
}

std::vector<VerifyRow> verify_suite(std::uint64_t seed, int instances) {
  if (instances < 1) throw std::invalid_argument("verify_suite: instances must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(1, 4);
  std::uniform_real_distribution<double> snr(0.0, 20.0);

  VerifyRow identity{"rate/mse identities", 0.0, 1e-10, false};
  VerifyRow fd_f{"grad_f vs finite differences (rel)", 0.0, 1e-5, false};
  VerifyRow fd_g{"grad_g vs finite differences (rel)", 0.0, 1e-5, false};
  VerifyRow equiv{"grad_f = grad_g under b = 1/eps", 0.0, 1e-9, false};
  VerifyRow stat{"stationarity residual of built states", 0.0, 1e-8, false};
  VerifyRow balance{"trace balance", 0.0, 1e-9, false};

  for (int n = 0; n < instances; ++n) {
    const int M = size(rng), K = size(rng), L = size(rng);
    const ChannelSet ch = random_channels(M, K, L, rng, 0.3);
    const PowerAllocation alpha = allocate_power(ch);
    const LinkContext ctx{ch, alpha, 1.0};
    const double E = std::pow(10.0, snr(rng) / 10.0);
    const Precoder P = random_precoder(M, K, E, rng);

    const MseSet ms = mmse_set(ctx, P);
    for_each_pair(K, L, [&](int k, int i, int l) {
      const Link s = link(ctx, P, k, i, l);
      identity.worst = std::max({identity.worst, std::abs(ms.eps_pair(k, i, l) - s.eps),
                                 std::abs(s.rate - std::log(alpha(k, l) / s.eps)),
                                 std::abs(ms.xi_pair(k, i, l) - (1.0 - s.rate))});
    });

    const EquivalenceProbe probe = equivalence_probe(ctx, P, rng);
    PairArray<double> b(K, L);
    for_each_pair(K, L, [&](int k, int i, int l) { b(k, i, l) = 1.0 / link(ctx, P, k, i, l).eps; });
    auto f_fn = [&](const Precoder& Q) { return lagrangian_f_part(ctx, Q, probe.multipliers_f); };
    auto g_fn = [&](const Precoder& Q) {
      return lagrangian_g_part(ctx, Q, b, probe.multipliers_g);
    };
    for (int k = 0; k < K; ++k) {
      const CVector nf = fd_gradient(f_fn, P, k);
      const CVector ng = fd_gradient(g_fn, P, k);
      fd_f.worst = std::max(fd_f.worst, (nf - probe.grad_f[k]).norm() /
                                            std::max(probe.grad_f[k].norm(), 1e-12));
      fd_g.worst = std::max(fd_g.worst, (ng - probe.grad_g[k]).norm() /
                                            std::max(probe.grad_g[k].norm(), 1e-12));
      equiv.worst = std::max(equiv.worst, (probe.grad_f[k] - probe.grad_g[k]).norm() /
                                              std::max(1.0, probe.grad_f[k].norm()));
    }

    OptimizerState state;
    state.P = P;
    state.V = ms.V;
    state.b = ms.b;
    state.eps = ms.eps_pair;
    state.eta = PairArray<double>(K, L);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for_each_pair(K, L, [&](int k, int i, int l) { state.eta(k, i, l) = 1.0 - unit(rng); });
    state.beta = compute_beta(ctx, state, E);
    state.P_update = update_precoder(ctx, state).P;
    stat.worst = std::max(stat.worst, stationarity_residual_h(ctx, state).total());
    balance.worst = std::max({balance.worst, trace_balance_gap(ctx, state),
                              std::abs(state.beta - beta_reference(ctx, state, E)) /
                                  std::max(1.0, state.beta)});
  }

  std::vector<VerifyRow> rows{identity, fd_f, fd_g, equiv, stat, balance};
  for (auto& r : rows) r.passed = r.worst < r.tolerance;
  return rows;
}

}  // namespace mmfnoma
