#include "mmfnoma/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace mmfnoma {

namespace {

void check_pair(const LinkContext& ctx, const Precoder& P, int k, int i, int l) {
  const auto& ch = ctx.channels;
  if (P.rows() != ch.M() || P.cols() != ch.K()) {
    throw std::invalid_argument("precoder must be M x K");
  }
  if (k < 0 || k >= ch.K() || l < 0 || i >= ch.L()) {
    throw std::out_of_range("pair index out of range");
  }
  if (i < l) throw std::invalid_argument("decoder index i must be >= message index l (SIC order)");
}

// Link terms of pair (k, i, l) given the row h_{k,i} P.
struct PairTerms {
  double own_gain;  // |h_{k,i} p_k|^2
  cd own_amp;       // h_{k,i} p_k
  double r;         // effective noise
  double T;         // total received power seen by the receiver
};

PairTerms pair_terms(const LinkContext& ctx, const CRowVector& hP, int k, int i, int l) {
  const int K = ctx.channels.K();
  const int L = ctx.channels.L();
  PairTerms t{};
  t.own_amp = hP(k);
  t.own_gain = std::norm(hP(k));
  double intra = 0.0;
  for (int j = l + 1; j < L; ++j) intra += ctx.alpha(k, j);
  double inter = 0.0;
  for (int s = 0; s < K; ++s) {
    if (s != k) inter += std::norm(hP(s));
  }
  t.r = intra * t.own_gain + inter + ctx.noise(k, i);
  t.T = t.own_gain * ctx.alpha(k, l) + t.r;
  return t;
}

PairTerms pair_terms(const LinkContext& ctx, const Precoder& P, int k, int i, int l) {
  check_pair(ctx, P, k, i, l);
  const CRowVector hP = ctx.channels.h(k, i) * P;
  return pair_terms(ctx, hP, k, i, l);
}

}  // namespace

double effective_noise(const LinkContext& ctx, const Precoder& P, int k, int i, int l) {
  return pair_terms(ctx, P, k, i, l).r;
}

double sinr(const LinkContext& ctx, const Precoder& P, int k, int i, int l) {
  const auto t = pair_terms(ctx, P, k, i, l);
  return ctx.alpha(k, l) * t.own_gain / t.r;
}

double rate_pair(const LinkContext& ctx, const Precoder& P, int k, int i, int l) {
  return std::log1p(sinr(ctx, P, k, i, l));
}

double mse(const LinkContext& ctx, const Precoder& P, cd V, int k, int i, int l) {
  const auto t = pair_terms(ctx, P, k, i, l);
  const double a = ctx.alpha(k, l);
  return std::norm(V) * t.T + a - 2.0 * std::real(a * V * t.own_amp);
}

cd mmse_receiver(const LinkContext& ctx, const Precoder& P, int k, int i, int l) {
  const auto t = pair_terms(ctx, P, k, i, l);
  return ctx.alpha(k, l) * std::conj(t.own_amp) / t.T;
}

double mmse_error(const LinkContext& ctx, const Precoder& P, int k, int i, int l) {
  const auto t = pair_terms(ctx, P, k, i, l);
  return 1.0 / (1.0 / ctx.alpha(k, l) + t.own_gain / t.r);
}

PairArray<double> weights_from_mmse(const PairArray<double>& eps_pair) {
  PairArray<double> b(eps_pair.clusters(), eps_pair.users());
  for_each_pair(eps_pair.clusters(), eps_pair.users(), [&](int k, int i, int l) {
    const double e = eps_pair(k, i, l);
    if (!(e > 0.0)) throw std::invalid_argument("weights_from_mmse: error variance must be positive");
    b(k, i, l) = 1.0 / e;
  });
  return b;
}

double augmented_wmse(const LinkContext& ctx, const Precoder& P, cd V, double b,
                      int k, int i, int l) {
  if (!(b > 0.0)) throw std::invalid_argument("augmented_wmse: weight must be positive");
  return b * mse(ctx, P, V, k, i, l) - std::log(ctx.alpha(k, l) * b);
}

UserArray<double> xi_user_from_pairs(const PairArray<double>& xi_pair) {
  const int K = xi_pair.clusters();
  const int L = xi_pair.users();
  UserArray<double> out(K, L);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      double worst = xi_pair(k, l, l);
      for (int i = l + 1; i < L; ++i) {
        if (xi_pair(k, i, l) > worst) worst = xi_pair(k, i, l);
      }
      out(k, l) = worst;
    }
  }
  return out;
}

MseSet mmse_set(const LinkContext& ctx, const Precoder& P) {
  const int K = ctx.channels.K();
  const int L = ctx.channels.L();
  if (P.rows() != ctx.channels.M() || P.cols() != K) {
    throw std::invalid_argument("precoder must be M x K");
  }
  MseSet s;
  s.eps_pair = PairArray<double>(K, L);
  s.V = PairArray<cd>(K, L);
  s.b = PairArray<double>(K, L);
  s.xi_pair = PairArray<double>(K, L);
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < L; ++i) {
      const CRowVector hP = ctx.channels.h(k, i) * P;
      for (int l = 0; l <= i; ++l) {
        const auto t = pair_terms(ctx, hP, k, i, l);
        const double a = ctx.alpha(k, l);
        const double eps = 1.0 / (1.0 / a + t.own_gain / t.r);
        s.V(k, i, l) = a * std::conj(t.own_amp) / t.T;
        s.eps_pair(k, i, l) = eps;
        s.b(k, i, l) = 1.0 / eps;
        s.xi_pair(k, i, l) = 1.0 - std::log(a / eps);
      }
    }
  }
  s.eps_user = xi_user_from_pairs(s.eps_pair);
  s.xi_user = xi_user_from_pairs(s.xi_pair);
  return s;
}

RateReport summarize_rates(PairArray<double> R_pair) {
  const int K = R_pair.clusters();
  const int L = R_pair.users();
  RateReport rep;
  rep.R_user = UserArray<double>(K, L);
  rep.R_cluster.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      double best = R_pair(k, l, l);
      for (int i = l + 1; i < L; ++i) {
        if (R_pair(k, i, l) < best) best = R_pair(k, i, l);
      }
      rep.R_user(k, l) = best;
      rep.R_cluster[k] += best;
    }
  }
  rep.argmin_cluster = 0;
  for (int k = 1; k < K; ++k) {
    if (rep.R_cluster[k] < rep.R_cluster[rep.argmin_cluster]) rep.argmin_cluster = k;
  }
  rep.mmf = K > 0 ? rep.R_cluster[rep.argmin_cluster] : 0.0;
  rep.R_pair = std::move(R_pair);
  return rep;
}

RateReport rate_report(const LinkContext& ctx, const Precoder& P) {
  const int K = ctx.channels.K();
  const int L = ctx.channels.L();
  if (P.rows() != ctx.channels.M() || P.cols() != K) {
    throw std::invalid_argument("precoder must be M x K");
  }
  PairArray<double> R(K, L);
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < L; ++i) {
      const CRowVector hP = ctx.channels.h(k, i) * P;
      for (int l = 0; l <= i; ++l) {
        const auto t = pair_terms(ctx, hP, k, i, l);
        R(k, i, l) = std::log1p(ctx.alpha(k, l) * t.own_gain / t.r);
      }
    }
  }
  return summarize_rates(std::move(R));
}

}  // namespace mmfnoma
