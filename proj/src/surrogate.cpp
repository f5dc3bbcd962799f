#include "mmfnoma/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmfnoma {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Real coordinates: column t of P occupies x[2Mt, 2Mt + 2M) as [Re p_t; Im p_t].
VectorXd to_real(const Precoder& P) {
  const int M = static_cast<int>(P.rows());
  VectorXd x(2 * P.size());
  for (int t = 0; t < P.cols(); ++t) {
    x.segment(2 * M * t, M) = P.col(t).real();
    x.segment(2 * M * t + M, M) = P.col(t).imag();
  }
  return x;
}

Precoder to_complex(const VectorXd& x, int M, int K) {
  Precoder P(M, K);
  for (int t = 0; t < K; ++t) {
    for (int m = 0; m < M; ++m) P(m, t) = cd(x(2 * M * t + m), x(2 * M * t + M + m));
  }
  return P;
}

// Re(h p) = a . x_t and Im(h p) = c . x_t.
struct Receiver {
  VectorXd a;
  VectorXd c;
};

Receiver receiver(const CRowVector& h) {
  const int M = static_cast<int>(h.size());
  Receiver r{VectorXd(2 * M), VectorXd(2 * M)};
  r.a << h.real().transpose(), -h.imag().transpose();
  r.c << h.imag().transpose(), h.real().transpose();
  return r;
}

double penalty(double nu, double z) {
  const double e = nu * z;
  if (e <= kGammaExponentCap) return std::exp(e) / nu;
  // Linear continuation keeps the function convex past the clamp.
  return std::exp(kGammaExponentCap) * (1.0 + e - kGammaExponentCap) / nu;
}

struct Evaluation {
  double value = 0.0;
  VectorXd grad;
  MatrixXd hess;
  PairArray<double> q;
  UserArray<double> S;
  Multipliers mult;
};

class Evaluator {
 public:
  explicit Evaluator(const SurrogateProblem& prob) : prob_(prob) {
    const auto& ch = prob.ctx.channels;
    M_ = ch.M();
    K_ = ch.K();
    L_ = ch.L();
    n_ = 2 * M_ * K_;
    rx_ = UserArray<Receiver>(K_, L_);
    for (int k = 0; k < K_; ++k) {
      for (int i = 0; i < L_; ++i) rx_(k, i) = receiver(ch.h(k, i));
    }
    if ((prob.selector_pair == nullptr) != (prob.selector_user == nullptr)) {
      throw std::invalid_argument("surrogate: selector_pair and selector_user go together");
    }
  }

  int dim() const { return n_; }
  int M() const { return M_; }
  int K() const { return K_; }

  Evaluation operator()(const VectorXd& x, bool with_hessian) const {
    const auto& ctx = prob_.ctx;
    const double nu = prob_.nu;
    const int m2 = 2 * M_;
    Evaluation ev;
    ev.q = PairArray<double>(K_, L_);
    PairArray<VectorXd> g(K_, L_);
    PairArray<double> s_own(K_, L_);  // b |V|^2, reused for the Hessian

    for (int k = 0; k < K_; ++k) {
      for (int i = 0; i < L_; ++i) {
        const Receiver& r = rx_(k, i);
        std::vector<double> re(K_), im(K_);
        for (int t = 0; t < K_; ++t) {
          re[t] = r.a.dot(x.segment(m2 * t, m2));
          im[t] = r.c.dot(x.segment(m2 * t, m2));
        }
        for (int l = 0; l <= i; ++l) {
          const double a = ctx.alpha(k, l);
          const double b = prob_.b(k, i, l);
          const cd V = prob_.V(k, i, l);
          const double s = b * std::norm(V);
          double w_own = 0.0;
          for (int j = l; j < L_; ++j) w_own += ctx.alpha(k, j);
          double quad = ctx.noise(k, i);
          VectorXd grad = VectorXd::Zero(n_);
          for (int t = 0; t < K_; ++t) {
            const double w = t == k ? w_own : 1.0;
            quad += w * (re[t] * re[t] + im[t] * im[t]);
            grad.segment(m2 * t, m2) = 2.0 * s * w * (r.a * re[t] + r.c * im[t]);
          }
          const cd aV = a * V;
          grad.segment(m2 * k, m2) -= 2.0 * b * (aV.real() * r.a - aV.imag() * r.c);
          ev.q(k, i, l) = s * quad - 2.0 * b * (aV.real() * re[k] - aV.imag() * im[k]) +
                          b * a - std::log(a * b);
          g(k, i, l) = std::move(grad);
          s_own(k, i, l) = s;
        }
      }
    }

    const bool soft = prob_.selector_pair == nullptr;
    ev.S = UserArray<double>(K_, L_);
    for (int k = 0; k < K_; ++k) {
      for (int l = 0; l < L_; ++l) {
        if (soft) {
          double top = ev.q(k, l, l);
          for (int i = l + 1; i < L_; ++i) top = std::max(top, ev.q(k, i, l));
          double z = 0.0;
          for (int i = l; i < L_; ++i) z += std::exp(nu * (ev.q(k, i, l) - top));
          ev.S(k, l) = top + std::log(z) / nu;
        } else {
          const auto& sel = *prob_.selector_pair;
          double z = 0.0, acc = 0.0;
          for (int i = l; i < L_; ++i) {
            const double w = std::exp(nu * (sel(k, i, l) - (*prob_.selector_user)(k, l)));
            z += w;
            acc += w * ev.q(k, i, l);
          }
          ev.S(k, l) = acc / z;
        }
      }
    }
    ev.mult = soft ? update_multipliers(nu, ev.S, ev.q, ev.S, ev.q, prob_.xi_th, true)
                   : update_multipliers(nu, ev.S, ev.q, *prob_.selector_user,
                                        *prob_.selector_pair, prob_.xi_th, false);

    std::vector<double> cluster(K_, 0.0);
    for (int k = 0; k < K_; ++k) {
      for (int l = 0; l < L_; ++l) cluster[k] += ev.S(k, l);
    }
    const double cmax = *std::max_element(cluster.begin(), cluster.end());
    double z = 0.0;
    for (double c : cluster) z += std::exp(nu * (c - cmax));
    ev.value = cmax + std::log(z) / nu;
    for (int k = 0; k < K_; ++k) {
      for (int l = 0; l < L_; ++l) ev.value += penalty(nu, ev.S(k, l) - prob_.xi_th(k, l));
    }

    ev.grad = VectorXd::Zero(n_);
    for_each_pair(K_, L_, [&](int k, int i, int l) { ev.grad += ev.mult.eta(k, i, l) * g(k, i, l); });
    if (!with_hessian) return ev;

    ev.hess = MatrixXd::Zero(n_, n_);
    // Curvature of the quadratics: block-diagonal over columns.
    for (int k = 0; k < K_; ++k) {
      for (int i = 0; i < L_; ++i) {
        const Receiver& r = rx_(k, i);
        const MatrixXd outer = r.a * r.a.transpose() + r.c * r.c.transpose();
        for (int t = 0; t < K_; ++t) {
          double w = 0.0;
          for (int l = 0; l <= i; ++l) {
            double wt = 1.0;
            if (t == k) {
              wt = 0.0;
              for (int j = l; j < L_; ++j) wt += ctx.alpha(k, j);
            }
            w += ev.mult.eta(k, i, l) * s_own(k, i, l) * wt;
          }
          if (w != 0.0) ev.hess.block(m2 * t, m2 * t, m2, m2) += 2.0 * w * outer;
        }
      }
    }
    // Curvature of the soft maxima.
    std::vector<VectorXd> G(K_, VectorXd::Zero(n_));
    VectorXd Gbar = VectorXd::Zero(n_);
    for (int k = 0; k < K_; ++k) {
      for (int l = 0; l < L_; ++l) {
        const double mass = ev.mult.theta[k] + ev.mult.Gamma(k, l);
        VectorXd gbar = VectorXd::Zero(n_);
        for (int i = l; i < L_; ++i) gbar += (ev.mult.eta(k, i, l) / mass) * g(k, i, l);
        if (soft && L_ - l > 1) {
          MatrixXd cov = -gbar * gbar.transpose();
          for (int i = l; i < L_; ++i) {
            cov += (ev.mult.eta(k, i, l) / mass) * g(k, i, l) * g(k, i, l).transpose();
          }
          ev.hess += mass * nu * cov;
        }
        const double exponent = nu * (ev.S(k, l) - prob_.xi_th(k, l));
        if (exponent <= kGammaExponentCap) {
          ev.hess += nu * ev.mult.Gamma(k, l) * gbar * gbar.transpose();
        }
        G[k] += gbar;
      }
      Gbar += ev.mult.theta[k] * G[k];
    }
    MatrixXd cov = -Gbar * Gbar.transpose();
    for (int k = 0; k < K_; ++k) cov += ev.mult.theta[k] * G[k] * G[k].transpose();
    ev.hess += nu * cov;
    return ev;
  }

 private:
  const SurrogateProblem& prob_;
  int M_ = 0, K_ = 0, L_ = 0, n_ = 0;
  UserArray<Receiver> rx_;
};

struct BarrierEval {
  double value;
  VectorXd grad;
  MatrixXd hess;
  Evaluation inner;
};

BarrierEval barrier_eval(const Evaluator& f, const VectorXd& x, double mu, double E,
                         bool with_hessian) {
  const double slack = E - x.squaredNorm();
  BarrierEval out{0.0, {}, {}, f(x, with_hessian)};
  out.value = out.inner.value - mu * std::log(slack);
  out.grad = out.inner.grad + (2.0 * mu / slack) * x;
  if (with_hessian) {
    out.hess = out.inner.hess;
    out.hess.diagonal().array() += 2.0 * mu / slack;
    out.hess += (4.0 * mu / (slack * slack)) * x * x.transpose();
  }
  return out;
}

}  // namespace

PairArray<double> surrogate_xi(const SurrogateProblem& prob, const Precoder& P) {
  const Evaluator f(prob);
  return f(to_real(P), false).q;
}

double surrogate_value(const SurrogateProblem& prob, const Precoder& P) {
  const Evaluator f(prob);
  return f(to_real(P), false).value;
}

SurrogateSolution solve_surrogate(const SurrogateProblem& prob, const Precoder& start) {
  const Evaluator f(prob);
  const auto& ch = prob.ctx.channels;
  if (start.rows() != ch.M() || start.cols() != ch.K()) {
    throw std::invalid_argument("solve_surrogate: start must be M x K");
  }
  const double E = prob.E_tx;
  VectorXd x = to_real(start);
  const double inside = E * (1.0 - 1e-3);
  if (x.squaredNorm() > inside) x *= std::sqrt(inside / x.squaredNorm());

  // The barrier weight tracks the size of the objective's gradient, which
  // swings by many orders of magnitude when QoS penalties are clamped.
  auto grad_scale = [&](const VectorXd& at) {
    return std::max(1.0, f(at, false).grad.norm() * std::sqrt(E));
  };
  SurrogateSolution sol;
  double mu = 1e-3 * grad_scale(x);
  bool settled = false;
  while (true) {
    settled = false;
    for (int step = 0; step < 80; ++step) {
      BarrierEval cur = barrier_eval(f, x, mu, E, true);
      const double scale = std::max(1.0, cur.hess.diagonal().cwiseAbs().maxCoeff());
      MatrixXd H = cur.hess;
      H.diagonal().array() += 1e-14 * scale;
      Eigen::LDLT<MatrixXd> ldlt(H);
      VectorXd d = -ldlt.solve(cur.grad);
      double decrement = -cur.grad.dot(d);
      if (!(decrement > 0.0) || !d.allFinite()) {
        d = -cur.grad;  // fall back to steepest descent
        decrement = cur.grad.squaredNorm();
      }
      ++sol.newton_steps;
      const double tol = 1e-15 * std::max(1.0, std::abs(cur.value));
      if (decrement < tol) {
        settled = true;
        break;
      }
      // Where the penalties are linear the Hessian is nearly singular along the
      // gradient; never step further than the radius of the power ball.
      const double radius = std::sqrt(E);
      if (d.norm() > radius) {
        d *= radius / d.norm();
        decrement = -cur.grad.dot(d);
      }
      double t = 1.0;
      while ((x + t * d).squaredNorm() >= E) t *= 0.5;
      bool moved = false;
      while (t > 1e-14) {
        const VectorXd trial = x + t * d;
        if (barrier_eval(f, trial, mu, E, false).value <= cur.value - 0.25 * t * decrement) {
          x = trial;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) {
        // No representable decrease left along the Newton direction.
        settled = decrement < 1e-9 * std::max(1.0, std::abs(cur.value));
        break;
      }
    }
    if (mu <= 1e-13 * grad_scale(x)) break;
    mu *= 0.01;
  }

  const Evaluation ev = f(x, false);
  sol.P = to_complex(x, ch.M(), ch.K());
  sol.xi_pair = ev.q;
  sol.xi_user = ev.S;
  sol.mult = ev.mult;
  sol.value = ev.value;
  // mu / slack is a poor estimate once the barrier is this steep; take the
  // radial component of the objective gradient instead.
  const double xx = x.squaredNorm();
  sol.beta = xx > 0.0 ? std::max(0.0, -ev.grad.dot(x) / (2.0 * xx)) : 0.0;
  sol.converged = settled;
  return sol;
}

}  // namespace mmfnoma
