#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately written the slow, obvious way — and where
// randomness is needed it uses the standard <random> generators rather than
// the library's own Rng — so that a disagreement localizes to the production
// code instead of a shared formula or a shared random stream.

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "tlab/attack.hpp"
#include "tlab/plant.hpp"
#include "tlab/types.hpp"

namespace oracle {

using tlab::Mat;
using tlab::Mat2;
using tlab::Mat24;
using tlab::Mat4;
using tlab::Mat42;
using tlab::Vec;
using tlab::Vec2;
using tlab::Vec4;

// ===== Finite-difference derivatives ========================================

/// Central-difference Jacobian d f / d x of the plant dynamics.
inline Mat4 fd_state_jacobian(const tlab::plant::PlantParams& p, const Vec4& x, const Vec2& u,
                              double T_amb, double h = 1e-4) {
  Mat4 J;
  for (int j = 0; j < 4; ++j) {
    Vec4 xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const Vec4 fp = tlab::plant::derivative(p, xp, u, T_amb);
    const Vec4 fm = tlab::plant::derivative(p, xm, u, T_amb);
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

/// Central-difference input Jacobian d f / d u.
inline Mat42 fd_input_jacobian(const tlab::plant::PlantParams& p, const Vec4& x, const Vec2& u,
                               double T_amb, double h = 1e-4) {
  Mat42 J;
  for (int j = 0; j < 2; ++j) {
    Vec2 up = u, um = u;
    up(j) += h;
    um(j) -= h;
    const Vec4 fp = tlab::plant::derivative(p, x, up, T_amb);
    const Vec4 fm = tlab::plant::derivative(p, x, um, T_amb);
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

/// Central-difference sensitivity d f / d T_amb.
inline Vec4 fd_ambient_sensitivity(const tlab::plant::PlantParams& p, const Vec4& x,
                                   const Vec2& u, double T_amb, double h = 1e-4) {
  const Vec4 fp = tlab::plant::derivative(p, x, u, T_amb + h);
  const Vec4 fm = tlab::plant::derivative(p, x, u, T_amb - h);
  return (fp - fm) / (2.0 * h);
}

// ===== Scalar Riccati oracles ===============================================

/// Bisection root of a continuous scalar function on [lo, hi] (sign change
/// required). Used for the one-dimensional Riccati fixed points where the
/// root is known to be unique.
inline double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                          int iters = 200) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw std::runtime_error("bisect_root: no sign change");
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Positive root of the scalar control Riccati fixed point
///   P = a^2 P - a^2 b^2 P^2 / (r + b^2 P) + q.
inline double scalar_dare_root(double a, double b, double q, double r, double hi = 1e9) {
  auto f = [&](double P) {
    return a * a * P - a * a * b * b * P * P / (r + b * b * P) + q - P;
  };
  return bisect_root(f, 0.0, hi);
}

/// Positive root of the scalar filter Riccati fixed point
///   P = a^2 P - a^2 c^2 P^2 / (c^2 P + sv) + sw.
inline double scalar_kalman_root(double a, double c, double sw, double sv, double hi = 1e9) {
  auto f = [&](double P) {
    return a * a * P - a * a * c * c * P * P / (c * c * P + sv) + sw - P;
  };
  return bisect_root(f, 0.0, hi);
}

// ===== Detector oracles =====================================================

/// Monte Carlo estimate of P(||r||^2 > J) for r ~ N(0, I_dim).
inline double chi2_tail_mc(double J, int dim, long n, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  long hits = 0;
  for (long i = 0; i < n; ++i) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double z = nd(g);
      s += z * z;
    }
    if (s > J) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

/// Direct simulation of the weighted detector's mean time between false
/// alarms under iid N(0, I_dim) residuals, with state reset on alarm.
inline double mewma_arl_sim(double J, double beta, int dim, long steps, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec x = Vec::Zero(dim);
  long alarms = 0;
  const double scale = (2.0 - beta) / beta;
  for (long k = 0; k < steps; ++k) {
    for (int d = 0; d < dim; ++d) x(d) = beta * nd(g) + (1.0 - beta) * x(d);
    if (scale * x.squaredNorm() > J) {
      ++alarms;
      x.setZero();
    }
  }
  if (alarms == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(steps) / static_cast<double>(alarms);
}

// ===== Final-stage worst-case oracles =======================================

/// Terminal deviation max-norm for a concrete two-step attack sequence.
inline double toy_terminal_norm(const tlab::attack::ImpactProblem& prob, const Vec2& a0,
                                const Vec2& a1) {
  const Vec4 x = prob.rows[0] * a0 + prob.rows[1] * a1;
  return x.lpNorm<Eigen::Infinity>();
}

/// Grid search over the memoryless detector's feasible set for a two-step
/// problem: each a(k) lies in the ball of radius sqrt(J_eff). The optimum of
/// a linear objective sits on the boundary, so sweeping two angles suffices.
inline double chi2_toy_grid_max(const tlab::attack::ImpactProblem& prob, double J_eff,
                                int n_angles = 3000) {
  if (prob.N != 2) throw std::runtime_error("chi2_toy_grid_max: need N == 2");
  const double rad = std::sqrt(J_eff);
  double best = 0.0;
  for (int i = 0; i < n_angles; ++i) {
    const double ti = 2.0 * M_PI * i / n_angles;
    const Vec2 a0 = rad * Vec2(std::cos(ti), std::sin(ti));
    for (int j = 0; j < n_angles; ++j) {
      const double tj = 2.0 * M_PI * j / n_angles;
      const Vec2 a1 = rad * Vec2(std::cos(tj), std::sin(tj));
      best = std::max(best, toy_terminal_norm(prob, a0, a1));
    }
  }
  return best;
}

/// Grid search over the weighted detector's feasible set for a two-step
/// problem, parameterized by the filtered states s(k) = x_D(k+1): both lie in
/// balls of radius sqrt(beta J_eff / (2 - beta)) and the attack recovers as
/// a(k) = (s(k) - (1-beta) s(k-1)) / beta with s(-1) = 0.
inline double mewma_toy_grid_max(const tlab::attack::ImpactProblem& prob, double beta,
                                 double J_eff, int n_angles = 3000) {
  if (prob.N != 2) throw std::runtime_error("mewma_toy_grid_max: need N == 2");
  const double rad = std::sqrt(beta * J_eff / (2.0 - beta));
  double best = 0.0;
  for (int i = 0; i < n_angles; ++i) {
    const double ti = 2.0 * M_PI * i / n_angles;
    const Vec2 s0 = rad * Vec2(std::cos(ti), std::sin(ti));
    for (int j = 0; j < n_angles; ++j) {
      const double tj = 2.0 * M_PI * j / n_angles;
      const Vec2 s1 = rad * Vec2(std::cos(tj), std::sin(tj));
      const Vec2 a0 = s0 / beta;
      const Vec2 a1 = (s1 - (1.0 - beta) * s0) / beta;
      best = std::max(best, toy_terminal_norm(prob, a0, a1));
    }
  }
  return best;
}

/**
 * Closed-loop impulse response: drive the attacked loop with a(t) = e_j at
 * t = k and zero elsewhere, using the controller equations directly (not the
 * assembled block matrices), and return the plant deviation after N steps.
 * Models the perfect-takeover regime: the received measurement is the
 * controller's own prediction plus the injected design vector in raw units.
 */
inline Vec4 impulse_response_column(const tlab::attack::AttackerKnowledge& know, int N, int k,
                                    int j) {
  const auto& m = know.model;
  const auto& c = know.ctrl;
  Vec4 x = Vec4::Zero();
  Vec x_c = Vec::Zero(c.n_c);
  for (int t = 0; t < N; ++t) {
    Vec2 a = Vec2::Zero();
    if (t == k) a(j) = 1.0;
    const Vec2 y_recv = c.C * (c.Tc * x_c) + know.raw_map * a;
    const Vec2 u = c.Cc * x_c;
    const Vec4 x_next = m.A * x + m.B * u;
    const Vec x_c_next = c.Ac * x_c + c.Bc * y_recv;
    x = x_next;
    x_c = x_c_next;
  }
  return x;
}

/// Random point on the unit sphere in R^2 scaled to `radius` around `center`.
inline Vec2 random_sphere_point(std::mt19937_64& g, const Vec2& center, double radius) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec2 d(nd(g), nd(g));
  while (d.norm() < 1e-12) d = Vec2(nd(g), nd(g));
  return center + radius * d / d.norm();
}

}  // namespace oracle
