#include "tlab/plant.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "tlab/error.hpp"

namespace tlab::plant {

PlantParams fitted_params() {
  PlantParams p;
  p.alpha1 = 0.00854;
  p.alpha2 = 0.00480;
  p.U = 4.05;
  p.Us = 26.44;
  p.tau_c1 = 25.16;
  p.tau_c2 = 22.50;
  p.m = 0.004;
  p.c_p = 250.0;  // m * c_p = 1 J/K: alpha is the per-percent temperature-rate gain
  p.A_surf = 1.0e-3;
  p.As_surf = 2.0e-4;
  p.eps = 0.9;
  p.k_B = 5.67e-8;
  return p;
}

ParamBounds default_bounds() {
  ParamBounds b;
  b.lo << 5.0e-3, 2.0e-3, 2.0, 2.0, 15.0, 15.0;
  b.hi << 2.0e-2, 1.5e-2, 30.0, 30.0, 40.0, 40.0;
  return b;
}

Input clamp(const Input& u) {
  return u.cwiseMax(0.0).cwiseMin(100.0);
}

State derivative(const PlantParams& p, const State& x, const Input& u, double T_amb) {
  const double mcp = p.m * p.c_p;
  const double T1 = x(0), T2 = x(1);
  const double Ta4 = T_amb * T_amb * T_amb * T_amb;
  const double T14 = T1 * T1 * T1 * T1;
  const double T24 = T2 * T2 * T2 * T2;

  // Energy balance per heater: ambient convection + ambient radiation +
  // heater-to-heater conduction + heater-to-heater radiation + electrical
  // input. The radiative exchange between the heaters acts over the full
  // surface A_surf; only the conductive path uses the shared area As_surf.
  const double q12_conv = p.Us * p.As_surf * (T2 - T1);
  const double q12_rad = p.eps * p.k_B * p.A_surf * (T24 - T14);

  State dx;
  dx(0) = (p.U * p.A_surf * (T_amb - T1) + p.eps * p.k_B * p.A_surf * (Ta4 - T14) +
           q12_conv + q12_rad + p.alpha1 * u(0)) /
          mcp;
  dx(1) = (p.U * p.A_surf * (T_amb - T2) + p.eps * p.k_B * p.A_surf * (Ta4 - T24) -
           q12_conv - q12_rad + p.alpha2 * u(1)) /
          mcp;
  dx(2) = (T1 - x(2)) / p.tau_c1;
  dx(3) = (T2 - x(3)) / p.tau_c2;
  return dx;
}

Mat4 jacobian(const PlantParams& p, const State& x) {
  const double mcp = p.m * p.c_p;
  const double T1 = x(0), T2 = x(1);
  const double r1 = 4.0 * p.eps * p.k_B * p.A_surf * T1 * T1 * T1;
  const double r2 = 4.0 * p.eps * p.k_B * p.A_surf * T2 * T2 * T2;

  Mat4 J = Mat4::Zero();
  // d(dT_H1/dt)/dT_H1: ambient convection + ambient radiation + coupling
  // conduction + coupling radiation all pull against T_H1.
  J(0, 0) = -(p.U * p.A_surf + p.Us * p.As_surf + 2.0 * r1) / mcp;
  J(0, 1) = (p.Us * p.As_surf + r2) / mcp;
  J(1, 0) = (p.Us * p.As_surf + r1) / mcp;
  J(1, 1) = -(p.U * p.A_surf + p.Us * p.As_surf + 2.0 * r2) / mcp;
  J(2, 0) = 1.0 / p.tau_c1;
  J(2, 2) = -1.0 / p.tau_c1;
  J(3, 1) = 1.0 / p.tau_c2;
  J(3, 3) = -1.0 / p.tau_c2;
  return J;
}

Vec4 ambient_sensitivity(const PlantParams& p, double T_amb) {
  // d f / d T_amb: ambient temperature enters each heater balance through the
  // convective term U*A*(T_amb - T_i) and the radiative term
  // eps*k_B*A*(T_amb^4 - T_i^4); the sensors see ambient only through the
  // heaters.
  const double mcp = p.m * p.c_p;
  const double g =
      (p.U * p.A_surf + 4.0 * p.eps * p.k_B * p.A_surf * T_amb * T_amb * T_amb) / mcp;
  Vec4 e = Vec4::Zero();
  e(0) = g;
  e(1) = g;
  return e;
}

State step(const PlantParams& p, State x, Input u, double dt, double T_amb, double substep) {
  if (!(dt > 0.0) || !(substep > 0.0)) {
    throw NumericError("plant::step requires positive dt and substep");
  }
  u = clamp(u);
  const int n = std::max(1, static_cast<int>(std::lround(dt / substep)));
  const double h = dt / static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    const State k1 = derivative(p, x, u, T_amb);
    const State k2 = derivative(p, x + 0.5 * h * k1, u, T_amb);
    const State k3 = derivative(p, x + 0.5 * h * k2, u, T_amb);
    const State k4 = derivative(p, x + h * k3, u, T_amb);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!x.allFinite()) {
    throw NumericError("plant::step produced a non-finite state");
  }
  return x;
}

SteadyState steady_state(const PlantParams& p, double T_amb, double T_inf) {
  // With all four temperatures equal the coupling terms vanish and each
  // heater balances only its own ambient losses:
  //   alpha_i * Q_inf_i = U*A*(T_inf - T_amb) + eps*k_B*A*(T_inf^4 - T_amb^4).
  const double Ta4 = T_amb * T_amb * T_amb * T_amb;
  const double Ti4 = T_inf * T_inf * T_inf * T_inf;
  const double load = p.U * p.A_surf * (T_inf - T_amb) + p.eps * p.k_B * p.A_surf * (Ti4 - Ta4);
  SteadyState ss;
  ss.T_amb = T_amb;
  ss.T_inf = T_inf;
  ss.Q_inf(0) = load / p.alpha1;
  ss.Q_inf(1) = load / p.alpha2;
  const bool ok = ss.Q_inf(0) >= 0.0 && ss.Q_inf(0) <= 100.0 && ss.Q_inf(1) >= 0.0 &&
                  ss.Q_inf(1) <= 100.0;
  if (!ok) {
    throw InfeasibleError("steady_state: required holding power outside [0, 100] %");
  }
  return ss;
}

ContinuousModel linearize(const PlantParams& p, const SteadyState& ss) {
  State xeq;
  xeq << ss.T_inf, ss.T_inf, ss.T_inf, ss.T_inf;
  ContinuousModel m;
  m.A = jacobian(p, xeq);
  const double mcp = p.m * p.c_p;
  m.B = Mat42::Zero();
  m.B(0, 0) = p.alpha1 / mcp;
  m.B(1, 1) = p.alpha2 / mcp;
  m.C = Mat24::Zero();
  m.C(0, 2) = 1.0;
  m.C(1, 3) = 1.0;
  return m;
}

DiscreteModel discretize(const ContinuousModel& m, double Ts) {
  if (!(Ts > 0.0)) {
    throw NumericError("discretize requires a positive sample time");
  }
  // Exact zero-order hold: exp([A B; 0 0] * Ts) = [A_d B_d; 0 I].
  Eigen::Matrix<double, 6, 6> M = Eigen::Matrix<double, 6, 6>::Zero();
  M.topLeftCorner<4, 4>() = m.A;
  M.topRightCorner<4, 2>() = m.B;
  const Eigen::Matrix<double, 6, 6> E = (M * Ts).exp();
  DiscreteModel d;
  d.A = E.topLeftCorner<4, 4>();
  d.B = E.topRightCorner<4, 2>();
  d.C = m.C;
  d.Ts = Ts;
  return d;
}

Vec2 measure(const State& x, const SteadyState& ss, double sigma, Rng& rng) {
  Vec2 y;
  y(0) = x(2) - ss.T_inf + sigma * rng.gaussian();
  y(1) = x(3) - ss.T_inf + sigma * rng.gaussian();
  return y;
}

}  // namespace tlab::plant
