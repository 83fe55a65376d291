#pragma once

#include "tlab/rng.hpp"
#include "tlab/types.hpp"

namespace tlab::plant {

/**
 * Physical parameters of the two-heater bench rig.
 *
 * The rig has two heater/sensor pairs mounted side by side. Each heater loses
 * heat to ambient by convection and radiation, exchanges heat with the other
 * heater by conduction and radiation, and drives a first-order lagged sensor.
 * Units are SI throughout; temperatures are kelvin, heater commands percent of
 * full scale.
 */
struct PlantParams {
  double alpha1;   ///< heater 1 input gain [W / %]
  double alpha2;   ///< heater 2 input gain [W / %]
  double U;        ///< ambient convective coefficient [W / (m^2 K)]
  double Us;       ///< heater-to-heater convective coefficient [W / (m^2 K)]
  double tau_c1;   ///< sensor 1 lag time constant [s]
  double tau_c2;   ///< sensor 2 lag time constant [s]
  double m;        ///< heater thermal mass [kg]
  double c_p;      ///< heat capacity [J / (kg K)]
  double A_surf;   ///< ambient-facing (and radiative coupling) surface area [m^2]
  double As_surf;  ///< conductive coupling surface area [m^2]
  double eps;      ///< emissivity [-]
  double k_B;      ///< Stefan–Boltzmann constant [W / (m^2 K^4)]
};

/// Canonical identified parameters of the bench rig. The heat capacity is
/// chosen so that m * c_p = 1 J/K, matching the gain scale of the identified
/// input coefficients (alpha is the per-percent temperature-rate gain).
PlantParams fitted_params();

/// Index order of the identifiable parameters inside ParamBounds vectors.
enum IdentifiableParam : int {
  kAlpha1 = 0,
  kAlpha2 = 1,
  kU = 2,
  kUs = 3,
  kTauC1 = 4,
  kTauC2 = 5,
};

/** Box bounds for the six identifiable parameters (alpha1, alpha2, U, Us, tau_c1, tau_c2). */
struct ParamBounds {
  Vec6 lo;
  Vec6 hi;
};

/// Default identification box.
ParamBounds default_bounds();

/// Full plant state (T_H1, T_H2, T_S1, T_S2), kelvin.
using State = Vec4;
/// Heater commands (Q1, Q2), percent of full scale.
using Input = Vec2;

/// Saturate heater commands to the physical range [0, 100] %.
Input clamp(const Input& u);

/// Right-hand side x' = f(x, u) of the nonlinear energy balance at ambient
/// temperature T_amb. Inputs are used as given (callers saturate).
State derivative(const PlantParams& p, const State& x, const Input& u, double T_amb);

/// Analytic Jacobian df/dx of the nonlinear dynamics at state x.
Mat4 jacobian(const PlantParams& p, const State& x);

/// Sensitivity df/dT_amb of the nonlinear dynamics, evaluated at ambient
/// temperature T_amb (column vector).
Vec4 ambient_sensitivity(const PlantParams& p, double T_amb);

/**
 * Advance the state by dt seconds using classical RK4 with a fixed substep
 * (default 0.1 s). Heater commands are saturated once on entry and held for
 * the whole interval. Throws NumericError if the state leaves finite range.
 */
State step(const PlantParams& p, State x, Input u, double dt, double T_amb, double substep = 0.1);

/** Equal-temperature operating point and the heater powers that hold it. */
struct SteadyState {
  double T_amb;  ///< ambient temperature, kelvin
  double T_inf;  ///< common equilibrium temperature of heaters and sensors, kelvin
  Input Q_inf;   ///< holding powers, percent
};

/**
 * Holding powers for the equal-temperature equilibrium at T_inf.
 * At equal temperatures the coupling terms vanish, so each heater balances
 * only its ambient losses. Throws InfeasibleError if the required powers fall
 * outside [0, 100] %.
 */
SteadyState steady_state(const PlantParams& p, double T_amb, double T_inf);

/** Continuous-time linearization about an equal-temperature equilibrium. */
struct ContinuousModel {
  Mat4 A;
  Mat42 B;
  Mat24 C;
};

/** Zero-order-hold discretization of a ContinuousModel. */
struct DiscreteModel {
  Mat4 A;
  Mat42 B;
  Mat24 C;
  double Ts = 1.0;
};

/// Linearize the nonlinear dynamics about the given equilibrium. States and
/// inputs of the returned model are deviations from (T_inf, Q_inf); outputs
/// are the two sensor deviations.
ContinuousModel linearize(const PlantParams& p, const SteadyState& ss);

/// Exact zero-order-hold discretization at sample time Ts via the matrix
/// exponential of the augmented [A B; 0 0] block (scaling-and-squaring Padé).
DiscreteModel discretize(const ContinuousModel& m, double Ts);

/// Sensor reading as deviation from the equilibrium sensor temperature, with
/// additive iid gaussian noise of standard deviation sigma (kelvin).
Vec2 measure(const State& x, const SteadyState& ss, double sigma, Rng& rng);

}  // namespace tlab::plant
