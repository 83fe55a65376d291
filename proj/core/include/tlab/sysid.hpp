#pragma once

#include "tlab/plant.hpp"
#include "tlab/rng.hpp"
#include "tlab/types.hpp"

namespace tlab::sysid {

/**
 * Logged identification experiment: heater commands and measured sensor
 * temperatures on a uniform time grid. Temperatures kelvin, commands percent.
 */
struct ExperimentRecord {
  Vec t;    ///< sample times, seconds
  Vec Q1;   ///< heater 1 command
  Vec Q2;   ///< heater 2 command
  Vec TS1;  ///< measured sensor 1 temperature
  Vec TS2;  ///< measured sensor 2 temperature
  double T_amb = 294.15;  ///< ambient during the experiment
};

/**
 * Relative squared output error of a candidate parameter set: simulate the
 * record's input schedule from x0 = (TS1[0], TS2[0], TS1[0], TS2[0]) and sum
 * ((meas - sim)/meas)^2 over both sensors and all samples. Returns +inf when
 * the candidate makes the simulation blow up.
 */
double fit_objective(const plant::PlantParams& p, const ExperimentRecord& rec);

struct FitOptions {
  long max_iters = 5000;
  double tol = 1e-6;  ///< simplex diameter in normalized parameter space
};

struct FitResult {
  plant::PlantParams params;
  double objective = 0.0;
  long iterations = 0;
  long evaluations = 0;
};

/**
 * Fit the six identifiable parameters (alpha1, alpha2, U, Us, tau_c1, tau_c2)
 * by multi-start restarted Nelder–Mead on the normalized box [0,1]^6
 * (candidates are projected onto the box before evaluation; the remaining
 * parameters are taken from init). The search runs from the caller's init and
 * from seven fixed low-discrepancy points, each restarted around its incumbent
 * with a geometrically shrinking spread until the objective stagnates; the
 * best converged point wins. The whole procedure is deterministic. Throws
 * ConvergenceError when a start's iteration budget runs out first.
 */
FitResult estimate_parameters(const ExperimentRecord& rec, const plant::ParamBounds& bounds,
                              const plant::PlantParams& init, const FitOptions& opt = {});

/**
 * Synthetic identification experiment: a fixed multi-step heater schedule
 * applied from ambient equilibrium, sensors logged with gaussian noise of
 * standard deviation sigma.
 */
ExperimentRecord synth_experiment(const plant::PlantParams& p, double T_amb, int n_samples,
                                  double sigma, Rng& rng);

}  // namespace tlab::sysid
