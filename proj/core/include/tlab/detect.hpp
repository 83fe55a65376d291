#pragma once

#include <cstdint>

#include "tlab/rng.hpp"
#include "tlab/types.hpp"

namespace tlab::detect {

enum class Variant { chi2, mewma };

/** Residual-based anomaly detector configuration. */
struct DetectorConfig {
  Variant variant = Variant::mewma;
  double beta = 0.2;        ///< exponential forgetting factor (mewma only)
  double J_D = 0.0;         ///< alarm threshold (strict exceedance)
  int dim = 2;              ///< residual dimension
  double arl_target = 20.0; ///< mean samples between false alarms the threshold was tuned for
};

/** Mutable detector state (exponentially weighted residual average). */
struct DetectorState {
  Vec x_D;  ///< dim-sized; unused by the memoryless variant
};

/// Fresh state with x_D = 0.
DetectorState make_state(const DetectorConfig& cfg);

struct DetectorStep {
  double y_D = 0.0;
  bool alarm = false;
};

/**
 * Advance the detector one sample on the normalized residual r.
 *
 * Memoryless variant: y_D = r'r.
 * Weighted variant:   x_D <- beta r + (1-beta) x_D,
 *                     y_D = ((2-beta)/beta) ||x_D||^2,
 * alarm iff y_D > J_D (strict); the weighted state resets to zero on alarm.
 */
DetectorStep detector_step(const DetectorConfig& cfg, DetectorState& state, const Vec2& r);

/// Threshold with mean time between false alarms `arl` for the memoryless
/// detector on iid standard-normal residuals of dimension `dim` (chi-square
/// quantile at probability 1 - 1/arl).
double chi2_threshold(double arl, int dim);

/// Regularized lower incomplete gamma P(a, x) (series / continued fraction).
double gamma_p(double a, double x);

struct TuneOptions {
  std::uint64_t seed = 20240817ULL;
  long steps_per_eval = 1000000;  ///< Monte Carlo steps per threshold candidate
  int batches = 20;               ///< independent substreams combined per evaluation
  double rel_tol = 0.02;          ///< stop when |arl_hat - target| <= rel_tol * target
  int max_bisect = 60;
  double lo = 0.05;               ///< initial bracket for J_D
  double hi = 200.0;
};

struct TuneResult {
  double J_D = 0.0;
  double arl_estimate = 0.0;
  int iterations = 0;
};

/// Estimated mean time between false alarms of the weighted detector with
/// threshold J on iid standard-normal residuals (with reset on alarm).
double mewma_arl_estimate(double J, double beta, int dim, const TuneOptions& opt);

/**
 * Tune the weighted detector's threshold to a target mean time between false
 * alarms by bisection on Monte Carlo estimates. Common random numbers across
 * candidates keep the estimate monotone in J so bisection is valid; the
 * result is deterministic for a fixed option seed. Throws ConvergenceError if
 * the bracket does not contain the target or the iteration cap is reached.
 */
TuneResult tune_mewma_threshold(double arl, double beta, int dim, const TuneOptions& opt = {});

}  // namespace tlab::detect
