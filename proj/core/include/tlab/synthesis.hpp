#pragma once

#include <vector>

#include "tlab/plant.hpp"
#include "tlab/rng.hpp"
#include "tlab/types.hpp"

namespace tlab::synthesis {

/** Result of a discrete-time Riccati fixed point. */
struct DareResult {
  Mat P;  ///< stabilizing solution
  Mat K;  ///< state-feedback gain (R + B'PB)^{-1} B'PA
  int iterations = 0;
};

/**
 * Solve the discrete-time algebraic Riccati equation
 *   P = A'PA - A'PB (R + B'PB)^{-1} B'PA + Q
 * by fixed-point iteration from P = Q, symmetrizing each iterate.
 * Stops when the iterate changes by less than tol (max-abs) and the fixed-point
 * residual is below 100*tol; throws ConvergenceError past max_iter.
 */
DareResult solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                      double tol = 1e-12, long max_iter = 1000000);

/** Steady-state one-step-ahead (predictor) Kalman filter. */
struct KalmanResult {
  Mat P;  ///< prediction-error covariance
  Mat L;  ///< predictor gain A P C' (C P C' + Sv)^{-1}
  int iterations = 0;
};

/// Solve the filter Riccati equation P = APA' - APC'(CPC' + Sv)^{-1}CPA' + Sw
/// and return the predictor gain.
KalmanResult kalman_predictor(const Mat& A, const Mat& C, const Mat& Sw, const Mat& Sv,
                              double tol = 1e-12, long max_iter = 1000000);

/** Design weights for the output-feedback controllers. */
struct Weights {
  Mat4 Qx = 10.0 * Mat4::Identity();    ///< state cost
  Mat2 Ru = 2.0 * Mat2::Identity();     ///< input cost
  Mat2 Qint = 2.0 * Mat2::Identity();   ///< integrator-state cost (integral variant)
  Mat4 Sw = 5.0 * Mat4::Identity();     ///< assumed process-noise covariance
  Mat2 Sv = Mat2::Identity();           ///< assumed measurement-noise covariance
};

enum class ControllerKind { lqg, lqi };

/**
 * Linear output-feedback controller in state-space form:
 *   u(k)      = Cc x_c(k)
 *   x_c(k+1)  = Ac x_c(k) + Bc y(k) [+ nu(k) if actuation noise is enabled]
 * with Tc mapping the controller state to its embedded plant-state estimate
 * (x_hat = Tc x_c), which the residual generator uses:
 *   r_bar(k) = y(k) - C Tc x_c(k).
 */
struct ControllerRealization {
  ControllerKind kind = ControllerKind::lqg;
  int n_c = 4;      ///< controller state dimension (4 estimator-only, 6 with integrators)
  double Ts = 1.0;  ///< sample time [s]
  Mat Ac;           ///< n_c x n_c
  Mat Bc;           ///< n_c x 2
  Mat Cc;           ///< 2 x n_c
  Mat Tc;           ///< 4 x n_c
  Mat C;            ///< 2 x 4 plant output map
  Mat K_xhat;       ///< 2 x 4 state-feedback gain
  Mat K_int;        ///< 2 x 2 integrator gain (integral variant; empty otherwise)
  Mat L;            ///< 4 x 2 predictor gain
  Mat Sigma_nu;     ///< n_c x n_c actuation-noise covariance (zero when disabled)
  double rho_Ac = 0.0;  ///< spectral radius of Ac
};

/// Estimator-based state-feedback controller (certainty-equivalence design:
/// Riccati state feedback plus steady-state predictor).
ControllerRealization design_lqg(const plant::DiscreteModel& m, const Weights& w);

/// Same structure augmented with output integrators for offset-free tracking.
/// The integrators accumulate -Ts * y; the predictor gain is designed on the
/// unaugmented model.
ControllerRealization design_lqi(const plant::DiscreteModel& m, const Weights& w);

/** One controller update. u and r_bar are functions of the pre-update state. */
struct ControllerStep {
  Vec x_c_next;
  Vec2 u_raw;   ///< unsaturated input deviation Cc x_c
  Vec2 r_bar;   ///< raw residual y - C Tc x_c
};

/// Advance the controller one sample driven by the received measurement.
ControllerStep controller_step(const ControllerRealization& c, const Vec& x_c,
                               const Vec2& y_tilde);

/** Sample statistics of the raw residual sequence. */
struct ResidualStats {
  Vec2 mean = Vec2::Zero();
  Mat2 Sigma_r = Mat2::Identity();
  Mat2 normalizer = Mat2::Identity();  ///< Sigma_r^{-1/2}
};

/// Sample mean/covariance of a residual sequence and the whitening map
/// Sigma_r^{-1/2}. Throws NumericError when the covariance is degenerate
/// (eigenvalue below 1e-12) or fewer than two samples are given.
ResidualStats estimate_residual_stats(const std::vector<Vec2>& residuals);

/// Whitening map used by the monitor while actuation noise of covariance
/// Sigma_nu is active: (Sigma_r + C Tc Sigma_nu Tc' C')^{-1/2}.
Mat2 injection_renormalizer(const ControllerRealization& c, const Mat2& Sigma_r);

/// Symmetric positive-semidefinite square root (eigenvalues clamped at zero).
Mat spd_sqrt(const Mat& S);

/// Symmetric inverse square root; throws NumericError below the 1e-12
/// eigenvalue floor.
Mat spd_inv_sqrt(const Mat& S);

/// Largest eigenvalue magnitude.
double spectral_radius(const Mat& A);

}  // namespace tlab::synthesis
