#pragma once

#include <vector>

#include "tlab/detect.hpp"
#include "tlab/plant.hpp"
#include "tlab/rng.hpp"
#include "tlab/synthesis.hpp"
#include "tlab/types.hpp"

namespace tlab::attack {

/**
 * Everything the sensor attacker is assumed to know: the plant model, the
 * controller realization, the detector configuration, and the monitor's
 * residual statistics (including the active whitening map and its inverse).
 */
struct AttackerKnowledge {
  synthesis::ControllerRealization ctrl;
  plant::DiscreteModel model;
  detect::DetectorConfig det;
  Mat2 Sigma_r = Mat2::Identity();    ///< calibrated raw residual covariance
  Mat2 normalizer = Mat2::Identity(); ///< monitor's active whitening map N
  Mat2 raw_map = Mat2::Identity();    ///< N^{-1}: maps design-space vectors to raw units
  Mat Sw = 5.0 * Mat4::Identity();    ///< noise covariances assumed by the
  Mat2 Sv = Mat2::Identity();         ///< controller design (joint filter model)
};

/** Classification of the controller-estimation stage by the recursion's spectral radius. */
enum class Feasibility { strict, marginal, infeasible };

/// strict if rho(Ac) < 1 - tol, marginal if |rho(Ac) - 1| <= tol, infeasible otherwise.
Feasibility stage1_feasibility(const synthesis::ControllerRealization& c, double tol = 1e-9);

enum class Stage1Mode { open_loop, joint_kf };

/**
 * Attacker's running estimate of the controller state.
 *
 * open_loop: copy the controller recursion driven by the same received
 * measurements; the estimation error then obeys e+ = Ac e exactly, no matter
 * what noise or nonlinearity drives the measurements, because both recursions
 * share the identical input sequence.
 *
 * joint_kf: Kalman filter on the joint plant/controller state, needed when
 * rho(Ac) = 1 (integral action) and the open-loop error does not contract.
 */
struct ControllerEstimate {
  Stage1Mode mode = Stage1Mode::open_loop;
  Vec x_c_hat;      ///< controller-state estimate (n_c)
  Vec z_hat;        ///< joint state estimate (4 + n_c), joint filter only
  Mat P;            ///< joint covariance, joint filter only
  int psd_repairs = 0;  ///< times the covariance needed an eigenvalue clamp
};

/// Fresh estimate: x_c_hat = 0 (joint filter: z_hat = 0, P = p0 * I).
ControllerEstimate make_stage1_estimate(const AttackerKnowledge& know, Stage1Mode mode,
                                        double p0 = 10.0);

/// Passive-listening update driven by the received measurement y_tilde.
void stage1_step(const AttackerKnowledge& know, ControllerEstimate& est, const Vec2& y_tilde);

/// Post-takeover update: the spoofed measurement carries no information about
/// the plant, so both modes propagate the controller recursion only.
void propagate_step(const AttackerKnowledge& know, ControllerEstimate& est,
                    const Vec2& y_tilde);

/**
 * Spoofed-measurement construction: the attacker replaces the sensor value so
 * the monitor sees exactly the chosen design vector a (in whitened units) plus
 * an optional raw-unit extra term:
 *   y_a = -y + C Tc x_c_hat + raw_map a + extra_raw,  received = y + y_a.
 */
Vec2 attack_signal(const AttackerKnowledge& know, const Vec& x_c_hat, const Vec2& y,
                   const Vec2& a, const Vec2& extra_raw);

/// Steps needed to shrink the weighted detector's memory of its takeover-time
/// state below gamma: smallest N with (1-beta)^N sqrt(beta J_D / (2-beta)) <= gamma.
int stage2_length(double beta, double J_D, double gamma);

/** Shape of the transition-stage sampling support as a function of the step index. */
enum class SupportMode {
  squared,       ///< (1 - (1-b)^{j+1})^2 J_D — contraction-safe (see stage2_step)
  proportional,  ///< (1 - (1-b)^{j+1})   J_D — faster ramp, no stealth guarantee
};

struct Stage2Options {
  SupportMode support = SupportMode::squared;
  /// Fraction of J_D kept in reserve against estimation leakage; sampling
  /// targets (1 - stealth_margin) * J_D at most.
  double stealth_margin = 1e-3;
  int max_rejects = 100000;
};

/** Attacker-side transition-stage state. */
struct Stage2State {
  Vec2 x_D_hat = Vec2::Zero();   ///< tracked detector state
  Vec4 Ee = Vec4::Zero();        ///< planned mean estimator error E{e}
  Vec2 x_shadow = Vec2::Zero();  ///< shadow detector driving the statistic sampler
};

struct Stage2Step {
  Vec2 a = Vec2::Zero();
  double y_D_target = 0.0;  ///< detector statistic the step is constructed to hit
};

/**
 * One transition-stage step (stage-relative index j = 0, 1, ...).
 *
 * Draws a plausible detector statistic from a shadow detector rejected into
 * the ramp support, then places a on the sphere of design vectors that hit
 * that statistic exactly, choosing the point that maximizes the planned
 * estimator-error growth ||A E{e} - L raw_map a||_inf (closed form over the
 * 2*4 signed coordinate candidates; ties resolve to the lowest state index
 * and positive sign).
 *
 * With the squared support and any non-alarmed takeover state x_D(k_II)
 * (norm at most sqrt(beta J_D / (2-beta))), the true statistic obeys
 *   sqrt(y_true) <= sqrt(y_sample) + (1-beta)^{j+1} sqrt(J_D) <= sqrt(J_D),
 * so the ramp provably never trips the detector.
 */
Stage2Step stage2_step(const AttackerKnowledge& know, Stage2State& st, Rng& rng, int j,
                       const Stage2Options& opt = {});

/**
 * Final-stage worst-case problem data: the terminal plant deviation is
 *   x(k_e) = sum_k rows[k] a(k),   rows[k] = [I 0] Atilde^{N-1-k} Btilde,
 * over the attacked closed loop Atilde = [[A, B Cc], [0, Ac + Bc C Tc]],
 * Btilde = [0; Bc raw_map].
 */
struct ImpactProblem {
  std::vector<Mat42> rows;
  int N = 0;
};

ImpactProblem build_impact_problem(const AttackerKnowledge& know, int N);

struct Stage3Options {
  /// Fraction of J_D kept in reserve: the per-step constraint is tightened to
  /// y_D <= (1 - stealth_margin) * J_D so estimation leakage cannot push the
  /// true statistic over the strict threshold.
  double stealth_margin = 1e-3;
};

struct ImpactSolution {
  std::vector<Vec2> a;          ///< design-space attack sequence, length N
  double value = 0.0;           ///< |terminal deviation| of the targeted state, kelvin
  int target_index = 0;         ///< argmax state (0 TH1, 1 TH2, 2 TS1, 3 TS2)
  int target_sign = 1;          ///< deviation direction achieved (+1 heats)
  int iterations = 0;           ///< solver passes over the horizon
  bool suboptimal = false;      ///< true if any tolerance fallback triggered
  std::vector<double> margins;  ///< per-step J_D - y_D along the plan
};

/**
 * Maximize the terminal plant deviation max-norm subject to the detector
 * staying at or below the (margin-tightened) threshold at every step.
 *
 * Memoryless detector: the per-step sets decouple into balls, solved exactly
 * per step. Weighted detector: substituting s(k) = x_D(k+1) turns the
 * constraint set into per-step balls of radius sqrt(beta J' / (2-beta)) and
 * the objective into sum_k d(k)'s(k) with d(k) = c(k) - (1-beta) c(k+1), so
 * the exact maximizer is s(k) = rho d(k)/||d(k)||; a recovers via
 * a(k) = (s(k) - (1-beta) s(k-1)) / beta. Both cases are exact one-pass
 * solutions; ties across the 2*4 signed targets resolve to the lowest state
 * index with positive sign.
 */
ImpactSolution solve_worst_case(const ImpactProblem& prob, const detect::DetectorConfig& det,
                                const Stage3Options& opt = {});

/// Raw-unit extra term for the first final-stage step, cancelling the tracked
/// detector state so the statistic becomes a function of a alone:
/// extra_raw = -raw_map ((1-beta)/beta) x_D_hat.
Vec2 stage3_first_extra(const AttackerKnowledge& know, const Vec2& x_D_hat);

}  // namespace tlab::attack
