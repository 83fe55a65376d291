#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tlab/attack.hpp"
#include "tlab/detect.hpp"
#include "tlab/plant.hpp"
#include "tlab/synthesis.hpp"
#include "tlab/types.hpp"

namespace tlab::sim {

/**
 * Attack timeline in sample indices. The attacker starts listening at k_I,
 * takes the sensor channel over at k_II = k_I + N_I - 1, runs the detector
 * ramp for N_II steps, and plays the worst-case sequence for N_III steps:
 *   warmup [0, k_I) | listen [k_I, k_II) | ramp [k_II, k_III) | push [k_III, end)
 * with k_III = k_II + N_II and end = k_III + N_III.
 */
struct Timeline {
  int k_I = 900;
  int N_I = 300;
  int N_II = 120;
  int N_III = 1800;

  int k_II() const { return k_I + N_I - 1; }
  int k_III() const { return k_II() + N_II; }
  int total() const { return k_III() + N_III; }
};

/** Slow sinusoidal ambient drift: T_amb(k) = T_amb + amplitude * sin(2 pi k / period). */
struct DriftSpec {
  double amplitude = 0.0;  ///< kelvin
  double period = 0.0;     ///< seconds; ignored when amplitude is zero
};

/** Residual-statistics calibration phase (run before the scored experiment). */
struct CalibrationSpec {
  int steps = 2700;
  int discard = 900;  ///< initial transient samples dropped from the estimate
};

/** Controller actuation-noise injection (moving-target defense). */
struct InjectionSpec {
  double variance = 0.0;  ///< per-component variance of nu
  int start_k = 0;        ///< first sample with injection active
  bool enabled() const { return variance > 0.0; }
};

enum class Stage1ModeChoice { automatic, open_loop, joint_kf };

struct AttackSpec {
  bool enabled = false;
  Stage1ModeChoice stage1_mode = Stage1ModeChoice::automatic;
  attack::SupportMode support = attack::SupportMode::squared;
  double stealth_margin = 1e-3;
  /// Sync the attacker's controller estimate to the true controller state
  /// from the takeover on (isolates the ramp/push stages from listening error).
  bool perfect_stage1 = false;
  /// If positive and the timeline's N_II is negative, derive N_II from the
  /// detector-memory decay target gamma.
  double gamma = -1.0;
  double joint_kf_p0 = 10.0;
  /// Scales on the noise covariances the attacker's joint filter assumes
  /// (relative to the controller design values). Values far from 1 model an
  /// attacker whose noise model is wrong; its listening-stage estimate then
  /// carries a persistent error into the takeover.
  double attacker_sw_scale = 1.0;
  double attacker_sv_scale = 1.0;
  /// Scale on the residual covariance the attacker believes, relative to the
  /// calibrated truth. An attacker that overestimates the residual noise
  /// (scale > 1) plans injections that run above the true threshold and trips
  /// the detector during the ramp stage.
  double attacker_sigma_r_scale = 1.0;
};

/** Complete description of one closed-loop experiment. */
struct ScenarioConfig {
  std::string name = "scenario";
  synthesis::ControllerKind kind = synthesis::ControllerKind::lqg;
  synthesis::Weights weights;
  detect::DetectorConfig detector;  ///< J_D <= 0 means "tune at run time"
  plant::PlantParams params = plant::fitted_params();
  double T_amb = 294.15;
  double T_set = 313.15;      ///< equal-temperature hold point, kelvin
  /// True measurement-noise std, kelvin. Calibrated so the nominal residual
  /// covariance lands at hardware-typical levels (diag ~ 0.05).
  double sigma_meas = 0.18;
  bool linear_truth = false;  ///< propagate the linearized model instead of the ODE
  Timeline timeline;
  AttackSpec attack;
  InjectionSpec injection;
  DriftSpec drift;
  CalibrationSpec calibration;
  bool log_diagnostics = true;
  std::uint64_t default_seed = 1;
};

/** One row of the experiment trace. Temperatures kelvin, powers percent. */
struct TraceRecord {
  int k = 0;
  double TH1 = 0, TH2 = 0, TS1 = 0, TS2 = 0;  // true plant state (absolute)
  double y1 = 0, y2 = 0;                      // measured deviations
  double yt1 = 0, yt2 = 0;                    // received (possibly spoofed) deviations
  double u1raw = 0, u2raw = 0;                // commanded power before saturation
  double u1 = 0, u2 = 0;                      // applied power
  double r1 = 0, r2 = 0;                      // whitened residual
  double yD = 0;
  bool alarm = false;
  int stage = 0;  // 0 warmup/nominal, 1 listen, 2 ramp, 3 push
  double ec = 0, eD = 0, er = 0;  // attacker-error diagnostics (NaN when n/a)
};

/** Summary metrics of one run. */
struct Metrics {
  double pre_mean_th[2] = {0, 0};  ///< heater temps averaged over 300 s before takeover
  double end_mean_th[2] = {0, 0};  ///< heater temps averaged over the final 60 s
  double achieved_impact = 0.0;    ///< end - pre of the targeted heater, kelvin
  int targeted_heater = 0;         ///< 0 or 1
  double theoretical_impact = 0.0;
  int target_index = 0;
  long alarms_warmup = 0, alarms_stage1 = 0, alarms_stage2 = 0, alarms_stage3 = 0;
  long alarms_total = 0;
  bool stealthy = false;  ///< no alarms from the takeover sample on
  double mean_yD_stage3 = 0.0;
  double false_alarm_rate = 0.0;  ///< alarms per sample over the whole run
  double rho_Ac = 0.0;
  double J_D = 0.0;
  int N_II = 0;
  double e_c_at_kII = 0.0;   ///< attacker controller-estimate error at takeover
  double e_D_at_kIII = 0.0;  ///< attacker detector-estimate error entering the push stage
  double sigma_r_diag[2] = {0, 0};
  bool attack_enabled = false;
  std::uint64_t seed = 0;
  std::string name;
};

/** Everything a run produces. */
struct ScenarioResult {
  ScenarioConfig resolved;  ///< config with tuned threshold / derived N_II filled in
  plant::SteadyState ss;
  plant::DiscreteModel model;
  synthesis::ControllerRealization ctrl;
  synthesis::ResidualStats stats;
  Mat2 monitor_normalizer = Mat2::Identity();  ///< active whitening during the attack window
  attack::Feasibility feasibility = attack::Feasibility::strict;
  attack::Stage1Mode stage1_mode = attack::Stage1Mode::open_loop;
  attack::ImpactSolution impact;  ///< empty when the attack is disabled
  std::vector<TraceRecord> trace;
  Metrics metrics;
};

/**
 * Run one closed-loop experiment end to end: design the controller on the
 * linearized model, calibrate residual statistics on a nominal rollout,
 * resolve the detector threshold and attack plan, then execute the scored
 * loop. Deterministic for a fixed (config, seed) pair.
 */
ScenarioResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

/// Summary metrics from a finished trace (exposed for tests).
Metrics compute_metrics(const std::vector<TraceRecord>& trace, const Timeline& tl,
                        bool attack_enabled, const attack::ImpactSolution& impact,
                        const synthesis::ResidualStats& stats, double rho_Ac, double J_D,
                        std::uint64_t seed, const std::string& name);

}  // namespace tlab::sim
