#include "tlab/sim.hpp"

#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "tlab/error.hpp"

namespace tlab::sim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTwoPi = 6.283185307179586476925286766559;

double drift_at(const DriftSpec& d, int k) {
  if (d.amplitude == 0.0 || d.period <= 0.0) return 0.0;
  return d.amplitude * std::sin(kTwoPi * static_cast<double>(k) / d.period);
}

/** Discretized linear truth model, with an exact ZOH ambient-disturbance column. */
struct LinearTruth {
  Mat4 A;
  Mat42 B;
  Vec4 E;
};

LinearTruth make_linear_truth(const plant::PlantParams& p, const plant::SteadyState& ss,
                              double Ts) {
  const plant::ContinuousModel m = plant::linearize(p, ss);
  const Vec4 Ec = plant::ambient_sensitivity(p, ss.T_amb);
  Eigen::Matrix<double, 7, 7> M = Eigen::Matrix<double, 7, 7>::Zero();
  M.topLeftCorner<4, 4>() = m.A;
  M.block<4, 2>(0, 4) = m.B;
  M.block<4, 1>(0, 6) = Ec;
  const Eigen::Matrix<double, 7, 7> X = (M * Ts).exp();
  LinearTruth lt;
  lt.A = X.topLeftCorner<4, 4>();
  lt.B = X.block<4, 2>(0, 4);
  lt.E = X.block<4, 1>(0, 6);
  return lt;
}

/// True sensor deviations of either truth model.
Vec2 sensor_deviation(bool linear, const Vec4& x_abs, const Vec4& x_dev,
                      const plant::SteadyState& ss) {
  Vec2 s;
  if (linear) {
    s << x_dev(2), x_dev(3);
  } else {
    s << x_abs(2) - ss.T_inf, x_abs(3) - ss.T_inf;
  }
  return s;
}

/**
 * Nominal closed-loop rollout used to calibrate residual statistics: same
 * truth model, controller, noise level, and drift as the scored run, but no
 * attack and no actuation-noise injection.
 */
std::vector<Vec2> calibration_rollout(const ScenarioConfig& cfg, const plant::SteadyState& ss,
                                      const synthesis::ControllerRealization& ctrl,
                                      const LinearTruth& lt, Rng rng_meas) {
  std::vector<Vec2> residuals;
  const int n = cfg.calibration.steps;
  residuals.reserve(static_cast<std::size_t>(std::max(0, n - cfg.calibration.discard)));

  // The rig starts cold: feedforward plus feedback heat it to the hold point,
  // and the discard window drops the heat-up transient from the estimate.
  Vec4 x_abs;
  x_abs << cfg.T_amb, cfg.T_amb, cfg.T_amb, cfg.T_amb;
  Vec4 x_dev = Vec4::Constant(cfg.T_amb - ss.T_inf);
  Vec x_c = Vec::Zero(ctrl.n_c);

  for (int k = 0; k < n; ++k) {
    const double Ta_eff = cfg.T_amb + drift_at(cfg.drift, k);
    Vec2 y = sensor_deviation(cfg.linear_truth, x_abs, x_dev, ss);
    y(0) += cfg.sigma_meas * rng_meas.gaussian();
    y(1) += cfg.sigma_meas * rng_meas.gaussian();

    const synthesis::ControllerStep cs = synthesis::controller_step(ctrl, x_c, y);
    if (k >= cfg.calibration.discard) residuals.push_back(cs.r_bar);

    const Vec2 u_abs = plant::clamp(ss.Q_inf + cs.u_raw);
    if (cfg.linear_truth) {
      x_dev = lt.A * x_dev + lt.B * (u_abs - ss.Q_inf) + lt.E * (Ta_eff - cfg.T_amb);
    } else {
      x_abs = plant::step(cfg.params, x_abs, u_abs, 1.0, Ta_eff);
    }
    x_c = cs.x_c_next;
  }
  return residuals;
}

}  // namespace

Metrics compute_metrics(const std::vector<TraceRecord>& trace, const Timeline& tl,
                        bool attack_enabled, const attack::ImpactSolution& impact,
                        const synthesis::ResidualStats& stats, double rho_Ac, double J_D,
                        std::uint64_t seed, const std::string& name) {
  Metrics m;
  m.attack_enabled = attack_enabled;
  m.seed = seed;
  m.name = name;
  m.rho_Ac = rho_Ac;
  m.J_D = J_D;
  m.N_II = attack_enabled ? tl.N_II : 0;
  m.sigma_r_diag[0] = stats.Sigma_r(0, 0);
  m.sigma_r_diag[1] = stats.Sigma_r(1, 1);
  m.e_c_at_kII = kNaN;
  m.e_D_at_kIII = kNaN;

  const int total = static_cast<int>(trace.size());
  if (total == 0) return m;

  long stage3_count = 0;
  double stage3_yD = 0.0;
  for (const TraceRecord& row : trace) {
    if (row.alarm) {
      ++m.alarms_total;
      switch (row.stage) {
        case 1: ++m.alarms_stage1; break;
        case 2: ++m.alarms_stage2; break;
        case 3: ++m.alarms_stage3; break;
        default: ++m.alarms_warmup; break;
      }
    }
    if (row.stage == 3) {
      ++stage3_count;
      stage3_yD += row.yD;
    }
  }
  m.false_alarm_rate = static_cast<double>(m.alarms_total) / static_cast<double>(total);
  m.mean_yD_stage3 = (stage3_count > 0) ? stage3_yD / static_cast<double>(stage3_count) : 0.0;

  // Averaging windows: 300 s before the takeover, final 60 s.
  const int k_pre_end = attack_enabled ? std::min(tl.k_II(), total) : total;
  const int k_pre_begin = std::max(0, k_pre_end - 300);
  const int k_end_begin = std::max(0, total - 60);
  double pre[2] = {0, 0}, fin[2] = {0, 0};
  int n_pre = 0, n_fin = 0;
  for (int k = k_pre_begin; k < k_pre_end; ++k) {
    pre[0] += trace[static_cast<std::size_t>(k)].TH1;
    pre[1] += trace[static_cast<std::size_t>(k)].TH2;
    ++n_pre;
  }
  for (int k = k_end_begin; k < total; ++k) {
    fin[0] += trace[static_cast<std::size_t>(k)].TH1;
    fin[1] += trace[static_cast<std::size_t>(k)].TH2;
    ++n_fin;
  }
  if (n_pre > 0) {
    m.pre_mean_th[0] = pre[0] / n_pre;
    m.pre_mean_th[1] = pre[1] / n_pre;
  }
  if (n_fin > 0) {
    m.end_mean_th[0] = fin[0] / n_fin;
    m.end_mean_th[1] = fin[1] / n_fin;
  }

  if (attack_enabled) {
    m.theoretical_impact = impact.value;
    m.target_index = impact.target_index;
    m.targeted_heater = impact.target_index % 2;
    m.achieved_impact = m.end_mean_th[m.targeted_heater] - m.pre_mean_th[m.targeted_heater];
    bool clean = true;
    for (const TraceRecord& row : trace) {
      if (row.k >= tl.k_II() && row.alarm) clean = false;
    }
    m.stealthy = clean;
    const int k_ec = tl.k_II() - 1;
    if (k_ec >= 0 && k_ec < total) m.e_c_at_kII = trace[static_cast<std::size_t>(k_ec)].ec;
    const int k_eD = tl.k_III() - 1;
    if (k_eD >= 0 && k_eD < total) m.e_D_at_kIII = trace[static_cast<std::size_t>(k_eD)].eD;
  }
  return m;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg_in, std::uint64_t seed) {
  ScenarioConfig cfg = cfg_in;
  if (cfg.attack.enabled) {
    if (cfg.timeline.k_I < 0 || cfg.timeline.N_I < 2 || cfg.timeline.N_III < 1) {
      throw NumericError("run_scenario: attack timeline requires k_I >= 0, N_I >= 2, N_III >= 1");
    }
  }
  if (!(cfg.sigma_meas >= 0.0)) {
    throw NumericError("run_scenario: negative measurement noise");
  }

  ScenarioResult out;
  Rng master(seed);

  // ----- operating point, model, controller -------------------------------
  out.ss = plant::steady_state(cfg.params, cfg.T_amb, cfg.T_set);
  out.model = plant::discretize(plant::linearize(cfg.params, out.ss), 1.0);
  out.ctrl = (cfg.kind == synthesis::ControllerKind::lqg)
                 ? synthesis::design_lqg(out.model, cfg.weights)
                 : synthesis::design_lqi(out.model, cfg.weights);
  if (cfg.injection.enabled()) {
    out.ctrl.Sigma_nu = cfg.injection.variance * Mat::Identity(out.ctrl.n_c, out.ctrl.n_c);
  }

  // ----- residual calibration ----------------------------------------------
  const LinearTruth lt = make_linear_truth(cfg.params, out.ss, 1.0);
  if (cfg.sigma_meas > 0.0) {
    const std::vector<Vec2> cal =
        calibration_rollout(cfg, out.ss, out.ctrl, lt, master.substream(1));
    out.stats = synthesis::estimate_residual_stats(cal);
  } else {
    // Noise-free runs have a degenerate residual distribution; whitening is
    // undefined there, so the monitor consumes raw residuals unchanged.
    out.stats.mean = Vec2::Zero();
    out.stats.Sigma_r = Mat2::Identity();
    out.stats.normalizer = Mat2::Identity();
  }

  // ----- detector threshold -------------------------------------------------
  detect::DetectorConfig det = cfg.detector;
  if (det.J_D <= 0.0) {
    if (det.variant == detect::Variant::chi2) {
      det.J_D = detect::chi2_threshold(det.arl_target, det.dim);
    } else {
      // Threshold tuning is a design-time activity: deterministic seed so the
      // threshold does not depend on the run seed.
      det.J_D = detect::tune_mewma_threshold(det.arl_target, det.beta, det.dim).J_D;
    }
  }
  cfg.detector = det;

  // ----- timeline resolution -------------------------------------------------
  Timeline tl = cfg.timeline;
  if (det.variant == detect::Variant::chi2) {
    tl.N_II = 0;  // the memoryless detector has no state to ramp
  } else if (tl.N_II < 0) {
    if (cfg.attack.gamma > 0.0) {
      tl.N_II = attack::stage2_length(det.beta, det.J_D, cfg.attack.gamma);
    } else {
      throw NumericError("run_scenario: N_II unset and no gamma to derive it from");
    }
  }
  cfg.timeline = tl;

  // ----- whitening maps -------------------------------------------------------
  const Mat2 N0 = out.stats.normalizer;
  Mat2 N_inj = N0;
  Mat2 raw0 = synthesis::spd_sqrt(out.stats.Sigma_r);
  Mat2 raw_inj = raw0;
  if (cfg.injection.enabled()) {
    const Mat M = out.ctrl.C * out.ctrl.Tc;
    const Mat2 inflated =
        out.stats.Sigma_r + Mat2(M * out.ctrl.Sigma_nu * M.transpose());
    N_inj = synthesis::spd_inv_sqrt(inflated);
    raw_inj = synthesis::spd_sqrt(inflated);
  }

  // ----- attack plan -----------------------------------------------------------
  out.feasibility = attack::stage1_feasibility(out.ctrl);
  attack::AttackerKnowledge know;
  const bool mewma = det.variant == detect::Variant::mewma;
  attack::Stage2Options s2opt;
  s2opt.support = cfg.attack.support;
  s2opt.stealth_margin = cfg.attack.stealth_margin;
  attack::Stage2State st2;
  attack::ControllerEstimate est;
  bool est_active = false;

  if (cfg.attack.enabled) {
    if (out.feasibility == attack::Feasibility::infeasible) {
      throw InfeasibleError("run_scenario: controller recursion diverges; listening stage infeasible");
    }
    switch (cfg.attack.stage1_mode) {
      case Stage1ModeChoice::open_loop:
        out.stage1_mode = attack::Stage1Mode::open_loop;
        break;
      case Stage1ModeChoice::joint_kf:
        out.stage1_mode = attack::Stage1Mode::joint_kf;
        break;
      case Stage1ModeChoice::automatic:
        out.stage1_mode = (out.feasibility == attack::Feasibility::strict)
                              ? attack::Stage1Mode::open_loop
                              : attack::Stage1Mode::joint_kf;
        break;
    }
    const double s_att = cfg.attack.attacker_sigma_r_scale;
    if (!(s_att > 0.0)) {
      throw NumericError("run_scenario: attacker_sigma_r_scale must be positive");
    }
    know.ctrl = out.ctrl;
    know.model = out.model;
    know.det = det;
    know.Sigma_r = s_att * out.stats.Sigma_r;
    const bool renorm_during_attack =
        cfg.injection.enabled() && cfg.injection.start_k <= tl.k_II();
    know.normalizer = (renorm_during_attack ? N_inj : N0) / std::sqrt(s_att);
    know.raw_map = std::sqrt(s_att) * (renorm_during_attack ? raw_inj : raw0);
    know.Sw = cfg.attack.attacker_sw_scale * cfg.weights.Sw;
    know.Sv = cfg.attack.attacker_sv_scale * cfg.weights.Sv;

    const attack::ImpactProblem prob = attack::build_impact_problem(know, tl.N_III);
    attack::Stage3Options s3opt;
    s3opt.stealth_margin = cfg.attack.stealth_margin;
    out.impact = attack::solve_worst_case(prob, det, s3opt);
  }
  out.monitor_normalizer =
      (cfg.injection.enabled() && cfg.injection.start_k <= tl.k_II()) ? N_inj : N0;
  out.resolved = cfg;

  // ----- scored run --------------------------------------------------------------
  const int total = tl.total();
  Rng rng_meas = master.substream(2);
  Rng rng_inj = master.substream(3);
  Rng rng_att = master.substream(4);

  // Cold start, as on the bench: the warmup stage heats the rig to the hold
  // point before the timeline's listening stage begins.
  Vec4 x_abs;
  x_abs << cfg.T_amb, cfg.T_amb, cfg.T_amb, cfg.T_amb;
  Vec4 x_dev = Vec4::Constant(cfg.T_amb - out.ss.T_inf);
  Vec x_c = Vec::Zero(out.ctrl.n_c);
  detect::DetectorState dst = detect::make_state(det);
  const Mat nu_sqrt =
      cfg.injection.enabled() ? synthesis::spd_sqrt(out.ctrl.Sigma_nu) : Mat();

  out.trace.clear();
  out.trace.reserve(static_cast<std::size_t>(total));

  for (int k = 0; k < total; ++k) {
    const double Ta_eff = cfg.T_amb + drift_at(cfg.drift, k);

    // Measurement (true sensor deviation plus noise).
    Vec2 y = sensor_deviation(cfg.linear_truth, x_abs, x_dev, out.ss);
    y(0) += cfg.sigma_meas * rng_meas.gaussian();
    y(1) += cfg.sigma_meas * rng_meas.gaussian();

    // Stage bookkeeping.
    int stage = 0;
    if (cfg.attack.enabled && k >= tl.k_I) {
      if (k < tl.k_II()) {
        stage = 1;
      } else if (k < tl.k_III()) {
        stage = 2;
      } else {
        stage = 3;
      }
    }
    if (cfg.attack.enabled && !est_active && k >= tl.k_I) {
      est = attack::make_stage1_estimate(know, out.stage1_mode, cfg.attack.joint_kf_p0);
      est_active = true;
    }

    // Attacker's sensor takeover.
    Vec2 a = Vec2::Zero();
    Vec2 extra = Vec2::Zero();
    bool spoof = false;
    const bool inj_on = cfg.injection.enabled() && k >= cfg.injection.start_k;
    const Mat2& N_act = inj_on ? N_inj : N0;
    if (stage == 2) {
      const attack::Stage2Step s2 = attack::stage2_step(know, st2, rng_att, k - tl.k_II(), s2opt);
      a = s2.a;
      spoof = true;
    } else if (stage == 3) {
      const int idx = k - tl.k_III();
      a = out.impact.a[static_cast<std::size_t>(idx)];
      if (idx == 0 && mewma) extra = attack::stage3_first_extra(know, st2.x_D_hat);
      spoof = true;
    }
    Vec2 yt = y;
    if (spoof) yt = y + attack::attack_signal(know, est.x_c_hat, y, a, extra);

    // Controller, residual, detector.
    const synthesis::ControllerStep cs = synthesis::controller_step(out.ctrl, x_c, yt);
    const Vec2 r = N_act * cs.r_bar;
    const detect::DetectorStep ds = detect::detector_step(det, dst, r);

    // Controller state advance, with actuation-noise injection when active.
    Vec x_c_next = cs.x_c_next;
    if (inj_on) {
      Vec g(out.ctrl.n_c);
      for (int i = 0; i < out.ctrl.n_c; ++i) g(i) = rng_inj.gaussian();
      x_c_next += nu_sqrt * g;
    }

    // Attacker model updates (after its spoofing decision for this sample).
    if (est_active) {
      if (stage <= 1) {
        attack::stage1_step(know, est, yt);
      } else {
        attack::propagate_step(know, est, yt);
      }
      if (stage == 3 && mewma) {
        const Vec2 inp = a + N_act * extra;
        st2.x_D_hat = det.beta * inp + (1.0 - det.beta) * st2.x_D_hat;
      }
      if (cfg.attack.perfect_stage1 && k >= tl.k_II() - 1) {
        est.x_c_hat = x_c_next;
      }
    }

    // Diagnostics are write-only: computed after every attacker decision.
    double ec = kNaN, eD = kNaN, er = kNaN;
    if (cfg.log_diagnostics && est_active) {
      const Vec diff = est.x_c_hat - x_c_next;
      ec = diff.lpNorm<Eigen::Infinity>();
      er = (N_act * Vec2(out.ctrl.C * (out.ctrl.Tc * diff))).lpNorm<Eigen::Infinity>();
      if (mewma && stage >= 2) {
        eD = (st2.x_D_hat - Vec2(dst.x_D)).lpNorm<Eigen::Infinity>();
      }
    }

    // Actuation.
    const Vec2 u_raw_abs = out.ss.Q_inf + cs.u_raw;
    const Vec2 u_abs = plant::clamp(u_raw_abs);

    TraceRecord row;
    row.k = k;
    if (cfg.linear_truth) {
      row.TH1 = out.ss.T_inf + x_dev(0);
      row.TH2 = out.ss.T_inf + x_dev(1);
      row.TS1 = out.ss.T_inf + x_dev(2);
      row.TS2 = out.ss.T_inf + x_dev(3);
    } else {
      row.TH1 = x_abs(0);
      row.TH2 = x_abs(1);
      row.TS1 = x_abs(2);
      row.TS2 = x_abs(3);
    }
    row.y1 = y(0);
    row.y2 = y(1);
    row.yt1 = yt(0);
    row.yt2 = yt(1);
    row.u1raw = u_raw_abs(0);
    row.u2raw = u_raw_abs(1);
    row.u1 = u_abs(0);
    row.u2 = u_abs(1);
    row.r1 = r(0);
    row.r2 = r(1);
    row.yD = ds.y_D;
    row.alarm = ds.alarm;
    row.stage = stage;
    row.ec = ec;
    row.eD = eD;
    row.er = er;
    out.trace.push_back(row);

    // Truth advance.
    if (cfg.linear_truth) {
      x_dev = lt.A * x_dev + lt.B * (u_abs - out.ss.Q_inf) + lt.E * (Ta_eff - cfg.T_amb);
    } else {
      x_abs = plant::step(cfg.params, x_abs, u_abs, 1.0, Ta_eff);
    }
    x_c = x_c_next;
  }

  out.metrics = compute_metrics(out.trace, tl, cfg.attack.enabled, out.impact, out.stats,
                                out.ctrl.rho_Ac, det.J_D, seed, cfg.name);
  return out;
}

}  // namespace tlab::sim
