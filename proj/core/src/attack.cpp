#include "tlab/attack.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "tlab/error.hpp"

namespace tlab::attack {

Feasibility stage1_feasibility(const synthesis::ControllerRealization& c, double tol) {
  const double rho = c.rho_Ac;
  if (std::fabs(rho - 1.0) <= tol) return Feasibility::marginal;
  if (rho < 1.0) return Feasibility::strict;
  return Feasibility::infeasible;
}

ControllerEstimate make_stage1_estimate(const AttackerKnowledge& know, Stage1Mode mode,
                                        double p0) {
  ControllerEstimate est;
  est.mode = mode;
  est.x_c_hat = Vec::Zero(know.ctrl.n_c);
  if (mode == Stage1Mode::joint_kf) {
    const int nz = 4 + know.ctrl.n_c;
    est.z_hat = Vec::Zero(nz);
    est.P = p0 * Mat::Identity(nz, nz);
  }
  return est;
}

namespace {

/// Closed-loop matrices of the joint plant/controller system seen by the
/// listening attacker: z = (x, x_c), measurement y = C x + v.
struct JointModel {
  Mat F;   // (4+n) x (4+n)
  Mat H;   // 2 x (4+n)
  Mat Qz;  // process noise covariance of z
  Mat S;   // cross-covariance E[eta v'] between z-noise and measurement noise
};

JointModel joint_model(const AttackerKnowledge& know) {
  const auto& c = know.ctrl;
  const int n = c.n_c;
  const int nz = 4 + n;
  JointModel jm;
  jm.F = Mat::Zero(nz, nz);
  jm.F.topLeftCorner(4, 4) = know.model.A;
  jm.F.topRightCorner(4, n) = know.model.B * c.Cc;
  jm.F.bottomLeftCorner(n, 4) = c.Bc * c.C;
  jm.F.bottomRightCorner(n, n) = c.Ac;
  jm.H = Mat::Zero(2, nz);
  jm.H.leftCols(4) = c.C;
  // z-noise eta = (w, Bc v [+ nu]): the controller is driven by the same
  // measurement noise it receives, hence the cross term with v.
  jm.Qz = Mat::Zero(nz, nz);
  jm.Qz.topLeftCorner(4, 4) = know.Sw;
  jm.Qz.bottomRightCorner(n, n) = c.Bc * know.Sv * c.Bc.transpose() + c.Sigma_nu;
  jm.S = Mat::Zero(nz, 2);
  jm.S.bottomRows(n) = c.Bc * know.Sv;
  return jm;
}

}  // namespace

void stage1_step(const AttackerKnowledge& know, ControllerEstimate& est, const Vec2& y_tilde) {
  const auto& c = know.ctrl;
  if (est.mode == Stage1Mode::open_loop) {
    est.x_c_hat = c.Ac * est.x_c_hat + c.Bc * y_tilde;
    return;
  }
  // Joint Kalman filter with correlated process/measurement noise.
  const JointModel jm = joint_model(know);
  const Mat PHt = est.P * jm.H.transpose();
  const Mat Sy = jm.H * PHt + know.Sv;             // innovation covariance
  const Mat K = (jm.F * PHt + jm.S) * Sy.inverse();
  est.z_hat = jm.F * est.z_hat + K * (y_tilde - jm.H * est.z_hat);
  Mat P = jm.F * est.P * jm.F.transpose() + jm.Qz - K * Sy * K.transpose();
  P = 0.5 * (P + P.transpose());
  // Repair indefiniteness caused by the subtraction form of the update.
  Eigen::SelfAdjointEigenSolver<Mat> eig(P);
  if (eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() < 0.0) {
    const Vec d = eig.eigenvalues().cwiseMax(0.0);
    P = eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
    ++est.psd_repairs;
  }
  est.P = P;
  est.x_c_hat = est.z_hat.tail(c.n_c);
}

void propagate_step(const AttackerKnowledge& know, ControllerEstimate& est,
                    const Vec2& y_tilde) {
  // After the takeover the received signal is the attacker's own construction,
  // so it carries no plant information; both modes replay the controller
  // recursion, which tracks the real controller exactly up to the takeover
  // error (shared input, identical dynamics).
  est.x_c_hat = know.ctrl.Ac * est.x_c_hat + know.ctrl.Bc * y_tilde;
  if (est.mode == Stage1Mode::joint_kf && est.z_hat.size() > 0) {
    est.z_hat.tail(know.ctrl.n_c) = est.x_c_hat;
  }
}

Vec2 attack_signal(const AttackerKnowledge& know, const Vec& x_c_hat, const Vec2& y,
                   const Vec2& a, const Vec2& extra_raw) {
  const Vec2 mimic = know.ctrl.C * (know.ctrl.Tc * x_c_hat);
  return -y + mimic + know.raw_map * a + extra_raw;
}

int stage2_length(double beta, double J_D, double gamma) {
  if (!(beta > 0.0 && beta < 1.0) || !(J_D > 0.0) || !(gamma > 0.0)) {
    throw NumericError("stage2_length: invalid arguments");
  }
  const double rho0 = std::sqrt(beta * J_D / (2.0 - beta));
  if (gamma >= rho0) return 0;
  const double n = std::log(gamma / rho0) / std::log(1.0 - beta);
  // Absorb log/div rounding so a gamma produced by the forward formula
  // rho0 * (1-beta)^N maps back to exactly N.
  return static_cast<int>(std::ceil(n - 1e-9));
}

Stage2Step stage2_step(const AttackerKnowledge& know, Stage2State& st, Rng& rng, int j,
                       const Stage2Options& opt) {
  const double beta = know.det.beta;
  const double kappa = (2.0 - beta) / beta;
  const double J_eff = (1.0 - opt.stealth_margin) * know.det.J_D;
  const double ramp = 1.0 - std::pow(1.0 - beta, static_cast<double>(j) + 1.0);
  const double support = (opt.support == SupportMode::squared) ? ramp * ramp * J_eff
                                                               : ramp * J_eff;

  // Draw the statistic to hit from a shadow detector running on synthetic
  // white residuals, rejected into the support so the published trajectory
  // looks like a plausible quiet detector warming up.
  double y_target = support;
  Vec2 x_next = st.x_shadow;
  bool accepted = false;
  for (int t = 0; t < opt.max_rejects; ++t) {
    Vec2 r;
    r << rng.gaussian(), rng.gaussian();
    const Vec2 cand = beta * r + (1.0 - beta) * st.x_shadow;
    const double y = kappa * cand.squaredNorm();
    if (y <= support) {
      y_target = y;
      x_next = cand;
      accepted = true;
      break;
    }
  }
  if (!accepted) {
    // Fall back to the support boundary (scales the shadow state onto it).
    const double norm_target = std::sqrt(support / kappa);
    const double base = st.x_shadow.norm();
    x_next = (base > 0.0) ? Vec2(st.x_shadow * (norm_target / base))
                          : Vec2(norm_target, 0.0);
    y_target = support;
  }
  st.x_shadow = x_next;

  // Design vectors hitting y_target exactly form a sphere:
  // x_D+ = beta (a - m_c), m_c = -((1-beta)/beta) x_D_hat, radius from
  // kappa beta^2 ||a - m_c||^2 = y_target.
  const Vec2 m_c = -((1.0 - beta) / beta) * st.x_D_hat;
  const double R = std::sqrt(y_target / kappa) / beta;

  // Maximize ||A E{e} - L raw_map a||_inf over the sphere: per signed
  // coordinate (i, s) the optimum is a = m_c - s R g_i/||g_i||, value
  // s (A E{e})_i - s g_i' m_c + R ||g_i||.
  const Mat G = know.ctrl.L * know.raw_map;  // 4 x 2, rows g_i
  const Vec4 mgrow = know.model.A * st.Ee;
  double best = -std::numeric_limits<double>::infinity();
  Vec2 best_a = m_c;
  for (int i = 0; i < 4; ++i) {
    const Vec2 g = G.row(i).transpose();
    const double gn = g.norm();
    for (const double s : {1.0, -1.0}) {
      const double value = s * mgrow(i) - s * g.dot(m_c) + R * gn;
      Vec2 cand = m_c;
      if (gn > 0.0) cand -= (s * R / gn) * g;
      if (value > best) {
        best = value;
        best_a = cand;
      }
    }
  }

  st.Ee = mgrow - G * best_a;
  st.x_D_hat = beta * best_a + (1.0 - beta) * st.x_D_hat;

  Stage2Step out;
  out.a = best_a;
  out.y_D_target = y_target;
  return out;
}

ImpactProblem build_impact_problem(const AttackerKnowledge& know, int N) {
  if (N < 1) {
    throw NumericError("build_impact_problem: horizon must be positive");
  }
  const auto& c = know.ctrl;
  const int n = c.n_c;
  const int nz = 4 + n;
  Mat F = Mat::Zero(nz, nz);
  F.topLeftCorner(4, 4) = know.model.A;
  F.topRightCorner(4, n) = know.model.B * c.Cc;
  F.bottomRightCorner(n, n) = c.Ac + c.Bc * (c.C * c.Tc);
  Mat Btil = Mat::Zero(nz, 2);
  Btil.bottomRows(n) = c.Bc * know.raw_map;

  ImpactProblem prob;
  prob.N = N;
  prob.rows.resize(static_cast<std::size_t>(N));
  // rows[N-1-j] = [I 0] F^j Btil, built by iterating V <- F V.
  Mat V = Btil;
  for (int j = 0; j < N; ++j) {
    prob.rows[static_cast<std::size_t>(N - 1 - j)] = V.topRows(4);
    if (j + 1 < N) V = F * V;
  }
  return prob;
}

ImpactSolution solve_worst_case(const ImpactProblem& prob, const detect::DetectorConfig& det,
                                const Stage3Options& opt) {
  const int N = prob.N;
  const double J_eff = (1.0 - opt.stealth_margin) * det.J_D;
  ImpactSolution best;
  best.value = -1.0;

  for (int i = 0; i < 4; ++i) {
    // c_k = i-th row of the k-th impulse block.
    std::vector<Vec2> c(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) c[static_cast<std::size_t>(k)] = prob.rows[static_cast<std::size_t>(k)].row(i).transpose();

    double value = 0.0;
    std::vector<Vec2> a(static_cast<std::size_t>(N), Vec2::Zero());
    if (det.variant == detect::Variant::chi2) {
      // Per-step ball ||a(k)||^2 <= J_eff; optimum aligns with c_k.
      const double rad = std::sqrt(J_eff);
      for (int k = 0; k < N; ++k) {
        const double cn = c[static_cast<std::size_t>(k)].norm();
        value += rad * cn;
        if (cn > 0.0) a[static_cast<std::size_t>(k)] = rad * c[static_cast<std::size_t>(k)] / cn;
      }
    } else {
      // Substitution s(k) = x_D(k+1): per-step balls of radius rho, objective
      // (1/beta) sum d_k's(k), d_k = c_k - (1-beta) c_{k+1}.
      const double beta = det.beta;
      const double rho = std::sqrt(beta * J_eff / (2.0 - beta));
      std::vector<Vec2> s(static_cast<std::size_t>(N), Vec2::Zero());
      for (int k = 0; k < N; ++k) {
        Vec2 d = c[static_cast<std::size_t>(k)];
        if (k + 1 < N) d -= (1.0 - beta) * c[static_cast<std::size_t>(k + 1)];
        const double dn = d.norm();
        value += (rho / beta) * dn;
        if (dn > 0.0) s[static_cast<std::size_t>(k)] = rho * d / dn;
      }
      Vec2 s_prev = Vec2::Zero();
      for (int k = 0; k < N; ++k) {
        a[static_cast<std::size_t>(k)] = (s[static_cast<std::size_t>(k)] - (1.0 - beta) * s_prev) / beta;
        s_prev = s[static_cast<std::size_t>(k)];
      }
    }

    if (value > best.value) {
      best.value = value;
      best.target_index = i;
      best.target_sign = 1;
      best.a = std::move(a);
    }
  }

  best.iterations = N;
  best.suboptimal = false;

  // Report per-step feasibility margins by replaying the detector on the plan.
  best.margins.resize(static_cast<std::size_t>(N));
  if (det.variant == detect::Variant::chi2) {
    for (int k = 0; k < N; ++k) {
      best.margins[static_cast<std::size_t>(k)] = det.J_D - best.a[static_cast<std::size_t>(k)].squaredNorm();
    }
  } else {
    const double beta = det.beta;
    const double kappa = (2.0 - beta) / beta;
    Vec2 x = Vec2::Zero();
    for (int k = 0; k < N; ++k) {
      x = beta * best.a[static_cast<std::size_t>(k)] + (1.0 - beta) * x;
      best.margins[static_cast<std::size_t>(k)] = det.J_D - kappa * x.squaredNorm();
    }
  }
  return best;
}

Vec2 stage3_first_extra(const AttackerKnowledge& know, const Vec2& x_D_hat) {
  const double beta = know.det.beta;
  return -know.raw_map * (((1.0 - beta) / beta) * x_D_hat);
}

}  // namespace tlab::attack
