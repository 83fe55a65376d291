#include "tlab/synthesis.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "tlab/error.hpp"

namespace tlab::synthesis {

namespace {

Mat symmetrize(const Mat& P) { return 0.5 * (P + P.transpose()); }

}  // namespace

DareResult solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, double tol,
                      long max_iter) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw NumericError("solve_dare: inconsistent matrix dimensions");
  }
  Mat P = symmetrize(Q);
  DareResult out;
  for (long it = 1; it <= max_iter; ++it) {
    const Mat BtP = B.transpose() * P;
    const Mat G = (R + BtP * B).inverse();
    const Mat APB = A.transpose() * P * B;
    Mat Pn = A.transpose() * P * A - APB * G * APB.transpose() + Q;
    Pn = symmetrize(Pn);
    const double delta = (Pn - P).cwiseAbs().maxCoeff();
    P = Pn;
    if (delta < tol) {
      out.iterations = static_cast<int>(it);
      // Confirm the fixed point independently of the stopping rule.
      const Mat BtP2 = B.transpose() * P;
      const Mat G2 = (R + BtP2 * B).inverse();
      const Mat APB2 = A.transpose() * P * B;
      const Mat res = A.transpose() * P * A - APB2 * G2 * APB2.transpose() + Q - P;
      if (res.cwiseAbs().maxCoeff() > 100.0 * tol) {
        throw ConvergenceError("solve_dare: fixed point residual above tolerance");
      }
      out.P = P;
      out.K = G2 * B.transpose() * P * A;
      return out;
    }
  }
  throw ConvergenceError("solve_dare: iteration budget exhausted");
}

KalmanResult kalman_predictor(const Mat& A, const Mat& C, const Mat& Sw, const Mat& Sv,
                              double tol, long max_iter) {
  // The filter Riccati equation is the dual of the control one:
  // substitute A -> A', B -> C', Q -> Sw, R -> Sv.
  const DareResult dual = solve_dare(A.transpose(), C.transpose(), Sw, Sv, tol, max_iter);
  KalmanResult out;
  out.P = dual.P;
  out.iterations = dual.iterations;
  // L = A P C' (C P C' + Sv)^{-1} is the transpose of the dual gain.
  out.L = dual.K.transpose();
  return out;
}

double spectral_radius(const Mat& A) {
  return A.eigenvalues().cwiseAbs().maxCoeff();
}

ControllerRealization design_lqg(const plant::DiscreteModel& m, const Weights& w) {
  const Mat A = m.A, B = m.B, C = m.C;
  const DareResult lqr = solve_dare(A, B, w.Qx, w.Ru);
  const KalmanResult kf = kalman_predictor(A, C, w.Sw, w.Sv);

  ControllerRealization c;
  c.kind = ControllerKind::lqg;
  c.n_c = 4;
  c.Ts = m.Ts;
  c.K_xhat = lqr.K;
  c.K_int = Mat();
  c.L = kf.L;
  // Estimator with input substituted: x_hat+ = A x_hat + B u + L (y - C x_hat),
  // u = -K x_hat.
  c.Ac = A - B * lqr.K - kf.L * C;
  c.Bc = kf.L;
  c.Cc = -lqr.K;
  c.Tc = Mat::Identity(4, 4);
  c.C = C;
  c.Sigma_nu = Mat::Zero(4, 4);
  c.rho_Ac = spectral_radius(c.Ac);
  return c;
}

ControllerRealization design_lqi(const plant::DiscreteModel& m, const Weights& w) {
  const Mat A = m.A, B = m.B, C = m.C;
  const double Ts = m.Ts;

  // Augment with output integrators z+ = z - Ts*y and weight them with Qint.
  Mat A_aug = Mat::Zero(6, 6);
  A_aug.topLeftCorner(4, 4) = A;
  A_aug.bottomLeftCorner(2, 4) = -Ts * C;
  A_aug.bottomRightCorner(2, 2) = Mat2::Identity();
  Mat B_aug = Mat::Zero(6, 2);
  B_aug.topRows(4) = B;
  Mat Q_aug = Mat::Zero(6, 6);
  Q_aug.topLeftCorner(4, 4) = w.Qx;
  Q_aug.bottomRightCorner(2, 2) = w.Qint;

  const DareResult lqr = solve_dare(A_aug, B_aug, Q_aug, w.Ru);
  const Mat K_x = lqr.K.leftCols(4);
  const Mat K_i = lqr.K.rightCols(2);
  // Predictor gain from the unaugmented model; the integrators are part of
  // the controller, not of the estimated plant.
  const KalmanResult kf = kalman_predictor(A, C, w.Sw, w.Sv);

  ControllerRealization c;
  c.kind = ControllerKind::lqi;
  c.n_c = 6;
  c.Ts = Ts;
  c.K_xhat = K_x;
  c.K_int = K_i;
  c.L = kf.L;
  // Controller state x_c = (x_hat, z):
  //   x_hat+ = (A - B K_x - L C) x_hat - B K_i z + L y
  //   z+     = z - Ts y
  c.Ac = Mat::Zero(6, 6);
  c.Ac.topLeftCorner(4, 4) = A - B * K_x - kf.L * C;
  c.Ac.topRightCorner(4, 2) = -B * K_i;
  c.Ac.bottomRightCorner(2, 2) = Mat2::Identity();
  c.Bc = Mat::Zero(6, 2);
  c.Bc.topRows(4) = kf.L;
  c.Bc.bottomRows(2) = -Ts * Mat2::Identity();
  c.Cc = Mat::Zero(2, 6);
  c.Cc.leftCols(4) = -K_x;
  c.Cc.rightCols(2) = -K_i;
  c.Tc = Mat::Zero(4, 6);
  c.Tc.leftCols(4) = Mat4::Identity();
  c.C = C;
  c.Sigma_nu = Mat::Zero(6, 6);
  c.rho_Ac = spectral_radius(c.Ac);
  return c;
}

ControllerStep controller_step(const ControllerRealization& c, const Vec& x_c,
                               const Vec2& y_tilde) {
  if (x_c.size() != c.n_c) {
    throw NumericError("controller_step: state dimension mismatch");
  }
  ControllerStep s;
  s.u_raw = c.Cc * x_c;
  s.r_bar = y_tilde - c.C * (c.Tc * x_c);
  s.x_c_next = c.Ac * x_c + c.Bc * y_tilde;
  return s;
}

ResidualStats estimate_residual_stats(const std::vector<Vec2>& residuals) {
  if (residuals.size() < 2) {
    throw NumericError("estimate_residual_stats: need at least two samples");
  }
  const double n = static_cast<double>(residuals.size());
  Vec2 mean = Vec2::Zero();
  for (const Vec2& r : residuals) mean += r;
  mean /= n;
  Mat2 S = Mat2::Zero();
  for (const Vec2& r : residuals) {
    const Vec2 d = r - mean;
    S += d * d.transpose();
  }
  S /= (n - 1.0);
  ResidualStats out;
  out.mean = mean;
  out.Sigma_r = S;
  out.normalizer = spd_inv_sqrt(S);
  return out;
}

Mat2 injection_renormalizer(const ControllerRealization& c, const Mat2& Sigma_r) {
  const Mat M = c.C * c.Tc;  // 2 x n_c
  const Mat2 inflated = Sigma_r + (M * c.Sigma_nu * M.transpose());
  return spd_inv_sqrt(inflated);
}

Mat spd_sqrt(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrize(S));
  if (eig.info() != Eigen::Success) {
    throw NumericError("spd_sqrt: eigendecomposition failed");
  }
  const Vec d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

Mat spd_inv_sqrt(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrize(S));
  if (eig.info() != Eigen::Success) {
    throw NumericError("spd_inv_sqrt: eigendecomposition failed");
  }
  if (eig.eigenvalues().minCoeff() < 1e-12) {
    throw NumericError("spd_inv_sqrt: matrix is numerically degenerate");
  }
  const Vec d = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace tlab::synthesis
