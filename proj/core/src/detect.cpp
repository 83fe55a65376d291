#include "tlab/detect.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "tlab/error.hpp"

namespace tlab::detect {

DetectorState make_state(const DetectorConfig& cfg) {
  DetectorState s;
  s.x_D = Vec::Zero(cfg.dim);
  return s;
}

DetectorStep detector_step(const DetectorConfig& cfg, DetectorState& state, const Vec2& r) {
  DetectorStep out;
  if (cfg.variant == Variant::chi2) {
    out.y_D = r.squaredNorm();
    out.alarm = out.y_D > cfg.J_D;
    return out;
  }
  if (state.x_D.size() != cfg.dim) {
    throw NumericError("detector_step: state dimension mismatch");
  }
  const double b = cfg.beta;
  state.x_D = b * r + (1.0 - b) * state.x_D;
  out.y_D = ((2.0 - b) / b) * state.x_D.squaredNorm();
  out.alarm = out.y_D > cfg.J_D;
  if (out.alarm) {
    state.x_D.setZero();
  }
  return out;
}

// ===== chi-square quantile ===================================================

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) {
    throw NumericError("gamma_p: invalid arguments");
  }
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) {
    // Series expansion: P(a,x) = x^a e^-x / Gamma(a) * sum x^n / (a)_{n+1}.
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // Continued fraction (modified Lentz) for Q(a,x); P = 1 - Q.
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  return 1.0 - q;
}

double chi2_threshold(double arl, int dim) {
  if (!(arl > 1.0) || dim < 1) {
    throw NumericError("chi2_threshold: need arl > 1 and dim >= 1");
  }
  const double p = 1.0 - 1.0 / arl;
  const double a = 0.5 * static_cast<double>(dim);
  // Bisection on the chi-square CDF P(a, x/2); the bracket is generous and the
  // CDF is strictly increasing.
  double lo = 0.0;
  double hi = static_cast<double>(dim) + 40.0 * std::sqrt(static_cast<double>(dim)) + 100.0;
  while (gamma_p(a, 0.5 * hi) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (gamma_p(a, 0.5 * mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ===== Monte Carlo threshold tuning =========================================

namespace {

/// Pre-generated standard-normal residual stream shared by every candidate
/// threshold (common random numbers make the alarm count monotone in J).
struct NoiseBank {
  std::vector<double> data;  // batches * steps * dim, batch-major
  long steps_per_batch = 0;
  int batches = 0;
  int dim = 0;

  NoiseBank(const TuneOptions& opt, int dim_in) {
    batches = opt.batches;
    dim = dim_in;
    steps_per_batch = opt.steps_per_eval / opt.batches;
    data.resize(static_cast<std::size_t>(batches) * steps_per_batch * dim);
    Rng master(opt.seed);
    std::size_t k = 0;
    for (int b = 0; b < batches; ++b) {
      Rng rng = master.substream(static_cast<std::uint64_t>(b) + 1);
      for (long s = 0; s < steps_per_batch; ++s) {
        for (int d = 0; d < dim; ++d) data[k++] = rng.gaussian();
      }
    }
  }
};

double arl_for_threshold(const NoiseBank& bank, double J, double beta) {
  const double kappa = (2.0 - beta) / beta;
  long alarms = 0;
  const long total_steps = static_cast<long>(bank.batches) * bank.steps_per_batch;
  std::size_t k = 0;
  for (int b = 0; b < bank.batches; ++b) {
    // Each batch restarts the detector from zero.
    double x0 = 0.0, x1 = 0.0;  // dim == 2 fast path; general path below
    if (bank.dim == 2) {
      for (long s = 0; s < bank.steps_per_batch; ++s) {
        x0 = beta * bank.data[k] + (1.0 - beta) * x0;
        x1 = beta * bank.data[k + 1] + (1.0 - beta) * x1;
        k += 2;
        if (kappa * (x0 * x0 + x1 * x1) > J) {
          ++alarms;
          x0 = 0.0;
          x1 = 0.0;
        }
      }
    } else {
      Vec x = Vec::Zero(bank.dim);
      for (long s = 0; s < bank.steps_per_batch; ++s) {
        for (int d = 0; d < bank.dim; ++d) {
          x(d) = beta * bank.data[k++] + (1.0 - beta) * x(d);
        }
        if (kappa * x.squaredNorm() > J) {
          ++alarms;
          x.setZero();
        }
      }
    }
  }
  if (alarms == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(total_steps) / static_cast<double>(alarms);
}

}  // namespace

double mewma_arl_estimate(double J, double beta, int dim, const TuneOptions& opt) {
  const NoiseBank bank(opt, dim);
  return arl_for_threshold(bank, J, beta);
}

TuneResult tune_mewma_threshold(double arl, double beta, int dim, const TuneOptions& opt) {
  if (!(arl > 1.0) || !(beta > 0.0 && beta <= 1.0) || dim < 1) {
    throw NumericError("tune_mewma_threshold: invalid arguments");
  }
  const NoiseBank bank(opt, dim);
  double lo = opt.lo, hi = opt.hi;
  const double arl_lo = arl_for_threshold(bank, lo, beta);
  double arl_hi = arl_for_threshold(bank, hi, beta);
  if (arl_lo > arl) {
    throw ConvergenceError("tune_mewma_threshold: bracket low end already above target");
  }
  int expand = 0;
  while (!(arl_hi > arl) && expand++ < 8) {
    hi *= 4.0;
    arl_hi = arl_for_threshold(bank, hi, beta);
  }
  if (!(arl_hi > arl)) {
    throw ConvergenceError("tune_mewma_threshold: cannot bracket the target rate");
  }
  TuneResult out;
  for (int it = 1; it <= opt.max_bisect; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double est = arl_for_threshold(bank, mid, beta);
    out.iterations = it;
    if (std::isfinite(est) && std::fabs(est - arl) <= opt.rel_tol * arl) {
      out.J_D = mid;
      out.arl_estimate = est;
      return out;
    }
    if (est < arl) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // The bracket collapsed without hitting the tolerance window; report the
  // midpoint if the estimate is close, otherwise fail loudly.
  const double mid = 0.5 * (lo + hi);
  const double est = arl_for_threshold(bank, mid, beta);
  if (std::isfinite(est) && std::fabs(est - arl) <= 2.0 * opt.rel_tol * arl) {
    out.J_D = mid;
    out.arl_estimate = est;
    return out;
  }
  throw ConvergenceError("tune_mewma_threshold: bisection did not reach tolerance");
}

}  // namespace tlab::detect
