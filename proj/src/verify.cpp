#include "memstab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace memstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Relative tolerance for boundary cases that are equalities in exact arithmetic.
constexpr double kBoundaryTol = 1e-9;
constexpr double kZ95 = 1.959963984540054;

double wilson_lower(std::size_t successes, std::size_t n) {
  if (n == 0) return 0.0;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = kZ95 / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return std::max(0.0, center - half);
}

}  // namespace

bool VerificationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const CheckRecord* VerificationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

DecayFit fit_decay_rate(const MSCurve& curve, double window_fraction) {
  DecayFit fit;
  if (curve.times.empty()) {
    fit.message = "empty curve";
    return fit;
  }
  if (!(window_fraction > 0.0 && window_fraction <= 1.0))
    throw std::invalid_argument("window_fraction must lie in (0, 1]");
  const double t_end = curve.times.back();
  const double t_start = curve.times.front();
  fit.t_lo = t_end - window_fraction * (t_end - t_start);
  fit.t_hi = t_end;

  bool all_zero = true;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const double t = curve.times[i];
    if (t < fit.t_lo) continue;
    const double m = curve.mean[i];
    if (m != 0.0) all_zero = false;
    const double hw = i < curve.half_width.size() ? curve.half_width[i] : 0.0;
    if (m > 0.0 && hw < m) {
      xs.push_back(t);
      ys.push_back(std::log(m));
    }
  }
  if (all_zero) {
    fit.status = DecayFit::Status::AllZero;
    fit.sigma_hat = kInf;
    fit.message = "curve is identically zero on the window";
    return fit;
  }
  fit.n_points = xs.size();
  if (xs.size() < 10) {
    fit.message = "fewer than 10 usable points in the fit window";
    return fit;
  }

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double slope = sxy / sxx;
  fit.status = DecayFit::Status::Ok;
  fit.sigma_hat = -slope;
  fit.intercept = my - slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

CheckRecord check_ms_bound(const MSCurve& curve, const Certificate& cert, double ci_mult) {
  CheckRecord rec;
  rec.name = "ms_bound";
  rec.bound = 1.0;
  rec.slack = kInf;
  rec.passed = true;
  double worst_t = 0.0;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const double t = curve.times[i];
    const double allowance = cert.bound(t) + ci_mult * curve.half_width[i];
    const double mean = curve.mean[i];
    if (mean > allowance * (1.0 + kBoundaryTol)) rec.passed = false;
    const double ratio = mean / allowance;
    if (ratio > rec.measured) {
      rec.measured = ratio;
      worst_t = t;
    }
    if (mean > 0.0) rec.slack = std::min(rec.slack, (allowance - mean) / mean);
  }
  std::ostringstream note;
  note << "worst mean / (B e^{-sigma t} + " << ci_mult << " ci) at t = " << worst_t;
  rec.note = note.str();
  return rec;
}

CheckRecord check_K_functional(const MSCurve& curve, const Certificate& cert,
                               const ProblemSpec& p, double ci_mult) {
  CheckRecord rec;
  rec.name = "K_functional";
  rec.bound = cert.M;
  rec.slack = kInf;
  rec.passed = true;

  auto rate = [&](double s) { return theta(p, cert, s) + std::exp(cert.sigma * s) * beta(p, cert, s); };
  double integral = 0.0;
  double prev_t = 0.0;
  double prev_rate = rate(0.0);
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const double t = curve.times[i];
    const double cur_rate = rate(t);
    integral += 0.5 * (t - prev_t) * (prev_rate + cur_rate);
    prev_t = t;
    prev_rate = cur_rate;

    const double mean = curve.mean[i];
    const double K = mean * std::exp(cert.sigma * t - integral);
    const double stat = mean > 0.0 ? ci_mult * curve.half_width[i] / mean : 0.0;
    const double allowed = cert.M * (1.0 + stat);
    if (K > allowed * (1.0 + kBoundaryTol)) rec.passed = false;
    rec.measured = std::max(rec.measured, K / cert.M);
    rec.slack = std::min(rec.slack, (allowed - K) / cert.M);
  }
  rec.note = "measured is max K(t) / M";
  return rec;
}

ASDecayResult check_as_decay(std::span<const std::vector<double>> interval_sups,
                             const Certificate& cert, const ASCertificate& asc, int N0) {
  ASDecayResult out;
  out.record.name = "as_decay";
  out.record.passed = true;
  out.record.slack = kInf;
  out.last_violation.assign(interval_sups.size(), -1);

  std::size_t n_intervals = 0;
  for (const auto& sups : interval_sups) n_intervals = std::max(n_intervals, sups.size());
  const std::size_t n_paths = interval_sups.size();

  std::size_t vacuous = 0;
  for (int N = std::max(0, N0); static_cast<std::size_t>(N) < n_intervals; ++N) {
    IntervalStat stat;
    stat.N = N;
    const double threshold = asc.threshold(N);
    for (std::size_t path = 0; path < n_paths; ++path) {
      const auto& sups = interval_sups[path];
      if (static_cast<std::size_t>(N) < sups.size() && sups[N] > threshold) {
        ++stat.violations;
        out.last_violation[path] = N;
      }
    }
    stat.frequency = n_paths ? static_cast<double>(stat.violations) / n_paths : 0.0;
    stat.wilson_lower = wilson_lower(stat.violations, n_paths);
    const double raw = asc.interval_probability_bound(N);
    stat.vacuous = raw >= 1.0;
    stat.bound = std::min(1.0, raw);
    stat.passed = stat.wilson_lower <= stat.bound;
    if (stat.vacuous) ++vacuous;
    out.total_violations += stat.violations;
    out.record.passed = out.record.passed && stat.passed;
    out.record.measured = std::max(out.record.measured, stat.frequency);
    out.record.slack = std::min(out.record.slack, stat.bound - stat.wilson_lower);
    out.intervals.push_back(stat);
  }
  out.record.bound = out.intervals.empty() ? 0.0 : out.intervals.front().bound;
  std::ostringstream note;
  note << out.intervals.size() << " intervals from N = " << N0 << ", " << vacuous
       << " vacuous (bound >= 1), rate sigma/2 = " << cert.sigma / 2;
  out.record.note = note.str();
  return out;
}

EnergyResidual energy_residual(const PathRecord& path, const HeatModelSpec& m) {
  if (!path.trajectory)
    throw std::invalid_argument("energy residual needs a path simulated with retain_states");
  const Trajectory& traj = *path.trajectory;
  const std::size_t n_modes = traj.n_modes;
  std::vector<double> x_rho(n_modes), x_tau(n_modes);

  EnergyResidual out;
  const long n_steps = traj.last_index();
  out.per_step.reserve(static_cast<std::size_t>(n_steps));
  out.cumulative.reserve(static_cast<std::size_t>(n_steps));
  double running = 0.0, sum_sq = 0.0;
  for (long k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * traj.dt;
    const auto x = traj.node(k);
    const auto x_next = traj.node(k + 1);
    traj.lookup_lag(k, m.rho(t), x_rho);
    traj.lookup_lag(k, m.tau(t), x_tau);
    const double drift_gain = m.b1 + m.k1(t);
    const double noise_gain = m.b2 + m.k2(t);
    const double forcing = std::exp(-m.k * t);

    double e0 = 0.0, e1 = 0.0, x_drift = 0.0, noise_sq = 0.0, x_noise = 0.0;
    for (std::size_t i = 0; i < n_modes; ++i) {
      const double n = static_cast<double>(i + 1);
      e0 += x[i] * x[i];
      e1 += x_next[i] * x_next[i];
      x_drift += x[i] * (-m.nu * n * n * x[i] + drift_gain * x_rho[i] + forcing * m.p(i + 1));
      noise_sq += x_tau[i] * x_tau[i];
      x_noise += x[i] * x_tau[i];
    }
    noise_sq *= noise_gain * noise_gain;
    x_noise *= noise_gain;
    const double dW = traj.increments[static_cast<std::size_t>(k)];
    const double res = e1 - e0 - (2.0 * x_drift * traj.dt + noise_sq * traj.dt + 2.0 * x_noise * dW);
    out.per_step.push_back(res);
    running += res;
    out.cumulative.push_back(running);
    sum_sq += res * res;
  }
  out.rms = n_steps > 0 ? std::sqrt(sum_sq / static_cast<double>(n_steps)) : 0.0;
  out.final_abs = std::abs(running);
  return out;
}

}  // namespace memstab
