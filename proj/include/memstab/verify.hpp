#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "memstab/certificate.hpp"
#include "memstab/model.hpp"
#include "memstab/simulate.hpp"

namespace memstab {

struct DecayFit {
  enum class Status { Ok, AllZero, Degenerate };

  Status status = Status::Degenerate;
  double sigma_hat = 0.0;  // +inf when the window is identically zero
  double intercept = 0.0;
  double r_squared = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::size_t n_points = 0;
  std::string message;
};

/// Least-squares fit of log E|X(t)|^2 against t over the trailing
/// window_fraction of the horizon, using only points whose confidence
/// half-width is below the mean.
DecayFit fit_decay_rate(const MSCurve& curve, double window_fraction = 0.5);

struct CheckRecord {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  std::string note;
};

struct VerificationReport {
  std::vector<CheckRecord> checks;

  bool ok() const;
  const CheckRecord* find(const std::string& name) const;
};

/// mean(t) <= B e^{-sigma t} + ci_mult * half_width(t) on every sample.
/// measured is the worst ratio mean / allowance; slack the smallest relative
/// headroom (allowance - mean) / mean.
CheckRecord check_ms_bound(const MSCurve& curve, const Certificate& cert, double ci_mult = 3.0);

/// K(t) = mean(t) e^{sigma t} exp(-int_0^t [theta + e^{sigma s} beta] ds) must
/// stay below M (1 + ci_mult * half_width / mean).
CheckRecord check_K_functional(const MSCurve& curve, const Certificate& cert,
                               const ProblemSpec& p, double ci_mult = 3.0);

struct IntervalStat {
  int N = 0;
  std::size_t violations = 0;
  double frequency = 0.0;
  double wilson_lower = 0.0;
  double bound = 0.0;  // min(1, interval_coeff e^{-sigma N / 2})
  bool vacuous = false;
  bool passed = false;
};

struct ASDecayResult {
  CheckRecord record;
  std::vector<IntervalStat> intervals;
  std::vector<int> last_violation;  // per path, -1 when the path never violates
  std::size_t total_violations = 0;
};

/// Frequency check of the per-interval tail bound for every unit interval
/// [N, N+1] with N >= N0. interval_sups is indexed [path][N].
ASDecayResult check_as_decay(std::span<const std::vector<double>> interval_sups,
                             const Certificate& cert, const ASCertificate& asc, int N0 = 2);

struct EnergyResidual {
  std::vector<double> per_step;
  std::vector<double> cumulative;  // running sum; the integral-form discrepancy
  double rms = 0.0;                // root-mean-square of per_step
  double final_abs = 0.0;          // |cumulative| at the horizon
};

/// Discrete defect of the Ito energy identity along a retained trajectory:
///   |X_{k+1}|^2 - |X_k|^2 - [2 <X, AX + g> dt + ||h||^2 dt + 2 <X, h> dW]
/// with every term evaluated at t_k.
EnergyResidual energy_residual(const PathRecord& path, const HeatModelSpec& m);

}  // namespace memstab
