#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "memstab/model.hpp"

namespace memstab {

struct B5Check {
  bool pass = false;
  double slack = 0.0;  // delta1 lambda1 - 2 sqrt(delta2) - delta3
};

/// Dissipation-versus-memory balance: coercivity must strictly dominate the
/// delayed drift and diffusion growth constants.
B5Check check_b5(double lambda1, double delta1, double delta2, double delta3);

/// phi(sigma) = sigma + 2 sqrt(delta2) e^{sigma r / 2} + delta3 e^{sigma r} - a,
/// the decay constraint after eliminating gamma2 at its optimum. Strictly
/// increasing in sigma; the certifiable rates are exactly those with phi < 0.
double decay_margin(double a, double delta2, double delta3, double r, double sigma);

/// gamma2 minimizing gamma2 + e^{sigma r} delta2 / gamma2, i.e. sqrt(delta2 e^{sigma r}).
double optimal_gamma2(double delta2, double r, double sigma);

/// a - sigma - gamma2 - e^{sigma r} delta2 / gamma2 - e^{sigma r} delta3.
double constraint_slack(double a, double sigma, double gamma2, double delta2, double delta3,
                        double r);

struct SigmaSolution {
  double sigma_star = 0.0;  // root of the margin function
  double sigma = 0.0;       // safety * min(sigma_star, sigma1)
  double gamma2 = 0.0;
  int iterations = 0;
};

/// Called once per bisection step with the current bracket and the margin
/// values at its ends.
using BracketObserver = std::function<void(double lo, double hi, double phi_lo, double phi_hi)>;

SigmaSolution solve_sigma(double a, double delta2, double delta3, double r, double sigma1,
                          double safety, double tol, const BracketObserver& observer = {});

enum class R3Weight { Sigma1, Sigma };

struct CertificateOptions {
  double gamma1_fraction = 0.1;
  double safety = 0.95;
  double tol = 1e-9;
  R3Weight r3_weight = R3Weight::Sigma1;
};

/// Constants certifying E|X(t)|^2 <= B e^{-sigma t} for every t >= 0.
struct Certificate {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double sigma = 0.0;
  double sigma_star = 0.0;
  double a = 0.0;
  double R1 = 0.0;
  double R2 = 0.0;
  double R3 = 0.0;
  double M = 1.0;
  double B = 1.0;
  double constraint_slack = 0.0;

  double bound(double t) const;
};

Certificate build_certificate(const ProblemSpec& p, const CertificateOptions& opts = {});

/// Forcing-to-coercivity envelope f_env / gamma1.
double beta1(const ProblemSpec& p, const Certificate& c, double t);
/// alpha1 + e^{sigma r} (alpha2 / gamma2 + alpha3).
double theta(const ProblemSpec& p, const Certificate& c, double t);
/// beta1 + beta2 / gamma2 + beta3.
double beta(const ProblemSpec& p, const Certificate& c, double t);

/// Supplement for pathwise decay: |X(t)|^2 <= e^{sigma/2} e^{-sigma t / 2}
/// eventually, with P(sup over [N, N+1] > e^{-sigma N / 2}) bounded by
/// interval_coeff * e^{-sigma N / 2}.
struct ASCertificate {
  double B1 = 0.0;
  double as_rate = 0.0;
  double interval_coeff = 0.0;

  double interval_probability_bound(int N) const;
  double threshold(int N) const;
};

/// Burkholder-Davis-Gundy constants entering the pathwise envelopes.
inline constexpr double kBdgAlphaFactor = 32.0;
inline constexpr double kBdgBetaFactor = 64.0;
/// Inflation applied to the sampled supremum defining B1.
inline constexpr double kB1Inflation = 1.05;

/// alpha1 + gamma2 + (delta2 + alpha2) e^{sigma r} / gamma2 + 32 (delta3 + alpha3) e^{sigma r}.
double as_alpha(const ProblemSpec& p, const Certificate& c, double t);
/// 2 beta1 + 2 beta2 / gamma2 + 64 beta3.
double as_beta(const ProblemSpec& p, const Certificate& c, double t);

ASCertificate build_as_certificate(const ProblemSpec& p, const Certificate& c);

struct HypothesisRecord {
  std::string name;
  bool passed = false;
  std::optional<double> slack;
  std::string note;
};

struct HypothesisReport {
  std::vector<HypothesisRecord> records;

  bool ok() const;
  const HypothesisRecord* find(const std::string& name) const;
};

/// Evaluates every stability hypothesis decidable from the envelopes. When the
/// heat model is supplied the coercivity inequality is also spot-checked on
/// random spectral vectors of the truncated space.
HypothesisReport check_hypotheses(const ProblemSpec& p, const Certificate* c = nullptr,
                                  const HeatModelSpec* heat = nullptr,
                                  std::uint64_t seed = 12345);

}  // namespace memstab
