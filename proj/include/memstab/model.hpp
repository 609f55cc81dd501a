#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memstab {

/// One summand c * exp(-q t) of an exponential polynomial.
struct ExpTerm {
  double coeff = 0.0;
  double rate = 0.0;
};

/// Nonnegative scalar function of time used for every coefficient envelope.
///
/// Two representations are supported so that integrability questions are
/// decidable: a finite sum of decaying exponentials, and a piecewise-linear
/// table on [0, T_s] that vanishes past its last node.
class TimeFunction {
public:
  enum class Kind { ExpPoly, Table };

  TimeFunction() = default;  // identically zero

  static TimeFunction zero() { return {}; }
  static TimeFunction exp_poly(std::vector<ExpTerm> terms);
  static TimeFunction exponential(double coeff, double rate) {
    return exp_poly({{coeff, rate}});
  }
  static TimeFunction table(std::vector<double> times, std::vector<double> values);

  Kind kind() const { return kind_; }
  std::span<const ExpTerm> terms() const { return terms_; }
  std::span<const double> times() const { return times_; }
  std::span<const double> values() const { return values_; }

  double operator()(double t) const;

  bool identically_zero() const;
  bool integrable() const { return integrable_with_weight(0.0); }
  /// True when the integral of e^{w t} f(t) over [0, inf) is finite.
  bool integrable_with_weight(double w) const;
  /// True when e^{w t} f(t) is bounded on [0, inf).
  bool bounded_with_weight(double w) const;
  bool nonincreasing() const;

  /// Smallest decay rate among terms with nonzero coefficient; +inf for
  /// tables and for the zero function.
  double min_active_rate() const;
  /// Last node of a table, 0 for an exponential polynomial.
  double table_support_end() const;

  /// Integral of e^{weight_rate t} f(t) over [0, inf). Closed form for both
  /// kinds; throws DivergentIntegral when the integral does not exist.
  double integrate(double weight_rate = 0.0) const;

  TimeFunction scaled(double factor) const;
  /// A function dominating f^2. Exact for exponential polynomials; for tables
  /// the squared node values are interpolated, which bounds f^2 from above by
  /// convexity.
  TimeFunction squared() const;

private:
  Kind kind_ = Kind::ExpPoly;
  std::vector<ExpTerm> terms_;
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Time-varying delay t -> lag(t) with lag in [0, r].
class DelaySpec {
public:
  enum class Kind { Constant, InvOnePlusAbsSin, InvOnePlusAbsCos, Table };

  static DelaySpec constant(double lag, double horizon);
  /// 1 / (1 + |sin t|), ranging over [1/2, 1].
  static DelaySpec inv_one_plus_abs_sin(double horizon = 1.0);
  /// 1 / (1 + |cos t|), ranging over [1/2, 1].
  static DelaySpec inv_one_plus_abs_cos(double horizon = 1.0);
  /// Piecewise-linear lag; held at the last value past the final node.
  static DelaySpec table(std::vector<double> times, std::vector<double> lags,
                         double horizon);

  Kind kind() const { return kind_; }
  double horizon() const { return horizon_; }
  double constant_lag() const { return lag_; }
  std::span<const double> times() const { return times_; }
  std::span<const double> lags() const { return lags_; }
  double operator()(double t) const;

private:
  Kind kind_ = Kind::Constant;
  double horizon_ = 0.0;
  double lag_ = 0.0;
  std::vector<double> times_;
  std::vector<double> lags_;
};

struct ForcingEnvelope {
  double delta = 0.0;
  TimeFunction alpha;
  TimeFunction beta;
};

/// The coefficient bundle of a stochastic evolution equation with memory,
///   dX = [A(t,X) + f(t) + g(t, X(t-rho(t)))] dt + h(t, X(t-tau(t))) dW,
/// reduced to the scalar envelopes the stability argument consumes.
struct ProblemSpec {
  double lambda1 = 1.0;  // lambda1 |v|_H^2 <= ||v||_V^2
  double delta1 = 0.0;
  TimeFunction alpha1;
  TimeFunction f_env;  // t -> |f(t)|^2 in V*
  ForcingEnvelope g_env;
  ForcingEnvelope h_env;
  double sigma1 = 0.0;
  DelaySpec rho = DelaySpec::constant(0.0, 0.0);
  DelaySpec tau = DelaySpec::constant(0.0, 0.0);
  double init_energy_sup = 0.0;  // sup over [-r, 0] of E|X(s)|^2

  // Measurability, hemicontinuity and boundedness of A; not decidable from
  // the envelopes, so they are asserted by whoever builds the problem.
  bool attest_measurable = true;
  bool attest_hemicontinuous = true;
  bool attest_bounded = true;

  double memory_horizon() const { return rho.horizon(); }
};

/// Initial segment phi(s) on [-r, 0] in spectral coordinates.
class InitialSegment {
public:
  enum class Kind { Constant, Bump, Linear };

  InitialSegment() = default;  // phi = 0

  /// phi(s) = coeffs for every s.
  static InitialSegment constant(std::vector<double> coeffs);
  /// Single mode with profile amplitude * (1 - ((s - center) / width)^2)^2 on
  /// |s - center| < width, zero elsewhere.
  static InitialSegment bump(int mode, double amplitude, double center, double width);
  /// phi(s) = at_zero + s * slope.
  static InitialSegment linear(std::vector<double> at_zero, std::vector<double> slope);

  Kind kind() const { return kind_; }
  std::span<const double> coeffs() const { return a_; }  // constant / at_zero
  std::span<const double> slope() const { return b_; }
  int mode() const { return mode_; }
  double amplitude() const { return amplitude_; }
  double center() const { return center_; }
  double width() const { return width_; }

  double coeff(double s, int mode) const;  // mode is 1-based
  void eval(double s, std::span<double> out) const;
  /// sup over a uniform grid of `nodes` points on [-r, 0] of sum_n phi_n(s)^2.
  double energy_sup(std::size_t n_modes, double r, std::size_t nodes = 1024) const;

private:
  Kind kind_ = Kind::Constant;
  std::vector<double> a_;
  std::vector<double> b_;
  int mode_ = 1;
  double amplitude_ = 0.0;
  double center_ = 0.0;
  double width_ = 1.0;
};

/// Stochastic heat equation on (0, pi) with Dirichlet conditions:
///   dX = [nu X_xx + (b1 + k1(t)) X(t - rho(t)) + e^{-k t} p] dt
///        + (b2 + k2(t)) X(t - tau(t)) dw
/// with w a scalar Brownian motion. All fields are in the orthonormal basis
/// sqrt(2/pi) sin(n x), n = 1..n_modes.
struct HeatModelSpec {
  double nu = 1.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double k = 1.0;
  TimeFunction k1;
  TimeFunction k2;
  std::vector<double> p_coeffs;
  InitialSegment phi;
  std::size_t n_modes = 16;
  DelaySpec rho = DelaySpec::inv_one_plus_abs_sin(1.0);
  DelaySpec tau = DelaySpec::inv_one_plus_abs_cos(1.0);

  double memory_horizon() const { return rho.horizon(); }
  double p_norm_sq() const;
  /// Coefficient n (1-based) of p, zero past the stored coefficients.
  double p(std::size_t n) const { return n <= p_coeffs.size() ? p_coeffs[n - 1] : 0.0; }
};

/// Fraction of the smallest active decay rate used when sigma1 = 2k would
/// make the weighted forcing integrals diverge.
inline constexpr double kSigma1CapFraction = 0.9;

ProblemSpec map_heat_to_problem(const HeatModelSpec& m);

struct ValidationItem {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationItem> items;

  bool ok() const;
  const ValidationItem* find(std::string_view name) const;
};

ValidationReport validate_problem(const ProblemSpec& p);

}  // namespace memstab
