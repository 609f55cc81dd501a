#include "memstab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "memstab/errors.hpp"

namespace memstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool active(const ExpTerm& term) { return term.coeff > 0.0; }

// Linear interpolation on a strictly increasing grid; caller guarantees
// times.front() <= t <= times.back().
double interpolate(std::span<const double> times, std::span<const double> values,
                   double t) {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.end()) return values.back();
  const auto hi = static_cast<std::size_t>(it - times.begin());
  const auto lo = hi - 1;
  const double frac = (t - times[lo]) / (times[hi] - times[lo]);
  return values[lo] + frac * (values[hi] - values[lo]);
}

void check_grid(std::span<const double> times, std::span<const double> values,
                const char* what) {
  if (times.size() != values.size())
    throw std::invalid_argument(std::string(what) + ": times and values differ in length");
  if (times.size() < 2)
    throw std::invalid_argument(std::string(what) + ": need at least two nodes");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument(std::string(what) + ": times must be strictly increasing");
  }
  for (double v : values) {
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": non-finite value");
  }
}

// Integrals over [0, h] of e^{w s} and s e^{w s}.
void weighted_moments(double w, double h, double& e0, double& e1) {
  const double x = w * h;
  if (std::abs(x) < 1e-3) {
    e0 = h * (1.0 + x * (1.0 / 2 + x * (1.0 / 6 + x * (1.0 / 24 + x / 120))));
    e1 = h * h * (1.0 / 2 + x * (1.0 / 3 + x * (1.0 / 8 + x * (1.0 / 30 + x / 144))));
    return;
  }
  e0 = std::expm1(x) / w;
  e1 = (h * std::exp(x) - e0) / w;
}

}  // namespace

// ---------------------------------------------------------------------------
// TimeFunction

TimeFunction TimeFunction::exp_poly(std::vector<ExpTerm> terms) {
  for (const auto& term : terms) {
    if (!(term.coeff >= 0.0) || !std::isfinite(term.coeff))
      throw std::invalid_argument("exp_poly: coefficients must be finite and nonnegative");
    if (!(term.rate >= 0.0) || !std::isfinite(term.rate))
      throw std::invalid_argument("exp_poly: rates must be finite and nonnegative");
  }
  TimeFunction f;
  f.kind_ = Kind::ExpPoly;
  f.terms_ = std::move(terms);
  return f;
}

TimeFunction TimeFunction::table(std::vector<double> times, std::vector<double> values) {
  check_grid(times, values, "table");
  if (times.front() != 0.0) throw std::invalid_argument("table: grid must start at t = 0");
  if (std::any_of(values.begin(), values.end(), [](double v) { return v < 0.0; }))
    throw std::invalid_argument("table: values must be nonnegative");
  TimeFunction f;
  f.kind_ = Kind::Table;
  f.times_ = std::move(times);
  f.values_ = std::move(values);
  return f;
}

double TimeFunction::operator()(double t) const {
  if (!(t >= 0.0)) throw std::domain_error("TimeFunction evaluated at negative time");
  if (kind_ == Kind::ExpPoly) {
    double sum = 0.0;
    for (const auto& term : terms_) sum += term.coeff * std::exp(-term.rate * t);
    return sum;
  }
  if (t > times_.back()) return 0.0;
  return interpolate(times_, values_, t);
}

bool TimeFunction::identically_zero() const {
  if (kind_ == Kind::ExpPoly) return std::none_of(terms_.begin(), terms_.end(), active);
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

bool TimeFunction::integrable_with_weight(double w) const {
  if (kind_ == Kind::Table) return true;
  return std::all_of(terms_.begin(), terms_.end(),
                     [w](const ExpTerm& t) { return !active(t) || t.rate > w; });
}

bool TimeFunction::bounded_with_weight(double w) const {
  if (kind_ == Kind::Table) return true;
  return std::all_of(terms_.begin(), terms_.end(),
                     [w](const ExpTerm& t) { return !active(t) || t.rate >= w; });
}

bool TimeFunction::nonincreasing() const {
  if (kind_ == Kind::ExpPoly) return true;
  // Past the last node the table drops to zero, which never increases it.
  for (std::size_t i = 1; i < values_.size(); ++i) {
    if (values_[i] > values_[i - 1]) return false;
  }
  return true;
}

double TimeFunction::min_active_rate() const {
  double rate = kInf;
  if (kind_ == Kind::ExpPoly) {
    for (const auto& term : terms_) {
      if (active(term)) rate = std::min(rate, term.rate);
    }
  }
  return rate;
}

double TimeFunction::table_support_end() const {
  return kind_ == Kind::Table ? times_.back() : 0.0;
}

double TimeFunction::integrate(double weight_rate) const {
  if (kind_ == Kind::ExpPoly) {
    double sum = 0.0;
    for (const auto& term : terms_) {
      if (!active(term)) continue;
      if (!(term.rate > weight_rate)) {
        std::ostringstream msg;
        msg << "integral of " << term.coeff << " e^{-" << term.rate << " t} against e^{"
            << weight_rate << " t} diverges";
        throw DivergentIntegral(msg.str());
      }
      sum += term.coeff / (term.rate - weight_rate);
    }
    return sum;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
    const double h = times_[i + 1] - times_[i];
    const double slope = (values_[i + 1] - values_[i]) / h;
    double e0 = 0.0, e1 = 0.0;
    weighted_moments(weight_rate, h, e0, e1);
    sum += std::exp(weight_rate * times_[i]) * (values_[i] * e0 + slope * e1);
  }
  return sum;
}

TimeFunction TimeFunction::scaled(double factor) const {
  if (!(factor >= 0.0)) throw std::invalid_argument("scaled: factor must be nonnegative");
  TimeFunction out = *this;
  for (auto& term : out.terms_) term.coeff *= factor;
  for (auto& v : out.values_) v *= factor;
  return out;
}

TimeFunction TimeFunction::squared() const {
  if (kind_ == Kind::Table) {
    std::vector<double> sq(values_.size());
    std::transform(values_.begin(), values_.end(), sq.begin(), [](double v) { return v * v; });
    return table(times_, std::move(sq));
  }
  std::vector<ExpTerm> out;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    for (std::size_t j = 0; j < terms_.size(); ++j) {
      out.push_back({terms_[i].coeff * terms_[j].coeff, terms_[i].rate + terms_[j].rate});
    }
  }
  return exp_poly(std::move(out));
}

// ---------------------------------------------------------------------------
// DelaySpec

DelaySpec DelaySpec::constant(double lag, double horizon) {
  if (!(horizon >= 0.0)) throw std::invalid_argument("delay: horizon must be nonnegative");
  if (!(lag >= 0.0 && lag <= horizon))
    throw std::invalid_argument("delay: constant lag must lie in [0, r]");
  DelaySpec d;
  d.kind_ = Kind::Constant;
  d.horizon_ = horizon;
  d.lag_ = lag;
  return d;
}

DelaySpec DelaySpec::inv_one_plus_abs_sin(double horizon) {
  if (!(horizon >= 1.0)) throw std::invalid_argument("delay: 1/(1+|sin t|) needs r >= 1");
  DelaySpec d;
  d.kind_ = Kind::InvOnePlusAbsSin;
  d.horizon_ = horizon;
  return d;
}

DelaySpec DelaySpec::inv_one_plus_abs_cos(double horizon) {
  if (!(horizon >= 1.0)) throw std::invalid_argument("delay: 1/(1+|cos t|) needs r >= 1");
  DelaySpec d;
  d.kind_ = Kind::InvOnePlusAbsCos;
  d.horizon_ = horizon;
  return d;
}

DelaySpec DelaySpec::table(std::vector<double> times, std::vector<double> lags,
                           double horizon) {
  check_grid(times, lags, "delay table");
  if (times.front() != 0.0) throw std::invalid_argument("delay table: grid must start at t = 0");
  for (double lag : lags) {
    if (!(lag >= 0.0 && lag <= horizon))
      throw std::invalid_argument("delay table: lag outside [0, r]");
  }
  DelaySpec d;
  d.kind_ = Kind::Table;
  d.horizon_ = horizon;
  d.times_ = std::move(times);
  d.lags_ = std::move(lags);
  return d;
}

double DelaySpec::operator()(double t) const {
  if (!(t >= 0.0)) throw std::domain_error("delay evaluated at negative time");
  switch (kind_) {
    case Kind::Constant:
      return lag_;
    case Kind::InvOnePlusAbsSin:
      return 1.0 / (1.0 + std::abs(std::sin(t)));
    case Kind::InvOnePlusAbsCos:
      return 1.0 / (1.0 + std::abs(std::cos(t)));
    case Kind::Table:
      return interpolate(times_, lags_, t);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// InitialSegment

InitialSegment InitialSegment::constant(std::vector<double> coeffs) {
  InitialSegment s;
  s.kind_ = Kind::Constant;
  s.a_ = std::move(coeffs);
  return s;
}

InitialSegment InitialSegment::bump(int mode, double amplitude, double center, double width) {
  if (mode < 1) throw std::invalid_argument("bump: mode is 1-based");
  if (!(width > 0.0)) throw std::invalid_argument("bump: width must be positive");
  InitialSegment s;
  s.kind_ = Kind::Bump;
  s.mode_ = mode;
  s.amplitude_ = amplitude;
  s.center_ = center;
  s.width_ = width;
  return s;
}

InitialSegment InitialSegment::linear(std::vector<double> at_zero, std::vector<double> slope) {
  if (at_zero.size() != slope.size())
    throw std::invalid_argument("linear: at_zero and slope differ in length");
  InitialSegment s;
  s.kind_ = Kind::Linear;
  s.a_ = std::move(at_zero);
  s.b_ = std::move(slope);
  return s;
}

double InitialSegment::coeff(double s, int mode) const {
  const auto idx = static_cast<std::size_t>(mode - 1);
  switch (kind_) {
    case Kind::Constant:
      return idx < a_.size() ? a_[idx] : 0.0;
    case Kind::Linear:
      return idx < a_.size() ? a_[idx] + s * b_[idx] : 0.0;
    case Kind::Bump: {
      if (mode != mode_) return 0.0;
      const double u = (s - center_) / width_;
      if (std::abs(u) >= 1.0) return 0.0;
      const double w = 1.0 - u * u;
      return amplitude_ * w * w;
    }
  }
  return 0.0;
}

void InitialSegment::eval(double s, std::span<double> out) const {
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = coeff(s, static_cast<int>(n + 1));
}

double InitialSegment::energy_sup(std::size_t n_modes, double r, std::size_t nodes) const {
  double sup = 0.0;
  std::vector<double> state(n_modes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double s = nodes == 1 ? 0.0 : -r + r * static_cast<double>(i) / (nodes - 1);
    eval(s, state);
    double e = 0.0;
    for (double c : state) e += c * c;
    sup = std::max(sup, e);
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Heat model

double HeatModelSpec::p_norm_sq() const {
  double s = 0.0;
  for (double c : p_coeffs) s += c * c;
  return s;
}

ProblemSpec map_heat_to_problem(const HeatModelSpec& m) {
  if (!(m.nu > 0.0)) throw std::invalid_argument("heat model: nu must be positive");
  if (!(m.b1 >= 0.0) || !(m.b2 >= 0.0))
    throw std::invalid_argument("heat model: b1, b2 must be nonnegative");
  if (!(m.k > 0.0)) throw std::invalid_argument("heat model: k must be positive");
  if (m.n_modes < 1) throw std::invalid_argument("heat model: need at least one mode");
  if (m.rho.horizon() != m.tau.horizon())
    throw std::invalid_argument("heat model: rho and tau must share one memory horizon");
  for (const auto* kf : {&m.k1, &m.k2}) {
    const char* name = kf == &m.k1 ? "k1" : "k2";
    if (!kf->nonincreasing())
      throw std::invalid_argument(std::string("heat model: ") + name + " must be decreasing");
    if (!kf->squared().integrable())
      throw std::invalid_argument(std::string("heat model: ") + name +
                                  " must be square integrable");
  }

  ProblemSpec p;
  p.lambda1 = 1.0;
  p.delta1 = 2.0 * m.nu;
  p.alpha1 = TimeFunction::zero();
  p.f_env = TimeFunction::zero();
  p.g_env.delta = 4.0 * m.b1 * m.b1;
  p.g_env.alpha = m.k1.squared().scaled(4.0);
  const double p_sq = m.p_norm_sq();
  p.g_env.beta =
      p_sq > 0.0 ? TimeFunction::exponential(2.0 * p_sq, 2.0 * m.k) : TimeFunction::zero();
  p.h_env.delta = 4.0 * m.b2 * m.b2;
  p.h_env.alpha = m.k2.squared().scaled(4.0);
  p.h_env.beta = TimeFunction::zero();

  const double slowest = std::min(
      {p.f_env.min_active_rate(), p.g_env.beta.min_active_rate(), p.h_env.beta.min_active_rate()});
  p.sigma1 = 2.0 * m.k;
  if (slowest <= p.sigma1) p.sigma1 = kSigma1CapFraction * slowest;

  p.rho = m.rho;
  p.tau = m.tau;
  p.init_energy_sup = m.phi.energy_sup(m.n_modes, m.memory_horizon());
  return p;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::ok() const {
  return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.passed; });
}

const ValidationItem* ValidationReport::find(std::string_view name) const {
  for (const auto& item : items) {
    if (item.name == name) return &item;
  }
  return nullptr;
}

ValidationReport validate_problem(const ProblemSpec& p) {
  ValidationReport report;
  auto add = [&](std::string name, bool passed, std::string detail = {}) {
    report.items.push_back({std::move(name), passed, std::move(detail)});
  };
  auto num = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };

  add("lambda1.positive", p.lambda1 > 0.0, "lambda1 = " + num(p.lambda1));
  add("delta1.positive", p.delta1 > 0.0, "delta1 = " + num(p.delta1));
  add("delta2.nonnegative", p.g_env.delta >= 0.0, "delta2 = " + num(p.g_env.delta));
  add("delta3.nonnegative", p.h_env.delta >= 0.0, "delta3 = " + num(p.h_env.delta));
  add("sigma1.positive", p.sigma1 > 0.0, "sigma1 = " + num(p.sigma1));
  add("init_energy.nonnegative", p.init_energy_sup >= 0.0);

  const double r = p.memory_horizon();
  add("delays.shared_horizon", p.rho.horizon() == p.tau.horizon(),
      "r(rho) = " + num(p.rho.horizon()) + ", r(tau) = " + num(p.tau.horizon()));
  bool in_range = true;
  for (int i = 0; i <= 20000 && in_range; ++i) {
    const double t = 1e-3 * i;
    for (const auto* d : {&p.rho, &p.tau}) {
      const double lag = (*d)(t);
      in_range = in_range && lag >= 0.0 && lag <= r;
    }
  }
  add("delays.range", in_range, "lags sampled on [0, 20] against r = " + num(r));

  auto integrable = [&](const char* name, const TimeFunction& f) {
    add(name, f.integrable(), f.integrable() ? "" : "envelope is not integrable on [0, inf)");
  };
  integrable("B1.alpha1.integrable", p.alpha1);
  integrable("B2.alpha2.integrable", p.g_env.alpha);
  integrable("B2.beta2.integrable", p.g_env.beta);
  integrable("B3.alpha3.integrable", p.h_env.alpha);
  integrable("B3.beta3.integrable", p.h_env.beta);

  auto weighted = [&](const char* name, const TimeFunction& f) {
    const bool ok = f.integrable_with_weight(p.sigma1);
    add(name, ok,
        ok ? "" : "decay rate " + num(f.min_active_rate()) + " <= sigma1 = " + num(p.sigma1));
  };
  weighted("B4.f.weighted", p.f_env);
  weighted("B4.beta2.weighted", p.g_env.beta);
  weighted("B4.beta3.weighted", p.h_env.beta);
  return report;
}

}  // namespace memstab
