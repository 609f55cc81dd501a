#include "memstab/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "memstab/errors.hpp"

namespace memstab {

B5Check check_b5(double lambda1, double delta1, double delta2, double delta3) {
  const double slack = delta1 * lambda1 - 2.0 * std::sqrt(delta2) - delta3;
  return {slack > 0.0, slack};
}

double decay_margin(double a, double delta2, double delta3, double r, double sigma) {
  return sigma + 2.0 * std::sqrt(delta2) * std::exp(0.5 * sigma * r) +
         delta3 * std::exp(sigma * r) - a;
}

double optimal_gamma2(double delta2, double r, double sigma) {
  return std::sqrt(delta2 * std::exp(sigma * r));
}

double constraint_slack(double a, double sigma, double gamma2, double delta2, double delta3,
                        double r) {
  const double growth = std::exp(sigma * r);
  return a - sigma - gamma2 - growth * delta2 / gamma2 - growth * delta3;
}

SigmaSolution solve_sigma(double a, double delta2, double delta3, double r, double sigma1,
                          double safety, double tol, const BracketObserver& observer) {
  if (!(delta2 >= 0.0) || !(delta3 >= 0.0) || !(r >= 0.0))
    throw std::invalid_argument("solve_sigma: delta2, delta3 and r must be nonnegative");
  if (!(sigma1 > 0.0)) throw std::invalid_argument("solve_sigma: sigma1 must be positive");
  if (!(safety > 0.0 && safety < 1.0))
    throw std::invalid_argument("solve_sigma: safety must lie in (0, 1)");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_sigma: tol must be positive");

  auto margin = [&](double s) { return decay_margin(a, delta2, delta3, r, s); };
  double lo = 0.0;
  double phi_lo = margin(lo);
  if (!(phi_lo < 0.0)) {
    std::ostringstream msg;
    msg << "no positive decay rate: a = " << a << " does not exceed 2 sqrt(delta2) + delta3 = "
        << a + phi_lo;
    throw Infeasible(msg.str());
  }
  // phi(s) >= s - a, so a + 1 always brackets the root.
  double hi = a + 1.0;
  double phi_hi = margin(hi);

  SigmaSolution out;
  while (hi - lo > tol) {
    if (observer) observer(lo, hi, phi_lo, phi_hi);
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double phi_mid = margin(mid);
    if (phi_mid < 0.0) {
      lo = mid;
      phi_lo = phi_mid;
    } else {
      hi = mid;
      phi_hi = phi_mid;
    }
    ++out.iterations;
  }

  // lo is the largest rate verified feasible; using it keeps the constraint
  // strict regardless of where the true root sits inside the final bracket.
  out.sigma_star = lo;
  out.sigma = safety * std::min(lo, sigma1);
  if (!(out.sigma > 0.0))
    throw Infeasible("certifiable decay rate is below the bisection tolerance");
  if (delta2 > 0.0) {
    out.gamma2 = optimal_gamma2(delta2, r, out.sigma);
  } else {
    out.gamma2 = 0.5 * (a - out.sigma - delta3 * std::exp(out.sigma * r));
  }
  if (!(constraint_slack(a, out.sigma, out.gamma2, delta2, delta3, r) > 0.0))
    throw Infeasible("decay constraint not strictly satisfied at the selected rate");
  return out;
}

double Certificate::bound(double t) const { return B * std::exp(-sigma * t); }

Certificate build_certificate(const ProblemSpec& p, const CertificateOptions& opts) {
  if (!(opts.gamma1_fraction > 0.0 && opts.gamma1_fraction < 1.0))
    throw std::invalid_argument("gamma1_fraction must lie in (0, 1)");

  const double delta2 = p.g_env.delta;
  const double delta3 = p.h_env.delta;
  const auto b5 = check_b5(p.lambda1, p.delta1, delta2, delta3);
  if (!b5.pass) {
    std::ostringstream msg;
    msg << "coercivity does not dominate memory terms: delta1 lambda1 - 2 sqrt(delta2) - delta3 = "
        << b5.slack;
    throw Infeasible(msg.str());
  }
  const auto report = validate_problem(p);
  for (const auto& item : report.items) {
    if (item.passed) continue;
    const bool integrability = item.name.rfind("B", 0) == 0;
    const std::string msg = item.name + (item.detail.empty() ? "" : ": " + item.detail);
    if (integrability) throw DivergentIntegral(msg);
    throw std::invalid_argument(msg);
  }

  const double r = p.memory_horizon();
  Certificate c;
  c.gamma1 = opts.gamma1_fraction * (p.delta1 - (2.0 * std::sqrt(delta2) + delta3) / p.lambda1);
  c.a = (p.delta1 - c.gamma1) * p.lambda1;

  const auto sol = solve_sigma(c.a, delta2, delta3, r, p.sigma1, opts.safety, opts.tol);
  c.sigma = sol.sigma;
  c.sigma_star = sol.sigma_star;
  c.gamma2 = sol.gamma2;

  const double growth = std::exp(c.sigma * r);
  c.R1 = p.alpha1.integrate() +
         growth * (p.g_env.alpha.integrate() / c.gamma2 + p.h_env.alpha.integrate());

  auto beta_integral = [&](double w) {
    return p.f_env.integrate(w) / c.gamma1 + p.g_env.beta.integrate(w) / c.gamma2 +
           p.h_env.beta.integrate(w);
  };
  c.R2 = beta_integral(0.0);
  c.R3 = beta_integral(opts.r3_weight == R3Weight::Sigma1 ? p.sigma1 : c.sigma);

  c.M = 1.0 + p.init_energy_sup;
  c.B = std::exp(c.R1 + c.R3) * c.M;
  c.constraint_slack = constraint_slack(c.a, c.sigma, c.gamma2, delta2, delta3, r);
  return c;
}

double beta1(const ProblemSpec& p, const Certificate& c, double t) {
  return p.f_env(t) / c.gamma1;
}

double theta(const ProblemSpec& p, const Certificate& c, double t) {
  const double growth = std::exp(c.sigma * p.memory_horizon());
  return p.alpha1(t) + growth * (p.g_env.alpha(t) / c.gamma2 + p.h_env.alpha(t));
}

double beta(const ProblemSpec& p, const Certificate& c, double t) {
  return beta1(p, c, t) + p.g_env.beta(t) / c.gamma2 + p.h_env.beta(t);
}

// ---------------------------------------------------------------------------
// Pathwise supplement

double ASCertificate::interval_probability_bound(int N) const {
  return interval_coeff * std::exp(-as_rate * N);
}

double ASCertificate::threshold(int N) const { return std::exp(-as_rate * N); }

double as_alpha(const ProblemSpec& p, const Certificate& c, double t) {
  const double growth = std::exp(c.sigma * p.memory_horizon());
  return p.alpha1(t) + c.gamma2 + (p.g_env.delta + p.g_env.alpha(t)) * growth / c.gamma2 +
         kBdgAlphaFactor * (p.h_env.delta + p.h_env.alpha(t)) * growth;
}

double as_beta(const ProblemSpec& p, const Certificate& c, double t) {
  return 2.0 * beta1(p, c, t) + 2.0 * p.g_env.beta(t) / c.gamma2 +
         kBdgBetaFactor * p.h_env.beta(t);
}

ASCertificate build_as_certificate(const ProblemSpec& p, const Certificate& c) {
  const TimeFunction* alphas[] = {&p.alpha1, &p.g_env.alpha, &p.h_env.alpha};
  const TimeFunction* betas[] = {&p.f_env, &p.g_env.beta, &p.h_env.beta};
  const char* beta_names[] = {"beta1", "beta2", "beta3"};
  for (const auto* f : alphas) {
    if (!f->bounded_with_weight(0.0)) throw Unbounded("alpha envelope is unbounded");
  }
  for (int i = 0; i < 3; ++i) {
    if (!betas[i]->bounded_with_weight(c.sigma)) {
      std::ostringstream msg;
      msg << "e^{sigma t} " << beta_names[i] << "(t) is unbounded: decay rate "
          << betas[i]->min_active_rate() << " < sigma = " << c.sigma;
      throw Unbounded(msg.str());
    }
  }

  // Exponential-polynomial summands are nonincreasing once weighted (rate >=
  // sigma), so the supremum is attained on the span of the tables or at 0.
  double horizon = 1.0;
  std::vector<double> nodes;
  for (const auto* f : {alphas[0], alphas[1], alphas[2], betas[0], betas[1], betas[2]}) {
    horizon = std::max(horizon, f->table_support_end());
    nodes.insert(nodes.end(), f->times().begin(), f->times().end());
  }
  const double step = 1e-3;
  const auto n_steps = static_cast<std::size_t>(std::ceil(horizon / step));
  for (std::size_t i = 0; i <= n_steps; ++i) nodes.push_back(std::min(horizon, i * step));

  double sup = 0.0;
  for (double t : nodes) {
    sup = std::max(sup, as_alpha(p, c, t) + std::exp(c.sigma * t) * as_beta(p, c, t));
  }

  ASCertificate out;
  out.B1 = kB1Inflation * sup;
  out.as_rate = 0.5 * c.sigma;
  out.interval_coeff = 2.0 * c.B * (1.0 + out.B1 / c.sigma);
  return out;
}

// ---------------------------------------------------------------------------
// Hypotheses

bool HypothesisReport::ok() const {
  return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.passed; });
}

const HypothesisRecord* HypothesisReport::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

HypothesisReport check_hypotheses(const ProblemSpec& p, const Certificate* c,
                                  const HeatModelSpec* heat, std::uint64_t seed) {
  HypothesisReport report;
  auto add = [&](std::string name, bool passed, std::optional<double> slack, std::string note) {
    report.records.push_back({std::move(name), passed, slack, std::move(note)});
  };

  add("A2", p.attest_measurable, std::nullopt, "attested");
  add("A3", p.attest_hemicontinuous, std::nullopt, "attested");
  add("A4", p.attest_bounded, std::nullopt, "attested");

  {
    bool ok = p.delta1 > 0.0 && p.alpha1.integrable();
    std::optional<double> slack;
    std::string note = ok ? "" : "delta1 must be positive and alpha1 integrable";
    if (heat != nullptr) {
      // For the linear heat operator -2<Aw, w> = 2 nu sum n^2 w_n^2, which
      // matches delta1 ||w||^2 exactly.
      std::mt19937_64 gen(seed);
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> time(0.0, 10.0);
      const std::size_t n = heat->n_modes;
      double worst = std::numeric_limits<double>::infinity();
      for (int sample = 0; sample < 64; ++sample) {
        double dissipation = 0.0, h_norm = 0.0, v_norm = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
          const double w = normal(gen) - normal(gen);
          const double n2 = static_cast<double>(i * i);
          dissipation += 2.0 * heat->nu * n2 * w * w;
          h_norm += w * w;
          v_norm += n2 * w * w;
        }
        const double lhs = dissipation + p.alpha1(time(gen)) * h_norm;
        const double rhs = p.delta1 * v_norm;
        worst = std::min(worst, (lhs - rhs) / rhs);
      }
      slack = worst;
      if (worst < -1e-12) {
        ok = false;
        note = "coercivity spot check violated on sampled spectral vectors";
      } else {
        note = "coercivity spot-checked on 64 random spectral vectors";
      }
    }
    add("B1", ok, slack, note);
  }

  add("B2", p.g_env.delta >= 0.0 && p.g_env.alpha.integrable() && p.g_env.beta.integrable(),
      std::nullopt, "");
  add("B3", p.h_env.delta >= 0.0 && p.h_env.alpha.integrable() && p.h_env.beta.integrable(),
      std::nullopt, "");
  add("B4",
      p.sigma1 > 0.0 && p.f_env.integrable_with_weight(p.sigma1) &&
          p.g_env.beta.integrable_with_weight(p.sigma1) &&
          p.h_env.beta.integrable_with_weight(p.sigma1),
      std::nullopt, "");

  const auto b5 = check_b5(p.lambda1, p.delta1, p.g_env.delta, p.h_env.delta);
  add("B5", b5.pass, b5.slack, "");

  if (c == nullptr) {
    add("B6", false, std::nullopt, "requires a certificate (sigma)");
  } else {
    const bool ok = p.alpha1.bounded_with_weight(0.0) && p.g_env.alpha.bounded_with_weight(0.0) &&
                    p.h_env.alpha.bounded_with_weight(0.0) &&
                    p.f_env.bounded_with_weight(c->sigma) &&
                    p.g_env.beta.bounded_with_weight(c->sigma) &&
                    p.h_env.beta.bounded_with_weight(c->sigma);
    add("B6", ok, std::nullopt, ok ? "" : "an envelope decays slower than sigma");
  }
  return report;
}

}  // namespace memstab
