#include <cmath>
#include <random>

#include "doctest.h"
#include "memstab/certificate.hpp"
#include "memstab/errors.hpp"

using namespace memstab;

namespace {

// Written out independently of decay_margin so the oracle shares no code
// with the solver.
double margin_oracle(double a, double d2, double d3, double r, double s) {
  return s + 2.0 * std::sqrt(d2) * std::exp(s * r / 2.0) + d3 * std::exp(s * r) - a;
}

// First grid point (step 1e-4) where the margin turns nonnegative.
double grid_root(double a, double d2, double d3, double r) {
  for (long i = 0;; ++i) {
    const double s = 1e-4 * static_cast<double>(i);
    if (margin_oracle(a, d2, d3, r, s) >= 0.0) return s;
  }
}

double bisect_oracle(double a, double d2, double d3, double r) {
  double lo = 0.0, hi = a + 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (margin_oracle(a, d2, d3, r, mid) < 0.0 ? lo : hi) = mid;
  }
  return lo;
}

struct RandomInstance {
  double a, d2, d3, r;
};

RandomInstance random_instance(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomInstance x;
  x.d2 = u(gen) < 0.2 ? 0.0 : 4.0 * u(gen);
  x.d3 = u(gen) < 0.2 ? 0.0 : 3.0 * u(gen);
  x.r = 0.1 + 2.0 * u(gen);
  x.a = 2.0 * std::sqrt(x.d2) + x.d3 + 0.05 + 8.0 * u(gen);
  return x;
}

ProblemSpec heat_problem(double nu, double b1, double b2) {
  HeatModelSpec m;
  m.nu = nu;
  m.b1 = b1;
  m.b2 = b2;
  m.k = 1.0;
  m.phi = InitialSegment();
  return map_heat_to_problem(m);
}

}  // namespace

TEST_CASE("coercivity balance check") {
  auto r = check_b5(1.0, 10.0, 4.0, 4.0);
  CHECK(r.pass);
  CHECK(r.slack == doctest::Approx(2.0));
  r = check_b5(1.0, 1.0, 0.0, 0.0);
  CHECK(r.pass);
  CHECK(r.slack == doctest::Approx(1.0));
  r = check_b5(1.0, 1.0, 4.0, 4.0);
  CHECK_FALSE(r.pass);
  CHECK(r.slack == doctest::Approx(-7.0));
}

TEST_CASE("sigma solver hand-bracketed case") {
  CHECK(margin_oracle(10.0, 4.0, 1.0, 1.0, 0.95) < 0.0);
  CHECK(margin_oracle(10.0, 4.0, 1.0, 1.0, 0.96) > 0.0);
  const auto sol = solve_sigma(10.0, 4.0, 1.0, 1.0, 1e9, 0.95, 1e-9);
  CHECK(sol.sigma_star > 0.95);
  CHECK(sol.sigma_star < 0.96);
  CHECK(sol.sigma == doctest::Approx(0.95 * sol.sigma_star));
  CHECK(sol.gamma2 == doctest::Approx(std::sqrt(4.0 * std::exp(sol.sigma))));
}

TEST_CASE("sigma solver without memory terms has a linear root") {
  const auto sol = solve_sigma(3.0, 0.0, 0.0, 1.0, 100.0, 0.95, 1e-9);
  CHECK(sol.sigma_star == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(sol.sigma == doctest::Approx(0.95 * 3.0).epsilon(1e-8));
  const auto capped = solve_sigma(3.0, 0.0, 0.0, 1.0, 1.0, 0.95, 1e-9);
  CHECK(capped.sigma == doctest::Approx(0.95));
  // Half-slack choice when delta2 vanishes.
  CHECK(capped.gamma2 == doctest::Approx(0.5 * (3.0 - 0.95)));
}

TEST_CASE("optimal gamma2") {
  CHECK(optimal_gamma2(4.0, 1.0, 0.0) == doctest::Approx(2.0));
  CHECK(optimal_gamma2(4.0, 7.0, 0.0) == doctest::Approx(2.0));
}

TEST_CASE("sigma solver rejects infeasible input") {
  CHECK_THROWS_AS(solve_sigma(4.0, 4.0, 0.0, 1.0, 1.0, 0.95, 1e-9), Infeasible);
  CHECK_THROWS_AS(solve_sigma(1.0, 0.0, 2.0, 1.0, 1.0, 0.95, 1e-9), Infeasible);
  CHECK_THROWS_AS(solve_sigma(5.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1e-9), std::invalid_argument);
}

TEST_CASE("bisection bracket keeps its sign invariant") {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_instance(gen);
    bool ok = true;
    double last_width = 1e300;
    solve_sigma(x.a, x.d2, x.d3, x.r, 50.0, 0.95, 1e-9,
                [&](double lo, double hi, double phi_lo, double phi_hi) {
                  ok = ok && phi_lo < 0.0 && phi_hi > 0.0 && lo < hi && hi - lo < last_width;
                  last_width = hi - lo;
                });
    CHECK(ok);
  }
}

TEST_CASE("margin function is strictly increasing") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_instance(gen);
    double prev = decay_margin(x.a, x.d2, x.d3, x.r, 0.0);
    for (int i = 1; i <= 200; ++i) {
      const double cur = decay_margin(x.a, x.d2, x.d3, x.r, 0.05 * i);
      REQUIRE(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("bisection root agrees with exhaustive grid search") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_instance(gen);
    const auto sol = solve_sigma(x.a, x.d2, x.d3, x.r, 1e9, 0.95, 1e-9);
    CHECK(std::abs(sol.sigma_star - grid_root(x.a, x.d2, x.d3, x.r)) <= 2e-4);
  }
}

TEST_CASE("emitted rates satisfy the strict constraint") {
  std::mt19937_64 gen(123);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_instance(gen);
    const double sigma1 = 0.05 + 3.0 * u(gen);
    const auto sol = solve_sigma(x.a, x.d2, x.d3, x.r, sigma1, 0.95, 1e-9);
    const double growth = std::exp(sol.sigma * x.r);
    const double slack = x.a - sol.sigma - sol.gamma2 - growth * x.d2 / sol.gamma2 - growth * x.d3;
    CHECK(slack > 0.0);
    CHECK(sol.sigma > 0.0);
    CHECK(sol.sigma < sigma1);
  }
}

TEST_CASE("gamma2 is a local minimizer of its penalty") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto x = random_instance(gen);
    if (x.d2 == 0.0) x.d2 = 1.0, x.a += 2.0;
    const auto sol = solve_sigma(x.a, x.d2, x.d3, x.r, 10.0, 0.95, 1e-9);
    const double growth = std::exp(sol.sigma * x.r);
    auto penalty = [&](double g) { return g + growth * x.d2 / g; };
    const double at = penalty(sol.gamma2);
    CHECK(penalty(1.01 * sol.gamma2) >= at);
    CHECK(penalty(0.99 * sol.gamma2) >= at);
  }
}

TEST_CASE("comparative statics of the certifiable rate") {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_instance(gen);
    const double base = solve_sigma(x.a, x.d2, x.d3, x.r, 1e9, 0.95, 1e-9).sigma_star;
    const double bump = 0.1 + u(gen);
    auto root = [&](double a, double d2, double d3, double r) {
      try {
        return solve_sigma(a, d2, d3, r, 1e9, 0.95, 1e-9).sigma_star;
      } catch (const Infeasible&) {
        return 0.0;
      }
    };
    const double grid = grid_root(x.a, x.d2, x.d3, x.r);
    CHECK(root(x.a, x.d2 + bump, x.d3, x.r) <= base + 1e-9);
    CHECK(root(x.a, x.d2, x.d3 + bump, x.r) <= base + 1e-9);
    CHECK(root(x.a, x.d2, x.d3, x.r + bump) <= base + 1e-9);
    CHECK(root(x.a + bump, x.d2, x.d3, x.r) >= base - 1e-9);
    // Same directions on the brute-force oracle.
    CHECK(grid_root(x.a, x.d2 + bump, x.d3, x.r) <= grid);
    CHECK(grid_root(x.a + bump, x.d2, x.d3, x.r) >= grid);
  }
}

TEST_CASE("certificate for the memoryless-envelope heat model") {
  // nu = 5, b1 = b2 = 1, k1 = k2 = 0, p = 0, zero initial data.
  const auto p = heat_problem(5.0, 1.0, 1.0);
  const auto c = build_certificate(p);
  CHECK(c.gamma1 == doctest::Approx(0.2));
  CHECK(c.a == doctest::Approx(9.8));
  CHECK(c.R1 == 0.0);
  CHECK(c.R2 == 0.0);
  CHECK(c.R3 == 0.0);
  CHECK(c.M == 1.0);
  CHECK(c.B == 1.0);
  const double root = bisect_oracle(9.8, 4.0, 4.0, 1.0);
  CHECK(c.sigma == doctest::Approx(0.95 * root).epsilon(1e-8));
  CHECK(c.constraint_slack > 0.0);
}

TEST_CASE("certificate reduces to linear decay without memory") {
  ProblemSpec p;
  p.lambda1 = 1.0;
  p.delta1 = 2.0;
  p.sigma1 = 10.0;
  p.rho = DelaySpec::constant(0.5, 1.0);
  p.tau = DelaySpec::constant(0.5, 1.0);
  p.init_energy_sup = 0.5;
  const auto c = build_certificate(p);
  CHECK(c.sigma == doctest::Approx(0.95 * 2.0 * 0.9).epsilon(1e-8));
  CHECK(c.B == doctest::Approx(c.M));
  CHECK(c.M == 1.5);

  p.sigma1 = 1.0;
  CHECK(build_certificate(p).sigma == doctest::Approx(0.95));
}

TEST_CASE("R3 closed form for the forcing envelope") {
  HeatModelSpec m;
  m.nu = 5.0;
  m.b1 = 1.0;
  m.b2 = 1.0;
  m.k = 1.0;
  m.p_coeffs = {1.0};
  const auto p = map_heat_to_problem(m);
  REQUIRE(p.sigma1 < 2.0);
  const auto c = build_certificate(p);
  CHECK(c.R3 == doctest::Approx((2.0 / c.gamma2) / (2.0 - p.sigma1)));
  CHECK(c.R2 == doctest::Approx((2.0 / c.gamma2) / 2.0));
  CHECK(c.R2 <= c.R3);
  CHECK(c.B == doctest::Approx(std::exp(c.R1 + c.R3) * c.M));

  CertificateOptions opts;
  opts.r3_weight = R3Weight::Sigma;
  const auto tight = build_certificate(p, opts);
  CHECK(tight.R3 == doctest::Approx((2.0 / tight.gamma2) / (2.0 - tight.sigma)));
  CHECK(tight.B < c.B);
}

TEST_CASE("certificate invariants on randomized heat models") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int built = 0;
  for (int trial = 0; trial < 200; ++trial) {
    HeatModelSpec m;
    m.nu = 0.5 + 10.0 * u(gen);
    m.b1 = 2.0 * u(gen);
    m.b2 = 2.0 * u(gen);
    m.k = 0.1 + 2.0 * u(gen);
    m.k1 = TimeFunction::exponential(u(gen), 0.1 + u(gen));
    m.k2 = TimeFunction::table({0.0, 1.0 + u(gen)}, {u(gen), 0.0});
    m.p_coeffs = {u(gen), u(gen)};
    m.phi = InitialSegment::constant({u(gen)});
    const auto p = map_heat_to_problem(m);
    if (!check_b5(p.lambda1, p.delta1, p.g_env.delta, p.h_env.delta).pass) continue;
    ++built;
    const auto c = build_certificate(p);
    CHECK(c.sigma > 0.0);
    CHECK(c.sigma < p.sigma1);
    CHECK(constraint_slack(c.a, c.sigma, c.gamma2, p.g_env.delta, p.h_env.delta, 1.0) > 0.0);
    CHECK(c.M == doctest::Approx(1.0 + p.init_energy_sup));
    CHECK(c.B == std::exp(c.R1 + c.R3) * c.M);
    CHECK(c.B >= c.M);
    CHECK(c.M >= 1.0);
    CHECK(c.R2 <= c.R3);
  }
  CHECK(built > 20);
}

TEST_CASE("certificate errors") {
  CHECK_THROWS_AS(build_certificate(heat_problem(0.5, 2.0, 2.0)), Infeasible);
  auto p = heat_problem(5.0, 1.0, 1.0);
  p.g_env.beta = TimeFunction::exponential(1.0, 0.0);
  CHECK_THROWS_AS(build_certificate(p), DivergentIntegral);
}

TEST_CASE("pathwise certificate constants") {
  ProblemSpec p;
  p.delta1 = 2.0;
  p.sigma1 = 10.0;
  p.rho = DelaySpec::constant(0.5, 1.0);
  p.tau = DelaySpec::constant(0.5, 1.0);
  auto c = build_certificate(p);
  auto asc = build_as_certificate(p, c);
  CHECK(asc.B1 == doctest::Approx(kB1Inflation * c.gamma2));
  CHECK(asc.as_rate == doctest::Approx(c.sigma / 2));
  CHECK(asc.interval_coeff == doctest::Approx(2.0 * c.B * (1.0 + asc.B1 / c.sigma)));
  CHECK(asc.interval_probability_bound(4) ==
        doctest::Approx(asc.interval_coeff * std::exp(-c.sigma * 2.0)));

  const auto heat = heat_problem(5.0, 1.0, 1.0);
  c = build_certificate(heat);
  asc = build_as_certificate(heat, c);
  const double growth = std::exp(c.sigma);
  const double expected = c.gamma2 + 4.0 / c.gamma2 * growth + 32.0 * 4.0 * growth;
  CHECK(asc.B1 == doctest::Approx(kB1Inflation * expected));
}

TEST_CASE("pathwise certificate needs bounded weighted forcing") {
  ProblemSpec p;
  p.delta1 = 2.0;
  p.sigma1 = 10.0;
  p.rho = DelaySpec::constant(0.5, 1.0);
  p.tau = DelaySpec::constant(0.5, 1.0);
  p.g_env.beta = TimeFunction::exponential(1.0, 0.5);
  Certificate c;
  c.gamma1 = 0.1;
  c.gamma2 = 1.0;
  c.sigma = 1.0;
  c.B = 1.0;
  CHECK_THROWS_AS(build_as_certificate(p, c), Unbounded);
  c.sigma = 0.5;
  CHECK_NOTHROW(build_as_certificate(p, c));
}

TEST_CASE("pathwise supremum sees table envelopes") {
  ProblemSpec p;
  p.delta1 = 2.0;
  p.sigma1 = 10.0;
  p.rho = DelaySpec::constant(0.5, 1.0);
  p.tau = DelaySpec::constant(0.5, 1.0);
  p.h_env.alpha = TimeFunction::table({0.0, 2.0, 3.0, 4.0}, {0.0, 0.0, 1.0, 0.0});
  const auto c = build_certificate(p);
  const auto asc = build_as_certificate(p, c);
  const double growth = std::exp(c.sigma);
  CHECK(asc.B1 == doctest::Approx(kB1Inflation * (c.gamma2 + 32.0 * growth)));
}

TEST_CASE("hypothesis report") {
  HeatModelSpec m;
  m.nu = 5.0;
  m.b1 = 1.0;
  m.b2 = 1.0;
  m.k1 = TimeFunction::exponential(0.1, 1.0);
  m.k2 = TimeFunction::exponential(0.1, 1.0);
  m.p_coeffs = {0.1};
  const auto p = map_heat_to_problem(m);
  const auto c = build_certificate(p);
  auto report = check_hypotheses(p, &c, &m);
  CHECK(report.ok());
  REQUIRE(report.find("B1") != nullptr);
  REQUIRE(report.find("B1")->slack.has_value());
  CHECK(*report.find("B1")->slack >= -1e-12);
  CHECK(report.find("B5")->slack.value() == doctest::Approx(2.0));

  HeatModelSpec bad = m;
  bad.nu = 0.5;
  bad.b1 = 2.0;
  bad.b2 = 2.0;
  report = check_hypotheses(map_heat_to_problem(bad), nullptr, &bad);
  CHECK_FALSE(report.find("B5")->passed);
  CHECK(report.find("B5")->slack.value() == doctest::Approx(1.0 - 24.0));
  CHECK_FALSE(report.find("B6")->passed);  // no certificate to take sigma from

  auto unattested = p;
  unattested.attest_hemicontinuous = false;
  CHECK_FALSE(check_hypotheses(unattested, &c).find("A3")->passed);
}
