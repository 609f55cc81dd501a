#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "memstab/errors.hpp"
#include "memstab/model.hpp"

using namespace memstab;

namespace {

// Composite Simpson of e^{w t} f(t) on [0, L]; independent of the closed forms.
double simpson_weighted(const TimeFunction& f, double w, double L, int panels) {
  const double h = L / panels;
  double sum = f(0.0) + std::exp(w * L) * f(L);
  for (int i = 1; i < panels; ++i) {
    const double t = i * h;
    sum += (i % 2 ? 4.0 : 2.0) * std::exp(w * t) * f(t);
  }
  return sum * h / 3.0;
}

HeatModelSpec demo_model() {
  HeatModelSpec m;
  m.nu = 5.0;
  m.b1 = 1.0;
  m.b2 = 1.0;
  m.k = 1.0;
  m.k1 = TimeFunction::exponential(0.1, 1.0);
  m.k2 = TimeFunction::exponential(0.1, 1.0);
  m.p_coeffs = {0.1};
  m.phi = InitialSegment::constant({1.0});
  return m;
}

}  // namespace

TEST_CASE("time function evaluation") {
  CHECK(TimeFunction::exponential(2.0, 0.5)(0.0) == 2.0);
  CHECK(TimeFunction::exponential(1.0, 1.0)(1.0) == doctest::Approx(0.36787944117144233));
  const auto tab = TimeFunction::table({0.0, 1.0}, {1.0, 0.0});
  CHECK(tab(0.5) == doctest::Approx(0.5));
  CHECK(tab(1.0) == 0.0);
  CHECK(tab(3.0) == 0.0);
  CHECK(TimeFunction::zero()(4.0) == 0.0);
  CHECK_THROWS_AS(TimeFunction::exponential(1.0, 1.0)(-0.1), std::domain_error);
}

TEST_CASE("time function construction rejects negative data") {
  CHECK_THROWS_AS(TimeFunction::exponential(-1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(TimeFunction::exponential(1.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(TimeFunction::table({0.0, 1.0}, {1.0, -0.5}), std::invalid_argument);
  CHECK_THROWS_AS(TimeFunction::table({0.0, 0.0}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(TimeFunction::table({0.5, 1.0}, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("integrability predicates") {
  CHECK(TimeFunction::exponential(1.0, 0.5).integrable());
  CHECK_FALSE(TimeFunction::exponential(1.0, 0.0).integrable());
  CHECK(TimeFunction::exponential(0.0, 0.0).integrable());  // inactive term
  CHECK(TimeFunction::table({0.0, 2.0}, {3.0, 3.0}).integrable_with_weight(100.0));
  CHECK_FALSE(TimeFunction::exponential(1.0, 1.0).integrable_with_weight(1.0));
  CHECK(TimeFunction::exponential(1.0, 1.0).bounded_with_weight(1.0));
  CHECK_FALSE(TimeFunction::exponential(1.0, 1.0).bounded_with_weight(1.5));
}

TEST_CASE("closed-form integrals") {
  CHECK(TimeFunction::exponential(1.0, 1.0).integrate(0.0) == doctest::Approx(1.0));
  CHECK(TimeFunction::exponential(2.0, 3.0).integrate(1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(TimeFunction::exponential(1.0, 1.0).integrate(1.0), DivergentIntegral);
  CHECK(TimeFunction::table({0.0, 1.0}, {1.0, 0.0}).integrate() == doctest::Approx(0.5));
}

TEST_CASE("exp-poly integral matches quadrature on random instances") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> coeff(0.0, 3.0), gap(0.2, 5.0), weight(0.0, 2.0);
  std::uniform_int_distribution<int> n_terms(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const double w = weight(gen);
    std::vector<ExpTerm> terms;
    double slowest = 1e300;
    for (int j = n_terms(gen); j > 0; --j) {
      const double g = gap(gen);
      slowest = std::min(slowest, g);
      terms.push_back({coeff(gen), w + g});
    }
    const auto f = TimeFunction::exp_poly(terms);
    const double exact = f.integrate(w);
    const double numeric = simpson_weighted(f, w, 45.0 / slowest, 200000);
    CHECK(exact == doctest::Approx(numeric).epsilon(1e-8));
  }
}

TEST_CASE("table integral with exponential weight matches quadrature") {
  const auto f = TimeFunction::table({0.0, 0.3, 1.1, 2.0}, {2.0, 0.5, 1.5, 0.0});
  const double knots[] = {0.0, 0.3, 1.1, 2.0};
  for (double w : {0.0, 1e-5, 0.7, 3.0, -0.4}) {
    // Simpson per linear piece so no panel straddles a kink.
    double numeric = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double a = knots[k], h = (knots[k + 1] - a) / 4096;
      auto g = [&](double t) { return std::exp(w * t) * f(t); };
      double sum = g(a) + g(knots[k + 1]);
      for (int i = 1; i < 4096; ++i) sum += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
      numeric += sum * h / 3.0;
    }
    CHECK(f.integrate(w) == doctest::Approx(numeric).epsilon(1e-10));
  }
}

TEST_CASE("time functions are nonnegative everywhere") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto e = TimeFunction::exp_poly({{0.3, 0.1}, {2.0, 4.0}, {0.0, 0.0}});
  const auto tab = TimeFunction::table({0.0, 0.5, 1.0, 4.0}, {0.0, 2.0, 0.0, 1.0});
  for (int i = 0; i < 10000; ++i) {
    const double t = 10.0 * u(gen);
    CHECK(e(t) >= 0.0);
    CHECK(tab(t) >= 0.0);
  }
}

TEST_CASE("squared table dominates the square of the table") {
  const auto f = TimeFunction::table({0.0, 1.0, 2.0}, {1.0, 3.0, 0.5});
  const auto sq = f.squared();
  for (int i = 0; i <= 400; ++i) {
    const double t = 0.0055 * i;
    CHECK(sq(t) >= f(t) * f(t) - 1e-12);
  }
  const auto e = TimeFunction::exp_poly({{0.5, 1.0}, {2.0, 3.0}});
  CHECK(e.squared()(0.7) == doctest::Approx(e(0.7) * e(0.7)));
}

TEST_CASE("delay evaluation") {
  const auto rho = DelaySpec::inv_one_plus_abs_sin();
  const auto tau = DelaySpec::inv_one_plus_abs_cos();
  CHECK(rho(0.0) == 1.0);
  CHECK(rho(std::numbers::pi / 2) == doctest::Approx(0.5));
  CHECK(tau(0.0) == 0.5);
  CHECK(DelaySpec::constant(0.25, 1.0)(7.0) == 0.25);
  CHECK_THROWS_AS(DelaySpec::constant(2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(DelaySpec::inv_one_plus_abs_sin(0.5), std::invalid_argument);
  CHECK_THROWS_AS(DelaySpec::table({0.0, 1.0}, {0.5, 1.5}, 1.0), std::invalid_argument);
  const auto tab = DelaySpec::table({0.0, 1.0}, {0.2, 0.6}, 1.0);
  CHECK(tab(0.5) == doctest::Approx(0.4));
  CHECK(tab(9.0) == doctest::Approx(0.6));
}

TEST_CASE("every delay stays in [0, r] on [0, 1000]") {
  const DelaySpec delays[] = {
      DelaySpec::inv_one_plus_abs_sin(), DelaySpec::inv_one_plus_abs_cos(),
      DelaySpec::constant(0.75, 1.0), DelaySpec::table({0.0, 2.0, 5.0}, {1.0, 0.0, 0.5}, 1.0)};
  for (const auto& d : delays) {
    const double r = d.horizon();
    bool ok = true;
    for (long i = 0; i <= 1000000; ++i) {
      const double t = 1e-3 * static_cast<double>(i);
      const double lag = d(t);
      ok = ok && lag >= 0.0 && lag <= r && t - lag >= -r;
    }
    CHECK(ok);
  }
}

TEST_CASE("heat model maps onto the coefficient bundle") {
  HeatModelSpec m;
  m.nu = 5.0;
  m.b1 = 1.0;
  m.b2 = 1.0;
  auto p = map_heat_to_problem(m);
  CHECK(p.lambda1 == 1.0);
  CHECK(p.delta1 == 10.0);
  CHECK(p.g_env.delta == 4.0);
  CHECK(p.h_env.delta == 4.0);
  CHECK(p.alpha1.identically_zero());
  CHECK(p.f_env.identically_zero());
  CHECK(p.h_env.beta.identically_zero());
  CHECK(p.memory_horizon() == 1.0);
  CHECK(p.sigma1 == 2.0 * m.k);

  m.b1 = 0.0;
  m.b2 = 0.0;
  p = map_heat_to_problem(m);
  CHECK(p.g_env.delta == 0.0);
  CHECK(p.h_env.delta == 0.0);
  CHECK(p.g_env.beta.identically_zero());

  m.p_coeffs = {1.0, 0.0, 0.0};
  m.k = 1.0;
  p = map_heat_to_problem(m);
  CHECK(p.g_env.beta(0.0) == doctest::Approx(2.0));
  CHECK(p.g_env.beta(1.5) == doctest::Approx(2.0 * std::exp(-3.0)));
  // beta2 decays at exactly 2k, so sigma1 is pulled strictly below it.
  CHECK(p.sigma1 == doctest::Approx(kSigma1CapFraction * 2.0));
  CHECK(p.g_env.beta.integrable_with_weight(p.sigma1));
}

TEST_CASE("heat model alpha envelopes are 4 k^2") {
  const auto m = demo_model();
  const auto p = map_heat_to_problem(m);
  for (double t : {0.0, 0.4, 3.0}) {
    CHECK(p.g_env.alpha(t) == doctest::Approx(4.0 * m.k1(t) * m.k1(t)));
    CHECK(p.h_env.alpha(t) == doctest::Approx(4.0 * m.k2(t) * m.k2(t)));
  }
  CHECK(p.init_energy_sup == doctest::Approx(1.0));
}

TEST_CASE("heat model rejects non-decaying k1, k2") {
  auto m = demo_model();
  m.k1 = TimeFunction::exponential(0.5, 0.0);
  CHECK_THROWS_AS(map_heat_to_problem(m), std::invalid_argument);
  m = demo_model();
  m.k2 = TimeFunction::table({0.0, 1.0}, {0.1, 0.3});
  CHECK_THROWS_AS(map_heat_to_problem(m), std::invalid_argument);
}

TEST_CASE("validation report") {
  auto p = map_heat_to_problem(demo_model());
  CHECK(validate_problem(p).ok());

  auto bad = p;
  bad.g_env.beta = TimeFunction::exponential(1.0, 0.0);
  auto report = validate_problem(bad);
  CHECK_FALSE(report.ok());
  REQUIRE(report.find("B2.beta2.integrable") != nullptr);
  CHECK_FALSE(report.find("B2.beta2.integrable")->passed);

  bad = p;
  bad.sigma1 = 2.0;
  bad.h_env.beta = TimeFunction::exponential(1.0, 1.0);
  report = validate_problem(bad);
  CHECK(report.find("B3.beta3.integrable")->passed);
  CHECK_FALSE(report.find("B4.beta3.weighted")->passed);
}

TEST_CASE("mapped random heat models always validate") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    HeatModelSpec m;
    m.nu = 0.1 + 10.0 * u(gen);
    m.b1 = 3.0 * u(gen);
    m.b2 = 3.0 * u(gen);
    m.k = 0.05 + 3.0 * u(gen);
    m.k1 = TimeFunction::exponential(u(gen), 0.05 + u(gen));
    if (trial % 2) {
      m.k2 = TimeFunction::table({0.0, 1.0, 2.0 + u(gen)}, {1.0, 0.5 * u(gen), 0.0});
    } else {
      m.k2 = TimeFunction::exp_poly({{u(gen), 0.1 + u(gen)}, {u(gen), 2.0}});
    }
    m.p_coeffs = {u(gen), u(gen) - 0.5};
    m.phi = InitialSegment::bump(1 + trial % 3, u(gen), -0.5, 0.5);
    const auto report = validate_problem(map_heat_to_problem(m));
    CHECK(report.ok());
  }
}

TEST_CASE("initial segment energy supremum") {
  CHECK(InitialSegment().energy_sup(4, 1.0) == 0.0);
  CHECK(InitialSegment::constant({3.0, 4.0}).energy_sup(4, 1.0) == doctest::Approx(25.0));
  const auto lin = InitialSegment::linear({1.0}, {2.0});
  CHECK(lin.energy_sup(1, 1.0) == doctest::Approx(1.0));  // |1 + 2s| on [-1, 0]
  const auto bump = InitialSegment::bump(2, 2.0, -0.5, 0.25);
  CHECK(bump.coeff(-0.5, 2) == 2.0);
  CHECK(bump.coeff(-0.5, 1) == 0.0);
  CHECK(bump.coeff(-0.1, 2) == 0.0);
  CHECK(bump.energy_sup(3, 1.0) == doctest::Approx(4.0).epsilon(1e-4));
}
