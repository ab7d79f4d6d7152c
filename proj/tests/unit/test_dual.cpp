#include <cmath>
#include <random>

#include "helpers.hpp"
#include "reference.hpp"
#include "riskmmse/dual.hpp"
#include "riskmmse/oracle.hpp"

using namespace riskmmse;
using testing::scalar;

namespace {

const OuterIntegrator kExact{OuterMode::discrete_exact, 0, 0};

ObservationSet two_point_set() { return ObservationSet(testing::two_point(), kExact); }

ObservationSet scenario_a_set(std::size_t n = 400) {
  return ObservationSet(scenario_a(), {OuterMode::monte_carlo, n, 7});
}

}  // namespace

TEST_SUITE("dual") {
  TEST_CASE("expected risk on the two-point model") {
    const auto obs = two_point_set();
    CHECK(expected_risk(obs, 0.0).value == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(expected_risk(obs, 0.25).value == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(expected_risk(obs, 1.0).value == doctest::Approx(0.08).epsilon(1e-14));
    CHECK(expected_risk(obs, 1.0).std_err == 0.0);
    for (double mu : {0.01, 0.3, 3.0, 100.0})
      CHECK(expected_risk(obs, mu).value == doctest::Approx(ref::two_point::risk(mu)).epsilon(1e-13));
    CHECK_ERROR_CODE(expected_risk(obs, -1.0), ErrorCode::NegativeMu);
  }

  TEST_CASE("dual function values on the two-point model") {
    const auto obs = two_point_set();
    CHECK(dual_value(obs, 0.0, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(dual_value(obs, 0.0, 7.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(dual_value(obs, 0.25, 0.5) == doctest::Approx(1.03125).epsilon(1e-14));
    const double mid = dual_value(obs, 0.125, 0.5);
    CHECK(mid == doctest::Approx(1.0260416666666667).epsilon(1e-13));
    CHECK(mid >= 0.5 * (1.0 + 1.03125));
    CHECK_ERROR_CODE(dual_value(obs, 0.1, 0.0), ErrorCode::InvalidParameter);
  }

  TEST_CASE("dual agrees with the Lagrangian evaluated at the minimizer") {
    // D(mu) = E[mse]/2 + mu (E[risk] - eps)/4 at the per-y minimizer.
    for (const auto& f : oracle_fixtures()) {
      const ObservationSet obs(f.model, kExact);
      for (double mu : {0.0, 0.2, 1.5, 40.0}) {
        const auto a = obs.evaluate(mu);
        CHECK(dual_value(a, f.epsilon) ==
              doctest::Approx(0.5 * a.mse + 0.25 * mu * (a.risk - f.epsilon)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("solve_mu examples") {
    const auto obs = two_point_set();
    const auto r = solve_mu(obs, 0.5, {1e-8, 1e8});
    CHECK(r.mu_star == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(r.primal_value == doctest::Approx(1.03125).epsilon(1e-8));
    CHECK(std::abs(r.comp_slackness) <= 1e-8);
    CHECK(r.slack >= 0.0);
    CHECK(ref::two_point::estimate(r.mu_star) == doctest::Approx(1.25).epsilon(1e-8));

    const auto z = solve_mu(obs, 3.0);
    CHECK(z.mu_star == 0.0);
    CHECK(z.expected_risk == 2.0);
    CHECK(z.comp_slackness == 0.0);
  }

  TEST_CASE("multiplier cap") {
    const auto obs = two_point_set();
    // Risk 2/(1+4mu)^2 stays above 1e-3 up to mu ~ 11.
    CHECK_ERROR_CODE(solve_mu(obs, 1e-3, {1e-6, 10.0}), ErrorCode::MultiplierCapExceeded);
    CHECK_ERROR_CODE(solve_mu(obs, 1e-12, {1e-6, 1e3}), ErrorCode::MultiplierCapExceeded);
    // With the default cap an epsilon of 1e-12 is reachable: risk(1e8) ~ 1.25e-17.
    const auto r = solve_mu(obs, 1e-12);
    CHECK(r.expected_risk <= 1e-12);
    CHECK(r.mu_star < 1e8);
  }

  TEST_CASE("solve_mu argument validation") {
    const auto obs = two_point_set();
    CHECK_ERROR_CODE(solve_mu(obs, -1.0), ErrorCode::InvalidParameter);
    CHECK_ERROR_CODE(solve_mu(obs, 0.5, {0.0, 1e8}), ErrorCode::InvalidParameter);
    CHECK_ERROR_CODE(solve_mu(obs, 0.5, {1e-6, -1.0}), ErrorCode::InvalidParameter);
  }

  TEST_CASE("risk falls and MSE rises with the multiplier") {
    const auto mus = std::vector<double>{0, 1e-3, 1e-2, 0.1, 0.3, 1, 3, 10, 100, 1e3};
    for (const auto& f : oracle_fixtures()) {
      const ObservationSet obs(f.model, kExact);
      OuterAverages prev = obs.evaluate(0.0);
      for (double mu : mus) {
        const auto a = obs.evaluate(mu);
        CHECK(a.risk <= prev.risk + 1e-12);
        CHECK(a.mse >= prev.mse - 1e-12);
        prev = a;
      }
    }
    const auto obs = scenario_a_set();
    OuterAverages prev = obs.evaluate(0.0);
    for (double mu : mus) {
      const auto a = obs.evaluate(mu);
      CHECK(a.risk <= prev.risk + 3 * std::hypot(a.risk_se, prev.risk_se));
      CHECK(a.mse >= prev.mse - 3 * std::hypot(a.mse_se, prev.mse_se));
      prev = a;
    }
  }

  TEST_CASE("weak duality") {
    for (const auto& f : oracle_fixtures()) {
      const ObservationSet obs(f.model, kExact);
      const auto mmse = obs.evaluate(0.0);
      const auto star = solve_mu(obs, f.epsilon);
      for (double mu : {0.0, 0.1, 0.5, 2.0, 20.0}) {
        const double d = dual_value(obs, mu, f.epsilon);
        if (mmse.risk <= f.epsilon) CHECK(d <= 0.5 * mmse.mse + 1e-12);
        CHECK(d <= star.primal_value + 1e-9);
      }
    }
  }

  TEST_CASE("dual is midpoint concave") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> logmu(-3, 3);
    const auto a = scenario_a_set();
    const ObservationSet b(scenario_b(), {OuterMode::monte_carlo, 300, 7});
    for (const auto& f : oracle_fixtures()) {
      const ObservationSet obs(f.model, kExact);
      for (int k = 0; k < 20; ++k) {
        const double m1 = std::pow(10, logmu(rng)), m2 = std::pow(10, logmu(rng));
        const double mid = dual_value(obs, 0.5 * (m1 + m2), f.epsilon);
        CHECK(mid >= 0.5 * (dual_value(obs, m1, f.epsilon) + dual_value(obs, m2, f.epsilon)) - 1e-12);
      }
    }
    for (const auto* obs : {&a, &b}) {
      for (int k = 0; k < 20; ++k) {
        const double m1 = std::pow(10, logmu(rng)), m2 = std::pow(10, logmu(rng));
        const double mid = dual_value(*obs, 0.5 * (m1 + m2), 1.0);
        const double chord = 0.5 * (dual_value(*obs, m1, 1.0) + dual_value(*obs, m2, 1.0));
        CHECK(mid >= chord - 1e-9 * std::max(1.0, std::abs(chord)));
      }
    }
  }

  TEST_CASE("KKT certificates on the discrete fixtures") {
    for (const auto& f : oracle_fixtures()) {
      CAPTURE(f.name);
      const auto r = solve_mu(ObservationSet(f.model, kExact), f.epsilon);
      CHECK(r.slack >= -1e-6);
      CHECK(std::abs(r.comp_slackness) <= 1e-6);
      CHECK(std::abs(r.gap) <= 1e-6);
      CHECK(kkt_satisfied(r));
      CHECK(r.risk_se == 0.0);
    }
  }

  TEST_CASE("KKT certificate on a sampled model") {
    const auto obs = scenario_a_set();
    // The risk floor as mu grows is positive here, so take a reachable target.
    const double eps = obs.evaluate(1.0).risk;
    const auto r = solve_mu(obs, eps);
    CHECK(r.mu_star > 0);
    CHECK(kkt_satisfied(r));
    CHECK(r.risk_se > 0);
    // At mu = 0 the dual equals half the MMSE.
    const auto z = kkt_report(obs, 0.0, eps);
    CHECK(z.gap == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  }

  TEST_CASE("report json carries exactly the certificate fields") {
    const auto j = to_json(solve_mu(two_point_set(), 0.5));
    CHECK(j.size() == 8);
    for (const char* k : {"mu_star", "epsilon", "expected_risk", "slack", "dual_value", "primal_value",
                          "comp_slackness", "gap"})
      CHECK(j.contains(k));
  }

  TEST_CASE("y quadrature reproduces Gaussian averages") {
    const ObservationSet obs(testing::standard_gaussian(), {OuterMode::y_quadrature, 256, 0});
    CHECK(obs.exact());
    const auto a = obs.evaluate(0.0);
    CHECK(a.mse == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(a.v4 == doctest::Approx(1.5).epsilon(1e-8));
    CHECK(a.s2 == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(a.risk_se == 0.0);
    CHECK_ERROR_CODE(ObservationSet(testing::two_point(), {OuterMode::y_quadrature, 256, 0}),
                     ErrorCode::UnsupportedKind);
    CHECK_ERROR_CODE(ObservationSet(scenario_a(), kExact), ErrorCode::UnsupportedKind);
  }

  TEST_CASE("y quadrature agrees with Monte Carlo on scenario B") {
    const ObservationSet q(scenario_b(), {OuterMode::y_quadrature, 256, 0});
    const ObservationSet mc(scenario_b(), {OuterMode::monte_carlo, 2000, 3});
    for (double mu : {0.0, 1.0}) {
      const auto a = q.evaluate(mu), b = mc.evaluate(mu);
      CHECK(std::abs(a.mse - b.mse) <= 4 * b.mse_se);
      CHECK(std::abs(a.risk - b.risk) <= 4 * b.risk_se);
    }
  }

  TEST_CASE("outer integrator validation") {
    CHECK_ERROR_CODE((OuterIntegrator{OuterMode::monte_carlo, 10, 1}.validate()), ErrorCode::InvalidParameter);
    CHECK_ERROR_CODE((OuterIntegrator{OuterMode::y_quadrature, 8, 1}.validate()), ErrorCode::InvalidParameter);
    CHECK(parse_outer_mode("y_quadrature") == OuterMode::y_quadrature);
    CHECK(outer_mode_name(OuterMode::discrete_exact) == "discrete_exact");
    CHECK_ERROR_CODE(parse_outer_mode("grid"), ErrorCode::InvalidParameter);
  }
}
