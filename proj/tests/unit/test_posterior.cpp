#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "reference.hpp"
#include "riskmmse/estimator.hpp"
#include "riskmmse/posterior.hpp"

using namespace riskmmse;
using testing::scalar;
using testing::vec;
using nlohmann::json;

namespace {

ModelSpec planar_gaussian() {
  return build_model(json::parse(R"({"kind":"gaussian_linear","prior_mean":[1,-0.5],
      "prior_cov":[[2,0.6],[0.6,1]],"obs_matrix":[[1,0.5],[0,2]],"noise_cov":[[0.5,0.1],[0.1,0.8]]})"));
}

// Conditional moments of N(m, S) from the closed forms for |X|^2.
void check_gaussian_moments(const PosteriorMoments& got, const Vector& m, const Matrix& S, double tol) {
  const double tr = S.trace();
  const Vector m3 = (tr + m.squaredNorm()) * m + 2 * S * m;
  const double v4 = 2 * (S * S).trace() + 4 * m.dot(S * m);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    CHECK(got.m1(i) == doctest::Approx(m(i)).epsilon(tol).scale(1));
    CHECK(got.m3(i) == doctest::Approx(m3(i)).epsilon(tol).scale(1));
    for (Eigen::Index j = 0; j < m.size(); ++j) CHECK(got.sigma(i, j) == doctest::Approx(S(i, j)).epsilon(tol).scale(1));
  }
  CHECK(got.s2 == doctest::Approx(tr + m.squaredNorm()).epsilon(tol));
  CHECK(got.v4 == doctest::Approx(v4).epsilon(tol));
}

void check_invariants(const PosteriorMoments& m) {
  CHECK((m.sigma - m.sigma.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.sigma);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  CHECK(m.sigma.trace() == doctest::Approx(m.s2 - m.m1.squaredNorm()).epsilon(1e-9));
  CHECK(m.v4 >= 0.0);
  CHECK(m.mass > 0.0);
}

}  // namespace

TEST_SUITE("posterior") {
  TEST_CASE("scalar Gaussian posterior at y = 2") {
    const auto m = posterior_moments(testing::standard_gaussian(), scalar(2));
    CHECK(m.m1(0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(m.sigma(0, 0) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(m.s2 == doctest::Approx(1.5).epsilon(1e-8));
    CHECK(m.m3(0) == doctest::Approx(2.5).epsilon(1e-8));
    CHECK(m.v4 == doctest::Approx(2.5).epsilon(1e-8));
    CHECK(m.mass == doctest::Approx(ref::normal_pdf(2, 0, 2)).epsilon(1e-8));
  }

  TEST_CASE("bivariate Gaussian posterior matches the conditioning formulas") {
    const auto model = planar_gaussian();
    const auto& g = model.as<GaussianLinear>();
    for (const auto& y : {vec({0.3, -1.0}), vec({4.0, 2.5}), vec({-3.0, 0.0})}) {
      // Information form, independent of the library's gain form.
      const Matrix Rinv = g.noise_cov.inverse();
      const Matrix P = (g.prior_cov.inverse() + g.obs_matrix.transpose() * Rinv * g.obs_matrix).inverse();
      const Vector mean = P * (g.prior_cov.inverse() * g.prior_mean + g.obs_matrix.transpose() * Rinv * y);
      const auto got = posterior_moments(model, y);
      check_gaussian_moments(got, mean, P, 1e-8);
      check_invariants(got);
    }
  }

  TEST_CASE("gaussian_linear above two state dimensions is unsupported") {
    const auto m3 = build_model(json::parse(R"({"kind":"gaussian_linear","prior_mean":[0,0,0],
        "prior_cov":[[1,0,0],[0,1,0],[0,0,1]],"obs_matrix":[[1,1,1]],"noise_cov":[[1]]})"));
    CHECK_ERROR_CODE(posterior_moments(m3, scalar(0)), ErrorCode::UnsupportedKind);
  }

  TEST_CASE("discrete posteriors are exact") {
    const auto a = posterior_moments(testing::two_point(), scalar(0));
    CHECK(a.m1(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a.sigma(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(a.s2 == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(a.m3(0) == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(a.v4 == doctest::Approx(18.0).epsilon(1e-15));
    CHECK(a.mass == doctest::Approx(1.0).epsilon(1e-15));

    const auto b = posterior_moments(testing::symmetric_two_point(), scalar(0));
    CHECK(b.m1(0) == 1.0);
    CHECK(b.sigma(0, 0) == 1.0);
    CHECK(b.s2 == 2.0);
    CHECK(b.m3(0) == 4.0);
    CHECK(b.v4 == 4.0);
  }

  TEST_CASE("discrete posterior with several observations") {
    // P(X=x_i, Y=y_j); column y=1 holds {0.1, 0.3} on x = {-1, 2}.
    const auto model = build_model(
        json::parse(R"({"kind":"discrete","x":[-1,2],"y":[0,1],"p":[[0.4,0.1],[0.2,0.3]]})"));
    const auto m = posterior_moments(model, scalar(1));
    // Enumeration: weights 1/4, 3/4.
    CHECK(m.m1(0) == doctest::Approx(1.25));
    CHECK(m.s2 == doctest::Approx(0.25 + 3.0));
    CHECK(m.m3(0) == doctest::Approx(-0.25 + 6.0));
    CHECK(m.v4 == doctest::Approx(0.25 * 1 + 0.75 * 16 - 3.25 * 3.25));
    CHECK(m.mass == doctest::Approx(0.4));
    CHECK_ERROR_CODE(posterior_moments(model, scalar(0.5)), ErrorCode::ZeroPosteriorMass);
  }

  TEST_CASE("scenario A matches the log-coordinate Simpson reference") {
    for (double y : {0.1, -0.7, 2.0, 15.0}) {
      CAPTURE(y);
      const auto r = ref::exp_state_noise(y);
      const auto m = posterior_moments(scenario_a(), scalar(y));
      CHECK(m.m1(0) == doctest::Approx(r.m1).epsilon(1e-8));
      CHECK(m.sigma(0, 0) == doctest::Approx(r.var).epsilon(1e-8));
      CHECK(m.s2 == doctest::Approx(r.s2).epsilon(1e-8));
      CHECK(m.m3(0) == doctest::Approx(r.m3).epsilon(1e-8));
      CHECK(m.v4 == doctest::Approx(r.v4).epsilon(1e-8));
      CHECK(m.mass == doctest::Approx(r.mass).epsilon(1e-8));
    }
  }

  TEST_CASE("scenario A frozen values at y = 0.1") {
    const auto m = posterior_moments(scenario_a(), scalar(0.1));
    CHECK(m.m1(0) == doctest::Approx(0.494181384380).epsilon(1e-9));
    CHECK(m.sigma(0, 0) == doctest::Approx(0.748035848353).epsilon(1e-9));
    CHECK(m.s2 == doctest::Approx(0.992251089021).epsilon(1e-9));
    CHECK(m.m3(0) == doctest::Approx(3.96024476975).epsilon(1e-9));
    CHECK(m.v4 == doctest::Approx(22.7559545508).epsilon(1e-9));
  }

  TEST_CASE("scenario A at y = 0 has an improper posterior") {
    CHECK_ERROR_CODE(posterior_moments(scenario_a(), scalar(0.0)), ErrorCode::QuadratureNotConverged);
  }

  TEST_CASE("scenario B matches the two-dimensional Simpson reference") {
    const auto r = ref::comm_fading(0.1, 2.0, 2.0, 0.1, 9600, 9600);
    const auto m = posterior_moments(scenario_b(), scalar(0.1));
    CHECK(m.m1(0) == doctest::Approx(r.m1[0]).epsilon(1e-7).scale(1));
    CHECK(m.m1(1) == doctest::Approx(r.m1[1]).epsilon(1e-7));
    CHECK(m.sigma(0, 0) == doctest::Approx(r.cov[0][0]).epsilon(1e-7));
    CHECK(m.sigma(0, 1) == doctest::Approx(r.cov[0][1]).epsilon(1e-7).scale(1));
    CHECK(m.sigma(1, 1) == doctest::Approx(r.cov[1][1]).epsilon(1e-7));
    CHECK(m.s2 == doctest::Approx(r.s2).epsilon(1e-7));
    CHECK(m.m3(0) == doctest::Approx(r.m3[0]).epsilon(1e-7).scale(1));
    CHECK(m.m3(1) == doctest::Approx(r.m3[1]).epsilon(1e-7));
    CHECK(m.v4 == doctest::Approx(r.v4).epsilon(1e-7));
    CHECK(m.mass == doctest::Approx(r.mass).epsilon(1e-7));
  }

  TEST_CASE("scenario B frozen values at y = 0.1") {
    const auto m = posterior_moments(scenario_b(), scalar(0.1));
    CHECK(m.m1(0) == doctest::Approx(0.0852589631).epsilon(1e-8));
    CHECK(m.m1(1) == doctest::Approx(1.71916793).epsilon(1e-8));
    CHECK(m.sigma(0, 0) == doctest::Approx(0.170363323609).epsilon(1e-9));
    CHECK(m.v4 == doctest::Approx(32.5225567765).epsilon(1e-9));
    CHECK(m.mass == doctest::Approx(0.1613687964).epsilon(1e-9));
  }

  TEST_CASE("noiseless fading channel") {
    const auto model = scenario_b(0.0);
    // y = 0 forces z = 0 and leaves h half-normal with the Rayleigh scale.
    const auto m0 = posterior_moments(model, scalar(0.0));
    CHECK(m0.m1(0) == doctest::Approx(0.0).scale(1).epsilon(1e-10));
    CHECK(m0.m1(1) == doctest::Approx(2.0 * std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-8));
    CHECK(m0.sigma(0, 0) == doctest::Approx(0.0).scale(1).epsilon(1e-10));

    // Otherwise z = y / h, with p(h | y) proportional to p(h) N(y / h; 0, var_z) / h.
    const double y = 1.3;
    auto dens = [&](double h) { return h / 4.0 * std::exp(-h * h / 8.0) * ref::normal_pdf(y / h, 0, 2.0) / h; };
    auto integ = [&](auto f) {
      return ref::simpson([&](double u) { const double h = std::exp(u); return dens(h) * h * f(h); }, -12, 4, 200000);
    };
    const double z0 = integ([](double) { return 1.0; });
    const double ez = integ([&](double h) { return y / h; }) / z0;
    const double eh = integ([](double h) { return h; }) / z0;
    const double s2 = integ([&](double h) { return y * y / (h * h) + h * h; }) / z0;
    const double e4 = integ([&](double h) { const double q = y * y / (h * h) + h * h; return q * q; }) / z0;
    const auto m = posterior_moments(model, scalar(y));
    CHECK(m.m1(0) == doctest::Approx(ez).epsilon(1e-8));
    CHECK(m.m1(1) == doctest::Approx(eh).epsilon(1e-8));
    CHECK(m.s2 == doctest::Approx(s2).epsilon(1e-8));
    CHECK(m.v4 == doctest::Approx(e4 - s2 * s2).epsilon(1e-8));
    check_invariants(m);
  }

  TEST_CASE("noiseless scenario A is a point mass at y") {
    const auto model = build_model(json::parse(R"({"kind":"exp_state_noise","noise_factor":0})"));
    const Posterior p(model, scalar(1.5));
    CHECK(p.moments().m1(0) == 1.5);
    CHECK(p.moments().sigma(0, 0) == 0.0);
    CHECK(p.moments().v4 == 0.0);
    CHECK(p.median(0) == 1.5);
    CHECK_ERROR_CODE(p.marginal_density(0, 1.5), ErrorCode::UnsupportedKind);
    CHECK_ERROR_CODE(posterior_moments(model, scalar(-1.0)), ErrorCode::ZeroPosteriorMass);
  }

  TEST_CASE("moments self-converge under node doubling at sampled observations") {
    QuadratureConfig q1, q2;
    q2.nodes_per_dim = 2 * q1.nodes_per_dim;
    for (const auto& model : {scenario_a(), scenario_b(), scenario_b(0.0)}) {
      for (const auto& s : sample_joint(model, 12, 99)) {
        CAPTURE(s.y(0));
        const auto a = posterior_moments(model, s.y, q1);
        const auto b = posterior_moments(model, s.y, q2);
        CHECK(moments_agree(a, b, 1e-8));
        check_invariants(a);
      }
    }
  }

  TEST_CASE("refinement budget exhaustion is reported") {
    QuadratureConfig q;
    q.nodes_per_dim = 16;
    q.refinement_factor = 1;
    CHECK_ERROR_CODE(posterior_moments(scenario_b(), scalar(3.0), q), ErrorCode::QuadratureNotConverged);
  }

  TEST_CASE("quadrature config validation") {
    QuadratureConfig q;
    q.nodes_per_dim = 8;
    CHECK_ERROR_CODE(q.validate(), ErrorCode::InvalidParameter);
    q = {};
    q.truncation_mass_tol = 1e-3;
    CHECK_ERROR_CODE(q.validate(), ErrorCode::InvalidParameter);
    CHECK_ERROR_CODE(posterior_moments(scenario_a(), vec({1, 2})), ErrorCode::InvalidParameter);
  }

  TEST_CASE("conditional medians") {
    CHECK(conditional_median(testing::standard_gaussian(), scalar(2), 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(conditional_median(testing::two_point(), scalar(0), 0) == 0.0);
    CHECK(conditional_median(testing::symmetric_two_point(), scalar(0), 0) == 0.0);

    // Scenario A at y = 0.1: bisection on a reference CDF in log coordinates.
    const double y = 0.1;
    auto dens = [&](double x) { return std::exp(-x / 2) / 2 * ref::normal_pdf(y, x, 9 * x * x); };
    auto mass_below = [&](double t) {
      return ref::simpson([&](double u) { const double x = std::exp(u); return dens(x) * x; }, -45, std::log(t),
                          40000);
    };
    const double total = mass_below(std::exp(7.0));
    double lo = 1e-3, hi = 20;
    for (int i = 0; i < 60; ++i) {
      const double mid = std::sqrt(lo * hi);
      (mass_below(mid) / total < 0.5 ? lo : hi) = mid;
    }
    const Posterior p(scenario_a(), scalar(y));
    CHECK(p.median(0) == doctest::Approx(hi).epsilon(1e-7));
    CHECK(p.cdf(0, hi) == doctest::Approx(0.5).epsilon(1e-7));

    // Joint fading posterior: each component's median splits its marginal.
    const Posterior pb(scenario_b(), scalar(0.1));
    for (int c = 0; c < 2; ++c) CHECK(pb.cdf(c, pb.median(c)) == doctest::Approx(0.5).epsilon(1e-7));
  }

  TEST_CASE("marginal densities integrate to one over the support") {
    for (const auto& [model, y] : {std::pair{scenario_a(), 0.1}, std::pair{scenario_b(), 0.1},
                                   std::pair{scenario_b(0.0), 1.3}, std::pair{testing::standard_gaussian(), 2.0}}) {
      const Posterior p(model, scalar(y));
      for (int c = 0; c < model.state_dim(); ++c) {
        const auto s = p.support(c);
        double total;
        if (p.log_coordinate(c))
          total = ref::simpson([&](double u) { const double x = std::exp(u); return x * p.marginal_density(c, x); },
                               std::log(s.lo), std::log(s.hi), 4000);
        else
          total = ref::simpson([&](double x) { return p.marginal_density(c, x); }, s.lo, s.hi, 4000);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-7));
      }
    }
  }

  TEST_CASE("variance of the squared error") {
    CHECK(conditional_var_of_sq_error(testing::symmetric_two_point(), scalar(0), scalar(1), kAllComponents) == 0.0);
    CHECK(conditional_var_of_sq_error(testing::standard_gaussian(), scalar(2), scalar(1), 0) ==
          doctest::Approx(0.5).epsilon(1e-8));
    CHECK(conditional_var_of_sq_error(testing::two_point(), scalar(0), scalar(1.25), kAllComponents) ==
          doctest::Approx(0.5).epsilon(1e-14));

    const auto p = Posterior(scenario_a(), scalar(0.4));
    const auto& m = p.moments();
    for (double x : {0.0, 0.3, 1.7}) {
      const double expect = m.v4 + 4 * x * x * m.sigma(0, 0) - 4 * m.risk_bias()(0) * x;
      CHECK(p.grid().var_of_sq_error(scalar(x)) == doctest::Approx(expect).epsilon(1e-8));
    }
    CHECK_ERROR_CODE(p.grid().var_of_sq_error(scalar(0), 3), ErrorCode::InvalidParameter);
  }
}
