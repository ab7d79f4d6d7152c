#include "riskmmse/dual.hpp"

#include <algorithm>
#include <cmath>

#include "riskmmse/error.hpp"

namespace riskmmse {

namespace {

void require_epsilon(double epsilon) {
  if (!(epsilon > 0) || !std::isfinite(epsilon)) throw Error(ErrorCode::InvalidParameter, "epsilon must be > 0");
}

KktReport make_report(const OuterAverages& a, double epsilon) {
  KktReport r;
  r.mu_star = a.mu;
  r.epsilon = epsilon;
  r.expected_risk = a.risk;
  r.slack = epsilon - a.risk;
  r.dual_value = dual_value(a, epsilon);
  r.primal_value = 0.5 * a.mse;
  r.comp_slackness = a.mu * (a.risk - epsilon);
  r.gap = r.primal_value - r.dual_value;
  r.risk_se = a.risk_se;
  r.mse_se = a.mse_se;
  return r;
}

}  // namespace

nlohmann::json to_json(const KktReport& r) {
  return {{"mu_star", r.mu_star},
          {"epsilon", r.epsilon},
          {"expected_risk", r.expected_risk},
          {"slack", r.slack},
          {"dual_value", r.dual_value},
          {"primal_value", r.primal_value},
          {"comp_slackness", r.comp_slackness},
          {"gap", r.gap}};
}

ValueWithError expected_risk(const ObservationSet& obs, double mu) {
  const auto a = obs.evaluate(mu);
  return {a.risk, a.risk_se};
}

ValueWithError expected_risk(const ModelSpec& model, double mu, const OuterIntegrator& integ,
                             const QuadratureConfig& quad) {
  return expected_risk(ObservationSet(model, integ, quad), mu);
}

double dual_value(const OuterAverages& a, double epsilon) {
  require_epsilon(epsilon);
  return 0.5 * a.s2 + 0.25 * (a.mu * a.v4 - 2.0 * a.quad_form - a.mu * epsilon);
}

double dual_value(const ObservationSet& obs, double mu, double epsilon) {
  return dual_value(obs.evaluate(mu), epsilon);
}

double dual_value(const ModelSpec& model, double mu, double epsilon, const OuterIntegrator& integ,
                  const QuadratureConfig& quad) {
  return dual_value(ObservationSet(model, integ, quad), mu, epsilon);
}

KktReport kkt_report(const ObservationSet& obs, double mu, double epsilon) {
  require_epsilon(epsilon);
  return make_report(obs.evaluate(mu), epsilon);
}

KktReport solve_mu(const ObservationSet& obs, double epsilon, const SolveOptions& opt) {
  require_epsilon(epsilon);
  if (!(opt.tol > 0)) throw Error(ErrorCode::InvalidParameter, "tol must be > 0");
  if (!(opt.mu_cap > 0)) throw Error(ErrorCode::InvalidParameter, "mu_cap must be > 0");

  OuterAverages at_zero = obs.evaluate(0.0);
  if (at_zero.risk <= epsilon) return make_report(at_zero, epsilon);

  // Scaling by max(1, mu) bounds the complementary-slackness residual by the
  // same tolerance as the constraint itself.
  const double target = opt.tol * std::max(1.0, epsilon);
  auto converged = [&](const OuterAverages& a) {
    return std::abs(a.risk - epsilon) * std::max(1.0, a.mu) <= target;
  };

  double lo = 0.0;
  OuterAverages hi = obs.evaluate(std::min(1.0, opt.mu_cap));
  while (hi.risk > epsilon) {
    if (hi.mu >= opt.mu_cap)
      throw Error(ErrorCode::MultiplierCapExceeded,
                  "expected risk at mu_cap = " + std::to_string(opt.mu_cap) + " still exceeds epsilon");
    lo = hi.mu;
    hi = obs.evaluate(std::min(2.0 * hi.mu, opt.mu_cap));
  }
  while (!converged(hi)) {
    const double mid = 0.5 * (lo + hi.mu);
    if (mid <= lo || mid >= hi.mu) break;  // bracket exhausted at double precision
    OuterAverages a = obs.evaluate(mid);
    if (a.risk <= epsilon)
      hi = std::move(a);
    else
      lo = mid;
  }
  return make_report(hi, epsilon);
}

KktReport solve_mu(const ModelSpec& model, double epsilon, const SolveOptions& opt, const OuterIntegrator& integ,
                   const QuadratureConfig& quad) {
  return solve_mu(ObservationSet(model, integ, quad), epsilon, opt);
}

bool kkt_satisfied(const KktReport& r, const KktTolerances& tol) {
  const double risk_band = 3.0 * r.risk_se;
  const double gap_band = 3.0 * std::hypot(0.5 * r.mse_se, 0.25 * r.mu_star * r.risk_se);
  return r.slack >= -(tol.feas + risk_band) && std::abs(r.comp_slackness) <= tol.comp + r.mu_star * risk_band &&
         std::abs(r.gap) <= tol.gap + gap_band;
}

}  // namespace riskmmse
