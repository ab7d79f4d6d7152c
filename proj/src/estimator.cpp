#include "riskmmse/estimator.hpp"

#include <cmath>

#include "riskmmse/error.hpp"

namespace riskmmse {

namespace {

constexpr double kRiskClamp = 1e-9;

void require_finite(const Vector& xhat, const PosteriorMoments& m) {
  if (xhat.size() != m.dim() || !xhat.allFinite())
    throw Error(ErrorCode::InvalidParameter, "estimate must be finite with length M");
}

}  // namespace

Vector risk_aware_estimate(const PosteriorMoments& m, double mu) {
  if (std::isnan(mu) || mu < 0) throw Error(ErrorCode::NegativeMu, "multiplier must be >= 0");
  if (!std::isfinite(mu)) throw Error(ErrorCode::InvalidParameter, "multiplier must be finite");
  if (mu == 0.0) return m.m1;
  const auto M = m.m1.size();
  const Matrix A = Matrix::Identity(M, M) + 2.0 * mu * m.sigma;
  const Vector rhs = m.m1 + mu * m.risk_bias();
  return A.ldlt().solve(rhs);
}

double conditional_mse(const PosteriorMoments& m, const Vector& xhat) {
  require_finite(xhat, m);
  return std::max(0.0, m.s2 - 2.0 * m.m1.dot(xhat) + xhat.squaredNorm());
}

double conditional_risk(const PosteriorMoments& m, const Vector& xhat) {
  require_finite(xhat, m);
  const double r = m.v4 + 4.0 * xhat.dot(m.sigma * xhat) - 4.0 * m.risk_bias().dot(xhat);
  if (r >= 0) return r;
  if (r >= -kRiskClamp) return 0.0;
  throw Error(ErrorCode::NegativeRisk, "conditional risk " + std::to_string(r) + " is negative");
}

SteinDiagnostic stein_diagnostic(const PosteriorMoments& m) {
  SteinDiagnostic d;
  d.b = m.risk_bias();
  d.stein_gap = d.b - 2.0 * m.sigma * m.m1;
  d.gap_norm = d.stein_gap.norm();
  return d;
}

RiskAwareSolution solve_risk_aware(const PosteriorMoments& m, double mu) {
  RiskAwareSolution s;
  s.mu = mu;
  s.xhat = risk_aware_estimate(m, mu);
  s.cond_mse = conditional_mse(m, s.xhat);
  s.cond_risk = conditional_risk(m, s.xhat);
  return s;
}

Vector mmae_estimate(const Posterior& posterior) {
  Vector out(posterior.grid().dim());
  for (int c = 0; c < out.size(); ++c) out(c) = posterior.median(c);
  return out;
}

}  // namespace riskmmse
