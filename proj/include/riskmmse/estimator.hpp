#pragma once

#include "riskmmse/posterior.hpp"

namespace riskmmse {

struct RiskAwareSolution {
  Vector xhat;
  double mu = 0;
  double cond_mse = 0;
  double cond_risk = 0;
};

struct SteinDiagnostic {
  Vector b;          // m3 - s2 m1
  Vector stein_gap;  // b - 2 sigma m1
  double gap_norm = 0;
};

/// Solves (I + 2 mu sigma) x = m1 + mu b with a symmetric factorization.
/// Returns m1 unchanged at mu == 0. Throws NegativeMu for mu < 0.
Vector risk_aware_estimate(const PosteriorMoments& m, double mu);

/// E{|X - xhat|^2 | y} from the moments.
double conditional_mse(const PosteriorMoments& m, const Vector& xhat);

/// Var{|X - xhat|^2 | y} = v4 + 4 xhat' sigma xhat - 4 b' xhat. Tiny negative
/// roundoff is clamped to 0; anything below -1e-9 throws NegativeRisk.
double conditional_risk(const PosteriorMoments& m, const Vector& xhat);

SteinDiagnostic stein_diagnostic(const PosteriorMoments& m);

RiskAwareSolution solve_risk_aware(const PosteriorMoments& m, double mu);

inline Vector mmse_estimate(const PosteriorMoments& m) { return m.m1; }

/// Componentwise conditional median.
Vector mmae_estimate(const Posterior& posterior);

}  // namespace riskmmse
