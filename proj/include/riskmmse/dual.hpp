#pragma once

#include <json.hpp>

#include "riskmmse/observations.hpp"

namespace riskmmse {

struct KktReport {
  double mu_star = 0;
  double epsilon = 0;
  double expected_risk = 0;
  double slack = 0;           // epsilon - expected_risk
  double dual_value = 0;      // D(mu_star)
  double primal_value = 0;    // half the expected MSE at mu_star
  double comp_slackness = 0;  // mu_star * (expected_risk - epsilon)
  double gap = 0;             // primal_value - dual_value
  // Sampling error of expected_risk and of the MSE (0 for exact outer modes).
  double risk_se = 0;
  double mse_se = 0;
};

/// Serializes exactly the certificate fields (no standard errors).
nlohmann::json to_json(const KktReport& r);

struct ValueWithError {
  double value = 0;
  double std_err = 0;
};

struct SolveOptions {
  double tol = 1e-6;
  double mu_cap = 1e8;
};

ValueWithError expected_risk(const ObservationSet& obs, double mu);
ValueWithError expected_risk(const ModelSpec& model, double mu, const OuterIntegrator& integ,
                             const QuadratureConfig& quad = {});

/// D(mu) = E s2 / 2 + (mu E v4 - 2 E{xhat'(I + 2 mu sigma) xhat} - mu epsilon) / 4.
double dual_value(const OuterAverages& at_mu, double epsilon);
double dual_value(const ObservationSet& obs, double mu, double epsilon);
double dual_value(const ModelSpec& model, double mu, double epsilon, const OuterIntegrator& integ,
                  const QuadratureConfig& quad = {});

/// Multiplier whose estimator meets the risk tolerance. Returns mu = 0 when the
/// MMSE estimator is already feasible; otherwise brackets by doubling from 1
/// and bisects, returning the feasible end of the final bracket. Throws
/// MultiplierCapExceeded when even mu_cap leaves the risk above epsilon.
KktReport solve_mu(const ObservationSet& obs, double epsilon, const SolveOptions& opt = {});
KktReport solve_mu(const ModelSpec& model, double epsilon, const SolveOptions& opt, const OuterIntegrator& integ,
                   const QuadratureConfig& quad = {});

/// Report for a given multiplier (no search).
KktReport kkt_report(const ObservationSet& obs, double mu, double epsilon);

struct KktTolerances {
  double feas = 1e-6;
  double comp = 1e-6;
  double gap = 1e-6;
};

/// Feasibility, complementary slackness and zero gap. Sampled outer modes widen
/// each tolerance by three standard errors.
bool kkt_satisfied(const KktReport& r, const KktTolerances& tol = {});

}  // namespace riskmmse
