#pragma once

#include <string>
#include <vector>

#include "riskmmse/posterior.hpp"

namespace riskmmse {

struct OracleConfig {
  double grid_half_width = 4.0;
  int grid_points_per_dim = 101;
  int refine_rounds = 40;
  double mu_cap = 1e8;

  void validate() const;
};

/// Minimizes x'(I + 2 mu sigma)x / 2 - (m1 + mu (m3 - s2 m1))'x by nested grid
/// search, without any linear solve. Each round recenters on the best point and
/// halves the window when that point is interior. Throws GridTooCoarse if the
/// best point still sits on the window edge after the last round.
Vector lagrangian_bruteforce(const PosteriorMoments& m, double mu, const OracleConfig& cfg = {});

struct DualOracleResult {
  double mu = 0;
  double primal = 0;         // half the expected MSE of the recovered estimates
  double dual = 0;           // D(mu)
  double expected_risk = 0;  // of the recovered estimates
};

/// Maximizes the dual of a small discrete model by golden-section search,
/// using only enumeration and lagrangian_bruteforce.
DualOracleResult discrete_dual_oracle(const ModelSpec& model, double epsilon, const OracleConfig& cfg = {});

/// Small discrete models with a risk tolerance between the infimum achievable
/// risk and the MMSE risk.
struct OracleFixture {
  std::string name;
  ModelSpec model;
  double epsilon;
};

std::vector<OracleFixture> oracle_fixtures();

struct OracleCheck {
  std::string fixture;
  std::string check;
  double value = 0;
  double tol = 0;
  bool pass = false;
};

/// Closed form against brute force at several multipliers, zero duality gap,
/// oracle feasibility, multiplier agreement with solve_mu, and the KKT
/// certificate of solve_mu.
std::vector<OracleCheck> run_oracle_checks(const OracleFixture& fixture, const OracleConfig& cfg = {});

}  // namespace riskmmse
