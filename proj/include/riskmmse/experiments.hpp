#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskmmse/observations.hpp"

namespace riskmmse {

struct ComponentStats {
  int component = 0;
  double mse = 0, mse_se = 0;
  double risk = 0, risk_se = 0;
};

struct SweepRow {
  double mu = 0;
  double mse = 0, mse_se = 0;
  double risk = 0, risk_se = 0;
  std::vector<ComponentStats> per_component;  // filled for M > 1
};

/// n log-spaced points in [lo, hi], optionally preceded by mu = 0.
std::vector<double> log_grid(double lo, double hi, int n, bool with_zero = true);

std::vector<SweepRow> sweep_mu(const ObservationSet& obs, std::span<const double> mu_grid,
                               ExecPolicy policy = ExecPolicy::parallel);
std::vector<SweepRow> sweep_mu(const ModelSpec& model, std::span<const double> mu_grid, const OuterIntegrator& integ,
                               const QuadratureConfig& quad = {});

/// Header mu,mse,mse_se,risk,risk_se then mse_cK,risk_cK per component;
/// 12 significant digits, LF line endings.
std::string format_csv(std::span<const SweepRow> rows);
void write_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

struct ProfilePoint {
  double x = 0;
  double density = 0;
};

/// Conditional MSE and risk of one estimator marker.
struct MarkerStats {
  double value = 0;
  double cond_mse = 0;
  double cond_risk = 0;
};

/// Marginal posterior of one state component with the MMSE, MMAE and
/// risk-aware markers. For M > 1 the markers are components of the joint
/// estimates and the stats are per-component.
struct Profile {
  Vector y;
  double mu = 0;
  int component = 0;
  std::vector<ProfilePoint> grid;
  MarkerStats mmse, mmae, risk_aware;
};

/// One profile per state component.
std::vector<Profile> posterior_profile(const ModelSpec& model, const Vector& y, double mu, int grid_points = 10001,
                                       const QuadratureConfig& quad = {});

/// Single object for M = 1, an array of per-component objects otherwise. Each
/// object also carries the posterior moments.
nlohmann::json profile_json(std::span<const Profile> profiles, const PosteriorMoments& moments);

/// {m1, sigma, s2, m3, v4, mass, y} with sigma as a list of rows.
nlohmann::json moments_json(const PosteriorMoments& m);

/// Trapezoid integral of the emitted density.
double trapezoid_mass(std::span<const ProfilePoint> grid);

}  // namespace riskmmse
