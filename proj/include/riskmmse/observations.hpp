#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "riskmmse/posterior.hpp"

namespace riskmmse {

/// How the outer expectation over Y is realized.
enum class OuterMode { monte_carlo, y_quadrature, discrete_exact };

std::string_view outer_mode_name(OuterMode mode) noexcept;
OuterMode parse_outer_mode(std::string_view name);

struct OuterIntegrator {
  OuterMode mode = OuterMode::monte_carlo;
  std::size_t n_outer = 2000;  // samples (monte_carlo) or nodes (y_quadrature)
  std::uint64_t seed = 0;

  void validate() const;
};

/// serial is the reference path; parallel spreads the per-y work over OpenMP
/// threads. Both produce bitwise identical results.
enum class ExecPolicy { serial, parallel };

/// Outer averages at one multiplier value.
struct OuterAverages {
  double mu = 0;
  double mse = 0, mse_se = 0;
  double risk = 0, risk_se = 0;
  double s2 = 0;         // E s2
  double v4 = 0;         // E v4
  double quad_form = 0;  // E xhat'(I + 2 mu sigma) xhat
  // Per component of the joint estimate; empty unless requested.
  std::vector<double> mse_c, mse_c_se, risk_c, risk_c_se;
};

/// Observation nodes with their outer weights and cached posteriors. The
/// posteriors do not depend on mu, so one set serves a whole sweep or a dual
/// search (and gives common random numbers in monte_carlo mode).
class ObservationSet {
 public:
  ObservationSet(const ModelSpec& model, const OuterIntegrator& integ, const QuadratureConfig& quad = {},
                 ExecPolicy policy = ExecPolicy::parallel);

  std::size_t size() const { return grids_.size(); }
  const PosteriorGrid& grid(std::size_t i) const { return grids_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  int state_dim() const { return state_dim_; }

  /// True when the outer integral has no sampling error.
  bool exact() const { return mode_ != OuterMode::monte_carlo; }

  OuterAverages evaluate(double mu, bool per_component = false, ExecPolicy policy = ExecPolicy::parallel) const;

 private:
  OuterMode mode_;
  int state_dim_ = 0;
  std::vector<PosteriorGrid> grids_;
  std::vector<double> weights_;
};

/// Sum in a fixed binary tree so the result does not depend on thread count.
double pairwise_sum(std::span<const double> v);

/// Caps the OpenMP worker count (0 leaves the runtime default).
void set_max_threads(int n);

}  // namespace riskmmse
