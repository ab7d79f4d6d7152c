#pragma once

#include <memory>
#include <span>
#include <vector>

#include "riskmmse/models.hpp"
#include "riskmmse/quadrature.hpp"

namespace riskmmse {

struct QuadratureConfig {
  int nodes_per_dim = 256;
  double truncation_mass_tol = 1e-10;
  int refinement_factor = 3;

  /// Throws InvalidParameter unless nodes_per_dim >= 16 and
  /// truncation_mass_tol lies in (0, 1e-6].
  void validate() const;
};

/// Conditional moments of X given Y = y.
struct PosteriorMoments {
  Vector m1;       // E{X | y}
  Matrix sigma;    // Cov{X | y}
  double s2 = 0;   // E{|X|^2 | y}
  Vector m3;       // E{|X|^2 X | y}
  double v4 = 0;   // Var{|X|^2 | y}
  double mass = 0; // normalizer of the unnormalized posterior (p(y) for densities)
  Vector y;

  int dim() const { return static_cast<int>(m1.size()); }

  /// E{|X|^2 X | y} - E{|X|^2 | y} E{X | y}.
  Vector risk_bias() const { return m3 - s2 * m1; }
};

/// Selects one state component, or the whole vector, for error statistics.
inline constexpr int kAllComponents = -1;

/// Normalized weighted node set for P(X | y). Each node carries a conditional
/// mean of X and per-component conditional variances; the variances are zero
/// except for components integrated in closed form (the Gaussian signal of the
/// fading model). Discrete posteriors are exact point sets.
class PosteriorGrid {
 public:
  PosteriorGrid() = default;
  PosteriorGrid(Vector y, std::vector<double> weights, Matrix means, Matrix variances, double log_mass);

  const Vector& y() const { return y_; }
  int dim() const { return static_cast<int>(means_.rows()); }
  std::size_t size() const { return weights_.size(); }
  std::span<const double> weights() const { return weights_; }
  const Matrix& means() const { return means_; }
  const Matrix& variances() const { return variances_; }
  double log_mass() const { return log_mass_; }

  const PosteriorMoments& moments() const { return moments_; }

  /// E{e | y} and Var{e | y} for e = |X - xhat|^2 (component == kAllComponents)
  /// or e = (X_c - xhat_c)^2, by direct integration over the nodes.
  double mse_of(const Vector& xhat, int component = kAllComponents) const;
  double var_of_sq_error(const Vector& xhat, int component = kAllComponents) const;

 private:
  void compute_moments();

  Vector y_;
  std::vector<double> weights_;
  Matrix means_;
  Matrix variances_;
  double log_mass_ = 0;
  PosteriorMoments moments_;
};

namespace detail {
class PosteriorKernel;
}

/// A converged posterior: the node set plus what is needed to evaluate
/// marginal CDFs and densities of single components.
class Posterior {
 public:
  Posterior(const ModelSpec& model, const Vector& y, const QuadratureConfig& quad = {});
  ~Posterior();
  Posterior(Posterior&&) noexcept;
  Posterior& operator=(Posterior&&) noexcept;

  const PosteriorGrid& grid() const { return grid_; }
  const PosteriorMoments& moments() const { return grid_.moments(); }

  /// Smallest t with P(X_c <= t | y) >= 1/2.
  double median(int component) const;
  double cdf(int component, double t) const;

  /// Marginal posterior density of X_c at t. Throws UnsupportedKind for
  /// discrete and point-mass posteriors.
  double marginal_density(int component, double t) const;

  /// Range of X_c holding essentially all posterior mass.
  quad::Interval support(int component) const;

  /// True when X_c is integrated in log coordinates (positive support).
  bool log_coordinate(int component) const;

 private:
  std::shared_ptr<const detail::PosteriorKernel> kernel_;
  std::vector<quad::Interval> box_;
  int nodes_per_dim_ = 0;
  PosteriorGrid grid_;
  bool discrete_ = false;
};

/// Converged node set only (no kernel retained); what sweeps cache per y.
PosteriorGrid build_posterior_grid(const ModelSpec& model, const Vector& y, const QuadratureConfig& quad = {});

PosteriorMoments posterior_moments(const ModelSpec& model, const Vector& y, const QuadratureConfig& quad = {});
double conditional_median(const ModelSpec& model, const Vector& y, int component, const QuadratureConfig& quad = {});
double conditional_var_of_sq_error(const ModelSpec& model, const Vector& y, const Vector& xhat, int component,
                                   const QuadratureConfig& quad = {});

/// True when every moment of `coarse` matches `fine` to `rel_tol`, measured
/// against the posterior's own scale sqrt(s2) raised to each moment's order.
bool moments_agree(const PosteriorMoments& coarse, const PosteriorMoments& fine, double rel_tol);

}  // namespace riskmmse
