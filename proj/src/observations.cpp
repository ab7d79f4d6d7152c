#include "riskmmse/observations.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include <omp.h>

#include "riskmmse/error.hpp"
#include "riskmmse/estimator.hpp"

namespace riskmmse {

namespace {

// Runs fn(i) for i in [0, n); rethrows the failure with the lowest index so
// error reporting is as deterministic as the results.
template <class Fn>
void for_each_index(std::size_t n, ExecPolicy policy, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<PosteriorGrid> build_grids(const ModelSpec& model, const std::vector<Vector>& ys,
                                       const QuadratureConfig& quad, ExecPolicy policy) {
  std::vector<PosteriorGrid> grids(ys.size());
  for_each_index(ys.size(), policy, [&](std::size_t i) { grids[i] = build_posterior_grid(model, ys[i], quad); });
  return grids;
}

// Weighted mean and the standard error of a plain sample average.
struct Moment {
  double mean = 0, se = 0;
};

Moment weighted_mean(std::span<const double> values, std::span<const double> weights, bool sampled) {
  std::vector<double> tmp(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) tmp[i] = weights[i] * values[i];
  Moment m;
  m.mean = pairwise_sum(tmp);
  if (sampled && values.size() > 1) {
    for (std::size_t i = 0; i < values.size(); ++i) tmp[i] = (values[i] - m.mean) * (values[i] - m.mean);
    const double n = static_cast<double>(values.size());
    m.se = std::sqrt(pairwise_sum(tmp) / (n - 1.0) / n);
  }
  return m;
}

}  // namespace

std::string_view outer_mode_name(OuterMode mode) noexcept {
  switch (mode) {
    case OuterMode::monte_carlo: return "monte_carlo";
    case OuterMode::y_quadrature: return "y_quadrature";
    case OuterMode::discrete_exact: return "discrete_exact";
  }
  return "?";
}

OuterMode parse_outer_mode(std::string_view name) {
  for (auto m : {OuterMode::monte_carlo, OuterMode::y_quadrature, OuterMode::discrete_exact})
    if (outer_mode_name(m) == name) return m;
  throw Error(ErrorCode::InvalidParameter, "unknown outer mode '" + std::string(name) + "'");
}

void OuterIntegrator::validate() const {
  if (mode == OuterMode::monte_carlo && n_outer < 100)
    throw Error(ErrorCode::InvalidParameter, "monte_carlo needs n_outer >= 100");
  if (mode == OuterMode::y_quadrature && n_outer < 16)
    throw Error(ErrorCode::InvalidParameter, "y_quadrature needs n_outer >= 16");
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

void set_max_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

ObservationSet::ObservationSet(const ModelSpec& model, const OuterIntegrator& integ, const QuadratureConfig& quad,
                               ExecPolicy policy)
    : mode_(integ.mode), state_dim_(model.state_dim()) {
  integ.validate();
  quad.validate();
  switch (integ.mode) {
    case OuterMode::monte_carlo: {
      const auto samples = sample_joint(model, integ.n_outer, integ.seed);
      std::vector<Vector> ys;
      ys.reserve(samples.size());
      for (const auto& s : samples) ys.push_back(s.y);
      grids_ = build_grids(model, ys, quad, policy);
      weights_.assign(ys.size(), 1.0 / static_cast<double>(ys.size()));
      break;
    }
    case OuterMode::discrete_exact: {
      if (!model.is_discrete()) throw Error(ErrorCode::UnsupportedKind, "discrete_exact needs a discrete model");
      const auto& d = model.as<DiscreteJoint>();
      // Distinct observation values; repeated columns share one posterior.
      std::vector<Vector> ys;
      std::vector<double> mass;
      for (std::size_t j = 0; j < d.ys.size(); ++j) {
        const double pj = d.p.col(static_cast<Eigen::Index>(j)).sum();
        auto it = std::find(ys.begin(), ys.end(), d.ys[j]);
        if (it == ys.end()) {
          ys.push_back(d.ys[j]);
          mass.push_back(pj);
        } else {
          mass[static_cast<std::size_t>(it - ys.begin())] += pj;
        }
      }
      std::vector<Vector> kept;
      for (std::size_t j = 0; j < ys.size(); ++j)
        if (mass[j] > 0) {
          kept.push_back(ys[j]);
          weights_.push_back(mass[j]);
        }
      grids_ = build_grids(model, kept, quad, policy);
      break;
    }
    case OuterMode::y_quadrature: {
      if (model.is_discrete() || model.obs_dim() != 1)
        throw Error(ErrorCode::UnsupportedKind, "y_quadrature needs a continuous model with scalar observations");
      // log p(y) is the log normalizer of the posterior at y.
      const quad::LogDensity log_marginal = [&](std::span<const double> y) {
        try {
          return build_posterior_grid(model, Vector::Constant(1, y[0]), quad).log_mass();
        } catch (const Error&) {
          return -std::numeric_limits<double>::infinity();
        }
      };
      const auto scale = observation_scale(model);
      const double log_drop = -std::log(quad.truncation_mass_tol) + std::log(1e4);
      const auto box = quad::find_box(log_marginal, {{scale.center - 3 * scale.spread, scale.center + 3 * scale.spread}},
                                      log_drop)
                           .box;
      std::vector<double> yn, wn;
      const double breaks[] = {0.0};
      quad::composite_with_breaks(box[0], breaks, static_cast<int>(integ.n_outer), yn, wn);
      std::vector<Vector> ys;
      for (double y : yn) ys.push_back(Vector::Constant(1, y));
      grids_ = build_grids(model, ys, quad, policy);
      double peak = -std::numeric_limits<double>::infinity();
      for (const auto& g : grids_) peak = std::max(peak, g.log_mass());
      weights_.resize(grids_.size());
      for (std::size_t i = 0; i < grids_.size(); ++i) weights_[i] = wn[i] * std::exp(grids_[i].log_mass() - peak);
      const double total = pairwise_sum(weights_);
      for (auto& w : weights_) w /= total;
      break;
    }
  }
}

OuterAverages ObservationSet::evaluate(double mu, bool per_component, ExecPolicy policy) const {
  if (std::isnan(mu) || mu < 0) throw Error(ErrorCode::NegativeMu, "multiplier must be >= 0");
  const std::size_t n = size();
  const int M = state_dim_;
  std::vector<double> mse(n), risk(n), s2(n), v4(n), qf(n);
  std::vector<std::vector<double>> mse_c, risk_c;
  if (per_component) {
    mse_c.assign(static_cast<std::size_t>(M), std::vector<double>(n));
    risk_c.assign(static_cast<std::size_t>(M), std::vector<double>(n));
  }
  for_each_index(n, policy, [&](std::size_t i) {
    const auto& g = grids_[i];
    const auto& m = g.moments();
    const Vector x = risk_aware_estimate(m, mu);
    mse[i] = conditional_mse(m, x);
    risk[i] = conditional_risk(m, x);
    s2[i] = m.s2;
    v4[i] = m.v4;
    qf[i] = x.squaredNorm() + 2.0 * mu * x.dot(m.sigma * x);
    for (int c = 0; per_component && c < M; ++c) {
      const double d = m.m1(c) - x(c);
      mse_c[static_cast<std::size_t>(c)][i] = m.sigma(c, c) + d * d;
      risk_c[static_cast<std::size_t>(c)][i] = g.var_of_sq_error(x, c);
    }
  });

  const bool sampled = !exact();
  OuterAverages out;
  out.mu = mu;
  const auto r_mse = weighted_mean(mse, weights_, sampled);
  const auto r_risk = weighted_mean(risk, weights_, sampled);
  out.mse = r_mse.mean;
  out.mse_se = r_mse.se;
  out.risk = r_risk.mean;
  out.risk_se = r_risk.se;
  out.s2 = weighted_mean(s2, weights_, false).mean;
  out.v4 = weighted_mean(v4, weights_, false).mean;
  out.quad_form = weighted_mean(qf, weights_, false).mean;
  for (std::size_t c = 0; c < mse_c.size(); ++c) {
    const auto a = weighted_mean(mse_c[c], weights_, sampled);
    const auto b = weighted_mean(risk_c[c], weights_, sampled);
    out.mse_c.push_back(a.mean);
    out.mse_c_se.push_back(a.se);
    out.risk_c.push_back(b.mean);
    out.risk_c_se.push_back(b.se);
  }
  return out;
}

}  // namespace riskmmse
