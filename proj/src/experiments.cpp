#include "riskmmse/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "riskmmse/error.hpp"
#include "riskmmse/estimator.hpp"

namespace riskmmse {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

nlohmann::json moments_json(const PosteriorMoments& m) {
  nlohmann::json sigma = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.sigma.rows(); ++i) sigma.push_back(vec_json(m.sigma.row(i).transpose()));
  return {{"m1", vec_json(m.m1)}, {"sigma", sigma}, {"s2", m.s2}, {"m3", vec_json(m.m3)},
          {"v4", m.v4},           {"mass", m.mass},  {"y", vec_json(m.y)}};
}

std::vector<double> log_grid(double lo, double hi, int n, bool with_zero) {
  if (!(lo > 0) || !(hi >= lo) || n < 1) throw Error(ErrorCode::InvalidParameter, "log grid needs 0 < lo <= hi, n >= 1");
  std::vector<double> g;
  if (with_zero) g.push_back(0.0);
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) g.push_back(n == 1 ? lo : std::pow(10.0, a + (b - a) * i / (n - 1)));
  return g;
}

std::vector<SweepRow> sweep_mu(const ObservationSet& obs, std::span<const double> mu_grid, ExecPolicy policy) {
  if (mu_grid.empty()) throw Error(ErrorCode::InvalidParameter, "mu grid is empty");
  for (std::size_t i = 0; i < mu_grid.size(); ++i) {
    if (std::isnan(mu_grid[i]) || mu_grid[i] < 0) throw Error(ErrorCode::NegativeMu, "mu grid has a negative value");
    if (i > 0 && mu_grid[i] < mu_grid[i - 1]) throw Error(ErrorCode::InvalidParameter, "mu grid must be ascending");
  }
  const bool per_component = obs.state_dim() > 1;
  std::vector<SweepRow> rows;
  for (double mu : mu_grid) {
    const auto a = obs.evaluate(mu, per_component, policy);
    SweepRow r{mu, a.mse, a.mse_se, a.risk, a.risk_se, {}};
    for (std::size_t c = 0; c < a.mse_c.size(); ++c)
      r.per_component.push_back({static_cast<int>(c), a.mse_c[c], a.mse_c_se[c], a.risk_c[c], a.risk_c_se[c]});
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SweepRow> sweep_mu(const ModelSpec& model, std::span<const double> mu_grid, const OuterIntegrator& integ,
                               const QuadratureConfig& quad) {
  return sweep_mu(ObservationSet(model, integ, quad), mu_grid);
}

std::string format_csv(std::span<const SweepRow> rows) {
  const std::size_t comps = rows.empty() ? 0 : rows.front().per_component.size();
  std::string out = "mu,mse,mse_se,risk,risk_se";
  for (std::size_t c = 0; c < comps; ++c) out += ",mse_c" + std::to_string(c) + ",risk_c" + std::to_string(c);
  out += '\n';
  for (const auto& r : rows) {
    out += fmt(r.mu) + ',' + fmt(r.mse) + ',' + fmt(r.mse_se) + ',' + fmt(r.risk) + ',' + fmt(r.risk_se);
    for (const auto& c : r.per_component) out += ',' + fmt(c.mse) + ',' + fmt(c.risk);
    out += '\n';
  }
  return out;
}

void write_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  const auto text = format_csv(rows);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(ErrorCode::IoError, "write to " + path.string() + " failed");
}

double trapezoid_mass(std::span<const ProfilePoint> grid) {
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    acc += 0.5 * (grid[i].x - grid[i - 1].x) * (grid[i].density + grid[i - 1].density);
  return acc;
}

std::vector<Profile> posterior_profile(const ModelSpec& model, const Vector& y, double mu, int grid_points,
                                       const QuadratureConfig& quad) {
  if (grid_points < 2) throw Error(ErrorCode::InvalidParameter, "profile needs at least 2 grid points");
  const Posterior post(model, y, quad);
  const auto& m = post.moments();
  const auto& g = post.grid();
  const Vector x_mmse = mmse_estimate(m);
  const Vector x_mmae = mmae_estimate(post);
  const Vector x_ra = risk_aware_estimate(m, mu);
  const bool continuous = !model.is_discrete() && !(model.kind() == ModelKind::exp_state_noise &&
                                                    model.as<ExpStateNoise>().noise_factor == 0.0);

  auto stats = [&](const Vector& x, int c) {
    MarkerStats s;
    s.value = x(c);
    if (m.dim() == 1) {
      s.cond_mse = conditional_mse(m, x);
      s.cond_risk = conditional_risk(m, x);
    } else {
      const double d = m.m1(c) - x(c);
      s.cond_mse = m.sigma(c, c) + d * d;
      s.cond_risk = g.var_of_sq_error(x, c);
    }
    return s;
  };

  std::vector<Profile> out;
  for (int c = 0; c < m.dim(); ++c) {
    Profile p;
    p.y = y;
    p.mu = mu;
    p.component = c;
    p.mmse = stats(x_mmse, c);
    p.mmae = stats(x_mmae, c);
    p.risk_aware = stats(x_ra, c);
    if (continuous) {
      // Uniform in the integration coordinate so skewed positive posteriors
      // are resolved near zero.
      const auto sup = post.support(c);
      const bool logc = post.log_coordinate(c);
      const double a = logc ? std::log(sup.lo) : sup.lo;
      const double b = logc ? std::log(sup.hi) : sup.hi;
      for (int i = 0; i < grid_points; ++i) {
        const double u = a + (b - a) * i / (grid_points - 1);
        const double x = logc ? std::exp(u) : u;
        p.grid.push_back({x, post.marginal_density(c, x)});
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

nlohmann::json profile_json(std::span<const Profile> profiles, const PosteriorMoments& moments) {
  auto marker_stats = [](const MarkerStats& s) {
    return nlohmann::json{{"cond_mse", s.cond_mse}, {"cond_risk", s.cond_risk}};
  };
  nlohmann::json all = nlohmann::json::array();
  for (const auto& p : profiles) {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& pt : p.grid) grid.push_back({{"x", pt.x}, {"density", pt.density}});
    nlohmann::json j{{"y", vec_json(p.y)},
                     {"mu", p.mu},
                     {"component", p.component},
                     {"grid", grid},
                     {"markers", {{"mmse", p.mmse.value}, {"mmae", p.mmae.value}, {"risk_aware", p.risk_aware.value}}},
                     {"stats",
                      {{"mmse", marker_stats(p.mmse)},
                       {"mmae", marker_stats(p.mmae)},
                       {"risk_aware", marker_stats(p.risk_aware)}}},
                     {"moments", moments_json(moments)}};
    all.push_back(std::move(j));
  }
  return all.size() == 1 ? all[0] : all;
}

}  // namespace riskmmse
