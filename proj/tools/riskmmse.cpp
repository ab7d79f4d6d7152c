// Command-line front end: estimate, profile, sweep, solve-dual, oracle-check
// and moments. Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskmmse/dual.hpp"
#include "riskmmse/error.hpp"
#include "riskmmse/estimator.hpp"
#include "riskmmse/experiments.hpp"
#include "riskmmse/oracle.hpp"

namespace {

using namespace riskmmse;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Counts and seeds accept scientific notation ("2e3") as long as the value is
// a nonnegative integer.
std::uint64_t parse_count(const std::string& text, const std::string& flag) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v >= 0) || v != std::floor(v) || v > 1.8e19)
    throw UsageError(flag + " expects a nonnegative integer, got '" + text + "'");
  if (text.find_first_of(".eE") == std::string::npos) return std::stoull(text);
  return static_cast<std::uint64_t>(v);
}

struct Common {
  std::string model_path;
  std::string threads;
  std::string nodes = "256";
  double trunc_tol = 1e-10;
  std::string refine = "3";
  std::string out;

  void add(CLI::App* sub) {
    sub->add_option("--model", model_path, "model config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--threads", threads, "cap on worker threads (fallback: RISKMMSE_THREADS)");
    sub->add_option("--nodes", nodes, "quadrature nodes per dimension")->capture_default_str();
    sub->add_option("--trunc-tol", trunc_tol, "posterior truncation mass tolerance")->capture_default_str();
    sub->add_option("--refine", refine, "maximum node doublings")->capture_default_str();
    sub->add_option("--out", out, "output file (default: stdout)");
  }

  QuadratureConfig quad() const {
    QuadratureConfig q;
    q.nodes_per_dim = static_cast<int>(parse_count(nodes, "--nodes"));
    q.truncation_mass_tol = trunc_tol;
    q.refinement_factor = static_cast<int>(parse_count(refine, "--refine"));
    return q;
  }

  void apply_threads() const {
    std::string t = threads;
    if (t.empty())
      if (const char* env = std::getenv("RISKMMSE_THREADS")) t = env;
    if (!t.empty()) set_max_threads(static_cast<int>(parse_count(t, "--threads")));
  }
};

struct Outer {
  std::string mode = "auto";
  std::string samples = "2000";
  std::string seed;

  void add(CLI::App* sub) {
    sub->add_option("--outer", mode, "outer integration: auto, monte_carlo, y_quadrature, discrete_exact")
        ->check(CLI::IsMember({"auto", "monte_carlo", "y_quadrature", "discrete_exact"}))
        ->capture_default_str();
    sub->add_option("--samples", samples, "outer samples or nodes")->capture_default_str();
    sub->add_option("--seed", seed, "random seed (required for monte_carlo)");
  }

  OuterIntegrator resolve(const ModelSpec& model) const {
    OuterIntegrator in;
    if (mode == "auto")
      in.mode = model.is_discrete() ? OuterMode::discrete_exact : OuterMode::monte_carlo;
    else
      in.mode = parse_outer_mode(mode);
    in.n_outer = parse_count(samples, "--samples");
    if (in.mode == OuterMode::monte_carlo) {
      if (seed.empty()) throw UsageError("--seed is required for monte_carlo outer integration");
      in.seed = parse_count(seed, "--seed");
    }
    return in;
  }
};

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "write to " + path + " failed");
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector as_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

int run(int argc, char** argv) {
  CLI::App app{"Risk-aware MMSE estimation"};
  app.require_subcommand(1);

  // estimate
  Common est_c;
  Outer est_o;
  std::vector<double> est_y;
  std::optional<double> est_mu, est_eps;
  double tol = 1e-6, mu_cap = 1e8;
  auto* est = app.add_subcommand("estimate", "risk-aware estimate at one observation");
  est_c.add(est);
  est_o.add(est);
  est->add_option("--y", est_y, "observation")->required()->expected(1, -1)->allow_extra_args(false);
  auto* mu_opt = est->add_option("--mu", est_mu, "multiplier");
  auto* eps_opt = est->add_option("--epsilon", est_eps, "risk tolerance (solves for the multiplier)");
  mu_opt->excludes(eps_opt);
  est->add_option("--tol", tol, "bisection tolerance")->capture_default_str();
  est->add_option("--mu-cap", mu_cap, "largest multiplier tried")->capture_default_str();

  // profile
  Common pro_c;
  std::vector<double> pro_y;
  double pro_mu = 0;
  std::string pro_points = "10001";
  auto* pro = app.add_subcommand("profile", "posterior density with estimator markers");
  pro_c.add(pro);
  pro->add_option("--y", pro_y, "observation")->required()->expected(1, -1)->allow_extra_args(false);
  pro->add_option("--mu", pro_mu, "multiplier")->required();
  pro->add_option("--points", pro_points, "density grid points")->capture_default_str();

  // sweep
  Common sw_c;
  Outer sw_o;
  std::vector<double> grid_log, grid_list;
  auto* sw = app.add_subcommand("sweep", "MSE and risk over a multiplier grid (CSV)");
  sw_c.add(sw);
  sw_o.add(sw);
  auto* glog = sw->add_option("--grid-log", grid_log, "lo hi n: n log-spaced multipliers plus mu = 0")->expected(3);
  auto* glist = sw->add_option("--grid", grid_list, "explicit ascending multipliers")->expected(1, -1);
  glog->excludes(glist);

  // solve-dual
  Common sd_c;
  Outer sd_o;
  double sd_eps = 0;
  auto* sd = app.add_subcommand("solve-dual", "multiplier for a risk tolerance, with KKT report");
  sd_c.add(sd);
  sd_o.add(sd);
  sd->add_option("--epsilon", sd_eps, "risk tolerance")->required();
  sd->add_option("--tol", tol, "bisection tolerance")->capture_default_str();
  sd->add_option("--mu-cap", mu_cap, "largest multiplier tried")->capture_default_str();

  // oracle-check
  std::vector<std::string> oc_models;
  double oc_eps = 0;
  auto* oc = app.add_subcommand("oracle-check", "brute-force validation on discrete fixtures");
  oc->add_option("--model", oc_models, "extra discrete model files")->check(CLI::ExistingFile);
  auto* oc_eps_opt = oc->add_option("--epsilon", oc_eps, "risk tolerance for --model files");
  oc->get_option("--model")->needs(oc_eps_opt);

  // moments
  Common mo_c;
  std::vector<double> mo_y;
  auto* mo = app.add_subcommand("moments", "posterior moments and Stein diagnostic");
  mo_c.add(mo);
  mo->add_option("--y", mo_y, "observation")->required()->expected(1, -1)->allow_extra_args(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*est) {
      if (!est_mu && !est_eps) throw UsageError("estimate needs --mu or --epsilon");
      est_c.apply_threads();
      const auto model = load_model(est_c.model_path);
      const auto quad = est_c.quad();
      json out;
      double mu = est_mu.value_or(0.0);
      if (est_eps) {
        const ObservationSet obs(model, est_o.resolve(model), quad);
        const auto kkt = solve_mu(obs, *est_eps, {tol, mu_cap});
        mu = kkt.mu_star;
        out["kkt"] = to_json(kkt);
      }
      const Posterior post(model, as_vector(est_y), quad);
      const auto sol = solve_risk_aware(post.moments(), mu);
      out["y"] = est_y;
      out["mu"] = mu;
      out["xhat"] = vec_json(sol.xhat);
      out["cond_mse"] = sol.cond_mse;
      out["cond_risk"] = sol.cond_risk;
      out["mmse"] = vec_json(mmse_estimate(post.moments()));
      out["mmae"] = vec_json(mmae_estimate(post));
      emit(out.dump(2) + "\n", est_c.out);
    } else if (*pro) {
      pro_c.apply_threads();
      const auto model = load_model(pro_c.model_path);
      const auto points = static_cast<int>(parse_count(pro_points, "--points"));
      const auto quad = pro_c.quad();
      const auto profiles = posterior_profile(model, as_vector(pro_y), pro_mu, points, quad);
      const auto moments = posterior_moments(model, as_vector(pro_y), quad);
      emit(profile_json(profiles, moments).dump(2) + "\n", pro_c.out);
    } else if (*sw) {
      sw_c.apply_threads();
      const auto model = load_model(sw_c.model_path);
      std::vector<double> grid;
      if (!grid_list.empty())
        grid = grid_list;
      else if (!grid_log.empty()) {
        if (!(grid_log[2] >= 1) || grid_log[2] != std::floor(grid_log[2]))
          throw UsageError("--grid-log n must be a positive integer");
        grid = log_grid(grid_log[0], grid_log[1], static_cast<int>(grid_log[2]));
      }
      else
        grid = log_grid(1e-3, 1e3, 30);
      const ObservationSet obs(model, sw_o.resolve(model), sw_c.quad());
      emit(format_csv(sweep_mu(obs, grid)), sw_c.out);
    } else if (*sd) {
      sd_c.apply_threads();
      const auto model = load_model(sd_c.model_path);
      const ObservationSet obs(model, sd_o.resolve(model), sd_c.quad());
      emit(to_json(solve_mu(obs, sd_eps, {tol, mu_cap})).dump(2) + "\n", sd_c.out);
    } else if (*oc) {
      auto fixtures = oracle_fixtures();
      for (const auto& path : oc_models) fixtures.push_back({path, load_model(path), oc_eps});
      bool all = true;
      char line[256];
      std::snprintf(line, sizeof line, "%-22s %-26s %12s %9s  %s\n", "fixture", "check", "value", "tol", "result");
      std::cout << line;
      for (const auto& f : fixtures)
        for (const auto& c : run_oracle_checks(f)) {
          std::snprintf(line, sizeof line, "%-22s %-26s %12.3e %9.1e  %s\n", c.fixture.c_str(), c.check.c_str(),
                        c.value, c.tol, c.pass ? "PASS" : "FAIL");
          std::cout << line;
          all = all && c.pass;
        }
      return all ? 0 : 1;
    } else if (*mo) {
      mo_c.apply_threads();
      const auto model = load_model(mo_c.model_path);
      const auto m = posterior_moments(model, as_vector(mo_y), mo_c.quad());
      const auto st = stein_diagnostic(m);
      json out = moments_json(m);
      out["stein"] = {{"b", vec_json(st.b)}, {"stein_gap", vec_json(st.stein_gap)}, {"gap_norm", st.gap_norm}};
      emit(out.dump(2) + "\n", mo_c.out);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
