#include "riskmmse/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "riskmmse/dual.hpp"
#include "riskmmse/error.hpp"
#include "riskmmse/estimator.hpp"

namespace riskmmse {

namespace {

// Posterior of one observation value as plain atoms.
struct Atoms {
  std::vector<Vector> x;
  std::vector<double> p;  // normalized
  double weight = 0;      // P(Y = y)
  PosteriorMoments moments;
};

std::vector<Atoms> enumerate(const DiscreteJoint& d) {
  std::vector<Atoms> out;
  std::vector<bool> done(d.ys.size(), false);
  for (std::size_t j = 0; j < d.ys.size(); ++j) {
    if (done[j]) continue;
    Atoms a;
    for (std::size_t i = 0; i < d.xs.size(); ++i) {
      double w = 0.0;
      for (std::size_t k = j; k < d.ys.size(); ++k)
        if (d.ys[k] == d.ys[j]) w += d.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      if (w > 0) {
        a.x.push_back(d.xs[i]);
        a.p.push_back(w);
        a.weight += w;
      }
    }
    for (std::size_t k = j; k < d.ys.size(); ++k)
      if (d.ys[k] == d.ys[j]) done[k] = true;
    if (a.weight <= 0) continue;
    for (auto& p : a.p) p /= a.weight;

    // Raw moments, deliberately computed differently from the library.
    const auto M = d.xs.front().size();
    auto& m = a.moments;
    m.m1 = Vector::Zero(M);
    m.m3 = Vector::Zero(M);
    Matrix second = Matrix::Zero(M, M);
    double fourth = 0.0;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
      const double n2 = a.x[i].squaredNorm();
      m.m1 += a.p[i] * a.x[i];
      second += a.p[i] * a.x[i] * a.x[i].transpose();
      m.s2 += a.p[i] * n2;
      m.m3 += a.p[i] * n2 * a.x[i];
      fourth += a.p[i] * n2 * n2;
    }
    m.sigma = second - m.m1 * m.m1.transpose();
    m.v4 = fourth - m.s2 * m.s2;
    m.y = d.ys[j];
    m.mass = a.weight;
    out.push_back(std::move(a));
  }
  return out;
}

// Objective of the pointwise problem and its value at x.
struct Quadratic {
  Matrix A;
  Vector c;
  double at(const Vector& x) const { return 0.5 * x.dot(A * x) - c.dot(x); }
};

Quadratic lagrangian(const PosteriorMoments& m, double mu) {
  const auto M = m.m1.size();
  return {Matrix::Identity(M, M) + 2.0 * mu * m.sigma, m.m1 + mu * (m.m3 - m.s2 * m.m1)};
}

struct Totals {
  double half_s2 = 0, r_min = 0, v4 = 0, mse = 0, risk = 0;
};

Totals totals(const std::vector<Atoms>& post, double mu, const OracleConfig& cfg) {
  Totals t;
  for (const auto& a : post) {
    const Vector x = lagrangian_bruteforce(a.moments, mu, cfg);
    t.half_s2 += a.weight * 0.5 * a.moments.s2;
    t.r_min += a.weight * lagrangian(a.moments, mu).at(x);
    t.v4 += a.weight * a.moments.v4;
    // Error statistics straight from the atoms.
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
      const double e = (a.x[i] - x).squaredNorm();
      e1 += a.p[i] * e;
      e2 += a.p[i] * e * e;
    }
    t.mse += a.weight * e1;
    t.risk += a.weight * std::max(0.0, e2 - e1 * e1);
  }
  return t;
}

double dual_at(const std::vector<Atoms>& post, double mu, double epsilon, const OracleConfig& cfg) {
  const Totals t = totals(post, mu, cfg);
  return t.half_s2 + t.r_min + 0.25 * mu * (t.v4 - epsilon);
}

}  // namespace

void OracleConfig::validate() const {
  if (grid_points_per_dim < 101) throw Error(ErrorCode::InvalidParameter, "grid_points_per_dim must be >= 101");
  if (refine_rounds < 2) throw Error(ErrorCode::InvalidParameter, "refine_rounds must be >= 2");
  if (!(grid_half_width > 0)) throw Error(ErrorCode::InvalidParameter, "grid_half_width must be > 0");
  if (!(mu_cap > 0)) throw Error(ErrorCode::InvalidParameter, "mu_cap must be > 0");
}

Vector lagrangian_bruteforce(const PosteriorMoments& m, double mu, const OracleConfig& cfg) {
  cfg.validate();
  if (std::isnan(mu) || mu < 0) throw Error(ErrorCode::NegativeMu, "multiplier must be >= 0");
  const auto M = m.m1.size();
  if (M < 1 || M > 2) throw Error(ErrorCode::UnsupportedKind, "brute-force oracle supports M <= 2");
  const Quadratic q = lagrangian(m, mu);
  const int S = cfg.grid_points_per_dim;
  const int mid = (S - 1) / 2;

  Vector center = m.m1;
  double half = cfg.grid_half_width;
  for (int round = 0; round < cfg.refine_rounds; ++round) {
    // f(center + d) - f(center) = d'g + d'Ad/2 keeps small steps resolvable.
    const Vector g = q.A * center - q.c;
    const double h = half / mid;
    double best = 0.0;
    int bi = mid, bj = M == 2 ? mid : 0;
    bool first = true;
    Vector d(M);
    for (int i = 0; i < S; ++i) {
      for (int j = 0; j < (M == 2 ? S : 1); ++j) {
        d(0) = (i - mid) * h;
        if (M == 2) d(1) = (j - mid) * h;
        const double f = d.dot(g) + 0.5 * d.dot(q.A * d);
        if (first || f < best) {
          best = f;
          bi = i;
          bj = j;
          first = false;
        }
      }
    }
    const bool edge = bi == 0 || bi == S - 1 || (M == 2 && (bj == 0 || bj == S - 1));
    center(0) += (bi - mid) * h;
    if (M == 2) center(1) += (bj - mid) * h;
    if (edge && round == cfg.refine_rounds - 1)
      throw Error(ErrorCode::GridTooCoarse, "grid minimum on the window boundary after the last round");
    if (!edge) half *= 0.5;
  }
  return center;
}

DualOracleResult discrete_dual_oracle(const ModelSpec& model, double epsilon, const OracleConfig& cfg) {
  cfg.validate();
  if (!model.is_discrete()) throw Error(ErrorCode::UnsupportedKind, "dual oracle needs a discrete model");
  if (!(epsilon > 0)) throw Error(ErrorCode::InvalidParameter, "epsilon must be > 0");
  const auto& d = model.as<DiscreteJoint>();
  if ((d.p.array() > 0).count() > 32) throw Error(ErrorCode::InvalidParameter, "dual oracle supports <= 32 atoms");
  const auto post = enumerate(d);

  auto result_at = [&](double mu) {
    const Totals t = totals(post, mu, cfg);
    return DualOracleResult{mu, 0.5 * t.mse, t.half_s2 + t.r_min + 0.25 * mu * (t.v4 - epsilon), t.risk};
  };

  // The dual slope is (risk - epsilon)/4, so the maximizer lies below the
  // first doubling point whose estimates are feasible.
  const DualOracleResult at_zero = result_at(0.0);
  if (at_zero.expected_risk <= epsilon) return at_zero;
  if (result_at(cfg.mu_cap).expected_risk > epsilon)
    throw Error(ErrorCode::MultiplierCapExceeded, "dual still increasing at mu_cap");
  double hi = 1.0;
  while (hi < cfg.mu_cap && result_at(hi).expected_risk > epsilon) hi *= 2.0;
  hi = std::min(hi, cfg.mu_cap);

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = hi;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = dual_at(post, x1, epsilon, cfg), f2 = dual_at(post, x2, epsilon, cfg);
  while (b - a > 1e-10 * std::max(1.0, b)) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = dual_at(post, x2, epsilon, cfg);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = dual_at(post, x1, epsilon, cfg);
    }
  }
  const DualOracleResult found = result_at(0.5 * (a + b));
  return at_zero.dual >= found.dual ? at_zero : found;
}

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

ModelSpec table(std::vector<Vector> xs, std::vector<Vector> ys, std::initializer_list<double> p) {
  Matrix P(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(ys.size()));
  auto it = p.begin();
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = 0; j < P.cols(); ++j) P(i, j) = *it++;
  return ModelSpec(DiscreteJoint{std::move(xs), std::move(ys), std::move(P)});
}

OracleCheck make_check(const std::string& fixture, const std::string& check, double value, double tol) {
  return {fixture, check, value, tol, std::abs(value) <= tol};
}

}  // namespace

std::vector<OracleFixture> oracle_fixtures() {
  std::vector<OracleFixture> f;
  f.push_back({"two_point", table({vec({0}), vec({3})}, {vec({0})}, {2.0 / 3.0, 1.0 / 3.0}), 0.5});
  f.push_back({"symmetric_two_point", table({vec({0}), vec({2})}, {vec({0})}, {0.5, 0.5}), 0.1});
  f.push_back({"three_point", table({vec({0}), vec({1}), vec({4})}, {vec({0})}, {0.5, 0.3, 0.2}), 4.0});
  f.push_back({"two_observations", table({vec({0}), vec({1}), vec({3})}, {vec({0}), vec({1})},
                                         {0.3, 0.1, 0.15, 0.15, 0.05, 0.25}),
               1.2});
  f.push_back({"planar", table({vec({0, 0}), vec({1, 2}), vec({3, -1}), vec({2, 2})}, {vec({0}), vec({1})},
                               {0.2, 0.05, 0.1, 0.15, 0.05, 0.2, 0.15, 0.1}),
               0.5});
  f.push_back({"planar_skew", table({vec({0, 0}), vec({4, 1}), vec({1, 3})}, {vec({0})}, {0.6, 0.25, 0.15}), 2.0});
  return f;
}

std::vector<OracleCheck> run_oracle_checks(const OracleFixture& fx, const OracleConfig& cfg) {
  std::vector<OracleCheck> out;
  OuterIntegrator exact;
  exact.mode = OuterMode::discrete_exact;
  const ObservationSet obs(fx.model, exact);

  double worst = 0.0;
  for (double mu : {0.0, 0.1, 1.0, 10.0})
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto& m = obs.grid(i).moments();
      worst = std::max(worst, (lagrangian_bruteforce(m, mu, cfg) - risk_aware_estimate(m, mu)).norm());
    }
  out.push_back(make_check(fx.name, "closed_form_vs_bruteforce", worst, 1e-5));

  const auto oracle = discrete_dual_oracle(fx.model, fx.epsilon, cfg);
  out.push_back(make_check(fx.name, "oracle_gap", oracle.primal - oracle.dual, 1e-4));
  out.push_back(make_check(fx.name, "oracle_feasibility", std::max(0.0, oracle.expected_risk - fx.epsilon), 1e-6));

  SolveOptions opt;
  opt.mu_cap = cfg.mu_cap;
  const auto kkt = solve_mu(obs, fx.epsilon, opt);
  out.push_back(make_check(fx.name, "mu_agreement", kkt.mu_star - oracle.mu, 1e-4));
  out.push_back(make_check(fx.name, "kkt_feasibility", std::max(0.0, -kkt.slack), 1e-6));
  out.push_back(make_check(fx.name, "kkt_comp_slackness", kkt.comp_slackness, 1e-6));
  out.push_back(make_check(fx.name, "kkt_gap", kkt.gap, 1e-6));
  return out;
}

}  // namespace riskmmse
