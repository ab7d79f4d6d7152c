#include "riskmmse/posterior.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "riskmmse/error.hpp"

namespace riskmmse {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kSelfConvergenceTol = 1e-8;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Visits the tensor product of composite Gauss-Legendre rules on `box`.
template <class Fn>
void for_each_node(const std::vector<quad::Interval>& box, int nodes_per_dim, Fn&& fn) {
  const std::size_t d = box.size();
  std::vector<std::vector<double>> xs(d), ws(d);
  for (std::size_t k = 0; k < d; ++k) quad::composite(box[k], nodes_per_dim, xs[k], ws[k]);
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> u(d);
  while (true) {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      u[k] = xs[k][idx[k]];
      w *= ws[k][idx[k]];
    }
    fn(std::span<const double>(u), w);
    std::size_t k = 0;
    while (k < d && ++idx[k] == xs[k].size()) idx[k++] = 0;
    if (k == d) break;
  }
}

}  // namespace

namespace detail {

/// How a state component is represented by the kernel: either a quadrature
/// coordinate (possibly in log scale), or a conditionally Gaussian component
/// integrated in closed form.
struct ComponentRole {
  bool analytic = false;
  int coord = 0;
  bool log_scale = false;
};

class PosteriorKernel {
 public:
  virtual ~PosteriorKernel() = default;

  virtual int quad_dims() const = 0;
  virtual int state_dim() const = 0;
  virtual std::vector<quad::Interval> initial_box() const = 0;
  /// log of the unnormalized posterior density in quadrature coordinates
  /// (Jacobian included), so that its integral is p(y).
  virtual double log_weight(std::span<const double> u) const = 0;
  virtual void state(std::span<const double> u, double* mean, double* var) const = 0;
  virtual ComponentRole role(int component) const = 0;

  virtual std::optional<double> analytic_density(int /*component*/, double /*t*/, double /*log_mass*/) const {
    return std::nullopt;
  }
};

namespace {

class ExpStateNoiseKernel final : public PosteriorKernel {
 public:
  ExpStateNoiseKernel(const ExpStateNoise& m, double y) : m_(m), y_(y) {}

  int quad_dims() const override { return 1; }
  int state_dim() const override { return 1; }

  std::vector<quad::Interval> initial_box() const override {
    const double c = std::log(m_.mean_x);
    const double ly = y_ != 0.0 ? std::log(std::abs(y_)) : c - 10.0;
    return {{std::min(ly, c) - 6.0, std::max(ly, c) + 3.0}};
  }

  // x = e^u; the 1/x of the likelihood normalizer cancels the Jacobian.
  double log_weight(std::span<const double> u) const override {
    const double x = std::exp(u[0]);
    const double r = y_ * std::exp(-u[0]) - 1.0;
    return std::log(m_.rate()) - m_.rate() * x - 0.5 * (kLogTwoPi + std::log(m_.noise_factor)) -
           0.5 * r * r / m_.noise_factor;
  }

  void state(std::span<const double> u, double* mean, double* var) const override {
    mean[0] = std::exp(u[0]);
    var[0] = 0.0;
  }

  ComponentRole role(int) const override { return {false, 0, true}; }

 private:
  ExpStateNoise m_;
  double y_;
};

// State [z, h]. Given h, z | y is Gaussian, so only h is integrated
// numerically (u = log h).
class CommFadingKernel final : public PosteriorKernel {
 public:
  CommFadingKernel(const CommFading& m, double y) : m_(m), y_(y) {}

  int quad_dims() const override { return 1; }
  int state_dim() const override { return 2; }

  std::vector<quad::Interval> initial_box() const override {
    const double c = std::log(m_.rayleigh_scale);
    const double hi = y_ != 0.0 ? std::max(c + 3.0, std::log(std::abs(y_)) + 1.0) : c + 3.0;
    return {{c - 8.0, hi}};
  }

  double log_weight(std::span<const double> u) const override {
    const double h = std::exp(u[0]);
    const double s2r = m_.rayleigh_scale * m_.rayleigh_scale;
    const double log_s = m_.var_w > 0 ? std::log(m_.var_z * h * h + m_.var_w) : std::log(m_.var_z) + 2.0 * u[0];
    const double s = std::exp(log_s);
    // Rayleigh density times Jacobian dh/du = h, then the marginal N(y; 0, s).
    return 2.0 * u[0] - std::log(s2r) - 0.5 * h * h / s2r - 0.5 * (kLogTwoPi + log_s) - 0.5 * y_ * y_ / s;
  }

  void state(std::span<const double> u, double* mean, double* var) const override {
    const double h = std::exp(u[0]);
    const double s = m_.var_z * h * h + m_.var_w;
    mean[0] = m_.var_z * h * y_ / s;
    var[0] = m_.var_z * m_.var_w / s;
    mean[1] = h;
    var[1] = 0.0;
  }

  ComponentRole role(int component) const override {
    return component == 0 ? ComponentRole{true, -1, false} : ComponentRole{false, 0, true};
  }

  // Noiseless channel: z = y / h exactly, so the z density is a change of
  // variables of the h density.
  std::optional<double> analytic_density(int component, double t, double log_mass) const override {
    if (component != 0 || m_.var_w > 0) return std::nullopt;
    if (t == 0.0 || y_ == 0.0 || (t > 0) != (y_ > 0)) return 0.0;
    const double h = y_ / t;
    const std::array<double, 1> u{std::log(h)};
    const double f_h = std::exp(log_weight(u) - log_mass) / h;
    return f_h * std::abs(y_) / (t * t);
  }

 private:
  CommFading m_;
  double y_;
};

class GaussianLinearKernel final : public PosteriorKernel {
 public:
  GaussianLinearKernel(const GaussianLinear& g, const Vector& y) : g_(g), y_(y) {
    Eigen::LLT<Matrix> prior(g.prior_cov), noise(g.noise_cov);
    if (prior.info() != Eigen::Success || noise.info() != Eigen::Success)
      throw Error(ErrorCode::UnsupportedKind, "posterior quadrature needs positive definite covariances");
    prior_prec_ = prior.solve(Matrix::Identity(g.prior_cov.rows(), g.prior_cov.cols()));
    noise_prec_ = noise.solve(Matrix::Identity(g.noise_cov.rows(), g.noise_cov.cols()));
    const double log_det = 2.0 * (prior.matrixLLT().diagonal().array().log().sum() +
                                  noise.matrixLLT().diagonal().array().log().sum());
    log_norm_ = -0.5 * (static_cast<double>(g.prior_mean.size() + y.size()) * kLogTwoPi + log_det);
  }

  int quad_dims() const override { return static_cast<int>(g_.prior_mean.size()); }
  int state_dim() const override { return quad_dims(); }

  // Seeded from the Kalman posterior; the box search does the rest.
  std::vector<quad::Interval> initial_box() const override {
    const Matrix cov = (prior_prec_ + g_.obs_matrix.transpose() * noise_prec_ * g_.obs_matrix).inverse();
    const Vector mean = cov * (prior_prec_ * g_.prior_mean + g_.obs_matrix.transpose() * noise_prec_ * y_);
    std::vector<quad::Interval> box;
    for (Eigen::Index k = 0; k < mean.size(); ++k) {
      const double sd = std::sqrt(std::max(cov(k, k), 1e-300));
      box.push_back({mean(k) - 10.0 * sd, mean(k) + 10.0 * sd});
    }
    return box;
  }

  double log_weight(std::span<const double> u) const override {
    const Eigen::Map<const Vector> x(u.data(), static_cast<Eigen::Index>(u.size()));
    const Vector dx = x - g_.prior_mean;
    const Vector dy = y_ - g_.obs_matrix * x;
    return log_norm_ - 0.5 * dx.dot(prior_prec_ * dx) - 0.5 * dy.dot(noise_prec_ * dy);
  }

  void state(std::span<const double> u, double* mean, double* var) const override {
    for (std::size_t k = 0; k < u.size(); ++k) {
      mean[k] = u[k];
      var[k] = 0.0;
    }
  }

  ComponentRole role(int component) const override { return {false, component, false}; }

 private:
  GaussianLinear g_;
  Vector y_;
  Matrix prior_prec_;
  Matrix noise_prec_;
  double log_norm_ = 0;
};

std::shared_ptr<const PosteriorKernel> make_kernel(const ModelSpec& model, const Vector& y) {
  switch (model.kind()) {
    case ModelKind::exp_state_noise:
      return std::make_shared<ExpStateNoiseKernel>(model.as<ExpStateNoise>(), y(0));
    case ModelKind::comm_fading:
      return std::make_shared<CommFadingKernel>(model.as<CommFading>(), y(0));
    case ModelKind::gaussian_linear:
      if (model.state_dim() > 2)
        throw Error(ErrorCode::UnsupportedKind, "gaussian_linear posterior quadrature supports M <= 2");
      return std::make_shared<GaussianLinearKernel>(model.as<GaussianLinear>(), y);
    case ModelKind::discrete:
      break;
  }
  throw Error(ErrorCode::UnsupportedKind, "no quadrature kernel for this model kind");
}

PosteriorGrid integrate(const PosteriorKernel& kernel, const Vector& y, const std::vector<quad::Interval>& box,
                        int nodes_per_dim) {
  const int M = kernel.state_dim();
  std::vector<double> log_w;
  std::vector<std::vector<double>> coords;
  for_each_node(box, nodes_per_dim, [&](std::span<const double> u, double w) {
    const double lw = kernel.log_weight(u);
    if (std::isnan(lw) || lw == kNegInf || w <= 0) return;
    log_w.push_back(lw + std::log(w));
    coords.emplace_back(u.begin(), u.end());
  });
  if (log_w.empty()) throw Error(ErrorCode::ZeroPosteriorMass, "posterior density vanishes on the quadrature box");
  const double peak = *std::max_element(log_w.begin(), log_w.end());
  if (!std::isfinite(peak)) throw Error(ErrorCode::QuadratureNotConverged, "non-finite posterior weight");

  std::vector<double> weights(log_w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) total += weights[i] = std::exp(log_w[i] - peak);
  for (auto& w : weights) w /= total;

  Matrix means(M, static_cast<Eigen::Index>(weights.size()));
  Matrix vars(M, static_cast<Eigen::Index>(weights.size()));
  for (std::size_t i = 0; i < coords.size(); ++i)
    kernel.state(coords[i], means.col(static_cast<Eigen::Index>(i)).data(),
                 vars.col(static_cast<Eigen::Index>(i)).data());
  return PosteriorGrid(y, std::move(weights), std::move(means), std::move(vars), peak + std::log(total));
}

PosteriorGrid enumerate_discrete(const DiscreteJoint& d, const Vector& y) {
  std::vector<double> weights;
  std::vector<Eigen::Index> rows;
  double mass = 0.0;
  for (Eigen::Index i = 0; i < d.p.rows(); ++i) {
    double w = 0.0;
    for (Eigen::Index j = 0; j < d.p.cols(); ++j)
      if (d.ys[static_cast<std::size_t>(j)] == y) w += d.p(i, j);
    if (w > 0) {
      weights.push_back(w);
      rows.push_back(i);
      mass += w;
    }
  }
  if (!(mass > 0)) throw Error(ErrorCode::ZeroPosteriorMass, "observation is not in the support of the joint table");
  const auto M = d.xs.front().size();
  Matrix means(M, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k)
    means.col(static_cast<Eigen::Index>(k)) = d.xs[static_cast<std::size_t>(rows[k])];
  for (auto& w : weights) w /= mass;
  return PosteriorGrid(y, std::move(weights), std::move(means), Matrix::Zero(M, means.cols()), std::log(mass));
}

}  // namespace
}  // namespace detail

void QuadratureConfig::validate() const {
  if (nodes_per_dim < 16) throw Error(ErrorCode::InvalidParameter, "nodes_per_dim must be >= 16");
  if (!(truncation_mass_tol > 0 && truncation_mass_tol <= 1e-6))
    throw Error(ErrorCode::InvalidParameter, "truncation_mass_tol must lie in (0, 1e-6]");
  if (refinement_factor < 1) throw Error(ErrorCode::InvalidParameter, "refinement_factor must be >= 1");
}

// ---------------------------------------------------------------------------
// PosteriorGrid

PosteriorGrid::PosteriorGrid(Vector y, std::vector<double> weights, Matrix means, Matrix variances, double log_mass)
    : y_(std::move(y)),
      weights_(std::move(weights)),
      means_(std::move(means)),
      variances_(std::move(variances)),
      log_mass_(log_mass) {
  compute_moments();
}

// Central (two-pass) accumulation keeps sigma, b and v4 free of the
// cancellation that raw fourth moments would suffer.
void PosteriorGrid::compute_moments() {
  const Eigen::Index M = means_.rows();
  const auto K = static_cast<Eigen::Index>(weights_.size());
  Vector m1 = Vector::Zero(M);
  double s2 = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double w = weights_[static_cast<std::size_t>(k)];
    m1 += w * means_.col(k);
    s2 += w * (means_.col(k).squaredNorm() + variances_.col(k).sum());
  }
  Matrix sigma = Matrix::Zero(M, M);
  Vector b = Vector::Zero(M);
  double v4 = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double w = weights_[static_cast<std::size_t>(k)];
    const auto m = means_.col(k);
    const auto v = variances_.col(k);
    const Vector d = m - m1;
    const double q = m.squaredNorm() + v.sum() - s2;
    sigma += w * d * d.transpose();
    sigma.diagonal() += w * v;
    b += w * (q * d + 2.0 * v.cwiseProduct(m));
    v4 += w * (q * q + 2.0 * v.squaredNorm() + 4.0 * v.dot(m.cwiseProduct(m)));
  }
  sigma = (0.5 * (sigma + sigma.transpose())).eval();
  moments_.m1 = m1;
  moments_.sigma = sigma;
  moments_.s2 = s2;
  moments_.m3 = b + s2 * m1;
  moments_.v4 = std::max(v4, 0.0);
  moments_.mass = std::exp(log_mass_);
  moments_.y = y_;
}

double PosteriorGrid::mse_of(const Vector& xhat, int component) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    if (component == kAllComponents) {
      acc += weights_[k] * ((means_.col(col) - xhat).squaredNorm() + variances_.col(col).sum());
    } else {
      const double d = means_(component, col) - xhat(component);
      acc += weights_[k] * (d * d + variances_(component, col));
    }
  }
  return acc;
}

double PosteriorGrid::var_of_sq_error(const Vector& xhat, int component) const {
  if (component != kAllComponents && (component < 0 || component >= dim()))
    throw Error(ErrorCode::InvalidParameter, "component index out of range");
  if (!xhat.allFinite() || xhat.size() != dim()) throw Error(ErrorCode::InvalidParameter, "xhat must be finite, length M");
  const double mse = mse_of(xhat, component);
  double acc = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    if (component == kAllComponents) {
      const Vector d = means_.col(col) - xhat;
      const auto v = variances_.col(col);
      const double q = d.squaredNorm() + v.sum() - mse;
      acc += weights_[k] * (q * q + 2.0 * v.squaredNorm() + 4.0 * v.dot(d.cwiseProduct(d)));
    } else {
      const double d = means_(component, col) - xhat(component);
      const double v = variances_(component, col);
      const double q = d * d + v - mse;
      acc += weights_[k] * (q * q + 2.0 * v * v + 4.0 * v * d * d);
    }
  }
  return acc;
}

bool moments_agree(const PosteriorMoments& a, const PosteriorMoments& b, double tol) {
  const double s = std::sqrt(std::max(b.s2, 1e-300));
  auto close = [&](double x, double y, int order) {
    return std::abs(x - y) <= tol * std::max(std::abs(y), std::pow(s, order));
  };
  for (Eigen::Index i = 0; i < b.m1.size(); ++i) {
    if (!close(a.m1(i), b.m1(i), 1) || !close(a.m3(i), b.m3(i), 3)) return false;
    for (Eigen::Index j = 0; j < b.m1.size(); ++j)
      if (!close(a.sigma(i, j), b.sigma(i, j), 2)) return false;
  }
  return close(a.s2, b.s2, 2) && close(a.v4, b.v4, 4);
}

// ---------------------------------------------------------------------------
// Posterior

Posterior::~Posterior() = default;
Posterior::Posterior(Posterior&&) noexcept = default;
Posterior& Posterior::operator=(Posterior&&) noexcept = default;

Posterior::Posterior(const ModelSpec& model, const Vector& y, const QuadratureConfig& quad) {
  quad.validate();
  if (y.size() != model.obs_dim()) throw Error(ErrorCode::InvalidParameter, "observation has the wrong dimension");
  if (!y.allFinite()) throw Error(ErrorCode::InvalidParameter, "observation must be finite");

  if (model.is_discrete()) {
    grid_ = detail::enumerate_discrete(model.as<DiscreteJoint>(), y);
    discrete_ = true;
    return;
  }
  if (model.kind() == ModelKind::exp_state_noise && model.as<ExpStateNoise>().noise_factor == 0.0) {
    // Y = X exactly: the posterior is a point mass at y.
    const auto& m = model.as<ExpStateNoise>();
    if (!(y(0) > 0)) throw Error(ErrorCode::ZeroPosteriorMass, "noiseless observation outside the prior support");
    grid_ = PosteriorGrid(y, {1.0}, Matrix::Constant(1, 1, y(0)), Matrix::Zero(1, 1),
                          std::log(m.rate()) - m.rate() * y(0));
    discrete_ = true;
    return;
  }

  kernel_ = detail::make_kernel(model, y);
  // Faces stop where the density is below truncation_mass_tol * 1e-4 of the peak.
  const double log_drop = -std::log(quad.truncation_mass_tol) + std::log(1e4);
  const auto* k = kernel_.get();
  box_ = quad::find_box([k](std::span<const double> u) { return k->log_weight(u); }, kernel_->initial_box(),
                        log_drop)
             .box;

  int n = quad.nodes_per_dim;
  PosteriorGrid coarse = detail::integrate(*kernel_, y, box_, n);
  for (int r = 0; r < quad.refinement_factor; ++r) {
    n *= 2;
    PosteriorGrid fine = detail::integrate(*kernel_, y, box_, n);
    if (moments_agree(coarse.moments(), fine.moments(), kSelfConvergenceTol)) {
      grid_ = std::move(fine);
      nodes_per_dim_ = n;
      return;
    }
    coarse = std::move(fine);
  }
  throw Error(ErrorCode::QuadratureNotConverged,
              "posterior moments did not self-converge after " + std::to_string(quad.refinement_factor) +
                  " node doublings");
}

double Posterior::cdf(int component, double t) const {
  if (component < 0 || component >= grid_.dim()) throw Error(ErrorCode::InvalidParameter, "component out of range");
  const auto weights = grid_.weights();
  if (discrete_) {
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k)
      if (grid_.means()(component, static_cast<Eigen::Index>(k)) <= t) acc += weights[k];
    return acc;
  }
  const auto role = kernel_->role(component);
  if (role.analytic) {
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      const double m = grid_.means()(component, col);
      const double v = grid_.variances()(component, col);
      acc += weights[k] * (v > 0 ? normal_cdf((t - m) / std::sqrt(v)) : (m <= t ? 1.0 : 0.0));
    }
    return acc;
  }
  double u_star;
  if (role.log_scale) {
    if (t <= 0) return 0.0;
    u_star = std::log(t);
  } else {
    u_star = t;
  }
  const auto& iv = box_[static_cast<std::size_t>(role.coord)];
  if (u_star <= iv.lo) return 0.0;
  if (u_star >= iv.hi) return 1.0;
  auto box = box_;
  box[static_cast<std::size_t>(role.coord)].hi = u_star;
  double acc = 0.0;
  const double log_mass = grid_.log_mass();
  for_each_node(box, nodes_per_dim_, [&](std::span<const double> u, double w) {
    const double lw = kernel_->log_weight(u);
    if (std::isfinite(lw)) acc += w * std::exp(lw - log_mass);
  });
  return std::min(acc, 1.0);
}

quad::Interval Posterior::support(int component) const {
  if (component < 0 || component >= grid_.dim()) throw Error(ErrorCode::InvalidParameter, "component out of range");
  const auto weights = grid_.weights();
  const bool by_nodes = discrete_ || kernel_->role(component).analytic;
  if (by_nodes) {
    const double w_max = *std::max_element(weights.begin(), weights.end());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (!discrete_ && weights[k] < 1e-16 * w_max) continue;
      const auto col = static_cast<Eigen::Index>(k);
      const double m = grid_.means()(component, col);
      const double sd = std::sqrt(grid_.variances()(component, col));
      lo = std::min(lo, m - 10.0 * sd);
      hi = std::max(hi, m + 10.0 * sd);
    }
    return {lo, hi};
  }
  const auto role = kernel_->role(component);
  const auto& iv = box_[static_cast<std::size_t>(role.coord)];
  return role.log_scale ? quad::Interval{std::exp(iv.lo), std::exp(iv.hi)} : iv;
}

bool Posterior::log_coordinate(int component) const {
  if (component < 0 || component >= grid_.dim()) throw Error(ErrorCode::InvalidParameter, "component out of range");
  return !discrete_ && kernel_->role(component).log_scale;
}

double Posterior::median(int component) const {
  if (component < 0 || component >= grid_.dim()) throw Error(ErrorCode::InvalidParameter, "component out of range");
  if (discrete_) {
    std::vector<std::pair<double, double>> pts;
    const auto weights = grid_.weights();
    for (std::size_t k = 0; k < weights.size(); ++k)
      pts.emplace_back(grid_.means()(component, static_cast<Eigen::Index>(k)), weights[k]);
    std::sort(pts.begin(), pts.end());
    double acc = 0.0;
    for (const auto& [x, w] : pts) {
      acc += w;
      if (acc >= 0.5 - 1e-12) return x;
    }
    return pts.back().first;
  }
  auto [lo, hi] = support(component);
  for (int i = 0; i < 60 && cdf(component, lo) >= 0.5; ++i) lo -= std::max(1.0, std::abs(lo));
  for (int i = 0; i < 60 && cdf(component, hi) < 0.5; ++i) hi += std::max(1.0, std::abs(hi));
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(component, mid) >= 0.5)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double Posterior::marginal_density(int component, double t) const {
  if (component < 0 || component >= grid_.dim()) throw Error(ErrorCode::InvalidParameter, "component out of range");
  if (discrete_) throw Error(ErrorCode::UnsupportedKind, "posterior has no density (point masses)");
  const double log_mass = grid_.log_mass();
  const auto role = kernel_->role(component);
  if (role.analytic) {
    if (auto v = kernel_->analytic_density(component, t, log_mass)) return *v;
    const auto weights = grid_.weights();
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      const double var = grid_.variances()(component, col);
      if (!(var > 0)) throw Error(ErrorCode::UnsupportedKind, "degenerate conditional component");
      const double d = t - grid_.means()(component, col);
      acc += weights[k] * std::exp(-0.5 * (kLogTwoPi + std::log(var)) - 0.5 * d * d / var);
    }
    return acc;
  }
  double u_star, jac = 1.0;
  if (role.log_scale) {
    if (t <= 0) return 0.0;
    u_star = std::log(t);
    jac = t;
  } else {
    u_star = t;
  }
  auto box = box_;
  box[static_cast<std::size_t>(role.coord)] = {u_star, u_star};
  if (box.size() == 1) {
    const std::array<double, 1> u{u_star};
    const double lw = kernel_->log_weight(u);
    return std::isfinite(lw) ? std::exp(lw - log_mass) / jac : 0.0;
  }
  // Integrate out the remaining coordinates; the pinned one gets a unit weight.
  std::vector<quad::Interval> rest;
  for (std::size_t k = 0; k < box.size(); ++k)
    if (static_cast<int>(k) != role.coord) rest.push_back(box[k]);
  double acc = 0.0;
  std::vector<double> full(box.size());
  for_each_node(rest, nodes_per_dim_, [&](std::span<const double> u, double w) {
    for (std::size_t k = 0, r = 0; k < full.size(); ++k)
      full[k] = static_cast<int>(k) == role.coord ? u_star : u[r++];
    const double lw = kernel_->log_weight(full);
    if (std::isfinite(lw)) acc += w * std::exp(lw - log_mass);
  });
  return acc / jac;
}

// ---------------------------------------------------------------------------

PosteriorGrid build_posterior_grid(const ModelSpec& model, const Vector& y, const QuadratureConfig& quad) {
  return Posterior(model, y, quad).grid();
}

PosteriorMoments posterior_moments(const ModelSpec& model, const Vector& y, const QuadratureConfig& quad) {
  return Posterior(model, y, quad).moments();
}

double conditional_median(const ModelSpec& model, const Vector& y, int component, const QuadratureConfig& quad) {
  if (component < 0 || component >= model.state_dim())
    throw Error(ErrorCode::InvalidParameter, "component index out of range");
  return Posterior(model, y, quad).median(component);
}

double conditional_var_of_sq_error(const ModelSpec& model, const Vector& y, const Vector& xhat, int component,
                                   const QuadratureConfig& quad) {
  return Posterior(model, y, quad).grid().var_of_sq_error(xhat, component);
}

}  // namespace riskmmse
