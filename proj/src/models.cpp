#include "riskmmse/models.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "riskmmse/error.hpp"
#include "riskmmse/rng.hpp"

namespace riskmmse {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidParameter, what); }

void require_finite(const Vector& v, const char* name) {
  if (!v.allFinite()) invalid(std::string(name) + " has non-finite entries");
}

void require_psd(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) invalid(std::string(name) + " must be square");
  if (!m.allFinite()) invalid(std::string(name) + " has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    invalid(std::string(name) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) invalid(std::string(name) + " must be positive semidefinite");
}

double get_number(const nlohmann::json& cfg, const char* key, double fallback) {
  if (!cfg.contains(key)) return fallback;
  const auto& v = cfg.at(key);
  if (!v.is_number()) invalid(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

Vector to_vector(const nlohmann::json& v, const char* key) {
  if (v.is_number()) return Vector::Constant(1, v.get<double>());
  if (!v.is_array() || v.empty()) invalid(std::string("'") + key + "' must be a number or a nonempty array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) invalid(std::string("'") + key + "' entries must be numbers");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

// Accepts a scalar (1x1), or an array of rows.
Matrix to_matrix(const nlohmann::json& v, const char* key) {
  if (v.is_number()) return Matrix::Constant(1, 1, v.get<double>());
  if (!v.is_array() || v.empty()) invalid(std::string("'") + key + "' must be a number or an array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  if (!v[0].is_array()) invalid(std::string("'") + key + "' must be an array of rows");
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      invalid(std::string("'") + key + "' rows must have equal length");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) invalid(std::string("'") + key + "' entries must be numbers");
      out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return out;
}

std::vector<Vector> to_points(const nlohmann::json& v, const char* key) {
  if (!v.is_array() || v.empty()) invalid(std::string("'") + key + "' must be a nonempty array of support points");
  std::vector<Vector> pts;
  pts.reserve(v.size());
  for (const auto& e : v) pts.push_back(to_vector(e, key));
  return pts;
}

void reject_unknown_keys(const nlohmann::json& cfg, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok{"kind"};
  for (const char* a : allowed) ok.insert(a);
  for (const auto& item : cfg.items())
    if (!ok.count(item.key())) invalid("unknown key '" + item.key() + "'");
}

struct Validator {
  int* state_dim;
  int* obs_dim;

  void operator()(const ExpStateNoise& m) const {
    if (!(std::isfinite(m.mean_x) && m.mean_x > 0)) invalid("mean_x must be > 0");
    if (!(std::isfinite(m.noise_factor) && m.noise_factor >= 0)) invalid("noise_factor must be >= 0");
    *state_dim = 1;
    *obs_dim = 1;
  }
  void operator()(const CommFading& m) const {
    if (!(std::isfinite(m.var_z) && m.var_z > 0)) invalid("var_z must be > 0");
    if (!(std::isfinite(m.rayleigh_scale) && m.rayleigh_scale > 0)) invalid("rayleigh_scale must be > 0");
    if (!(std::isfinite(m.var_w) && m.var_w >= 0)) invalid("var_w must be >= 0");
    *state_dim = 2;
    *obs_dim = 1;
  }
  void operator()(const GaussianLinear& m) const {
    const auto M = m.prior_mean.size();
    if (M == 0) invalid("prior_mean must be nonempty");
    require_finite(m.prior_mean, "prior_mean");
    if (m.prior_cov.rows() != M) invalid("prior_cov must be M x M");
    require_psd(m.prior_cov, "prior_cov");
    if (m.obs_matrix.cols() != M || m.obs_matrix.rows() == 0) invalid("obs_matrix must be N x M");
    if (!m.obs_matrix.allFinite()) invalid("obs_matrix has non-finite entries");
    if (m.noise_cov.rows() != m.obs_matrix.rows()) invalid("noise_cov must be N x N");
    require_psd(m.noise_cov, "noise_cov");
    *state_dim = static_cast<int>(M);
    *obs_dim = static_cast<int>(m.obs_matrix.rows());
  }
  void operator()(const DiscreteJoint& m) const {
    if (m.xs.empty() || m.ys.empty()) invalid("discrete support must be nonempty");
    const auto M = m.xs.front().size();
    const auto N = m.ys.front().size();
    if (M == 0 || N == 0) invalid("support points must be nonempty vectors");
    for (const auto& x : m.xs) {
      if (x.size() != M) invalid("all x support points must share one dimension");
      require_finite(x, "x");
    }
    for (const auto& y : m.ys) {
      if (y.size() != N) invalid("all y support points must share one dimension");
      require_finite(y, "y");
    }
    if (m.p.rows() != static_cast<Eigen::Index>(m.xs.size()) || m.p.cols() != static_cast<Eigen::Index>(m.ys.size()))
      invalid("p must have one row per x point and one column per y point");
    if (!m.p.allFinite() || m.p.minCoeff() < 0) invalid("probabilities must be finite and nonnegative");
    if (std::abs(m.p.sum() - 1.0) > 1e-12) {
      std::ostringstream os;
      os.precision(17);
      os << "probabilities sum to " << m.p.sum() << ", expected 1";
      invalid(os.str());
    }
    *state_dim = static_cast<int>(M);
    *obs_dim = static_cast<int>(N);
  }
};

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var)) - 0.5 * d * d / var;
}

double log_mvn_pdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::UnsupportedKind, "density requires a positive definite covariance");
  const Vector z = llt.matrixL().solve(x - mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * kLogTwoPi + log_det + z.squaredNorm());
}

// Symmetric square root factor that tolerates semidefinite covariances.
Matrix psd_factor(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

class Sampler {
 public:
  explicit Sampler(const ModelSpec& model) : model_(model) {
    if (model.kind() == ModelKind::gaussian_linear) {
      const auto& g = model.as<GaussianLinear>();
      prior_factor_ = psd_factor(g.prior_cov);
      noise_factor_ = psd_factor(g.noise_cov);
    } else if (model.kind() == ModelKind::discrete) {
      const auto& d = model.as<DiscreteJoint>();
      cumulative_.reserve(static_cast<std::size_t>(d.p.size()));
      double acc = 0.0;
      for (Eigen::Index i = 0; i < d.p.rows(); ++i)
        for (Eigen::Index j = 0; j < d.p.cols(); ++j) cumulative_.push_back(acc += d.p(i, j));
    }
  }

  JointSample draw(std::uint64_t seed, std::uint64_t index) const {
    CounterRng rng(seed, index);
    std::normal_distribution<double> normal(0.0, 1.0);
    switch (model_.kind()) {
      case ModelKind::exp_state_noise: {
        const auto& m = model_.as<ExpStateNoise>();
        const double x = -m.mean_x * std::log(rng.uniform_open());
        const double y = x + std::sqrt(m.noise_factor) * x * normal(rng);
        return {Vector::Constant(1, x), Vector::Constant(1, y)};
      }
      case ModelKind::comm_fading: {
        const auto& m = model_.as<CommFading>();
        const double z = std::sqrt(m.var_z) * normal(rng);
        const double h = m.rayleigh_scale * std::sqrt(-2.0 * std::log(rng.uniform_open()));
        const double w = std::sqrt(m.var_w) * normal(rng);
        Vector x(2);
        x << z, h;
        return {x, Vector::Constant(1, h * z + w)};
      }
      case ModelKind::gaussian_linear: {
        const auto& g = model_.as<GaussianLinear>();
        Vector xi(g.prior_mean.size());
        for (auto& v : xi) v = normal(rng);
        Vector x = g.prior_mean + prior_factor_ * xi;
        Vector eta(g.noise_cov.rows());
        for (auto& v : eta) v = normal(rng);
        Vector y = g.obs_matrix * x + noise_factor_ * eta;
        return {std::move(x), std::move(y)};
      }
      case ModelKind::discrete: {
        const auto& d = model_.as<DiscreteJoint>();
        const double u = rng.uniform_open() * cumulative_.back();
        auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
        auto flat = static_cast<Eigen::Index>(std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                                                      static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
        // Skip zero-probability cells that share a cumulative value.
        while (flat > 0 && d.p(flat / d.p.cols(), flat % d.p.cols()) == 0.0) --flat;
        return {d.xs[static_cast<std::size_t>(flat / d.p.cols())], d.ys[static_cast<std::size_t>(flat % d.p.cols())]};
      }
    }
    throw Error(ErrorCode::UnknownKind, "unhandled model kind");
  }

 private:
  const ModelSpec& model_;
  Matrix prior_factor_;
  Matrix noise_factor_;
  std::vector<double> cumulative_;
};

}  // namespace

std::string_view kind_name(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::exp_state_noise: return "exp_state_noise";
    case ModelKind::comm_fading: return "comm_fading";
    case ModelKind::gaussian_linear: return "gaussian_linear";
    case ModelKind::discrete: return "discrete";
  }
  return "unknown";
}

ModelSpec::ModelSpec(Params params) : params_(std::move(params)) {
  std::visit(Validator{&state_dim_, &obs_dim_}, params_);
}

ModelSpec build_model(const nlohmann::json& cfg) {
  if (!cfg.is_object()) invalid("model config must be a JSON object");
  if (!cfg.contains("kind") || !cfg.at("kind").is_string())
    throw Error(ErrorCode::UnknownKind, "model config lacks a string 'kind'");
  const auto kind = cfg.at("kind").get<std::string>();

  if (kind == "exp_state_noise") {
    reject_unknown_keys(cfg, {"mean_x", "noise_factor"});
    ExpStateNoise m;
    m.mean_x = get_number(cfg, "mean_x", m.mean_x);
    m.noise_factor = get_number(cfg, "noise_factor", m.noise_factor);
    return ModelSpec(m);
  }
  if (kind == "comm_fading") {
    reject_unknown_keys(cfg, {"var_z", "rayleigh_scale", "rayleigh_rate", "var_w"});
    CommFading m;
    m.var_z = get_number(cfg, "var_z", m.var_z);
    m.var_w = get_number(cfg, "var_w", m.var_w);
    if (cfg.contains("rayleigh_scale") && cfg.contains("rayleigh_rate"))
      invalid("give either rayleigh_scale or rayleigh_rate, not both");
    m.rayleigh_scale = get_number(cfg, "rayleigh_scale", m.rayleigh_scale);
    if (cfg.contains("rayleigh_rate")) {
      const double rate = get_number(cfg, "rayleigh_rate", 0.0);
      if (!(rate > 0)) invalid("rayleigh_rate must be > 0");
      m.rayleigh_scale = 1.0 / rate;
    }
    return ModelSpec(m);
  }
  if (kind == "gaussian_linear") {
    reject_unknown_keys(cfg, {"prior_mean", "prior_cov", "obs_matrix", "noise_cov"});
    for (const char* key : {"prior_mean", "prior_cov", "obs_matrix", "noise_cov"})
      if (!cfg.contains(key)) invalid(std::string("missing '") + key + "'");
    GaussianLinear m;
    m.prior_mean = to_vector(cfg.at("prior_mean"), "prior_mean");
    m.prior_cov = to_matrix(cfg.at("prior_cov"), "prior_cov");
    m.obs_matrix = to_matrix(cfg.at("obs_matrix"), "obs_matrix");
    m.noise_cov = to_matrix(cfg.at("noise_cov"), "noise_cov");
    return ModelSpec(m);
  }
  if (kind == "discrete") {
    reject_unknown_keys(cfg, {"x", "y", "p"});
    for (const char* key : {"x", "y", "p"})
      if (!cfg.contains(key)) invalid(std::string("missing '") + key + "'");
    DiscreteJoint m;
    m.xs = to_points(cfg.at("x"), "x");
    m.ys = to_points(cfg.at("y"), "y");
    m.p = to_matrix(cfg.at("p"), "p");
    return ModelSpec(m);
  }
  throw Error(ErrorCode::UnknownKind, "unrecognized model kind '" + kind + "'");
}

ModelSpec load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model file " + path.string());
  nlohmann::json cfg;
  try {
    in >> cfg;
  } catch (const nlohmann::json::exception& e) {
    invalid("malformed JSON in " + path.string() + ": " + e.what());
  }
  return build_model(cfg);
}

nlohmann::json model_to_json(const ModelSpec& model) {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  auto mat = [&](const Matrix& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
    return rows;
  };
  nlohmann::json out;
  out["kind"] = kind_name(model.kind());
  switch (model.kind()) {
    case ModelKind::exp_state_noise: {
      const auto& m = model.as<ExpStateNoise>();
      out["mean_x"] = m.mean_x;
      out["noise_factor"] = m.noise_factor;
      break;
    }
    case ModelKind::comm_fading: {
      const auto& m = model.as<CommFading>();
      out["var_z"] = m.var_z;
      out["rayleigh_scale"] = m.rayleigh_scale;
      out["var_w"] = m.var_w;
      break;
    }
    case ModelKind::gaussian_linear: {
      const auto& m = model.as<GaussianLinear>();
      out["prior_mean"] = vec(m.prior_mean);
      out["prior_cov"] = mat(m.prior_cov);
      out["obs_matrix"] = mat(m.obs_matrix);
      out["noise_cov"] = mat(m.noise_cov);
      break;
    }
    case ModelKind::discrete: {
      const auto& m = model.as<DiscreteJoint>();
      auto pts = [&](const std::vector<Vector>& ps) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& p : ps) a.push_back(vec(p));
        return a;
      };
      out["x"] = pts(m.xs);
      out["y"] = pts(m.ys);
      out["p"] = mat(m.p);
      break;
    }
  }
  return out;
}

ModelSpec scenario_a() { return ModelSpec(ExpStateNoise{}); }

ModelSpec scenario_b(double var_w, double rayleigh_scale) {
  CommFading m;
  m.var_w = var_w;
  m.rayleigh_scale = rayleigh_scale;
  return ModelSpec(m);
}

double log_joint_density(const ModelSpec& model, const Vector& x, const Vector& y) {
  if (x.size() != model.state_dim() || y.size() != model.obs_dim())
    invalid("x / y dimensions do not match the model");
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  switch (model.kind()) {
    case ModelKind::exp_state_noise: {
      const auto& m = model.as<ExpStateNoise>();
      if (m.noise_factor == 0.0)
        throw Error(ErrorCode::UnsupportedKind, "noise_factor = 0 has a degenerate (Dirac) likelihood");
      const double xv = x(0);
      if (!(xv > 0)) return neg_inf;
      return std::log(m.rate()) - m.rate() * xv + log_normal_pdf(y(0), xv, m.noise_factor * xv * xv);
    }
    case ModelKind::comm_fading: {
      const auto& m = model.as<CommFading>();
      if (m.var_w == 0.0)
        throw Error(ErrorCode::UnsupportedKind, "var_w = 0 has a degenerate (Dirac) likelihood");
      const double z = x(0);
      const double h = x(1);
      if (!(h > 0)) return neg_inf;
      const double s2 = m.rayleigh_scale * m.rayleigh_scale;
      const double log_h = std::log(h) - std::log(s2) - 0.5 * h * h / s2;
      return log_normal_pdf(z, 0.0, m.var_z) + log_h + log_normal_pdf(y(0), h * z, m.var_w);
    }
    case ModelKind::gaussian_linear: {
      const auto& g = model.as<GaussianLinear>();
      return log_mvn_pdf(x, g.prior_mean, g.prior_cov) + log_mvn_pdf(y, g.obs_matrix * x, g.noise_cov);
    }
    case ModelKind::discrete:
      throw Error(ErrorCode::UnsupportedKind, "discrete models have a joint table, not a density");
  }
  return neg_inf;
}

double joint_density(const ModelSpec& model, const Vector& x, const Vector& y) {
  return std::exp(log_joint_density(model, x, y));
}

JointSample sample_one(const ModelSpec& model, std::uint64_t seed, std::uint64_t index) {
  return Sampler(model).draw(seed, index);
}

std::vector<JointSample> sample_joint(const ModelSpec& model, std::size_t n, std::uint64_t seed) {
  std::vector<JointSample> out(n);
  const Sampler sampler(model);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i)
    out[static_cast<std::size_t>(i)] = sampler.draw(seed, static_cast<std::uint64_t>(i));
  return out;
}

Scale1D observation_scale(const ModelSpec& model) {
  switch (model.kind()) {
    case ModelKind::exp_state_noise: {
      const auto& m = model.as<ExpStateNoise>();
      // Var Y = Var X + E[noise_factor X^2] = mean^2 (1 + 2 noise_factor).
      return {m.mean_x, m.mean_x * std::sqrt(1.0 + 2.0 * m.noise_factor)};
    }
    case ModelKind::comm_fading: {
      const auto& m = model.as<CommFading>();
      const double eh2 = 2.0 * m.rayleigh_scale * m.rayleigh_scale;
      return {0.0, std::sqrt(m.var_z * eh2 + m.var_w)};
    }
    case ModelKind::gaussian_linear: {
      const auto& g = model.as<GaussianLinear>();
      const Vector mean = g.obs_matrix * g.prior_mean;
      const Matrix cov = g.obs_matrix * g.prior_cov * g.obs_matrix.transpose() + g.noise_cov;
      return {mean(0), std::sqrt(std::max(cov(0, 0), 1e-300))};
    }
    case ModelKind::discrete: {
      const auto& d = model.as<DiscreteJoint>();
      double lo = d.ys.front()(0), hi = lo;
      for (const auto& y : d.ys) {
        lo = std::min(lo, y(0));
        hi = std::max(hi, y(0));
      }
      return {0.5 * (lo + hi), std::max(0.5 * (hi - lo), 1.0)};
    }
  }
  return {0.0, 1.0};
}

}  // namespace riskmmse
