#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace riskmmse {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ModelKind { exp_state_noise, comm_fading, gaussian_linear, discrete };

std::string_view kind_name(ModelKind kind) noexcept;

/// X ~ Exponential(mean mean_x), Y | X ~ Normal(X, noise_factor * X^2).
struct ExpStateNoise {
  double mean_x = 2.0;
  double noise_factor = 9.0;

  double rate() const { return 1.0 / mean_x; }
};

/// X = [z, h], z ~ Normal(0, var_z), h ~ Rayleigh(rayleigh_scale),
/// Y = h z + w with w ~ Normal(0, var_w). var_w == 0 is the noiseless channel.
struct CommFading {
  double var_z = 2.0;
  double rayleigh_scale = 2.0;
  double var_w = 0.1;
};

/// X ~ Normal(prior_mean, prior_cov), Y = obs_matrix X + v, v ~ Normal(0, noise_cov).
struct GaussianLinear {
  Vector prior_mean;
  Matrix prior_cov;
  Matrix obs_matrix;
  Matrix noise_cov;
};

/// Finite joint table: p(i, j) = P(X = xs[i], Y = ys[j]).
struct DiscreteJoint {
  std::vector<Vector> xs;
  std::vector<Vector> ys;
  Matrix p;
};

class ModelSpec {
 public:
  using Params = std::variant<ExpStateNoise, CommFading, GaussianLinear, DiscreteJoint>;

  /// Validates the parameters; throws Error(InvalidParameter) on violation.
  explicit ModelSpec(Params params);

  ModelKind kind() const noexcept { return static_cast<ModelKind>(params_.index()); }
  int state_dim() const noexcept { return state_dim_; }
  int obs_dim() const noexcept { return obs_dim_; }
  bool is_discrete() const noexcept { return kind() == ModelKind::discrete; }

  const Params& params() const noexcept { return params_; }

  template <class T>
  const T& as() const {
    return std::get<T>(params_);
  }

 private:
  Params params_;
  int state_dim_ = 0;
  int obs_dim_ = 0;
};

/// Parses a model config record (`kind` plus flat parameter keys). Omitted
/// scalar parameters of the parametric kinds fall back to the reference
/// scenario values. Unknown keys are rejected.
ModelSpec build_model(const nlohmann::json& config);
ModelSpec load_model(const std::filesystem::path& path);
nlohmann::json model_to_json(const ModelSpec& model);

ModelSpec scenario_a();
ModelSpec scenario_b(double var_w = 0.1, double rayleigh_scale = 2.0);

/// log of prior(x) * likelihood(y | x); -inf outside the support.
double log_joint_density(const ModelSpec& model, const Vector& x, const Vector& y);
double joint_density(const ModelSpec& model, const Vector& x, const Vector& y);

struct JointSample {
  Vector x;
  Vector y;
};

/// Sample `index` of the stream identified by `seed`.
JointSample sample_one(const ModelSpec& model, std::uint64_t seed, std::uint64_t index);
std::vector<JointSample> sample_joint(const ModelSpec& model, std::size_t n, std::uint64_t seed);

/// Location and spread of the marginal of Y (first observation component),
/// used to seed searches over y.
struct Scale1D {
  double center;
  double spread;
};
Scale1D observation_scale(const ModelSpec& model);

}  // namespace riskmmse
