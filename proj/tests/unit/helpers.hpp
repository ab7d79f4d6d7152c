#pragma once

#include <cmath>
#include <initializer_list>

#include <doctest.h>

#include "riskmmse/error.hpp"
#include "riskmmse/models.hpp"

namespace testing {

inline riskmmse::Vector vec(std::initializer_list<double> v) {
  riskmmse::Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

inline riskmmse::Vector scalar(double y) { return riskmmse::Vector::Constant(1, y); }

inline riskmmse::ModelSpec two_point() {
  return riskmmse::build_model(
      nlohmann::json::parse(R"({"kind":"discrete","x":[0,3],"y":[0],"p":[[0.6666666666666666],[0.3333333333333333]]})"));
}

inline riskmmse::ModelSpec symmetric_two_point() {
  return riskmmse::build_model(nlohmann::json::parse(R"({"kind":"discrete","x":[0,2],"y":[0],"p":[[0.5],[0.5]]})"));
}

// X ~ N(0, 1), Y = X + w, w ~ N(0, 1).
inline riskmmse::ModelSpec standard_gaussian() {
  return riskmmse::build_model(nlohmann::json::parse(
      R"({"kind":"gaussian_linear","prior_mean":[0],"prior_cov":[[1]],"obs_matrix":[[1]],"noise_cov":[[1]]})"));
}

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace testing

#define CHECK_ERROR_CODE(expr, ecode)                    \
  do {                                                   \
    bool thrown_ = false;                                \
    try {                                                \
      (void)(expr);                                      \
    } catch (const riskmmse::Error& e_) {                \
      thrown_ = true;                                    \
      CHECK_MESSAGE(e_.code() == (ecode), e_.what());    \
    }                                                    \
    CHECK_MESSAGE(thrown_, "expected " #ecode);          \
  } while (0)
