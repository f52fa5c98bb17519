#pragma once

#include "borrow/decompose.hpp"
#include "borrow/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace test_support {

inline Eigen::MatrixXd engine_weights(const borrow::ValidatedModel& model) {
  const auto scale = borrow::compute_scale(model);
  Eigen::MatrixXd w(model.n_obs(), model.n_obs());
  for (int i = 0; i < model.n_obs(); ++i) w.row(i) = borrow::weight_row(model, scale, i).weights.transpose();
  return w;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Intercept-only model with N equal-variance observations.
inline borrow::ModelSpec intercept_only(int n, double phi2 = 1.0) {
  borrow::ModelSpec spec;
  spec.fixed_design = Eigen::MatrixXd::Ones(n, 1);
  spec.random_design.resize(n, 0);
  spec.noise_variances = Eigen::VectorXd::Constant(n, phi2);
  return spec;
}

}  // namespace test_support
