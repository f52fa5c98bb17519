#pragma once

#include "borrow/model.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace borrow {

struct NelderMeadOptions {
  int max_iterations = 500;
  double f_tolerance = 1e-9;   // relative spread of vertex values
  double x_tolerance = 1e-7;   // simplex diameter (max-norm) in the optimizer coordinates
  double initial_step = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimization. Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const NelderMeadOptions& options = {});

/// Which variance parameters REML is free to move. Everything else stays at the value
/// carried by the ModelSpec.
struct TermFitPlan {
  bool sigma2 = true;
  bool rho_space = false;
  bool rho_time = false;
};

struct VarianceFitPlan {
  bool phi_scale = true;             // one multiplier on every noise variance
  std::vector<TermFitPlan> terms;    // one per random term; missing entries mean "all fixed"
  NelderMeadOptions optimizer{};
};

struct TermEstimate {
  double sigma2 = 1.0;      // for DensePrecision: covariance multiplier
  double rho_space = 0.0;
  double rho_time = 0.0;
};

struct VarianceEstimates {
  double phi_scale = 1.0;
  std::vector<TermEstimate> terms;
  double log_restricted_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  bool at_boundary = false;
  std::vector<std::string> warnings;  // "NonConvergence: ...", "BoundaryWarning: ..."
};

/// Restricted Gaussian log-likelihood of y with beta1 profiled out (flat in beta1 regardless
/// of the model's fixed prior), at the variances carried by `spec`.
double restricted_log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& y);

/// Current variance parameters of every term (sigma2 multiplier 1 for dense precisions).
std::vector<TermEstimate> current_terms(const ModelSpec& spec);

/// Spec with noise variances multiplied by phi_scale and term parameters replaced.
ModelSpec apply_estimates(const ModelSpec& spec, const VarianceEstimates& estimates);

/// REML over log variances and logit dependence parameters; at most 4 free parameters.
/// Iteration-cap and boundary outcomes are reported through flags and warnings.
VarianceEstimates fit_variance_reml(const ModelSpec& spec, const Eigen::VectorXd& y,
                                    const VarianceFitPlan& plan);

}  // namespace borrow
