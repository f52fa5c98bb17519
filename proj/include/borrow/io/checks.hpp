#pragma once

#include "borrow/model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace borrow::io {

/// Outcome of one oracle comparison suite.
struct CheckResult {
  std::string name;
  int instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct CheckProblem {
  ModelSpec spec;
  Eigen::VectorXd y;
};

/// Engine against the one-way closed forms on seeded problems (relative error).
CheckResult check_oneway(int problems = 100, std::uint64_t seed = 1);
/// Engine W against the dense inverse (absolute error).
CheckResult check_dense(const std::vector<CheckProblem>& problems);
/// W against H + H2 (I - H) (absolute error).
CheckResult check_hat(const std::vector<CheckProblem>& problems);
/// Sherman-Morrison cluster deletion against full refits (absolute error).
CheckResult check_deletion(const std::vector<CheckProblem>& problems);

/// Seeded random mixed models.
std::vector<CheckProblem> seeded_problems(int count, std::uint64_t first_seed, int max_obs = 300);

}  // namespace borrow::io
