#include "borrow/io/checks.hpp"

#include "borrow/decompose.hpp"
#include "borrow/errors.hpp"
#include "borrow/oracles.hpp"
#include "borrow/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace borrow::io {

namespace {

Eigen::MatrixXd engine_weights(const ValidatedModel& model) {
  DecomposeOptions opts;
  opts.keep_full = true;
  return *decompose_all(model, detect_clusters(model), RelationshipPartition(), opts).weights;
}

}  // namespace

CheckResult check_oneway(int problems, std::uint64_t seed) {
  CheckResult r{"oneway", 0, 0.0, 1e-10, false};
  std::mt19937_64 rng(seed);
  for (int k = 0; k < problems; ++k) {
    OneWayProblem p;
    const int j_count = std::uniform_int_distribution<int>(2, 30)(rng);
    for (int j = 0; j < j_count; ++j) {
      p.sizes.push_back(std::uniform_int_distribution<int>(1, 6)(rng));
      p.noise_variances.push_back(std::uniform_real_distribution<double>(0.2, 4.0)(rng));
    }
    p.sigma2 = std::uniform_real_distribution<double>(0.05, 3.0)(rng);
    const Eigen::MatrixXd closed = oneway_weights(p).point_weights();
    const Eigen::MatrixXd engine = engine_weights(validate_spec(oneway_model(p)));
    const Eigen::ArrayXXd rel = (engine - closed).array().abs() / closed.array().abs();
    r.max_error = std::max(r.max_error, rel.maxCoeff());
    ++r.instances;
  }
  r.passed = r.max_error < r.tolerance;
  return r;
}

CheckResult check_dense(const std::vector<CheckProblem>& problems) {
  CheckResult r{"dense", 0, 0.0, 1e-9, false};
  for (const auto& p : problems) {
    const ValidatedModel model = validate_spec(p.spec);
    r.max_error = std::max(r.max_error, (engine_weights(model) - dense_weights(model)).cwiseAbs().maxCoeff());
    ++r.instances;
  }
  r.passed = r.max_error < r.tolerance;
  return r;
}

CheckResult check_hat(const std::vector<CheckProblem>& problems) {
  CheckResult r{"hat", 0, 0.0, 1e-9, false};
  for (const auto& p : problems) {
    const ValidatedModel model = validate_spec(p.spec);
    const Eigen::MatrixXd h = hat_decomposition(model).weights();
    r.max_error = std::max(r.max_error, (engine_weights(model) - h).cwiseAbs().maxCoeff());
    ++r.instances;
  }
  r.passed = r.max_error < r.tolerance;
  return r;
}

CheckResult check_deletion(const std::vector<CheckProblem>& problems) {
  CheckResult r{"deletion", 0, 0.0, 1e-8, false};
  for (const auto& p : problems) {
    const ValidatedModel model = validate_spec(p.spec);
    const PosteriorScale scale = compute_scale(model);
    const ClusterIndex clusters = detect_clusters(model);
    for (int c = 0; c < clusters.count(); ++c) {
      DeletedFit sm, refit;
      try {
        sm = case_deleted_fit(model, scale, p.y, clusters, c);
      } catch (const SingularAfterDeletion&) {
        continue;
      }
      refit = refit_deleted(model, p.y, clusters.members[c]);
      r.max_error = std::max(r.max_error, (sm.fitted - refit.fitted).cwiseAbs().maxCoeff());
      r.max_error = std::max(r.max_error, (sm.coefficients - refit.coefficients).cwiseAbs().maxCoeff());
    }
    ++r.instances;
  }
  r.passed = r.max_error < r.tolerance;
  return r;
}

std::vector<CheckProblem> seeded_problems(int count, std::uint64_t first_seed, int max_obs) {
  std::vector<CheckProblem> out;
  RandomModelOptions opts;
  opts.max_obs = max_obs;
  for (int k = 0; k < count; ++k) {
    auto p = random_mixed_model(first_seed + static_cast<std::uint64_t>(k), opts);
    out.push_back({std::move(p.spec), std::move(p.y)});
  }
  return out;
}

}  // namespace borrow::io
