#include "doctest.h"

#include "borrow/errors.hpp"
#include "borrow/oracles.hpp"
#include "borrow/synthetic.hpp"
#include "support.hpp"

#include <random>

using namespace borrow;

TEST_SUITE("oracles") {

TEST_CASE("one-way closed forms") {
  OneWayProblem p;
  p.sizes = {1, 2};
  p.noise_variances = {1.0, 1.0};
  p.sigma2 = 1.0;
  const auto w = oneway_weights(p);
  CHECK(std::abs(w.tau(0) - 0.5) < 1e-15);
  CHECK(std::abs(w.tau(1) - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(w.lambda(0) - 0.5) < 1e-15);
  CHECK(std::abs(w.rho(0, 0) - 3.0 / 14.0) < 1e-15);
  CHECK(std::abs(w.rho(0, 1) - 2.0 / 7.0) < 1e-15);
  CHECK(std::abs(w.shrinkage(0) - 5.0 / 7.0) < 1e-15);
  CHECK(std::abs(w.pooling(0) - 2.0 / 7.0) < 1e-15);
  CHECK((w.rho.rowwise().sum() - w.lambda).cwiseAbs().maxCoeff() < 1e-12);

  p.sigma2 = 1e12;
  const auto independent = oneway_weights(p);
  CHECK(independent.lambda.maxCoeff() < 1e-11);
  CHECK(std::abs(independent.shrinkage(0) - 1.0) < 1e-11);

  p.sigma2 = 0.0;
  p.sizes = {1, 2, 4};
  p.noise_variances = {2.0, 2.0, 2.0};
  const Eigen::MatrixXd pooled = oneway_weights(p).point_weights();
  CHECK((pooled.array() - 1.0 / 7.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("tau increases with n and decreases with phi") {
  OneWayProblem p;
  p.sizes = {1, 2, 5, 5};
  p.noise_variances = {1.0, 1.0, 1.0, 3.0};
  p.sigma2 = 0.7;
  const auto w = oneway_weights(p);
  CHECK(w.tau(0) < w.tau(1));
  CHECK(w.tau(1) < w.tau(2));
  CHECK(w.tau(3) < w.tau(2));
  CHECK(w.tau.maxCoeff() < 1.0 / p.sigma2);
}

TEST_CASE("one-way closed forms match the dense oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    OneWayProblem p;
    const int j_count = std::uniform_int_distribution<int>(2, 8)(rng);
    for (int j = 0; j < j_count; ++j) {
      p.sizes.push_back(std::uniform_int_distribution<int>(1, 4)(rng));
      p.noise_variances.push_back(std::uniform_real_distribution<double>(0.3, 3.0)(rng));
    }
    p.sigma2 = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    const Eigen::MatrixXd closed = oneway_weights(p).point_weights();
    const Eigen::MatrixXd dense = dense_weights(validate_spec(oneway_model(p)));
    CHECK(test_support::max_abs(closed - dense) < 1e-10);
  }
}

TEST_CASE("dense weights") {
  const Eigen::MatrixXd w = dense_weights(validate_spec(test_support::intercept_only(5)));
  CHECK((w.array() - 0.2).abs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(dense_weights(validate_spec(test_support::intercept_only(3001))), SizeGuard);
}

TEST_CASE("proper fixed prior: engine matches dense weights") {
  RandomModelOptions opts;
  opts.flat_prior = false;
  for (std::uint64_t seed = 400; seed < 405; ++seed) {
    const auto model = validate_spec(random_mixed_model(seed, opts).spec);
    REQUIRE_FALSE(model.flat_fixed_prior());
    CHECK(test_support::max_abs(test_support::engine_weights(model) - dense_weights(model)) < 1e-9);
  }
}

TEST_CASE("case deletion agrees with refit") {
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    const auto p = random_mixed_model(seed, {20, 80});
    const auto model = validate_spec(p.spec);
    const auto scale = compute_scale(model);
    const auto clusters = detect_clusters(model);
    for (int c = 0; c < clusters.count(); ++c) {
      const auto sm = case_deleted_fit(model, scale, p.y, clusters, c);
      const auto refit = refit_deleted(model, p.y, clusters.members[c]);
      CHECK((sm.coefficients - refit.coefficients).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((sm.fitted - refit.fitted).cwiseAbs().maxCoeff() < 1e-8);
    }
    // Deleting a single member of a larger cluster.
    for (int c = 0; c < clusters.count(); ++c) {
      if (clusters.size(c) < 2) continue;
      const std::vector<int> one{clusters.members[c].back()};
      const auto sm = case_deleted_fit(model, scale, p.y, clusters, c, std::span<const int>(one));
      const auto refit = refit_deleted(model, p.y, one);
      CHECK((sm.fitted - refit.fitted).cwiseAbs().maxCoeff() < 1e-8);
      break;
    }
  }
}

TEST_CASE("zero-residual cluster leaves the fit unchanged") {
  // A straight line fitted exactly: every residual is zero.
  ModelSpec spec = test_support::intercept_only(6);
  spec.fixed_design.conservativeResize(6, 2);
  spec.fixed_design.col(1) << 0, 0, 1, 1, 2, 2;
  const auto m2 = validate_spec(spec);
  const auto s2 = compute_scale(m2);
  const auto c2 = detect_clusters(m2);
  Eigen::VectorXd yc(6);
  yc << 1.0, 1.0, 3.0, 3.0, 5.0, 5.0;
  const auto del = case_deleted_fit(m2, s2, yc, c2, 0);
  const Eigen::VectorXd full = coefficient_means(m2, s2, yc);
  CHECK((del.coefficients - full).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("deleting the only support of a coefficient is singular") {
  ModelSpec spec = test_support::intercept_only(3);
  spec.fixed_design.conservativeResize(3, 2);
  spec.fixed_design.col(1) << 0, 0, 1;
  const auto model = validate_spec(spec);
  const auto clusters = detect_clusters(model);
  CHECK_THROWS_AS(case_deleted_fit(model, compute_scale(model), Eigen::Vector3d(1, 2, 3), clusters, 1),
                  SingularAfterDeletion);
}

TEST_CASE("hat decomposition") {
  ModelSpec ls;
  ls.fixed_design.resize(6, 2);
  ls.fixed_design << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4, 1, 5;
  ls.noise_variances.resize(6);
  ls.noise_variances << 1, 2, 1, 2, 1, 2;
  const auto lsm = validate_spec(ls);
  const auto h0 = hat_decomposition(lsm);
  CHECK(h0.h2.cwiseAbs().maxCoeff() == 0.0);
  CHECK(test_support::max_abs(h0.weights() - dense_weights(lsm)) < 1e-12);

  for (std::uint64_t seed = 300; seed < 310; ++seed) {
    const auto p = random_mixed_model(seed);
    const auto model = validate_spec(p.spec);
    const auto hd = hat_decomposition(model);
    const Eigen::Index n = model.n_obs();
    CHECK(test_support::max_abs(hd.h * hd.h - hd.h) < 1e-10);
    CHECK((hd.h * Eigen::VectorXd::Ones(n) - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(test_support::max_abs(hd.phi_tilde * hd.phi_tilde_inv - Eigen::MatrixXd::Identity(n, n)) < 1e-9);
    CHECK(test_support::max_abs(hd.h - hd.h1 * (Eigen::MatrixXd::Identity(n, n) - hd.h2)) < 1e-9);
    CHECK(test_support::max_abs(test_support::engine_weights(model) - hd.weights()) < 1e-9);
  }
}

}
