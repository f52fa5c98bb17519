#include "doctest.h"

#include "borrow/decompose.hpp"
#include "borrow/errors.hpp"
#include "borrow/oracles.hpp"
#include "borrow/partition.hpp"
#include "borrow/synthetic.hpp"
#include "support.hpp"

#include <numeric>
#include <random>

using namespace borrow;

namespace {

OneWayProblem two_cluster() {
  OneWayProblem p;
  p.sizes = {1, 2};
  p.noise_variances = {1.0, 1.0};
  p.sigma2 = 1.0;
  return p;
}

}  // namespace

TEST_SUITE("decompose") {

TEST_CASE("posterior scale") {
  // Flat prior, no random effects: V is the GLS scale (X' Phi^-1 X)^-1.
  ModelSpec spec;
  spec.fixed_design.resize(4, 2);
  spec.fixed_design << 1, 0, 1, 1, 1, 2, 1, 3;
  spec.noise_variances.resize(4);
  spec.noise_variances << 1, 2, 1, 0.5;
  const auto model = validate_spec(spec);
  const Eigen::MatrixXd x = spec.fixed_design;
  const Eigen::MatrixXd gls = (x.transpose() * spec.noise_variances.cwiseInverse().asDiagonal() * x).inverse();
  CHECK((compute_scale(model).covariance() - gls).cwiseAbs().maxCoeff() < 1e-12);

  const auto oneway = validate_spec(oneway_model(two_cluster()));
  CHECK(std::abs(compute_scale(oneway).covariance()(0, 0) - 6.0 / 7.0) < 1e-12);

  const auto p = random_mixed_model(17);
  const auto rm = validate_spec(p.spec);
  const auto scale = compute_scale(rm);
  const Eigen::MatrixXd v = scale.covariance();
  CHECK((v - v.transpose()).cwiseAbs().maxCoeff() < 1e-10 * v.cwiseAbs().maxCoeff());
  CHECK(Eigen::LLT<Eigen::MatrixXd>(v).info() == Eigen::Success);
  const Eigen::VectorXd probe = Eigen::VectorXd::LinSpaced(rm.n_coef(), -1.0, 2.0);
  const Eigen::VectorXd back = rm.posterior_precision() * scale.solve(probe);
  CHECK((back - probe).norm() < 1e-10 * probe.norm());
}

TEST_CASE("weight rows") {
  const auto flat = validate_spec(test_support::intercept_only(6));
  const auto s = compute_scale(flat);
  CHECK((weight_row(flat, s, 2).weights.array() - 1.0 / 6.0).abs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(weight_row(flat, s, 6), IndexOutOfRange);
  CHECK_THROWS_AS(weight_row(flat, s, -1), IndexOutOfRange);

  const auto model = validate_spec(oneway_model(two_cluster()));
  const auto row = weight_row(model, compute_scale(model), 0);
  CHECK(std::abs(row.weights(0) - 5.0 / 7.0) < 1e-12);
  CHECK(std::abs(row.weights(1) - 1.0 / 7.0) < 1e-12);
  CHECK(std::abs(row.weights(2) - 1.0 / 7.0) < 1e-12);
  CHECK(std::abs(row.weights.sum() - 1.0) < 1e-12);
}

TEST_CASE("row summaries") {
  const auto model = validate_spec(oneway_model(two_cluster()));
  const auto clusters = detect_clusters(model);
  const RelationshipPartition none;
  const auto s = summarize_row(weight_row(model, compute_scale(model), 0), clusters, none);
  CHECK(std::abs(s.shrinkage - 5.0 / 7.0) < 1e-12);
  CHECK(std::abs(s.pooling - 2.0 / 7.0) < 1e-12);
  CHECK(std::abs(s.ssbf - 2.0 / 49.0) < 1e-12);
  const double floor = s.pooling * s.pooling / s.lender_count;
  CHECK(std::abs(s.ssbf - floor) < 1e-12);

  // Everything in one cluster: no lenders.
  ModelSpec spec = test_support::intercept_only(7);
  const auto flat = validate_spec(spec);
  const auto fc = detect_clusters(flat);
  const auto fs = summarize_row(weight_row(flat, compute_scale(flat), 0), fc, none);
  CHECK(fc.count() == 1);
  CHECK(std::abs(fs.shrinkage - 1.0) < 1e-12);
  CHECK(std::abs(fs.pooling) < 1e-12);
  CHECK(fs.ssbf == 0.0);

  // Uniform weights 1/N with a borrower cluster of size 2 out of 5.
  ModelSpec split = test_support::intercept_only(5);
  const auto us = validate_spec(split);
  ClusterIndex manual;
  manual.cluster_of = {0, 0, 1, 1, 1};
  manual.members = {{0, 1}, {2, 3, 4}};
  const auto ms = summarize_row(weight_row(us, compute_scale(us), 0), manual, none);
  CHECK(std::abs(ms.shrinkage - 2.0 / 5.0) < 1e-12);
  CHECK(std::abs(ms.pooling - 3.0 / 5.0) < 1e-12);
  CHECK(std::abs(ms.ssbf - 3.0 / 25.0) < 1e-12);
}

TEST_CASE("decompose_all properties on random instances") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const auto p = random_mixed_model(seed);
    const auto model = validate_spec(p.spec);
    const auto clusters = detect_clusters(model);
    DecomposeOptions opts;
    opts.keep_full = true;
    opts.threads = 2;
    const auto d = decompose_all(model, clusters, RelationshipPartition(), opts);
    REQUIRE(d.weights);
    const Eigen::MatrixXd& w = *d.weights;
    CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-8);
    for (int i = 0; i < model.n_obs(); ++i) {
      const auto& r = d.rows[i];
      CHECK(r.shrinkage > 0.0);
      CHECK(r.shrinkage <= 1.0 + 1e-12);
      CHECK(std::abs(r.shrinkage + r.pooling - 1.0) < 1e-10);
      double pssbf = 0.0, borrow_sum = 0.0;
      for (std::size_t g = 0; g < r.group_pssbf.size(); ++g) {
        pssbf += r.group_pssbf[g];
        borrow_sum += r.group_borrowing[g];
      }
      CHECK(std::abs(pssbf - r.ssbf) < 1e-12);
      CHECK(std::abs(borrow_sum - r.pooling) < 1e-8);
      for (int j : clusters.members[clusters.cluster_of[i]]) CHECK(w(i, j) == w(i, i));
    }
    // Engine against the dense oracle.
    CHECK(test_support::max_abs(w - dense_weights(model)) < 1e-9);

    // Constant response is reproduced; fitted values agree between W and the direct path.
    const auto scale = compute_scale(model);
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(model.n_obs(), 2.5);
    CHECK((fitted_values(model, scale, c).array() - 2.5).abs().maxCoeff() < 1e-8);
    CHECK((fitted_values(w, p.y) - fitted_values(model, scale, p.y)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("threads do not change results") {
  const auto p = random_mixed_model(77);
  const auto model = validate_spec(p.spec);
  const auto clusters = detect_clusters(model);
  DecomposeOptions one, four;
  four.threads = 4;
  const auto a = decompose_all(model, clusters, RelationshipPartition(), one);
  const auto b = decompose_all(model, clusters, RelationshipPartition(), four);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].shrinkage == b.rows[i].shrinkage);
    CHECK(a.rows[i].ssbf == b.rows[i].ssbf);
  }
}

TEST_CASE("permuting y within a borrower cluster leaves fitted values unchanged") {
  const auto p = random_mixed_model(9);
  const auto model = validate_spec(p.spec);
  const auto clusters = detect_clusters(model);
  const auto scale = compute_scale(model);
  Eigen::VectorXd y = p.y;
  for (const auto& m : clusters.members) {
    if (m.size() < 2) continue;
    std::swap(y(m.front()), y(m.back()));
  }
  const Eigen::VectorXd a = fitted_values(model, scale, p.y);
  const Eigen::VectorXd b = fitted_values(model, scale, y);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fitted values") {
  const auto model = validate_spec(oneway_model(two_cluster()));
  const auto scale = compute_scale(model);
  Eigen::Vector3d y(1.0, 0.0, 0.0);
  CHECK(std::abs(fitted_values(model, scale, y)(0) - 5.0 / 7.0) < 1e-12);
  CHECK_THROWS_AS(fitted_values(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Ones(2)), DimensionError);

  // No random effects: ordinary GLS normal equations.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  ModelSpec spec;
  spec.fixed_design.resize(30, 3);
  spec.noise_variances.resize(30);
  Eigen::VectorXd yy(30);
  for (int i = 0; i < 30; ++i) {
    spec.fixed_design.row(i) << 1.0, normal(rng), normal(rng);
    spec.noise_variances(i) = 0.5 + (i % 3);
    yy(i) = normal(rng);
  }
  const auto gls = validate_spec(spec);
  const Eigen::MatrixXd x = spec.fixed_design;
  const Eigen::VectorXd pinv = spec.noise_variances.cwiseInverse();
  const Eigen::VectorXd beta =
      (x.transpose() * pinv.asDiagonal() * x).ldlt().solve(x.transpose() * pinv.cwiseProduct(yy));
  CHECK((fitted_values(gls, compute_scale(gls), yy) - x * beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("coefficient weights") {
  const auto flat = validate_spec(test_support::intercept_only(4));
  const Eigen::MatrixXd m = coefficient_weights(flat, compute_scale(flat));
  CHECK(m.rows() == 1);
  CHECK(m.cols() == 4);
  CHECK((m.array() - 0.25).abs().maxCoeff() < 1e-15);

  const auto model = validate_spec(oneway_model(two_cluster()));
  const Eigen::MatrixXd c = coefficient_weights(model, compute_scale(model));
  CHECK(c.rows() == 3);
  CHECK(std::abs(c(0, 0) - 3.0 / 7.0) < 1e-12);
  CHECK(std::abs(c(0, 1) - 2.0 / 7.0) < 1e-12);
  CHECK(std::abs(c(0, 2) - 2.0 / 7.0) < 1e-12);
}

TEST_CASE("conditioning out fixed columns on a balanced two-factor design") {
  const auto p = balanced_two_factor(5, 12, 3, 0.4, 1.0);
  const auto model = validate_spec(p.spec);
  const auto clusters = detect_clusters(model);
  const int n = static_cast<int>(model.n_obs());
  std::vector<int> county(n), level(n);
  for (int i = 0; i < n; ++i) {
    level[i] = p.spec.fixed_design(i, 1) == 1.0 ? 1 : 0;
  }
  const Eigen::MatrixXd x2 = Eigen::MatrixXd(p.spec.random_design);
  for (int i = 0; i < n; ++i) x2.row(i).maxCoeff(&county[i]);
  const RelationshipPartition part(model, {ColumnEqualRule{"county", county}, ColumnEqualRule{"basement", level}});
  DecomposeOptions opts;
  opts.conditioned_columns = {2};
  const auto d = decompose_all(model, clusters, part, opts);
  CHECK(d.active_groups.size() == 3);
  const int same_county_diff_level = 1, diff_county_same_level = 2, diff_both = 3;
  for (int i = 0; i < n; ++i) {
    const auto& r = d.rows[i];
    CHECK(std::abs(r.shrinkage + r.group_borrowing[diff_county_same_level] - 1.0) < 1e-10);
    CHECK(std::abs(r.group_borrowing[same_county_diff_level] + r.group_borrowing[diff_both]) < 1e-10);
  }
  CHECK(d.group_keys() ==
        std::vector<std::string>{"county=same;basement=diff", "county=diff;basement=same", "county=diff;basement=diff"});
}

}

TEST_SUITE("partition") {

TEST_CASE("rule outcomes and names") {
  const auto model = validate_spec(test_support::intercept_only(4));
  const std::vector<double> year{2007, 2008, 2010, 2007};
  const Adjacency g = grid_adjacency(1, 3);
  GraphDistanceRule dist{"space", {0, 1, 2, 0}, g, {0, 1, 2}};
  LagRule lag{"time", year, {0, 1, 2}};
  const RelationshipPartition part(model, {dist, lag});
  CHECK(part.group_count() == 9);
  CHECK(part.group_name(part.label(0, 1)) == "space=1;time=1");
  CHECK(part.group_name(part.label(0, 2)) == "space=2+;time=2+");
  CHECK(part.group_name(part.label(0, 3)) == "space=0;time=0");

  LagRule gap{"time", year, {1, 2}};
  CHECK_THROWS_AS(RelationshipPartition(model, {gap}), BinGapError);
  LagRule unordered{"time", year, {0, 2, 1}};
  CHECK_THROWS_AS(RelationshipPartition(model, {unordered}), BinGapError);
  ColumnEqualRule short_rule{"g", {0, 1}};
  CHECK_THROWS_AS(RelationshipPartition(model, {short_rule}), DimensionError);
}

TEST_CASE("one-way design has a single lender group") {
  OneWayProblem p;
  p.sizes = {2, 3, 1};
  p.noise_variances = {1, 1, 1};
  const auto model = validate_spec(oneway_model(p));
  const std::vector<int> g{0, 0, 1, 1, 1, 2};
  const auto clusters = detect_clusters(model);
  const auto part = relationship_partition(model, clusters, {ColumnEqualRule{"g", g}});
  const auto d = decompose_all(model, clusters, part);
  CHECK(d.group_keys() == std::vector<std::string>{"g=diff"});
}

}
