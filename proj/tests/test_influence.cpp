#include "doctest.h"

#include "borrow/errors.hpp"
#include "borrow/influence.hpp"
#include "borrow/oracles.hpp"
#include "borrow/synthetic.hpp"
#include "support.hpp"

#include <random>

using namespace borrow;

namespace {

// Replicated-row regression with no random effects.
SyntheticProblem replicated_regression(std::uint64_t seed, double phi2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const int n = 40;
  SyntheticProblem p;
  p.spec.fixed_design.resize(n, 3);
  p.spec.noise_variances = Eigen::VectorXd::Constant(n, phi2);
  p.y.resize(n);
  for (int i = 0; i < n; ++i) {
    p.spec.fixed_design.row(i) << 1.0, (i % 7) * 0.5, (i % 3) - 1.0;
    p.y(i) = 0.3 + normal(rng);
  }
  return p;
}

// Cook's distance from single-row refits, averaged over a cluster.
double cooks_by_refit(const ValidatedModel& model, const Eigen::VectorXd& y, const std::vector<int>& members,
                      double s2) {
  const auto scale = compute_scale(model);
  const Eigen::VectorXd full = fitted_values(model, scale, y);
  double total = 0.0;
  for (int k : members) {
    const std::vector<int> one{k};
    const auto refit = refit_deleted(model, y, one);
    total += (full - refit.fitted).squaredNorm() / (model.n_coef() * s2);
  }
  return total / members.size();
}

}  // namespace

TEST_SUITE("influence") {

TEST_CASE("average Cook's distance matches single-deletion refits") {
  const auto p = replicated_regression(1, 1.0);
  const auto model = validate_spec(p.spec);
  const auto clusters = detect_clusters(model);
  const InfluenceAnalysis ia(model, compute_scale(model), clusters, p.y);
  for (int c = 0; c < clusters.count(); ++c) {
    const double oracle = cooks_by_refit(model, p.y, clusters.members[c], ia.residual_scale());
    CHECK(std::abs(ia.avg_cooks_distance(c) - oracle) < 1e-8);
  }

  const InfluenceAnalysis doubled(model, compute_scale(model), clusters, 2.0 * p.y);
  for (int c = 0; c < clusters.count(); ++c) {
    CHECK(std::abs(doubled.avg_cooks_distance(c) - ia.avg_cooks_distance(c)) < 1e-10);
  }
}

TEST_CASE("zero residuals give zero influence") {
  // Two fixed levels; level A responses are all equal so its residuals vanish.
  ModelSpec spec = test_support::intercept_only(6);
  spec.fixed_design.conservativeResize(6, 2);
  spec.fixed_design.col(1) << 0, 0, 0, 1, 1, 1;
  const auto model = validate_spec(spec);
  const auto scale = compute_scale(model);
  const auto clusters = detect_clusters(model);
  Eigen::VectorXd y(6);
  y << 2, 2, 2, 1, 4, 0;
  const InfluenceAnalysis ia(model, scale, clusters, y);
  CHECK(ia.residual_scale() > 0.0);
  CHECK(ia.avg_cooks_distance(0) == 0.0);
  // Level A is its own fixed effect, so deleting it leaves nothing to pool from.
  CHECK_THROWS_AS(ia.rvsi(0, 4), DegeneratePooling);
  CHECK(ia.avg_cooks_distance(1) > 0.0);

  Eigen::VectorXd flat(6);
  flat << 2, 2, 2, 5, 5, 5;
  const InfluenceAnalysis none(model, scale, clusters, flat);
  for (int i = 0; i < 6; ++i) CHECK(none.pena_si(i) == 0.0);
}

TEST_CASE("RVSI equals the squared deletion change") {
  for (std::uint64_t seed = 400; seed < 410; ++seed) {
    const auto p = random_mixed_model(seed, {30, 90});
    const auto model = validate_spec(p.spec);
    const auto scale = compute_scale(model);
    const auto clusters = detect_clusters(model);
    const InfluenceAnalysis ia(model, scale, clusters, p.y);
    for (int c = 0; c < clusters.count(); ++c) {
      const auto del = case_deleted_fit(model, scale, p.y, clusters, c);
      for (int target : {0, static_cast<int>(model.n_obs()) - 1}) {
        const double diff = ia.fitted()(target) - del.fitted(target);
        const double value = ia.rvsi(c, target);
        if (diff * diff < 1e-24) {
          CHECK(value < 1e-20);
        } else {
          CHECK(test_support::rel_err(value, diff * diff) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("RVSI under duplication of a lender cluster") {
  OneWayProblem base;
  base.sizes = {2, 3, 1, 4};
  base.noise_variances = {1.5, 1.5, 0.5, 2.0};
  base.sigma2 = 0.8;
  Eigen::VectorXd y(10);
  y << 0.1, 0.4, -1.0, -0.7, -0.2, 2.0, 0.5, 0.6, 0.2, 0.9;
  OneWayProblem doubled = base;
  doubled.sizes[2] = 2;
  Eigen::VectorXd y2(11);
  y2 << y.head(6), 2.0, y.tail(4);
  for (const auto& [problem, response] : {std::pair{base, y}, std::pair{doubled, y2}}) {
    const auto model = validate_spec(oneway_model(problem));
    const auto scale = compute_scale(model);
    const auto clusters = detect_clusters(model);
    const InfluenceAnalysis ia(model, scale, clusters, response);
    const auto del = case_deleted_fit(model, scale, response, clusters, 2);
    const double diff = ia.fitted()(0) - del.fitted(0);
    CHECK(test_support::rel_err(ia.rvsi(2, 0), diff * diff) < 1e-6);
  }
}

TEST_CASE("Pena S_i equals its single-deletion definition") {
  for (std::uint64_t seed = 500; seed < 506; ++seed) {
    const auto p = random_mixed_model(seed, {30, 70});
    const auto model = validate_spec(p.spec);
    if (model.n_obs() <= model.n_coef()) continue;
    const auto scale = compute_scale(model);
    const auto clusters = detect_clusters(model);
    const InfluenceAnalysis ia(model, scale, clusters, p.y);
    for (int i : {0, 5, static_cast<int>(model.n_obs()) - 1}) {
      double ss = 0.0;
      for (int k = 0; k < model.n_obs(); ++k) {
        const std::vector<int> one{k};
        const double change = ia.fitted()(i) - refit_deleted(model, p.y, one).fitted(i);
        ss += change * change;
      }
      const double w_ii = weight_row(model, scale, i).weights(i);
      const double oracle = ss / (model.n_coef() * ia.residual_scale() * w_ii);
      CHECK(test_support::rel_err(ia.pena_si(i), oracle) < 1e-6);
    }
  }
}

TEST_CASE("Pena S_i is constant in an intercept-only model") {
  ModelSpec spec = test_support::intercept_only(6);
  Eigen::VectorXd y(6);
  y << 1, 3, -2, 0.5, 4, 2;
  const auto model = validate_spec(spec);
  const auto clusters = detect_clusters(model);
  // Split into singleton clusters so each observation is its own deletion unit.
  ClusterIndex singles;
  for (int i = 0; i < 6; ++i) {
    singles.cluster_of.push_back(i);
    singles.members.push_back({i});
  }
  const InfluenceAnalysis ia(model, compute_scale(model), singles, y);
  for (int i = 1; i < 6; ++i) CHECK(std::abs(ia.pena_si(i) - ia.pena_si(0)) < 1e-10);
  const InfluenceAnalysis pooled(model, compute_scale(model), clusters, y);
  CHECK(std::abs(pooled.leverage(0) - 1.0 / 6.0) < 1e-12);
}

TEST_CASE("a row that fixes its own coefficient has undefined Cook's distance") {
  ModelSpec spec = test_support::intercept_only(5);
  spec.fixed_design.conservativeResize(5, 2);
  spec.fixed_design.col(1) << 0, 0, 0, 0, 1;
  const auto model = validate_spec(spec);
  const auto clusters = detect_clusters(model);
  Eigen::VectorXd y(5);
  y << 1, 2, 0, 3, 7;
  const InfluenceAnalysis ia(model, compute_scale(model), clusters, y);
  CHECK_THROWS_AS(ia.avg_cooks_distance(1), LeverageOne);
  CHECK(std::isnan(ia.avg_cooks_distance()[1]));
  CHECK(ia.avg_cooks_distance(0) >= 0.0);
}

TEST_CASE("influence is unchanged by swapping y within a borrower cluster") {
  const auto p = random_mixed_model(41);
  const auto model = validate_spec(p.spec);
  const auto scale = compute_scale(model);
  const auto clusters = detect_clusters(model);
  int target = -1;
  for (int c = 0; c < clusters.count(); ++c) {
    if (clusters.size(c) >= 2) target = c;
  }
  REQUIRE(target >= 0);
  Eigen::VectorXd y = p.y;
  std::swap(y(clusters.members[target][0]), y(clusters.members[target][1]));
  const InfluenceAnalysis a(model, scale, clusters, p.y);
  const InfluenceAnalysis b(model, scale, clusters, y);
  CHECK(std::abs(a.avg_cooks_distance(target) - b.avg_cooks_distance(target)) < 1e-12);
  CHECK(std::abs(a.rvsi(target, 0) - b.rvsi(target, 0)) < 1e-12);
  CHECK(std::abs(a.pena_si(0) - b.pena_si(0)) < 1e-10);
}

TEST_CASE("quantiles interpolate between order statistics") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 1.0) == 4.0);
  const auto s = box_stats({5, 1, 3});
  CHECK(s.min == 1);
  CHECK(s.median == 3);
  CHECK(s.max == 5);
}

TEST_CASE("impact summary") {
  const auto p = random_mixed_model(61);
  const auto model = validate_spec(p.spec);
  const auto scale = compute_scale(model);
  const auto clusters = detect_clusters(model);
  const int n = static_cast<int>(model.n_obs());
  std::vector<int> half(n);
  for (int i = 0; i < n; ++i) half[i] = i % 2;
  const RelationshipPartition part(model, {ColumnEqualRule{"parity", half}});

  const auto empty = impact_summary(model, scale, clusters, part, {});
  for (const auto& g : empty.groups) {
    CHECK(g.targets == 0);
    CHECK(g.stats.median == 0.0);
  }

  const std::vector<int> set{3, 1, 7, 11};
  const std::vector<int> reversed{11, 7, 1, 3, 3};
  const auto a = impact_summary(model, scale, clusters, part, set);
  const auto b = impact_summary(model, scale, clusters, part, reversed);
  const Eigen::MatrixXd w = dense_weights(model);
  const auto c = impact_summary(w, clusters, part, set);
  for (std::size_t g = 0; g < a.groups.size(); ++g) {
    CHECK(a.groups[g].stats.median == b.groups[g].stats.median);
    CHECK(a.groups[g].targets == c.groups[g].targets);
    CHECK(std::abs(a.groups[g].stats.median - c.groups[g].stats.median) < 1e-9);
    CHECK(a.groups[g].stats.min <= a.groups[g].stats.q1);
    CHECK(a.groups[g].stats.q1 <= a.groups[g].stats.median);
    CHECK(a.groups[g].stats.median <= a.groups[g].stats.q3);
    CHECK(a.groups[g].stats.q3 <= a.groups[g].stats.max);
  }

  // All lenders of observation 0 influential, single group: total |w| bounds the pooling factor.
  const RelationshipPartition none;
  std::vector<int> lenders;
  for (int j = 0; j < n; ++j) {
    if (!clusters.same_cluster(0, j)) lenders.push_back(j);
  }
  const auto all = impact_summary(w, clusters, none, lenders);
  const auto row0 = summarize_row(weight_row(model, scale, 0), clusters, none);
  double total = 0.0;
  for (int j : lenders) total += std::abs(w(0, j));
  CHECK(total >= row0.pooling - 1e-12);
  CHECK(all.groups[0].stats.max >= total - 1e-12);

  const std::vector<int> bad{n};
  CHECK_THROWS_AS(impact_summary(model, scale, clusters, part, bad), IndexOutOfRange);
}

}
