#include "borrow/synthetic.hpp"

#include "borrow/errors.hpp"

#include <numeric>
#include <vector>

namespace borrow {

namespace {

using Rng = std::mt19937_64;

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Adjacency random_connected_graph(Rng& rng, int nodes) {
  std::vector<std::pair<int, int>> edges;
  for (int k = 1; k < nodes; ++k) edges.emplace_back(uniform_int(rng, 0, k - 1), k);
  const int extra = uniform_int(rng, 0, nodes);
  for (int e = 0; e < extra; ++e) {
    int a = uniform_int(rng, 0, nodes - 1);
    int b = uniform_int(rng, 0, nodes - 1);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    bool dup = false;
    for (auto [u, v] : edges) dup = dup || (std::min(u, v) == a && std::max(u, v) == b);
    if (!dup) edges.emplace_back(a, b);
  }
  return Adjacency::from_edges(nodes, edges);
}

void append_indicator(std::vector<Eigen::Triplet<double>>& triplets, const std::vector<int>& level, int offset) {
  for (std::size_t i = 0; i < level.size(); ++i) triplets.emplace_back(static_cast<int>(i), offset + level[i], 1.0);
}

SyntheticProblem attempt(Rng& rng, const RandomModelOptions& options) {
  const int n = uniform_int(rng, options.min_obs, options.max_obs);
  SyntheticProblem out;
  ModelSpec& spec = out.spec;

  // Fixed part: intercept or a full one-hot partition, plus discrete covariates so rows repeat.
  const bool partition = uniform_int(rng, 0, 1) == 1;
  const int covariates = uniform_int(rng, 0, 2);
  const int levels = partition ? uniform_int(rng, 2, 3) : 1;
  spec.fixed_design = Eigen::MatrixXd::Zero(n, levels + covariates);
  for (int i = 0; i < n; ++i) {
    spec.fixed_design(i, uniform_int(rng, 0, levels - 1)) = 1.0;
    for (int c = 0; c < covariates; ++c) spec.fixed_design(i, levels + c) = uniform_int(rng, -2, 2) * 0.5;
  }
  if (!options.flat_prior) {
    spec.fixed_prior_precision = Eigen::MatrixXd::Zero(levels + covariates, levels + covariates);
    for (int k = 0; k < levels + covariates; ++k) spec.fixed_prior_precision(k, k) = uniform(rng, 0.05, 2.0);
  }

  std::vector<Eigen::Triplet<double>> triplets;
  int p2 = 0;
  const int terms = uniform_int(rng, 1, 2);
  for (int t = 0; t < terms; ++t) {
    int kind = uniform_int(rng, 0, 2);
    if (kind == 1 && !options.allow_car) kind = 0;
    if (kind == 2 && !options.allow_spacetime) kind = 0;
    std::vector<int> level(n);
    if (kind == 0) {
      const int groups = uniform_int(rng, 2, 10);
      for (int& l : level) l = uniform_int(rng, 0, groups - 1);
      spec.random_structure.push_back(IidBlocks{{IidBlock{groups, uniform(rng, 0.2, 3.0)}}});
      append_indicator(triplets, level, p2);
      p2 += groups;
    } else if (kind == 1) {
      const int nodes = uniform_int(rng, 3, 8);
      for (int& l : level) l = uniform_int(rng, 0, nodes - 1);
      spec.random_structure.push_back(
          CarStructure{uniform(rng, 0.2, 3.0), uniform(rng, 0.0, 0.95), random_connected_graph(rng, nodes)});
      append_indicator(triplets, level, p2);
      p2 += nodes;
    } else {
      const int nodes = uniform_int(rng, 2, 5);
      const int periods = uniform_int(rng, 2, 4);
      for (int& l : level) l = uniform_int(rng, 0, nodes * periods - 1);
      spec.random_structure.push_back(SpaceTimeAr{uniform(rng, 0.2, 3.0), uniform(rng, 0.0, 0.95),
                                                  uniform(rng, 0.0, 0.95), random_connected_graph(rng, nodes),
                                                  periods});
      append_indicator(triplets, level, p2);
      p2 += nodes * periods;
    }
  }
  spec.random_design.resize(n, p2);
  spec.random_design.setFromTriplets(triplets.begin(), triplets.end());

  const double noise_levels[] = {0.5, 1.0, 2.0};
  spec.noise_variances.resize(n);
  for (int i = 0; i < n; ++i) spec.noise_variances(i) = noise_levels[uniform_int(rng, 0, 2)];

  std::normal_distribution<double> normal;
  out.y.resize(n);
  for (int i = 0; i < n; ++i) out.y(i) = normal(rng) + 0.5 * spec.fixed_design(i, 0);
  return out;
}

}  // namespace

SyntheticProblem random_mixed_model(std::uint64_t seed, const RandomModelOptions& options) {
  Rng rng(seed);
  for (int tries = 0; tries < 100; ++tries) {
    SyntheticProblem p = attempt(rng, options);
    try {
      validate_spec(p.spec);
      return p;
    } catch (const Error&) {
      // rank-deficient draw; try again from the same stream
    }
  }
  throw NotPositiveDefinite("could not draw a valid random model");
}

ModelSpec oneway_model(const OneWayProblem& problem) {
  const int j_count = static_cast<int>(problem.sizes.size());
  const int n = std::accumulate(problem.sizes.begin(), problem.sizes.end(), 0);
  ModelSpec spec;
  spec.fixed_design = Eigen::MatrixXd::Ones(n, 1);
  spec.noise_variances.resize(n);
  std::vector<Eigen::Triplet<double>> triplets;
  int row = 0;
  for (int j = 0; j < j_count; ++j) {
    for (int k = 0; k < problem.sizes[j]; ++k, ++row) {
      triplets.emplace_back(row, j, 1.0);
      spec.noise_variances(row) = problem.noise_variances[j];
    }
  }
  spec.random_design.resize(n, j_count);
  spec.random_design.setFromTriplets(triplets.begin(), triplets.end());
  spec.random_structure.push_back(IidBlocks{{IidBlock{j_count, problem.sigma2}}});
  return spec;
}

SyntheticProblem simulate_oneway(std::uint64_t seed, int clusters, int per_cluster, double sigma, double phi,
                                 double mu) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  OneWayProblem p;
  p.sizes.assign(clusters, per_cluster);
  p.noise_variances.assign(clusters, 1.0);
  p.sigma2 = 1.0;
  SyntheticProblem out;
  out.spec = oneway_model(p);
  out.y.resize(clusters * per_cluster);
  int row = 0;
  for (int j = 0; j < clusters; ++j) {
    const double alpha = sigma * normal(rng);
    for (int k = 0; k < per_cluster; ++k, ++row) out.y(row) = mu + alpha + phi * normal(rng);
  }
  return out;
}

SyntheticProblem balanced_two_factor(std::uint64_t seed, int counties, int per_cell, double sigma2, double phi2) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const int n = 2 * counties * per_cell;
  std::vector<double> u(counties);
  std::vector<double> alpha(counties);
  for (int j = 0; j < counties; ++j) {
    u[j] = normal(rng);
    alpha[j] = std::sqrt(sigma2) * normal(rng);
  }
  SyntheticProblem out;
  ModelSpec& spec = out.spec;
  spec.fixed_design = Eigen::MatrixXd::Zero(n, 3);
  spec.noise_variances = Eigen::VectorXd::Constant(n, phi2);
  out.y.resize(n);
  std::vector<Eigen::Triplet<double>> triplets;
  int row = 0;
  for (int j = 0; j < counties; ++j) {
    for (int k = 0; k < 2; ++k) {
      for (int r = 0; r < per_cell; ++r, ++row) {
        spec.fixed_design(row, k) = 1.0;
        spec.fixed_design(row, 2) = u[j];
        triplets.emplace_back(row, j, 1.0);
        out.y(row) = 0.5 * k + 0.7 * u[j] + alpha[j] + std::sqrt(phi2) * normal(rng);
      }
    }
  }
  spec.random_design.resize(n, counties);
  spec.random_design.setFromTriplets(triplets.begin(), triplets.end());
  spec.random_structure.push_back(IidBlocks{{IidBlock{counties, sigma2}}});
  return out;
}

Adjacency grid_adjacency(int rows, int cols) {
  std::vector<std::pair<int, int>> edges;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int v = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(v, v + 1);
      if (r + 1 < rows) edges.emplace_back(v, v + cols);
    }
  }
  return Adjacency::from_edges(rows * cols, edges);
}

}  // namespace borrow
