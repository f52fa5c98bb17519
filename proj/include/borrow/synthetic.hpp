#pragma once

// Seeded problem generators for property tests and the acceptance suite.

#include "borrow/model.hpp"
#include "borrow/oracles.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace borrow {

struct SyntheticProblem {
  ModelSpec spec;
  Eigen::VectorXd y;
};

struct RandomModelOptions {
  int min_obs = 20;
  int max_obs = 200;
  bool allow_car = true;
  bool allow_spacetime = true;
  bool flat_prior = true;
};

/// Random mixed model with repeated design rows, heteroskedastic noise and a mix of iid,
/// CAR and space-time terms. Always passes validate_spec.
SyntheticProblem random_mixed_model(std::uint64_t seed, const RandomModelOptions& options = {});

/// Intercept plus one-hot cluster effects with clusters laid out contiguously; sigma2 > 0.
ModelSpec oneway_model(const OneWayProblem& problem);

/// One-way data y = mu + alpha_j + e with unit noise variances and sigma2 = 1 as starting values.
SyntheticProblem simulate_oneway(std::uint64_t seed, int clusters, int per_cluster, double sigma, double phi,
                                 double mu = 0.0);

/// Two basement-style intercepts, a county-level covariate and county effects, with
/// `per_cell` observations in every (level, county) cell.
SyntheticProblem balanced_two_factor(std::uint64_t seed, int counties, int per_cell, double sigma2, double phi2);

/// Rook adjacency on a rows x cols grid, node index r * cols + c.
Adjacency grid_adjacency(int rows, int cols);

}  // namespace borrow
