#pragma once

#include "borrow/covariance.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <span>
#include <vector>

namespace borrow {

using RowSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Hierarchical normal regression
///   y | beta ~ N(X1 beta1 + X2 beta2, Phi),  beta1 ~ N(0, C),  beta2 ~ N(0, Sigma)
/// with Phi diagonal. An all-zero (or empty) fixed prior precision encodes the flat prior.
struct ModelSpec {
  Eigen::MatrixXd fixed_design;                  // X1, N x P1
  SparseMatrix random_design;                    // X2, N x P2 (P2 may be 0)
  Eigen::VectorXd noise_variances;               // diagonal of Phi
  Eigen::MatrixXd fixed_prior_precision;         // C^-1, P1 x P1; empty means zero
  std::vector<CovarianceStructure> random_structure;  // block-diagonal Sigma^-1, in order

  Eigen::Index n_obs() const { return fixed_design.rows(); }
};

/// Immutable, validated model. Copies share state.
class ValidatedModel {
 public:
  Eigen::Index n_obs() const { return state_->design.rows(); }
  Eigen::Index n_fixed() const { return state_->spec.fixed_design.cols(); }
  Eigen::Index n_random() const { return state_->spec.random_design.cols(); }
  Eigen::Index n_coef() const { return state_->design.cols(); }

  const ModelSpec& spec() const { return state_->spec; }
  /// X = [X1 X2], row-major so observation rows are cheap to read.
  const RowSparseMatrix& design() const { return state_->design; }
  const Eigen::VectorXd& noise_variances() const { return state_->spec.noise_variances; }
  const Eigen::MatrixXd& fixed_prior_precision() const { return state_->fixed_prior; }
  const PrecisionMatrix& random_precision() const { return state_->random_precision; }
  bool flat_fixed_prior() const { return state_->flat_prior; }

  /// V^-1 = X' Phi^-1 X + blockdiag(C^-1, Sigma^-1).
  const SparseMatrix& posterior_precision() const { return state_->posterior_precision; }

 private:
  struct State {
    ModelSpec spec;
    RowSparseMatrix design;
    Eigen::MatrixXd fixed_prior;
    PrecisionMatrix random_precision;
    SparseMatrix posterior_precision;
    bool flat_prior = true;
  };

  explicit ValidatedModel(std::shared_ptr<const State> state) : state_(std::move(state)) {}
  friend ValidatedModel validate_spec(ModelSpec spec);

  std::shared_ptr<const State> state_;
};

/// Checks dimensions, 1 in span(X1), positive noise variances and a
/// Cholesky-factorizable posterior precision.
ValidatedModel validate_spec(ModelSpec spec);

/// Borrower clusters: observations with identical design rows and noise variance.
struct ClusterIndex {
  std::vector<int> cluster_of;              // per observation
  std::vector<std::vector<int>> members;    // per cluster, ascending

  int count() const { return static_cast<int>(members.size()); }
  int size(int cluster) const { return static_cast<int>(members[cluster].size()); }
  bool same_cluster(int i, int j) const { return cluster_of[i] == cluster_of[j]; }
};

/// Cluster ids follow order of first appearance.
ClusterIndex detect_clusters(const ValidatedModel& model);

/// Copy of `spec` with the listed observation rows removed.
ModelSpec drop_rows(const ModelSpec& spec, std::span<const int> rows);

/// `values` with the listed entries removed (companion of drop_rows for responses).
Eigen::VectorXd drop_entries(const Eigen::VectorXd& values, std::span<const int> rows);

}  // namespace borrow
