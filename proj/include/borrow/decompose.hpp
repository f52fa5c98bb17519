#pragma once

#include "borrow/model.hpp"
#include "borrow/partition.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace borrow {

/// Factorized V^-1. Copies share the factor; solves are const and thread-safe.
class PosteriorScale {
 public:
  Eigen::Index dimension() const { return dimension_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  /// Explicit V; refuses P > 4000.
  Eigen::MatrixXd covariance() const;

 private:
  friend PosteriorScale compute_scale(const ValidatedModel& model);
  std::shared_ptr<const Eigen::SimplicialLLT<SparseMatrix>> llt_;
  Eigen::Index dimension_ = 0;
};

PosteriorScale compute_scale(const ValidatedModel& model);

/// Row i of W = X V X' Phi^-1, optionally with some fixed columns conditioned out of x_i.
struct WeightRow {
  int index = 0;
  Eigen::VectorXd weights;
};

WeightRow weight_row(const ValidatedModel& model, const PosteriorScale& scale, int i,
                     std::span<const int> conditioned_columns = {});

struct RowSummary {
  double shrinkage = 0.0;   // weight on the borrower cluster
  double pooling = 0.0;     // 1 - shrinkage
  double ssbf = 0.0;        // sum of squared lender weights
  int cluster_size = 0;
  int lender_count = 0;
  std::vector<double> group_borrowing;  // indexed by partition group code
  std::vector<double> group_pssbf;
  std::vector<int> group_sizes;
};

RowSummary summarize_row(const WeightRow& row, const ClusterIndex& clusters,
                         const RelationshipPartition& partition);

struct DecomposeOptions {
  bool keep_full = false;
  std::vector<int> conditioned_columns;
  int threads = 1;
};

struct BorrowingDecomposition {
  std::vector<RowSummary> rows;
  std::optional<Eigen::MatrixXd> weights;  // full W when requested
  ClusterIndex clusters;
  RelationshipPartition partition;
  std::vector<int> active_groups;          // group codes holding at least one lender, ascending
  std::vector<int> conditioned_columns;

  std::vector<std::string> group_keys() const;
};

BorrowingDecomposition decompose_all(const ValidatedModel& model, const PosteriorScale& scale,
                                     const ClusterIndex& clusters, const RelationshipPartition& partition,
                                     const DecomposeOptions& options = {});

BorrowingDecomposition decompose_all(const ValidatedModel& model, const ClusterIndex& clusters,
                                     const RelationshipPartition& partition,
                                     const DecomposeOptions& options = {});

/// W y with an explicit weight matrix.
Eigen::VectorXd fitted_values(const Eigen::MatrixXd& weights, const Eigen::VectorXd& y);

/// x~_i' V X' Phi^-1 y for every i without forming W.
Eigen::VectorXd fitted_values(const ValidatedModel& model, const PosteriorScale& scale,
                              const Eigen::VectorXd& y, std::span<const int> conditioned_columns = {});

/// Posterior mean of the coefficients, V X' Phi^-1 y.
Eigen::VectorXd coefficient_means(const ValidatedModel& model, const PosteriorScale& scale,
                                  const Eigen::VectorXd& y);

/// V X' Phi^-1, P x N: row p holds each observation's weight on coefficient p.
Eigen::MatrixXd coefficient_weights(const ValidatedModel& model, const PosteriorScale& scale);

}  // namespace borrow
