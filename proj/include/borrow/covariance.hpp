#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace borrow {

using SparseMatrix = Eigen::SparseMatrix<double>;
using PrecisionMatrix = SparseMatrix;

/// Undirected graph over areal units: symmetric 0/1 matrix with an empty diagonal.
class Adjacency {
 public:
  Adjacency() = default;

  /// Each undirected edge listed once; a repeated edge or a self-loop is rejected.
  static Adjacency from_edges(int nodes, std::span<const std::pair<int, int>> edges);
  static Adjacency from_dense(const Eigen::MatrixXd& matrix);

  int nodes() const { return static_cast<int>(neighbours_.size()); }
  const SparseMatrix& matrix() const { return matrix_; }
  const std::vector<int>& neighbours(int node) const { return neighbours_[node]; }
  Eigen::VectorXd degrees() const;

  /// Breadth-first hop counts from `source`; -1 marks unreachable nodes.
  std::vector<int> hop_distances(int source) const;

  bool operator==(const Adjacency& other) const { return neighbours_ == other.neighbours_; }

 private:
  explicit Adjacency(std::vector<std::vector<int>> neighbours);

  std::vector<std::vector<int>> neighbours_;
  SparseMatrix matrix_;
};

struct IidBlock {
  int size = 1;
  double sigma2 = 1.0;
};

struct IidBlocks {
  std::vector<IidBlock> blocks;
};

struct DensePrecision {
  Eigen::MatrixXd precision;
};

/// Leroux CAR: precision (rho (D - A) + (1 - rho) I) / sigma2.
struct CarStructure {
  double sigma2 = 1.0;
  double rho = 0.0;
  Adjacency adjacency;
};

/// CAR field per period chained by an AR(1) in time; period-major ordering
/// (index t * J + j).
struct SpaceTimeAr {
  double sigma2 = 1.0;
  double rho_space = 0.0;
  double rho_time = 0.0;
  Adjacency adjacency;
  int periods = 1;
};

using CovarianceStructure = std::variant<IidBlocks, DensePrecision, CarStructure, SpaceTimeAr>;

int dimension(const CovarianceStructure& structure);

/// Throws on out-of-range parameters (sigma2 <= 0, rho outside [0, 1), bad sizes).
void validate(const CovarianceStructure& structure);

PrecisionMatrix precision(const CovarianceStructure& structure);

/// Block-diagonal precision of independent terms, in order.
PrecisionMatrix precision(std::span<const CovarianceStructure> terms);

PrecisionMatrix build_block_precision(std::span<const IidBlock> blocks);

/// Q(rho, A) / sigma2 with Q = rho (diag(A 1) - A) + (1 - rho) I.
PrecisionMatrix build_car_precision(double rho, const Adjacency& adjacency, double sigma2 = 1.0);

/// (I - rho H)' blockdiag(Q, ..., Q) (I - rho H) / sigma2 for `periods` copies of `q`.
PrecisionMatrix build_spacetime_precision(double rho_time, const PrecisionMatrix& q, int periods,
                                          double sigma2 = 1.0);

PrecisionMatrix block_diagonal(std::span<const PrecisionMatrix> blocks);

/// Lag-one block shift: (H a)_t = a_{t-1} for t >= 1 and zero for the first period.
class ShiftMatrix {
 public:
  ShiftMatrix(int block, int periods);

  int block() const { return block_; }
  int periods() const { return periods_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& alpha) const;
  SparseMatrix to_sparse() const;

 private:
  int block_;
  int periods_;
};

}  // namespace borrow
