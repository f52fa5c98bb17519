#include "borrow/covariance.hpp"

#include "borrow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace borrow {

namespace {

void check_rho(double rho, const char* name) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw RhoOutOfRange(std::string(name) + " = " + std::to_string(rho) + " is outside [0, 1)");
  }
}

void check_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw DimensionError("variance " + std::to_string(sigma2) +
                         " has no finite precision; it must be > 0");
  }
}

SparseMatrix identity(int n) {
  SparseMatrix eye(n, n);
  eye.setIdentity();
  return eye;
}

}  // namespace

Adjacency::Adjacency(std::vector<std::vector<int>> neighbours)
    : neighbours_(std::move(neighbours)) {
  const int n = nodes();
  std::vector<Eigen::Triplet<double>> triplets;
  for (int i = 0; i < n; ++i) {
    std::sort(neighbours_[i].begin(), neighbours_[i].end());
    for (int j : neighbours_[i]) triplets.emplace_back(i, j, 1.0);
  }
  matrix_.resize(n, n);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
}

Adjacency Adjacency::from_edges(int nodes, std::span<const std::pair<int, int>> edges) {
  if (nodes < 1) throw DimensionError("adjacency needs at least one node");
  std::vector<std::vector<int>> neighbours(nodes);
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= nodes || b >= nodes) {
      throw IndexOutOfRange("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                            ") references a node outside [0, " + std::to_string(nodes) + ")");
    }
    if (a == b) {
      throw AsymmetricAdjacency("self-loop at node " + std::to_string(a) +
                                "; the diagonal must be zero");
    }
    auto& na = neighbours[a];
    if (std::find(na.begin(), na.end(), b) != na.end()) {
      throw AsymmetricAdjacency("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                ") listed more than once");
    }
    na.push_back(b);
    neighbours[b].push_back(a);
  }
  return Adjacency(std::move(neighbours));
}

Adjacency Adjacency::from_dense(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols() || matrix.rows() < 1) {
    throw DimensionError("adjacency matrix must be square and non-empty");
  }
  const int n = static_cast<int>(matrix.rows());
  std::vector<std::vector<int>> neighbours(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = matrix(i, j);
      if (v != 0.0 && v != 1.0) {
        throw AsymmetricAdjacency("entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                  ") is not 0 or 1");
      }
      if (v != matrix(j, i)) {
        throw AsymmetricAdjacency("entries (" + std::to_string(i) + ", " + std::to_string(j) +
                                  ") and its transpose differ");
      }
      if (i == j && v != 0.0) {
        throw AsymmetricAdjacency("self-loop at node " + std::to_string(i) +
                                  "; the diagonal must be zero");
      }
      if (v == 1.0) neighbours[i].push_back(j);
    }
  }
  return Adjacency(std::move(neighbours));
}

Eigen::VectorXd Adjacency::degrees() const {
  Eigen::VectorXd d(nodes());
  for (int i = 0; i < nodes(); ++i) d(i) = static_cast<double>(neighbours_[i].size());
  return d;
}

std::vector<int> Adjacency::hop_distances(int source) const {
  std::vector<int> distance(nodes(), -1);
  std::deque<int> queue{source};
  distance[source] = 0;
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    for (int next : neighbours_[node]) {
      if (distance[next] < 0) {
        distance[next] = distance[node] + 1;
        queue.push_back(next);
      }
    }
  }
  return distance;
}

int dimension(const CovarianceStructure& structure) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IidBlocks>) {
          int total = 0;
          for (const auto& b : s.blocks) total += b.size;
          return total;
        } else if constexpr (std::is_same_v<T, DensePrecision>) {
          return static_cast<int>(s.precision.rows());
        } else if constexpr (std::is_same_v<T, CarStructure>) {
          return s.adjacency.nodes();
        } else {
          return s.adjacency.nodes() * s.periods;
        }
      },
      structure);
}

void validate(const CovarianceStructure& structure) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IidBlocks>) {
          if (s.blocks.empty()) throw DimensionError("iid structure without blocks");
          for (const auto& b : s.blocks) {
            if (b.size < 1) throw DimensionError("iid block size must be >= 1");
            check_sigma2(b.sigma2);
          }
        } else if constexpr (std::is_same_v<T, DensePrecision>) {
          if (s.precision.rows() != s.precision.cols() || s.precision.rows() == 0) {
            throw DimensionError("dense precision must be square and non-empty");
          }
        } else if constexpr (std::is_same_v<T, CarStructure>) {
          check_sigma2(s.sigma2);
          check_rho(s.rho, "rho_space");
        } else {
          check_sigma2(s.sigma2);
          check_rho(s.rho_space, "rho_space");
          check_rho(s.rho_time, "rho_time");
          if (s.periods < 1) throw DimensionError("space-time structure needs periods >= 1");
        }
      },
      structure);
}

PrecisionMatrix precision(const CovarianceStructure& structure) {
  validate(structure);
  return std::visit(
      [](const auto& s) -> PrecisionMatrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IidBlocks>) {
          return build_block_precision(s.blocks);
        } else if constexpr (std::is_same_v<T, DensePrecision>) {
          return s.precision.sparseView();
        } else if constexpr (std::is_same_v<T, CarStructure>) {
          return build_car_precision(s.rho, s.adjacency, s.sigma2);
        } else {
          return build_spacetime_precision(s.rho_time, build_car_precision(s.rho_space, s.adjacency),
                                           s.periods, s.sigma2);
        }
      },
      structure);
}

PrecisionMatrix precision(std::span<const CovarianceStructure> terms) {
  std::vector<PrecisionMatrix> blocks;
  blocks.reserve(terms.size());
  for (const auto& term : terms) blocks.push_back(precision(term));
  return block_diagonal(blocks);
}

PrecisionMatrix build_block_precision(std::span<const IidBlock> blocks) {
  int total = 0;
  for (const auto& b : blocks) {
    if (b.size < 1) throw DimensionError("iid block size must be >= 1");
    check_sigma2(b.sigma2);
    total += b.size;
  }
  PrecisionMatrix q(total, total);
  q.reserve(Eigen::VectorXi::Constant(total, 1));
  int offset = 0;
  for (const auto& b : blocks) {
    for (int k = 0; k < b.size; ++k) q.insert(offset + k, offset + k) = 1.0 / b.sigma2;
    offset += b.size;
  }
  q.makeCompressed();
  return q;
}

PrecisionMatrix build_car_precision(double rho, const Adjacency& adjacency, double sigma2) {
  check_rho(rho, "rho_space");
  check_sigma2(sigma2);
  const int n = adjacency.nodes();
  SparseMatrix degree(n, n);
  std::vector<Eigen::Triplet<double>> diag;
  const Eigen::VectorXd d = adjacency.degrees();
  for (int i = 0; i < n; ++i) diag.emplace_back(i, i, d(i));
  degree.setFromTriplets(diag.begin(), diag.end());
  PrecisionMatrix q = rho * (degree - adjacency.matrix()) + (1.0 - rho) * identity(n);
  q /= sigma2;
  q.prune(0.0);
  q.makeCompressed();
  return q;
}

PrecisionMatrix build_spacetime_precision(double rho_time, const PrecisionMatrix& q, int periods,
                                          double sigma2) {
  check_rho(rho_time, "rho_time");
  check_sigma2(sigma2);
  if (periods < 1) throw DimensionError("periods must be >= 1");
  if (q.rows() != q.cols()) throw DimensionError("spatial precision must be square");
  const int block = static_cast<int>(q.rows());
  std::vector<PrecisionMatrix> copies(periods, q);
  const PrecisionMatrix q_blocks = block_diagonal(copies);
  const SparseMatrix lag = identity(block * periods) - rho_time * ShiftMatrix(block, periods).to_sparse();
  PrecisionMatrix out = SparseMatrix(lag.transpose()) * q_blocks * lag;
  out /= sigma2;
  out.prune(0.0);
  out.makeCompressed();
  return out;
}

PrecisionMatrix block_diagonal(std::span<const PrecisionMatrix> blocks) {
  Eigen::Index total = 0;
  Eigen::Index nnz = 0;
  for (const auto& b : blocks) {
    if (b.rows() != b.cols()) throw DimensionError("block-diagonal pieces must be square");
    total += b.rows();
    nnz += b.nonZeros();
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  Eigen::Index offset = 0;
  for (const auto& b : blocks) {
    for (int k = 0; k < b.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(b, k); it; ++it) {
        triplets.emplace_back(offset + it.row(), offset + it.col(), it.value());
      }
    }
    offset += b.rows();
  }
  PrecisionMatrix out(total, total);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

ShiftMatrix::ShiftMatrix(int block, int periods) : block_(block), periods_(periods) {
  if (block < 1 || periods < 1) throw DimensionError("shift matrix needs block >= 1 and periods >= 1");
}

Eigen::VectorXd ShiftMatrix::apply(const Eigen::VectorXd& alpha) const {
  const Eigen::Index n = static_cast<Eigen::Index>(block_) * periods_;
  if (alpha.size() != n) throw DimensionError("shift operand has the wrong length");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  out.tail(n - block_) = alpha.head(n - block_);
  return out;
}

SparseMatrix ShiftMatrix::to_sparse() const {
  const int n = block_ * periods_;
  std::vector<Eigen::Triplet<double>> triplets;
  for (int k = block_; k < n; ++k) triplets.emplace_back(k, k - block_, 1.0);
  SparseMatrix h(n, n);
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

}  // namespace borrow
