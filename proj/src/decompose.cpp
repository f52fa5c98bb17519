#include "borrow/decompose.hpp"

#include "borrow/errors.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

namespace borrow {

namespace {

void check_conditioned(const ValidatedModel& model, std::span<const int> columns) {
  for (int c : columns) {
    if (c < 0 || c >= model.n_fixed()) {
      throw IndexOutOfRange("conditioned column " + std::to_string(c) + " is not a fixed-effect column");
    }
  }
}

Eigen::VectorXd design_row(const ValidatedModel& model, int i, std::span<const int> conditioned) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(model.n_coef());
  for (RowSparseMatrix::InnerIterator it(model.design(), i); it; ++it) x(it.col()) = it.value();
  for (int c : conditioned) x(c) = 0.0;
  return x;
}

// Runs body(k) for k in [0, count) on up to `threads` workers; first exception wins.
template <typename Body>
void parallel_for(int count, int threads, Body body) {
  threads = std::clamp(threads, 1, std::max(1, count));
  if (threads == 1) {
    for (int k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int k = next++; k < count; k = next++) {
        try {
          body(k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

Eigen::VectorXd PosteriorScale::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != dimension_) throw DimensionError("right-hand side has the wrong length");
  return llt_->solve(rhs);
}

Eigen::MatrixXd PosteriorScale::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != dimension_) throw DimensionError("right-hand side has the wrong row count");
  return llt_->solve(rhs);
}

Eigen::MatrixXd PosteriorScale::covariance() const {
  if (dimension_ > 4000) throw SizeGuard("explicit V refused for P = " + std::to_string(dimension_));
  return solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(dimension_, dimension_)));
}

PosteriorScale compute_scale(const ValidatedModel& model) {
  auto llt = std::make_shared<Eigen::SimplicialLLT<SparseMatrix>>(model.posterior_precision());
  if (llt->info() != Eigen::Success) throw NotPositiveDefinite("posterior precision has no Cholesky factor");
  PosteriorScale scale;
  scale.llt_ = std::move(llt);
  scale.dimension_ = model.n_coef();
  return scale;
}

WeightRow weight_row(const ValidatedModel& model, const PosteriorScale& scale, int i,
                     std::span<const int> conditioned_columns) {
  if (i < 0 || i >= model.n_obs()) {
    throw IndexOutOfRange("observation " + std::to_string(i) + " outside [0, " +
                          std::to_string(model.n_obs()) + ")");
  }
  check_conditioned(model, conditioned_columns);
  const Eigen::VectorXd z = scale.solve(design_row(model, i, conditioned_columns));
  WeightRow row;
  row.index = i;
  row.weights = (model.design() * z).cwiseQuotient(model.noise_variances());
  return row;
}

RowSummary summarize_row(const WeightRow& row, const ClusterIndex& clusters,
                         const RelationshipPartition& partition) {
  const int n = static_cast<int>(row.weights.size());
  if (static_cast<int>(clusters.cluster_of.size()) != n) {
    throw DimensionError("cluster index and weight row disagree on N");
  }
  const int groups = partition.group_count();
  const int own = clusters.cluster_of[row.index];
  RowSummary s;
  s.group_borrowing.assign(groups, 0.0);
  s.group_pssbf.assign(groups, 0.0);
  s.group_sizes.assign(groups, 0);
  s.cluster_size = clusters.size(own);
  for (int j = 0; j < n; ++j) {
    const double w = row.weights(j);
    if (clusters.cluster_of[j] == own) {
      s.shrinkage += w;
      continue;
    }
    const int g = partition.label(row.index, j);
    s.group_borrowing[g] += w;
    s.group_pssbf[g] += w * w;
    s.group_sizes[g] += 1;
    s.ssbf += w * w;
    ++s.lender_count;
  }
  s.pooling = 1.0 - s.shrinkage;
  return s;
}

std::vector<std::string> BorrowingDecomposition::group_keys() const {
  std::vector<std::string> keys;
  for (int g : active_groups) keys.push_back(partition.group_name(g));
  return keys;
}

BorrowingDecomposition decompose_all(const ValidatedModel& model, const PosteriorScale& scale,
                                     const ClusterIndex& clusters, const RelationshipPartition& partition,
                                     const DecomposeOptions& options) {
  const Eigen::Index n = model.n_obs();
  if (static_cast<Eigen::Index>(clusters.cluster_of.size()) != n) {
    throw DimensionError("cluster index does not match the model");
  }
  check_conditioned(model, options.conditioned_columns);
  if (options.keep_full && n > 20000) throw SizeGuard("full W refused for N = " + std::to_string(n));

  BorrowingDecomposition out;
  out.rows.resize(static_cast<std::size_t>(n));
  out.clusters = clusters;
  out.partition = partition;
  out.conditioned_columns = options.conditioned_columns;
  if (options.keep_full) out.weights = Eigen::MatrixXd(n, n);

  // Members of a cluster share the weight row exactly; one solve per cluster.
  parallel_for(clusters.count(), options.threads, [&](int c) {
    const auto& members = clusters.members[c];
    WeightRow row = weight_row(model, scale, members.front(), options.conditioned_columns);
    for (int i : members) {
      row.index = i;
      out.rows[i] = summarize_row(row, clusters, partition);
      if (out.weights) out.weights->row(i) = row.weights.transpose();
    }
  });

  std::set<int> active;
  for (const auto& r : out.rows) {
    for (int g = 0; g < static_cast<int>(r.group_sizes.size()); ++g) {
      if (r.group_sizes[g] > 0) active.insert(g);
    }
  }
  out.active_groups.assign(active.begin(), active.end());
  return out;
}

BorrowingDecomposition decompose_all(const ValidatedModel& model, const ClusterIndex& clusters,
                                     const RelationshipPartition& partition, const DecomposeOptions& options) {
  return decompose_all(model, compute_scale(model), clusters, partition, options);
}

Eigen::VectorXd fitted_values(const Eigen::MatrixXd& weights, const Eigen::VectorXd& y) {
  if (weights.cols() != y.size()) throw DimensionError("W and y disagree on N");
  return weights * y;
}

Eigen::VectorXd coefficient_means(const ValidatedModel& model, const PosteriorScale& scale,
                                  const Eigen::VectorXd& y) {
  if (y.size() != model.n_obs()) throw DimensionError("response length does not match the model");
  const Eigen::VectorXd rhs = model.design().transpose() * y.cwiseQuotient(model.noise_variances());
  return scale.solve(rhs);
}

Eigen::VectorXd fitted_values(const ValidatedModel& model, const PosteriorScale& scale, const Eigen::VectorXd& y,
                              std::span<const int> conditioned_columns) {
  check_conditioned(model, conditioned_columns);
  Eigen::VectorXd beta = coefficient_means(model, scale, y);
  for (int c : conditioned_columns) beta(c) = 0.0;
  return model.design() * beta;
}

Eigen::MatrixXd coefficient_weights(const ValidatedModel& model, const PosteriorScale& scale) {
  const Eigen::MatrixXd xt = Eigen::MatrixXd(model.design().transpose()) *
                             model.noise_variances().cwiseInverse().asDiagonal();
  return scale.solve(xt);
}

}  // namespace borrow
