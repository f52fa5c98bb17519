#include "borrow/model.hpp"

#include "borrow/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>

namespace borrow {

namespace {

RowSparseMatrix assemble_design(const ModelSpec& spec) {
  const Eigen::Index n = spec.n_obs();
  const Eigen::Index p1 = spec.fixed_design.cols();
  const Eigen::Index p2 = spec.random_design.cols();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n * p1 + spec.random_design.nonZeros()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < p1; ++k) {
      const double v = spec.fixed_design(i, k);
      if (v != 0.0) triplets.emplace_back(i, k, v);
    }
  }
  for (int k = 0; k < spec.random_design.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(spec.random_design, k); it; ++it) {
      if (it.value() != 0.0) triplets.emplace_back(it.row(), p1 + it.col(), it.value());
    }
  }
  RowSparseMatrix x(n, p1 + p2);
  x.setFromTriplets(triplets.begin(), triplets.end());
  x.makeCompressed();
  return x;
}

void check_ones_in_span(const Eigen::MatrixXd& x1) {
  const Eigen::Index n = x1.rows();
  if (x1.cols() == 0) throw SpanError("no fixed-effect columns; the ones vector cannot be spanned");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd coef = x1.colPivHouseholderQr().solve(ones);
  const double residual = (x1 * coef - ones).norm();
  if (!(residual < 1e-8 * std::sqrt(static_cast<double>(n)))) {
    throw SpanError("least-squares residual of the ones vector on X1 is " +
                    std::to_string(residual) + "; add an intercept or a full set of indicators");
  }
}

struct RowKey {
  std::vector<std::pair<Eigen::Index, double>> entries;
  double noise = 0.0;
  bool operator==(const RowKey& other) const {
    return noise == other.noise && entries == other.entries;
  }
};

struct RowKeyHash {
  std::size_t operator()(const RowKey& key) const {
    std::size_t h = std::hash<double>{}(key.noise);
    for (const auto& [col, value] : key.entries) {
      h ^= std::hash<Eigen::Index>{}(col) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h ^= std::hash<double>{}(value) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

// -0.0 and 0.0 compare equal but hash differently.
double canonical(double v) { return v == 0.0 ? 0.0 : v; }

}  // namespace

ValidatedModel validate_spec(ModelSpec spec) {
  const Eigen::Index n = spec.n_obs();
  const Eigen::Index p1 = spec.fixed_design.cols();
  const Eigen::Index p2 = spec.random_design.cols();
  if (n < 1) throw DimensionError("model has no observations");
  if (spec.random_design.rows() != n && !(p2 == 0 && spec.random_design.rows() == 0)) {
    throw DimensionError("X2 has " + std::to_string(spec.random_design.rows()) + " rows, expected " +
                         std::to_string(n));
  }
  if (p2 == 0) spec.random_design.resize(n, 0);
  if (spec.noise_variances.size() != n) {
    throw DimensionError("noise_variances has length " + std::to_string(spec.noise_variances.size()) +
                         ", expected " + std::to_string(n));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = spec.noise_variances(i);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw NotPositiveDefinite("noise variance of observation " + std::to_string(i) + " is " +
                                std::to_string(v) + "; Phi must be positive-definite");
    }
  }
  if (spec.fixed_prior_precision.size() == 0) {
    spec.fixed_prior_precision = Eigen::MatrixXd::Zero(p1, p1);
  }
  if (spec.fixed_prior_precision.rows() != p1 || spec.fixed_prior_precision.cols() != p1) {
    throw DimensionError("fixed prior precision must be " + std::to_string(p1) + " x " +
                         std::to_string(p1));
  }
  if (!spec.fixed_prior_precision.isApprox(spec.fixed_prior_precision.transpose(), 1e-12) &&
      !spec.fixed_prior_precision.isZero()) {
    throw DimensionError("fixed prior precision is not symmetric");
  }
  Eigen::Index structured = 0;
  for (const auto& term : spec.random_structure) structured += dimension(term);
  if (structured != p2) {
    throw DimensionError("random structure covers " + std::to_string(structured) +
                         " effects but X2 has " + std::to_string(p2) + " columns");
  }

  check_ones_in_span(spec.fixed_design);

  auto state = std::make_shared<ValidatedModel::State>();
  state->design = assemble_design(spec);
  state->fixed_prior = spec.fixed_prior_precision;
  state->flat_prior = spec.fixed_prior_precision.isZero(0.0);
  state->random_precision = p2 > 0 ? precision(spec.random_structure) : PrecisionMatrix(0, 0);

  const Eigen::VectorXd inv_noise = spec.noise_variances.cwiseInverse();
  SparseMatrix x = state->design;
  SparseMatrix info = SparseMatrix(x.transpose() * inv_noise.asDiagonal()) * x;
  std::vector<PrecisionMatrix> prior_blocks;
  prior_blocks.push_back(state->fixed_prior.sparseView());
  if (p2 > 0) prior_blocks.push_back(state->random_precision);
  SparseMatrix prior = block_diagonal(prior_blocks);
  state->posterior_precision = info + prior;
  state->posterior_precision.makeCompressed();

  Eigen::SimplicialLLT<SparseMatrix> llt(state->posterior_precision);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("X' Phi^-1 X + blockdiag(C^-1, Sigma^-1) has no Cholesky factor");
  }

  state->spec = std::move(spec);
  return ValidatedModel(std::move(state));
}

ClusterIndex detect_clusters(const ValidatedModel& model) {
  const auto& x = model.design();
  const Eigen::Index n = model.n_obs();
  ClusterIndex out;
  out.cluster_of.resize(static_cast<std::size_t>(n));
  std::unordered_map<RowKey, int, RowKeyHash> seen;
  for (Eigen::Index i = 0; i < n; ++i) {
    RowKey key;
    key.noise = canonical(model.noise_variances()(i));
    for (RowSparseMatrix::InnerIterator it(x, i); it; ++it) {
      if (it.value() != 0.0) key.entries.emplace_back(it.col(), canonical(it.value()));
    }
    auto [pos, inserted] = seen.try_emplace(std::move(key), out.count());
    if (inserted) out.members.emplace_back();
    out.cluster_of[i] = pos->second;
    out.members[pos->second].push_back(static_cast<int>(i));
  }
  return out;
}

ModelSpec drop_rows(const ModelSpec& spec, std::span<const int> rows) {
  const Eigen::Index n = spec.n_obs();
  std::vector<char> removed(static_cast<std::size_t>(n), 0);
  for (int r : rows) {
    if (r < 0 || r >= n) throw IndexOutOfRange("row " + std::to_string(r) + " outside [0, " + std::to_string(n) + ")");
    removed[r] = 1;
  }
  std::vector<int> keep;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!removed[i]) keep.push_back(static_cast<int>(i));
  }
  const Eigen::Index m = static_cast<Eigen::Index>(keep.size());

  ModelSpec out;
  out.fixed_design.resize(m, spec.fixed_design.cols());
  out.noise_variances.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    out.fixed_design.row(k) = spec.fixed_design.row(keep[k]);
    out.noise_variances(k) = spec.noise_variances(keep[k]);
  }
  RowSparseMatrix x2 = spec.random_design;
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index k = 0; k < m; ++k) {
    if (x2.rows() == 0) break;
    for (RowSparseMatrix::InnerIterator it(x2, keep[k]); it; ++it) {
      triplets.emplace_back(k, it.col(), it.value());
    }
  }
  out.random_design.resize(m, spec.random_design.cols());
  out.random_design.setFromTriplets(triplets.begin(), triplets.end());
  out.fixed_prior_precision = spec.fixed_prior_precision;
  out.random_structure = spec.random_structure;
  return out;
}

Eigen::VectorXd drop_entries(const Eigen::VectorXd& values, std::span<const int> rows) {
  std::vector<char> removed(static_cast<std::size_t>(values.size()), 0);
  for (int r : rows) {
    if (r < 0 || r >= values.size()) throw IndexOutOfRange("row " + std::to_string(r));
    removed[r] = 1;
  }
  std::vector<double> kept;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!removed[i]) kept.push_back(values(i));
  }
  return Eigen::Map<const Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
}

}  // namespace borrow
