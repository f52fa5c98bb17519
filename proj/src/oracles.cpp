#include "borrow/oracles.hpp"

#include "borrow/errors.hpp"

#include <cmath>
#include <numeric>

namespace borrow {

namespace {

constexpr Eigen::Index kDenseLimit = 3000;

void guard(const ValidatedModel& model) {
  if (model.n_obs() > kDenseLimit) {
    throw SizeGuard("dense oracle refuses N = " + std::to_string(model.n_obs()) + " > 3000");
  }
}

Eigen::MatrixXd dense_design(const ModelSpec& spec) {
  Eigen::MatrixXd x(spec.n_obs(), spec.fixed_design.cols() + spec.random_design.cols());
  x << spec.fixed_design, Eigen::MatrixXd(spec.random_design);
  return x;
}

Eigen::MatrixXd dense_prior(const ModelSpec& spec) {
  const Eigen::Index p1 = spec.fixed_design.cols();
  const Eigen::Index p2 = spec.random_design.cols();
  Eigen::MatrixXd prior = Eigen::MatrixXd::Zero(p1 + p2, p1 + p2);
  if (spec.fixed_prior_precision.size() > 0) prior.topLeftCorner(p1, p1) = spec.fixed_prior_precision;
  if (p2 > 0) prior.bottomRightCorner(p2, p2) = Eigen::MatrixXd(precision(spec.random_structure));
  return prior;
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite(std::string(what) + " is not positive-definite");
  return m.inverse();
}

}  // namespace

Eigen::MatrixXd OneWayWeights::point_weights() const {
  const int total = std::accumulate(sizes.begin(), sizes.end(), 0);
  const int j_count = static_cast<int>(sizes.size());
  std::vector<int> start(j_count, 0);
  for (int j = 1; j < j_count; ++j) start[j] = start[j - 1] + sizes[j - 1];
  Eigen::MatrixXd w(total, total);
  for (int i = 0; i < j_count; ++i) {
    for (int j = 0; j < j_count; ++j) {
      double per_point = rho(i, j) / sizes[j];
      if (i == j) per_point += (1.0 - lambda(i)) / sizes[i];
      w.block(start[i], start[j], sizes[i], sizes[j]).setConstant(per_point);
    }
  }
  return w;
}

OneWayWeights oneway_weights(const OneWayProblem& p) {
  const int j_count = static_cast<int>(p.sizes.size());
  if (j_count == 0 || p.noise_variances.size() != p.sizes.size()) {
    throw DimensionError("one-way problem needs one noise variance per cluster");
  }
  if (!(p.sigma2 >= 0.0)) throw DimensionError("sigma2 must be >= 0");
  OneWayWeights out;
  out.sizes = p.sizes;
  out.tau.resize(j_count);
  out.lambda.resize(j_count);
  for (int j = 0; j < j_count; ++j) {
    if (p.sizes[j] < 1) throw DimensionError("cluster sizes must be >= 1");
    if (!(p.noise_variances[j] > 0.0)) throw NotPositiveDefinite("noise variances must be > 0");
    const double n = p.sizes[j];
    const double phi2 = p.noise_variances[j];
    out.tau(j) = n / (n * p.sigma2 + phi2);
    out.lambda(j) = phi2 / (n * p.sigma2 + phi2);
  }
  out.rho = Eigen::MatrixXd::Zero(j_count, j_count);
  if (!p.known_mean) out.rho = out.lambda * (out.tau / out.tau.sum()).transpose();
  return out;
}

Eigen::MatrixXd dense_weights(const ValidatedModel& model) {
  guard(model);
  const ModelSpec& spec = model.spec();
  const Eigen::MatrixXd x = dense_design(spec);
  const Eigen::VectorXd phi_inv = spec.noise_variances.cwiseInverse();
  const Eigen::MatrixXd v_inv = x.transpose() * phi_inv.asDiagonal() * x + dense_prior(spec);
  const Eigen::MatrixXd v = inverse_spd(v_inv, "V^-1");
  return x * v * x.transpose() * phi_inv.asDiagonal();
}

DeletedFit case_deleted_fit(const ValidatedModel& model, const PosteriorScale& scale, const Eigen::VectorXd& y,
                            const ClusterIndex& clusters, int cluster, std::optional<std::span<const int>> rows) {
  if (cluster < 0 || cluster >= clusters.count()) {
    throw IndexOutOfRange("cluster " + std::to_string(cluster) + " outside [0, " +
                          std::to_string(clusters.count()) + ")");
  }
  const auto& members = clusters.members[cluster];
  std::vector<int> deleted = rows ? std::vector<int>(rows->begin(), rows->end()) : members;
  if (deleted.empty()) throw EmptySet("no rows to delete");
  for (int r : deleted) {
    if (r < 0 || r >= model.n_obs() || clusters.cluster_of[r] != cluster) {
      throw IndexOutOfRange("row " + std::to_string(r) + " is not in cluster " + std::to_string(cluster));
    }
  }

  const int rep = members.front();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(model.n_coef());
  for (RowSparseMatrix::InnerIterator it(model.design(), rep); it; ++it) x(it.col()) = it.value();
  const double a = static_cast<double>(deleted.size()) / model.noise_variances()(rep);

  const Eigen::VectorXd beta = coefficient_means(model, scale, y);
  const Eigen::VectorXd vx = scale.solve(x);
  const double h = x.dot(vx);
  const double denom = 1.0 - a * h;
  if (std::abs(denom) < 1e-12) {
    throw SingularAfterDeletion("deleting cluster " + std::to_string(cluster) +
                                " leaves a singular posterior precision");
  }
  double y_bar = 0.0;
  for (int r : deleted) y_bar += y(r);
  y_bar /= static_cast<double>(deleted.size());
  const double y_hat = x.dot(beta);

  DeletedFit out;
  out.coefficients = beta + (a * (y_hat - y_bar) / denom) * vx;
  out.fitted = model.design() * out.coefficients;
  return out;
}

DeletedFit refit_deleted(const ValidatedModel& model, const Eigen::VectorXd& y, std::span<const int> rows) {
  guard(model);
  const ModelSpec reduced = drop_rows(model.spec(), rows);
  const Eigen::VectorXd y_reduced = drop_entries(y, rows);
  const Eigen::MatrixXd x = dense_design(reduced);
  const Eigen::VectorXd phi_inv = reduced.noise_variances.cwiseInverse();
  const Eigen::MatrixXd v_inv = x.transpose() * phi_inv.asDiagonal() * x + dense_prior(reduced);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(v_inv);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    throw SingularAfterDeletion("refit precision is singular");
  }
  DeletedFit out;
  out.coefficients = ldlt.solve(x.transpose() * phi_inv.cwiseProduct(y_reduced));
  out.fitted = dense_design(model.spec()) * out.coefficients;
  return out;
}

Eigen::MatrixXd HatDecomposition::weights() const {
  const Eigen::Index n = h.rows();
  return h + h2 * (Eigen::MatrixXd::Identity(n, n) - h);
}

HatDecomposition hat_decomposition(const ValidatedModel& model) {
  guard(model);
  const ModelSpec& spec = model.spec();
  const Eigen::Index n = spec.n_obs();
  const Eigen::Index p2 = spec.random_design.cols();
  const Eigen::MatrixXd& x1 = spec.fixed_design;
  const Eigen::MatrixXd x2 = Eigen::MatrixXd(spec.random_design);
  const Eigen::VectorXd phi_inv = spec.noise_variances.cwiseInverse();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);

  HatDecomposition out;
  out.phi_tilde = Eigen::MatrixXd(spec.noise_variances.asDiagonal());
  if (p2 > 0) {
    const Eigen::MatrixXd sigma_inv = Eigen::MatrixXd(precision(spec.random_structure));
    const Eigen::MatrixXd m = inverse_spd(x2.transpose() * phi_inv.asDiagonal() * x2 + sigma_inv, "M^-1");
    out.h2 = x2 * m * x2.transpose() * phi_inv.asDiagonal();
    out.phi_tilde += x2 * inverse_spd(sigma_inv, "Sigma^-1") * x2.transpose();
  } else {
    out.h2 = Eigen::MatrixXd::Zero(n, n);
  }
  out.phi_tilde_inv = phi_inv.asDiagonal() * (eye - out.h2);
  const Eigen::MatrixXd a = inverse_spd(x1.transpose() * out.phi_tilde_inv * x1, "X1' Phi~^-1 X1");
  out.h = x1 * a * x1.transpose() * out.phi_tilde_inv;
  out.h1 = x1 * a * x1.transpose() * phi_inv.asDiagonal();
  return out;
}

}  // namespace borrow
