#pragma once

// Slow, literal reference implementations used to cross-check the decomposition engine.
// None of these reuse the engine's factorization.

#include "borrow/decompose.hpp"
#include "borrow/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace borrow {

/// Y_j ~ N(alpha_j, phi_j^2) per point, alpha_j ~ N(a0, sigma2), a0 flat unless known.
struct OneWayProblem {
  std::vector<int> sizes;
  std::vector<double> noise_variances;  // phi_j^2 per cluster
  double sigma2 = 1.0;
  std::optional<double> known_mean;
};

struct OneWayWeights {
  Eigen::MatrixXd rho;     // rho_ij, J x J
  Eigen::VectorXd lambda;  // pooling factor of each cluster mean
  Eigen::VectorXd tau;
  std::vector<int> sizes;

  double shrinkage(int i) const { return (1.0 - lambda(i)) + rho(i, i); }
  double pooling(int i) const { return lambda(i) - rho(i, i); }
  /// N x N per-observation weights, clusters laid out contiguously in order.
  Eigen::MatrixXd point_weights() const;
};

OneWayWeights oneway_weights(const OneWayProblem& problem);

/// W = X V X' Phi^-1 via explicit dense inversion; refuses N > 3000.
Eigen::MatrixXd dense_weights(const ValidatedModel& model);

struct DeletedFit {
  Eigen::VectorXd coefficients;  // E[beta | Y without the deleted rows]
  Eigen::VectorXd fitted;        // X beta_deleted on every original row
};

/// Rank-one Sherman-Morrison deletion of a borrower cluster, or of a subset of its rows
/// (a single row gives one-observation deletion).
DeletedFit case_deleted_fit(const ValidatedModel& model, const PosteriorScale& scale, const Eigen::VectorXd& y,
                            const ClusterIndex& clusters, int cluster,
                            std::optional<std::span<const int>> rows = std::nullopt);

/// Drops the rows and refits from scratch with dense linear algebra.
DeletedFit refit_deleted(const ValidatedModel& model, const Eigen::VectorXd& y, std::span<const int> rows);

struct HatDecomposition {
  Eigen::MatrixXd h;              // X1 (X1' Phi~^-1 X1)^-1 X1' Phi~^-1
  Eigen::MatrixXd h1;             // X1 A X1' Phi^-1 with A = (X1' Phi~^-1 X1)^-1
  Eigen::MatrixXd h2;             // X2 M X2' Phi^-1
  Eigen::MatrixXd phi_tilde;      // Phi + X2 Sigma X2'
  Eigen::MatrixXd phi_tilde_inv;  // Phi^-1 (I - H2)

  /// H + H2 (I - H); equals W under a flat fixed-effect prior.
  Eigen::MatrixXd weights() const;
};

HatDecomposition hat_decomposition(const ValidatedModel& model);

}  // namespace borrow
