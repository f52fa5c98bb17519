#pragma once

#include "borrow/decompose.hpp"
#include "borrow/model.hpp"
#include "borrow/partition.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace borrow {

/// Residual-based influence measures expressed through borrowing factors. Residuals come
/// from the unconditioned posterior mean fit; s^2 = e'e / (N - P).
class InfluenceAnalysis {
 public:
  InfluenceAnalysis(ValidatedModel model, PosteriorScale scale, ClusterIndex clusters, Eigen::VectorXd y);

  const Eigen::VectorXd& residuals() const { return residuals_; }
  const Eigen::VectorXd& fitted() const { return fitted_; }
  double residual_scale() const { return s2_; }

  /// Weight one point of cluster j places on itself, x_j' V x_j / phi_j^2.
  double leverage(int cluster) const { return leverage_.at(cluster); }
  /// 1 - n_j w_jj, the pooling factor of cluster j.
  double pooling(int cluster) const;

  /// Average Cook's distance of cluster j; throws LeverageOne when w_jj is 1.
  double avg_cooks_distance(int cluster) const;
  /// All clusters; undefined entries (w_jj = 1) are NaN.
  std::vector<double> avg_cooks_distance() const;

  /// Squared change in the fitted value of observation `target` when cluster j is deleted.
  double rvsi(int cluster, int target) const;

  /// Sum over every deletion of the squared change in fitted value of observation i,
  /// normalized by P s^2 w_ii.
  double pena_si(int i) const;

 private:
  ValidatedModel model_;
  PosteriorScale scale_;
  ClusterIndex clusters_;
  Eigen::VectorXd y_;
  Eigen::VectorXd fitted_;
  Eigen::VectorXd residuals_;
  double s2_ = 0.0;
  std::vector<double> leverage_;
  std::vector<double> mean_residual_;     // Y_bar_j - Y_hat_j
  std::vector<double> mean_sq_residual_;  // e_j' e_j / n_j
};

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Linear-interpolation quantile between order statistics; `sorted` ascending, non-empty.
double quantile(std::span<const double> sorted, double p);
BoxStats box_stats(std::vector<double> values);

struct GroupImpact {
  int code = 0;
  std::string key;
  int targets = 0;  // point estimates with at least one influential lender in the group
  BoxStats stats;
};

struct ImpactSummary {
  std::vector<GroupImpact> groups;  // every partition group, ascending code
};

/// Per relationship group, the total absolute weight each point estimate places on the
/// influential observations among its lenders in that group.
ImpactSummary impact_summary(const ValidatedModel& model, const PosteriorScale& scale, const ClusterIndex& clusters,
                             const RelationshipPartition& partition, std::span<const int> influential);

/// Same summary from an explicit weight matrix.
ImpactSummary impact_summary(const Eigen::MatrixXd& weights, const ClusterIndex& clusters,
                             const RelationshipPartition& partition, std::span<const int> influential);

}  // namespace borrow
