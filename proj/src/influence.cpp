#include "borrow/influence.hpp"

#include "borrow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace borrow {

namespace {

constexpr double kLeverageTol = 1e-10;

std::vector<int> normalized_set(std::span<const int> indices, Eigen::Index n) {
  std::vector<int> out(indices.begin(), indices.end());
  for (int j : out) {
    if (j < 0 || j >= n) throw IndexOutOfRange("influential index " + std::to_string(j) + " outside [0, " +
                                               std::to_string(n) + ")");
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// columns(:, k) holds w_{i, influential[k]} for every i.
ImpactSummary summarize_impact(const Eigen::MatrixXd& columns, const std::vector<int>& influential,
                               const ClusterIndex& clusters, const RelationshipPartition& partition) {
  const int groups = partition.group_count();
  const Eigen::Index n = columns.rows();
  std::vector<std::vector<double>> values(groups);
  std::vector<double> total(groups);
  std::vector<char> touched(groups);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::fill(total.begin(), total.end(), 0.0);
    std::fill(touched.begin(), touched.end(), 0);
    for (std::size_t k = 0; k < influential.size(); ++k) {
      const int j = influential[k];
      if (clusters.same_cluster(static_cast<int>(i), j)) continue;
      const int g = partition.label(static_cast<int>(i), j);
      total[g] += std::abs(columns(i, static_cast<Eigen::Index>(k)));
      touched[g] = 1;
    }
    for (int g = 0; g < groups; ++g) {
      if (touched[g]) values[g].push_back(total[g]);
    }
  }
  ImpactSummary out;
  for (int g = 0; g < groups; ++g) {
    GroupImpact gi;
    gi.code = g;
    gi.key = partition.group_name(g);
    gi.targets = static_cast<int>(values[g].size());
    if (!values[g].empty()) gi.stats = box_stats(std::move(values[g]));
    out.groups.push_back(std::move(gi));
  }
  return out;
}

}  // namespace

InfluenceAnalysis::InfluenceAnalysis(ValidatedModel model, PosteriorScale scale, ClusterIndex clusters,
                                     Eigen::VectorXd y)
    : model_(std::move(model)), scale_(std::move(scale)), clusters_(std::move(clusters)), y_(std::move(y)) {
  const Eigen::Index n = model_.n_obs();
  const Eigen::Index p = model_.n_coef();
  if (y_.size() != n) throw DimensionError("response length does not match the model");
  if (n <= p) {
    throw DimensionError("residual scale needs N > P (N = " + std::to_string(n) + ", P = " + std::to_string(p) + ")");
  }
  fitted_ = fitted_values(model_, scale_, y_);
  residuals_ = y_ - fitted_;
  // Residuals at rounding level are noise; treating them as exact zeros keeps s^2 = 0 fits at zero influence.
  const double noise_floor = 64.0 * std::numeric_limits<double>::epsilon() *
                             std::max(1.0, y_.cwiseAbs().maxCoeff());
  residuals_ = residuals_.unaryExpr([noise_floor](double e) { return std::abs(e) <= noise_floor ? 0.0 : e; });
  s2_ = residuals_.squaredNorm() / static_cast<double>(n - p);

  const int count = clusters_.count();
  leverage_.resize(count);
  mean_residual_.resize(count);
  mean_sq_residual_.resize(count);
  for (int c = 0; c < count; ++c) {
    const auto& members = clusters_.members[c];
    const int rep = members.front();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
    for (RowSparseMatrix::InnerIterator it(model_.design(), rep); it; ++it) x(it.col()) = it.value();
    leverage_[c] = x.dot(scale_.solve(x)) / model_.noise_variances()(rep);
    double sum = 0.0, sum_sq = 0.0;
    for (int r : members) {
      sum += residuals_(r);
      sum_sq += residuals_(r) * residuals_(r);
    }
    mean_residual_[c] = sum / static_cast<double>(members.size());
    mean_sq_residual_[c] = sum_sq / static_cast<double>(members.size());
  }
}

double InfluenceAnalysis::pooling(int cluster) const {
  return 1.0 - clusters_.size(cluster) * leverage_.at(cluster);
}

double InfluenceAnalysis::avg_cooks_distance(int cluster) const {
  if (cluster < 0 || cluster >= clusters_.count()) throw IndexOutOfRange("cluster " + std::to_string(cluster));
  const double w = leverage_[cluster];
  if (std::abs(1.0 - w) < kLeverageTol) {
    throw LeverageOne("cluster " + std::to_string(cluster) + " has leverage 1; Cook's distance is undefined");
  }
  if (mean_sq_residual_[cluster] == 0.0) return 0.0;
  const double p = static_cast<double>(model_.n_coef());
  return mean_sq_residual_[cluster] / (p * s2_) * w / ((1.0 - w) * (1.0 - w));
}

std::vector<double> InfluenceAnalysis::avg_cooks_distance() const {
  std::vector<double> out(clusters_.count());
  for (int c = 0; c < clusters_.count(); ++c) {
    try {
      out[c] = avg_cooks_distance(c);
    } catch (const LeverageOne&) {
      out[c] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

double InfluenceAnalysis::rvsi(int cluster, int target) const {
  if (cluster < 0 || cluster >= clusters_.count()) throw IndexOutOfRange("cluster " + std::to_string(cluster));
  if (target < 0 || target >= model_.n_obs()) throw IndexOutOfRange("target " + std::to_string(target));
  const double b = pooling(cluster);
  if (std::abs(b) < 1e-12) {
    throw DegeneratePooling("cluster " + std::to_string(cluster) + " has pooling factor 0");
  }
  const int rep = clusters_.members[cluster].front();
  const double n_j = clusters_.size(cluster);
  const double w_ij = weight_row(model_, scale_, target).weights(rep);
  const double pssbf = n_j * w_ij * w_ij;
  const double r = mean_residual_[cluster];
  return pssbf / (b * b) * n_j * r * r;
}

double InfluenceAnalysis::pena_si(int i) const {
  if (i < 0 || i >= model_.n_obs()) throw IndexOutOfRange("observation " + std::to_string(i));
  const Eigen::VectorXd w = weight_row(model_, scale_, i).weights;
  const double w_ii = w(i);
  if (!(w_ii > 1e-300)) throw LeverageZero("observation " + std::to_string(i) + " has zero self-weight");
  double total = 0.0;
  for (int c = 0; c < clusters_.count(); ++c) {
    const double w_ij = w(clusters_.members[c].front());
    const double pssbf = clusters_.size(c) * w_ij * w_ij;
    if (pssbf == 0.0) continue;
    total += pssbf / (w_ii * leverage_[c]) * avg_cooks_distance(c);
  }
  return total;
}

double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw EmptySet("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  BoxStats s;
  s.min = values.front();
  s.q1 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  s.max = values.back();
  return s;
}

ImpactSummary impact_summary(const ValidatedModel& model, const PosteriorScale& scale, const ClusterIndex& clusters,
                             const RelationshipPartition& partition, std::span<const int> influential) {
  const std::vector<int> set = normalized_set(influential, model.n_obs());
  Eigen::MatrixXd columns(model.n_obs(), static_cast<Eigen::Index>(set.size()));
  for (std::size_t k = 0; k < set.size(); ++k) {
    const int j = set[k];
    Eigen::VectorXd x = Eigen::VectorXd::Zero(model.n_coef());
    for (RowSparseMatrix::InnerIterator it(model.design(), j); it; ++it) x(it.col()) = it.value();
    columns.col(static_cast<Eigen::Index>(k)) = (model.design() * scale.solve(x)) / model.noise_variances()(j);
  }
  return summarize_impact(columns, set, clusters, partition);
}

ImpactSummary impact_summary(const Eigen::MatrixXd& weights, const ClusterIndex& clusters,
                             const RelationshipPartition& partition, std::span<const int> influential) {
  if (weights.rows() != weights.cols()) throw DimensionError("weight matrix must be square");
  const std::vector<int> set = normalized_set(influential, weights.rows());
  Eigen::MatrixXd columns(weights.rows(), static_cast<Eigen::Index>(set.size()));
  for (std::size_t k = 0; k < set.size(); ++k) columns.col(static_cast<Eigen::Index>(k)) = weights.col(set[k]);
  return summarize_impact(columns, set, clusters, partition);
}

}  // namespace borrow
