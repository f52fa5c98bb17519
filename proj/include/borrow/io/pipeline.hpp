#pragma once

#include "borrow/decompose.hpp"
#include "borrow/io/problem.hpp"
#include "borrow/io/report.hpp"
#include "borrow/reml.hpp"

#include <optional>
#include <vector>

namespace borrow::io {

struct PipelineOptions {
  bool keep_full = false;
  int threads = 1;
  bool influence = false;
  std::optional<std::vector<int>> influential;  // overrides the list in the problem file
};

struct PipelineResult {
  Report report;
  std::optional<Eigen::MatrixXd> weights;
  std::optional<VarianceEstimates> estimates;
  std::optional<ValidatedModel> model;
  std::optional<PosteriorScale> scale;
  std::vector<int> conditioned_columns;
};

/// REML on the bundle's free variance parameters (none free: the fixed values, no iterations).
VarianceEstimates fit_bundle_variances(const ProblemBundle& bundle);

/// Variance estimation when requested, then the full decomposition and report assembly.
PipelineResult run_pipeline(const ProblemBundle& bundle, const PipelineOptions& options = {});

/// Numeric value of a record field for smoothing: a record scalar (shrinkage, pooling, ssbf,
/// fitted, response, noise_variance, cluster_size, lender_count), "borrowing:<group>",
/// "pssbf:<group>", "lenders:<group>", or a numeric covariate name.
double record_field(const Report& report, const ReportRecord& record, const std::string& field);

}  // namespace borrow::io
