#include "borrow/io/pipeline.hpp"

#include "borrow/errors.hpp"
#include "borrow/influence.hpp"
#include "borrow/io/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace borrow::io {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int group_index(const Report& report, const std::string& key) {
  const auto it = std::find(report.group_keys.begin(), report.group_keys.end(), key);
  if (it == report.group_keys.end()) throw UnknownColumn("'" + key + "' is not a relationship group of the report");
  return static_cast<int>(it - report.group_keys.begin());
}

}  // namespace

double record_field(const Report& report, const ReportRecord& r, const std::string& field) {
  if (field == "shrinkage") return r.shrinkage;
  if (field == "pooling") return r.pooling;
  if (field == "ssbf") return r.ssbf;
  if (field == "fitted") return r.fitted;
  if (field == "response") return r.response;
  if (field == "noise_variance") return r.noise_variance;
  if (field == "cluster_size") return r.cluster_size;
  if (field == "lender_count") return r.lender_count;
  for (const char* prefix : {"borrowing:", "pssbf:", "lenders:"}) {
    const std::string p(prefix);
    if (field.rfind(p, 0) == 0) {
      const int g = group_index(report, field.substr(p.size()));
      if (p == "borrowing:") return r.borrowing[g];
      if (p == "pssbf:") return r.pssbf[g];
      return r.lenders[g];
    }
  }
  for (const auto& [name, value] : r.covariates) {
    if (name != field) continue;
    if (value.index() != 0) throw ParseError("covariate '" + field + "' is not numeric");
    return std::get<double>(value);
  }
  throw UnknownColumn("'" + field + "' is not a report field");
}

VarianceEstimates fit_bundle_variances(const ProblemBundle& bundle) {
  if (bundle.fit_plan) return fit_variance_reml(bundle.model, bundle.response, *bundle.fit_plan);
  VarianceEstimates fixed;
  fixed.terms = current_terms(bundle.model);
  fixed.log_restricted_likelihood = restricted_log_likelihood(bundle.model, bundle.response);
  fixed.converged = true;
  return fixed;
}

PipelineResult run_pipeline(const ProblemBundle& bundle, const PipelineOptions& options) {
  PipelineResult result;
  ModelSpec spec = bundle.model;
  Report& report = result.report;
  ReportModel& meta = report.model;
  meta.phi2 = bundle.phi2;
  if (bundle.fit_plan) {
    result.estimates = fit_variance_reml(bundle.model, bundle.response, *bundle.fit_plan);
    spec = apply_estimates(bundle.model, *result.estimates);
    meta.phi2 = bundle.phi2 * result.estimates->phi_scale;
    meta.variance_fitted = true;
    meta.log_restricted_likelihood = result.estimates->log_restricted_likelihood;
    meta.warnings = result.estimates->warnings;
  }

  const ValidatedModel model = validate_spec(spec);
  const PosteriorScale scale = compute_scale(model);
  const ClusterIndex clusters = detect_clusters(model);
  const RelationshipPartition partition = relationship_partition(model, clusters, bundle.rules);
  DecomposeOptions dopts;
  dopts.keep_full = options.keep_full;
  dopts.threads = options.threads;
  dopts.conditioned_columns = bundle.conditioned_columns;
  BorrowingDecomposition d = decompose_all(model, scale, clusters, partition, dopts);
  const Eigen::VectorXd fitted = fitted_values(model, scale, bundle.response);

  meta.n_obs = static_cast<int>(model.n_obs());
  meta.n_coef = static_cast<int>(model.n_coef());
  meta.family = bundle.poisson ? "poisson" : "gaussian";
  meta.variance_mode = std::string(to_string(bundle.variance_mode));
  meta.fixed_columns = bundle.fixed_names;
  for (int c : bundle.conditioned_columns) meta.conditioned_columns.push_back(bundle.fixed_names[c]);
  const auto terms = current_terms(spec);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    meta.terms.push_back({bundle.terms[k].label, bundle.terms[k].structure, terms[k].sigma2, terms[k].rho_space,
                          terms[k].rho_time});
  }
  meta.rules = bundle.rule_definitions;
  report.group_keys = d.group_keys();

  // Covariate echo: numeric columns as numbers, the rest verbatim.
  std::vector<bool> numeric;
  for (const auto& c : bundle.covariate_columns) numeric.push_back(bundle.data.is_numeric(c));
  std::vector<Eigen::VectorXd> numeric_values(bundle.covariate_columns.size());
  for (std::size_t k = 0; k < numeric.size(); ++k) {
    if (numeric[k]) numeric_values[k] = bundle.data.numeric(bundle.covariate_columns[k]);
  }

  report.records.resize(static_cast<std::size_t>(model.n_obs()));
  for (int i = 0; i < model.n_obs(); ++i) {
    const RowSummary& s = d.rows[i];
    ReportRecord& r = report.records[i];
    r.id = i;
    r.cluster = clusters.cluster_of[i];
    r.cluster_size = s.cluster_size;
    r.lender_count = s.lender_count;
    r.shrinkage = s.shrinkage;
    r.pooling = s.pooling;
    r.ssbf = s.ssbf;
    r.fitted = fitted(i);
    r.response = bundle.response(i);
    r.noise_variance = model.noise_variances()(i);
    for (int g : d.active_groups) {
      r.borrowing.push_back(s.group_borrowing[g]);
      r.pssbf.push_back(s.group_pssbf[g]);
      r.lenders.push_back(s.group_sizes[g]);
    }
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      const auto& name = bundle.covariate_columns[k];
      if (numeric[k]) {
        r.covariates.emplace_back(name, numeric_values[k](i));
      } else {
        r.covariates.emplace_back(name, bundle.data.strings(name)[static_cast<std::size_t>(i)]);
      }
    }
  }

  if (options.influence) {
    const InfluenceAnalysis ia(model, scale, clusters, bundle.response);
    InfluenceSection inf;
    inf.cooks = ia.avg_cooks_distance();
    inf.pena.resize(static_cast<std::size_t>(model.n_obs()));
    for (int i = 0; i < model.n_obs(); ++i) {
      try {
        inf.pena[i] = ia.pena_si(i);
      } catch (const LeverageOne&) {
        inf.pena[i] = kNaN;
      } catch (const LeverageZero&) {
        inf.pena[i] = kNaN;
      }
    }
    inf.influential = options.influential.value_or(bundle.influential);
    std::sort(inf.influential.begin(), inf.influential.end());
    inf.influential.erase(std::unique(inf.influential.begin(), inf.influential.end()), inf.influential.end());
    if (!inf.influential.empty()) {
      const ImpactSummary impact = d.weights
                                       ? impact_summary(*d.weights, clusters, partition, inf.influential)
                                       : impact_summary(model, scale, clusters, partition, inf.influential);
      for (int g : d.active_groups) inf.impact.push_back(impact.groups[g]);
    }
    report.influence = std::move(inf);
  }

  if (bundle.grid) {
    const GridRequest& req = *bundle.grid;
    std::vector<SmoothPoint> points;
    for (const auto& r : report.records) {
      points.push_back({record_field(report, r, req.x), record_field(report, r, req.y),
                        record_field(report, r, req.value)});
    }
    const SmoothedGrid g = default_smooth(points, req.nx, req.ny, req.hx.value_or(0.0), req.hy.value_or(0.0));
    report.grid = GridSection{req.x, req.y, req.value, g.hx, g.hy, g.axes.xs, g.axes.ys, g.values};
  }

  result.weights = std::move(d.weights);
  result.model = model;
  result.scale = scale;
  result.conditioned_columns = bundle.conditioned_columns;
  return result;
}

}  // namespace borrow::io
