#pragma once

#include "borrow/influence.hpp"
#include "borrow/io/problem.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace borrow::io {

inline constexpr int kReportSchemaVersion = 1;

using CovariateValue = std::variant<double, std::string>;

struct ReportRecord {
  int id = 0;
  int cluster = 0;
  int cluster_size = 0;
  int lender_count = 0;
  double shrinkage = 0.0;
  double pooling = 0.0;
  double ssbf = 0.0;
  double fitted = 0.0;
  double response = 0.0;
  double noise_variance = 0.0;
  // Aligned with Report::group_keys.
  std::vector<double> borrowing;
  std::vector<double> pssbf;
  std::vector<int> lenders;
  std::vector<std::pair<std::string, CovariateValue>> covariates;
};

struct TermReport {
  std::string label;
  std::string structure;
  double sigma2 = 0.0;
  double rho_space = 0.0;
  double rho_time = 0.0;
};

struct ReportModel {
  int n_obs = 0;
  int n_coef = 0;
  std::string family;         // gaussian | poisson
  std::string variance_mode;  // pseudo-variance mode for count data
  std::vector<std::string> fixed_columns;
  std::vector<std::string> conditioned_columns;
  double phi2 = 1.0;  // multiplier on the base noise variance
  std::vector<TermReport> terms;
  bool variance_fitted = false;
  std::optional<double> log_restricted_likelihood;
  std::vector<std::string> warnings;
  Json rules = Json::array();
};

struct InfluenceSection {
  std::vector<double> cooks;  // average Cook's distance per cluster; NaN where undefined
  std::vector<double> pena;   // per observation
  std::vector<int> influential;
  std::vector<GroupImpact> impact;
};

struct GridSection {
  std::string x_field, y_field, value_field;
  double hx = 0.0, hy = 0.0;
  std::vector<double> xs, ys;
  Eigen::MatrixXd values;  // ys.size() x xs.size(); NaN marks missing nodes
};

struct Report {
  int schema_version = kReportSchemaVersion;
  ReportModel model;
  std::vector<std::string> group_keys;
  std::vector<ReportRecord> records;
  std::optional<InfluenceSection> influence;
  std::optional<GridSection> grid;
};

/// Field-for-field equality; NaN equals NaN.
bool same_report(const Report& a, const Report& b);

Json report_to_json(const Report& report);
Report report_from_json(const Json& document);

/// Serialized text with every double at 17 significant digits; optional sections are
/// omitted when absent.
std::string dump_report(const Report& report);
Report parse_report(const std::string& text);

void write_report(const Report& report, const std::string& path);
Report read_report(const std::string& path);

/// JSON text with doubles printed by %.17g (non-finite as null) and two-space indentation off.
std::string dump_json(const Json& value);

}  // namespace borrow::io
