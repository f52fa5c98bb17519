#pragma once

#include "borrow/covariance.hpp"
#include "borrow/glmm.hpp"
#include "borrow/io/csv.hpp"
#include "borrow/model.hpp"
#include "borrow/partition.hpp"
#include "borrow/reml.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace borrow::io {

using Json = nlohmann::ordered_json;

/// Graph loaded from an adjacency file together with the labels of its nodes.
struct LabelledAdjacency {
  Adjacency graph;
  std::vector<std::string> labels;
  std::map<std::string, int> index;
  int node(const std::string& label) const;  // ParseError if unknown
  static LabelledAdjacency make(Adjacency graph, std::vector<std::string> labels);
};

/// "matrix": header row of node labels then a square 0/1 block.
/// "edges": header row then one undirected edge per line as two labels; nodes are the
/// lexicographically sorted labels (plus any listed under "nodes").
LabelledAdjacency load_adjacency(const Json& spec_adjacency, const std::string& base_dir);

/// Smoothed-contour request attached to a decomposition report.
struct GridRequest {
  std::string x, y, value = "ssbf";
  int nx = 50, ny = 50;
  std::optional<double> hx, hy;
};

/// Model fragments for one random term, for reporting.
struct TermInfo {
  std::string label;       // column(s) joined by ':'
  std::string structure;   // iid | car | spacetime_ar
};

struct ProblemBundle {
  DataTable data;
  Json spec_document;
  std::optional<LabelledAdjacency> adjacency;

  ModelSpec model;                 // variances at their fixed or starting values
  double phi2 = 1.0;               // noise variance = phi2 * base (1, or the pseudo-variance)
  Eigen::VectorXd response;        // y, or the log-rate pseudo-response for count data
  bool poisson = false;
  PseudoVarianceMode variance_mode = PseudoVarianceMode::MomentMatched;
  std::optional<VarianceFitPlan> fit_plan;  // set when any variance parameter is "fit"

  std::vector<std::string> fixed_names;
  std::vector<std::string> random_names;
  std::vector<TermInfo> terms;
  std::vector<RelationshipRule> rules;
  Json rule_definitions = Json::array();
  std::vector<int> conditioned_columns;
  std::vector<int> influential;
  std::vector<std::string> covariate_columns;
  std::optional<GridRequest> grid;
};

/// Reads the CSV and JSON problem file, loads the adjacency file it names (relative to the problem file).
ProblemBundle load_problem(const std::string& data_path, const std::string& spec_path);

/// Builds the bundle from in-memory pieces; the adjacency is required when the problem file uses a graph.
ProblemBundle assemble_problem(DataTable data, Json spec, std::optional<LabelledAdjacency> adjacency);

/// Fresh assembly on the data with the given rows removed.
ProblemBundle without_rows(const ProblemBundle& bundle, std::span<const int> rows);

}  // namespace borrow::io
