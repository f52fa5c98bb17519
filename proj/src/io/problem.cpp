#include "borrow/io/problem.hpp"

#include "borrow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace borrow::io {

namespace {

const Json& require(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing \"" + key + "\"");
  return obj.at(key);
}

std::string require_string(const Json& obj, const char* key, const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(where + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

// A variance parameter given as a number or the string "fit".
struct Setting {
  double value = 0.0;
  bool fit = false;
};

std::optional<Setting> read_setting(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
  const Json& v = obj.at(key);
  if (v.is_string() && v.get<std::string>() == "fit") return Setting{0.0, true};
  if (v.is_number()) return Setting{v.get<double>(), false};
  throw ParseError(where + ": \"" + key + "\" must be a number or \"fit\"");
}

std::vector<std::string> sorted_levels(const std::vector<std::string>& cells) {
  std::set<std::string> s(cells.begin(), cells.end());
  return {s.begin(), s.end()};
}

std::vector<int> level_codes(const std::vector<std::string>& cells, const std::vector<std::string>& levels) {
  std::vector<int> codes(cells.size());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    codes[r] = static_cast<int>(std::lower_bound(levels.begin(), levels.end(), cells[r]) - levels.begin());
  }
  return codes;
}

double sample_variance(const Eigen::VectorXd& y) {
  if (y.size() < 2) return 1.0;
  const double v = (y.array() - y.mean()).square().sum() / (y.size() - 1.0);
  return v > 0.0 ? v : 1.0;
}

std::vector<int> node_codes(const std::vector<std::string>& cells, const LabelledAdjacency& adj) {
  std::vector<int> out(cells.size());
  for (std::size_t r = 0; r < cells.size(); ++r) out[r] = adj.node(cells[r]);
  return out;
}

void note_column(std::vector<std::string>& cols, const std::string& name) {
  if (std::find(cols.begin(), cols.end(), name) == cols.end()) cols.push_back(name);
}

const LabelledAdjacency& need_adjacency(const std::optional<LabelledAdjacency>& adj, const std::string& where) {
  if (!adj) throw ParseError(where + ": a graph structure needs the \"adjacency\" section");
  return *adj;
}

}  // namespace

LabelledAdjacency LabelledAdjacency::make(Adjacency graph, std::vector<std::string> labels) {
  if (static_cast<int>(labels.size()) != graph.nodes()) throw DimensionError("one label per adjacency node");
  LabelledAdjacency out;
  out.graph = std::move(graph);
  out.labels = std::move(labels);
  for (std::size_t k = 0; k < out.labels.size(); ++k) {
    if (!out.index.emplace(out.labels[k], static_cast<int>(k)).second) {
      throw ParseError("adjacency label '" + out.labels[k] + "' appears twice");
    }
  }
  return out;
}

int LabelledAdjacency::node(const std::string& label) const {
  const auto it = index.find(label);
  if (it == index.end()) throw ParseError("'" + label + "' is not a node of the adjacency");
  return it->second;
}

LabelledAdjacency load_adjacency(const Json& spec_adjacency, const std::string& base_dir) {
  const std::string where = "adjacency";
  std::filesystem::path path = require_string(spec_adjacency, "path", where);
  if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
  const std::string format = spec_adjacency.value("format", std::string("edges"));
  const DataTable table = read_csv(path.string());
  if (format == "matrix") {
    const auto& names = table.names();
    if (table.rows() != names.size()) {
      throw ParseError(path.string() + ": matrix has " + std::to_string(names.size()) + " labels but " +
                       std::to_string(table.rows()) + " rows");
    }
    Eigen::MatrixXd m(names.size(), names.size());
    for (std::size_t k = 0; k < names.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = table.numeric(names[k]);
    return LabelledAdjacency::make(Adjacency::from_dense(m), names);
  }
  if (format == "edges") {
    if (table.names().size() != 2) throw ParseError(path.string() + ": an edge list has exactly two columns");
    const auto& a = table.strings(table.names()[0]);
    const auto& b = table.strings(table.names()[1]);
    std::set<std::string> nodes(a.begin(), a.end());
    nodes.insert(b.begin(), b.end());
    if (spec_adjacency.contains("nodes")) {
      for (const auto& n : spec_adjacency.at("nodes")) nodes.insert(n.is_string() ? n.get<std::string>() : n.dump());
    }
    const std::vector<std::string> labels(nodes.begin(), nodes.end());
    std::map<std::string, int> index;
    for (std::size_t k = 0; k < labels.size(); ++k) index[labels[k]] = static_cast<int>(k);
    std::vector<std::pair<int, int>> edges;
    for (std::size_t r = 0; r < a.size(); ++r) edges.emplace_back(index.at(a[r]), index.at(b[r]));
    return LabelledAdjacency::make(Adjacency::from_edges(static_cast<int>(labels.size()), edges), labels);
  }
  throw ParseError(where + ": format must be \"matrix\" or \"edges\", got \"" + format + "\"");
}

ProblemBundle assemble_problem(DataTable data, Json spec, std::optional<LabelledAdjacency> adjacency) {
  if (!spec.is_object()) throw ParseError("spec: top level must be an object");
  ProblemBundle b;
  b.adjacency = std::move(adjacency);
  const Eigen::Index n = static_cast<Eigen::Index>(data.rows());
  if (n == 0) throw ParseError("data: no rows");

  // Response, optionally as counts with an offset.
  const std::string response = require_string(spec, "response", "spec");
  note_column(b.covariate_columns, response);
  Eigen::VectorXd base_variance = Eigen::VectorXd::Ones(n);
  if (spec.contains("variance_mode")) {
    b.variance_mode = parse_pseudo_variance_mode(spec.at("variance_mode").get<std::string>());
  }
  if (spec.contains("offset") && !spec.at("offset").is_null()) {
    const std::string offset = spec.at("offset").get<std::string>();
    note_column(b.covariate_columns, offset);
    const PseudoData pd = poisson_pseudo_observations(data.numeric(response), data.numeric(offset), b.variance_mode);
    b.poisson = true;
    b.response = pd.response;
    base_variance = pd.variance;
  } else {
    b.response = data.numeric(response);
  }

  // Fixed terms.
  const Json& fixed = require(spec, "fixed", "spec");
  if (!fixed.is_array() || fixed.empty()) throw ParseError("spec: \"fixed\" must be a non-empty array");
  bool has_intercept = false;
  for (const auto& t : fixed) {
    const std::string type = t.value("type", std::string("numeric"));
    has_intercept = has_intercept || type == "intercept" || (type == "categorical" && t.value("intercept_set", false));
  }
  std::vector<Eigen::VectorXd> fixed_cols;
  bool first_categorical = true;
  for (std::size_t k = 0; k < fixed.size(); ++k) {
    const Json& t = fixed[k];
    const std::string where = "fixed[" + std::to_string(k) + "]";
    const std::string type = t.value("type", std::string("numeric"));
    if (type == "intercept") {
      fixed_cols.push_back(Eigen::VectorXd::Ones(n));
      b.fixed_names.push_back("(intercept)");
      continue;
    }
    const std::string column = require_string(t, "column", where);
    note_column(b.covariate_columns, column);
    if (type == "numeric") {
      fixed_cols.push_back(data.numeric(column));
      b.fixed_names.push_back(column);
    } else if (type == "categorical") {
      const auto& cells = data.strings(column);
      const auto levels = sorted_levels(cells);
      const auto codes = level_codes(cells, levels);
      const bool full = t.value("intercept_set", false) || (!has_intercept && first_categorical);
      first_categorical = false;
      for (std::size_t l = full ? 0 : 1; l < levels.size(); ++l) {
        Eigen::VectorXd col(n);
        for (Eigen::Index r = 0; r < n; ++r) col(r) = codes[r] == static_cast<int>(l) ? 1.0 : 0.0;
        fixed_cols.push_back(std::move(col));
        b.fixed_names.push_back(column + "=" + levels[l]);
      }
    } else {
      throw ParseError(where + ": type must be \"intercept\", \"categorical\" or \"numeric\", got \"" + type + "\"");
    }
  }
  b.model.fixed_design.resize(n, static_cast<Eigen::Index>(fixed_cols.size()));
  for (std::size_t k = 0; k < fixed_cols.size(); ++k) b.model.fixed_design.col(static_cast<Eigen::Index>(k)) = fixed_cols[k];

  // Variance settings: standard deviations or "fit".
  const Json variance = spec.value("variance", Json::object());
  const double start = b.poisson ? 1.0 : 0.5 * sample_variance(b.response);
  const Setting phi = read_setting(variance, "phi", "variance").value_or(Setting{1.0, !b.poisson});
  const Setting sigma = read_setting(variance, "sigma", "variance").value_or(Setting{0.0, true});
  const auto rho_s = read_setting(variance, "rho_s", "variance");
  const auto rho_t = read_setting(variance, "rho_t", "variance");
  if (!phi.fit && !(phi.value > 0.0)) throw ParseError("variance: phi must be positive");
  const double phi2 = phi.fit ? (b.poisson ? 1.0 : start) : phi.value * phi.value;
  b.phi2 = phi2;
  b.model.noise_variances = phi2 * base_variance;
  VarianceFitPlan plan;
  plan.phi_scale = phi.fit;
  bool any_fit = phi.fit;

  // Random terms.
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::Index offset_col = 0;
  const Json random = spec.value("random", Json::array());
  for (std::size_t k = 0; k < random.size(); ++k) {
    const Json& t = random[k];
    const std::string where = "random[" + std::to_string(k) + "]";
    const std::string structure = require_string(t, "structure", where);
    std::vector<std::string> columns;
    if (t.contains("columns")) {
      columns = t.at("columns").get<std::vector<std::string>>();
    } else {
      columns.push_back(require_string(t, "column", where));
    }
    for (const auto& c : columns) note_column(b.covariate_columns, c);
    const Json params = t.value("params", Json::object());
    const Setting s = read_setting(params, "sigma", where + ".params").value_or(sigma);
    const double sigma2 = s.fit ? start : s.value * s.value;
    if (!s.fit && !(s.value > 0.0)) throw ParseError(where + ": sigma must be positive");
    TermFitPlan term{s.fit, false, false};

    auto rho = [&](const char* key, const std::optional<Setting>& global) {
      const auto own = read_setting(params, key, where + ".params");
      const Setting r = own ? *own : global.value_or(Setting{0.5, true});
      return r;
    };

    std::string label = columns.front();
    if (structure == "iid") {
      if (columns.size() != 1) throw ParseError(where + ": iid takes one column");
      const auto& cells = data.strings(columns[0]);
      const auto levels = sorted_levels(cells);
      const auto codes = level_codes(cells, levels);
      for (Eigen::Index r = 0; r < n; ++r) triplets.emplace_back(r, offset_col + codes[r], 1.0);
      for (const auto& l : levels) b.random_names.push_back(columns[0] + "=" + l);
      b.model.random_structure.push_back(IidBlocks{{IidBlock{static_cast<int>(levels.size()), sigma2}}});
      offset_col += static_cast<Eigen::Index>(levels.size());
    } else if (structure == "car") {
      if (columns.size() != 1) throw ParseError(where + ": car takes one column");
      const auto& adj = need_adjacency(b.adjacency, where);
      const auto nodes = node_codes(data.strings(columns[0]), adj);
      for (Eigen::Index r = 0; r < n; ++r) triplets.emplace_back(r, offset_col + nodes[r], 1.0);
      for (const auto& l : adj.labels) b.random_names.push_back(columns[0] + "=" + l);
      const Setting rs = rho("rho_s", rho_s);
      term.rho_space = rs.fit;
      b.model.random_structure.push_back(CarStructure{sigma2, rs.fit ? 0.5 : rs.value, adj.graph});
      offset_col += adj.graph.nodes();
    } else if (structure == "spacetime_ar") {
      if (columns.size() != 2) throw ParseError(where + ": spacetime_ar takes [space, time] columns");
      const auto& adj = need_adjacency(b.adjacency, where);
      const auto nodes = node_codes(data.strings(columns[0]), adj);
      const Eigen::VectorXd time = data.numeric(columns[1]);
      const double t0 = time.minCoeff();
      for (Eigen::Index r = 0; r < n; ++r) {
        if (time(r) != std::floor(time(r))) {
          throw ParseError(where + ": time column '" + columns[1] + "' must hold integers (row " +
                           std::to_string(r) + ")");
        }
      }
      const int periods = static_cast<int>(time.maxCoeff() - t0) + 1;
      const int j_count = adj.graph.nodes();
      for (Eigen::Index r = 0; r < n; ++r) {
        const int t = static_cast<int>(time(r) - t0);
        triplets.emplace_back(r, offset_col + static_cast<Eigen::Index>(t) * j_count + nodes[r], 1.0);
      }
      for (int t = 0; t < periods; ++t) {
        for (const auto& l : adj.labels) {
          b.random_names.push_back(columns[0] + "=" + l + ":" + columns[1] + "=" + format_double(t0 + t));
        }
      }
      const Setting rs = rho("rho_s", rho_s);
      const Setting rt = rho("rho_t", rho_t);
      term.rho_space = rs.fit;
      term.rho_time = rt.fit;
      b.model.random_structure.push_back(
          SpaceTimeAr{sigma2, rs.fit ? 0.5 : rs.value, rt.fit ? 0.5 : rt.value, adj.graph, periods});
      offset_col += static_cast<Eigen::Index>(periods) * j_count;
      label = columns[0] + ":" + columns[1];
    } else {
      throw ParseError(where + ": structure must be iid, car or spacetime_ar, got \"" + structure + "\"");
    }
    b.terms.push_back({label, structure});
    any_fit = any_fit || term.sigma2 || term.rho_space || term.rho_time;
    plan.terms.push_back(term);
  }
  b.model.random_design.resize(n, offset_col);
  b.model.random_design.setFromTriplets(triplets.begin(), triplets.end());
  if (any_fit) b.fit_plan = plan;

  // Relationship rules.
  const Json rules = spec.value("relationship_rules", Json::array());
  for (std::size_t k = 0; k < rules.size(); ++k) {
    const Json& r = rules[k];
    const std::string where = "relationship_rules[" + std::to_string(k) + "]";
    const std::string type = require_string(r, "type", where);
    const std::string column = require_string(r, "column", where);
    const std::string name = r.value("name", column);
    note_column(b.covariate_columns, column);
    if (type == "same") {
      const auto& cells = data.strings(column);
      b.rules.push_back(ColumnEqualRule{name, level_codes(cells, sorted_levels(cells))});
    } else if (type == "graph_distance") {
      GraphDistanceRule g{name, node_codes(data.strings(column), need_adjacency(b.adjacency, where)),
                          b.adjacency->graph};
      if (r.contains("bins")) g.bins = r.at("bins").get<std::vector<int>>();
      b.rules.push_back(std::move(g));
    } else if (type == "lag") {
      std::vector<double> values(static_cast<std::size_t>(n));
      const Eigen::VectorXd v = data.numeric(column);
      for (Eigen::Index i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = v(i);
      LagRule l{name, std::move(values)};
      if (r.contains("bins")) l.bins = r.at("bins").get<std::vector<double>>();
      b.rules.push_back(std::move(l));
    } else {
      throw ParseError(where + ": type must be same, graph_distance or lag, got \"" + type + "\"");
    }
    b.rule_definitions.push_back(r);
  }

  for (const auto& c : spec.value("condition_on", std::vector<std::string>{})) {
    const auto it = std::find(b.fixed_names.begin(), b.fixed_names.end(), c);
    if (it == b.fixed_names.end()) throw UnknownColumn("condition_on: '" + c + "' is not a fixed-effect column");
    b.conditioned_columns.push_back(static_cast<int>(it - b.fixed_names.begin()));
  }
  b.influential = spec.value("influential", std::vector<int>{});
  for (int i : b.influential) {
    if (i < 0 || i >= n) throw IndexOutOfRange("influential index " + std::to_string(i));
  }

  if (spec.contains("grid")) {
    const Json& g = spec.at("grid");
    GridRequest req;
    req.x = require_string(g, "x", "grid");
    req.y = require_string(g, "y", "grid");
    req.value = g.value("value", req.value);
    if (g.contains("size")) {
      const auto size = g.at("size").get<std::vector<int>>();
      if (size.size() != 2 || size[0] < 2 || size[1] < 2) throw ParseError("grid: size must be [nx, ny] >= 2");
      req.nx = size[0];
      req.ny = size[1];
    }
    if (g.contains("bandwidth")) {
      const auto h = g.at("bandwidth").get<std::vector<double>>();
      if (h.size() != 2) throw ParseError("grid: bandwidth must be [hx, hy]");
      req.hx = h[0];
      req.hy = h[1];
    }
    b.grid = req;
  }

  b.data = std::move(data);
  b.spec_document = std::move(spec);
  return b;
}

ProblemBundle load_problem(const std::string& data_path, const std::string& spec_path) {
  std::ifstream in(spec_path);
  if (!in) throw ParseError("cannot open spec '" + spec_path + "'");
  Json spec;
  try {
    spec = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(spec_path + ": " + e.what());
  }
  std::optional<LabelledAdjacency> adjacency;
  if (spec.contains("adjacency") && !spec.at("adjacency").is_null()) {
    adjacency = load_adjacency(spec.at("adjacency"), std::filesystem::path(spec_path).parent_path().string());
  }
  try {
    return assemble_problem(read_csv(data_path), std::move(spec), std::move(adjacency));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(spec_path + ": " + e.what());
  }
}

ProblemBundle without_rows(const ProblemBundle& bundle, std::span<const int> rows) {
  std::vector<int> drop(rows.begin(), rows.end());
  for (int r : drop) {
    if (r < 0 || static_cast<std::size_t>(r) >= bundle.data.rows()) {
      throw IndexOutOfRange("row " + std::to_string(r) + " outside the data");
    }
  }
  std::sort(drop.begin(), drop.end());
  drop.erase(std::unique(drop.begin(), drop.end()), drop.end());
  Json spec = bundle.spec_document;
  // Influential indices refer to the full data; remap the survivors.
  if (spec.contains("influential")) {
    std::vector<int> kept;
    for (int i : spec.at("influential").get<std::vector<int>>()) {
      if (std::binary_search(drop.begin(), drop.end(), i)) continue;
      kept.push_back(i - static_cast<int>(std::lower_bound(drop.begin(), drop.end(), i) - drop.begin()));
    }
    spec["influential"] = kept;
  }
  return assemble_problem(bundle.data.without_rows(drop), std::move(spec), bundle.adjacency);
}

}  // namespace borrow::io
