#include "borrow/io/report.hpp"

#include "borrow/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace borrow::io {

namespace {

void dump_into(const Json& v, std::string& out) {
  switch (v.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [key, item] : v.items()) {
        if (!first) out += ',';
        first = false;
        out += Json(key).dump();
        out += ':';
        dump_into(item, out);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ',';
        dump_into(v[k], out);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) {
        out += "null";
      } else {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", d);
        out += buf;
      }
      break;
    }
    default:
      out += v.dump();
  }
}

double as_double(const Json& v) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return v.get<double>();
}

Json doubles(const std::vector<double>& v) {
  Json a = Json::array();
  for (double d : v) a.push_back(d);
  return a;
}

std::vector<double> read_doubles(const Json& a) {
  std::vector<double> out;
  for (const auto& v : a) out.push_back(as_double(v));
  return out;
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!same(a[k], b[k])) return false;
  }
  return true;
}

bool same(const BoxStats& a, const BoxStats& b) {
  return same(a.min, b.min) && same(a.q1, b.q1) && same(a.median, b.median) && same(a.q3, b.q3) &&
         same(a.max, b.max);
}

// Keys of a per-group object must repeat the report's group keys, in order.
std::vector<std::string> object_keys(const Json& obj) {
  std::vector<std::string> keys;
  for (const auto& [k, v] : obj.items()) keys.push_back(k);
  return keys;
}

}  // namespace

std::string dump_json(const Json& value) {
  std::string out;
  dump_into(value, out);
  return out;
}

bool same_report(const Report& a, const Report& b) {
  if (a.schema_version != b.schema_version || a.group_keys != b.group_keys) return false;
  const ReportModel &ma = a.model, &mb = b.model;
  if (ma.n_obs != mb.n_obs || ma.n_coef != mb.n_coef || ma.family != mb.family ||
      ma.variance_mode != mb.variance_mode || ma.fixed_columns != mb.fixed_columns ||
      ma.conditioned_columns != mb.conditioned_columns || !same(ma.phi2, mb.phi2) ||
      ma.variance_fitted != mb.variance_fitted || ma.warnings != mb.warnings || ma.rules != mb.rules ||
      ma.terms.size() != mb.terms.size() ||
      ma.log_restricted_likelihood.has_value() != mb.log_restricted_likelihood.has_value()) {
    return false;
  }
  if (ma.log_restricted_likelihood && !same(*ma.log_restricted_likelihood, *mb.log_restricted_likelihood)) {
    return false;
  }
  for (std::size_t k = 0; k < ma.terms.size(); ++k) {
    const auto &x = ma.terms[k], &y = mb.terms[k];
    if (x.label != y.label || x.structure != y.structure || !same(x.sigma2, y.sigma2) ||
        !same(x.rho_space, y.rho_space) || !same(x.rho_time, y.rho_time)) {
      return false;
    }
  }
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto &x = a.records[i], &y = b.records[i];
    if (x.id != y.id || x.cluster != y.cluster || x.cluster_size != y.cluster_size ||
        x.lender_count != y.lender_count || !same(x.shrinkage, y.shrinkage) || !same(x.pooling, y.pooling) ||
        !same(x.ssbf, y.ssbf) || !same(x.fitted, y.fitted) || !same(x.response, y.response) ||
        !same(x.noise_variance, y.noise_variance) || !same(x.borrowing, y.borrowing) || !same(x.pssbf, y.pssbf) ||
        x.lenders != y.lenders || x.covariates.size() != y.covariates.size()) {
      return false;
    }
    for (std::size_t k = 0; k < x.covariates.size(); ++k) {
      if (x.covariates[k].first != y.covariates[k].first) return false;
      const auto &p = x.covariates[k].second, &q = y.covariates[k].second;
      if (p.index() != q.index()) return false;
      if (p.index() == 0 ? !same(std::get<double>(p), std::get<double>(q)) : std::get<1>(p) != std::get<1>(q)) {
        return false;
      }
    }
  }
  if (a.influence.has_value() != b.influence.has_value() || a.grid.has_value() != b.grid.has_value()) return false;
  if (a.influence) {
    const auto &x = *a.influence, &y = *b.influence;
    if (!same(x.cooks, y.cooks) || !same(x.pena, y.pena) || x.influential != y.influential ||
        x.impact.size() != y.impact.size()) {
      return false;
    }
    for (std::size_t g = 0; g < x.impact.size(); ++g) {
      if (x.impact[g].code != y.impact[g].code || x.impact[g].key != y.impact[g].key ||
          x.impact[g].targets != y.impact[g].targets || !same(x.impact[g].stats, y.impact[g].stats)) {
        return false;
      }
    }
  }
  if (a.grid) {
    const auto &x = *a.grid, &y = *b.grid;
    if (x.x_field != y.x_field || x.y_field != y.y_field || x.value_field != y.value_field || !same(x.hx, y.hx) ||
        !same(x.hy, y.hy) || !same(x.xs, y.xs) || !same(x.ys, y.ys) || x.values.rows() != y.values.rows() ||
        x.values.cols() != y.values.cols()) {
      return false;
    }
    for (Eigen::Index r = 0; r < x.values.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.values.cols(); ++c) {
        if (!same(x.values(r, c), y.values(r, c))) return false;
      }
    }
  }
  return true;
}

Json report_to_json(const Report& report) {
  const ReportModel& m = report.model;
  Json model = Json::object();
  model["n_obs"] = m.n_obs;
  model["n_coef"] = m.n_coef;
  model["family"] = m.family;
  model["variance_mode"] = m.variance_mode;
  model["fixed_columns"] = m.fixed_columns;
  model["conditioned_columns"] = m.conditioned_columns;
  Json variance = Json::object();
  variance["phi2"] = m.phi2;
  Json terms = Json::array();
  for (const auto& t : m.terms) {
    Json term = Json::object();
    term["label"] = t.label;
    term["structure"] = t.structure;
    term["sigma2"] = t.sigma2;
    term["rho_space"] = t.rho_space;
    term["rho_time"] = t.rho_time;
    terms.push_back(std::move(term));
  }
  variance["terms"] = std::move(terms);
  variance["fitted"] = m.variance_fitted;
  if (m.log_restricted_likelihood) variance["log_restricted_likelihood"] = *m.log_restricted_likelihood;
  variance["warnings"] = m.warnings;
  model["variance"] = std::move(variance);
  model["rules"] = m.rules;

  Json records = Json::array();
  for (const auto& r : report.records) {
    Json rec = Json::object();
    rec["id"] = r.id;
    rec["cluster"] = r.cluster;
    rec["cluster_size"] = r.cluster_size;
    rec["lender_count"] = r.lender_count;
    rec["shrinkage"] = r.shrinkage;
    rec["pooling"] = r.pooling;
    rec["ssbf"] = r.ssbf;
    rec["fitted"] = r.fitted;
    rec["response"] = r.response;
    rec["noise_variance"] = r.noise_variance;
    Json borrowing = Json::object(), pssbf = Json::object(), lenders = Json::object();
    for (std::size_t g = 0; g < report.group_keys.size(); ++g) {
      borrowing[report.group_keys[g]] = r.borrowing.at(g);
      pssbf[report.group_keys[g]] = r.pssbf.at(g);
      lenders[report.group_keys[g]] = r.lenders.at(g);
    }
    rec["borrowing"] = std::move(borrowing);
    rec["pssbf"] = std::move(pssbf);
    rec["lenders"] = std::move(lenders);
    Json cov = Json::object();
    for (const auto& [name, value] : r.covariates) {
      if (value.index() == 0) {
        cov[name] = std::get<double>(value);
      } else {
        cov[name] = std::get<std::string>(value);
      }
    }
    rec["covariates"] = std::move(cov);
    records.push_back(std::move(rec));
  }

  Json doc = Json::object();
  doc["schema_version"] = report.schema_version;
  doc["model"] = std::move(model);
  doc["group_keys"] = report.group_keys;
  doc["records"] = std::move(records);
  if (report.influence) {
    const auto& inf = *report.influence;
    Json section = Json::object();
    section["cooks"] = doubles(inf.cooks);
    section["pena"] = doubles(inf.pena);
    section["influential"] = inf.influential;
    Json impact = Json::array();
    for (const auto& g : inf.impact) {
      Json gj = Json::object();
      gj["code"] = g.code;
      gj["key"] = g.key;
      gj["targets"] = g.targets;
      gj["min"] = g.stats.min;
      gj["q1"] = g.stats.q1;
      gj["median"] = g.stats.median;
      gj["q3"] = g.stats.q3;
      gj["max"] = g.stats.max;
      impact.push_back(std::move(gj));
    }
    section["impact"] = std::move(impact);
    doc["influence"] = std::move(section);
  }
  if (report.grid) {
    const auto& g = *report.grid;
    Json section = Json::object();
    section["x"] = g.x_field;
    section["y"] = g.y_field;
    section["value"] = g.value_field;
    section["bandwidth"] = Json::array({g.hx, g.hy});
    section["xs"] = doubles(g.xs);
    section["ys"] = doubles(g.ys);
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < g.values.rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < g.values.cols(); ++c) row.push_back(g.values(r, c));
      rows.push_back(std::move(row));
    }
    section["values"] = std::move(rows);
    doc["grid"] = std::move(section);
  }
  return doc;
}

Report report_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("schema_version")) {
    throw SchemaVersionMismatch("document has no schema_version");
  }
  Report report;
  report.schema_version = doc.at("schema_version").get<int>();
  if (report.schema_version != kReportSchemaVersion) {
    throw SchemaVersionMismatch("expected schema_version " + std::to_string(kReportSchemaVersion) + ", found " +
                                std::to_string(report.schema_version));
  }
  try {
    const Json& m = doc.at("model");
    ReportModel& model = report.model;
    model.n_obs = m.at("n_obs").get<int>();
    model.n_coef = m.at("n_coef").get<int>();
    model.family = m.at("family").get<std::string>();
    model.variance_mode = m.at("variance_mode").get<std::string>();
    model.fixed_columns = m.at("fixed_columns").get<std::vector<std::string>>();
    model.conditioned_columns = m.at("conditioned_columns").get<std::vector<std::string>>();
    const Json& v = m.at("variance");
    model.phi2 = as_double(v.at("phi2"));
    for (const auto& t : v.at("terms")) {
      model.terms.push_back({t.at("label").get<std::string>(), t.at("structure").get<std::string>(),
                             as_double(t.at("sigma2")), as_double(t.at("rho_space")), as_double(t.at("rho_time"))});
    }
    model.variance_fitted = v.at("fitted").get<bool>();
    if (v.contains("log_restricted_likelihood")) {
      model.log_restricted_likelihood = as_double(v.at("log_restricted_likelihood"));
    }
    model.warnings = v.at("warnings").get<std::vector<std::string>>();
    model.rules = m.at("rules");

    report.group_keys = doc.at("group_keys").get<std::vector<std::string>>();
    for (const auto& rec : doc.at("records")) {
      ReportRecord r;
      r.id = rec.at("id").get<int>();
      r.cluster = rec.at("cluster").get<int>();
      r.cluster_size = rec.at("cluster_size").get<int>();
      r.lender_count = rec.at("lender_count").get<int>();
      r.shrinkage = as_double(rec.at("shrinkage"));
      r.pooling = as_double(rec.at("pooling"));
      r.ssbf = as_double(rec.at("ssbf"));
      r.fitted = as_double(rec.at("fitted"));
      r.response = as_double(rec.at("response"));
      r.noise_variance = as_double(rec.at("noise_variance"));
      for (const char* section : {"borrowing", "pssbf", "lenders"}) {
        if (object_keys(rec.at(section)) != report.group_keys) {
          throw SchemaVersionMismatch("record " + std::to_string(r.id) + ": " + section +
                                      " keys differ from the report's group keys");
        }
      }
      for (const auto& [k, val] : rec.at("borrowing").items()) r.borrowing.push_back(as_double(val));
      for (const auto& [k, val] : rec.at("pssbf").items()) r.pssbf.push_back(as_double(val));
      for (const auto& [k, val] : rec.at("lenders").items()) r.lenders.push_back(val.get<int>());
      for (const auto& [k, val] : rec.at("covariates").items()) {
        if (val.is_string()) {
          r.covariates.emplace_back(k, val.get<std::string>());
        } else {
          r.covariates.emplace_back(k, as_double(val));
        }
      }
      report.records.push_back(std::move(r));
    }
    if (static_cast<int>(report.records.size()) != model.n_obs) {
      throw SchemaVersionMismatch("record count " + std::to_string(report.records.size()) + " differs from n_obs " +
                                  std::to_string(model.n_obs));
    }
    if (doc.contains("influence")) {
      const Json& s = doc.at("influence");
      InfluenceSection inf;
      inf.cooks = read_doubles(s.at("cooks"));
      inf.pena = read_doubles(s.at("pena"));
      inf.influential = s.at("influential").get<std::vector<int>>();
      for (const auto& g : s.at("impact")) {
        GroupImpact gi;
        gi.code = g.at("code").get<int>();
        gi.key = g.at("key").get<std::string>();
        gi.targets = g.at("targets").get<int>();
        gi.stats = {as_double(g.at("min")), as_double(g.at("q1")), as_double(g.at("median")),
                    as_double(g.at("q3")), as_double(g.at("max"))};
        inf.impact.push_back(std::move(gi));
      }
      report.influence = std::move(inf);
    }
    if (doc.contains("grid")) {
      const Json& s = doc.at("grid");
      GridSection g;
      g.x_field = s.at("x").get<std::string>();
      g.y_field = s.at("y").get<std::string>();
      g.value_field = s.at("value").get<std::string>();
      g.hx = as_double(s.at("bandwidth").at(0));
      g.hy = as_double(s.at("bandwidth").at(1));
      g.xs = read_doubles(s.at("xs"));
      g.ys = read_doubles(s.at("ys"));
      const Json& rows = s.at("values");
      g.values.resize(static_cast<Eigen::Index>(g.ys.size()), static_cast<Eigen::Index>(g.xs.size()));
      if (rows.size() != g.ys.size()) throw SchemaVersionMismatch("grid rows differ from ys");
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != g.xs.size()) throw SchemaVersionMismatch("grid columns differ from xs");
        for (std::size_t c = 0; c < rows[r].size(); ++c) g.values(r, c) = as_double(rows[r][c]);
      }
      report.grid = std::move(g);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaVersionMismatch(std::string("malformed report: ") + e.what());
  }
  return report;
}

std::string dump_report(const Report& report) { return dump_json(report_to_json(report)) + "\n"; }

Report parse_report(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return report_from_json(doc);
}

void write_report(const Report& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << dump_report(report);
  if (!out) throw ParseError("failed writing '" + path + "'");
}

Report read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

}  // namespace borrow::io
