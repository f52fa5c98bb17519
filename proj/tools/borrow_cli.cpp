// Command-line front end: decomposition reports, influence, oracle checks, variance fitting,
// contour smoothing and the explorer HTTP service.

#include "borrow/errors.hpp"
#include "borrow/io/checks.hpp"
#include "borrow/io/pipeline.hpp"
#include "borrow/io/problem.hpp"
#include "borrow/io/report.hpp"
#include "borrow/io/serve.hpp"
#include "borrow/io/smoothing.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace borrow;
using namespace borrow::io;

namespace {

struct Globals {
  std::string data, spec, out, full_weights, points, report, host = "127.0.0.1";
  int port = 8080;
  int threads = 1;
};

void require_inputs(const Globals& g) {
  if (g.data.empty() || g.spec.empty()) throw ParseError("--data and --spec are required");
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << text;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

int run_decompose(const Globals& g, bool influence) {
  require_inputs(g);
  const ProblemBundle bundle = load_problem(g.data, g.spec);
  PipelineOptions opts;
  opts.keep_full = !g.full_weights.empty();
  opts.threads = g.threads;
  opts.influence = influence;
  if (!g.points.empty()) opts.influential = read_json_file(g.points).get<std::vector<int>>();
  const PipelineResult result = run_pipeline(bundle, opts);
  for (const auto& w : result.report.model.warnings) std::cerr << "warning: " << w << "\n";
  if (result.weights) write_matrix_csv(g.full_weights, *result.weights);
  emit(dump_report(result.report), g.out);
  return 0;
}

int run_check(const Globals& g, const std::string& suite, int count, std::uint64_t seed) {
  std::vector<CheckProblem> problems;
  if (suite != "oneway") {
    if (!g.data.empty() || !g.spec.empty()) {
      require_inputs(g);
      const ProblemBundle bundle = load_problem(g.data, g.spec);
      ModelSpec spec = bundle.model;
      if (bundle.fit_plan) spec = apply_estimates(spec, fit_bundle_variances(bundle));
      problems.push_back({spec, bundle.response});
    } else {
      problems = seeded_problems(count, seed);
    }
  }
  CheckResult r;
  if (suite == "oneway") {
    r = check_oneway(count, seed);
  } else if (suite == "dense") {
    r = check_dense(problems);
  } else if (suite == "hat") {
    r = check_hat(problems);
  } else {
    r = check_deletion(problems);
  }
  Json body = Json::object();
  body["check"] = r.name;
  body["instances"] = r.instances;
  body["max_error"] = r.max_error;
  body["tolerance"] = r.tolerance;
  body["passed"] = r.passed;
  emit(dump_json(body) + "\n", g.out);
  std::cerr << (r.passed ? "PASS " : "FAIL ") << r.name << " max_error=" << format_double(r.max_error)
            << " tolerance=" << format_double(r.tolerance) << "\n";
  return r.passed ? 0 : 3;
}

int run_fit_variance(const Globals& g) {
  require_inputs(g);
  const ProblemBundle bundle = load_problem(g.data, g.spec);
  const VarianceEstimates est = fit_bundle_variances(bundle);
  Json body = Json::object();
  body["phi2"] = bundle.phi2 * est.phi_scale;
  Json terms = Json::array();
  for (std::size_t k = 0; k < est.terms.size(); ++k) {
    Json t = Json::object();
    t["label"] = bundle.terms[k].label;
    t["structure"] = bundle.terms[k].structure;
    t["sigma2"] = est.terms[k].sigma2;
    t["rho_space"] = est.terms[k].rho_space;
    t["rho_time"] = est.terms[k].rho_time;
    terms.push_back(std::move(t));
  }
  body["terms"] = std::move(terms);
  body["log_restricted_likelihood"] = est.log_restricted_likelihood;
  body["iterations"] = est.iterations;
  body["converged"] = est.converged;
  body["at_boundary"] = est.at_boundary;
  body["warnings"] = est.warnings;
  for (const auto& w : est.warnings) std::cerr << "warning: " << w << "\n";
  emit(dump_json(body) + "\n", g.out);
  return 0;
}

// --points holds [[x, y, value], ...] or {"points": [...], "size": [nx, ny], "bandwidth": [hx, hy]}.
int run_smooth(const Globals& g) {
  if (g.points.empty()) throw ParseError("smooth needs --points");
  const Json doc = read_json_file(g.points);
  const Json& list = doc.is_array() ? doc : doc.at("points");
  std::vector<SmoothPoint> points;
  for (const auto& p : list) {
    if (!p.is_array() || p.size() != 3) throw ParseError("each point must be [x, y, value]");
    points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  }
  int nx = 50, ny = 50;
  double hx = 0.0, hy = 0.0;
  if (doc.is_object() && doc.contains("size")) {
    nx = doc.at("size").at(0).get<int>();
    ny = doc.at("size").at(1).get<int>();
  }
  if (doc.is_object() && doc.contains("bandwidth")) {
    hx = doc.at("bandwidth").at(0).get<double>();
    hy = doc.at("bandwidth").at(1).get<double>();
  }
  const SmoothedGrid grid = default_smooth(points, nx, ny, hx, hy);
  Json body = Json::object();
  body["bandwidth"] = Json::array({grid.hx, grid.hy});
  body["xs"] = grid.axes.xs;
  body["ys"] = grid.axes.ys;
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < grid.values.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < grid.values.cols(); ++c) row.push_back(grid.values(r, c));
    rows.push_back(std::move(row));
  }
  body["values"] = std::move(rows);
  emit(dump_json(body) + "\n", g.out);
  return 0;
}

HttpServer* active_server = nullptr;

void handle_signal(int) {
  if (active_server) active_server->stop();
}

int run_serve(const Globals& g) {
  std::unique_ptr<ExplorerService> service;
  if (!g.report.empty()) {
    service = std::make_unique<ExplorerService>(read_report(g.report));
  } else {
    require_inputs(g);
    PipelineOptions opts;
    opts.threads = g.threads;
    service = std::make_unique<ExplorerService>(load_problem(g.data, g.spec), opts);
  }
  HttpServer server(*service);
  const int port = server.bind(g.host, g.port);
  std::cerr << "serving " << (service->recompute_mode() ? "recompute" : "static") << " mode on http://" << g.host
            << ":" << port << "\n";
  active_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  server.run();
  active_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Borrowing-factor decomposition of hierarchical linear model estimates"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--data", g.data, "CSV data file")->check(CLI::ExistingFile);
  app.add_option("--spec", g.spec, "JSON model spec")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output path (stdout when omitted)");
  app.add_option("--full-weights", g.full_weights, "Write the dense N x N weight matrix as CSV");
  app.add_option("--points", g.points, "JSON: influential indices (influence) or [x, y, value] points (smooth)")
      ->check(CLI::ExistingFile);
  app.add_option("--port", g.port, "HTTP port for serve (0 picks a free port)");
  app.add_option("--threads", g.threads, "Worker threads for the decomposition")->check(CLI::PositiveNumber);

  auto* decompose = app.add_subcommand("decompose", "Per-observation shrinkage, pooling, SSBF and PSSBF report");
  auto* influence = app.add_subcommand("influence", "Decomposition report with Cook's distance, S_i and impact");
  auto* check = app.add_subcommand("check", "Compare the engine against an oracle suite");
  std::string suite;
  int count = 50;
  std::uint64_t seed = 1;
  check->add_option("suite", suite, "oneway | dense | hat | deletion")
      ->required()
      ->check(CLI::IsMember({"oneway", "dense", "hat", "deletion"}));
  check->add_option("--instances", count, "Seeded instances when no data is given");
  check->add_option("--seed", seed, "First seed");
  auto* fit = app.add_subcommand("fit-variance", "REML estimates of the variance parameters");
  auto* smooth = app.add_subcommand("smooth", "Nadaraya-Watson grid over --points");
  auto* serve = app.add_subcommand("serve", "HTTP API for the explorer");
  serve->add_option("--report", g.report, "Serve a saved report (static mode)")->check(CLI::ExistingFile);
  serve->add_option("--host", g.host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*decompose) return run_decompose(g, false);
    if (*influence) return run_decompose(g, true);
    if (*check) return run_check(g, suite, count, seed);
    if (*fit) return run_fit_variance(g);
    if (*smooth) return run_smooth(g);
    if (*serve) return run_serve(g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: ParseError: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
