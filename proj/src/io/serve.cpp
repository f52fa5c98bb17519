#include "borrow/io/serve.hpp"

#include "borrow/errors.hpp"

#include <httplib.h>

namespace borrow::io {

namespace {

HttpResponse error_response(int status, const std::string& message) {
  Json body = Json::object();
  body["error"] = message;
  return {status, dump_json(body)};
}

}  // namespace

ExplorerService::ExplorerService(Report report)
    : report_text_(dump_report(report)), n_obs_(report.records.size()) {
  auto base = std::make_shared<PipelineResult>();
  base->report = std::move(report);
  base_ = std::move(base);
}

ExplorerService::ExplorerService(ProblemBundle bundle, PipelineOptions options)
    : bundle_(std::move(bundle)), options_(std::move(options)) {
  options_.keep_full = false;
  base_ = std::make_shared<const PipelineResult>(run_pipeline(*bundle_, options_));
  report_text_ = dump_report(base_->report);
  n_obs_ = base_->report.records.size();
}

HttpResponse ExplorerService::health() const {
  Json body = Json::object();
  body["status"] = "ok";
  body["mode"] = recompute_mode() ? "recompute" : "static";
  body["n_obs"] = n_obs_;
  body["schema_version"] = kReportSchemaVersion;
  return {200, dump_json(body)};
}

HttpResponse ExplorerService::report() const { return {200, report_text_}; }

HttpResponse ExplorerService::weights_row(const std::string& index) const {
  std::size_t pos = 0;
  long long i = -1;
  try {
    i = std::stoll(index, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != index.size()) return error_response(400, "row index must be an integer");
  if (i < 0 || static_cast<std::size_t>(i) >= n_obs_) {
    return error_response(404, "row " + index + " outside [0, " + std::to_string(n_obs_) + ")");
  }
  if (!base_->model) return error_response(409, "weight rows need the model; start serve with --data and --spec");
  const WeightRow row = weight_row(*base_->model, *base_->scale, static_cast<int>(i), base_->conditioned_columns);
  Json body = Json::object();
  body["index"] = i;
  Json w = Json::array();
  for (Eigen::Index j = 0; j < row.weights.size(); ++j) w.push_back(row.weights(j));
  body["weights"] = std::move(w);
  return {200, dump_json(body)};
}

HttpResponse ExplorerService::recompute(const std::string& body) {
  if (!bundle_) return error_response(409, "recompute needs serve in recompute mode (--data and --spec)");
  std::vector<long long> deleted;
  try {
    const Json request = Json::parse(body);
    if (!request.is_object() || !request.contains("deleted") || !request.at("deleted").is_array()) {
      return error_response(400, "body must be {\"deleted\": [indices]}");
    }
    for (const auto& v : request.at("deleted")) {
      if (!v.is_number_integer()) return error_response(400, "deleted indices must be integers");
      deleted.push_back(v.get<long long>());
    }
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, std::string("malformed body: ") + e.what());
  }
  std::vector<int> rows;
  for (long long d : deleted) {
    if (d < 0 || static_cast<std::size_t>(d) >= n_obs_) {
      return error_response(404, "row " + std::to_string(d) + " outside [0, " + std::to_string(n_obs_) + ")");
    }
    rows.push_back(static_cast<int>(d));
  }
  std::lock_guard<std::mutex> lock(recompute_mutex_);
  if (rows.empty()) return {200, report_text_};
  try {
    const ProblemBundle reduced = without_rows(*bundle_, rows);
    return {200, dump_report(run_pipeline(reduced, options_).report)};
  } catch (const Error& e) {
    return error_response(e.category() == ErrorCategory::Validation ? 400 : 422, e.what());
  }
}

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(ExplorerService& service) : impl_(std::make_unique<Impl>()) {
  auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get("/api/health", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.health());
  });
  impl_->server.Get("/api/report", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.report());
  });
  impl_->server.Get(R"(/api/weights/row/([^/]+))", [&service, send](const httplib::Request& req,
                                                                    httplib::Response& res) {
    send(res, service.weights_row(req.matches[1]));
  });
  impl_->server.Post("/api/recompute", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.recompute(req.body));
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw ParseError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw ParseError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace borrow::io
