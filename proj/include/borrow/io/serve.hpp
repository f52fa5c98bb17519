#pragma once

#include "borrow/io/pipeline.hpp"
#include "borrow/io/report.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace borrow::io {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Request handling for the explorer API, independent of the transport. The served report is
/// immutable; recompute requests run one at a time and each returns a fresh report.
class ExplorerService {
 public:
  /// Static mode: report only; weight rows and recompute answer 409.
  explicit ExplorerService(Report report);
  /// Recompute mode: the bundle is decomposed once up front.
  ExplorerService(ProblemBundle bundle, PipelineOptions options);

  bool recompute_mode() const { return bundle_.has_value(); }
  const std::string& report_text() const { return report_text_; }

  HttpResponse health() const;
  HttpResponse report() const;
  HttpResponse weights_row(const std::string& index) const;
  HttpResponse recompute(const std::string& body);

 private:
  std::optional<ProblemBundle> bundle_;
  PipelineOptions options_;
  std::shared_ptr<const PipelineResult> base_;
  std::string report_text_;
  std::size_t n_obs_ = 0;
  std::mutex recompute_mutex_;
};

/// HTTP transport for an ExplorerService. `run` blocks until `stop` is called from another thread.
class HttpServer {
 public:
  explicit HttpServer(ExplorerService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and returns the port; port 0 picks a free one.
  int bind(const std::string& host, int port);
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace borrow::io
