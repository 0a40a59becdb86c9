#pragma once

#include <memory>
#include <string>

#include "cohortlab/error.hpp"
#include "cohortlab/service/engine.hpp"

namespace httplib {
class Server;
}

namespace cohortlab::service {

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

/// HTTP status for a library error code.
int http_status(ErrorCode code) noexcept;

/// Routes one /v1 request. Never throws: failures become
/// {"error": {"code", "message"}} with a mapped status. Every body carries
/// {"engine": {"name", "version"}}.
HttpResponse dispatch(Engine& engine, const std::string& method, const std::string& path, const std::string& body);

/// Thin socket binding over dispatch().
class HttpServer {
 public:
  explicit HttpServer(Engine& engine);
  ~HttpServer();

  /// Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen();
  void stop();

 private:
  Engine& engine_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace cohortlab::service
