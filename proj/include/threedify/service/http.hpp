#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "threedify/service/sessions.hpp"

namespace threedify::service {

struct HttpOptions {
  std::filesystem::path static_dir;   // served under /app when it exists
  std::filesystem::path schema_path;  // served at /v1/schema when it exists
};

/// HTTP+JSON front end of a SessionService.
class HttpServer {
 public:
  HttpServer(SessionService& sessions, HttpOptions options);
  ~HttpServer();

  /// Binds without serving; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace threedify::service
