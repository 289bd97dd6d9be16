#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "camscope/service.hpp"

namespace camscope::service {

struct HttpOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path ui_dir;  // optional static assets mounted at "/"
};

/// HTTP listener forwarding every /api request to Service::handle.
class HttpServer {
 public:
  HttpServer(Service& service, HttpOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket. Returns false when the address is unavailable.
  bool bind();
  int port() const { return port_; }
  /// Serves until stop(); requires a successful bind().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  HttpOptions options_;
  int port_ = -1;
};

}  // namespace camscope::service
