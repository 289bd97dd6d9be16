#include "camscope/http_server.hpp"

#include <httplib.h>

#include "camscope/error.hpp"

namespace camscope::service {

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

void forward(Service& service, const httplib::Request& req, httplib::Response& res) {
  Query query;
  for (const auto& [k, v] : req.params) query.emplace(k, v);
  const auto out = service.handle(req.method, req.path, query, req.body);
  res.status = out.status;
  res.set_content(out.body, "application/json");
}

}  // namespace

HttpServer::HttpServer(Service& service, HttpOptions options)
    : impl_(std::make_unique<Impl>()), options_(std::move(options)) {
  auto& svr = impl_->server;
  const auto handler = [&service](const httplib::Request& req, httplib::Response& res) { forward(service, req, res); };
  svr.Get(R"(/api/.*)", handler);
  svr.Post(R"(/api/.*)", handler);
  svr.Put(R"(/api/.*)", handler);
  svr.Delete(R"(/api/.*)", handler);
  // Anything httplib answers by itself (unknown method, missing static file)
  // still gets an ApiError body.
  svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const ApiError err{res.status == 404 ? "not_found" : "http_error", "no route for " + req.method + " " + req.path,
                       res.status};
    res.set_content(err.to_json().dump(), "application/json");
  });
  // httplib's default also sets SO_REUSEPORT, which would let a second
  // server share a port that is already taken.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  if (!options_.ui_dir.empty()) {
    require(svr.set_mount_point("/", options_.ui_dir.string()), ErrorCode::io_error,
            "UI directory " + options_.ui_dir.string() + " is not readable");
  }
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::bind() {
  auto& svr = impl_->server;
  if (options_.port == 0) {
    port_ = svr.bind_to_any_port(options_.host);
    return port_ > 0;
  }
  if (!svr.bind_to_port(options_.host, options_.port)) return false;
  port_ = options_.port;
  return true;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace camscope::service
