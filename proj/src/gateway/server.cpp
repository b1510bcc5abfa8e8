#include <httplib.h>

#include "chainvoice/gateway/session.hpp"

namespace chainvoice::gateway {

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(Session& session, std::optional<std::filesystem::path> ui_dir) : impl_(std::make_unique<Impl>()) {
  auto forward = [&session](const httplib::Request& req, httplib::Response& res) {
    Headers headers;
    for (const auto& [k, v] : req.headers) headers.emplace(k, v);
    const auto reply = session.handle(req.method, req.path, headers, req.body);
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  const std::string pattern = R"(/v1/.*)";
  impl_->server.Get(pattern, forward);
  impl_->server.Post(pattern, forward);
  impl_->server.Delete(pattern, forward);
  impl_->server.Put(pattern, forward);
  if (ui_dir) impl_->server.set_mount_point("/", ui_dir->string());
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace chainvoice::gateway
