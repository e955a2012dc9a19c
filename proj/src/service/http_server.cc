#include "rulescope/service.h"

#include <utility>

#include "httplib.h"

namespace rulescope {

HttpServer::HttpServer(Service& service, std::string cors_origin)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  server_->set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server_->Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  const auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    Request request;
    request.method = req.method;
    request.path = req.path;
    request.body = req.body;
    for (const auto& [key, value] : req.params) request.query.emplace(key, value);
    const Response response = service_.Handle(request);
    res.status = response.status;
    res.set_content(response.body.dump(), "application/json");
  };
  server_->Get(".*", handler);
  server_->Post(".*", handler);
}

HttpServer::~HttpServer() { Stop(); }

bool HttpServer::Bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

int HttpServer::BindAnyPort(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpServer::Listen() { return server_->listen_after_bind(); }

void HttpServer::Stop() {
  if (server_->is_running()) server_->stop();
}

bool HttpServer::running() const { return server_->is_running(); }

}  // namespace rulescope
