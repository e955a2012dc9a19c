#ifndef RULESCOPE_SERVICE_H_
#define RULESCOPE_SERVICE_H_

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>

#include "json.hpp"
#include "rulescope/analysis.h"
#include "rulescope/hierarchy.h"

namespace httplib {
class Server;
}

namespace rulescope {

struct ServiceOptions {
  HierarchyOptions hierarchy;
  LogisticConfig logistic;
  std::chrono::seconds idle_timeout{3600};
  std::size_t attribute_page_size = 15;
  std::size_t sample_page_size = 50;
  double tau = 0.1;
};

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

// Rounds to 6 significant digits; non-finite values become null.
nlohmann::json RoundedNumber(double value);

class Session;

// Transport-independent JSON API over in-memory exploration sessions.
//
//   GET  /health
//   GET  /sessions
//   POST /sessions                      {model, dataset, schema, format?, m?}
//   GET  /sessions/{id}
//   POST /sessions/{id}/zoom            {rules: [ids]}
//   POST /sessions/{id}/back
//   POST /sessions/{id}/order           {mode, direction?, attribute?, attributes?, pinned?}
//   GET  /sessions/{id}/rules/{rid}
//   POST /sessions/{id}/filter          {predicates: [...]}
//   GET  /sessions/{id}/samples?sort=&dir=&page=&page_size=
//   GET  /sessions/{id}/info
//
// Thread safe. Mutating requests on a session that is already busy get 409.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();

  // Model used by POST /sessions when the body names no files.
  void Preload(std::shared_ptr<const Analysis> analysis);

  Response Handle(const Request& request);

  std::size_t num_sessions() const;
  // Drops sessions idle for longer than the configured timeout.
  void EvictIdle(std::chrono::steady_clock::time_point now);

 private:
  using Key = std::tuple<std::string, std::string, std::string, int>;

  Response Dispatch(const Request& request);
  Response Health() const;
  Response CreateSession(const nlohmann::json& body);
  std::shared_ptr<Session> FindSession(const std::string& id);
  std::shared_ptr<const Analysis> Load(const nlohmann::json& body);

  ServiceOptions options_;
  std::shared_ptr<const Analysis> preloaded_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t next_id_ = 1;
  std::mutex cache_mutex_;
  std::map<Key, std::shared_ptr<const Analysis>> cache_;
};

// HTTP/1.1 front end for a Service with permissive CORS.
class HttpServer {
 public:
  explicit HttpServer(Service& service, std::string cors_origin = "*");
  ~HttpServer();

  // False if the address cannot be bound.
  bool Bind(const std::string& host, int port);
  // Binds an ephemeral port and returns it, or -1.
  int BindAnyPort(const std::string& host);
  // Blocks until Stop.
  bool Listen();
  void Stop();
  bool running() const;

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace rulescope

#endif  // RULESCOPE_SERVICE_H_
