#pragma once
// Network and stdio front ends over the engine: REST + SSE and line-delimited JSON-RPC.

#include <atomic>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "agentmem/engine.hpp"

namespace httplib {
class Server;
}

namespace agentmem::service {

nlohmann::json hit_to_json(const search::SearchHit& hit);
/// The shape shared by REST /search and RPC recall: an array of hits.
nlohmann::json hits_to_json(const search::SearchResult& result);
learning::ProjectContext context_from_json(const nlohmann::json& j);
int http_status(ErrorCode code) noexcept;

class RestServer {
 public:
  explicit RestServer(Engine& engine);
  ~RestServer();
  RestServer(const RestServer&) = delete;
  RestServer& operator=(const RestServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port. Throws IoFailure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  void stop();

 private:
  void routes();

  Engine& engine_;
  std::unique_ptr<httplib::Server> server_;
  std::atomic<bool> stopping_{false};
};

/// One JSON-RPC 2.0 request per line. Methods: remember, recall, memory_used, status.
class RpcSession {
 public:
  explicit RpcSession(Engine& engine) : engine_(engine) {}

  /// Response line, or nullopt for notifications and blank lines.
  std::optional<std::string> handle(std::string_view line);
  /// Reads until end of input.
  void run(std::istream& in, std::ostream& out);

 private:
  nlohmann::json dispatch(const std::string& method, const nlohmann::json& params);

  Engine& engine_;
};

}  // namespace agentmem::service
