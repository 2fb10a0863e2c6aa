#include <chrono>
#include <sstream>

#include <httplib.h>

#include "agentmem/memory_json.hpp"
#include "service.hpp"

namespace agentmem::service {

namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

/// Runs a handler, mapping domain and parse errors onto status codes.
template <class F>
httplib::Server::Handler guarded(F&& fn) {
  return [fn = std::forward<F>(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "InvalidArgument", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

AgentContext agent_from(const httplib::Request& req, bool required) {
  auto id = req.get_header_value("X-Agent-Id");
  if (id.empty()) {
    if (required) throw Error(ErrorCode::InvalidArgument, "X-Agent-Id header is required");
    id = "anonymous";
  }
  return {id, Protocol::REST};
}

json parse_body(const httplib::Request& req) {
  auto body = json::parse(req.body);
  if (!body.is_object()) throw Error(ErrorCode::InvalidArgument, "body must be a JSON object");
  return body;
}

MemoryId id_from(const std::string& text) {
  try {
    return make_id(std::stoull(text));
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bad memory id '" + text + "'");
  }
}

std::optional<std::set<events::EventType>> type_filter(const httplib::Request& req) {
  if (!req.has_param("types")) return std::nullopt;
  std::set<events::EventType> out;
  std::stringstream ss(req.get_param_value("types"));
  std::string name;
  while (std::getline(ss, name, ',')) {
    auto t = events::parse_event_type(name);
    if (!t) throw Error(ErrorCode::InvalidArgument, "unknown event type '" + name + "'");
    out.insert(*t);
  }
  return out;
}

std::string sse_frame(const events::Event& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + std::string(events::to_string(e.type)) +
         "\ndata: " + events::to_json(e).dump() + "\n\n";
}

}  // namespace

RestServer::RestServer(Engine& engine) : engine_(engine), server_(std::make_unique<httplib::Server>()) {
  routes();
}

RestServer::~RestServer() { stop(); }

int RestServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound <= 0) throw Error(ErrorCode::IoFailure, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void RestServer::serve() { server_->listen_after_bind(); }

void RestServer::stop() {
  stopping_ = true;
  if (server_) server_->stop();
}

void RestServer::routes() {
  auto& s = *server_;
  Engine& engine = engine_;

  s.Post("/memories", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    const auto agent = agent_from(req, true);
    const auto body = parse_body(req);
    RememberRequest r;
    r.content = body.at("content").get<std::string>();
    if (auto it = body.find("tags"); it != body.end()) r.tags = it->get<std::set<std::string>>();
    r.importance = body.value("importance", 5);
    if (auto it = body.find("parent"); it != body.end() && !it->is_null()) {
      r.parent = make_id(it->get<std::uint64_t>());
    }
    const auto id = engine.remember(r, agent);
    send_json(res, 201, to_json(engine.get(id)));
  }));

  s.Get(R"(/memories/(\d+))", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(engine.get(id_from(req.matches[1]))));
  }));

  s.Delete(R"(/memories/(\d+))", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    const auto agent = agent_from(req, true);
    engine.remove(id_from(req.matches[1]), agent);
    res.status = 204;
  }));

  s.Get("/search", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    search::SearchRequest r;
    r.query = req.get_param_value("q");
    if (req.has_param("limit")) {
      const auto limit = std::stoll(req.get_param_value("limit"));
      if (limit < 0) throw Error(ErrorCode::InvalidArgument, "limit must be nonnegative");
      r.limit = static_cast<std::size_t>(limit);
    }
    if (req.has_param("project")) r.context.explicit_label = req.get_param_value("project");
    if (req.has_param("cluster")) r.context.cluster_hint = req.get_param_value("cluster");
    for (std::size_t i = 0; i < req.get_param_value_count("path"); ++i) {
      r.context.active_paths.push_back(req.get_param_value("path", i));
    }
    for (std::size_t i = 0; i < req.get_param_value_count("tag"); ++i) {
      r.context.recent_tags.push_back(req.get_param_value("tag", i));
    }
    send_json(res, 200, hits_to_json(engine.recall(r, agent_from(req, false))));
  }));

  s.Post("/feedback", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    const auto agent = agent_from(req, true);
    const auto body = parse_body(req);
    const auto channel_name = body.value("channel", std::string("dashboard_click"));
    const auto channel = learning::parse_channel(channel_name);
    if (!channel) throw Error(ErrorCode::InvalidArgument, "unknown channel '" + channel_name + "'");
    engine.record_feedback(*channel, make_id(body.at("memory_id").get<std::uint64_t>()),
                           body.value("query", std::string()), agent);
    send_json(res, 202, {{"phase", engine.phase()}});
  }));

  s.Get("/agents", guarded([&engine](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& p : engine.agents()) out.push_back(events::to_json(p));
    send_json(res, 200, out);
  }));

  s.Get(R"(/agents/([^/]+)/trust)", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, engine.trust_json(req.matches[1]));
  }));

  s.Get("/graph/communities", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    auto snap = engine.graph_snapshot();
    if (!snap || req.has_param("rebuild")) {
      engine.rebuild_graph();
      snap = engine.graph_snapshot();
    }
    send_json(res, 200, snap->to_json());
  }));

  s.Post("/learning/reset", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    agent_from(req, true);
    engine.reset_learning();
    send_json(res, 200, {{"phase", engine.phase()}});
  }));

  s.Get("/status", guarded([&engine](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, engine.status());
  }));

  s.Get("/events/stream", guarded([this, &engine](const httplib::Request& req, httplib::Response& res) {
    auto filter = type_filter(req);
    const bool replay = req.get_param_value("replay") == "1";
    auto sub = engine.subscribe(std::move(filter), replay);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub](std::size_t, httplib::DataSink& sink) {
          while (!stopping_) {
            if (auto e = sub->next(std::chrono::milliseconds(500))) {
              const auto frame = sse_frame(*e);
              return sink.write(frame.data(), frame.size());
            }
            if (sub->closed()) {
              sink.done();
              return true;
            }
            // Comment line; detects a vanished client.
            static constexpr std::string_view kPing = ": ping\n\n";
            if (!sink.write(kPing.data(), kPing.size())) return false;
          }
          sink.done();
          return true;
        },
        [sub](bool) { sub->close(); });
  }));
}

}  // namespace agentmem::service
