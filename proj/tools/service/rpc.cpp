#include "agentmem/memory_json.hpp"
#include "service.hpp"

namespace agentmem::service {

namespace {

using nlohmann::json;

constexpr int kInvalidRequest = -32600;
constexpr int kMethodNotFound = -32601;
constexpr int kInvalidParams = -32602;

struct RpcFailure {
  int code;
  std::string message;
  json data = nullptr;
};

json error_reply(const json& id, const RpcFailure& f) {
  json err = {{"code", f.code}, {"message", f.message}};
  if (!f.data.is_null()) err["data"] = f.data;
  return {{"jsonrpc", "2.0"}, {"id", id}, {"error", std::move(err)}};
}

AgentContext agent_param(const json& params) {
  std::string id = "mcp-client";
  if (auto it = params.find("agent"); it != params.end() && it->is_string()) id = it->get<std::string>();
  if (auto it = params.find("agent_id"); it != params.end() && it->is_string()) id = it->get<std::string>();
  return {id, Protocol::MCP};
}

}  // namespace

json RpcSession::dispatch(const std::string& method, const json& params) {
  if (method == "remember") {
    RememberRequest r;
    r.content = params.at("content").get<std::string>();
    if (auto it = params.find("tags"); it != params.end()) r.tags = it->get<std::set<std::string>>();
    r.importance = params.value("importance", 5);
    if (auto it = params.find("parent"); it != params.end() && !it->is_null()) {
      r.parent = make_id(it->get<std::uint64_t>());
    }
    const auto id = engine_.remember(r, agent_param(params));
    return {{"id", to_u64(id)}};
  }
  if (method == "recall") {
    search::SearchRequest r;
    r.query = params.at("query").get<std::string>();
    r.limit = params.value("limit", std::size_t{10});
    if (auto it = params.find("context"); it != params.end()) r.context = context_from_json(*it);
    return hits_to_json(engine_.recall(r, agent_param(params)));
  }
  if (method == "memory_used") {
    const auto id = make_id(params.at("memory_id").get<std::uint64_t>());
    engine_.record_feedback(learning::Channel::ToolUsed, id, params.value("query", std::string()),
                            agent_param(params));
    return {{"recorded", true}, {"phase", engine_.phase()}};
  }
  if (method == "status") {
    if (params.contains("agent") || params.contains("agent_id")) engine_.register_agent(agent_param(params));
    return engine_.status();
  }
  throw RpcFailure{kMethodNotFound, "method not found: " + method};
}

std::optional<std::string> RpcSession::handle(std::string_view line) {
  if (line.find_first_not_of(" \t\r\n") == std::string_view::npos) return std::nullopt;
  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception& e) {
    return error_reply(nullptr, {kInvalidRequest, std::string("malformed JSON: ") + e.what()}).dump();
  }
  json id = nullptr;
  if (request.is_object() && request.contains("id")) id = request["id"];
  const bool notification = request.is_object() && !request.contains("id");
  try {
    if (!request.is_object() || request.value("jsonrpc", "") != "2.0" || !request.contains("method") ||
        !request["method"].is_string()) {
      throw RpcFailure{kInvalidRequest, "not a JSON-RPC 2.0 request"};
    }
    if (!id.is_null() && !id.is_string() && !id.is_number_integer()) {
      throw RpcFailure{kInvalidRequest, "id must be a string or an integer"};
    }
    json params = request.value("params", json::object());
    if (!params.is_object()) throw RpcFailure{kInvalidParams, "params must be an object"};
    json result;
    try {
      result = dispatch(request["method"].get<std::string>(), params);
    } catch (const Error& e) {
      throw RpcFailure{kInvalidParams, e.what(), {{"error", to_string(e.code())}}};
    } catch (const json::exception& e) {
      throw RpcFailure{kInvalidParams, e.what()};
    }
    if (notification) return std::nullopt;
    return json{{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}}.dump();
  } catch (const RpcFailure& f) {
    if (notification && f.code != kInvalidRequest) return std::nullopt;
    return error_reply(id, f).dump();
  }
}

void RpcSession::run(std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (auto reply = handle(line)) out << *reply << '\n' << std::flush;
  }
}

}  // namespace agentmem::service
