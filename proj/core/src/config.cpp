#include "agentmem/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace agentmem {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

[[noreturn]] void bad(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::InvalidArgument,
              "invalid value '" + std::string(value) + "' for " + std::string(key));
}

double to_double(std::string_view key, std::string_view value) {
  const std::string s = trim(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) bad(key, value);
  return v;
}

long long to_int(std::string_view key, std::string_view value) {
  const std::string s = trim(value);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) bad(key, value);
  return v;
}

std::filesystem::path sibling(const std::filesystem::path& db, std::string_view suffix) {
  if (db == ":memory:") return db;
  auto out = db;
  out.replace_filename(db.stem().string() + std::string(suffix));
  return out;
}

}  // namespace

std::filesystem::path Config::coordination_path() const {
  return coordination_db ? *coordination_db : sibling(memory_db, ".coord.db");
}

std::filesystem::path Config::learning_path() const {
  return learning_db ? *learning_db : sibling(memory_db, ".learning.db");
}

const std::vector<std::string_view>& Config::keys() {
  static const std::vector<std::string_view> k = {
      "db.path",    "db.coordination",  "db.learning",     "trust.threshold",
      "trust.mode", "ranker.weights",   "graph.seed",      "graph.resolution",
      "graph.max_depth", "server.host", "server.port"};
  return k;
}

void Config::set(std::string_view key, std::string_view raw) {
  const std::string value = trim(raw);
  if (key == "db.path") {
    memory_db = value;
  } else if (key == "db.coordination") {
    coordination_db = value;
  } else if (key == "db.learning") {
    learning_db = value;
  } else if (key == "trust.threshold") {
    const double t = to_double(key, value);
    if (t < 0.0 || t > 1.0) bad(key, value);
    trust.threshold = t;
  } else if (key == "trust.mode") {
    auto m = trust::parse_mode(value);
    if (!m) bad(key, value);
    trust.mode = *m;
  } else if (key == "ranker.weights") {
    ranking::Weights w{};
    std::stringstream ss(value);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
      if (i >= w.size()) bad(key, value);
      w[i++] = to_double(key, item);
    }
    if (i != w.size()) bad(key, value);
    ranker_weights = w;
  } else if (key == "graph.seed") {
    graph.leiden.seed = static_cast<std::uint64_t>(to_int(key, value));
  } else if (key == "graph.resolution") {
    graph.leiden.resolution = to_double(key, value);
  } else if (key == "graph.max_depth") {
    const auto d = to_int(key, value);
    if (d < 0 || d > 3) bad(key, value);
    graph.max_depth = static_cast<int>(d);
  } else if (key == "server.host") {
    host = value;
  } else if (key == "server.port") {
    const auto p = to_int(key, value);
    if (p < 0 || p > 65535) bad(key, value);
    port = static_cast<int>(p);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown config key '" + std::string(key) + "'");
  }
}

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Config c;
  const std::string head = trim(text);
  if (!head.empty() && head.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
    }
    // Accept both flat {"trust.mode": ...} and nested {"trust": {"mode": ...}}.
    std::function<void(const std::string&, const nlohmann::json&)> walk =
        [&](const std::string& prefix, const nlohmann::json& node) {
          if (node.is_object()) {
            for (const auto& [k, v] : node.items()) walk(prefix.empty() ? k : prefix + "." + k, v);
          } else if (node.is_string()) {
            c.set(prefix, node.get<std::string>());
          } else if (node.is_array()) {
            std::string joined;
            for (const auto& v : node) joined += (joined.empty() ? "" : ",") + v.dump();
            c.set(prefix, joined);
          } else {
            c.set(prefix, node.dump());
          }
        };
    walk("", j);
    return c;
  }
  std::stringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "config line without '=': " + t);
    }
    c.set(trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
  }
  return c;
}

void Config::apply_environment() {
  for (const auto key : keys()) {
    std::string name = "AGENTMEM_";
    for (const char ch : key) {
      name += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    if (const char* v = std::getenv(name.c_str())) set(key, v);
  }
}

nlohmann::json Config::to_json() const {
  nlohmann::json weights = nlohmann::json::array();
  for (const double w : ranker_weights) weights.push_back(w);
  return {{"db.path", memory_db.string()},
          {"db.coordination", coordination_path().string()},
          {"db.learning", learning_path().string()},
          {"trust.threshold", trust.threshold},
          {"trust.mode", trust::to_string(trust.mode)},
          {"ranker.weights", std::move(weights)},
          {"graph.seed", graph.leiden.seed},
          {"graph.resolution", graph.leiden.resolution},
          {"graph.max_depth", graph.max_depth},
          {"server.host", host},
          {"server.port", port}};
}

}  // namespace agentmem
