#pragma once
// Engine configuration: file (key=value or JSON) plus AGENTMEM_* environment overrides.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentmem/knowledge_graph.hpp"
#include "agentmem/ranker.hpp"
#include "agentmem/trust.hpp"

namespace agentmem {

struct Config {
  std::filesystem::path memory_db = "agentmem.db";
  std::optional<std::filesystem::path> coordination_db;
  std::optional<std::filesystem::path> learning_db;
  trust::TrustConfig trust;
  ranking::Weights ranker_weights = ranking::kDefaultPhase1Weights;
  graph::GraphOptions graph;
  std::string host = "127.0.0.1";
  int port = 8765;

  /// Defaults to a sibling of the memory store ("<stem>.coord.db").
  std::filesystem::path coordination_path() const;
  /// Defaults to a sibling of the memory store ("<stem>.learning.db").
  std::filesystem::path learning_path() const;

  /// Recognised keys: db.path, db.coordination, db.learning, trust.threshold,
  /// trust.mode, ranker.weights, graph.seed, graph.resolution, graph.max_depth,
  /// server.host, server.port. Throws InvalidArgument.
  void set(std::string_view key, std::string_view value);
  static const std::vector<std::string_view>& keys();

  /// Throws IoFailure, InvalidArgument.
  static Config from_file(const std::filesystem::path& path);
  /// AGENTMEM_DB_PATH, AGENTMEM_TRUST_THRESHOLD, ... (key upper-cased, dots to underscores).
  void apply_environment();

  nlohmann::json to_json() const;
};

}  // namespace agentmem
