#pragma once
// Similarity graph over memories and Leiden community detection.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentmem/common.hpp"
#include "agentmem/memory_store.hpp"
#include "agentmem/text_index.hpp"

namespace agentmem::graph {

inline constexpr std::size_t kMaxGraphNodes = 10'000;
inline constexpr double kEdgeThreshold = 0.3;

struct KeyTerm {
  std::string term;
  double weight;
};

/// Highest-weight terms; ties broken lexicographically.
std::vector<KeyTerm> key_terms(const text::TfIdfVector& vector, std::size_t k);
std::vector<KeyTerm> key_terms(std::string_view content, const text::CorpusStats& stats,
                               std::size_t k);

struct Edge {
  MemoryId a;  // a < b
  MemoryId b;
  double weight;
};

struct SimilarityGraph {
  std::vector<MemoryId> nodes;  // ascending
  std::vector<Edge> edges;      // sorted by (a, b)
  Timestamp built_at{};
};

struct DocumentVector {
  MemoryId id;
  text::TfIdfVector vector;
};

/// Evaluates every pair; keeps an edge iff cosine > threshold. Throws CapExceeded
/// above kMaxGraphNodes documents.
SimilarityGraph build_edges(std::vector<DocumentVector> corpus, double threshold = kEdgeThreshold);

/// Undirected weighted graph over dense node indices, as used by community detection.
class WeightedGraph {
 public:
  using Neighbor = std::pair<std::uint32_t, double>;

  explicit WeightedGraph(std::size_t nodes = 0);

  /// Parallel edges accumulate. u == v adds a self-loop.
  void add_edge(std::uint32_t u, std::uint32_t v, double weight);

  std::size_t node_count() const noexcept { return adjacency_.size(); }
  std::span<const Neighbor> neighbors(std::uint32_t u) const { return adjacency_[u]; }
  double self_loop(std::uint32_t u) const { return self_loops_[u]; }
  /// Weighted degree; self-loops count twice.
  double strength(std::uint32_t u) const { return strength_[u]; }
  /// Sum of edge weights (m), each undirected edge counted once.
  double total_weight() const noexcept { return total_weight_; }

  /// Subgraph induced by `nodes`; node i of the result is nodes[i].
  WeightedGraph induced(std::span<const std::uint32_t> nodes) const;

 private:
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<double> self_loops_;
  std::vector<double> strength_;
  double total_weight_ = 0.0;
};

WeightedGraph to_weighted(const SimilarityGraph& graph);

/// Community label per node index, numbered 0..k-1 in order of first appearance.
using Membership = std::vector<std::uint32_t>;

struct LeidenOptions {
  double resolution = 1.0;
  std::uint64_t seed = 42;
  double randomness = 0.01;  // refinement temperature, in edge-weight units
  int max_passes = 10;
};

/// Newman-Girvan modularity with resolution; 0 for an edgeless graph.
double modularity(const WeightedGraph& graph, const Membership& membership, double resolution);

/// Local moving, refinement and aggregation, repeated until the partition is stable.
Membership leiden(const WeightedGraph& graph, const LeidenOptions& options);

std::size_t community_count(const Membership& membership);

struct CommunityPartition {
  std::vector<Membership> levels;  // levels[0] is the top level
  std::vector<double> modularity;  // per level, on the full graph
};

/// Re-runs Leiden inside each community for levels 1..max_depth. A community is not
/// divided further once it has fewer than `min_size` nodes or fails to split.
CommunityPartition subcluster(const WeightedGraph& graph, Membership level0,
                              const LeidenOptions& options, int max_depth = 3,
                              std::size_t min_size = 5);

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::vector<std::size_t> communities_per_level;
  std::chrono::microseconds build_duration{0};
};

struct GraphSnapshot {
  SimilarityGraph graph;
  CommunityPartition partition;
  GraphStats stats;
  std::unordered_map<MemoryId, std::uint32_t> node_index;

  std::optional<std::uint32_t> community_of(MemoryId id, std::size_t level = 0) const;
  /// {nodes, edges, levels}
  nlohmann::json to_json() const;
};

struct GraphOptions {
  LeidenOptions leiden;
  int max_depth = 3;
  std::size_t min_subcluster_size = 5;
  double edge_threshold = kEdgeThreshold;
};

/// Runs the full pipeline over the given memories (vectors -> edges -> Leiden ->
/// subclusters). Throws CapExceeded.
GraphSnapshot build_snapshot(const std::vector<MemoryRecord>& memories, const GraphOptions& options,
                             Timestamp now);

/// Holds the last completed snapshot. Readers get an immutable shared pointer.
class KnowledgeGraph {
 public:
  explicit KnowledgeGraph(GraphOptions options = {}) : options_(options) {}

  std::shared_ptr<const GraphSnapshot> rebuild(const std::vector<MemoryRecord>& memories,
                                               Timestamp now);
  std::shared_ptr<const GraphSnapshot> snapshot() const;
  const GraphOptions& options() const noexcept { return options_; }

 private:
  GraphOptions options_;
  mutable std::mutex mu_;
  std::shared_ptr<const GraphSnapshot> current_;
};

}  // namespace agentmem::graph
