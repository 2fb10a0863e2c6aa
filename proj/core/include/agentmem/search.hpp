#pragma once
// Recall pipeline: BM25 candidates, TF-IDF blend, adaptive re-rank.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "agentmem/common.hpp"
#include "agentmem/knowledge_graph.hpp"
#include "agentmem/learning.hpp"
#include "agentmem/memory_store.hpp"
#include "agentmem/pattern_learning.hpp"
#include "agentmem/ranker.hpp"
#include "agentmem/text_index.hpp"

namespace agentmem::search {

inline constexpr std::size_t kPoolFactor = 4;
inline constexpr double kBm25Blend = 0.5;

struct StageFlags {
  bool tfidf = true;
  bool graph = true;
  bool adaptive = true;
};

/// Per-memory attributes derived from content and tags, kept beside the index.
struct MemoryTraits {
  std::set<patterns::Category> categories;
  std::set<std::string> projects;  // from "project:" tags
};

class TraitsTable {
 public:
  void put(const MemoryRecord& record);
  void erase(MemoryId id);
  void clear();
  MemoryTraits get(MemoryId id) const;

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<MemoryId, MemoryTraits> traits_;
};

MemoryTraits derive_traits(const MemoryRecord& record);

struct SearchRequest {
  std::string query;
  std::size_t limit = 10;
  learning::ProjectContext context;
};

struct SearchHit {
  MemoryRecord record;
  double score = 0.0;  // after re-ranking (base score in phase 0)
  double bm25 = 0.0;
  double tfidf = 0.0;
  double base = 0.0;
};

struct SearchResult {
  std::vector<SearchHit> hits;
  int phase = 0;  // phase actually applied
};

class SearchPipeline {
 public:
  SearchPipeline(const MemoryStore& store, const text::InvertedIndex& index,
                 const TraitsTable& traits, const graph::KnowledgeGraph& graph,
                 const learning::LearningStore& learning, std::shared_ptr<const Clock> clock);

  void configure_stages(StageFlags flags);
  StageFlags stages() const;
  void set_ranker_config(ranking::RankerConfig config);

  /// Read-only: no counters, no events.
  SearchResult search(const SearchRequest& request) const;

  /// Candidates (before re-ranking) with their features, for training and bootstrap.
  std::vector<ranking::Candidate> candidates(const std::string& query, std::size_t pool) const;
  ranking::RankingContext ranking_context(const learning::ProjectContext& context) const;

 private:
  struct Derived {
    std::uint64_t version = ~std::uint64_t{0};
    Timestamp computed_at{};
    learning::PreferenceProfile preferences;
    std::vector<learning::WorkflowPattern> workflows;
    std::vector<std::string> recent_labels;
    std::shared_ptr<const ranking::LearnedModel> model;
  };

  std::shared_ptr<const Derived> derived() const;
  std::vector<ranking::Candidate> build_candidates(const std::vector<std::string>& tokens,
                                                   std::size_t pool,
                                                   std::vector<MemoryRecord>* records) const;

  const MemoryStore& store_;
  const text::InvertedIndex& index_;
  const TraitsTable& traits_;
  const graph::KnowledgeGraph& graph_;
  const learning::LearningStore& learning_;
  std::shared_ptr<const Clock> clock_;

  mutable std::mutex mu_;
  StageFlags flags_;
  ranking::RankerConfig ranker_;
  mutable std::shared_ptr<const Derived> derived_;
};

}  // namespace agentmem::search
