#pragma once
// Phase-gated re-ranking: identity, multiplicative rule boosts, or a LambdaRank
// gradient-boosted tree ensemble.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentmem/common.hpp"
#include "agentmem/learning.hpp"
#include "agentmem/pattern_learning.hpp"

namespace agentmem::ranking {

inline constexpr std::size_t kFeatureCount = 9;

enum Feature : std::size_t {
  kBm25,
  kTfidf,
  kTechMatch,
  kProjectMatch,
  kWorkflowFit,
  kSourceQuality,
  kImportance,
  kRecency,
  kAccessFreq,
};

std::string_view feature_name(std::size_t index) noexcept;

using FeatureVector = std::array<double, kFeatureCount>;
using Weights = std::array<double, kFeatureCount>;

inline constexpr Weights kDefaultPhase1Weights = {0.0, 0.0, 0.3, 0.3, 0.2, 0.2, 0.15, 0.15, 0.1};
inline constexpr double kRecencyHalfLifeDays = 30.0;

/// Everything feature extraction needs to know about one candidate.
struct Candidate {
  MemoryId id{};
  double base_score = 0.0;
  double bm25 = 0.0;
  double tfidf = 0.0;
  std::set<patterns::Category> categories;
  std::set<std::string> projects;  // project names this memory belongs to
  double trust_at_write = 1.0;
  int importance = 5;
  Timestamp created_at{};
  std::uint64_t accesses = 0;
};

/// Per-query state shared by every candidate.
struct RankingContext {
  Timestamp now{};
  learning::PreferenceProfile preferences;
  std::map<std::string, double> projects;  // detect_project_context output
  std::vector<learning::WorkflowPattern> workflows;
  std::vector<std::string> recent_labels;  // most recent activity last
};

/// Support of the best pattern that ends in `label` and whose prefix matches the
/// tail of `recent` (any pattern ending in `label` when `recent` is empty), scaled
/// by the largest support overall.
double workflow_fit(const std::vector<learning::WorkflowPattern>& patterns,
                    const std::vector<std::string>& recent, std::string_view label);

/// Min-max over the set; a constant column (including a single candidate) maps to 1.
std::vector<double> min_max(const std::vector<double>& values);

/// All features lie in [0, 1].
std::vector<FeatureVector> extract_features(const std::vector<Candidate>& candidates,
                                            const RankingContext& context);

// -- learned model -----------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // feature value <= threshold
  int right = -1;
  double value = 0.0;  // leaf output, already scaled by the learning rate
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(const FeatureVector& x) const;
};

struct ModelMetadata {
  std::uint64_t signals = 0;
  std::uint64_t queries = 0;
  Timestamp trained_at{};
  bool synthetic = false;
  double train_ndcg5 = 0.0;
};

struct LearnedModel {
  static constexpr int kVersion = 1;
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  ModelMetadata metadata;

  double predict(const FeatureVector& x) const;
  nlohmann::json to_json() const;
  /// Throws SchemaMismatch.
  static LearnedModel from_json(const nlohmann::json& j);
};

struct TrainingQuery {
  std::string query;
  std::vector<FeatureVector> features;
  std::vector<int> labels;  // graded 0..3
};

struct TrainingSet {
  std::vector<TrainingQuery> queries;
  bool synthetic = false;
  std::uint64_t signals = 0;
};

struct TrainOptions {
  int trees = 100;
  int max_depth = 4;
  double learning_rate = 0.1;
  std::size_t min_leaf = 5;
  std::size_t min_queries = 50;
  std::size_t ndcg_k = 5;
};

/// LambdaRank gradients (pairwise, weighted by |delta NDCG|) fitted by least-squares
/// regression trees with Newton leaf values. Deterministic. Throws InsufficientData.
LearnedModel train_lambdarank(const TrainingSet& data, const TrainOptions& options, Timestamp now);

/// Mean NDCG@k of the model's ordering over the queries.
double evaluate_ndcg(const LearnedModel& model, const std::vector<TrainingQuery>& queries,
                     std::size_t k);

/// Graded label for synthetic data: 0 without category overlap, otherwise 1..3
/// from the importance band.
int synthetic_label(const std::set<patterns::Category>& query_categories,
                    const std::set<patterns::Category>& candidate_categories, int importance);

// -- re-ranking --------------------------------------------------------------

struct RankerConfig {
  Weights phase1_weights = kDefaultPhase1Weights;
};

struct Ranked {
  std::size_t index;  // into the input candidates
  double score;
};

/// Phase 0 keeps the input order; phase 1 orders by base * prod(1 + w_f * f);
/// phase 2 orders by the model, or as phase 1 when no model is given. Stable.
std::vector<Ranked> rerank(const std::vector<Candidate>& candidates, const RankingContext& context,
                           int phase, const LearnedModel* model, const RankerConfig& config = {});

}  // namespace agentmem::ranking
