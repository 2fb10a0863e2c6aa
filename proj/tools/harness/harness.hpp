#pragma once
// Benchmark harness: synthetic corpus, report statistics and the five suites.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentmem/engine.hpp"

namespace agentmem::bench {

enum class Topic { WebDevelopment, MachineLearning, DatabaseDesign, DevOps, ApiDesign };

inline constexpr Topic kTopics[] = {Topic::WebDevelopment, Topic::MachineLearning,
                                    Topic::DatabaseDesign, Topic::DevOps, Topic::ApiDesign};
inline constexpr std::size_t kTopicCount = 5;

std::string_view topic_name(Topic t) noexcept;

struct CorpusSpec {
  std::size_t n = 1000;
  std::uint64_t seed = 42;
};

struct CorpusItem {
  std::string content;
  std::set<std::string> tags;
  int importance = 5;
  Topic topic = Topic::WebDevelopment;
};

/// Round-robin over topics, so topic sizes differ by at most one. Throws InvalidArgument
/// for n < 5.
std::vector<CorpusItem> gen_corpus(const CorpusSpec& spec);

struct BenchQuery {
  std::string text;
  Topic topic;
};

/// Ten templated queries, two per topic.
const std::vector<BenchQuery>& templated_queries();

/// Graded relevance of a memory for a query on `topic`: 0 off-topic, else 1..3 by importance.
int graded_relevance(Topic query_topic, Topic memory_topic, int importance) noexcept;

/// Rand index corrected for chance. Throws InvalidArgument on length mismatch.
double adjusted_rand_index(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b);

// -- statistics ---------------------------------------------------------------

struct Summary {
  std::size_t runs = 0;
  double median = 0.0;
  double mean = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Percentiles by linear interpolation between closest ranks. Throws EmptyInput.
Summary summarize(std::vector<double> samples);
nlohmann::json to_json(const Summary& s);

// -- suites -------------------------------------------------------------------

struct SuiteOptions {
  std::uint64_t seed = 42;
  std::size_t runs = 100;
  std::size_t warmup = 10;
  bool large = false;  // adds the 5,000-memory graph build
  std::filesystem::path workdir;  // empty: a fresh directory under the system temp dir
};

/// Loads the corpus through the service layer as agent "bench"; returns ids in corpus order.
std::vector<MemoryId> load_corpus(Engine& engine, const std::vector<CorpusItem>& corpus);

struct LatencyRow {
  std::size_t size = 0;
  Summary ms;
};
struct LatencyReport {
  std::vector<LatencyRow> rows;
  double ratio = 0.0;  // median at the largest size over median at the smallest
};
LatencyReport run_latency(const SuiteOptions& options, const std::vector<std::size_t>& sizes = {100, 500, 1000});

struct ConcurrencyRow {
  std::size_t writers = 0;
  std::size_t ops_per_writer = 0;
  std::size_t errors = 0;
  std::size_t persisted = 0;  // counted after reopening the store file
  double seconds = 0.0;
  double writes_per_sec = 0.0;
  double median_ms = 0.0;  // per-write latency
  double p95_ms = 0.0;
};
std::vector<ConcurrencyRow> run_concurrency(const SuiteOptions& options,
                                            const std::vector<std::size_t>& writers = {1, 2, 5, 10},
                                            std::size_t ops_per_writer = 200);

struct GraphRow {
  std::size_t size = 0;
  std::size_t edges = 0;
  std::vector<std::size_t> communities;  // per level
  double modularity = 0.0;
  double ari = 0.0;  // level 0 against topic labels
  double build_ms = 0.0;
};
std::vector<GraphRow> run_graph(const SuiteOptions& options, std::vector<std::size_t> sizes = {100, 500, 1000});

struct AblationRow {
  std::string config;
  search::StageFlags flags;
  int phase = 0;
  double mrr = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  double recall5 = 0.0;
  double latency_ms = 0.0;  // median per query
};
struct AblationReport {
  std::vector<AblationRow> rows;  // last row is the adaptive configuration
  std::size_t signals = 0;
  double ndcg_gain = 0.0;   // relative, adaptive vs the same pipeline with adaptive off
  double mrr_delta = 0.0;   // adaptive minus adaptive-off
};
AblationReport run_ablation(const SuiteOptions& options, std::size_t corpus_size = 1000,
                            std::size_t signals = 200);

struct TrustEmission {
  double p_verified_recall = 0.3;  // per benign op
  double p_flagged = 0.5;          // per poisoning op
  double p_false_alarm = 0.03;     // contradictory_write against a benign op
};

struct TrustScenarioRow {
  std::string scenario;
  std::size_t benign_agents = 0;
  std::size_t malicious_agents = 0;
  double benign_mean = 0.0;
  double benign_min = 0.0;
  double malicious_mean = 0.0;
  double gap = 0.0;
  std::size_t false_positives = 0;  // benign agents below the threshold
  double peak = 0.0;                // sleeper: mean pre-switch peak
  double degradation = 0.0;         // sleeper: (peak - final) / peak, mean over agents
};
std::vector<TrustScenarioRow> run_trust(const SuiteOptions& options, const TrustEmission& emission = {},
                                        std::size_t ops = 200);

// -- reports ------------------------------------------------------------------

/// Shared header fields: suite, runs, warmup, environment, caveat.
nlohmann::json report_header(std::string_view suite, const SuiteOptions& options);
std::string environment_note();

nlohmann::json to_json(const LatencyReport& r);
nlohmann::json to_json(const std::vector<ConcurrencyRow>& rows);
nlohmann::json to_json(const std::vector<GraphRow>& rows);
nlohmann::json to_json(const AblationReport& r);
nlohmann::json to_json(const std::vector<TrustScenarioRow>& rows);

std::string format_latency(const LatencyReport& r);
std::string format_concurrency(const std::vector<ConcurrencyRow>& rows);
std::string format_graph(const std::vector<GraphRow>& rows);
std::string format_ablation(const AblationReport& r);
std::string format_trust(const std::vector<TrustScenarioRow>& rows);

/// Runs one suite ("latency", "concurrency", "graph", "ablation", "trust" or "all").
/// Returns {json, text}. Throws InvalidArgument for an unknown suite.
std::pair<nlohmann::json, std::string> run_suite(std::string_view suite, const SuiteOptions& options);

}  // namespace agentmem::bench
