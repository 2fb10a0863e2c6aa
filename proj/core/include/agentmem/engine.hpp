#pragma once
// Service layer shared by the CLI, REST and RPC surfaces. Owns every subsystem and
// keeps derived state (index, traits, events, registry) in step with store commits.

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentmem/common.hpp"
#include "agentmem/config.hpp"
#include "agentmem/events.hpp"
#include "agentmem/knowledge_graph.hpp"
#include "agentmem/learning.hpp"
#include "agentmem/memory_store.hpp"
#include "agentmem/ranker.hpp"
#include "agentmem/search.hpp"
#include "agentmem/text_index.hpp"
#include "agentmem/trust.hpp"

namespace agentmem {

struct RememberRequest {
  std::string content;
  std::set<std::string> tags;
  int importance = 5;
  std::optional<MemoryId> parent;
};

struct TrainReport {
  ranking::ModelMetadata metadata;
  std::size_t trees = 0;
};

class Engine {
 public:
  explicit Engine(Config config, std::shared_ptr<const Clock> clock = std::make_shared<SystemClock>());
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // -- memories --------------------------------------------------------------

  /// Throws TrustDenied, UnknownParent, InvalidImportance.
  MemoryId remember(const RememberRequest& request, const AgentContext& agent);
  /// Same contract per item; the batch shares group commits and ids follow input order.
  std::vector<MemoryId> remember_many(const std::vector<RememberRequest>& requests,
                                      const AgentContext& agent);
  /// Throws NotFound.
  MemoryRecord get(MemoryId id) const;
  /// Throws TrustDenied, NotFound.
  void remove(MemoryId id, const AgentContext& agent);
  std::vector<MemoryRecord> children(MemoryId id) const;
  std::vector<MemoryRecord> subtree(MemoryId id) const;
  std::optional<MemoryRecord> parent_of(MemoryId id) const;

  // -- recall ----------------------------------------------------------------

  /// Publishes memory.recalled per hit, bumps access counters and emits passive-decay
  /// signals. Accounting is asynchronous relative to the returned result.
  search::SearchResult recall(const search::SearchRequest& request, const AgentContext& agent);
  void configure_stages(search::StageFlags flags) { pipeline_->configure_stages(flags); }

  // -- learning --------------------------------------------------------------

  /// Throws NotFound (unknown memory), InvalidArgument (passive_decay is internal).
  void record_feedback(learning::Channel channel, MemoryId id, std::string_view query,
                       const std::optional<AgentContext>& agent = std::nullopt);
  int phase() const { return learning_->phase(); }
  /// Query of the most recent recall that returned `id`, from the recent event log.
  std::optional<std::string> last_query_for(MemoryId id);
  /// Synthetic queries from key terms of live memories. Throws InsufficientCorpus.
  ranking::TrainingSet bootstrap_synthetic() const;
  /// Real feedback grouped by normalized query; labels count consumption signals.
  ranking::TrainingSet feedback_dataset() const;
  /// Trains on real feedback in phase 2, otherwise on the synthetic bootstrap, and
  /// persists the model. Throws InsufficientCorpus, InsufficientData.
  TrainReport train(const ranking::TrainOptions& options = {});
  /// Erases the learning store. The memory store is not touched.
  void reset_learning();
  nlohmann::json patterns() const;

  // -- trust -----------------------------------------------------------------

  trust::TrustState signal(const std::string& agent, trust::SignalKind kind);
  /// Throws NotFound, SelfFlag.
  trust::TrustState flag(MemoryId id, const AgentContext& reporter);
  std::vector<MemoryId> isolate(const std::string& agent) const;
  /// Throws UnknownAgent.
  nlohmann::json trust_json(const std::string& agent) const;

  // -- agents and events -----------------------------------------------------

  events::AgentProfile register_agent(const AgentContext& agent);
  std::vector<events::AgentProfile> agents() const { return registry_->list(); }
  std::shared_ptr<events::Subscription> subscribe(std::optional<std::set<events::EventType>> filter,
                                                  bool replay_buffer) {
    return bus_->subscribe(std::move(filter), replay_buffer);
  }
  std::vector<events::StoredEvent> tail_events(std::size_t limit) { return bus_->tail(limit); }
  /// Persisted events, so writes from other processes show up too.
  std::vector<events::StoredEvent> events_after(std::uint64_t seq, std::size_t limit) {
    return coordination_->events_after(seq, limit);
  }
  events::SweepReport sweep() { return bus_->retention_sweep(clock_->now()); }
  std::vector<events::DailyCount> daily_counts() { return bus_->daily_counts(); }

  // -- graph -----------------------------------------------------------------

  /// Throws CapExceeded.
  graph::GraphStats rebuild_graph();
  std::shared_ptr<const graph::GraphSnapshot> graph_snapshot() const { return graph_->snapshot(); }

  // -- housekeeping ----------------------------------------------------------

  std::size_t export_json(const std::filesystem::path& dest) const { return store_->export_json(dest); }
  std::size_t import_json(const std::filesystem::path& src) { return store_->import_json(src); }
  nlohmann::json status() const;
  /// Waits for queued coordination and learning writes.
  void flush();

  const Config& config() const noexcept { return config_; }
  const Clock& clock() const noexcept { return *clock_; }
  MemoryStore& store() noexcept { return *store_; }
  const MemoryStore& store() const noexcept { return *store_; }
  trust::TrustEngine& trust_engine() noexcept { return *trust_; }
  learning::LearningStore& learning_store() noexcept { return *learning_; }
  events::EventBus& bus() noexcept { return *bus_; }
  const search::SearchPipeline& pipeline() const noexcept { return *pipeline_; }
  const text::InvertedIndex& index() const noexcept { return *index_; }

 private:
  void ensure_agent(const AgentContext& agent);
  void on_commit(const CommitNotice& notice);
  void after_write(MemoryId id, const AgentContext& agent);
  void deny_unless(const AgentContext& agent, trust::Operation op) const;

  Config config_;
  std::shared_ptr<const Clock> clock_;
  std::unique_ptr<events::CoordinationStore> coordination_;
  std::unique_ptr<events::EventBus> bus_;
  std::unique_ptr<events::AgentRegistry> registry_;
  std::unique_ptr<trust::TrustEngine> trust_;
  std::unique_ptr<learning::LearningStore> learning_;
  std::unique_ptr<text::InvertedIndex> index_;
  std::unique_ptr<search::TraitsTable> traits_;
  std::unique_ptr<graph::KnowledgeGraph> graph_;
  // Declared after everything its commit listener touches, so it stops first.
  std::unique_ptr<MemoryStore> store_;
  std::unique_ptr<search::SearchPipeline> pipeline_;
};

}  // namespace agentmem
