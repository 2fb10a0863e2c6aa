#pragma once
// Coordination events: sequenced publish, ring buffer, subscriptions, tiered
// retention, and the agent registry. Persistent state lives in a coordination
// database that is separate from the memory store file.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentmem/common.hpp"
#include "agentmem/trust.hpp"

namespace agentmem::events {

enum class EventType {
  MemoryCreated,
  MemoryRecalled,
  MemoryDeleted,
  AgentConnected,
  GraphUpdated,
  TrustChanged,
  FeedbackRecorded,
};

std::string_view to_string(EventType type) noexcept;
std::optional<EventType> parse_event_type(std::string_view name) noexcept;

struct Event {
  std::uint64_t seq = 0;
  EventType type = EventType::MemoryCreated;
  std::optional<std::string> agent;
  nlohmann::json payload = nlohmann::json::object();
  Timestamp timestamp{};
};

nlohmann::json to_json(const Event& event);

inline constexpr std::size_t kRingCapacity = 200;
inline constexpr std::size_t kMaxBacklog = 1000;
inline constexpr std::chrono::hours kHotWindow{48};
inline constexpr std::chrono::hours kWarmWindow{14 * 24};
inline constexpr std::chrono::hours kColdWindow{30 * 24};

enum class Tier { Hot, Warm, Cold };

std::string_view to_string(Tier tier) noexcept;

struct StoredEvent {
  Event event;  // payload is null once cold
  Tier tier = Tier::Hot;
};

struct SweepReport {
  std::size_t demoted = 0;     // tier transitions
  std::size_t pruned = 0;      // events deleted
  std::size_t aggregated = 0;  // (day, type) counters touched

  friend bool operator==(const SweepReport&, const SweepReport&) = default;
};

struct DailyCount {
  std::string day;  // YYYY-MM-DD, UTC
  EventType type;
  std::uint64_t count;
};

struct AgentProfile {
  std::string id;
  Protocol protocol = Protocol::CLI;
  std::uint64_t write_count = 0;
  std::uint64_t recall_count = 0;
  Timestamp first_seen{};
  Timestamp last_seen{};
};

nlohmann::json to_json(const AgentProfile& profile);

/// Persistent coordination state. Writes are queued to a background thread that
/// batches them; flush() waits until everything queued so far is on disk.
class CoordinationStore {
 public:
  explicit CoordinationStore(const std::filesystem::path& path);
  ~CoordinationStore();
  CoordinationStore(const CoordinationStore&) = delete;
  CoordinationStore& operator=(const CoordinationStore&) = delete;

  void append_event(Event event);
  void save_agent(const AgentProfile& profile);
  void save_trust(const trust::TrustState& state);
  void flush();

  std::uint64_t max_seq();
  std::vector<StoredEvent> events_after(std::uint64_t seq, std::size_t limit);
  std::vector<DailyCount> daily_counts();
  /// Events older than 30 days fold into per-day per-type counters and are deleted;
  /// older than 14 days lose their payload; older than 48 hours leave the hot tier.
  SweepReport sweep(Timestamp now);
  std::vector<AgentProfile> load_agents();
  std::vector<trust::TrustState> load_trust();

  std::filesystem::path location() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class EventBus;

/// One consumer's queue. A consumer that falls more than kMaxBacklog events behind
/// is disconnected instead of slowing the publisher.
class Subscription {
 public:
  /// Next event, or nullopt on timeout or once closed and drained.
  std::optional<Event> next(std::chrono::milliseconds timeout);
  std::vector<Event> drain();
  void close();
  bool closed() const;
  /// True if closed because the backlog overflowed.
  bool overflowed() const;
  std::size_t backlog() const;

 private:
  friend class EventBus;
  explicit Subscription(std::optional<std::set<EventType>> filter) : filter_(std::move(filter)) {}
  bool wants(EventType type) const { return !filter_ || filter_->contains(type); }
  void offer(const Event& event);

  std::optional<std::set<EventType>> filter_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Event> queue_;
  bool closed_ = false;
  bool overflowed_ = false;
};

class EventBus {
 public:
  explicit EventBus(std::shared_ptr<const Clock> clock, CoordinationStore* store = nullptr);

  /// Returns the assigned sequence number.
  std::uint64_t publish(EventType type, std::optional<std::string> agent,
                        nlohmann::json payload = nlohmann::json::object());

  /// With replay_buffer the current ring contents that pass the filter are queued first.
  std::shared_ptr<Subscription> subscribe(std::optional<std::set<EventType>> filter = std::nullopt,
                                          bool replay_buffer = false);

  std::vector<Event> buffer() const;
  std::uint64_t last_seq() const;
  std::size_t subscriber_count() const;

  /// Requires a store. Flushes pending events first.
  SweepReport retention_sweep(Timestamp now);
  std::vector<DailyCount> daily_counts();
  /// Recent events from the persistent log (falls back to the ring without a store).
  std::vector<StoredEvent> tail(std::size_t limit);
  void flush();

  const Clock& clock() const noexcept { return *clock_; }

 private:
  std::shared_ptr<const Clock> clock_;
  CoordinationStore* store_;
  mutable std::mutex mu_;
  std::uint64_t seq_ = 0;
  Timestamp last_ts_{};
  std::deque<Event> ring_;
  std::vector<std::weak_ptr<Subscription>> subscribers_;
};

enum class Activity { Write, Recall };

class AgentRegistry {
 public:
  AgentRegistry(EventBus& bus, std::shared_ptr<const Clock> clock,
                CoordinationStore* store = nullptr);

  /// Creates or updates the profile. The first registration publishes agent.connected;
  /// later ones only update the protocol.
  AgentProfile register_agent(const std::string& id, Protocol protocol);
  /// Registers on first sight with `protocol`, then bumps the counter.
  AgentProfile touch(const std::string& id, Activity activity, Protocol protocol = Protocol::CLI);

  std::optional<AgentProfile> find(const std::string& id) const;
  std::vector<AgentProfile> list() const;

 private:
  AgentProfile register_locked(const std::string& id, Protocol protocol, bool& created);

  EventBus& bus_;
  std::shared_ptr<const Clock> clock_;
  CoordinationStore* store_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, AgentProfile> agents_;
};

}  // namespace agentmem::events
