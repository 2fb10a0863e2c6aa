#pragma once
// Behavioral feedback store and the analyses built on it: phase gating, technology
// preferences, project context and workflow mining. Everything here lives in its own
// database file so it can be erased without touching stored memories.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentmem/common.hpp"
#include "agentmem/pattern_learning.hpp"

namespace agentmem::detail {
class DbWorker;
}

namespace agentmem::learning {

enum class Channel { ToolUsed, CliUseful, DashboardClick, PassiveDecay };

std::string_view to_string(Channel c) noexcept;
std::optional<Channel> parse_channel(std::string_view name) noexcept;
/// +1 for consumption channels, -0.1 for passive decay.
double polarity(Channel c) noexcept;

struct FeedbackSignal {
  Channel channel = Channel::ToolUsed;
  MemoryId memory_id{};
  std::string query;  // normalized
  double polarity = 1.0;
  Timestamp timestamp{};
  std::set<patterns::Category> categories;  // of the memory when the signal arrived
};

/// Lowercased tokens, sorted, joined by single spaces.
std::string normalize_query(std::string_view query);

inline constexpr std::uint64_t kPhase1Signals = 20;
inline constexpr std::uint64_t kPhase2Signals = 200;
inline constexpr std::uint64_t kPhase2Queries = 50;
/// Unconsumed exposures that trigger one passive-decay signal.
inline constexpr std::uint32_t kDecayExposures = 5;

int phase_for(std::uint64_t signals, std::uint64_t unique_queries) noexcept;

struct AccessStats {
  std::uint64_t accesses = 0;     // times returned plus times consumed
  std::uint32_t unconsumed = 0;   // exposures since the last consumption
};

struct ActivityEvent {
  Timestamp timestamp{};
  std::string label;
};

/// Persistent learning state. Reads come from memory; writes are queued to a
/// background connection. The database file is created on first write.
class LearningStore {
 public:
  /// ":memory:" keeps everything transient.
  explicit LearningStore(std::filesystem::path path);
  ~LearningStore();
  LearningStore(const LearningStore&) = delete;
  LearningStore& operator=(const LearningStore&) = delete;

  void record(FeedbackSignal signal);
  /// Counts one exposure per id. Returns ids that just crossed the decay threshold;
  /// their unconsumed counters are reset.
  std::vector<MemoryId> note_exposures(const std::vector<MemoryId>& ids);
  void observe_pattern(patterns::PatternKind kind, patterns::Category category, bool positive);
  void record_activity(ActivityEvent event);
  void save_model(const std::string& json);

  /// Signals on consumption channels (passive decay is stored but not counted).
  std::uint64_t signal_count() const;
  std::uint64_t unique_query_count() const;
  int phase() const;
  std::vector<FeedbackSignal> signals() const;
  AccessStats access(MemoryId id) const;
  patterns::PatternTracker patterns() const;
  std::vector<ActivityEvent> activity() const;
  std::optional<std::string> model() const;
  /// Bumped by every change to signals, activity or the model.
  std::uint64_t version() const;

  /// Deletes the database file (and sidecars) and clears all state.
  void reset();
  void flush();

  const std::filesystem::path& location() const noexcept { return path_; }

 private:
  void load();
  std::unique_ptr<detail::DbWorker> make_worker();

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<FeedbackSignal> signals_;
  std::uint64_t counted_ = 0;
  std::unordered_set<std::string> queries_;
  std::unordered_map<MemoryId, AccessStats> access_;
  patterns::PatternTracker patterns_;
  std::vector<ActivityEvent> activity_;
  std::optional<std::string> model_;
  std::uint64_t version_ = 0;
  std::unique_ptr<detail::DbWorker> worker_;
};

// -- technology preferences --------------------------------------------------

inline constexpr double kPreferenceHalfLifeDays = 365.0;

struct PreferenceProfile {
  std::array<double, patterns::kCategoryCount> weights{};

  double weight(patterns::Category c) const { return weights[static_cast<std::size_t>(c)]; }
  double max_weight() const;
  /// Categories holding at least half the maximum weight.
  std::set<patterns::Category> top_categories() const;
};

/// w_c = sum over positive signals touching c of polarity * 2^(-age_days / 365).
PreferenceProfile mine_tech_preferences(const std::vector<FeedbackSignal>& signals, Timestamp now);

// -- project context ---------------------------------------------------------

struct ProjectContext {
  std::vector<std::string> active_paths;
  std::vector<std::string> recent_tags;
  std::optional<std::string> cluster_hint;
  std::optional<std::string> explicit_label;

  bool empty() const {
    return active_paths.empty() && recent_tags.empty() && !cluster_hint && !explicit_label;
  }
};

inline constexpr double kLabelWeight = 0.4;
inline constexpr double kPathWeight = 0.25;
inline constexpr double kTagWeight = 0.2;
inline constexpr double kClusterWeight = 0.15;

/// Project named by a file path: its first component after any home-directory prefix.
std::optional<std::string> project_from_path(std::string_view path);
/// Tags of the form "project:<name>".
std::optional<std::string> project_from_tag(std::string_view tag);

/// Weighted vote across the four signals, scaled so the best project scores 1.
std::map<std::string, double> detect_project_context(const ProjectContext& context);

// -- workflow mining ---------------------------------------------------------

struct WorkflowPattern {
  std::vector<std::string> sequence;  // length 2..5
  double support = 0.0;
  Timestamp last_seen{};
};

struct WorkflowOptions {
  std::chrono::milliseconds window = std::chrono::hours(2);
  double min_support = 3.0;
  double half_life_days = 30.0;
  std::size_t min_length = 2;
  std::size_t max_length = 5;
};

/// Counts contiguous label runs whose first and last events fall within the window,
/// each weighted by 2^(-age_days / half_life) of its last event. Support-descending.
std::vector<WorkflowPattern> mine_workflows(std::vector<ActivityEvent> history, Timestamp now,
                                            const WorkflowOptions& options = {});

}  // namespace agentmem::learning
