#include "agentmem/learning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "agentmem/text_index.hpp"
#include "db_worker.hpp"

namespace agentmem::learning {

using nlohmann::json;
using patterns::Category;

std::string_view to_string(Channel c) noexcept {
  switch (c) {
    case Channel::ToolUsed: return "tool_used";
    case Channel::CliUseful: return "cli_useful";
    case Channel::DashboardClick: return "dashboard_click";
    case Channel::PassiveDecay: return "passive_decay";
  }
  return "tool_used";
}

std::optional<Channel> parse_channel(std::string_view name) noexcept {
  for (const auto c :
       {Channel::ToolUsed, Channel::CliUseful, Channel::DashboardClick, Channel::PassiveDecay}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

double polarity(Channel c) noexcept { return c == Channel::PassiveDecay ? -0.1 : 1.0; }

std::string normalize_query(std::string_view query) {
  auto tokens = text::tokenize(query);
  std::sort(tokens.begin(), tokens.end());
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

int phase_for(std::uint64_t signals, std::uint64_t unique_queries) noexcept {
  if (signals < kPhase1Signals) return 0;
  if (signals >= kPhase2Signals && unique_queries >= kPhase2Queries) return 2;
  return 1;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kSchema =
    "CREATE TABLE IF NOT EXISTS signals ("
    " id INTEGER PRIMARY KEY AUTOINCREMENT, channel TEXT NOT NULL, memory_id INTEGER NOT NULL,"
    " query TEXT NOT NULL, polarity REAL NOT NULL, ts INTEGER NOT NULL, categories TEXT NOT NULL);"
    "CREATE TABLE IF NOT EXISTS access ("
    " memory_id INTEGER PRIMARY KEY, accesses INTEGER NOT NULL, unconsumed INTEGER NOT NULL);"
    "CREATE TABLE IF NOT EXISTS patterns ("
    " kind TEXT NOT NULL, category TEXT NOT NULL, k INTEGER NOT NULL, n INTEGER NOT NULL,"
    " PRIMARY KEY(kind, category));"
    "CREATE TABLE IF NOT EXISTS activity (ts INTEGER NOT NULL, label TEXT NOT NULL);"
    "CREATE TABLE IF NOT EXISTS model (id INTEGER PRIMARY KEY CHECK (id = 1), body TEXT NOT NULL);";

bool transient(const std::filesystem::path& p) { return p == ":memory:"; }

void put_access(detail::Database& db, MemoryId id, const AccessStats& s) {
  db.prepare("INSERT OR REPLACE INTO access VALUES(?, ?, ?)")
      .bind(1, static_cast<std::int64_t>(to_u64(id)))
      .bind(2, static_cast<std::int64_t>(s.accesses))
      .bind(3, static_cast<std::int64_t>(s.unconsumed))
      .exec();
}

bool counts_toward_phase(Channel c) { return c != Channel::PassiveDecay; }

}  // namespace

std::unique_ptr<detail::DbWorker> LearningStore::make_worker() {
  auto path = path_;
  return std::make_unique<detail::DbWorker>([path] {
    auto db = std::make_unique<detail::Database>(path, detail::Durability::Normal);
    db->exec(kSchema);
    return db;
  });
}

LearningStore::LearningStore(std::filesystem::path path) : path_(std::move(path)) {
  worker_ = make_worker();
  if (!transient(path_) && std::filesystem::exists(path_)) load();
}

LearningStore::~LearningStore() = default;

void LearningStore::load() {
  worker_->call([this](detail::Database* db) {
    if (!db) throw Error(ErrorCode::IoFailure, "cannot open learning store " + path_.string());
    std::lock_guard lock(mu_);
    auto st = db->prepare(
        "SELECT channel, memory_id, query, polarity, ts, categories FROM signals ORDER BY id");
    while (st.step()) {
      FeedbackSignal s;
      s.channel = parse_channel(st.column_text(0)).value_or(Channel::ToolUsed);
      s.memory_id = make_id(static_cast<std::uint64_t>(st.column_int(1)));
      s.query = st.column_text(2);
      s.polarity = st.column_double(3);
      s.timestamp = from_epoch_ms(st.column_int(4));
      for (const auto& c : json::parse(st.column_text(5))) {
        if (auto cat = patterns::parse_category(c.get<std::string>())) s.categories.insert(*cat);
      }
      if (counts_toward_phase(s.channel)) {
        ++counted_;
        if (!s.query.empty()) queries_.insert(s.query);
      }
      signals_.push_back(std::move(s));
    }
    auto ac = db->prepare("SELECT memory_id, accesses, unconsumed FROM access");
    while (ac.step()) {
      access_[make_id(static_cast<std::uint64_t>(ac.column_int(0)))] = {
          static_cast<std::uint64_t>(ac.column_int(1)),
          static_cast<std::uint32_t>(ac.column_int(2))};
    }
    auto pt = db->prepare("SELECT kind, category, k, n FROM patterns");
    while (pt.step()) {
      const auto kind = pt.column_text(0) == "style" ? patterns::PatternKind::Style
                                                     : patterns::PatternKind::Preference;
      auto cat = patterns::parse_category(pt.column_text(1));
      if (!cat) continue;
      auto state = patterns::PatternState::fresh(kind, *cat);
      state.k = static_cast<std::uint64_t>(pt.column_int(2));
      state.n = static_cast<std::uint64_t>(pt.column_int(3));
      patterns_.restore(state);
    }
    auto av = db->prepare("SELECT ts, label FROM activity ORDER BY rowid");
    while (av.step()) activity_.push_back({from_epoch_ms(av.column_int(0)), av.column_text(1)});
    auto md = db->prepare("SELECT body FROM model WHERE id = 1");
    if (md.step()) model_ = md.column_text(0);
    return 0;
  });
}

void LearningStore::record(FeedbackSignal signal) {
  json cats = json::array();
  for (const auto c : signal.categories) cats.push_back(patterns::to_string(c));
  AccessStats stats;
  {
    std::lock_guard lock(mu_);
    auto& a = access_[signal.memory_id];
    if (counts_toward_phase(signal.channel)) {
      ++counted_;
      if (!signal.query.empty()) queries_.insert(signal.query);
      ++a.accesses;
      a.unconsumed = 0;
    }
    stats = a;
    signals_.push_back(signal);
    ++version_;
  }
  if (transient(path_)) return;
  worker_->post([signal = std::move(signal), cats = cats.dump(), stats](detail::Database& db) {
    db.prepare(
          "INSERT INTO signals(channel, memory_id, query, polarity, ts, categories)"
          " VALUES(?, ?, ?, ?, ?, ?)")
        .bind(1, to_string(signal.channel))
        .bind(2, static_cast<std::int64_t>(to_u64(signal.memory_id)))
        .bind(3, std::string_view(signal.query))
        .bind(4, signal.polarity)
        .bind(5, to_epoch_ms(signal.timestamp))
        .bind(6, std::string_view(cats))
        .exec();
    put_access(db, signal.memory_id, stats);
  });
}

std::vector<MemoryId> LearningStore::note_exposures(const std::vector<MemoryId>& ids) {
  std::vector<MemoryId> decayed;
  std::vector<std::pair<MemoryId, AccessStats>> rows;
  {
    std::lock_guard lock(mu_);
    for (const auto id : ids) {
      auto& a = access_[id];
      ++a.accesses;
      if (++a.unconsumed >= kDecayExposures) {
        a.unconsumed = 0;
        decayed.push_back(id);
      }
      rows.emplace_back(id, a);
    }
  }
  if (!transient(path_) && !rows.empty()) {
    worker_->post([rows = std::move(rows)](detail::Database& db) {
      for (const auto& [id, s] : rows) put_access(db, id, s);
    });
  }
  return decayed;
}

void LearningStore::observe_pattern(patterns::PatternKind kind, Category category, bool positive) {
  patterns::PatternState state;
  {
    std::lock_guard lock(mu_);
    state = patterns_.observe(kind, category, positive);
  }
  if (transient(path_)) return;
  worker_->post([state](detail::Database& db) {
    db.prepare("INSERT OR REPLACE INTO patterns VALUES(?, ?, ?, ?)")
        .bind(1, patterns::to_string(state.kind))
        .bind(2, patterns::to_string(state.category))
        .bind(3, static_cast<std::int64_t>(state.k))
        .bind(4, static_cast<std::int64_t>(state.n))
        .exec();
  });
}

void LearningStore::record_activity(ActivityEvent event) {
  {
    std::lock_guard lock(mu_);
    activity_.push_back(event);
    ++version_;
  }
  if (transient(path_)) return;
  worker_->post([event = std::move(event)](detail::Database& db) {
    db.prepare("INSERT INTO activity(ts, label) VALUES(?, ?)")
        .bind(1, to_epoch_ms(event.timestamp))
        .bind(2, std::string_view(event.label))
        .exec();
  });
}

void LearningStore::save_model(const std::string& body) {
  {
    std::lock_guard lock(mu_);
    model_ = body;
    ++version_;
  }
  if (transient(path_)) return;
  worker_->post([body](detail::Database& db) {
    db.prepare("INSERT OR REPLACE INTO model(id, body) VALUES(1, ?)")
        .bind(1, std::string_view(body))
        .exec();
  });
}

std::uint64_t LearningStore::signal_count() const {
  std::lock_guard lock(mu_);
  return counted_;
}

std::uint64_t LearningStore::unique_query_count() const {
  std::lock_guard lock(mu_);
  return queries_.size();
}

int LearningStore::phase() const {
  std::lock_guard lock(mu_);
  return phase_for(counted_, queries_.size());
}

std::vector<FeedbackSignal> LearningStore::signals() const {
  std::lock_guard lock(mu_);
  return signals_;
}

AccessStats LearningStore::access(MemoryId id) const {
  std::lock_guard lock(mu_);
  auto it = access_.find(id);
  return it == access_.end() ? AccessStats{} : it->second;
}

patterns::PatternTracker LearningStore::patterns() const {
  std::lock_guard lock(mu_);
  return patterns_;
}

std::vector<ActivityEvent> LearningStore::activity() const {
  std::lock_guard lock(mu_);
  return activity_;
}

std::optional<std::string> LearningStore::model() const {
  std::lock_guard lock(mu_);
  return model_;
}

std::uint64_t LearningStore::version() const {
  std::lock_guard lock(mu_);
  return version_;
}

void LearningStore::reset() {
  worker_->close_then([this] {
    if (!transient(path_)) detail::remove_database_files(path_);
  });
  std::lock_guard lock(mu_);
  signals_.clear();
  counted_ = 0;
  queries_.clear();
  access_.clear();
  patterns_ = patterns::PatternTracker{};
  activity_.clear();
  model_.reset();
  ++version_;
}

void LearningStore::flush() { worker_->flush(); }

// ---------------------------------------------------------------------------

double PreferenceProfile::max_weight() const {
  return *std::max_element(weights.begin(), weights.end());
}

std::set<Category> PreferenceProfile::top_categories() const {
  std::set<Category> out;
  const double top = max_weight();
  if (top <= 0.0) return out;
  for (const auto c : patterns::kAllCategories) {
    if (weight(c) >= 0.5 * top) out.insert(c);
  }
  return out;
}

PreferenceProfile mine_tech_preferences(const std::vector<FeedbackSignal>& signals, Timestamp now) {
  PreferenceProfile p;
  for (const auto& s : signals) {
    if (s.polarity <= 0.0) continue;
    const double age = std::max(0.0, days_between(s.timestamp, now));
    const double w = s.polarity * std::exp2(-age / kPreferenceHalfLifeDays);
    for (const auto c : s.categories) p.weights[static_cast<std::size_t>(c)] += w;
  }
  return p;
}

// ---------------------------------------------------------------------------

std::optional<std::string> project_from_path(std::string_view path) {
  std::vector<std::string> parts;
  std::string current;
  for (const char ch : path) {
    if (ch == '/' || ch == '\\') {
      if (!current.empty()) parts.push_back(std::move(current));
      current.clear();
    } else {
      current += ch;
    }
  }
  if (!current.empty()) parts.push_back(std::move(current));
  std::size_t i = 0;
  if (i < parts.size() && parts[i] == "~") {
    ++i;
  } else if (i + 1 < parts.size() && (parts[i] == "home" || parts[i] == "Users")) {
    i += 2;
  }
  // A bare file name names no project.
  if (i + 1 >= parts.size()) return std::nullopt;
  return parts[i];
}

std::optional<std::string> project_from_tag(std::string_view tag) {
  constexpr std::string_view kPrefix = "project:";
  if (tag.size() <= kPrefix.size() || tag.substr(0, kPrefix.size()) != kPrefix) {
    return std::nullopt;
  }
  return std::string(tag.substr(kPrefix.size()));
}

std::map<std::string, double> detect_project_context(const ProjectContext& ctx) {
  std::map<std::string, double> votes;
  auto spread = [&votes](const std::vector<std::string>& names, double weight) {
    if (names.empty()) return;
    const double share = weight / static_cast<double>(names.size());
    for (const auto& n : names) votes[n] += share;
  };
  if (ctx.explicit_label && !ctx.explicit_label->empty()) votes[*ctx.explicit_label] += kLabelWeight;
  std::vector<std::string> names;
  for (const auto& p : ctx.active_paths) {
    if (auto name = project_from_path(p)) names.push_back(*name);
  }
  spread(names, kPathWeight);
  names.clear();
  for (const auto& t : ctx.recent_tags) {
    if (auto name = project_from_tag(t)) names.push_back(*name);
  }
  spread(names, kTagWeight);
  if (ctx.cluster_hint && !ctx.cluster_hint->empty()) votes[*ctx.cluster_hint] += kClusterWeight;

  double top = 0.0;
  for (const auto& [_, v] : votes) top = std::max(top, v);
  if (top > 0.0) {
    for (auto& [_, v] : votes) v /= top;
  }
  return votes;
}

// ---------------------------------------------------------------------------

std::vector<WorkflowPattern> mine_workflows(std::vector<ActivityEvent> history, Timestamp now,
                                            const WorkflowOptions& options) {
  std::stable_sort(history.begin(), history.end(),
                   [](const ActivityEvent& a, const ActivityEvent& b) {
                     return a.timestamp < b.timestamp;
                   });
  std::map<std::vector<std::string>, WorkflowPattern> found;
  for (std::size_t i = 0; i < history.size(); ++i) {
    for (std::size_t len = options.min_length; len <= options.max_length; ++len) {
      const std::size_t last = i + len - 1;
      if (last >= history.size()) break;
      if (history[last].timestamp - history[i].timestamp > options.window) break;
      std::vector<std::string> seq;
      seq.reserve(len);
      for (std::size_t k = i; k <= last; ++k) seq.push_back(history[k].label);
      const double age = std::max(0.0, days_between(history[last].timestamp, now));
      auto& p = found[seq];
      if (p.sequence.empty()) p.sequence = std::move(seq);
      p.support += std::exp2(-age / options.half_life_days);
      p.last_seen = std::max(p.last_seen, history[last].timestamp);
    }
  }
  std::vector<WorkflowPattern> out;
  for (auto& [_, p] : found) {
    if (p.support >= options.min_support) out.push_back(std::move(p));
  }
  std::stable_sort(out.begin(), out.end(), [](const WorkflowPattern& a, const WorkflowPattern& b) {
    return a.support > b.support;
  });
  return out;
}

}  // namespace agentmem::learning
