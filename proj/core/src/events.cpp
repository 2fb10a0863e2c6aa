#include "agentmem/events.hpp"

#include <algorithm>
#include <functional>
#include <future>
#include <map>
#include <thread>
#include <type_traits>

#include "sqlite_db.hpp"

namespace agentmem::events {

using nlohmann::json;

namespace {

constexpr std::string_view kTypeNames[] = {"memory.created",  "memory.recalled", "memory.deleted",
                                           "agent.connected", "graph.updated",   "trust.changed",
                                           "feedback.recorded"};

std::int64_t ms(std::chrono::hours h) {
  return std::chrono::duration_cast<Millis>(h).count();
}

}  // namespace

std::string_view to_string(EventType type) noexcept {
  return kTypeNames[static_cast<std::size_t>(type)];
}

std::optional<EventType> parse_event_type(std::string_view name) noexcept {
  for (std::size_t i = 0; i < std::size(kTypeNames); ++i) {
    if (kTypeNames[i] == name) return static_cast<EventType>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Tier tier) noexcept {
  switch (tier) {
    case Tier::Hot: return "hot";
    case Tier::Warm: return "warm";
    case Tier::Cold: return "cold";
  }
  return "hot";
}

json to_json(const Event& e) {
  return {{"seq", e.seq},
          {"type", to_string(e.type)},
          {"agent", e.agent ? json(*e.agent) : json(nullptr)},
          {"payload", e.payload},
          {"timestamp", format_iso8601(e.timestamp)}};
}

json to_json(const AgentProfile& p) {
  return {{"id", p.id},
          {"protocol", to_string(p.protocol)},
          {"write_count", p.write_count},
          {"recall_count", p.recall_count},
          {"first_seen", format_iso8601(p.first_seen)},
          {"last_seen", format_iso8601(p.last_seen)}};
}

// ---------------------------------------------------------------------------

struct CoordinationStore::Impl {
  explicit Impl(const std::filesystem::path& path) : db(path, detail::Durability::Normal) {
    db.exec(
        "CREATE TABLE IF NOT EXISTS events ("
        " seq INTEGER PRIMARY KEY, type TEXT NOT NULL, agent TEXT, payload TEXT,"
        " ts INTEGER NOT NULL, tier INTEGER NOT NULL DEFAULT 0);"
        "CREATE INDEX IF NOT EXISTS events_ts ON events(ts);"
        "CREATE TABLE IF NOT EXISTS daily_aggregates ("
        " day TEXT NOT NULL, type TEXT NOT NULL, count INTEGER NOT NULL,"
        " PRIMARY KEY(day, type));"
        "CREATE TABLE IF NOT EXISTS agents ("
        " id TEXT PRIMARY KEY, protocol TEXT NOT NULL, write_count INTEGER NOT NULL,"
        " recall_count INTEGER NOT NULL, first_seen INTEGER NOT NULL, last_seen INTEGER NOT NULL);"
        "CREATE TABLE IF NOT EXISTS trust ("
        " agent TEXT PRIMARY KEY, alpha REAL NOT NULL, beta REAL NOT NULL, t_inc REAL NOT NULL,"
        " n INTEGER NOT NULL, eta REAL NOT NULL);");
    worker = std::thread([this] { run(); });
  }

  ~Impl() {
    {
      std::lock_guard lock(mu);
      stopping = true;
    }
    cv.notify_all();
    worker.join();
  }

  // Runs `fn` on the worker after everything queued before it, and waits.
  template <class F>
  auto call(F&& fn) {
    using R = std::invoke_result_t<F&, detail::Database&>;
    std::packaged_task<R()> task([this, &fn] { return fn(db); });
    auto result = task.get_future();
    {
      std::lock_guard lock(mu);
      tasks.emplace_back([&task] { task(); });
    }
    cv.notify_all();
    return result.get();
  }

  void run() {
    for (;;) {
      std::vector<Event> events;
      std::map<std::string, AgentProfile> agents;
      std::map<std::string, trust::TrustState> trusts;
      std::deque<std::function<void()>> work;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [this] {
          return stopping || !pending_events.empty() || !pending_agents.empty() ||
                 !pending_trust.empty() || !tasks.empty();
        });
        if (stopping && pending_events.empty() && pending_agents.empty() &&
            pending_trust.empty() && tasks.empty()) {
          return;
        }
        events.swap(pending_events);
        agents.swap(pending_agents);
        trusts.swap(pending_trust);
        work.swap(tasks);
      }
      try {
        write_batch(events, agents, trusts);
      } catch (...) {
        // Coordination state is advisory; a failed batch must not stop the worker.
      }
      for (auto& t : work) t();
    }
  }

  void write_batch(const std::vector<Event>& events, const std::map<std::string, AgentProfile>& agents,
                   const std::map<std::string, trust::TrustState>& trusts) {
    if (events.empty() && agents.empty() && trusts.empty()) return;
    detail::Transaction tx(db);
    if (!events.empty()) {
      auto st = db.prepare("INSERT OR REPLACE INTO events(seq, type, agent, payload, ts, tier)"
                           " VALUES(?, ?, ?, ?, ?, 0)");
      for (const auto& e : events) {
        st.bind(1, static_cast<std::int64_t>(e.seq))
            .bind(2, to_string(e.type))
            .bind(3, e.agent)
            .bind(4, std::string_view(e.payload.dump()))
            .bind(5, to_epoch_ms(e.timestamp))
            .exec();
        st.reset();
      }
    }
    if (!agents.empty()) {
      auto st = db.prepare("INSERT OR REPLACE INTO agents VALUES(?, ?, ?, ?, ?, ?)");
      for (const auto& [_, p] : agents) {
        st.bind(1, std::string_view(p.id))
            .bind(2, to_string(p.protocol))
            .bind(3, static_cast<std::int64_t>(p.write_count))
            .bind(4, static_cast<std::int64_t>(p.recall_count))
            .bind(5, to_epoch_ms(p.first_seen))
            .bind(6, to_epoch_ms(p.last_seen))
            .exec();
        st.reset();
      }
    }
    if (!trusts.empty()) {
      auto st = db.prepare("INSERT OR REPLACE INTO trust VALUES(?, ?, ?, ?, ?, ?)");
      for (const auto& [_, s] : trusts) {
        st.bind(1, std::string_view(s.agent))
            .bind(2, s.alpha)
            .bind(3, s.beta)
            .bind(4, s.t_inc)
            .bind(5, static_cast<std::int64_t>(s.n))
            .bind(6, s.eta)
            .exec();
        st.reset();
      }
    }
    tx.commit();
  }

  detail::Database db;
  std::mutex mu;
  std::condition_variable cv;
  std::vector<Event> pending_events;
  std::map<std::string, AgentProfile> pending_agents;
  std::map<std::string, trust::TrustState> pending_trust;
  std::deque<std::function<void()>> tasks;
  bool stopping = false;
  std::thread worker;
};

CoordinationStore::CoordinationStore(const std::filesystem::path& path)
    : impl_(std::make_unique<Impl>(path)) {}

CoordinationStore::~CoordinationStore() = default;

std::filesystem::path CoordinationStore::location() const { return impl_->db.path(); }

void CoordinationStore::append_event(Event event) {
  {
    std::lock_guard lock(impl_->mu);
    impl_->pending_events.push_back(std::move(event));
  }
  impl_->cv.notify_all();
}

void CoordinationStore::save_agent(const AgentProfile& profile) {
  {
    std::lock_guard lock(impl_->mu);
    impl_->pending_agents[profile.id] = profile;
  }
  impl_->cv.notify_all();
}

void CoordinationStore::save_trust(const trust::TrustState& state) {
  {
    std::lock_guard lock(impl_->mu);
    impl_->pending_trust[state.agent] = state;
  }
  impl_->cv.notify_all();
}

void CoordinationStore::flush() {
  impl_->call([](detail::Database&) { return 0; });
}

std::uint64_t CoordinationStore::max_seq() {
  return impl_->call([](detail::Database& db) {
    auto st = db.prepare("SELECT COALESCE(MAX(seq), 0) FROM events");
    st.step();
    return static_cast<std::uint64_t>(st.column_int(0));
  });
}

std::vector<StoredEvent> CoordinationStore::events_after(std::uint64_t seq, std::size_t limit) {
  return impl_->call([seq, limit](detail::Database& db) {
    auto st = db.prepare(
        "SELECT seq, type, agent, payload, ts, tier FROM events WHERE seq > ?"
        " ORDER BY seq LIMIT ?");
    st.bind(1, static_cast<std::int64_t>(seq))
        .bind(2, limit == 0 ? std::int64_t{-1} : static_cast<std::int64_t>(limit));
    std::vector<StoredEvent> out;
    while (st.step()) {
      StoredEvent se;
      se.event.seq = static_cast<std::uint64_t>(st.column_int(0));
      se.event.type = parse_event_type(st.column_text(1)).value_or(EventType::MemoryCreated);
      if (!st.column_is_null(2)) se.event.agent = st.column_text(2);
      se.event.payload = st.column_is_null(3) ? json(nullptr) : json::parse(st.column_text(3));
      se.event.timestamp = from_epoch_ms(st.column_int(4));
      se.tier = static_cast<Tier>(st.column_int(5));
      out.push_back(std::move(se));
    }
    return out;
  });
}

std::vector<DailyCount> CoordinationStore::daily_counts() {
  return impl_->call([](detail::Database& db) {
    auto st = db.prepare("SELECT day, type, count FROM daily_aggregates ORDER BY day, type");
    std::vector<DailyCount> out;
    while (st.step()) {
      out.push_back({st.column_text(0),
                     parse_event_type(st.column_text(1)).value_or(EventType::MemoryCreated),
                     static_cast<std::uint64_t>(st.column_int(2))});
    }
    return out;
  });
}

SweepReport CoordinationStore::sweep(Timestamp now) {
  return impl_->call([now](detail::Database& db) {
    const std::int64_t t = to_epoch_ms(now);
    SweepReport report;
    detail::Transaction tx(db);

    const std::int64_t cold_cutoff = t - ms(kColdWindow);
    {
      auto groups = db.prepare(
          "SELECT strftime('%Y-%m-%d', ts / 1000, 'unixepoch') AS day, type, COUNT(*)"
          " FROM events WHERE ts < ? GROUP BY day, type");
      groups.bind(1, cold_cutoff);
      auto upsert = db.prepare(
          "INSERT INTO daily_aggregates(day, type, count) VALUES(?, ?, ?)"
          " ON CONFLICT(day, type) DO UPDATE SET count = count + excluded.count");
      while (groups.step()) {
        upsert.bind(1, std::string_view(groups.column_text(0)))
            .bind(2, std::string_view(groups.column_text(1)))
            .bind(3, groups.column_int(2))
            .exec();
        upsert.reset();
        ++report.aggregated;
      }
    }
    db.prepare("DELETE FROM events WHERE ts < ?").bind(1, cold_cutoff).exec();
    report.pruned = static_cast<std::size_t>(db.changes());

    db.prepare("UPDATE events SET tier = 2, payload = NULL WHERE tier < 2 AND ts < ?")
        .bind(1, t - ms(kWarmWindow))
        .exec();
    report.demoted += static_cast<std::size_t>(db.changes());
    db.prepare("UPDATE events SET tier = 1 WHERE tier = 0 AND ts < ?")
        .bind(1, t - ms(kHotWindow))
        .exec();
    report.demoted += static_cast<std::size_t>(db.changes());

    tx.commit();
    return report;
  });
}

std::vector<AgentProfile> CoordinationStore::load_agents() {
  return impl_->call([](detail::Database& db) {
    auto st = db.prepare(
        "SELECT id, protocol, write_count, recall_count, first_seen, last_seen FROM agents"
        " ORDER BY id");
    std::vector<AgentProfile> out;
    while (st.step()) {
      AgentProfile p;
      p.id = st.column_text(0);
      p.protocol = parse_protocol(st.column_text(1)).value_or(Protocol::CLI);
      p.write_count = static_cast<std::uint64_t>(st.column_int(2));
      p.recall_count = static_cast<std::uint64_t>(st.column_int(3));
      p.first_seen = from_epoch_ms(st.column_int(4));
      p.last_seen = from_epoch_ms(st.column_int(5));
      out.push_back(std::move(p));
    }
    return out;
  });
}

std::vector<trust::TrustState> CoordinationStore::load_trust() {
  return impl_->call([](detail::Database& db) {
    auto st = db.prepare("SELECT agent, alpha, beta, t_inc, n, eta FROM trust ORDER BY agent");
    std::vector<trust::TrustState> out;
    while (st.step()) {
      trust::TrustState s;
      s.agent = st.column_text(0);
      s.alpha = st.column_double(1);
      s.beta = st.column_double(2);
      s.t_inc = st.column_double(3);
      s.n = static_cast<std::uint64_t>(st.column_int(4));
      s.eta = st.column_double(5);
      out.push_back(std::move(s));
    }
    return out;
  });
}

// ---------------------------------------------------------------------------

void Subscription::offer(const Event& event) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    if (queue_.size() >= kMaxBacklog) {
      closed_ = true;
      overflowed_ = true;
      queue_.clear();
    } else {
      queue_.push_back(event);
    }
  }
  cv_.notify_all();
}

std::optional<Event> Subscription::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [this] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  Event e = std::move(queue_.front());
  queue_.pop_front();
  return e;
}

std::vector<Event> Subscription::drain() {
  std::lock_guard lock(mu_);
  std::vector<Event> out(std::make_move_iterator(queue_.begin()),
                         std::make_move_iterator(queue_.end()));
  queue_.clear();
  return out;
}

void Subscription::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

bool Subscription::overflowed() const {
  std::lock_guard lock(mu_);
  return overflowed_;
}

std::size_t Subscription::backlog() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

// ---------------------------------------------------------------------------

EventBus::EventBus(std::shared_ptr<const Clock> clock, CoordinationStore* store)
    : clock_(std::move(clock)), store_(store) {
  if (store_) seq_ = store_->max_seq();
}

std::uint64_t EventBus::publish(EventType type, std::optional<std::string> agent, json payload) {
  std::lock_guard lock(mu_);
  Event e;
  e.seq = ++seq_;
  e.type = type;
  e.agent = std::move(agent);
  e.payload = std::move(payload);
  e.timestamp = std::max(clock_->now(), last_ts_);
  last_ts_ = e.timestamp;

  if (ring_.size() == kRingCapacity) ring_.pop_front();
  ring_.push_back(e);

  std::erase_if(subscribers_, [&e](const std::weak_ptr<Subscription>& weak) {
    auto sub = weak.lock();
    if (!sub || sub->closed()) return true;
    if (sub->wants(e.type)) sub->offer(e);
    return false;
  });
  if (store_) store_->append_event(std::move(e));
  return seq_;
}

std::shared_ptr<Subscription> EventBus::subscribe(std::optional<std::set<EventType>> filter,
                                                  bool replay_buffer) {
  auto sub = std::shared_ptr<Subscription>(new Subscription(std::move(filter)));
  std::lock_guard lock(mu_);
  if (replay_buffer) {
    for (const auto& e : ring_) {
      if (sub->wants(e.type)) sub->offer(e);
    }
  }
  subscribers_.push_back(sub);
  return sub;
}

std::vector<Event> EventBus::buffer() const {
  std::lock_guard lock(mu_);
  return {ring_.begin(), ring_.end()};
}

std::uint64_t EventBus::last_seq() const {
  std::lock_guard lock(mu_);
  return seq_;
}

std::size_t EventBus::subscriber_count() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(
      subscribers_.begin(), subscribers_.end(), [](const std::weak_ptr<Subscription>& w) {
        auto s = w.lock();
        return s && !s->closed();
      }));
}

SweepReport EventBus::retention_sweep(Timestamp now) {
  if (!store_) throw Error(ErrorCode::InvalidArgument, "retention needs a coordination store");
  return store_->sweep(now);
}

std::vector<DailyCount> EventBus::daily_counts() {
  if (!store_) return {};
  return store_->daily_counts();
}

std::vector<StoredEvent> EventBus::tail(std::size_t limit) {
  if (!store_) {
    std::vector<StoredEvent> out;
    for (const auto& e : buffer()) out.push_back({e, Tier::Hot});
    if (limit && out.size() > limit) out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(limit));
    return out;
  }
  const std::uint64_t last = last_seq();
  const std::uint64_t from = limit && last > limit ? last - limit : 0;
  store_->flush();
  return store_->events_after(from, limit);
}

void EventBus::flush() {
  if (store_) store_->flush();
}

// ---------------------------------------------------------------------------

AgentRegistry::AgentRegistry(EventBus& bus, std::shared_ptr<const Clock> clock,
                             CoordinationStore* store)
    : bus_(bus), clock_(std::move(clock)), store_(store) {
  if (store_) {
    for (auto& p : store_->load_agents()) agents_.emplace(p.id, std::move(p));
  }
}

AgentProfile AgentRegistry::register_locked(const std::string& id, Protocol protocol,
                                            bool& created) {
  const Timestamp now = clock_->now();
  auto [it, inserted] = agents_.try_emplace(id);
  auto& p = it->second;
  if (inserted) {
    p.id = id;
    p.first_seen = now;
  }
  p.protocol = protocol;
  p.last_seen = std::max(p.last_seen, now);
  created = inserted;
  return p;
}

AgentProfile AgentRegistry::register_agent(const std::string& id, Protocol protocol) {
  bool created = false;
  AgentProfile p;
  {
    std::lock_guard lock(mu_);
    p = register_locked(id, protocol, created);
  }
  if (store_) store_->save_agent(p);
  if (created) {
    bus_.publish(EventType::AgentConnected, id, {{"protocol", to_string(protocol)}});
  }
  return p;
}

AgentProfile AgentRegistry::touch(const std::string& id, Activity activity, Protocol protocol) {
  bool created = false;
  AgentProfile p;
  {
    std::lock_guard lock(mu_);
    auto it = agents_.find(id);
    if (it == agents_.end()) {
      register_locked(id, protocol, created);
      it = agents_.find(id);
    }
    auto& profile = it->second;
    if (activity == Activity::Write) {
      ++profile.write_count;
    } else {
      ++profile.recall_count;
    }
    profile.last_seen = std::max(profile.last_seen, clock_->now());
    p = profile;
  }
  if (store_) store_->save_agent(p);
  if (created) {
    bus_.publish(EventType::AgentConnected, id, {{"protocol", to_string(protocol)}});
  }
  return p;
}

std::optional<AgentProfile> AgentRegistry::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = agents_.find(id);
  if (it == agents_.end()) return std::nullopt;
  return it->second;
}

std::vector<AgentProfile> AgentRegistry::list() const {
  std::vector<AgentProfile> out;
  {
    std::lock_guard lock(mu_);
    for (const auto& [_, p] : agents_) out.push_back(p);
  }
  std::sort(out.begin(), out.end(),
            [](const AgentProfile& a, const AgentProfile& b) { return a.id < b.id; });
  return out;
}

}  // namespace agentmem::events
