#include "agentmem/engine.hpp"

#include <algorithm>
#include <map>

#include "agentmem/metrics.hpp"
#include "agentmem/pattern_learning.hpp"

namespace agentmem {

namespace {

constexpr std::size_t kTrainingPool = 40;
constexpr std::size_t kSyntheticQueries = 100;
constexpr std::size_t kSyntheticTerms = 2;
constexpr std::size_t kMinCorpus = 50;

nlohmann::json memory_summary(const MemoryRecord& r) {
  return {{"id", to_u64(r.id)}, {"path", r.path}, {"importance", r.importance}, {"tags", r.tags}};
}

std::optional<std::string> primary_label(const std::set<patterns::Category>& categories) {
  if (categories.empty()) return std::nullopt;
  return std::string(patterns::to_string(*categories.begin()));
}

}  // namespace

Engine::Engine(Config config, std::shared_ptr<const Clock> clock)
    : config_(std::move(config)), clock_(std::move(clock)) {
  coordination_ = std::make_unique<events::CoordinationStore>(config_.coordination_path());
  bus_ = std::make_unique<events::EventBus>(clock_, coordination_.get());
  registry_ = std::make_unique<events::AgentRegistry>(*bus_, clock_, coordination_.get());
  trust_ = std::make_unique<trust::TrustEngine>(config_.trust);
  for (const auto& s : coordination_->load_trust()) trust_->restore(s);
  for (const auto& p : registry_->list()) trust_->register_agent(p.id);
  trust_->set_listener([this](const trust::TrustState& s, std::optional<trust::SignalKind> kind) {
    coordination_->save_trust(s);
    if (!kind) return;
    bus_->publish(events::EventType::TrustChanged, s.agent,
                  {{"trust", s.score(config_.trust.mode)},
                   {"posterior", s.posterior()},
                   {"incremental", s.t_inc},
                   {"signal", trust::to_string(*kind)}});
  });

  learning_ = std::make_unique<learning::LearningStore>(config_.learning_path());
  index_ = std::make_unique<text::InvertedIndex>();
  traits_ = std::make_unique<search::TraitsTable>();
  graph_ = std::make_unique<graph::KnowledgeGraph>(config_.graph);

  store_ = std::make_unique<MemoryStore>(make_sqlite_backend(config_.memory_db), clock_);
  for (const auto& r : store_->live_records()) {
    index_->index(r.id, r.content, r.created_at);
    traits_->put(r);
  }
  store_->add_commit_listener([this](const CommitNotice& n) { on_commit(n); });

  pipeline_ = std::make_unique<search::SearchPipeline>(*store_, *index_, *traits_, *graph_,
                                                       *learning_, clock_);
  pipeline_->set_ranker_config({config_.ranker_weights});
}

Engine::~Engine() {
  // Stop the writer before the state its listener updates goes away.
  pipeline_.reset();
  store_.reset();
  if (bus_) bus_->flush();
}

void Engine::on_commit(const CommitNotice& notice) {
  const auto& r = notice.record;
  switch (notice.kind) {
    case MutationKind::Created:
      index_->index(r.id, r.content, r.created_at);
      traits_->put(r);
      bus_->publish(events::EventType::MemoryCreated, r.provenance.created_by, memory_summary(r));
      break;
    case MutationKind::Imported:
      if (r.deleted) break;
      index_->index(r.id, r.content, r.created_at);
      traits_->put(r);
      break;
    case MutationKind::Updated:
      if (r.deleted) break;
      index_->index(r.id, r.content, r.created_at);
      traits_->put(r);
      break;
    case MutationKind::Deleted: {
      index_->deindex(r.id);
      traits_->erase(r.id);
      const auto& chain = r.provenance.chain;
      std::optional<std::string> by;
      if (!chain.empty()) by = chain.back().agent;
      bus_->publish(events::EventType::MemoryDeleted, by, {{"id", to_u64(r.id)}, {"path", r.path}});
      break;
    }
    case MutationKind::Purged:
      index_->deindex(r.id);
      traits_->erase(r.id);
      break;
  }
}

void Engine::ensure_agent(const AgentContext& agent) {
  if (agent.agent_id.empty()) throw Error(ErrorCode::InvalidArgument, "agent id is required");
  auto existing = registry_->find(agent.agent_id);
  if (!existing || existing->protocol != agent.protocol) {
    registry_->register_agent(agent.agent_id, agent.protocol);
  }
  trust_->register_agent(agent.agent_id);
}

events::AgentProfile Engine::register_agent(const AgentContext& agent) {
  ensure_agent(agent);
  return *registry_->find(agent.agent_id);
}

void Engine::deny_unless(const AgentContext& agent, trust::Operation op) const {
  const auto decision = trust_->enforce(agent.agent_id, op);
  if (!decision) throw Error(ErrorCode::TrustDenied, decision.reason);
}

MemoryId Engine::remember(const RememberRequest& request, const AgentContext& agent) {
  ensure_agent(agent);
  deny_unless(agent, trust::Operation::Write);
  NewMemory m;
  m.content = request.content;
  m.tags = request.tags;
  m.importance = request.importance;
  m.parent = request.parent;
  m.agent = agent;
  m.trust_at_write = trust_->trust(agent.agent_id);
  const MemoryId id = store_->remember(std::move(m));
  after_write(id, agent);
  return id;
}

std::vector<MemoryId> Engine::remember_many(const std::vector<RememberRequest>& requests,
                                            const AgentContext& agent) {
  ensure_agent(agent);
  deny_unless(agent, trust::Operation::Write);
  const double trust = trust_->trust(agent.agent_id);
  std::vector<NewMemory> batch;
  batch.reserve(requests.size());
  for (const auto& request : requests) {
    NewMemory m;
    m.content = request.content;
    m.tags = request.tags;
    m.importance = request.importance;
    m.parent = request.parent;
    m.agent = agent;
    m.trust_at_write = trust;
    batch.push_back(std::move(m));
  }
  auto ids = store_->remember_many(std::move(batch));
  for (const auto id : ids) after_write(id, agent);
  return ids;
}

void Engine::after_write(MemoryId id, const AgentContext& agent) {
  registry_->touch(agent.agent_id, events::Activity::Write, agent.protocol);
  const auto traits = traits_->get(id);
  if (!traits.categories.empty()) {
    for (const auto c : patterns::kAllCategories) {
      learning_->observe_pattern(patterns::PatternKind::Preference, c, traits.categories.contains(c));
    }
  }
  if (auto label = primary_label(traits.categories)) {
    learning_->record_activity({clock_->now(), *label});
  }
}

MemoryRecord Engine::get(MemoryId id) const { return store_->get(id); }

void Engine::remove(MemoryId id, const AgentContext& agent) {
  ensure_agent(agent);
  deny_unless(agent, trust::Operation::Delete);
  store_->remove(id, agent.agent_id);
}

std::vector<MemoryRecord> Engine::children(MemoryId id) const { return store_->children(id); }
std::vector<MemoryRecord> Engine::subtree(MemoryId id) const { return store_->subtree(id); }
std::optional<MemoryRecord> Engine::parent_of(MemoryId id) const { return store_->parent_of(id); }

search::SearchResult Engine::recall(const search::SearchRequest& request, const AgentContext& agent) {
  ensure_agent(agent);
  auto result = pipeline_->search(request);
  registry_->touch(agent.agent_id, events::Activity::Recall, agent.protocol);
  if (result.hits.empty()) return result;

  const auto query = learning::normalize_query(request.query);
  std::vector<MemoryId> ids;
  ids.reserve(result.hits.size());
  for (std::size_t rank = 0; rank < result.hits.size(); ++rank) {
    const auto id = result.hits[rank].record.id;
    ids.push_back(id);
    bus_->publish(events::EventType::MemoryRecalled, agent.agent_id,
                  {{"id", to_u64(id)}, {"rank", rank + 1}, {"query", query}});
  }
  for (const auto id : learning_->note_exposures(ids)) {
    learning::FeedbackSignal s;
    s.channel = learning::Channel::PassiveDecay;
    s.memory_id = id;
    s.query = query;
    s.polarity = learning::polarity(s.channel);
    s.timestamp = clock_->now();
    s.categories = traits_->get(id).categories;
    learning_->record(s);
    bus_->publish(events::EventType::FeedbackRecorded, std::nullopt,
                  {{"id", to_u64(id)}, {"channel", learning::to_string(s.channel)}});
  }
  return result;
}

void Engine::record_feedback(learning::Channel channel, MemoryId id, std::string_view query,
                             const std::optional<AgentContext>& agent) {
  if (channel == learning::Channel::PassiveDecay) {
    throw Error(ErrorCode::InvalidArgument, "passive_decay signals are generated internally");
  }
  if (!store_->find(id)) throw Error(ErrorCode::NotFound, "memory " + to_string(id));
  if (agent) ensure_agent(*agent);

  learning::FeedbackSignal s;
  s.channel = channel;
  s.memory_id = id;
  s.query = learning::normalize_query(query);
  s.polarity = learning::polarity(channel);
  s.timestamp = clock_->now();
  s.categories = traits_->get(id).categories;
  const auto categories = s.categories;
  learning_->record(std::move(s));
  for (const auto c : categories) {
    learning_->observe_pattern(patterns::PatternKind::Preference, c, true);
  }
  if (auto label = primary_label(categories)) learning_->record_activity({clock_->now(), *label});

  std::optional<std::string> who;
  if (agent) who = agent->agent_id;
  bus_->publish(events::EventType::FeedbackRecorded, who,
                {{"id", to_u64(id)}, {"channel", learning::to_string(channel)}, {"query", query}});
}

ranking::TrainingSet Engine::bootstrap_synthetic() const {
  auto records = store_->live_records();
  if (records.size() < kMinCorpus) {
    throw Error(ErrorCode::InsufficientCorpus,
                std::to_string(records.size()) + " live memories, need " + std::to_string(kMinCorpus));
  }
  std::sort(records.begin(), records.end(),
            [](const MemoryRecord& a, const MemoryRecord& b) { return a.id < b.id; });

  // Seeds spread evenly over the corpus. The first pass pairs each record's top key
  // terms; later passes fall back to single key terms, since a small corpus may not
  // yield enough distinct multi-candidate pair queries.
  std::vector<std::size_t> order;
  const std::size_t stride = std::max<std::size_t>(1, records.size() / kSyntheticQueries);
  for (std::size_t i = 0; i < records.size(); i += stride) order.push_back(i);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i % stride != 0) order.push_back(i);
  }

  struct Seed {
    std::string query;
    std::vector<std::string> terms;
    std::set<patterns::Category> categories;
  };
  std::vector<Seed> seeds;
  {
    std::set<std::string> seen;
    std::vector<std::vector<graph::KeyTerm>> key;
    {
      auto view = index_->read();
      key.reserve(records.size());
      for (const auto& r : records) key.push_back(graph::key_terms(r.content, view, kSyntheticTerms + 1));
    }
    const auto consider = [&](std::size_t i, std::vector<std::string> terms) {
      Seed s;
      for (const auto& t : terms) {
        if (!s.query.empty()) s.query += ' ';
        s.query += t;
      }
      if (!seen.insert(s.query).second) return;
      if (pipeline_->candidates(s.query, kTrainingPool).size() < 2) return;
      s.terms = std::move(terms);
      s.categories = traits_->get(records[i].id).categories;
      seeds.push_back(std::move(s));
    };
    for (const auto i : order) {
      if (seeds.size() >= kSyntheticQueries) break;
      const auto& terms = key[i];
      if (terms.empty()) continue;
      std::vector<std::string> pair;
      for (std::size_t t = 0; t < std::min(kSyntheticTerms, terms.size()); ++t) pair.push_back(terms[t].term);
      consider(i, std::move(pair));
    }
    for (std::size_t t = 0; t <= kSyntheticTerms; ++t) {
      for (const auto i : order) {
        if (seeds.size() >= kSyntheticQueries) break;
        if (t < key[i].size()) consider(i, {key[i][t].term});
      }
    }
  }

  ranking::TrainingSet data;
  data.synthetic = true;
  const auto ctx = pipeline_->ranking_context({});
  for (const auto& seed : seeds) {
    auto cands = pipeline_->candidates(seed.query, kTrainingPool);
    ranking::TrainingQuery q;
    q.query = seed.query;
    q.features = ranking::extract_features(cands, ctx);
    bool any = false;
    auto view = index_->read();
    for (const auto& c : cands) {
      int label = 0;
      if (!seed.categories.empty()) {
        label = ranking::synthetic_label(seed.categories, c.categories, c.importance);
      } else if (const auto* terms = view.term_counts(c.id)) {
        const bool all = std::all_of(seed.terms.begin(), seed.terms.end(), [&](const std::string& t) {
          return std::binary_search(terms->begin(), terms->end(), std::make_pair(t, 0u),
                                    [](const auto& a, const auto& b) { return a.first < b.first; });
        });
        if (all) label = metrics::relevance_from_importance(c.importance);
      }
      any = any || label > 0;
      q.labels.push_back(label);
    }
    if (any) data.queries.push_back(std::move(q));
  }
  if (data.queries.size() < kMinCorpus) {
    throw Error(ErrorCode::InsufficientCorpus,
                "only " + std::to_string(data.queries.size()) + " usable synthetic queries");
  }
  return data;
}

ranking::TrainingSet Engine::feedback_dataset() const {
  std::map<std::string, std::map<MemoryId, int>> counts;
  for (const auto& s : learning_->signals()) {
    if (s.channel == learning::Channel::PassiveDecay || s.query.empty()) continue;
    ++counts[s.query][s.memory_id];
  }
  ranking::TrainingSet data;
  data.signals = learning_->signal_count();
  const auto ctx = pipeline_->ranking_context({});
  for (const auto& [query, hits] : counts) {
    auto cands = pipeline_->candidates(query, kTrainingPool);
    if (cands.empty()) continue;
    ranking::TrainingQuery q;
    q.query = query;
    q.features = ranking::extract_features(cands, ctx);
    bool any = false;
    for (const auto& c : cands) {
      auto it = hits.find(c.id);
      const int label = it == hits.end() ? 0 : std::min(3, it->second);
      any = any || label > 0;
      q.labels.push_back(label);
    }
    if (any) data.queries.push_back(std::move(q));
  }
  return data;
}

TrainReport Engine::train(const ranking::TrainOptions& options) {
  const bool real = learning_->phase() >= 2;
  const auto data = real ? feedback_dataset() : bootstrap_synthetic();
  auto model = ranking::train_lambdarank(data, options, clock_->now());
  learning_->save_model(model.to_json().dump());
  return {model.metadata, model.trees.size()};
}

void Engine::reset_learning() { learning_->reset(); }

nlohmann::json Engine::patterns() const {
  nlohmann::json out = learning_->patterns().to_json();
  const auto prefs = learning::mine_tech_preferences(learning_->signals(), clock_->now());
  nlohmann::json weights = nlohmann::json::object();
  for (const auto c : patterns::kAllCategories) weights[std::string(patterns::to_string(c))] = prefs.weight(c);
  nlohmann::json flows = nlohmann::json::array();
  for (const auto& w : learning::mine_workflows(learning_->activity(), clock_->now())) {
    flows.push_back({{"sequence", w.sequence}, {"support", w.support}});
  }
  return {{"patterns", std::move(out)},
          {"preferences", std::move(weights)},
          {"workflows", std::move(flows)},
          {"phase", learning_->phase()},
          {"signals", learning_->signal_count()},
          {"unique_queries", learning_->unique_query_count()}};
}

trust::TrustState Engine::signal(const std::string& agent, trust::SignalKind kind) {
  return trust_->record_signal(agent, kind);
}

trust::TrustState Engine::flag(MemoryId id, const AgentContext& reporter) {
  ensure_agent(reporter);
  const auto record = store_->get(id);
  trust_->register_agent(record.provenance.created_by);
  return trust::flag_content(*store_, *trust_, id, reporter.agent_id);
}

std::optional<std::string> Engine::last_query_for(MemoryId id) {
  const auto recent = bus_->tail(events::kRingCapacity);
  for (auto it = recent.rbegin(); it != recent.rend(); ++it) {
    const auto& e = it->event;
    if (e.type != events::EventType::MemoryRecalled || !e.payload.is_object()) continue;
    if (e.payload.value("id", std::uint64_t{0}) != to_u64(id)) continue;
    if (auto q = e.payload.find("query"); q != e.payload.end() && q->is_string()) {
      return q->get<std::string>();
    }
  }
  return std::nullopt;
}

std::vector<MemoryId> Engine::isolate(const std::string& agent) const {
  return trust::isolate(*store_, agent);
}

nlohmann::json Engine::trust_json(const std::string& agent) const {
  if (!trust_->known(agent)) throw Error(ErrorCode::UnknownAgent, agent);
  return trust::to_json(trust_->state(agent), config_.trust.mode);
}

graph::GraphStats Engine::rebuild_graph() {
  auto snap = graph_->rebuild(store_->live_records(), clock_->now());
  const auto& st = snap->stats;
  bus_->publish(events::EventType::GraphUpdated, std::nullopt,
                {{"nodes", st.nodes},
                 {"edges", st.edges},
                 {"communities", st.communities_per_level},
                 {"build_ms", st.build_duration.count() / 1000.0}});
  return st;
}

nlohmann::json Engine::status() const {
  nlohmann::json graph = nullptr;
  if (auto snap = graph_->snapshot()) {
    graph = {{"nodes", snap->stats.nodes},
             {"edges", snap->stats.edges},
             {"communities", snap->stats.communities_per_level}};
  }
  return {{"memories", store_->live_count()},
          {"phase", learning_->phase()},
          {"signals", learning_->signal_count()},
          {"unique_queries", learning_->unique_query_count()},
          {"agents", registry_->list().size()},
          {"last_event_seq", bus_->last_seq()},
          {"graph", std::move(graph)},
          {"memory_db", store_->location().string()},
          {"coordination_db", coordination_->location().string()},
          {"learning_db", learning_->location().string()}};
}

void Engine::flush() {
  bus_->flush();
  learning_->flush();
}

}  // namespace agentmem
