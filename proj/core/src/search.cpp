#include "agentmem/search.hpp"

#include <algorithm>
#include <cctype>

namespace agentmem::search {

namespace {

constexpr auto kDerivedTtl = std::chrono::seconds(60);
constexpr std::size_t kRecentLabels = 4;

std::string cluster_project(std::uint32_t community) {
  return "cluster:" + std::to_string(community);
}

}  // namespace

MemoryTraits derive_traits(const MemoryRecord& record) {
  MemoryTraits t;
  t.categories = patterns::categorize(record.content, record.tags);
  for (const auto& tag : record.tags) {
    if (auto p = learning::project_from_tag(tag)) t.projects.insert(*p);
  }
  return t;
}

void TraitsTable::put(const MemoryRecord& record) {
  auto t = derive_traits(record);
  std::unique_lock lock(mu_);
  traits_[record.id] = std::move(t);
}

void TraitsTable::erase(MemoryId id) {
  std::unique_lock lock(mu_);
  traits_.erase(id);
}

void TraitsTable::clear() {
  std::unique_lock lock(mu_);
  traits_.clear();
}

MemoryTraits TraitsTable::get(MemoryId id) const {
  std::shared_lock lock(mu_);
  auto it = traits_.find(id);
  return it == traits_.end() ? MemoryTraits{} : it->second;
}

SearchPipeline::SearchPipeline(const MemoryStore& store, const text::InvertedIndex& index,
                               const TraitsTable& traits, const graph::KnowledgeGraph& graph,
                               const learning::LearningStore& learning,
                               std::shared_ptr<const Clock> clock)
    : store_(store),
      index_(index),
      traits_(traits),
      graph_(graph),
      learning_(learning),
      clock_(std::move(clock)) {}

void SearchPipeline::configure_stages(StageFlags flags) {
  std::lock_guard lock(mu_);
  flags_ = flags;
}

StageFlags SearchPipeline::stages() const {
  std::lock_guard lock(mu_);
  return flags_;
}

void SearchPipeline::set_ranker_config(ranking::RankerConfig config) {
  std::lock_guard lock(mu_);
  ranker_ = config;
}

std::shared_ptr<const SearchPipeline::Derived> SearchPipeline::derived() const {
  const std::uint64_t version = learning_.version();
  const Timestamp now = clock_->now();
  {
    std::lock_guard lock(mu_);
    if (derived_ && derived_->version == version && now - derived_->computed_at < kDerivedTtl &&
        now >= derived_->computed_at) {
      return derived_;
    }
  }
  auto d = std::make_shared<Derived>();
  d->version = version;
  d->computed_at = now;
  d->preferences = learning::mine_tech_preferences(learning_.signals(), now);
  auto activity = learning_.activity();
  d->workflows = learning::mine_workflows(activity, now);
  const std::size_t start = activity.size() > kRecentLabels ? activity.size() - kRecentLabels : 0;
  for (std::size_t i = start; i < activity.size(); ++i) d->recent_labels.push_back(activity[i].label);
  if (auto body = learning_.model()) {
    try {
      d->model = std::make_shared<const ranking::LearnedModel>(
          ranking::LearnedModel::from_json(nlohmann::json::parse(*body)));
    } catch (const std::exception&) {
      d->model = nullptr;  // unreadable model: phase 2 falls back to rule boosts
    }
  }
  std::lock_guard lock(mu_);
  derived_ = d;
  return d;
}

ranking::RankingContext SearchPipeline::ranking_context(
    const learning::ProjectContext& context) const {
  auto d = derived();
  ranking::RankingContext ctx;
  ctx.now = clock_->now();
  ctx.preferences = d->preferences;
  ctx.workflows = d->workflows;
  ctx.recent_labels = d->recent_labels;
  learning::ProjectContext pc = context;
  if (pc.cluster_hint && !pc.cluster_hint->empty() &&
      std::all_of(pc.cluster_hint->begin(), pc.cluster_hint->end(),
                  [](unsigned char c) { return std::isdigit(c); })) {
    pc.cluster_hint = cluster_project(static_cast<std::uint32_t>(std::stoul(*pc.cluster_hint)));
  }
  ctx.projects = learning::detect_project_context(pc);
  return ctx;
}

std::vector<ranking::Candidate> SearchPipeline::build_candidates(
    const std::vector<std::string>& tokens, std::size_t pool,
    std::vector<MemoryRecord>* records) const {
  const StageFlags flags = stages();
  std::shared_ptr<const graph::GraphSnapshot> snapshot = flags.graph ? graph_.snapshot() : nullptr;

  std::vector<ranking::Candidate> out;
  auto view = index_.read();
  const auto matches = view.match_tokens(tokens, pool);
  if (matches.empty()) return out;
  const text::TfIdfVector query_vec =
      flags.tfidf ? text::tfidf_vector(text::count_terms(tokens), view) : text::TfIdfVector{};

  double max_bm25 = 0.0;
  for (const auto& m : matches) max_bm25 = std::max(max_bm25, m.score);

  out.reserve(matches.size());
  for (const auto& m : matches) {
    auto record = store_.find(m.id);
    if (!record) continue;
    ranking::Candidate c;
    c.id = m.id;
    c.bm25 = m.score;
    if (flags.tfidf) {
      if (const auto* terms = view.term_counts(m.id)) {
        c.tfidf = text::cosine(query_vec, text::tfidf_vector(*terms, view));
      }
    }
    const double norm_bm25 = max_bm25 > 0.0 ? m.score / max_bm25 : 0.0;
    c.base_score = flags.tfidf ? kBm25Blend * norm_bm25 + (1.0 - kBm25Blend) * c.tfidf : norm_bm25;
    auto traits = traits_.get(m.id);
    c.categories = std::move(traits.categories);
    c.projects = std::move(traits.projects);
    if (snapshot) {
      if (auto community = snapshot->community_of(m.id)) c.projects.insert(cluster_project(*community));
    }
    c.trust_at_write = record->provenance.trust_at_write;
    c.importance = record->importance;
    c.created_at = record->created_at;
    c.accesses = learning_.access(m.id).accesses;
    out.push_back(std::move(c));
    if (records) records->push_back(std::move(*record));
  }

  std::vector<std::size_t> order(out.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&out](std::size_t a, std::size_t b) {
    const auto& x = out[a];
    const auto& y = out[b];
    if (x.base_score != y.base_score) return x.base_score > y.base_score;
    if (x.created_at != y.created_at) return x.created_at > y.created_at;
    return x.id > y.id;
  });
  std::vector<ranking::Candidate> sorted;
  std::vector<MemoryRecord> sorted_records;
  sorted.reserve(out.size());
  for (const auto i : order) {
    sorted.push_back(std::move(out[i]));
    if (records) sorted_records.push_back(std::move((*records)[i]));
  }
  if (records) *records = std::move(sorted_records);
  return sorted;
}

std::vector<ranking::Candidate> SearchPipeline::candidates(const std::string& query,
                                                           std::size_t pool) const {
  return build_candidates(text::tokenize(query), pool, nullptr);
}

SearchResult SearchPipeline::search(const SearchRequest& request) const {
  SearchResult result;
  if (request.limit == 0) return result;
  const auto tokens = text::tokenize(request.query);
  if (tokens.empty()) return result;

  std::vector<MemoryRecord> records;
  const auto cands = build_candidates(tokens, request.limit * kPoolFactor, &records);
  if (cands.empty()) return result;

  const StageFlags flags = stages();
  const int phase = flags.adaptive ? learning_.phase() : 0;
  result.phase = phase;

  std::vector<ranking::Ranked> order;
  if (phase == 0) {
    order.reserve(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) order.push_back({i, cands[i].base_score});
  } else {
    const auto ctx = ranking_context(request.context);
    std::shared_ptr<const ranking::LearnedModel> model = phase >= 2 ? derived()->model : nullptr;
    ranking::RankerConfig config;
    {
      std::lock_guard lock(mu_);
      config = ranker_;
    }
    order = ranking::rerank(cands, ctx, phase, model.get(), config);
  }

  const std::size_t n = std::min(request.limit, order.size());
  result.hits.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = order[r].index;
    result.hits.push_back(
        {std::move(records[i]), order[r].score, cands[i].bm25, cands[i].tfidf, cands[i].base_score});
  }
  return result;
}

}  // namespace agentmem::search
