#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <map>
#include <random>
#include <thread>

#include <unistd.h>

#include "harness.hpp"
#include "agentmem/metrics.hpp"

namespace agentmem::bench {

namespace {

using Stopwatch = std::chrono::steady_clock;

double elapsed_ms(Stopwatch::time_point start) {
  return std::chrono::duration<double, std::milli>(Stopwatch::now() - start).count();
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::filesystem::path& parent) {
    const auto base = parent.empty() ? std::filesystem::temp_directory_path() : parent;
    std::filesystem::create_directories(base);
    std::string tmpl = (base / "agentmem-bench-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw Error(ErrorCode::IoFailure, "mkdtemp failed under " + base.string());
    path_ = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

Config scratch_config(const std::filesystem::path& dir) {
  Config c;
  c.memory_db = dir / "memories.db";
  return c;
}

const AgentContext kBenchAgent{"bench", Protocol::CLI};

}  // namespace

std::vector<MemoryId> load_corpus(Engine& engine, const std::vector<CorpusItem>& corpus) {
  std::vector<RememberRequest> requests;
  requests.reserve(corpus.size());
  for (const auto& item : corpus) requests.push_back({item.content, item.tags, item.importance, std::nullopt});
  return engine.remember_many(requests, kBenchAgent);
}

// -- latency -----------------------------------------------------------------

LatencyReport run_latency(const SuiteOptions& options, const std::vector<std::size_t>& sizes) {
  LatencyReport report;
  const auto& queries = templated_queries();
  for (const auto size : sizes) {
    ScratchDir dir(options.workdir);
    Engine engine(scratch_config(dir.path()));
    load_corpus(engine, gen_corpus({size, options.seed}));
    engine.flush();

    for (std::size_t i = 0; i < options.warmup; ++i) {
      engine.recall({queries[i % queries.size()].text, 10, {}}, kBenchAgent);
    }
    std::vector<double> samples;
    samples.reserve(options.runs);
    for (std::size_t i = 0; i < options.runs; ++i) {
      const search::SearchRequest request{queries[i % queries.size()].text, 10, {}};
      const auto start = Stopwatch::now();
      const auto result = engine.recall(request, kBenchAgent);
      samples.push_back(elapsed_ms(start));
      if (result.hits.empty()) throw Error(ErrorCode::InvalidArgument, "latency query returned nothing");
    }
    report.rows.push_back({size, summarize(std::move(samples))});
  }
  if (report.rows.size() >= 2 && report.rows.front().ms.median > 0.0) {
    report.ratio = report.rows.back().ms.median / report.rows.front().ms.median;
  }
  return report;
}

// -- concurrency -------------------------------------------------------------

std::vector<ConcurrencyRow> run_concurrency(const SuiteOptions& options,
                                            const std::vector<std::size_t>& writers,
                                            std::size_t ops_per_writer) {
  std::vector<ConcurrencyRow> rows;
  for (const auto w : writers) {
    ScratchDir dir(options.workdir);
    const auto config = scratch_config(dir.path());
    const auto corpus = gen_corpus({std::max<std::size_t>(w * ops_per_writer, kTopicCount), options.seed});
    ConcurrencyRow row;
    row.writers = w;
    row.ops_per_writer = ops_per_writer;
    std::vector<std::vector<double>> latencies(w);
    std::atomic<std::size_t> errors{0};
    {
      Engine engine(config);
      const auto start = Stopwatch::now();
      std::vector<std::thread> threads;
      for (std::size_t t = 0; t < w; ++t) {
        threads.emplace_back([&, t] {
          const AgentContext agent{"writer-" + std::to_string(t), Protocol::MCP};
          latencies[t].reserve(ops_per_writer);
          for (std::size_t i = 0; i < ops_per_writer; ++i) {
            const auto& item = corpus[t * ops_per_writer + i];
            const auto op_start = Stopwatch::now();
            try {
              engine.remember({item.content, item.tags, item.importance, std::nullopt}, agent);
            } catch (const std::exception&) {
              errors.fetch_add(1);
            }
            latencies[t].push_back(elapsed_ms(op_start));
          }
        });
      }
      for (auto& th : threads) th.join();
      row.seconds = elapsed_ms(start) / 1000.0;
    }
    // Count what actually reached the file, through a fresh connection.
    {
      MemoryStore reopened(make_sqlite_backend(config.memory_db), std::make_shared<SystemClock>());
      row.persisted = reopened.live_count();
    }
    row.errors = errors.load();
    row.writes_per_sec = row.seconds > 0.0 ? static_cast<double>(w * ops_per_writer) / row.seconds : 0.0;
    std::vector<double> all;
    for (auto& l : latencies) all.insert(all.end(), l.begin(), l.end());
    const auto s = summarize(std::move(all));
    row.median_ms = s.median;
    row.p95_ms = s.p95;
    rows.push_back(row);
  }
  return rows;
}

// -- graph -------------------------------------------------------------------

std::vector<GraphRow> run_graph(const SuiteOptions& options, std::vector<std::size_t> sizes) {
  if (options.large && std::find(sizes.begin(), sizes.end(), 5000) == sizes.end()) sizes.push_back(5000);
  std::vector<GraphRow> rows;
  for (const auto size : sizes) {
    ScratchDir dir(options.workdir);
    auto config = scratch_config(dir.path());
    config.graph.leiden.seed = options.seed;
    Engine engine(config);
    const auto corpus = gen_corpus({size, options.seed});
    const auto ids = load_corpus(engine, corpus);
    const auto stats = engine.rebuild_graph();
    const auto snap = engine.graph_snapshot();

    GraphRow row;
    row.size = size;
    row.edges = stats.edges;
    row.communities = stats.communities_per_level;
    row.build_ms = static_cast<double>(stats.build_duration.count()) / 1000.0;
    if (!snap->partition.modularity.empty()) row.modularity = snap->partition.modularity.front();
    std::vector<std::uint32_t> found, truth;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      found.push_back(snap->community_of(ids[i]).value_or(~0u));
      truth.push_back(static_cast<std::uint32_t>(corpus[i].topic));
    }
    row.ari = adjusted_rand_index(found, truth);
    rows.push_back(std::move(row));
  }
  return rows;
}

// -- ablation ----------------------------------------------------------------

namespace {

struct Judgments {
  std::map<MemoryId, Topic> topic;
  std::map<MemoryId, int> importance;
  std::array<std::size_t, kTopicCount> topic_sizes{};
};

AblationRow evaluate(Engine& engine, const Judgments& j, std::string name, search::StageFlags flags) {
  engine.configure_stages(flags);
  const auto& queries = templated_queries();
  std::vector<std::vector<bool>> relevant;
  std::vector<std::vector<int>> ranked, judged;
  std::vector<double> recalls, latencies;
  int phase = 0;
  for (const auto& q : queries) {
    const auto start = Stopwatch::now();
    const auto result = engine.pipeline().search({q.text, 10, {}});
    latencies.push_back(elapsed_ms(start));
    phase = result.phase;
    std::vector<bool> rel;
    std::vector<int> labels;
    for (const auto& hit : result.hits) {
      const Topic t = j.topic.at(hit.record.id);
      rel.push_back(t == q.topic);
      labels.push_back(graded_relevance(q.topic, t, hit.record.importance));
    }
    std::vector<int> all;
    for (const auto& [id, t] : j.topic) all.push_back(graded_relevance(q.topic, t, j.importance.at(id)));
    recalls.push_back(metrics::recall_at(5, rel, j.topic_sizes[static_cast<std::size_t>(q.topic)]));
    relevant.push_back(std::move(rel));
    ranked.push_back(std::move(labels));
    judged.push_back(std::move(all));
  }
  AblationRow row;
  row.config = std::move(name);
  row.flags = flags;
  row.phase = phase;
  row.mrr = metrics::mrr(relevant);
  row.ndcg5 = metrics::mean_ndcg_at(5, ranked, judged);
  row.ndcg10 = metrics::mean_ndcg_at(10, ranked, judged);
  double sum = 0.0;
  for (const double r : recalls) sum += r;
  row.recall5 = sum / static_cast<double>(recalls.size());
  row.latency_ms = summarize(latencies).median;
  return row;
}

}  // namespace

AblationReport run_ablation(const SuiteOptions& options, std::size_t corpus_size, std::size_t signals) {
  ScratchDir dir(options.workdir);
  auto config = scratch_config(dir.path());
  config.graph.leiden.seed = options.seed;
  Engine engine(config);
  const auto corpus = gen_corpus({corpus_size, options.seed});
  const auto ids = load_corpus(engine, corpus);
  engine.rebuild_graph();

  Judgments j;
  std::array<std::vector<MemoryId>, kTopicCount> by_topic;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    j.topic[ids[i]] = corpus[i].topic;
    j.importance[ids[i]] = corpus[i].importance;
    ++j.topic_sizes[static_cast<std::size_t>(corpus[i].topic)];
    by_topic[static_cast<std::size_t>(corpus[i].topic)].push_back(ids[i]);
  }

  AblationReport report;
  report.rows.push_back(evaluate(engine, j, "BM25 only", {false, false, false}));
  report.rows.push_back(evaluate(engine, j, "+ TF-IDF blend", {true, false, false}));
  report.rows.push_back(evaluate(engine, j, "+ graph clusters", {true, true, false}));
  const AblationRow baseline = report.rows.back();

  // Simulated consumption: each signal goes to a memory of the query's topic, drawn
  // with probability proportional to its graded gain.
  std::mt19937_64 rng(options.seed);
  const auto& queries = templated_queries();
  for (std::size_t s = 0; s < signals; ++s) {
    const auto& q = queries[s % queries.size()];
    const auto& pool = by_topic[static_cast<std::size_t>(q.topic)];
    std::vector<double> weights;
    weights.reserve(pool.size());
    for (const auto id : pool) {
      weights.push_back(std::exp2(graded_relevance(q.topic, q.topic, j.importance.at(id))) - 1.0);
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    engine.record_feedback(learning::Channel::ToolUsed, pool[pick(rng)], q.text,
                           AgentContext{"bench", Protocol::MCP});
  }
  engine.flush();
  report.signals = engine.learning_store().signal_count();
  report.rows.push_back(evaluate(engine, j, "+ adaptive ranker", {true, true, true}));

  const auto& adaptive = report.rows.back();
  report.ndcg_gain = baseline.ndcg5 > 0.0 ? (adaptive.ndcg5 - baseline.ndcg5) / baseline.ndcg5 : 0.0;
  report.mrr_delta = adaptive.mrr - baseline.mrr;
  return report;
}

// -- trust -------------------------------------------------------------------

namespace {

enum class Behaviour { Benign, Poisoner, Sleeper };

struct SimAgent {
  std::string id;
  Behaviour behaviour;
  double peak = 0.0;
};

void benign_op(trust::TrustEngine& engine, const std::string& id, const TrustEmission& e,
               std::mt19937_64& rng) {
  std::bernoulli_distribution verified(e.p_verified_recall), alarm(e.p_false_alarm);
  engine.record_signal(id, trust::SignalKind::ConsistentWrite);
  if (verified(rng)) engine.record_signal(id, trust::SignalKind::VerifiedRecall);
  if (alarm(rng)) engine.record_signal(id, trust::SignalKind::ContradictoryWrite);
}

void poison_op(trust::TrustEngine& engine, const std::string& id, const TrustEmission& e,
               std::mt19937_64& rng) {
  std::bernoulli_distribution flagged(e.p_flagged);
  engine.record_signal(id, trust::SignalKind::ContradictoryWrite);
  if (flagged(rng)) engine.record_signal(id, trust::SignalKind::FlaggedContent);
}

TrustScenarioRow simulate(std::string name, std::vector<SimAgent> agents, const TrustEmission& e,
                          std::size_t ops, std::mt19937_64& rng) {
  trust::TrustEngine engine;
  for (const auto& a : agents) engine.register_agent(a.id);
  const std::size_t switch_at = ops / 2;
  for (std::size_t op = 0; op < ops; ++op) {
    for (auto& a : agents) {
      const bool poisoning = a.behaviour == Behaviour::Poisoner ||
                             (a.behaviour == Behaviour::Sleeper && op >= switch_at);
      if (poisoning) {
        poison_op(engine, a.id, e, rng);
      } else {
        benign_op(engine, a.id, e, rng);
      }
      if (a.behaviour == Behaviour::Sleeper && op < switch_at) {
        a.peak = std::max(a.peak, engine.trust(a.id));
      }
    }
  }
  TrustScenarioRow row;
  row.scenario = std::move(name);
  const double threshold = engine.config().threshold;
  double benign_sum = 0.0, malicious_sum = 0.0, peak_sum = 0.0, degradation_sum = 0.0;
  row.benign_min = 1.0;
  for (const auto& a : agents) {
    const double t = engine.trust(a.id);
    if (a.behaviour == Behaviour::Benign) {
      ++row.benign_agents;
      benign_sum += t;
      row.benign_min = std::min(row.benign_min, t);
      if (t < threshold) ++row.false_positives;
    } else {
      ++row.malicious_agents;
      malicious_sum += t;
      if (a.behaviour == Behaviour::Sleeper) {
        peak_sum += a.peak;
        degradation_sum += a.peak > 0.0 ? (a.peak - t) / a.peak : 0.0;
      }
    }
  }
  if (row.benign_agents) row.benign_mean = benign_sum / static_cast<double>(row.benign_agents);
  if (!row.benign_agents) row.benign_min = 0.0;
  if (row.malicious_agents) row.malicious_mean = malicious_sum / static_cast<double>(row.malicious_agents);
  if (peak_sum > 0.0) {
    row.peak = peak_sum / static_cast<double>(row.malicious_agents);
    row.degradation = degradation_sum / static_cast<double>(row.malicious_agents);
    row.gap = row.peak - row.malicious_mean;
  } else if (row.malicious_agents && row.benign_agents) {
    row.gap = row.benign_mean - row.malicious_mean;
  }
  return row;
}

std::vector<SimAgent> make_agents(std::size_t benign, std::size_t malicious, Behaviour kind) {
  std::vector<SimAgent> out;
  for (std::size_t i = 0; i < benign; ++i) out.push_back({"benign-" + std::to_string(i), Behaviour::Benign});
  for (std::size_t i = 0; i < malicious; ++i) out.push_back({"malicious-" + std::to_string(i), kind});
  return out;
}

}  // namespace

std::vector<TrustScenarioRow> run_trust(const SuiteOptions& options, const TrustEmission& emission,
                                        std::size_t ops) {
  std::mt19937_64 rng(options.seed);
  std::vector<TrustScenarioRow> rows;
  rows.push_back(simulate("benign baseline", make_agents(10, 0, Behaviour::Benign), emission, ops, rng));
  rows.push_back(simulate("single poisoner", make_agents(9, 1, Behaviour::Poisoner), emission, ops, rng));
  rows.push_back(simulate("sleeper", make_agents(0, 10, Behaviour::Sleeper), emission, ops, rng));
  return rows;
}

}  // namespace agentmem::bench
