#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "agentmem/knowledge_graph.hpp"
#include "agentmem/ranker.hpp"
#include "agentmem/text_index.hpp"

#ifdef AGENTMEM_HAVE_HARNESS
#include "agentmem/engine.hpp"
#include "harness.hpp"
#endif

namespace {

using namespace agentmem;

// Small vocabulary with topic structure, so edges and communities exist.
std::vector<std::string> synthetic_docs(std::size_t n, std::uint64_t seed = 42) {
  static const std::vector<std::string> vocab = {
      "react",  "component", "hooks",   "state",   "css",     "model",    "train",  "tensor",
      "epoch",  "gradient",  "postgres", "index",  "schema",  "query",    "docker", "deploy",
      "kubernetes", "helm", "endpoint", "rest",    "graphql", "pagination", "auth", "token"};
  std::mt19937_64 rng(seed);
  std::vector<std::string> docs;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t topic = i % 6;
    std::string d;
    for (int k = 0; k < 12; ++k) {
      const std::size_t w = rng() % 5 == 0 ? rng() % vocab.size() : topic * 4 + rng() % 4;
      d += vocab[w] + " ";
    }
    docs.push_back(d);
  }
  return docs;
}

Timestamp t0() { return from_epoch_ms(1'767'225'600'000); }

void BM_Tokenize(benchmark::State& state) {
  const std::string text =
      "Refactored the Postgres schema migration; the btree index on (tenant_id, created_at) "
      "cut p95 query latency from 180ms to 12ms after VACUUM ANALYZE.";
  for (auto _ : state) benchmark::DoNotOptimize(text::tokenize(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Tokenize);

void BM_Bm25Match(benchmark::State& state) {
  text::InvertedIndex index;
  const auto docs = synthetic_docs(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < docs.size(); ++i) index.index(make_id(i + 1), docs[i], t0());
  for (auto _ : state) benchmark::DoNotOptimize(index.match("postgres index query tuning", 40));
}
BENCHMARK(BM_Bm25Match)->Arg(100)->Arg(1000)->Arg(10000);

void BM_TfIdfCosine(benchmark::State& state) {
  text::InvertedIndex index;
  const auto docs = synthetic_docs(1000);
  for (std::size_t i = 0; i < docs.size(); ++i) index.index(make_id(i + 1), docs[i], t0());
  auto view = index.read();
  const auto a = text::tfidf_vector(docs[0], view);
  const auto b = text::tfidf_vector(docs[6], view);
  for (auto _ : state) benchmark::DoNotOptimize(text::cosine(a, b));
}
BENCHMARK(BM_TfIdfCosine);

void BM_GraphSnapshot(benchmark::State& state) {
  const auto docs = synthetic_docs(static_cast<std::size_t>(state.range(0)));
  std::vector<MemoryRecord> records(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    records[i].id = make_id(i + 1);
    records[i].content = docs[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(graph::build_snapshot(records, {}, t0()));
}
BENCHMARK(BM_GraphSnapshot)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Leiden(benchmark::State& state) {
  const auto docs = synthetic_docs(static_cast<std::size_t>(state.range(0)));
  std::vector<MemoryRecord> records(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    records[i].id = make_id(i + 1);
    records[i].content = docs[i];
  }
  const auto weighted = graph::to_weighted(graph::build_snapshot(records, {}, t0()).graph);
  for (auto _ : state) benchmark::DoNotOptimize(graph::leiden(weighted, {}));
}
BENCHMARK(BM_Leiden)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_RerankPhase1(benchmark::State& state) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ranking::Candidate> cs(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < cs.size(); ++i) {
    cs[i].id = make_id(i + 1);
    cs[i].base_score = u(rng);
    cs[i].importance = 1 + static_cast<int>(rng() % 10);
    cs[i].trust_at_write = u(rng);
    cs[i].created_at = t0() - std::chrono::hours(rng() % 2000);
  }
  ranking::RankingContext ctx;
  ctx.now = t0();
  for (auto _ : state) benchmark::DoNotOptimize(ranking::rerank(cs, ctx, 1, nullptr));
}
BENCHMARK(BM_RerankPhase1)->Arg(40)->Arg(400);

#ifdef AGENTMEM_HAVE_HARNESS
void BM_RememberDurable(benchmark::State& state) {
  const auto dir = std::filesystem::temp_directory_path() / "agentmem-microbench";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  {
    Config config;
    config.memory_db = dir / "bench.db";
    Engine engine(config);
    const auto corpus = bench::gen_corpus({1000, 42});
    std::size_t i = 0;
    const AgentContext agent{"bench", Protocol::CLI};
    for (auto _ : state) {
      const auto& item = corpus[i++ % corpus.size()];
      engine.remember({item.content, item.tags, item.importance, std::nullopt}, agent);
    }
  }
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_RememberDurable)->Unit(benchmark::kMicrosecond);
#endif

}  // namespace

BENCHMARK_MAIN();
