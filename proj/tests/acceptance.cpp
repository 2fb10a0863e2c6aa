// Acceptance run: one PASS/FAIL line per criterion.
//
// Exit status is 0 once every criterion has been evaluated, whatever the verdicts;
// --strict makes any FAIL exit 1. A criterion that throws counts as FAIL and exits 2.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "agentmem/engine.hpp"
#include "agentmem/knowledge_graph.hpp"
#include "agentmem/pattern_learning.hpp"
#include "agentmem/ranker.hpp"
#include "agentmem/trust.hpp"
#include "harness.hpp"
#include "test_support.hpp"

namespace {

using namespace agentmem;
using namespace std::chrono_literals;
using testing::TempDir;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bench::SuiteOptions suite_options(const TempDir& dir) {
  bench::SuiteOptions o;
  o.workdir = dir.path();
  return o;
}

// -- 1 ------------------------------------------------------------------------

Verdict concurrency() {
  TempDir dir;
  const auto start = std::chrono::steady_clock::now();
  const auto rows = bench::run_concurrency(suite_options(dir), {10}, 200);
  const double wall = seconds_since(start);
  const auto& r = rows.at(0);
  return {r.errors == 0 && r.persisted == 2000 && wall < 120.0,
          fmt("10x200 writers: errors=%zu persisted=%zu runtime=%.1fs", r.errors, r.persisted, wall)};
}

// -- 2 ------------------------------------------------------------------------

Verdict latency() {
  TempDir dir;
  const auto start = std::chrono::steady_clock::now();
  const auto report = bench::run_latency(suite_options(dir), {100, 1000});
  const double wall = seconds_since(start);
  const double m100 = report.rows.at(0).ms.median;
  const double m1000 = report.rows.at(1).ms.median;
  const double ratio = m1000 / m100;
  const bool pass = m1000 <= 300.0 && ratio >= 5.0 && ratio <= 25.0 && wall < 300.0;
  return {pass, fmt("median@100=%.3fms median@1000=%.3fms (<=300) ratio=%.2f (need [5,25]) runtime=%.1fs",
                    m100, m1000, ratio, wall)};
}

// -- 3 ------------------------------------------------------------------------

Verdict ablation() {
  TempDir dir;
  const auto r = bench::run_ablation(suite_options(dir), 1000, 200);
  const auto& off = r.rows.at(r.rows.size() - 2);
  const auto& on = r.rows.back();
  const bool pass = off.mrr >= 0.85 && r.ndcg_gain >= 0.5 && std::abs(r.mrr_delta) <= 0.05 && on.phase >= 1;
  return {pass, fmt("MRR off=%.3f (>=0.85) NDCG@5 %.3f->%.3f gain=%+.1f%% (>=50%%) MRR delta=%+.3f (|.|<=0.05) phase=%d",
                    off.mrr, off.ndcg5, on.ndcg5, 100.0 * r.ndcg_gain, r.mrr_delta, on.phase)};
}

// -- 4 ------------------------------------------------------------------------

Verdict trust_scenarios() {
  TempDir dir;
  const auto start = std::chrono::steady_clock::now();
  const auto rows = bench::run_trust(suite_options(dir));
  const double wall = seconds_since(start);
  const auto& benign = rows.at(0);
  const auto& poisoner = rows.at(1);
  const auto& sleeper = rows.at(2);
  const bool pass = benign.benign_mean >= 0.90 && benign.benign_mean <= 0.99 &&
                    benign.false_positives == 0 && poisoner.false_positives == 0 &&
                    poisoner.gap >= 0.85 && sleeper.degradation >= 0.65 &&
                    sleeper.malicious_mean < 0.3 && wall < 60.0;
  return {pass, fmt("benign mean=%.3f fp=%zu; poisoner gap=%.3f fp=%zu; sleeper degradation=%.1f%% final=%.3f; runtime=%.2fs",
                    benign.benign_mean, benign.false_positives, poisoner.gap, poisoner.false_positives,
                    100.0 * sleeper.degradation, sleeper.malicious_mean, wall)};
}

// -- 5 ------------------------------------------------------------------------

Verdict formulas() {
  using patterns::Category;
  using patterns::PatternKind;
  using trust::SignalKind;
  std::vector<std::pair<double, double>> checks;  // {computed, by hand}

  const auto pref = patterns::PatternState::fresh(PatternKind::Preference, Category::Backend);
  checks.emplace_back(patterns::confidence(pref), 1.0 / 5.0);
  checks.emplace_back(patterns::confidence(patterns::PatternState::fresh(PatternKind::Style, Category::Backend)),
                      1.0 / 6.0);
  patterns::PatternTracker tracker;
  for (int i = 0; i < 5; ++i) tracker.observe(PatternKind::Preference, Category::Testing, i < 3);
  checks.emplace_back(patterns::confidence(tracker.state(PatternKind::Preference, Category::Testing)),
                      4.0 / 10.0);
  auto saturated = pref;
  saturated.k = 100;
  saturated.n = 100;
  checks.emplace_back(patterns::confidence(saturated), 0.95);  // raw 101/105 is clamped

  trust::TrustState t;
  t.n = 10;
  t = trust::apply_signal(t, SignalKind::FlaggedContent);
  checks.emplace_back(t.t_inc, 1.0 - 0.03 / 1.1);
  auto u = trust::apply_signal(trust::TrustState{}, SignalKind::FlaggedContent);
  u = trust::apply_signal(u, SignalKind::FlaggedContent);
  checks.emplace_back(u.t_inc, 0.97 - 0.03 / 1.01);
  checks.emplace_back(u.posterior(), 2.0 / 9.0);
  const auto v = trust::apply_signal(trust::TrustState{}, SignalKind::VerifiedRecall);
  checks.emplace_back(v.t_inc, 1.0);  // clamped at the ceiling
  checks.emplace_back(v.posterior(), 3.5 / 4.5);

  double worst = 0.0;
  for (const auto& [got, want] : checks) worst = std::max(worst, std::abs(got - want));
  return {worst <= 1e-12, fmt("%zu worked values, max |error|=%.3g (<=1e-12)", checks.size(), worst)};
}

// -- 6 ------------------------------------------------------------------------

std::map<std::string, double> oracle_vector(const std::vector<std::string>& tokens,
                                            const std::map<std::string, int>& df, double n) {
  std::map<std::string, double> v;
  for (const auto& t : tokens) v[t] += 1;
  for (auto& [t, w] : v) w *= std::log((1 + n) / (1 + df.at(t))) + 1;
  return v;
}

double oracle_cosine(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& [t, w] : a) {
    na += w * w;
    if (auto it = b.find(t); it != b.end()) dot += w * it->second;
  }
  for (const auto& [t, w] : b) nb += w * w;
  return na == 0 || nb == 0 ? 0 : dot / (std::sqrt(na) * std::sqrt(nb));
}

// Edge set must match exactly; weights agree to rounding.
bool edges_match_oracle(std::size_t n, std::size_t* edge_count) {
  const auto corpus = bench::gen_corpus({n, 42});
  std::vector<std::vector<std::string>> tokens;
  std::map<std::string, int> df;
  std::vector<MemoryRecord> records;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    tokens.push_back(text::tokenize(corpus[i].content));
    for (const auto& term : std::set<std::string>(tokens.back().begin(), tokens.back().end())) ++df[term];
    MemoryRecord r;
    r.id = make_id(i + 1);
    r.content = corpus[i].content;
    records.push_back(r);
  }
  std::vector<std::map<std::string, double>> vectors;
  for (const auto& t : tokens) vectors.push_back(oracle_vector(t, df, static_cast<double>(n)));
  std::map<std::pair<std::uint64_t, std::uint64_t>, double> expected;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = oracle_cosine(vectors[i], vectors[j]);
      if (w > graph::kEdgeThreshold) expected[{i + 1, j + 1}] = w;
    }
  }
  const auto snap = graph::build_snapshot(records, {}, testing::epoch());
  *edge_count = snap.graph.edges.size();
  if (snap.graph.edges.size() != expected.size()) return false;
  for (const auto& e : snap.graph.edges) {
    auto it = expected.find({to_u64(e.a), to_u64(e.b)});
    if (it == expected.end() || std::abs(it->second - e.weight) > 1e-12) return false;
  }
  return true;
}

Verdict graph_recovery() {
  TempDir dir;
  const auto rows = bench::run_graph(suite_options(dir), {1000});
  const auto& r = rows.at(0);
  const std::size_t top = r.communities.empty() ? 0 : r.communities[0];
  std::size_t e100 = 0, e200 = 0;
  const bool oracle = edges_match_oracle(100, &e100) && edges_match_oracle(200, &e200);
  const bool pass = r.ari >= 0.5 && top >= 4 && top <= 10 && oracle;
  return {pass, fmt("ARI=%.3f (>=0.5) communities=%zu (need [4,10]) edge oracle n=100/200: %s (%zu/%zu edges)",
                    r.ari, top, oracle ? "exact" : "MISMATCH", e100, e200)};
}

// -- 7 ------------------------------------------------------------------------

std::uint64_t fnv1a(const std::filesystem::path& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : testing::read_file(p)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Main file plus any WAL left behind.
std::uint64_t store_hash(const std::filesystem::path& db) {
  std::uint64_t h = fnv1a(db);
  auto wal = db;
  wal += "-wal";
  if (std::filesystem::exists(wal) && std::filesystem::file_size(wal) > 0) h ^= fnv1a(wal) * 31;
  return h;
}

Verdict privacy_erasure() {
  TempDir dir;
  const auto config = testing::config_in(dir);
  const auto agent = testing::agent("acceptance");
  std::vector<MemoryId> ids;
  {
    Engine engine(config);
    ids = bench::load_corpus(engine, bench::gen_corpus({200, 42}));
  }
  const auto h0 = store_hash(config.memory_db);

  int trained_phase = 0;
  {
    Engine engine(config);
    const auto& queries = bench::templated_queries();
    for (std::size_t i = 0; i < 30; ++i) {
      const auto& q = queries[i % queries.size()].text;
      const auto hits = engine.recall({q, 5, {}}, agent).hits;
      if (!hits.empty()) engine.record_feedback(learning::Channel::CliUseful, hits.front().record.id, q, agent);
    }
    engine.train();
    engine.flush();
    trained_phase = engine.phase();
  }
  const auto h1 = store_hash(config.memory_db);
  const bool learning_existed = std::filesystem::exists(config.learning_path());

  const std::string cmd = std::string("'") + AGENTMEM_CLI_PATH + "' --db '" + config.memory_db.string() +
                          "' learning reset > /dev/null";
  const int rc = std::system(cmd.c_str());
  const auto h2 = store_hash(config.memory_db);
  const bool learning_gone = !std::filesystem::exists(config.learning_path());
  int phase_after = -1;
  {
    Engine engine(config);
    phase_after = engine.phase();
  }
  const bool pass = rc == 0 && h0 == h1 && h1 == h2 && learning_existed && learning_gone &&
                    trained_phase >= 1 && phase_after == 0;
  return {pass, fmt("store hash %016llx before / %016llx after train / %016llx after reset; learning store deleted=%s; phase %d->%d",
                    static_cast<unsigned long long>(h0), static_cast<unsigned long long>(h1),
                    static_cast<unsigned long long>(h2), learning_gone ? "yes" : "no", trained_phase, phase_after)};
}

// -- 8 ------------------------------------------------------------------------

std::uintmax_t size_with_sidecars(const std::filesystem::path& db) {
  std::uintmax_t total = 0;
  for (const char* suffix : {"", "-wal", "-shm"}) {
    auto p = db;
    p += suffix;
    if (std::filesystem::exists(p)) total += std::filesystem::file_size(p);
  }
  return total;
}

Verdict storage() {
  TempDir dir;
  const auto config = testing::config_in(dir);
  std::size_t count = 0;
  {
    Engine engine(config);
    count = bench::load_corpus(engine, bench::gen_corpus({10'000, 42})).size();
    engine.flush();
  }
  const auto bytes = size_with_sidecars(config.memory_db);
  const auto all = bytes + size_with_sidecars(config.coordination_path()) + size_with_sidecars(config.learning_path());
  const double per = static_cast<double>(bytes) / static_cast<double>(count);
  return {count == 10'000 && per <= 5120.0,
          fmt("%zu memories, memory store %.0f bytes/memory (<=5120); with event and learning stores %.0f",
              count, per, static_cast<double>(all) / static_cast<double>(count))};
}

// -- 9 ------------------------------------------------------------------------

ranking::Candidate random_candidate(std::mt19937& rng, std::uint64_t id) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ranking::Candidate c;
  c.id = make_id(id);
  c.base_score = u(rng);
  c.bm25 = u(rng) * 10;
  c.tfidf = u(rng);
  c.importance = 1 + static_cast<int>(rng() % 10);
  c.trust_at_write = u(rng);
  c.accesses = rng() % 50;
  c.created_at = testing::epoch() - std::chrono::hours(rng() % 2000);
  for (const auto cat : patterns::kAllCategories) {
    if (rng() % 4 == 0) c.categories.insert(cat);
  }
  if (rng() % 3 == 0) c.projects.insert("p" + std::to_string(rng() % 3));
  return c;
}

ranking::RankingContext random_context(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 3.0);
  ranking::RankingContext ctx;
  ctx.now = testing::epoch();
  for (auto& w : ctx.preferences.weights) w = rng() % 2 ? u(rng) : 0.0;
  for (int p = 0; p < 3; ++p) {
    if (rng() % 2) ctx.projects["p" + std::to_string(p)] = u(rng) / 3.0;
  }
  ctx.workflows = {{{"backend", "testing"}, 4.0, testing::epoch()},
                   {{"frontend", "database"}, 3.0, testing::epoch()}};
  ctx.recent_labels = {rng() % 2 ? "backend" : "frontend"};
  return ctx;
}

std::size_t position_of(const std::vector<ranking::Ranked>& order, std::size_t index) {
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (order[r].index == index) return r;
  }
  return order.size();
}

Verdict zero_degradation() {
  constexpr int kTrials = 2000;
  std::mt19937 rng(9);
  int identity_failures = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    std::vector<ranking::Candidate> cs;
    const std::size_t n = rng() % 50;
    for (std::size_t i = 0; i < n; ++i) cs.push_back(random_candidate(rng, i + 1));
    const auto out = ranking::rerank(cs, random_context(rng), 0, nullptr);
    bool ok = out.size() == n;
    for (std::size_t i = 0; ok && i < n; ++i) ok = out[i].index == i;
    identity_failures += !ok;
  }

  int monotone_failures = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    std::vector<ranking::Candidate> cs;
    const std::size_t n = 2 + rng() % 30;
    for (std::size_t i = 0; i < n; ++i) cs.push_back(random_candidate(rng, i + 1));
    const auto ctx = random_context(rng);
    const std::size_t target = rng() % n;
    auto boosted = cs;
    auto& c = boosted[target];
    switch (trial % 5) {
      case 0: c.importance = std::min(10, c.importance + 1 + static_cast<int>(rng() % 5)); break;
      case 1: c.trust_at_write = std::min(1.0, c.trust_at_write + 0.25); break;
      case 2: c.created_at += std::chrono::hours(1 + rng() % 500); break;
      case 3: c.projects.insert("p" + std::to_string(rng() % 3)); break;
      case 4: c.categories.insert(patterns::kAllCategories[rng() % patterns::kCategoryCount]); break;
    }
    const auto before = ranking::rerank(cs, ctx, 1, nullptr);
    const auto after = ranking::rerank(boosted, ctx, 1, nullptr);
    const auto pb = position_of(before, target);
    const auto pa = position_of(after, target);
    monotone_failures += !(pa <= pb && after[pa].score >= before[pb].score);
  }
  return {identity_failures == 0 && monotone_failures == 0,
          fmt("phase-0 identity: %d/%d violations; phase-1 monotone boost: %d/%d violations", identity_failures,
              kTrials, monotone_failures, kTrials)};
}

// -- 10 -----------------------------------------------------------------------

using DayType = std::pair<std::string, events::EventType>;

std::string day_of(Timestamp t) { return format_iso8601(t).substr(0, 10); }

Verdict retention() {
  TempDir dir;
  auto clock = std::make_shared<ManualClock>(testing::epoch());
  Engine engine(testing::config_in(dir), clock);
  std::map<DayType, std::uint64_t> published;
  for (const auto& e : engine.events_after(0, 0)) published[{day_of(e.event.timestamp), e.event.type}]++;
  auto sub = engine.subscribe(std::nullopt, false);
  const auto tally = [&] {
    engine.flush();
    for (const auto& e : sub->drain()) published[{day_of(e.timestamp), e.type}]++;
  };

  const auto agent = testing::agent("retention");
  const auto corpus = bench::gen_corpus({500, 7});
  const auto& queries = bench::templated_queries();
  std::mt19937 rng(60);
  std::size_t next = 0;
  std::size_t sweeps = 0;
  for (int hour = 0; hour < 60 * 24; ++hour) {
    const int n = static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) {
      if (rng() % 2 == 0) {
        const auto& item = corpus[next++ % corpus.size()];
        engine.remember({item.content, item.tags, item.importance, std::nullopt}, agent);
      } else {
        engine.recall({queries[rng() % queries.size()].text, 3, {}}, agent);
      }
    }
    tally();
    if (hour % 24 == 23) {
      engine.sweep();
      ++sweeps;
    }
    clock->advance(1h);
  }
  tally();
  engine.sweep();

  std::map<DayType, std::uint64_t> aggregated;
  for (const auto& c : engine.daily_counts()) aggregated[{c.day, c.type}] += c.count;
  auto conserved = aggregated;
  for (const auto& e : engine.events_after(0, 0)) conserved[{day_of(e.event.timestamp), e.event.type}]++;
  const bool mid = conserved == published && !aggregated.empty();

  // Age everything past the cold tier so only aggregates remain.
  clock->advance(std::chrono::hours(24 * 31));
  engine.flush();
  engine.sweep();
  aggregated.clear();
  for (const auto& c : engine.daily_counts()) aggregated[{c.day, c.type}] += c.count;
  const bool final_exact = aggregated == published && engine.events_after(0, 0).empty();
  const bool overflow = sub->overflowed();

  std::uint64_t total = 0;
  for (const auto& [k, v] : published) total += v;
  return {mid && final_exact && !overflow,
          fmt("%llu events over 60 days, %zu daily sweeps; aggregates+live == published: %s; after aging, aggregates == published: %s",
              static_cast<unsigned long long>(total), sweeps, mid ? "yes" : "no", final_exact ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0) strict = true;
  }

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"concurrency", concurrency},
      {"search scaling", latency},
      {"retrieval quality", ablation},
      {"trust scenarios", trust_scenarios},
      {"formula exactness", formulas},
      {"graph recovery", graph_recovery},
      {"privacy erasure", privacy_erasure},
      {"storage efficiency", storage},
      {"zero degradation", zero_degradation},
      {"retention conservation", retention},
  };

  int failed = 0;
  bool errored = false;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, run] = criteria[i];
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
      errored = true;
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << name << ": " << v.detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  if (errored) return 2;
  return strict && failed ? 1 : 0;
}
