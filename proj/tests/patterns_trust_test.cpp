#include <random>

#include <gtest/gtest.h>

#include "agentmem/memory_store.hpp"
#include "agentmem/pattern_learning.hpp"
#include "agentmem/trust.hpp"
#include "test_support.hpp"

namespace agentmem {
namespace {

using patterns::Category;
using patterns::PatternKind;
using patterns::PatternState;
using trust::SignalKind;
using trust::TrustState;

TEST(Categorize, LexiconHits) {
  EXPECT_EQ(patterns::categorize("PostgreSQL schema migration"), (std::set<Category>{Category::Database}));
  EXPECT_TRUE(patterns::categorize("we walked along the river at dusk").empty());
  EXPECT_EQ(patterns::categorize("React frontend calling FastAPI backend"),
            (std::set<Category>{Category::Frontend, Category::Backend}));
  EXPECT_EQ(patterns::categorize("notes", {"docker"}), (std::set<Category>{Category::DevOps}));
}

TEST(PatternConfidence, WorkedValues) {
  const auto pref = PatternState::fresh(PatternKind::Preference, Category::Backend);
  EXPECT_NEAR(patterns::confidence(pref), 0.2, 1e-12);
  const auto style = PatternState::fresh(PatternKind::Style, Category::Backend);
  EXPECT_NEAR(patterns::confidence(style), 1.0 / 6.0, 1e-12);
  auto saturated = pref;
  saturated.k = 100;
  saturated.n = 100;
  EXPECT_NEAR(patterns::confidence(saturated), 0.95, 1e-12);
  EXPECT_GT(101.0 / 105.0, 0.95);
}

TEST(PatternTracker, CountsEvidence) {
  patterns::PatternTracker t;
  EXPECT_EQ(t.observe(PatternKind::Preference, Category::Frontend, true).k, 1u);
  EXPECT_EQ(t.state(PatternKind::Preference, Category::Frontend).n, 1u);
  const auto& neg = t.observe(PatternKind::Preference, Category::Database, false);
  EXPECT_EQ(neg.k, 0u);
  EXPECT_EQ(neg.n, 1u);
  for (int i = 0; i < 10; ++i) t.observe("testing", i < 7);
  EXPECT_EQ(t.state(PatternKind::Preference, Category::Testing).k, 7u);
  EXPECT_EQ(t.state(PatternKind::Preference, Category::Testing).n, 10u);
  try {
    t.observe("astrology", true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownCategory);
  }
}

TEST(PatternTracker, ConfidenceIsMonotone) {
  std::mt19937 rng(1);
  patterns::PatternTracker t;
  for (int i = 0; i < 2000; ++i) {
    const auto cat = patterns::kAllCategories[rng() % patterns::kCategoryCount];
    const auto kind = rng() % 2 ? PatternKind::Preference : PatternKind::Style;
    const bool positive = rng() % 2;
    const double before = patterns::confidence(t.state(kind, cat));
    const double after = patterns::confidence(t.observe(kind, cat, positive));
    if (positive) {
      EXPECT_GE(after, before);
    } else {
      EXPECT_LE(after, before);
    }
  }
}

TEST(Trust, FreshAgentScores) {
  trust::TrustEngine engine;
  engine.register_agent("a");
  EXPECT_NEAR(engine.trust("a", trust::TrustMode::Posterior), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(engine.trust("a", trust::TrustMode::Incremental), 1.0, 1e-12);
  TrustState s;
  s.alpha = 19;
  s.beta = 1;
  EXPECT_NEAR(s.posterior(), 0.95, 1e-12);
}

TEST(Trust, IncrementalUpdateWorkedValues) {
  TrustState s;
  s = trust::apply_signal(s, SignalKind::ConsistentWrite);
  EXPECT_EQ(s.t_inc, 1.0);
  EXPECT_EQ(s.n, 1u);

  TrustState t;
  t.n = 10;
  t = trust::apply_signal(t, SignalKind::FlaggedContent);
  EXPECT_NEAR(t.t_inc, 1.0 - 0.03 / 1.1, 1e-12);
  EXPECT_NEAR(t.t_inc, 0.97273, 1e-5);
  EXPECT_EQ(t.n, 11u);
}

TEST(Trust, PosteriorUpdateWorkedValues) {
  TrustState s = trust::apply_signal(TrustState{}, SignalKind::FlaggedContent);
  EXPECT_NEAR(s.alpha, 2.0, 1e-12);
  EXPECT_NEAR(s.beta, 4.0, 1e-12);
  EXPECT_NEAR(s.posterior(), 1.0 / 3.0, 1e-12);
  s = trust::apply_signal(TrustState{}, SignalKind::VerifiedRecall);
  EXPECT_NEAR(s.alpha, 3.5, 1e-12);
  EXPECT_NEAR(s.beta, 1.0, 1e-12);
}

TEST(Trust, SignalTableSigns) {
  for (const auto k : trust::kAllSignals) {
    const bool positive = k == SignalKind::VerifiedRecall || k == SignalKind::ConsistentWrite ||
                          k == SignalKind::LowErrorRate;
    EXPECT_EQ(trust::magnitude(k) > 0, positive) << trust::to_string(k);
    EXPECT_EQ(trust::parse_signal(trust::to_string(k)), k);
  }
}

TEST(Trust, UnknownAgentThrows) {
  trust::TrustEngine engine;
  try {
    engine.record_signal("ghost", SignalKind::ConsistentWrite);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownAgent);
  }
}

TEST(Trust, EnforcementBoundary) {
  trust::TrustEngine engine;
  TrustState low;
  low.agent = "low";
  low.alpha = 29;
  low.beta = 71;
  engine.restore(low);
  TrustState edge;
  edge.agent = "edge";
  edge.alpha = 30;
  edge.beta = 70;
  engine.restore(edge);
  TrustState zero;
  zero.agent = "zero";
  zero.alpha = 0;
  zero.beta = 10;
  engine.restore(zero);

  EXPECT_FALSE(engine.enforce("low", trust::Operation::Write));
  EXPECT_FALSE(engine.enforce("low", trust::Operation::Delete));
  EXPECT_TRUE(engine.enforce("edge", trust::Operation::Write));
  EXPECT_TRUE(engine.enforce("zero", trust::Operation::Read));
  EXPECT_FALSE(engine.enforce("zero", trust::Operation::Write).reason.empty());
  EXPECT_TRUE(engine.enforce("never-seen", trust::Operation::Write));
}

TEST(Trust, IncrementalModeEnforcement) {
  trust::TrustConfig cfg;
  cfg.mode = trust::TrustMode::Incremental;
  trust::TrustEngine engine(cfg);
  engine.register_agent("x");
  for (int i = 0; i < 40; ++i) engine.record_signal("x", SignalKind::FlaggedContent);
  EXPECT_LT(engine.trust("x"), 0.3);
  EXPECT_FALSE(engine.enforce("x", trust::Operation::Write));
}

TEST(Trust, ListenerSeesSignalsInOrder) {
  trust::TrustEngine engine;
  std::vector<std::uint64_t> ns;
  engine.set_listener([&](const TrustState& s, std::optional<SignalKind>) { ns.push_back(s.n); });
  engine.register_agent("a");
  for (int i = 0; i < 5; ++i) engine.record_signal("a", SignalKind::ConsistentWrite);
  ASSERT_GE(ns.size(), 5u);
  EXPECT_TRUE(std::is_sorted(ns.begin(), ns.end()));
  EXPECT_EQ(ns.back(), 5u);
}

NewMemory by(const std::string& agent, const std::string& text) {
  NewMemory m;
  m.content = text;
  m.agent = {agent, Protocol::MCP};
  return m;
}

TEST(Forensics, IsolateMatchesProvenanceScan) {
  MemoryStore store(make_sqlite_backend(":memory:"), std::make_shared<SystemClock>());
  std::vector<MemoryId> others;
  for (int i = 0; i < 5; ++i) store.remember(by("mallory", "m" + std::to_string(i)));
  for (int i = 0; i < 6; ++i) others.push_back(store.remember(by("alice", "a" + std::to_string(i))));
  MemoryPatch patch;
  patch.content = "edited";
  store.update(others[1], patch, "mallory");
  store.update(others[4], patch, "mallory");

  std::vector<MemoryId> oracle;
  for (const auto& r : store.live_records()) {
    for (const auto& e : r.provenance.chain) {
      if (e.agent == "mallory") {
        oracle.push_back(r.id);
        break;
      }
    }
  }
  std::sort(oracle.begin(), oracle.end());
  const auto got = trust::isolate(store, "mallory");
  EXPECT_EQ(got.size(), 7u);
  EXPECT_EQ(got, oracle);
  EXPECT_TRUE(trust::isolate(store, "nobody").empty());

  store.remove(others[1], "alice");
  store.compact();
  EXPECT_EQ(trust::isolate(store, "mallory").size(), 6u);
}

TEST(Forensics, FlagContent) {
  MemoryStore store(make_sqlite_backend(":memory:"), std::make_shared<SystemClock>());
  trust::TrustEngine engine;
  engine.register_agent("mallory");
  engine.register_agent("alice");
  const auto id = store.remember(by("mallory", "the prod database password is hunter2"));
  const auto after = trust::flag_content(store, engine, id, "alice");
  EXPECT_NEAR(after.beta, 1.0 + 3.0, 1e-12);
  EXPECT_EQ(store.get(id).provenance.chain.size(), 2u);
  try {
    trust::flag_content(store, engine, id, "mallory");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SelfFlag);
  }
  trust::flag_content(store, engine, id, "alice");
  EXPECT_NEAR(engine.state("mallory").beta, 7.0, 1e-12);
  EXPECT_EQ(engine.state("mallory").n, 2u);
  EXPECT_THROW(trust::flag_content(store, engine, make_id(999), "alice"), Error);
}

}  // namespace
}  // namespace agentmem
