#include <map>

#include <gtest/gtest.h>

#include "agentmem/learning.hpp"
#include "test_support.hpp"

namespace agentmem::learning {
namespace {

using patterns::Category;
using testing::TempDir;

FeedbackSignal sig(std::uint64_t id, std::string query, Channel ch = Channel::ToolUsed,
                   Timestamp ts = testing::epoch(), std::set<Category> cats = {}) {
  FeedbackSignal s;
  s.channel = ch;
  s.memory_id = make_id(id);
  s.query = std::move(query);
  s.polarity = polarity(ch);
  s.timestamp = ts;
  s.categories = std::move(cats);
  return s;
}

TEST(PhaseGate, Thresholds) {
  EXPECT_EQ(phase_for(19, 100), 0);
  EXPECT_EQ(phase_for(20, 1), 1);
  EXPECT_EQ(phase_for(150, 60), 1);
  EXPECT_EQ(phase_for(250, 49), 1);
  EXPECT_EQ(phase_for(200, 50), 2);
}

TEST(LearningStore, SignalsDrivePhaseAndDecayIsNotCounted) {
  LearningStore store(":memory:");
  store.record(sig(1, "q0"));
  EXPECT_EQ(store.signal_count(), 1u);
  for (int i = 1; i < 19; ++i) store.record(sig(1, "q" + std::to_string(i)));
  store.record(sig(2, "", Channel::PassiveDecay));
  EXPECT_EQ(store.signal_count(), 19u);
  EXPECT_EQ(store.phase(), 0);
  store.record(sig(1, "q19"));
  EXPECT_EQ(store.phase(), 1);
  EXPECT_EQ(store.unique_query_count(), 20u);
  EXPECT_EQ(store.signals().size(), 21u);
}

TEST(LearningStore, PassiveDecayAfterFiveUnconsumedExposures) {
  LearningStore store(":memory:");
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(store.note_exposures({make_id(7), make_id(8)}).empty());
  store.record(sig(8, "consumed"));  // consumption resets the counter for 8
  const auto decayed = store.note_exposures({make_id(7), make_id(8)});
  EXPECT_EQ(decayed, std::vector<MemoryId>{make_id(7)});
  EXPECT_EQ(store.access(make_id(7)).unconsumed, 0u);
  EXPECT_EQ(store.access(make_id(7)).accesses, 5u);
  EXPECT_EQ(store.access(make_id(8)).accesses, 6u);
}

TEST(LearningStore, PersistsAndResetDeletesFile) {
  TempDir dir;
  const auto path = dir / "learning.db";
  {
    LearningStore store(path);
    for (int i = 0; i < 25; ++i) store.record(sig(1, "q" + std::to_string(i)));
    store.observe_pattern(patterns::PatternKind::Preference, Category::Backend, true);
    store.record_activity({testing::epoch(), "backend"});
    store.save_model("{\"trees\":[]}");
    store.flush();
  }
  EXPECT_TRUE(std::filesystem::exists(path));
  LearningStore store(path);
  EXPECT_EQ(store.signal_count(), 25u);
  EXPECT_EQ(store.phase(), 1);
  EXPECT_EQ(store.patterns().state(patterns::PatternKind::Preference, Category::Backend).k, 1u);
  EXPECT_EQ(store.activity().size(), 1u);
  EXPECT_TRUE(store.model());

  const auto v = store.version();
  store.reset();
  EXPECT_FALSE(std::filesystem::exists(path));
  EXPECT_EQ(store.phase(), 0);
  EXPECT_EQ(store.signal_count(), 0u);
  EXPECT_FALSE(store.model());
  EXPECT_NE(store.version(), v);
}

TEST(NormalizeQuery, SortedLowercaseTokens) {
  EXPECT_EQ(normalize_query("Deploy the  Docker image"), "deploy docker image");
  EXPECT_EQ(normalize_query("image docker DEPLOY"), "deploy docker image");
  EXPECT_EQ(normalize_query("?!"), "");
}

TEST(Preferences, HalfLifeAndSums) {
  const auto now = testing::epoch() + std::chrono::hours(24 * 365);
  EXPECT_EQ(mine_tech_preferences({}, now).max_weight(), 0.0);
  auto p = mine_tech_preferences({sig(1, "q", Channel::ToolUsed, testing::epoch(), {Category::Database})}, now);
  EXPECT_NEAR(p.weight(Category::Database), 0.5, 1e-12);
  p = mine_tech_preferences({sig(1, "q", Channel::ToolUsed, now, {Category::MlAi}),
                             sig(2, "r", Channel::CliUseful, now, {Category::MlAi}),
                             sig(3, "s", Channel::PassiveDecay, now, {Category::MlAi})},
                            now);
  EXPECT_NEAR(p.weight(Category::MlAi), 2.0, 1e-12);
  EXPECT_EQ(p.top_categories(), std::set<Category>{Category::MlAi});
}

TEST(ProjectContext, VoteArithmetic) {
  EXPECT_TRUE(detect_project_context({}).empty());
  ProjectContext label_only;
  label_only.explicit_label = "atlas";
  EXPECT_EQ(detect_project_context(label_only), (std::map<std::string, double>{{"atlas", 1.0}}));

  ProjectContext conflict;
  conflict.explicit_label = "atlas";
  conflict.recent_tags = {"project:hermes", "unrelated"};
  conflict.active_paths = {"/home/dev/hermes/src/main.rs", "~/atlas/README.md"};
  const auto votes = detect_project_context(conflict);
  // atlas: 0.4 + 0.25/2; hermes: 0.2 + 0.25/2
  EXPECT_NEAR(votes.at("atlas"), 1.0, 1e-12);
  EXPECT_NEAR(votes.at("hermes"), (0.2 + 0.125) / (0.4 + 0.125), 1e-12);
}

TEST(ProjectContext, PathRule) {
  EXPECT_EQ(project_from_path("/home/alice/orion/src/a.cpp"), "orion");
  EXPECT_EQ(project_from_path("~/orion/x"), "orion");
  EXPECT_EQ(project_from_path("orion/x"), "orion");
  EXPECT_EQ(project_from_path("README.md"), std::nullopt);
  EXPECT_EQ(project_from_tag("project:orion"), "orion");
  EXPECT_EQ(project_from_tag("orion"), std::nullopt);
}

// Oracle: every contiguous run of length 2..5 inside the window, support weighted by recency.
std::map<std::vector<std::string>, double> brute_force_runs(const std::vector<ActivityEvent>& h, Timestamp now,
                                                            const WorkflowOptions& o) {
  std::map<std::vector<std::string>, double> out;
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t len = o.min_length; len <= o.max_length && i + len <= h.size(); ++len) {
      if (h[i + len - 1].timestamp - h[i].timestamp > o.window) break;
      std::vector<std::string> seq;
      for (std::size_t k = i; k < i + len; ++k) seq.push_back(h[k].label);
      out[seq] += std::exp2(-days_between(h[i + len - 1].timestamp, now) / o.half_life_days);
    }
  }
  for (auto it = out.begin(); it != out.end();) {
    it = it->second < o.min_support ? out.erase(it) : std::next(it);
  }
  return out;
}

TEST(Workflows, RepeatedSequenceMatchesBruteForce) {
  std::vector<ActivityEvent> history;
  auto t = testing::epoch();
  for (int rep = 0; rep < 5; ++rep) {
    for (const char* label : {"docs", "arch", "code", "test"}) {
      history.push_back({t, label});
      t += std::chrono::milliseconds(1);
    }
  }
  const auto mined = mine_workflows(history, t);
  const auto oracle = brute_force_runs(history, t, {});
  ASSERT_EQ(mined.size(), oracle.size());
  bool found = false;
  for (const auto& p : mined) {
    ASSERT_TRUE(oracle.count(p.sequence));
    EXPECT_NEAR(p.support, oracle.at(p.sequence), 1e-9);
    if (p.sequence == std::vector<std::string>{"docs", "arch", "code", "test"}) {
      found = true;
      EXPECT_NEAR(p.support, 5.0, 1e-6);
    }
  }
  EXPECT_TRUE(found);
  for (std::size_t i = 1; i < mined.size(); ++i) EXPECT_GE(mined[i - 1].support, mined[i].support);
}

TEST(Workflows, EmptyAndWindowRule) {
  EXPECT_TRUE(mine_workflows({}, testing::epoch()).empty());
  std::vector<ActivityEvent> spaced;
  auto t = testing::epoch();
  for (int i = 0; i < 10; ++i) {
    spaced.push_back({t, i % 2 ? "code" : "test"});
    t += std::chrono::hours(3);
  }
  EXPECT_TRUE(mine_workflows(spaced, t).empty());
}

}  // namespace
}  // namespace agentmem::learning
