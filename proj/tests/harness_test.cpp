#include <map>

#include <gtest/gtest.h>

#include "agentmem/knowledge_graph.hpp"
#include "harness.hpp"
#include "test_support.hpp"

namespace agentmem::bench {
namespace {

TEST(Corpus, TopicBalanceAndDeterminism) {
  const auto a = gen_corpus({100, 42});
  std::map<Topic, int> per_topic;
  for (const auto& item : a) {
    per_topic[item.topic]++;
    EXPECT_GE(item.importance, 1);
    EXPECT_LE(item.importance, 10);
  }
  ASSERT_EQ(per_topic.size(), 5u);
  for (const auto& [_, n] : per_topic) EXPECT_EQ(n, 20);

  const auto b = gen_corpus({100, 42});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].content, b[i].content);
    EXPECT_EQ(a[i].importance, b[i].importance);
  }
  const auto c = gen_corpus({100, 7});
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].content != c[i].content || a[i].importance != c[i].importance;
  EXPECT_TRUE(differs);

  std::map<Topic, int> big;
  for (const auto& item : gen_corpus({1000, 42})) big[item.topic]++;
  for (const auto& [_, n] : big) EXPECT_EQ(n, 200);
}

TEST(Corpus, TemplatedQueriesAndRelevance) {
  EXPECT_EQ(templated_queries().size(), 10u);
  EXPECT_EQ(graded_relevance(Topic::WebDevelopment, Topic::MachineLearning, 10), 0);
  EXPECT_EQ(graded_relevance(Topic::WebDevelopment, Topic::WebDevelopment, 4), 1);
  EXPECT_EQ(graded_relevance(Topic::WebDevelopment, Topic::WebDevelopment, 7), 2);
  EXPECT_EQ(graded_relevance(Topic::WebDevelopment, Topic::WebDevelopment, 8), 3);
}

TEST(Corpus, HundredMemoryGraphHasFourToTenCommunities) {
  std::vector<MemoryRecord> records;
  const auto corpus = gen_corpus({100, 42});
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    MemoryRecord r;
    r.id = make_id(i + 1);
    r.content = corpus[i].content;
    records.push_back(r);
  }
  const auto snap = graph::build_snapshot(records, {}, testing::epoch());
  const auto k = snap.stats.communities_per_level[0];
  EXPECT_GE(k, 4u);
  EXPECT_LE(k, 10u);
}

TEST(Statistics, AdjustedRandIndexReferenceValues) {
  // Reference values from scikit-learn's adjusted_rand_score.
  EXPECT_NEAR(adjusted_rand_index({0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2}), 0.24242424242424243, 1e-12);
  EXPECT_NEAR(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}), 1.0, 1e-12);
  EXPECT_NEAR(adjusted_rand_index({0, 1, 2, 3}, {0, 0, 0, 0}), 0.0, 1e-12);
}

TEST(Statistics, SummaryReferenceValues) {
  // Reference values from numpy (linear-interpolation percentiles, population std).
  const auto s = summarize({10, 3, 1, 4, 2});
  EXPECT_EQ(s.runs, 5u);
  EXPECT_NEAR(s.median, 3.0, 1e-12);
  EXPECT_NEAR(s.mean, 4.0, 1e-12);
  EXPECT_NEAR(s.p95, 8.8, 1e-12);
  EXPECT_NEAR(s.p99, 9.76, 1e-12);
  EXPECT_NEAR(s.stddev, 3.1622776601683795, 1e-12);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.max, 10.0);
  EXPECT_THROW(summarize({}), Error);
}

TEST(TrustSuite, ScenarioShape) {
  SuiteOptions opt;
  const auto rows = run_trust(opt);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].benign_agents, 10u);
  EXPECT_EQ(rows[1].benign_agents, 9u);
  EXPECT_EQ(rows[1].malicious_agents, 1u);
  EXPECT_EQ(rows[2].malicious_agents, 10u);
  // Same seed, same numbers.
  const auto again = run_trust(opt);
  EXPECT_EQ(rows[2].malicious_mean, again[2].malicious_mean);
}

}  // namespace
}  // namespace agentmem::bench
