#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "agentmem/metrics.hpp"
#include "agentmem/ranker.hpp"
#include "test_support.hpp"

namespace agentmem::ranking {
namespace {

using patterns::Category;

Candidate cand(std::uint64_t id, double base) {
  Candidate c;
  c.id = make_id(id);
  c.base_score = base;
  c.bm25 = base;
  c.created_at = testing::epoch();
  return c;
}

RankingContext ctx_now() {
  RankingContext ctx;
  ctx.now = testing::epoch();
  return ctx;
}

TEST(Features, WorkedValues) {
  auto ctx = ctx_now();
  ctx.now = testing::epoch() + std::chrono::hours(24 * 30);
  auto c = cand(1, 2.0);
  c.importance = 10;
  const auto f = extract_features({c}, ctx);
  EXPECT_EQ(f[0][kImportance], 1.0);
  EXPECT_NEAR(f[0][kRecency], 0.5, 1e-12);
  EXPECT_EQ(f[0][kBm25], 1.0);  // sole candidate
  for (const double v : f[0]) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Features, MinMaxDegenerate) {
  EXPECT_EQ(min_max({3.0, 3.0}), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(min_max({1.0, 3.0, 2.0}), (std::vector<double>{0.0, 1.0, 0.5}));
}

TEST(Rerank, PhaseZeroIsIdentityAndPhaseOneEqualFeaturesKeepOrder) {
  std::vector<Candidate> cs = {cand(1, 0.9), cand(2, 0.5), cand(3, 0.2)};
  const auto p0 = rerank(cs, ctx_now(), 0, nullptr);
  for (std::size_t i = 0; i < cs.size(); ++i) EXPECT_EQ(p0[i].index, i);
  for (auto& c : cs) c.bm25 = 1.0;  // every feature equal
  const auto p1 = rerank(cs, ctx_now(), 1, nullptr);
  for (std::size_t i = 0; i < cs.size(); ++i) EXPECT_EQ(p1[i].index, i);
}

TEST(Rerank, TechMatchWinsTieWithStatedWeights) {
  auto ctx = ctx_now();
  ctx.preferences.weights[static_cast<std::size_t>(Category::Database)] = 2.0;
  auto plain = cand(1, 0.5);
  auto db = cand(2, 0.5);
  db.categories = {Category::Database};
  const auto out = rerank({plain, db}, ctx, 1, nullptr);
  EXPECT_EQ(out[0].index, 1u);
  // Multiplier arithmetic: other features tie, so the ratio is exactly 1 + 0.3 * 1.
  EXPECT_NEAR(out[0].score / out[1].score, 1.3, 1e-12);
}

Candidate random_candidate(std::mt19937& rng, std::uint64_t id) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Candidate c = cand(id, u(rng));
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

RankingContext random_context(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 3.0);
  auto ctx = ctx_now();
  for (auto& w : ctx.preferences.weights) w = rng() % 2 ? u(rng) : 0.0;
  for (int p = 0; p < 3; ++p) {
    if (rng() % 2) ctx.projects["p" + std::to_string(p)] = u(rng) / 3.0;
  }
  ctx.workflows = {{{"backend", "testing"}, 4.0, testing::epoch()}, {{"frontend", "database"}, 3.0, testing::epoch()}};
  ctx.recent_labels = {rng() % 2 ? "backend" : "frontend"};
  return ctx;
}

TEST(RerankProperty, PhaseZeroIsAlwaysIdentity) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Candidate> cs;
    const std::size_t n = rng() % 40;
    for (std::size_t i = 0; i < n; ++i) cs.push_back(random_candidate(rng, i + 1));
    const auto out = rerank(cs, random_context(rng), 0, nullptr);
    ASSERT_EQ(out.size(), n);
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(out[i].index, i) << "trial " << trial;
  }
}

std::size_t position_of(const std::vector<Ranked>& order, std::size_t index) {
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (order[r].index == index) return r;
  }
  return order.size();
}

TEST(RerankProperty, PhaseOneBoostIsMonotone) {
  // Raising one candidate's feature (others unchanged) never lowers its score or rank.
  std::mt19937 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Candidate> cs;
    const std::size_t n = 2 + rng() % 20;
    for (std::size_t i = 0; i < n; ++i) cs.push_back(random_candidate(rng, i + 1));
    const auto ctx = random_context(rng);
    const std::size_t target = rng() % n;
    auto boosted = cs;
    auto& c = boosted[target];
    switch (trial % 4) {
      case 0: c.importance = std::min(10, c.importance + 1 + static_cast<int>(rng() % 5)); break;
      case 1: c.trust_at_write = std::min(1.0, c.trust_at_write + 0.25); break;
      case 2: c.created_at += std::chrono::hours(1 + rng() % 500); break;
      case 3: c.projects.insert("p" + std::to_string(rng() % 3)); break;
    }
    const auto before = rerank(cs, ctx, 1, nullptr);
    const auto after = rerank(boosted, ctx, 1, nullptr);
    const auto pb = position_of(before, target);
    const auto pa = position_of(after, target);
    ASSERT_LE(pa, pb) << "trial " << trial;
    ASSERT_GE(after[pa].score, before[pb].score) << "trial " << trial;
  }
}

TrainingQuery learnable_query(std::mt19937& rng) {
  // Label equals the banded importance feature; other features are noise.
  TrainingQuery q;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    FeatureVector f{};
    for (auto& v : f) v = u(rng);
    const int importance = 1 + static_cast<int>(rng() % 10);
    f[kImportance] = (importance - 1) / 9.0;
    q.features.push_back(f);
    q.labels.push_back(importance <= 3 ? 0 : importance <= 5 ? 1 : importance <= 8 ? 2 : 3);
  }
  return q;
}

TEST(LambdaRank, LearnsImportanceByConstruction) {
  std::mt19937 rng(8);
  TrainingSet train;
  for (int i = 0; i < 60; ++i) train.queries.push_back(learnable_query(rng));
  std::vector<TrainingQuery> held_out;
  for (int i = 0; i < 30; ++i) held_out.push_back(learnable_query(rng));
  const auto model = train_lambdarank(train, {}, testing::epoch());
  EXPECT_EQ(model.trees.size(), 100u);
  EXPECT_GE(evaluate_ndcg(model, held_out, 5), 0.95);
}

TEST(LambdaRank, TooFewQueriesAndDeterminism) {
  std::mt19937 rng(8);
  TrainingSet small;
  for (int i = 0; i < 49; ++i) small.queries.push_back(learnable_query(rng));
  try {
    train_lambdarank(small, {}, testing::epoch());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
  small.queries.push_back(learnable_query(rng));
  const auto a = train_lambdarank(small, {}, testing::epoch());
  const auto b = train_lambdarank(small, {}, testing::epoch());
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(LambdaRank, SingleStumpSanity) {
  // One query, two documents: the better-labeled one must end up scored higher.
  TrainingSet data;
  TrainingQuery q;
  FeatureVector lo{}, hi{};
  hi[kImportance] = 1.0;
  q.features = {lo, hi};
  q.labels = {0, 3};
  data.queries = {q};
  TrainOptions opt;
  opt.trees = 1;
  opt.min_leaf = 1;
  opt.min_queries = 1;
  const auto model = train_lambdarank(data, opt, testing::epoch());
  ASSERT_EQ(model.trees.size(), 1u);
  EXPECT_GT(model.predict(hi), model.predict(lo));
  // With one pair, lambda = |delta NDCG| * sigmoid(0) on each side; the leaves get Newton steps.
  EXPECT_NEAR(model.predict(hi), -model.predict(lo), 1e-12);
}

TEST(LearnedModel, JsonRoundTripAndSchemaCheck) {
  std::mt19937 rng(4);
  TrainingSet data;
  for (int i = 0; i < 50; ++i) data.queries.push_back(learnable_query(rng));
  TrainOptions opt;
  opt.trees = 5;
  const auto model = train_lambdarank(data, opt, testing::epoch());
  const auto copy = LearnedModel::from_json(model.to_json());
  FeatureVector x{};
  x[kImportance] = 0.7;
  EXPECT_EQ(model.predict(x), copy.predict(x));
  auto broken = model.to_json();
  broken.erase("trees");
  EXPECT_THROW(LearnedModel::from_json(broken), Error);
}

TEST(SyntheticLabel, GradesFromOverlapAndImportance) {
  EXPECT_EQ(synthetic_label({Category::Backend}, {Category::Frontend}, 10), 0);
  EXPECT_EQ(synthetic_label({Category::Backend}, {Category::Backend}, 2), 1);
  EXPECT_EQ(synthetic_label({Category::Backend}, {Category::Backend}, 6), 2);
  EXPECT_EQ(synthetic_label({Category::Backend}, {Category::Backend, Category::Testing}, 9), 3);
}

TEST(Metrics, HandComputedNdcgAndMrr) {
  EXPECT_NEAR(metrics::ndcg_at(3, {0, 3, 0}), (7.0 / std::log2(3.0)) / 7.0, 1e-12);
  EXPECT_NEAR(metrics::ndcg_at(3, {0, 3, 0}), 0.6309, 1e-4);
  EXPECT_NEAR(metrics::ndcg_at(5, {3, 2, 1, 0}), 1.0, 1e-12);
  EXPECT_EQ(metrics::ndcg_at(5, {0, 0}), 0.0);
  EXPECT_NEAR(metrics::ndcg_at(1, {1}, {3, 1}), 1.0 / 7.0, 1e-12);
  EXPECT_EQ(metrics::mrr({{true, false}, {true}}), 1.0);
  EXPECT_NEAR(metrics::mrr({{false, true}, {false, false, true}}), (0.5 + 1.0 / 3.0) / 2, 1e-12);
  EXPECT_THROW(metrics::mrr({}), Error);
  EXPECT_NEAR(metrics::recall_at(5, {true, false, true}, 200), 2.0 / 200, 1e-12);
  EXPECT_EQ(metrics::relevance_from_importance(4), 1);
  EXPECT_EQ(metrics::relevance_from_importance(5), 2);
  EXPECT_EQ(metrics::relevance_from_importance(8), 3);
}

}  // namespace
}  // namespace agentmem::ranking
