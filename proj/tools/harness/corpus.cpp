#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

#include "harness.hpp"
#include "agentmem/metrics.hpp"

namespace agentmem::bench {

namespace {

struct TopicVocabulary {
  Topic topic;
  std::string_view slug;
  std::array<std::string_view, 3> anchors;  // in every memory of the topic
  std::array<std::string_view, 20> slots;
};

// Anchor words carry the lexicon category; slot words are unique to one topic.
constexpr TopicVocabulary kVocabulary[] = {
    {Topic::WebDevelopment, "web-development", {"frontend", "react", "component"},
     {"hooks", "props", "state", "router", "css", "tailwind", "vite", "webpack", "typescript", "dom",
      "render", "layout", "modal", "form", "button", "accessibility", "animation", "bundle",
      "hydration", "storybook"}},
    {Topic::MachineLearning, "machine-learning", {"model", "training", "pytorch"},
     {"dataset", "embedding", "classifier", "gradient", "epoch", "tensor", "batch", "optimizer",
      "loss", "inference", "tokenizer", "transformer", "finetune", "checkpoint", "evaluation",
      "feature", "regularization", "dropout", "accuracy", "sklearn"}},
    {Topic::DatabaseDesign, "database-design", {"database", "schema", "postgres"},
     {"index", "migration", "table", "column", "query", "foreign", "key", "transaction",
      "replication", "vacuum", "partition", "join", "constraint", "sqlite", "redis", "orm",
      "normalization", "backup", "sharding", "views"}},
    {Topic::DevOps, "devops", {"deploy", "docker", "kubernetes"},
     {"container", "helm", "terraform", "pipeline", "ci", "nginx", "ingress", "pod", "cluster",
      "rollout", "monitoring", "prometheus", "grafana", "aws", "logging", "autoscaling", "registry",
      "image", "volume", "ansible"}},
    {Topic::ApiDesign, "api-design", {"api", "endpoint", "rest"},
     {"versioning", "pagination", "graphql", "grpc", "openapi", "fastapi", "status", "payload",
      "json", "rate", "limiting", "idempotency", "webhook", "contract", "resource", "route",
      "middleware", "serializer", "swagger", "gateway"}},
};

// Shared across topics; frequent enough that their weight stays low.
constexpr std::string_view kGeneric[] = {"team",    "decided", "review",  "notes",
                                         "sprint",  "release", "refactor", "issue",
                                         "meeting", "backlog", "cleanup", "followup"};

// Glue is stopwords only, so every memory has exactly eight indexed tokens.
constexpr std::string_view kFrames[] = {
    "The {a1} {a2} in the {a0} should be on {s0} with {s1} and {s2} after {g0} {g1}.",
    "In the {a0}, {a1} {a2} was on {s0} and {s1}, then {s2} ({g0}, {g1}).",
    "For the {a0} {a1} {a2} we should have {s0} over {s1}, with {s2} on {g0} {g1}.",
    "{g0} {g1}: {a1} {a2} of the {a0} should have {s0}, {s1} and {s2}.",
};

const TopicVocabulary& vocabulary(Topic t) { return kVocabulary[static_cast<std::size_t>(t)]; }

std::string fill(std::string_view frame, const std::map<std::string, std::string_view>& slots) {
  std::string out;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (frame[i] == '{') {
      const auto close = frame.find('}', i);
      out += slots.at(std::string(frame.substr(i + 1, close - i - 1)));
      i = close;
    } else {
      out += frame[i];
    }
  }
  return out;
}

}  // namespace

std::string_view topic_name(Topic t) noexcept {
  switch (t) {
    case Topic::WebDevelopment: return "web development";
    case Topic::MachineLearning: return "machine learning";
    case Topic::DatabaseDesign: return "database design";
    case Topic::DevOps: return "DevOps";
    case Topic::ApiDesign: return "API design";
  }
  return "?";
}

std::vector<CorpusItem> gen_corpus(const CorpusSpec& spec) {
  if (spec.n < kTopicCount) {
    throw Error(ErrorCode::InvalidArgument, "corpus needs at least one memory per topic");
  }
  std::mt19937_64 rng(spec.seed);
  auto pick = [&rng](std::size_t n) {
    return static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  };
  std::vector<CorpusItem> out;
  out.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const Topic topic = kTopics[i % kTopicCount];
    const auto& v = vocabulary(topic);

    std::array<std::size_t, 20> slot_order{};
    for (std::size_t k = 0; k < slot_order.size(); ++k) slot_order[k] = k;
    std::array<std::size_t, std::size(kGeneric)> generic_order{};
    for (std::size_t k = 0; k < generic_order.size(); ++k) generic_order[k] = k;
    // Partial Fisher-Yates: the first three slots and two generic words are distinct.
    for (std::size_t k = 0; k < 3; ++k) std::swap(slot_order[k], slot_order[k + pick(20 - k)]);
    for (std::size_t k = 0; k < 2; ++k) {
      std::swap(generic_order[k], generic_order[k + pick(generic_order.size() - k)]);
    }
    const std::map<std::string, std::string_view> fills = {
        {"a0", v.anchors[0]},           {"a1", v.anchors[1]},
        {"a2", v.anchors[2]},           {"s0", v.slots[slot_order[0]]},
        {"s1", v.slots[slot_order[1]]}, {"s2", v.slots[slot_order[2]]},
        {"g0", kGeneric[generic_order[0]]}, {"g1", kGeneric[generic_order[1]]}};

    CorpusItem item;
    item.topic = topic;
    item.content = fill(kFrames[pick(std::size(kFrames))], fills);
    item.importance = static_cast<int>(std::uniform_int_distribution<int>(1, 10)(rng));
    item.tags = {std::string(v.slug), "bench"};
    out.push_back(std::move(item));
  }
  return out;
}

const std::vector<BenchQuery>& templated_queries() {
  static const std::vector<BenchQuery> queries = [] {
    std::vector<BenchQuery> q;
    for (const auto& v : kVocabulary) {
      q.push_back({std::string(v.anchors[0]) + " " + std::string(v.anchors[1]), v.topic});
      q.push_back({std::string(v.anchors[1]) + " " + std::string(v.anchors[2]), v.topic});
    }
    return q;
  }();
  return queries;
}

int graded_relevance(Topic query_topic, Topic memory_topic, int importance) noexcept {
  return query_topic == memory_topic ? metrics::relevance_from_importance(importance) : 0;
}

double adjusted_rand_index(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::InvalidArgument, "label vectors differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> joint;
  std::map<std::uint32_t, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [_, c] : joint) index += pairs(c);
  for (const auto& [_, c] : rows) sum_rows += pairs(c);
  for (const auto& [_, c] : cols) sum_cols += pairs(c);
  const double expected = sum_rows * sum_cols / pairs(n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both partitions trivial and identical in shape
  return (index - expected) / (max_index - expected);
}

Summary summarize(std::vector<double> samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no samples");
  std::sort(samples.begin(), samples.end());
  auto quantile = [&samples](double q) {
    const double pos = q * static_cast<double>(samples.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, samples.size() - 1);
    return samples[lo] + (pos - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
  };
  Summary s;
  s.runs = samples.size();
  s.median = quantile(0.5);
  s.p95 = quantile(0.95);
  s.p99 = quantile(0.99);
  s.min = samples.front();
  s.max = samples.back();
  double sum = 0.0;
  for (const double x : samples) sum += x;
  s.mean = sum / static_cast<double>(samples.size());
  double sq = 0.0;
  for (const double x : samples) sq += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(samples.size()));
  return s;
}

nlohmann::json to_json(const Summary& s) {
  return {{"runs", s.runs}, {"median", s.median}, {"mean", s.mean}, {"p95", s.p95},
          {"p99", s.p99},   {"std", s.stddev},    {"min", s.min},   {"max", s.max}};
}

}  // namespace agentmem::bench
