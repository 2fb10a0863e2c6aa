#include "agentmem/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "agentmem/metrics.hpp"

namespace agentmem::ranking {

using nlohmann::json;

std::string_view feature_name(std::size_t index) noexcept {
  constexpr std::string_view kNames[kFeatureCount] = {
      "bm25",           "tfidf_sim",  "tech_match", "project_match", "workflow_fit",
      "source_quality", "importance", "recency",    "access_freq"};
  return index < kFeatureCount ? kNames[index] : "";
}

double workflow_fit(const std::vector<learning::WorkflowPattern>& patterns,
                    const std::vector<std::string>& recent, std::string_view label) {
  double top = 0.0;
  double best = 0.0;
  for (const auto& p : patterns) {
    top = std::max(top, p.support);
    if (p.sequence.empty() || p.sequence.back() != label) continue;
    if (!recent.empty()) {
      const std::size_t prefix = p.sequence.size() - 1;
      if (prefix > recent.size()) continue;
      if (!std::equal(p.sequence.begin(), p.sequence.end() - 1, recent.end() - static_cast<std::ptrdiff_t>(prefix))) {
        continue;
      }
    }
    best = std::max(best, p.support);
  }
  return top > 0.0 ? best / top : 0.0;
}

std::vector<double> min_max(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double span = *hi - *lo;
  std::vector<double> out(values.size(), 1.0);
  if (span > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / span;
  }
  return out;
}

std::vector<FeatureVector> extract_features(const std::vector<Candidate>& candidates,
                                            const RankingContext& ctx) {
  std::vector<double> bm25, tfidf;
  std::uint64_t max_access = 0;
  for (const auto& c : candidates) {
    bm25.push_back(c.bm25);
    tfidf.push_back(c.tfidf);
    max_access = std::max(max_access, c.accesses);
  }
  bm25 = min_max(bm25);
  tfidf = min_max(tfidf);
  const double pref_top = ctx.preferences.max_weight();
  const double log_max_access = std::log1p(static_cast<double>(max_access));

  std::vector<FeatureVector> out(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    auto& f = out[i];
    f[kBm25] = bm25[i];
    f[kTfidf] = tfidf[i];

    double tech = 0.0;
    if (pref_top > 0.0) {
      for (const auto cat : c.categories) tech = std::max(tech, ctx.preferences.weight(cat) / pref_top);
    }
    f[kTechMatch] = tech;

    double project = 0.0;
    for (const auto& p : c.projects) {
      auto it = ctx.projects.find(p);
      if (it != ctx.projects.end()) project = std::max(project, it->second);
    }
    f[kProjectMatch] = project;

    double fit = 0.0;
    for (const auto cat : c.categories) {
      fit = std::max(fit, workflow_fit(ctx.workflows, ctx.recent_labels, patterns::to_string(cat)));
    }
    f[kWorkflowFit] = fit;

    f[kSourceQuality] = c.trust_at_write;
    f[kImportance] = (c.importance - 1) / 9.0;
    const double age = std::max(0.0, days_between(c.created_at, ctx.now));
    f[kRecency] = std::exp2(-age / kRecencyHalfLifeDays);
    f[kAccessFreq] =
        log_max_access > 0.0 ? std::log1p(static_cast<double>(c.accesses)) / log_max_access : 0.0;

    for (auto& v : f) v = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------

double Tree::predict(const FeatureVector& x) const {
  if (nodes.empty()) return 0.0;
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

double LearnedModel::predict(const FeatureVector& x) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return std::isfinite(s) ? s : 0.0;
}

json LearnedModel::to_json() const {
  json trees_json = json::array();
  for (const auto& t : trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees_json.push_back({{"nodes", std::move(nodes)}});
  }
  return {{"version", kVersion},
          {"learning_rate", learning_rate},
          {"features", kFeatureCount},
          {"trees", std::move(trees_json)},
          {"metadata",
           {{"signals", metadata.signals},
            {"queries", metadata.queries},
            {"trained_at", format_iso8601(metadata.trained_at)},
            {"synthetic", metadata.synthetic},
            {"train_ndcg5", metadata.train_ndcg5}}}};
}

LearnedModel LearnedModel::from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kVersion) {
      throw Error(ErrorCode::SchemaMismatch, "unsupported model version");
    }
    LearnedModel m;
    m.learning_rate = j.at("learning_rate").get<double>();
    for (const auto& t : j.at("trees")) {
      Tree tree;
      for (const auto& n : t.at("nodes")) {
        TreeNode node{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                      n.at(3).get<int>(), n.at(4).get<double>()};
        if (node.feature >= static_cast<int>(kFeatureCount)) {
          throw Error(ErrorCode::SchemaMismatch, "model feature index out of range");
        }
        tree.nodes.push_back(node);
      }
      const int count = static_cast<int>(tree.nodes.size());
      for (const auto& n : tree.nodes) {
        if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count)) {
          throw Error(ErrorCode::SchemaMismatch, "model tree links out of range");
        }
      }
      m.trees.push_back(std::move(tree));
    }
    const auto& md = j.at("metadata");
    m.metadata.signals = md.at("signals").get<std::uint64_t>();
    m.metadata.queries = md.at("queries").get<std::uint64_t>();
    m.metadata.synthetic = md.at("synthetic").get<bool>();
    m.metadata.train_ndcg5 = md.at("train_ndcg5").get<double>();
    auto ts = parse_iso8601(md.at("trained_at").get<std::string>());
    if (!ts) throw Error(ErrorCode::SchemaMismatch, "bad trained_at");
    m.metadata.trained_at = *ts;
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

struct Sample {
  const FeatureVector* x;
  int label;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<Sample>& samples, const std::vector<double>& grad,
              const std::vector<double>& hess, const TrainOptions& opt)
      : samples_(samples), grad_(grad), hess_(hess), opt_(opt) {}

  Tree build() {
    std::vector<std::size_t> all(samples_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    Tree tree;
    grow(tree, all, 0);
    return tree;
  }

 private:
  int grow(Tree& tree, std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    double g_sum = 0.0, h_sum = 0.0;
    for (const auto i : idx) {
      g_sum += grad_[i];
      h_sum += hess_[i];
    }
    const double n = static_cast<double>(idx.size());

    int best_feature = -1;
    double best_gain = 1e-12;
    double best_threshold = 0.0;
    if (depth < opt_.max_depth && idx.size() >= 2 * opt_.min_leaf) {
      const double parent = g_sum * g_sum / n;
      std::vector<std::size_t> order = idx;
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          const double va = (*samples_[a].x)[f], vb = (*samples_[b].x)[f];
          return va != vb ? va < vb : a < b;
        });
        double left = 0.0;
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
          left += grad_[order[k]];
          const std::size_t nl = k + 1, nr = order.size() - nl;
          const double v = (*samples_[order[k]].x)[f];
          const double next = (*samples_[order[k + 1]].x)[f];
          if (v == next || nl < opt_.min_leaf || nr < opt_.min_leaf) continue;
          const double right = g_sum - left;
          const double gain = left * left / static_cast<double>(nl) +
                              right * right / static_cast<double>(nr) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = static_cast<int>(f);
            best_threshold = v + (next - v) / 2.0;
          }
        }
      }
    }

    if (best_feature < 0) {
      tree.nodes[static_cast<std::size_t>(id)].value =
          opt_.learning_rate * g_sum / (h_sum + 1e-9);
      return id;
    }
    std::vector<std::size_t> left_idx, right_idx;
    for (const auto i : idx) {
      ((*samples_[i].x)[static_cast<std::size_t>(best_feature)] <= best_threshold ? left_idx : right_idx)
          .push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(tree, left_idx, depth + 1);
    const int r = grow(tree, right_idx, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const std::vector<Sample>& samples_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  const TrainOptions& opt_;
};

// Positions of each item when sorted by score descending, ties by input order.
std::vector<std::size_t> ranks_by_score(const double* scores, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;
  return rank;
}

}  // namespace

LearnedModel train_lambdarank(const TrainingSet& data, const TrainOptions& opt, Timestamp now) {
  std::size_t usable = 0;
  for (const auto& q : data.queries) {
    if (q.features.size() != q.labels.size()) {
      throw Error(ErrorCode::InvalidArgument, "features and labels differ in length");
    }
    if (!q.features.empty()) ++usable;
  }
  if (usable < opt.min_queries) {
    throw Error(ErrorCode::InsufficientData, "training needs " + std::to_string(opt.min_queries) +
                                                 " queries, got " + std::to_string(usable));
  }

  std::vector<Sample> samples;
  std::vector<std::pair<std::size_t, std::size_t>> groups;  // [begin, end)
  for (const auto& q : data.queries) {
    if (q.features.empty()) continue;
    const std::size_t begin = samples.size();
    for (std::size_t i = 0; i < q.features.size(); ++i) samples.push_back({&q.features[i], q.labels[i]});
    groups.emplace_back(begin, samples.size());
  }

  LearnedModel model;
  model.learning_rate = opt.learning_rate;
  std::vector<double> scores(samples.size(), 0.0);
  std::vector<double> grad(samples.size()), hess(samples.size());

  for (int t = 0; t < opt.trees; ++t) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    for (const auto& [begin, end] : groups) {
      const std::size_t n = end - begin;
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = samples[begin + i].label;
      std::vector<int> ideal = labels;
      std::sort(ideal.begin(), ideal.end(), std::greater<>());
      const double idcg = metrics::dcg_at(n, ideal);
      if (idcg <= 0.0) continue;
      const auto rank = ranks_by_score(&scores[begin], n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (labels[i] <= labels[j]) continue;
          const double gain = std::exp2(labels[i]) - std::exp2(labels[j]);
          const double disc = 1.0 / std::log2(static_cast<double>(rank[i]) + 2.0) -
                              1.0 / std::log2(static_cast<double>(rank[j]) + 2.0);
          const double delta = std::abs(gain * disc) / idcg;
          const double rho = 1.0 / (1.0 + std::exp(scores[begin + i] - scores[begin + j]));
          grad[begin + i] += rho * delta;
          grad[begin + j] -= rho * delta;
          const double w = rho * (1.0 - rho) * delta;
          hess[begin + i] += w;
          hess[begin + j] += w;
        }
      }
    }
    Tree tree = TreeBuilder(samples, grad, hess, opt).build();
    for (std::size_t i = 0; i < samples.size(); ++i) scores[i] += tree.predict(*samples[i].x);
    model.trees.push_back(std::move(tree));
  }

  model.metadata.signals = data.signals;
  model.metadata.queries = usable;
  model.metadata.trained_at = now;
  model.metadata.synthetic = data.synthetic;
  model.metadata.train_ndcg5 = evaluate_ndcg(model, data.queries, opt.ndcg_k);
  return model;
}

double evaluate_ndcg(const LearnedModel& model, const std::vector<TrainingQuery>& queries,
                     std::size_t k) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& q : queries) {
    if (q.features.empty()) continue;
    std::vector<double> s(q.features.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = model.predict(q.features[i]);
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&s](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    std::vector<int> ranked;
    for (const auto i : order) ranked.push_back(q.labels[i]);
    sum += metrics::ndcg_at(k, ranked, q.labels);
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

int synthetic_label(const std::set<patterns::Category>& query_categories,
                    const std::set<patterns::Category>& candidate_categories, int importance) {
  const bool overlap = std::any_of(query_categories.begin(), query_categories.end(),
                                   [&](patterns::Category c) { return candidate_categories.contains(c); });
  return overlap ? metrics::relevance_from_importance(importance) : 0;
}

// ---------------------------------------------------------------------------

std::vector<Ranked> rerank(const std::vector<Candidate>& candidates, const RankingContext& ctx,
                           int phase, const LearnedModel* model, const RankerConfig& config) {
  std::vector<Ranked> out;
  out.reserve(candidates.size());
  if (phase <= 0) {
    for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back({i, candidates[i].base_score});
    return out;
  }
  const auto features = extract_features(candidates, ctx);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double score;
    if (phase >= 2 && model) {
      score = model->predict(features[i]);
    } else {
      score = candidates[i].base_score;
      for (std::size_t f = 0; f < kFeatureCount; ++f) score *= 1.0 + config.phase1_weights[f] * features[i][f];
    }
    out.push_back({i, score});
  }
  std::stable_sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  return out;
}

}  // namespace agentmem::ranking
