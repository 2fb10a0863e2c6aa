#include "agentmem/knowledge_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

namespace agentmem::graph {

std::vector<KeyTerm> key_terms(const text::TfIdfVector& vector, std::size_t k) {
  std::vector<KeyTerm> all;
  all.reserve(vector.weights.size());
  for (const auto& [term, w] : vector.weights) all.push_back({term, w});
  auto better = [](const KeyTerm& a, const KeyTerm& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.term < b.term;
  };
  if (k < all.size()) {
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
    all.resize(k);
  } else {
    std::sort(all.begin(), all.end(), better);
  }
  return all;
}

std::vector<KeyTerm> key_terms(std::string_view content, const text::CorpusStats& stats,
                               std::size_t k) {
  return key_terms(text::tfidf_vector(content, stats), k);
}

SimilarityGraph build_edges(std::vector<DocumentVector> corpus, double threshold) {
  if (corpus.size() > kMaxGraphNodes) {
    throw Error(ErrorCode::CapExceeded, "graph construction is capped at " +
                                            std::to_string(kMaxGraphNodes) + " memories, got " +
                                            std::to_string(corpus.size()));
  }
  std::sort(corpus.begin(), corpus.end(),
            [](const DocumentVector& a, const DocumentVector& b) { return a.id < b.id; });
  SimilarityGraph g;
  g.nodes.reserve(corpus.size());
  for (const auto& d : corpus) g.nodes.push_back(d.id);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (std::size_t j = i + 1; j < corpus.size(); ++j) {
      const double w = text::cosine(corpus[i].vector, corpus[j].vector);
      if (w > threshold) g.edges.push_back({corpus[i].id, corpus[j].id, w});
    }
  }
  return g;
}

WeightedGraph::WeightedGraph(std::size_t nodes)
    : adjacency_(nodes), self_loops_(nodes, 0.0), strength_(nodes, 0.0) {}

void WeightedGraph::add_edge(std::uint32_t u, std::uint32_t v, double weight) {
  total_weight_ += weight;
  if (u == v) {
    self_loops_[u] += weight;
    strength_[u] += 2.0 * weight;
    return;
  }
  auto bump = [weight](std::vector<Neighbor>& list, std::uint32_t to) {
    for (auto& [n, w] : list) {
      if (n == to) {
        w += weight;
        return;
      }
    }
    list.emplace_back(to, weight);
  };
  bump(adjacency_[u], v);
  bump(adjacency_[v], u);
  strength_[u] += weight;
  strength_[v] += weight;
}

WeightedGraph WeightedGraph::induced(std::span<const std::uint32_t> nodes) const {
  std::unordered_map<std::uint32_t, std::uint32_t> local;
  for (std::uint32_t i = 0; i < nodes.size(); ++i) local.emplace(nodes[i], i);
  WeightedGraph sub(nodes.size());
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    const std::uint32_t u = nodes[i];
    if (self_loops_[u] > 0.0) sub.add_edge(i, i, self_loops_[u]);
    for (const auto& [v, w] : adjacency_[u]) {
      auto it = local.find(v);
      if (it != local.end() && i < it->second) sub.add_edge(i, it->second, w);
    }
  }
  return sub;
}

WeightedGraph to_weighted(const SimilarityGraph& graph) {
  std::unordered_map<MemoryId, std::uint32_t> index;
  for (std::uint32_t i = 0; i < graph.nodes.size(); ++i) index.emplace(graph.nodes[i], i);
  WeightedGraph g(graph.nodes.size());
  for (const auto& e : graph.edges) g.add_edge(index.at(e.a), index.at(e.b), e.weight);
  return g;
}

std::size_t community_count(const Membership& membership) {
  if (membership.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(membership.begin(), membership.end())) + 1;
}

double modularity(const WeightedGraph& graph, const Membership& membership, double resolution) {
  const double m = graph.total_weight();
  if (m <= 0.0) return 0.0;
  const std::size_t k = community_count(membership);
  std::vector<double> internal(k, 0.0), total(k, 0.0);
  for (std::uint32_t u = 0; u < graph.node_count(); ++u) {
    const auto cu = membership[u];
    total[cu] += graph.strength(u);
    internal[cu] += graph.self_loop(u);
    for (const auto& [v, w] : graph.neighbors(u)) {
      if (u < v && membership[v] == cu) internal[cu] += w;
    }
  }
  double q = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double share = total[c] / (2.0 * m);
    q += internal[c] / m - resolution * share * share;
  }
  return q;
}

namespace {

using Rng = std::mt19937_64;

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

Membership renumber(const Membership& membership) {
  std::unordered_map<std::uint32_t, std::uint32_t> ids;
  Membership out(membership.size());
  for (std::size_t i = 0; i < membership.size(); ++i) {
    auto [it, inserted] = ids.emplace(membership[i], static_cast<std::uint32_t>(ids.size()));
    out[i] = it->second;
  }
  return out;
}

// Queue-based local moving. `membership` uses ids in [0, n).
bool move_nodes(const WeightedGraph& g, Membership& membership, double gamma, Rng& rng) {
  const std::size_t n = g.node_count();
  const double two_m = 2.0 * g.total_weight();
  std::vector<double> community_total(n, 0.0);
  std::vector<std::uint32_t> community_size(n, 0);
  for (std::uint32_t v = 0; v < n; ++v) {
    community_total[membership[v]] += g.strength(v);
    ++community_size[membership[v]];
  }
  std::vector<std::uint32_t> empty;
  for (std::uint32_t c = n; c-- > 0;) {
    if (community_size[c] == 0) empty.push_back(c);
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0U);
  shuffle(order, rng);
  std::deque<std::uint32_t> queue(order.begin(), order.end());
  std::vector<char> queued(n, 1);

  std::vector<double> link(n, 0.0);
  std::vector<std::uint32_t> touched;
  bool changed = false;

  while (!queue.empty()) {
    const std::uint32_t v = queue.front();
    queue.pop_front();
    queued[v] = 0;
    const std::uint32_t old = membership[v];
    const double kv = g.strength(v);

    touched.clear();
    for (const auto& [u, w] : g.neighbors(v)) {
      const auto cu = membership[u];
      if (link[cu] == 0.0) touched.push_back(cu);
      link[cu] += w;
    }
    community_total[old] -= kv;
    --community_size[old];
    if (community_size[old] == 0) empty.push_back(old);

    std::uint32_t best = old;
    double best_gain = link[old] - gamma * kv * community_total[old] / two_m;
    for (const auto c : touched) {
      const double gain = link[c] - gamma * kv * community_total[c] / two_m;
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    if (best_gain < 0.0 && !empty.empty()) {
      best = empty.back();
      best_gain = 0.0;
    }
    for (const auto c : touched) link[c] = 0.0;

    if (community_size[best] == 0) {
      empty.erase(std::find(empty.begin(), empty.end(), best));
    }
    community_total[best] += kv;
    ++community_size[best];
    membership[v] = best;

    if (best != old) {
      changed = true;
      for (const auto& [u, w] : g.neighbors(v)) {
        if (!queued[u] && membership[u] != best) {
          queued[u] = 1;
          queue.push_back(u);
        }
      }
    }
  }
  return changed;
}

// Refinement: within each community of `partition`, greedily-randomly merge
// well-connected singletons. Returns refined membership (ids in [0, n)).
Membership refine(const WeightedGraph& g, const Membership& partition, double gamma, double theta,
                  Rng& rng) {
  const std::size_t n = g.node_count();
  const double two_m = 2.0 * g.total_weight();
  Membership refined(n);
  std::iota(refined.begin(), refined.end(), 0U);
  std::vector<double> refined_total(n), external(n);
  std::vector<std::uint32_t> refined_size(n, 1);

  std::vector<std::vector<std::uint32_t>> members(community_count(partition));
  for (std::uint32_t v = 0; v < n; ++v) members[partition[v]].push_back(v);

  std::vector<double> link(n, 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<double> node_to_subset(n, 0.0);

  for (const auto& subset : members) {
    double subset_total = 0.0;
    for (const auto v : subset) subset_total += g.strength(v);
    for (const auto v : subset) {
      double w_in = 0.0;
      for (const auto& [u, w] : g.neighbors(v)) {
        if (partition[u] == partition[v]) w_in += w;
      }
      node_to_subset[v] = w_in;
      refined_total[v] = g.strength(v);
      external[v] = w_in;
    }

    std::vector<std::uint32_t> order(subset);
    shuffle(order, rng);
    for (const auto v : order) {
      const double kv = g.strength(v);
      if (node_to_subset[v] < gamma * kv * (subset_total - kv) / two_m) continue;
      if (refined_size[refined[v]] != 1) continue;

      touched.clear();
      for (const auto& [u, w] : g.neighbors(v)) {
        if (partition[u] != partition[v]) continue;
        const auto cu = refined[u];
        if (cu == refined[v]) continue;
        if (link[cu] == 0.0) touched.push_back(cu);
        link[cu] += w;
      }

      std::vector<std::pair<std::uint32_t, double>> options;
      double max_gain = 0.0;
      for (const auto c : touched) {
        const double kc = refined_total[c];
        if (external[c] < gamma * kc * (subset_total - kc) / two_m) continue;
        const double gain = link[c] - gamma * kv * kc / two_m;
        if (gain >= 0.0) {
          options.emplace_back(c, gain);
          max_gain = std::max(max_gain, gain);
        }
      }
      if (!options.empty()) {
        // Staying in the singleton is always an option with gain 0.
        double total = std::exp((0.0 - max_gain) / theta);
        for (const auto& [c, gain] : options) total += std::exp((gain - max_gain) / theta);
        double pick = uniform01(rng) * total;
        std::uint32_t target = refined[v];
        pick -= std::exp((0.0 - max_gain) / theta);
        if (pick >= 0.0) {
          for (const auto& [c, gain] : options) {
            target = c;
            pick -= std::exp((gain - max_gain) / theta);
            if (pick < 0.0) break;
          }
        }
        if (target != refined[v]) {
          const auto own = refined[v];
          external[target] = external[target] + node_to_subset[v] - 2.0 * link[target];
          refined_total[target] += kv;
          ++refined_size[target];
          refined_size[own] = 0;
          refined_total[own] = 0.0;
          refined[v] = target;
        }
      }
      for (const auto c : touched) link[c] = 0.0;
    }
  }
  return renumber(refined);
}

WeightedGraph aggregate(const WeightedGraph& g, const Membership& membership) {
  WeightedGraph out(community_count(membership));
  for (std::uint32_t u = 0; u < g.node_count(); ++u) {
    const auto cu = membership[u];
    if (g.self_loop(u) > 0.0) out.add_edge(cu, cu, g.self_loop(u));
    for (const auto& [v, w] : g.neighbors(u)) {
      if (u < v) out.add_edge(cu, membership[v], w);
    }
  }
  return out;
}

Membership leiden_pass(const WeightedGraph& graph, Membership initial, const LeidenOptions& opt,
                       Rng& rng) {
  const std::size_t n0 = graph.node_count();
  std::vector<std::uint32_t> node_of(n0);
  std::iota(node_of.begin(), node_of.end(), 0U);

  WeightedGraph current = graph;
  Membership partition = std::move(initial);
  for (int level = 0; level < 64; ++level) {
    move_nodes(current, partition, opt.resolution, rng);
    partition = renumber(partition);
    const std::size_t k = community_count(partition);
    if (k == current.node_count()) break;

    Membership refined = refine(current, partition, opt.resolution, opt.randomness, rng);
    if (community_count(refined) == current.node_count()) refined = partition;

    Membership next_partition(community_count(refined));
    for (std::uint32_t v = 0; v < current.node_count(); ++v) {
      next_partition[refined[v]] = partition[v];
    }
    for (auto& node : node_of) node = refined[node];
    current = aggregate(current, refined);
    partition = std::move(next_partition);
  }
  Membership out(n0);
  for (std::uint32_t v = 0; v < n0; ++v) out[v] = partition[node_of[v]];
  return renumber(out);
}

}  // namespace

Membership leiden(const WeightedGraph& graph, const LeidenOptions& options) {
  const std::size_t n = graph.node_count();
  Membership membership(n);
  std::iota(membership.begin(), membership.end(), 0U);
  if (n == 0 || graph.total_weight() <= 0.0) return membership;

  Rng rng(options.seed);
  double best_q = modularity(graph, membership, options.resolution);
  for (int pass = 0; pass < std::max(1, options.max_passes); ++pass) {
    Membership next = leiden_pass(graph, membership, options, rng);
    const double q = modularity(graph, next, options.resolution);
    const bool improved = q > best_q + 1e-12;
    if (improved || pass == 0) {
      membership = std::move(next);
      best_q = std::max(best_q, q);
    }
    if (!improved) break;
  }
  return renumber(membership);
}

CommunityPartition subcluster(const WeightedGraph& graph, Membership level0,
                              const LeidenOptions& options, int max_depth, std::size_t min_size) {
  CommunityPartition out;
  out.levels.push_back(renumber(level0));
  // Communities still eligible for division, by id at the previous level.
  std::vector<char> open(community_count(out.levels[0]), 1);

  for (int depth = 1; depth <= max_depth; ++depth) {
    const Membership& parent = out.levels.back();
    std::vector<std::vector<std::uint32_t>> members(community_count(parent));
    for (std::uint32_t v = 0; v < parent.size(); ++v) members[parent[v]].push_back(v);

    Membership next(parent.size());
    std::vector<char> next_open;
    std::uint32_t next_id = 0;
    for (std::uint32_t c = 0; c < members.size(); ++c) {
      const auto& nodes = members[c];
      bool split = false;
      if (open[c] && nodes.size() >= min_size) {
        WeightedGraph sub = graph.induced(nodes);
        LeidenOptions local = options;
        local.seed = options.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(depth)) ^
                     (static_cast<std::uint64_t>(c) << 20);
        Membership inner = leiden(sub, local);
        const std::size_t k = community_count(inner);
        if (k >= 2) {
          split = true;
          for (std::size_t i = 0; i < nodes.size(); ++i) next[nodes[i]] = next_id + inner[i];
          next_id += static_cast<std::uint32_t>(k);
          next_open.insert(next_open.end(), k, 1);
        }
      }
      if (!split) {
        for (const auto v : nodes) next[v] = next_id;
        ++next_id;
        next_open.push_back(0);
      }
    }
    out.levels.push_back(std::move(next));
    open = std::move(next_open);
  }
  for (const auto& level : out.levels) {
    out.modularity.push_back(modularity(graph, level, options.resolution));
  }
  return out;
}

std::optional<std::uint32_t> GraphSnapshot::community_of(MemoryId id, std::size_t level) const {
  auto it = node_index.find(id);
  if (it == node_index.end() || level >= partition.levels.size()) return std::nullopt;
  return partition.levels[level][it->second];
}

nlohmann::json GraphSnapshot::to_json() const {
  using nlohmann::json;
  json nodes = json::array();
  for (const auto id : graph.nodes) nodes.push_back(to_u64(id));
  json edges = json::array();
  for (const auto& e : graph.edges) edges.push_back({to_u64(e.a), to_u64(e.b), e.weight});
  json levels = json::array();
  for (std::size_t l = 0; l < partition.levels.size(); ++l) {
    json assignment = json::object();
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
      assignment[to_string(graph.nodes[i])] = partition.levels[l][i];
    }
    levels.push_back({{"depth", l},
                      {"communities", community_count(partition.levels[l])},
                      {"modularity", partition.modularity[l]},
                      {"assignment", std::move(assignment)}});
  }
  return {{"nodes", std::move(nodes)},
          {"edges", std::move(edges)},
          {"levels", std::move(levels)},
          {"built_at", format_iso8601(graph.built_at)}};
}

GraphSnapshot build_snapshot(const std::vector<MemoryRecord>& memories, const GraphOptions& options,
                             Timestamp now) {
  if (memories.size() > kMaxGraphNodes) {
    throw Error(ErrorCode::CapExceeded, "graph construction is capped at " +
                                            std::to_string(kMaxGraphNodes) + " memories");
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<text::TermCounts> counts;
  counts.reserve(memories.size());
  text::TermStatistics stats;
  for (const auto& m : memories) {
    counts.push_back(text::count_terms(text::tokenize(m.content)));
    stats.add_document(counts.back());
  }
  std::vector<DocumentVector> docs;
  docs.reserve(memories.size());
  for (std::size_t i = 0; i < memories.size(); ++i) {
    docs.push_back({memories[i].id, text::tfidf_vector(counts[i], stats)});
  }

  GraphSnapshot snap;
  snap.graph = build_edges(std::move(docs), options.edge_threshold);
  snap.graph.built_at = now;
  for (std::uint32_t i = 0; i < snap.graph.nodes.size(); ++i) {
    snap.node_index.emplace(snap.graph.nodes[i], i);
  }
  const WeightedGraph weighted = to_weighted(snap.graph);
  snap.partition = subcluster(weighted, leiden(weighted, options.leiden), options.leiden,
                              options.max_depth, options.min_subcluster_size);
  snap.stats.nodes = snap.graph.nodes.size();
  snap.stats.edges = snap.graph.edges.size();
  for (const auto& level : snap.partition.levels) {
    snap.stats.communities_per_level.push_back(community_count(level));
  }
  snap.stats.build_duration = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - start);
  return snap;
}

std::shared_ptr<const GraphSnapshot> KnowledgeGraph::rebuild(
    const std::vector<MemoryRecord>& memories, Timestamp now) {
  auto snap = std::make_shared<const GraphSnapshot>(build_snapshot(memories, options_, now));
  std::lock_guard lock(mu_);
  current_ = snap;
  return snap;
}

std::shared_ptr<const GraphSnapshot> KnowledgeGraph::snapshot() const {
  std::lock_guard lock(mu_);
  return current_;
}

}  // namespace agentmem::graph
