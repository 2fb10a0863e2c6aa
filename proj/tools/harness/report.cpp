#include <cstdio>
#include <sstream>
#include <thread>

#include <sys/utsname.h>

#include "harness.hpp"

namespace agentmem::bench {

namespace {

constexpr std::string_view kCaveat =
    "Relevance grades are derived from the importance values the corpus generator assigned, "
    "and importance is also one of the re-ranker's inputs. NDCG gains therefore partly measure "
    "agreement with the grading rule, not independent judgments of relevance.";

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

std::string left(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string environment_note() {
  std::ostringstream out;
  utsname u{};
  if (::uname(&u) == 0) out << u.sysname << " " << u.release << " " << u.machine << ", ";
  out << std::thread::hardware_concurrency() << " hardware threads, ";
#if defined(__clang__)
  out << "clang " << __clang_major__ << "." << __clang_minor__;
#elif defined(__GNUC__)
  out << "gcc " << __GNUC__ << "." << __GNUC_MINOR__;
#endif
#ifdef NDEBUG
  out << ", optimized build";
#else
  out << ", debug build";
#endif
  return out.str();
}

nlohmann::json report_header(std::string_view suite, const SuiteOptions& options) {
  return {{"suite", suite},
          {"runs", options.runs},
          {"warmup", options.warmup},
          {"seed", options.seed},
          {"environment", environment_note()},
          {"caveat", kCaveat}};
}

nlohmann::json to_json(const LatencyReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) rows.push_back({{"memories", row.size}, {"ms", to_json(row.ms)}});
  return {{"rows", rows}, {"ratio_largest_to_smallest", r.ratio}};
}

nlohmann::json to_json(const std::vector<ConcurrencyRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"writers", r.writers},
                   {"ops_per_writer", r.ops_per_writer},
                   {"total_ops", r.writers * r.ops_per_writer},
                   {"errors", r.errors},
                   {"persisted", r.persisted},
                   {"seconds", r.seconds},
                   {"ops_per_sec", r.writes_per_sec},
                   {"median_ms", r.median_ms},
                   {"p95_ms", r.p95_ms}});
  }
  return {{"rows", out}};
}

nlohmann::json to_json(const std::vector<GraphRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"memories", r.size},
                   {"edges", r.edges},
                   {"communities_per_level", r.communities},
                   {"modularity", r.modularity},
                   {"ari_vs_topics", r.ari},
                   {"build_ms", r.build_ms}});
  }
  return {{"rows", out}};
}

nlohmann::json to_json(const AblationReport& r) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& row : r.rows) {
    out.push_back({{"configuration", row.config},
                   {"stages", {{"tfidf", row.flags.tfidf}, {"graph", row.flags.graph}, {"adaptive", row.flags.adaptive}}},
                   {"phase", row.phase},
                   {"mrr", row.mrr},
                   {"ndcg5", row.ndcg5},
                   {"ndcg10", row.ndcg10},
                   {"recall5", row.recall5},
                   {"latency_ms", row.latency_ms}});
  }
  return {{"rows", out},
          {"signals", r.signals},
          {"ndcg5_relative_gain", r.ndcg_gain},
          {"mrr_delta", r.mrr_delta}};
}

nlohmann::json to_json(const std::vector<TrustScenarioRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"scenario", r.scenario},
                   {"benign_agents", r.benign_agents},
                   {"malicious_agents", r.malicious_agents},
                   {"benign_mean", r.benign_mean},
                   {"benign_min", r.benign_min},
                   {"malicious_mean", r.malicious_mean},
                   {"gap", r.gap},
                   {"false_positives", r.false_positives},
                   {"sleeper_peak", r.peak},
                   {"sleeper_degradation", r.degradation}});
  }
  return {{"rows", out}};
}

std::string format_latency(const LatencyReport& r) {
  std::ostringstream out;
  out << "Recall latency (ms)\n"
      << pad("memories", 9) << pad("median", 10) << pad("mean", 10) << pad("p95", 10)
      << pad("p99", 10) << pad("std", 10) << "\n";
  for (const auto& row : r.rows) {
    out << pad(std::to_string(row.size), 9) << pad(fixed(row.ms.median, 3), 10)
        << pad(fixed(row.ms.mean, 3), 10) << pad(fixed(row.ms.p95, 3), 10)
        << pad(fixed(row.ms.p99, 3), 10) << pad(fixed(row.ms.stddev, 3), 10) << "\n";
  }
  out << "median ratio largest/smallest: " << fixed(r.ratio, 2) << "\n";
  return out.str();
}

std::string format_concurrency(const std::vector<ConcurrencyRow>& rows) {
  std::ostringstream out;
  out << "Concurrent writes\n"
      << pad("writers", 8) << pad("ops/sec", 10) << pad("median ms", 11) << pad("p95 ms", 9)
      << pad("total", 7) << pad("errors", 8) << pad("persisted", 11) << "\n";
  for (const auto& r : rows) {
    out << pad(std::to_string(r.writers), 8) << pad(fixed(r.writes_per_sec, 1), 10)
        << pad(fixed(r.median_ms, 2), 11) << pad(fixed(r.p95_ms, 2), 9)
        << pad(std::to_string(r.writers * r.ops_per_writer), 7) << pad(std::to_string(r.errors), 8)
        << pad(std::to_string(r.persisted), 11) << "\n";
  }
  return out.str();
}

std::string format_graph(const std::vector<GraphRow>& rows) {
  std::ostringstream out;
  out << "Graph build\n"
      << pad("memories", 9) << pad("edges", 10) << pad("build s", 10) << pad("modularity", 12)
      << pad("ARI", 7) << "  communities per level\n";
  for (const auto& r : rows) {
    std::string levels;
    for (const auto c : r.communities) levels += (levels.empty() ? "" : " / ") + std::to_string(c);
    out << pad(std::to_string(r.size), 9) << pad(std::to_string(r.edges), 10)
        << pad(fixed(r.build_ms / 1000.0, 3), 10) << pad(fixed(r.modularity, 3), 12)
        << pad(fixed(r.ari, 3), 7) << "  " << levels << "\n";
  }
  return out.str();
}

std::string format_ablation(const AblationReport& r) {
  std::ostringstream out;
  out << "Stage ablation (" << r.signals << " feedback signals before the adaptive row)\n"
      << left("configuration", 22) << pad("phase", 6) << pad("MRR", 7) << pad("NDCG@5", 8)
      << pad("NDCG@10", 9) << pad("R@5", 7) << pad("ms", 8) << "\n";
  for (const auto& row : r.rows) {
    out << left(row.config, 22) << pad(std::to_string(row.phase), 6) << pad(fixed(row.mrr, 3), 7)
        << pad(fixed(row.ndcg5, 3), 8) << pad(fixed(row.ndcg10, 3), 9)
        << pad(fixed(row.recall5, 3), 7) << pad(fixed(row.latency_ms, 3), 8) << "\n";
  }
  out << "NDCG@5 relative gain: " << fixed(100.0 * r.ndcg_gain, 1) << "%, MRR delta "
      << fixed(r.mrr_delta, 3) << "\n";
  return out.str();
}

std::string format_trust(const std::vector<TrustScenarioRow>& rows) {
  std::ostringstream out;
  out << "Trust scenarios (posterior mean)\n"
      << left("scenario", 18) << pad("benign", 8) << pad("malicious", 11) << pad("gap", 7)
      << pad("FP", 4) << pad("degradation", 13) << "\n";
  for (const auto& r : rows) {
    const bool sleeper = r.peak > 0.0;
    const double benign = sleeper ? r.peak : r.benign_mean;
    out << left(r.scenario, 18) << pad(fixed(benign, 3), 8)
        << pad(r.malicious_agents ? fixed(r.malicious_mean, 3) : "-", 11) << pad(fixed(r.gap, 3), 7)
        << pad(std::to_string(r.false_positives), 4)
        << pad(sleeper ? fixed(100.0 * r.degradation, 1) + "%" : "-", 13) << "\n";
  }
  out << "(sleeper benign column is the mean pre-switch peak)\n";
  return out.str();
}

std::pair<nlohmann::json, std::string> run_suite(std::string_view suite, const SuiteOptions& options) {
  auto header = report_header(suite, options);
  std::string text = "== " + std::string(suite) + " ==\n" + environment_note() + "\n";
  if (suite == "latency") {
    const auto r = run_latency(options);
    header["results"] = to_json(r);
    text += format_latency(r);
  } else if (suite == "concurrency") {
    const auto r = run_concurrency(options);
    header["results"] = to_json(r);
    text += format_concurrency(r);
  } else if (suite == "graph") {
    const auto r = run_graph(options);
    header["results"] = to_json(r);
    text += format_graph(r);
  } else if (suite == "ablation") {
    const auto r = run_ablation(options);
    header["results"] = to_json(r);
    text += std::string(kCaveat) + "\n" + format_ablation(r);
  } else if (suite == "trust") {
    const auto r = run_trust(options);
    header["results"] = to_json(r);
    text += format_trust(r);
  } else if (suite == "all") {
    nlohmann::json all = nlohmann::json::object();
    text.clear();
    for (const auto* name : {"latency", "concurrency", "graph", "ablation", "trust"}) {
      auto [j, t] = run_suite(name, options);
      all[name] = std::move(j);
      text += t + "\n";
    }
    return {all, text};
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown bench suite '" + std::string(suite) + "'");
  }
  return {header, text};
}

}  // namespace agentmem::bench
