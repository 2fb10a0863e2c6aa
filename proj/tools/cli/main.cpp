// agentmem command-line front end.

#include <pthread.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "agentmem/engine.hpp"
#include "agentmem/memory_json.hpp"
#include "harness.hpp"
#include "service.hpp"

namespace {

using namespace agentmem;
using nlohmann::json;

constexpr int kUsageError = 1;
constexpr int kOperationError = 2;

struct Globals {
  std::string config_file;
  std::string db;
  std::string agent = "cli";
  bool json = false;
};

Config load_config(const Globals& g) {
  Config c = g.config_file.empty() ? Config{} : Config::from_file(g.config_file);
  c.apply_environment();
  if (!g.db.empty()) c.memory_db = g.db;
  return c;
}

std::string one_line(const std::string& s, std::size_t n = 60) {
  std::string out;
  for (const char ch : s) out += ch == '\n' ? ' ' : ch;
  if (out.size() > n) out = out.substr(0, n - 3) + "...";
  return out;
}

std::string join(const std::set<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::set<std::string> split_csv(const std::string& csv) {
  std::set<std::string> out;
  std::stringstream ss(csv);
  std::string t;
  while (std::getline(ss, t, ',')) {
    if (!t.empty()) out.insert(t);
  }
  return out;
}

void print_record(const MemoryRecord& r) {
  std::cout << "id:         " << to_u64(r.id) << "\n"
            << "path:       " << r.path << "\n"
            << "importance: " << r.importance << "\n"
            << "tags:       " << join(r.tags) << "\n"
            << "created:    " << format_iso8601(r.created_at) << " by " << r.provenance.created_by
            << " via " << to_string(r.provenance.source_protocol) << ", trust "
            << r.provenance.trust_at_write << "\n"
            << "content:    " << r.content << "\n"
            << "provenance:\n";
  for (const auto& e : r.provenance.chain) {
    std::cout << "  " << format_iso8601(e.timestamp) << "  " << to_string(e.action) << "  " << e.agent;
    if (e.note) std::cout << "  (" << *e.note << ")";
    std::cout << "\n";
  }
}

void print_records(const std::vector<MemoryRecord>& records, bool as_json) {
  if (as_json) {
    json out = json::array();
    for (const auto& r : records) out.push_back(to_json(r));
    std::cout << out.dump(2) << "\n";
    return;
  }
  for (const auto& r : records) {
    std::cout << to_u64(r.id) << "\t" << r.path << "\t" << one_line(r.content) << "\n";
  }
}

sigset_t stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  return set;
}

/// Must run before any thread starts so every thread inherits the mask.
void block_stop_signals() {
  // a shell may start background jobs with SIGINT ignored; sigwait never sees those
  std::signal(SIGINT, SIG_DFL);
  std::signal(SIGTERM, SIG_DFL);
  const sigset_t set = stop_signals();
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

/// Routes SIGINT/SIGTERM to `on_signal`, called once from a watcher thread.
/// Requires block_stop_signals().
class SignalWatcher {
 public:
  explicit SignalWatcher(std::function<void()> on_signal) : set_(stop_signals()) {
    thread_ = std::thread([this, on_signal = std::move(on_signal)] {
      int sig = 0;
      sigwait(&set_, &sig);
      if (!released_) on_signal();
    });
  }
  ~SignalWatcher() {
    released_ = true;
    pthread_kill(thread_.native_handle(), SIGTERM);  // still blocked, so this only wakes sigwait
    thread_.join();
  }

 private:
  sigset_t set_{};
  std::atomic<bool> released_{false};
  std::thread thread_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local memory engine for cooperating agents", "agentmem"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "Config file (key=value or JSON)")->check(CLI::ExistingFile);
  app.add_option("--db", g.db, "Memory store path (overrides db.path)");
  app.add_option("--agent", g.agent, "Agent identity for this invocation");
  app.add_flag("--json", g.json, "JSON output");

  std::function<int(Engine&)> action;       // needs an engine
  std::function<int()> standalone;          // does not
  bool long_running = false;

  // remember
  auto* remember = app.add_subcommand("remember", "Store a memory");
  std::string content, tags;
  int importance = 5;
  std::uint64_t parent = 0;
  remember->add_option("content", content, "Memory text")->required();
  remember->add_option("--tags", tags, "Comma-separated tags");
  remember->add_option("--importance", importance, "1..10")->check(CLI::Range(1, 10));
  remember->add_option("--parent", parent, "Parent memory id");
  remember->callback([&] {
    action = [&](Engine& e) {
      RememberRequest r{content, split_csv(tags), importance, std::nullopt};
      if (parent) r.parent = make_id(parent);
      const auto id = e.remember(r, {g.agent, Protocol::CLI});
      if (g.json) {
        std::cout << json{{"id", to_u64(id)}}.dump() << "\n";
      } else {
        std::cout << to_u64(id) << "\n";
      }
      return 0;
    };
  });

  // recall
  auto* recall = app.add_subcommand("recall", "Search memories");
  std::string query, project, cluster;
  std::vector<std::string> paths, recent_tags;
  std::size_t limit = 10;
  recall->add_option("query", query, "Query text")->required();
  recall->add_option("-n,--limit", limit, "Maximum results");
  recall->add_option("--path", paths, "Active file path (repeatable)");
  recall->add_option("--tag", recent_tags, "Recent tag (repeatable)");
  recall->add_option("--cluster", cluster, "Cluster hint");
  recall->add_option("--project", project, "Explicit project label");
  recall->callback([&] {
    action = [&](Engine& e) {
      search::SearchRequest r{query, limit, {}};
      r.context.active_paths = paths;
      r.context.recent_tags = recent_tags;
      if (!cluster.empty()) r.context.cluster_hint = cluster;
      if (!project.empty()) r.context.explicit_label = project;
      const auto result = e.recall(r, {g.agent, Protocol::CLI});
      if (g.json) {
        std::cout << json{{"phase", result.phase}, {"hits", service::hits_to_json(result)}}.dump(2) << "\n";
        return 0;
      }
      std::cout << "phase " << result.phase << ", " << result.hits.size() << " result(s)\n";
      for (std::size_t i = 0; i < result.hits.size(); ++i) {
        const auto& h = result.hits[i];
        char score[32];
        std::snprintf(score, sizeof score, "%.4f", h.score);
        std::cout << (i + 1) << ".\t[" << to_u64(h.record.id) << "]\t" << score << "\t"
                  << one_line(h.record.content) << "\n";
      }
      return 0;
    };
  });

  // get / delete / tree
  std::uint64_t id_arg = 0;
  auto* get = app.add_subcommand("get", "Show one memory");
  get->add_option("id", id_arg, "Memory id")->required();
  get->callback([&] {
    action = [&](Engine& e) {
      const auto r = e.get(make_id(id_arg));
      if (g.json) {
        std::cout << to_json(r).dump(2) << "\n";
      } else {
        print_record(r);
      }
      return 0;
    };
  });
  auto* del = app.add_subcommand("delete", "Delete a memory and its descendants");
  del->add_option("id", id_arg, "Memory id")->required();
  del->callback([&] {
    action = [&](Engine& e) {
      e.remove(make_id(id_arg), {g.agent, Protocol::CLI});
      if (g.json) std::cout << json{{"deleted", id_arg}}.dump() << "\n";
      return 0;
    };
  });
  auto* tree = app.add_subcommand("tree", "List the live subtree under a memory");
  tree->add_option("id", id_arg, "Memory id")->required();
  tree->callback([&] {
    action = [&](Engine& e) {
      e.get(make_id(id_arg));
      print_records(e.subtree(make_id(id_arg)), g.json);
      return 0;
    };
  });

  // useful
  auto* useful = app.add_subcommand("useful", "Mark a memory as useful");
  std::string useful_query;
  bool query_given = false;
  useful->add_option("memory_id", id_arg, "Memory id")->required();
  useful->add_option("--query", useful_query, "Query the memory answered (default: its last recall)")
      ->each([&](const std::string&) { query_given = true; });
  useful->callback([&] {
    action = [&](Engine& e) {
      const auto id = make_id(id_arg);
      std::string q = useful_query;
      if (!query_given) q = e.last_query_for(id).value_or("");
      e.record_feedback(learning::Channel::CliUseful, id, q, AgentContext{g.agent, Protocol::CLI});
      if (g.json) {
        std::cout << json{{"recorded", true}, {"phase", e.phase()}, {"query", q}}.dump() << "\n";
      } else {
        std::cout << "recorded; phase " << e.phase() << "\n";
      }
      return 0;
    };
  });

  // learning
  auto* learning_cmd = app.add_subcommand("learning", "Learning store");
  learning_cmd->require_subcommand(1);
  auto* reset = learning_cmd->add_subcommand("reset", "Erase all learning data");
  reset->callback([&] {
    action = [&](Engine& e) {
      e.reset_learning();
      if (g.json) {
        std::cout << json{{"reset", true}, {"phase", e.phase()}}.dump() << "\n";
      } else {
        std::cout << "learning data erased; phase " << e.phase() << "\n";
      }
      return 0;
    };
  });
  auto* train = learning_cmd->add_subcommand("train", "Train the learned ranker");
  train->callback([&] {
    action = [&](Engine& e) {
      const auto report = e.train();
      json out = {{"trees", report.trees},
                  {"synthetic", report.metadata.synthetic},
                  {"queries", report.metadata.queries},
                  {"signals", report.metadata.signals},
                  {"train_ndcg5", report.metadata.train_ndcg5}};
      std::cout << (g.json ? out.dump() : out.dump(2)) << "\n";
      return 0;
    };
  });

  // patterns / agents / status
  auto* patterns_cmd = app.add_subcommand("patterns", "Learned patterns and preferences");
  patterns_cmd->callback([&] {
    action = [&](Engine& e) {
      const auto p = e.patterns();
      if (g.json) {
        std::cout << p.dump(2) << "\n";
        return 0;
      }
      std::cout << "phase " << p["phase"] << ", " << p["signals"] << " signal(s), " << p["unique_queries"]
                << " unique quer(ies)\npreferences:\n";
      for (const auto& [k, v] : p["preferences"].items()) std::cout << "  " << k << "\t" << v << "\n";
      std::cout << "workflows:\n";
      for (const auto& w : p["workflows"]) std::cout << "  " << w["sequence"].dump() << "\t" << w["support"] << "\n";
      return 0;
    };
  });
  auto* agents_cmd = app.add_subcommand("agents", "Known agents");
  agents_cmd->callback([&] {
    action = [&](Engine& e) {
      json out = json::array();
      for (const auto& p : e.agents()) {
        auto j = events::to_json(p);
        j["trust"] = e.trust_engine().known(p.id) ? e.trust_engine().trust(p.id) : 0.0;
        out.push_back(std::move(j));
      }
      if (g.json) {
        std::cout << out.dump(2) << "\n";
        return 0;
      }
      for (const auto& a : out) {
        std::cout << a["id"].get<std::string>() << "\t" << a["protocol"].get<std::string>() << "\twrites "
                  << a["write_count"] << "\trecalls " << a["recall_count"] << "\ttrust " << a["trust"] << "\n";
      }
      return 0;
    };
  });
  auto* status = app.add_subcommand("status", "Engine summary");
  status->callback([&] {
    action = [&](Engine& e) {
      std::cout << e.status().dump(2) << "\n";
      return 0;
    };
  });

  // trust
  auto* flag = app.add_subcommand("flag", "Flag a memory's content as poisoned");
  flag->add_option("id", id_arg, "Memory id")->required();
  flag->callback([&] {
    action = [&](Engine& e) {
      const auto s = e.flag(make_id(id_arg), {g.agent, Protocol::CLI});
      std::cout << trust::to_json(s, e.config().trust.mode).dump(g.json ? -1 : 2) << "\n";
      return 0;
    };
  });
  auto* signal_cmd = app.add_subcommand("signal", "Record a trust signal");
  std::string target, kind;
  signal_cmd->add_option("agent", target, "Agent id")->required();
  signal_cmd->add_option("kind", kind, "Signal name")->required();
  signal_cmd->callback([&] {
    action = [&](Engine& e) {
      const auto k = trust::parse_signal(kind);
      if (!k) throw Error(ErrorCode::InvalidArgument, "unknown signal '" + kind + "'");
      const auto s = e.signal(target, *k);
      std::cout << trust::to_json(s, e.config().trust.mode).dump(g.json ? -1 : 2) << "\n";
      return 0;
    };
  });
  auto* trust_cmd = app.add_subcommand("trust", "Show an agent's trust");
  trust_cmd->add_option("agent", target, "Agent id")->required();
  trust_cmd->callback([&] {
    action = [&](Engine& e) {
      std::cout << e.trust_json(target).dump(g.json ? -1 : 2) << "\n";
      return 0;
    };
  });
  auto* isolate = app.add_subcommand("isolate", "Memories an agent wrote or modified");
  isolate->add_option("agent", target, "Agent id")->required();
  isolate->callback([&] {
    action = [&](Engine& e) {
      std::vector<MemoryRecord> records;
      for (const auto id : e.isolate(target)) records.push_back(e.get(id));
      print_records(records, g.json);
      return 0;
    };
  });

  // graph
  auto* graph_cmd = app.add_subcommand("graph", "Knowledge graph");
  graph_cmd->require_subcommand(1);
  auto* rebuild = graph_cmd->add_subcommand("rebuild", "Rebuild the similarity graph and communities");
  rebuild->callback([&] {
    action = [&](Engine& e) {
      const auto st = e.rebuild_graph();
      json out = {{"nodes", st.nodes},
                  {"edges", st.edges},
                  {"communities_per_level", st.communities_per_level},
                  {"build_ms", static_cast<double>(st.build_duration.count()) / 1000.0}};
      if (g.json) {
        std::cout << out.dump() << "\n";
      } else {
        std::cout << st.nodes << " nodes, " << st.edges << " edges, communities per level "
                  << out["communities_per_level"].dump() << ", " << out["build_ms"] << " ms\n";
      }
      return 0;
    };
  });

  // events
  auto* events_cmd = app.add_subcommand("events", "Coordination events");
  events_cmd->require_subcommand(1);
  auto* tail = events_cmd->add_subcommand("tail", "Recent events");
  std::size_t tail_limit = 20;
  bool follow = false;
  tail->add_option("-n,--limit", tail_limit, "Number of events");
  tail->add_flag("-f,--follow", follow, "Keep streaming new events");
  tail->callback([&] {
    long_running = follow;
    action = [&](Engine& e) {
      auto print = [&](const events::Event& ev, std::string_view tier) {
        if (g.json) {
          auto j = events::to_json(ev);
          j["tier"] = tier;
          std::cout << j.dump() << "\n";
        } else {
          std::cout << ev.seq << "\t" << format_iso8601(ev.timestamp) << "\t" << events::to_string(ev.type)
                    << "\t" << ev.agent.value_or("-") << "\t" << ev.payload.dump() << "\n";
        }
      };
      std::uint64_t last = 0;
      for (const auto& s : e.tail_events(tail_limit)) {
        print(s.event, events::to_string(s.tier));
        last = std::max(last, s.event.seq);
      }
      if (!follow) return 0;
      std::cout << std::flush;
      std::atomic<bool> stop{false};
      SignalWatcher watcher([&] { stop = true; });
      while (!stop) {
        e.flush();
        const auto batch = e.events_after(last, 256);
        for (const auto& s : batch) {
          print(s.event, events::to_string(s.tier));
          last = s.event.seq;
        }
        std::cout << std::flush;
        if (batch.empty()) std::this_thread::sleep_for(std::chrono::milliseconds(250));
      }
      return 0;
    };
  });
  auto* sweep = events_cmd->add_subcommand("sweep", "Apply retention tiers now");
  sweep->callback([&] {
    action = [&](Engine& e) {
      const auto r = e.sweep();
      std::cout << json{{"demoted", r.demoted}, {"pruned", r.pruned}, {"aggregated", r.aggregated}}.dump()
                << "\n";
      return 0;
    };
  });

  // export / import
  std::string file;
  auto* exp = app.add_subcommand("export", "Write all memories to a JSON file");
  exp->add_option("file", file, "Destination")->required();
  exp->callback([&] {
    action = [&](Engine& e) {
      const auto n = e.export_json(file);
      std::cout << (g.json ? json{{"exported", n}}.dump() : std::to_string(n) + " memories exported") << "\n";
      return 0;
    };
  });
  auto* imp = app.add_subcommand("import", "Load memories from an export file");
  imp->add_option("file", file, "Source")->required()->check(CLI::ExistingFile);
  imp->callback([&] {
    action = [&](Engine& e) {
      const auto n = e.import_json(file);
      std::cout << (g.json ? json{{"imported", n}}.dump() : std::to_string(n) + " memories imported") << "\n";
      return 0;
    };
  });

  // serve / rpc
  auto* serve = app.add_subcommand("serve", "Run the REST + SSE service");
  std::string host;
  int port = -1;
  serve->add_option("--host", host, "Bind address (default from config)");
  serve->add_option("--port", port, "Port, 0 for any free port (default from config)")->check(CLI::Range(0, 65535));
  serve->callback([&] {
    long_running = true;
    action = [&](Engine& e) {
      service::RestServer server(e);
      const auto& cfg = e.config();
      const int bound = server.bind(host.empty() ? cfg.host : host, port < 0 ? cfg.port : port);
      std::cerr << "listening on " << (host.empty() ? cfg.host : host) << ":" << bound << std::endl;
      SignalWatcher watcher([&] { server.stop(); });
      server.serve();
      return 0;
    };
  });
  auto* rpc = app.add_subcommand("rpc", "JSON-RPC 2.0 over stdin/stdout, one request per line");
  rpc->callback([&] {
    action = [&](Engine& e) {
      service::RpcSession session(e);
      session.run(std::cin, std::cout);
      return 0;
    };
  });

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark suite");
  std::string suite, json_out;
  bench::SuiteOptions bench_options;
  bench_cmd->add_option("suite", suite, "latency|concurrency|graph|ablation|trust|all")
      ->required()
      ->check(CLI::IsMember({"latency", "concurrency", "graph", "ablation", "trust", "all"}));
  bench_cmd->add_option("--json", json_out, "Also write the JSON report here");
  bench_cmd->add_option("--seed", bench_options.seed, "RNG seed");
  bench_cmd->add_option("--runs", bench_options.runs, "Timed runs per size")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--warmup", bench_options.warmup, "Warmup runs per size");
  bench_cmd->add_flag("--large", bench_options.large, "Include the 5,000-memory graph build");
  bench_cmd->add_option("--workdir", bench_options.workdir, "Scratch directory parent");
  bench_cmd->callback([&] {
    standalone = [&] {
      auto [report, text] = bench::run_suite(suite, bench_options);
      if (!json_out.empty()) {
        std::ofstream out(json_out);
        if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + json_out);
        out << report.dump(2) << "\n";
      }
      std::cout << (g.json ? report.dump(2) + "\n" : text);
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (standalone) return standalone();
    if (!action) return kUsageError;
    if (long_running) block_stop_signals();
    Engine engine(load_config(g));
    return action(engine);
  } catch (const Error& e) {
    std::cerr << "agentmem: " << e.what() << "\n";
    return kOperationError;
  } catch (const std::exception& e) {
    std::cerr << "agentmem: " << e.what() << "\n";
    return kOperationError;
  }
}
