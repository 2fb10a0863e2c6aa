#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "agentmem/memory_store.hpp"
#include "test_support.hpp"

namespace agentmem {
namespace {

using testing::TempDir;

std::unique_ptr<MemoryStore> open_store(const std::filesystem::path& path,
                                        std::shared_ptr<const Clock> clock = std::make_shared<SystemClock>()) {
  return std::make_unique<MemoryStore>(make_sqlite_backend(path), std::move(clock));
}

NewMemory note(std::string content, std::optional<MemoryId> parent = std::nullopt) {
  NewMemory m;
  m.content = std::move(content);
  m.parent = parent;
  m.agent = {"claude", Protocol::MCP};
  return m;
}

TEST(MemoryStore, RememberCreatesRootRecordWithOneProvenanceEntry) {
  auto store = open_store(":memory:");
  NewMemory m = note("FastAPI chosen for API layer");
  m.tags = {"api", "decision"};
  m.importance = 8;
  const auto id = store->remember(m);
  const auto r = store->get(id);
  EXPECT_EQ(r.path, std::to_string(to_u64(id)));
  EXPECT_EQ(r.importance, 8);
  EXPECT_EQ(r.tags, (std::set<std::string>{"api", "decision"}));
  ASSERT_EQ(r.provenance.chain.size(), 1u);
  EXPECT_EQ(r.provenance.chain[0].action, ProvenanceAction::Create);
  EXPECT_EQ(r.provenance.created_by, "claude");
  EXPECT_EQ(r.provenance.source_protocol, Protocol::MCP);
}

TEST(MemoryStore, ChildPathExtendsParentPath) {
  auto store = open_store(":memory:");
  const auto p = store->remember(note("parent"));
  const auto c = store->remember(note("child", p));
  EXPECT_EQ(store->get(c).path, store->get(p).path + "/" + std::to_string(to_u64(c)));
  EXPECT_EQ(store->get(c).parent_id, p);
}

TEST(MemoryStore, RejectsBadImportanceAndUnknownParent) {
  auto store = open_store(":memory:");
  NewMemory m = note("x");
  m.importance = 11;
  try {
    store->remember(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidImportance);
  }
  try {
    store->remember(note("y", make_id(99)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownParent);
  }
  EXPECT_EQ(store->live_count(), 0u);
}

TEST(MemoryStore, GetUnknownOrDeletedIsNotFound) {
  auto store = open_store(":memory:");
  const auto id = store->remember(note("to delete"));
  EXPECT_EQ(store->get(id).content, "to delete");
  EXPECT_THROW(store->get(make_id(1234)), Error);
  store->remove(id, "claude");
  try {
    store->get(id);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
  // Double delete.
  try {
    store->remove(id, "claude");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
}

TEST(MemoryStore, DeleteAppendsRequestBeforeTombstoneAndCascades) {
  auto store = open_store(":memory:");
  const auto a = store->remember(note("a"));
  const auto b = store->remember(note("b", a));
  store->remove(a, "gpt");
  for (const auto id : {a, b}) {
    const auto r = store->find_any(id);
    ASSERT_TRUE(r);
    EXPECT_TRUE(r->deleted);
    EXPECT_EQ(r->provenance.chain.back().action, ProvenanceAction::DeleteRequest);
    EXPECT_EQ(r->provenance.chain.back().agent, "gpt");
  }
  EXPECT_EQ(store->compact(), 2u);
  EXPECT_FALSE(store->find_any(a));
}

TEST(MemoryStore, UpdateAppendsExactlyOneEntry) {
  auto store = open_store(":memory:");
  const auto id = store->remember(note("v1"));
  MemoryPatch patch;
  patch.content = "v2";
  const auto r = store->update(id, patch, "gemini");
  EXPECT_EQ(r.content, "v2");
  ASSERT_EQ(r.provenance.chain.size(), 2u);
  EXPECT_EQ(r.provenance.chain[1].action, ProvenanceAction::Update);
  EXPECT_EQ(r.provenance.chain[1].agent, "gemini");
}

TEST(MemoryStore, ChildrenAndParentLookup) {
  auto store = open_store(":memory:");
  const auto root = store->remember(note("root"));
  std::vector<MemoryId> kids;
  for (int i = 0; i < 3; ++i) kids.push_back(store->remember(note("kid", root)));
  const auto grandchild = store->remember(note("grandchild", kids[0]));
  EXPECT_EQ(store->children(root).size(), 3u);
  EXPECT_TRUE(store->children(grandchild).empty());
  EXPECT_FALSE(store->parent_of(root));
  EXPECT_EQ(store->parent_of(kids[1])->id, root);
  EXPECT_EQ(store->parent_of(grandchild)->id, kids[0]);
}

// Oracle: naive recursive walk over children().
void walk(const MemoryStore& store, MemoryId id, std::set<MemoryId>& out) {
  for (const auto& c : store.children(id)) {
    out.insert(c.id);
    walk(store, c.id, out);
  }
}

TEST(MemoryStore, SubtreeMatchesRecursiveWalk) {
  auto store = open_store(":memory:");
  const auto a = store->remember(note("A"));
  const auto b = store->remember(note("B", a));
  const auto c = store->remember(note("C", b));
  std::set<MemoryId> got;
  for (const auto& r : store->subtree(a)) got.insert(r.id);
  EXPECT_EQ(got, (std::set<MemoryId>{b, c}));

  // A wider random tree, including ids whose decimal forms share prefixes (1 vs 10..19).
  std::mt19937 rng(7);
  std::vector<MemoryId> ids{a, b, c};
  for (int i = 0; i < 60; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    ids.push_back(store->remember(note("n" + std::to_string(i), ids[pick(rng)])));
  }
  for (const auto id : ids) {
    std::set<MemoryId> expected;
    walk(*store, id, expected);
    std::set<MemoryId> actual;
    for (const auto& r : store->subtree(id)) actual.insert(r.id);
    EXPECT_EQ(actual, expected) << "subtree of " << to_u64(id);
  }
}

TEST(MemoryStore, ExportImportRoundTripIsLossless) {
  TempDir dir;
  std::vector<MemoryRecord> before;
  {
    auto store = open_store(dir / "src.db");
    std::mt19937 rng(3);
    std::vector<MemoryId> ids;
    for (int i = 0; i < 100; ++i) {
      NewMemory m = note("memory number " + std::to_string(i));
      m.tags = {"t" + std::to_string(i % 7)};
      m.importance = 1 + i % 10;
      m.entity_vector = {{"memory", 0.5}, {"number", 0.25}};
      if (!ids.empty() && i % 3 == 0) m.parent = ids[rng() % ids.size()];
      ids.push_back(store->remember(m));
    }
    MemoryPatch patch;
    patch.note = "reviewed";
    store->update(ids[5], patch, "auditor");
    store->remove(ids[7], "auditor");
    EXPECT_EQ(store->export_json(dir / "export.json"), 100u);
    before = store->all_records();
  }
  auto target = open_store(dir / "dst.db");
  EXPECT_EQ(target->import_json(dir / "export.json"), 100u);
  auto after = target->all_records();
  auto by_id = [](const MemoryRecord& x, const MemoryRecord& y) { return x.id < y.id; };
  std::sort(before.begin(), before.end(), by_id);
  std::sort(after.begin(), after.end(), by_id);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i].id, after[i].id);
    EXPECT_EQ(before[i].content, after[i].content);
    EXPECT_EQ(before[i].tags, after[i].tags);
    EXPECT_EQ(before[i].importance, after[i].importance);
    EXPECT_EQ(before[i].created_at, after[i].created_at);
    EXPECT_EQ(before[i].updated_at, after[i].updated_at);
    EXPECT_EQ(before[i].parent_id, after[i].parent_id);
    EXPECT_EQ(before[i].path, after[i].path);
    EXPECT_EQ(before[i].entity_vector, after[i].entity_vector);
    EXPECT_EQ(before[i].provenance, after[i].provenance);
    EXPECT_EQ(before[i].deleted, after[i].deleted);
  }
  // New ids continue after the imported ones.
  EXPECT_GT(to_u64(target->remember(note("fresh"))), 100u);
}

TEST(MemoryStore, ExportOfEmptyStoreAndCorruptImport) {
  TempDir dir;
  auto store = open_store(":memory:");
  EXPECT_EQ(store->export_json(dir / "empty.json"), 0u);
  EXPECT_EQ(store->import_json(dir / "empty.json"), 0u);
  std::ofstream(dir / "bad.json") << "{\"version\": 1, \"memories\": [{\"id\": \"x\"}]}";
  try {
    store->import_json(dir / "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaMismatch);
  }
  std::ofstream(dir / "garbage.json") << "not json at all";
  EXPECT_THROW(store->import_json(dir / "garbage.json"), Error);
}

TEST(MemoryStore, ConcurrentWritersAndDeletesLoseNothing) {
  TempDir dir;
  constexpr int kWriters = 10;
  constexpr int kOps = 200;
  std::atomic<int> errors{0};
  std::atomic<int> deletes{0};
  {
    auto store = open_store(dir / "c.db");
    std::vector<std::thread> threads;
    for (int w = 0; w < kWriters; ++w) {
      threads.emplace_back([&, w] {
        std::vector<MemoryId> mine;
        for (int i = 0; i < kOps; ++i) {
          try {
            if (i % 10 == 9 && !mine.empty()) {
              store->remove(mine.back(), "w" + std::to_string(w));
              mine.pop_back();
              ++deletes;
            } else {
              NewMemory m = note("writer " + std::to_string(w) + " op " + std::to_string(i));
              mine.push_back(store->remember(m));
            }
          } catch (...) {
            ++errors;
          }
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  EXPECT_EQ(errors.load(), 0);
  auto reopened = open_store(dir / "c.db");
  EXPECT_EQ(reopened->live_count(), static_cast<std::size_t>(kWriters * kOps - 2 * deletes.load()));
}

TEST(MemoryStore, AcknowledgedWritesSurviveSigkill) {
  TempDir dir;
  const auto db = dir / "durable.db";
  int fds[2];
  ASSERT_EQ(::pipe(fds), 0);
  const pid_t child = ::fork();
  ASSERT_GE(child, 0);
  if (child == 0) {
    ::close(fds[0]);
    auto store = open_store(db);
    for (int i = 0;; ++i) {
      const auto id = to_u64(store->remember(note("durable " + std::to_string(i))));
      if (::write(fds[1], &id, sizeof id) != sizeof id) ::_exit(1);
    }
  }
  ::close(fds[1]);
  std::vector<std::uint64_t> acked;
  std::uint64_t id = 0;
  while (acked.size() < 150 && ::read(fds[0], &id, sizeof id) == sizeof id) acked.push_back(id);
  ::kill(child, SIGKILL);
  int status = 0;
  ::waitpid(child, &status, 0);
  // Anything already in the pipe was acknowledged too.
  while (::read(fds[0], &id, sizeof id) == sizeof id) acked.push_back(id);
  ::close(fds[0]);
  ASSERT_TRUE(WIFSIGNALED(status));
  ASSERT_GE(acked.size(), 150u);

  auto store = open_store(db);
  for (const auto a : acked) {
    const auto r = store->find(make_id(a));
    ASSERT_TRUE(r) << "acknowledged id " << a << " lost";
    EXPECT_EQ(r->content.rfind("durable ", 0), 0u);
  }
}

TEST(MemoryStore, RememberManyKeepsInputOrder) {
  auto store = open_store(":memory:");
  std::vector<NewMemory> batch;
  for (int i = 0; i < 20; ++i) batch.push_back(note("batch " + std::to_string(i)));
  const auto ids = store->remember_many(batch);
  ASSERT_EQ(ids.size(), 20u);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    EXPECT_EQ(store->get(ids[i]).content, "batch " + std::to_string(i));
    if (i) {
      EXPECT_LT(ids[i - 1], ids[i]);
    }
  }
}

}  // namespace
}  // namespace agentmem
