#include <nlohmann/json.hpp>

#include "agentmem/memory_json.hpp"
#include "agentmem/memory_store.hpp"
#include "sqlite_db.hpp"

namespace agentmem {

namespace {

using detail::Database;
using nlohmann::json;

constexpr int kSchemaVersion = 1;

class SqliteBackend final : public StorageBackend {
 public:
  explicit SqliteBackend(const std::filesystem::path& path)
      : db_(path, detail::Durability::Full) {
    db_.exec(
        "CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value INTEGER NOT NULL);"
        "CREATE TABLE IF NOT EXISTS memories ("
        " id INTEGER PRIMARY KEY,"
        " content TEXT NOT NULL,"
        " tags TEXT NOT NULL,"
        " importance INTEGER NOT NULL,"
        " created_at INTEGER NOT NULL,"
        " updated_at INTEGER NOT NULL,"
        " parent_id INTEGER,"
        " path TEXT NOT NULL,"
        " entity_vector TEXT,"
        " provenance TEXT NOT NULL,"
        " deleted INTEGER NOT NULL DEFAULT 0);");
    auto check = db_.prepare("SELECT value FROM meta WHERE key = 'schema_version'");
    if (check.step()) {
      if (check.column_int(0) != kSchemaVersion) {
        throw Error(ErrorCode::SchemaMismatch, "unsupported memory store schema version");
      }
    } else {
      db_.prepare("INSERT INTO meta(key, value) VALUES('schema_version', ?)")
          .bind(1, std::int64_t{kSchemaVersion})
          .exec();
    }
  }

  std::vector<MemoryRecord> load_all() override {
    std::vector<MemoryRecord> out;
    auto st = db_.prepare(
        "SELECT id, content, tags, importance, created_at, updated_at, parent_id, path,"
        " entity_vector, provenance, deleted FROM memories ORDER BY id");
    while (st.step()) {
      MemoryRecord r;
      r.id = make_id(static_cast<std::uint64_t>(st.column_int(0)));
      r.content = st.column_text(1);
      for (const auto& t : json::parse(st.column_text(2))) r.tags.insert(t.get<std::string>());
      r.importance = static_cast<int>(st.column_int(3));
      r.created_at = from_epoch_ms(st.column_int(4));
      r.updated_at = from_epoch_ms(st.column_int(5));
      if (!st.column_is_null(6)) r.parent_id = make_id(static_cast<std::uint64_t>(st.column_int(6)));
      r.path = st.column_text(7);
      if (!st.column_is_null(8)) {
        for (const auto& [term, w] : json::parse(st.column_text(8)).items()) {
          r.entity_vector[term] = w.get<double>();
        }
      }
      r.provenance = provenance_from_json(json::parse(st.column_text(9)));
      r.deleted = st.column_int(10) != 0;
      out.push_back(std::move(r));
    }
    return out;
  }

  std::uint64_t load_next_id() override {
    auto st = db_.prepare(
        "SELECT MAX(COALESCE((SELECT value FROM meta WHERE key = 'next_id'), 1),"
        " COALESCE((SELECT MAX(id) + 1 FROM memories), 1))");
    st.step();
    return static_cast<std::uint64_t>(st.column_int(0));
  }

  void begin() override { db_.exec("BEGIN IMMEDIATE"); }
  void commit() override { db_.exec("COMMIT"); }
  void rollback() override { db_.exec("ROLLBACK"); }
  void savepoint() override { db_.exec("SAVEPOINT job"); }
  void release_savepoint() override { db_.exec("RELEASE SAVEPOINT job"); }
  void rollback_to_savepoint() override {
    db_.exec("ROLLBACK TO SAVEPOINT job");
    db_.exec("RELEASE SAVEPOINT job");
  }

  void upsert(const MemoryRecord& r) override {
    if (!upsert_) {
      upsert_.emplace(db_.prepare(
          "INSERT OR REPLACE INTO memories (id, content, tags, importance, created_at,"
          " updated_at, parent_id, path, entity_vector, provenance, deleted)"
          " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)"));
    }
    auto& st = *upsert_;
    st.reset();
    json tags = json::array();
    for (const auto& t : r.tags) tags.push_back(t);
    st.bind(1, static_cast<std::int64_t>(to_u64(r.id)))
        .bind(2, std::string_view(r.content))
        .bind(3, std::string_view(tags.dump()))
        .bind(4, std::int64_t{r.importance})
        .bind(5, to_epoch_ms(r.created_at))
        .bind(6, to_epoch_ms(r.updated_at));
    if (r.parent_id) {
      st.bind(7, static_cast<std::int64_t>(to_u64(*r.parent_id)));
    } else {
      st.bind_null(7);
    }
    st.bind(8, std::string_view(r.path));
    if (r.entity_vector.empty()) {
      st.bind_null(9);
    } else {
      json ev = json::object();
      for (const auto& [term, w] : r.entity_vector) ev[term] = w;
      st.bind(9, std::string_view(ev.dump()));
    }
    st.bind(10, std::string_view(to_json(r.provenance).dump()))
        .bind(11, std::int64_t{r.deleted ? 1 : 0});
    st.exec();
  }

  void purge(MemoryId id) override {
    db_.prepare("DELETE FROM memories WHERE id = ?")
        .bind(1, static_cast<std::int64_t>(to_u64(id)))
        .exec();
  }

  void store_next_id(std::uint64_t next) override {
    db_.prepare("INSERT OR REPLACE INTO meta(key, value) VALUES('next_id', ?)")
        .bind(1, static_cast<std::int64_t>(next))
        .exec();
  }

  std::filesystem::path location() const override { return db_.path(); }

 private:
  Database db_;
  std::optional<detail::Statement> upsert_;
};

}  // namespace

std::unique_ptr<StorageBackend> make_sqlite_backend(const std::filesystem::path& path) {
  return std::make_unique<SqliteBackend>(path);
}

}  // namespace agentmem
