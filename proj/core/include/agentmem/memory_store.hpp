#pragma once
// Persistent memory records behind a single serialized writer.
//
// All mutations are queued and applied by one writer thread, which commits each
// drained batch in a single durable transaction (group commit) before any caller
// in the batch is acknowledged. Reads are served from an in-memory view that the
// writer swaps under a short exclusive section, so readers never wait on disk I/O.
// Records form a hierarchy through materialized paths ("1/5/9").

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "agentmem/common.hpp"

namespace agentmem {

enum class ProvenanceAction { Create, Update, DeleteRequest };

std::string_view to_string(ProvenanceAction a) noexcept;
std::optional<ProvenanceAction> parse_provenance_action(std::string_view text) noexcept;

struct ProvenanceEntry {
  std::string agent;
  ProvenanceAction action = ProvenanceAction::Create;
  Timestamp timestamp{};
  std::optional<std::string> note;

  friend bool operator==(const ProvenanceEntry&, const ProvenanceEntry&) = default;
};

struct ProvenanceBlock {
  std::string created_by;
  Protocol source_protocol = Protocol::CLI;
  double trust_at_write = 1.0;
  std::vector<ProvenanceEntry> chain;  // append-only, timestamp-ordered

  friend bool operator==(const ProvenanceBlock&, const ProvenanceBlock&) = default;
};

using TermWeights = std::map<std::string, double>;

struct MemoryRecord {
  MemoryId id{};
  std::string content;
  std::set<std::string> tags;
  int importance = 5;
  Timestamp created_at{};
  Timestamp updated_at{};
  std::optional<MemoryId> parent_id;
  std::string path;
  TermWeights entity_vector;
  ProvenanceBlock provenance;
  bool deleted = false;

  friend bool operator==(const MemoryRecord&, const MemoryRecord&) = default;
};

struct NewMemory {
  std::string content;
  std::set<std::string> tags;
  int importance = 5;
  std::optional<MemoryId> parent;
  AgentContext agent;
  double trust_at_write = 1.0;
  TermWeights entity_vector;
};

/// Field changes for update(); unset fields are left alone.
struct MemoryPatch {
  std::optional<std::string> content;
  std::optional<std::set<std::string>> tags;
  std::optional<int> importance;
  std::optional<std::string> note;
};

enum class MutationKind { Created, Updated, Deleted, Purged, Imported };

/// Delivered to commit listeners on the writer thread, in commit order.
struct CommitNotice {
  MutationKind kind;
  MemoryRecord record;  // state after the mutation (state before purge for Purged)
};

/// Durable storage for records. Only the writer thread calls mutating members.
class StorageBackend {
 public:
  virtual ~StorageBackend() = default;

  virtual std::vector<MemoryRecord> load_all() = 0;
  virtual std::uint64_t load_next_id() = 0;

  virtual void begin() = 0;
  virtual void commit() = 0;
  virtual void rollback() = 0;
  virtual void savepoint() = 0;
  virtual void release_savepoint() = 0;
  virtual void rollback_to_savepoint() = 0;

  virtual void upsert(const MemoryRecord& record) = 0;
  virtual void purge(MemoryId id) = 0;
  virtual void store_next_id(std::uint64_t next) = 0;

  virtual std::filesystem::path location() const = 0;
};

/// Single-file SQLite store in WAL mode with synchronous=FULL. ":memory:" gives a
/// transient database.
std::unique_ptr<StorageBackend> make_sqlite_backend(const std::filesystem::path& path);

class MemoryStore {
 public:
  using CommitListener = std::function<void(const CommitNotice&)>;

  MemoryStore(std::unique_ptr<StorageBackend> backend, std::shared_ptr<const Clock> clock);
  ~MemoryStore();
  MemoryStore(const MemoryStore&) = delete;
  MemoryStore& operator=(const MemoryStore&) = delete;

  /// Durable before return. Throws InvalidImportance, UnknownParent.
  MemoryId remember(NewMemory input);
  /// Queues every input before waiting, so they share group commits; ids follow input
  /// order. Rethrows the first failure after all inputs have been processed.
  std::vector<MemoryId> remember_many(std::vector<NewMemory> inputs);
  /// Appends exactly one provenance entry. Throws NotFound, InvalidImportance.
  MemoryRecord update(MemoryId id, const MemoryPatch& patch, const std::string& agent);
  /// Tombstones the record and its live descendants after appending a
  /// delete-request entry to each. Throws NotFound.
  void remove(MemoryId id, const std::string& agent);
  /// Physically purges tombstoned records. Returns the number purged.
  std::size_t compact();

  MemoryRecord get(MemoryId id) const;
  std::optional<MemoryRecord> find(MemoryId id) const;
  /// Includes tombstoned records.
  std::optional<MemoryRecord> find_any(MemoryId id) const;

  std::vector<MemoryRecord> children(MemoryId id) const;
  /// All live descendants, found by path-prefix scan, in path order.
  std::vector<MemoryRecord> subtree(MemoryId id) const;
  std::optional<MemoryRecord> parent_of(MemoryId id) const;

  std::vector<MemoryRecord> live_records() const;
  std::vector<MemoryRecord> all_records() const;
  std::size_t live_count() const;

  /// {version, exported_at, memories:[...]} including tombstones.
  std::size_t export_json(const std::filesystem::path& dest) const;
  /// Ids are preserved. Throws IoFailure, SchemaMismatch, InvalidArgument on id collision.
  std::size_t import_json(const std::filesystem::path& src);

  /// Listeners run on the writer thread after the batch is durable.
  void add_commit_listener(CommitListener listener);

  /// Runs `task` on the writer thread after every previously queued mutation, and
  /// waits for it. Lets derived state piggyback on the mutation order.
  void run_serialized(std::function<void()> task);

  std::filesystem::path location() const { return backend_->location(); }

  struct Staging;

 private:
  struct Job {
    std::function<void(Staging&)> stage;
    std::function<void(std::exception_ptr)> finish;
  };

  template <class R, class F>
  std::future<R> submit(F&& fn);
  template <class R, class F>
  R write(F&& fn);
  std::function<MemoryId(Staging&)> remember_job(NewMemory input);

  void enqueue(Job job);
  void writer_loop();
  void process_batch(std::vector<Job>& batch);
  void apply_locked(const MemoryRecord& record);
  void erase_locked(MemoryId id);

  std::unique_ptr<StorageBackend> backend_;
  std::shared_ptr<const Clock> clock_;

  mutable std::shared_mutex state_mu_;
  std::unordered_map<MemoryId, MemoryRecord> records_;
  std::unordered_map<MemoryId, std::vector<MemoryId>> children_;
  std::map<std::string, MemoryId> by_path_;
  std::size_t live_count_ = 0;

  // Writer-owned.
  std::uint64_t next_id_ = 1;
  Timestamp last_ts_{};
  std::vector<CommitListener> listeners_;
  std::mutex listeners_mu_;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<Job> queue_;
  bool stopping_ = false;
  std::thread writer_;
};

}  // namespace agentmem
