#include "agentmem/memory_store.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>

#include "agentmem/memory_json.hpp"

namespace agentmem {

using nlohmann::json;

std::string_view to_string(ProvenanceAction a) noexcept {
  switch (a) {
    case ProvenanceAction::Create: return "create";
    case ProvenanceAction::Update: return "update";
    case ProvenanceAction::DeleteRequest: return "delete-request";
  }
  return "update";
}

std::optional<ProvenanceAction> parse_provenance_action(std::string_view text) noexcept {
  if (text == "create") return ProvenanceAction::Create;
  if (text == "update") return ProvenanceAction::Update;
  if (text == "delete-request") return ProvenanceAction::DeleteRequest;
  return std::nullopt;
}

namespace {

constexpr std::size_t kMaxBatch = 512;
constexpr int kExportVersion = 1;

bool has_prefix(const std::string& s, const std::string& prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

void check_importance(int importance) {
  if (importance < 1 || importance > 10) {
    throw Error(ErrorCode::InvalidImportance,
                "importance must be in [1, 10], got " + std::to_string(importance));
  }
}

}  // namespace

// Mutation scratch space for one writer batch. Each job writes into a job-local
// overlay that is folded into the batch overlay only if the job succeeds.
struct MemoryStore::Staging {
  MemoryStore& store;
  StorageBackend& backend;
  std::unordered_map<MemoryId, std::optional<MemoryRecord>> overlay;
  std::vector<CommitNotice> notices;
  std::unordered_map<MemoryId, std::optional<MemoryRecord>> job_overlay;
  std::vector<CommitNotice> job_notices;

  std::optional<MemoryRecord> find_any(MemoryId id) const {
    if (auto it = job_overlay.find(id); it != job_overlay.end()) return it->second;
    if (auto it = overlay.find(id); it != overlay.end()) return it->second;
    if (auto it = store.records_.find(id); it != store.records_.end()) return it->second;
    return std::nullopt;
  }

  std::optional<MemoryRecord> find_live(MemoryId id) const {
    auto r = find_any(id);
    if (r && r->deleted) return std::nullopt;
    return r;
  }

  Timestamp stamp() {
    store.last_ts_ = std::max(store.clock_->now(), store.last_ts_);
    return store.last_ts_;
  }

  void put(const MemoryRecord& record, MutationKind kind) {
    backend.upsert(record);
    job_overlay[record.id] = record;
    job_notices.push_back({kind, record});
  }

  void purge(const MemoryRecord& record) {
    backend.purge(record.id);
    job_overlay[record.id] = std::nullopt;
    job_notices.push_back({MutationKind::Purged, record});
  }

  /// Every record (committed or staged, live or not) whose path extends `path`.
  std::vector<MemoryRecord> descendants(const std::string& path) const {
    const std::string prefix = path + "/";
    std::map<MemoryId, MemoryRecord> found;
    for (auto it = store.by_path_.lower_bound(prefix);
         it != store.by_path_.end() && has_prefix(it->first, prefix); ++it) {
      if (auto r = find_any(it->second)) found.emplace(r->id, *r);
    }
    for (const auto* layer : {&overlay, &job_overlay}) {
      for (const auto& [id, rec] : *layer) {
        if (rec && has_prefix(rec->path, prefix)) found.insert_or_assign(id, *find_any(id));
      }
    }
    std::vector<MemoryRecord> out;
    for (auto& [id, rec] : found) out.push_back(std::move(rec));
    return out;
  }

  std::vector<MemoryRecord> all_tombstoned() const {
    std::map<MemoryId, MemoryRecord> found;
    for (const auto& [id, rec] : store.records_) {
      if (rec.deleted) found.emplace(id, rec);
    }
    for (const auto* layer : {&overlay, &job_overlay}) {
      for (const auto& [id, rec] : *layer) {
        if (rec && rec->deleted) {
          found.insert_or_assign(id, *rec);
        } else {
          found.erase(id);
        }
      }
    }
    std::vector<MemoryRecord> out;
    for (auto& [id, rec] : found) out.push_back(std::move(rec));
    return out;
  }
};

MemoryStore::MemoryStore(std::unique_ptr<StorageBackend> backend,
                         std::shared_ptr<const Clock> clock)
    : backend_(std::move(backend)), clock_(std::move(clock)) {
  for (auto& r : backend_->load_all()) {
    last_ts_ = std::max({last_ts_, r.updated_at, r.created_at});
    apply_locked(r);
  }
  next_id_ = backend_->load_next_id();
  writer_ = std::thread([this] { writer_loop(); });
}

MemoryStore::~MemoryStore() {
  {
    std::lock_guard lock(queue_mu_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (writer_.joinable()) writer_.join();
}

template <class R, class F>
std::future<R> MemoryStore::submit(F&& fn) {
  struct State {
    std::promise<R> promise;
    std::optional<R> result;
  };
  auto state = std::make_shared<State>();
  auto future = state->promise.get_future();
  Job job;
  job.stage = [state, fn = std::forward<F>(fn)](Staging& s) { state->result.emplace(fn(s)); };
  job.finish = [state](std::exception_ptr err) {
    if (err) {
      state->promise.set_exception(err);
    } else {
      state->promise.set_value(std::move(*state->result));
    }
  };
  enqueue(std::move(job));
  return future;
}

template <class R, class F>
R MemoryStore::write(F&& fn) {
  return submit<R>(std::forward<F>(fn)).get();
}

void MemoryStore::enqueue(Job job) {
  {
    std::lock_guard lock(queue_mu_);
    if (stopping_) throw Error(ErrorCode::IoFailure, "memory store is shutting down");
    queue_.push_back(std::move(job));
  }
  queue_cv_.notify_one();
}

void MemoryStore::writer_loop() {
  std::vector<Job> batch;
  for (;;) {
    {
      std::unique_lock lock(queue_mu_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty() && stopping_) return;
      while (!queue_.empty() && batch.size() < kMaxBatch) {
        batch.push_back(std::move(queue_.front()));
        queue_.pop_front();
      }
    }
    process_batch(batch);
    batch.clear();
  }
}

void MemoryStore::process_batch(std::vector<Job>& batch) {
  Staging staging{*this, *backend_, {}, {}, {}, {}};
  std::vector<std::exception_ptr> errors(batch.size());
  const std::uint64_t batch_start_id = next_id_;
  const Timestamp batch_start_ts = last_ts_;
  bool committed = false;
  try {
    backend_->begin();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!batch[i].stage) continue;
      const std::uint64_t saved_id = next_id_;
      staging.job_overlay.clear();
      staging.job_notices.clear();
      backend_->savepoint();
      try {
        batch[i].stage(staging);
        backend_->release_savepoint();
        for (auto& [id, rec] : staging.job_overlay) staging.overlay[id] = std::move(rec);
        for (auto& n : staging.job_notices) staging.notices.push_back(std::move(n));
      } catch (...) {
        errors[i] = std::current_exception();
        next_id_ = saved_id;
        try {
          backend_->rollback_to_savepoint();
        } catch (...) {
        }
      }
    }
    if (next_id_ != batch_start_id) backend_->store_next_id(next_id_);
    backend_->commit();
    committed = true;
  } catch (...) {
    auto err = std::current_exception();
    try {
      backend_->rollback();
    } catch (...) {
    }
    next_id_ = batch_start_id;
    last_ts_ = batch_start_ts;
    for (auto& e : errors) e = err;
  }

  if (committed) {
    {
      std::unique_lock lock(state_mu_);
      for (const auto& [id, rec] : staging.overlay) {
        if (rec) {
          apply_locked(*rec);
        } else {
          erase_locked(id);
        }
      }
    }
    std::vector<CommitListener> listeners;
    {
      std::lock_guard lock(listeners_mu_);
      listeners = listeners_;
    }
    for (const auto& notice : staging.notices) {
      for (const auto& l : listeners) l(notice);
    }
  }
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i].finish(errors[i]);
}

void MemoryStore::apply_locked(const MemoryRecord& record) {
  auto it = records_.find(record.id);
  if (it == records_.end()) {
    if (!record.deleted) ++live_count_;
    if (record.parent_id) children_[*record.parent_id].push_back(record.id);
    by_path_[record.path] = record.id;
    records_.emplace(record.id, record);
    return;
  }
  if (it->second.deleted != record.deleted) {
    if (record.deleted) {
      --live_count_;
    } else {
      ++live_count_;
    }
  }
  if (it->second.path != record.path) {
    by_path_.erase(it->second.path);
    by_path_[record.path] = record.id;
  }
  it->second = record;
}

void MemoryStore::erase_locked(MemoryId id) {
  auto it = records_.find(id);
  if (it == records_.end()) return;
  if (!it->second.deleted) --live_count_;
  by_path_.erase(it->second.path);
  if (it->second.parent_id) {
    auto& siblings = children_[*it->second.parent_id];
    siblings.erase(std::remove(siblings.begin(), siblings.end(), id), siblings.end());
  }
  children_.erase(id);
  records_.erase(it);
}

std::function<MemoryId(MemoryStore::Staging&)> MemoryStore::remember_job(NewMemory input) {
  return [this, input = std::move(input)](Staging& s) {
    std::string parent_path;
    if (input.parent) {
      auto parent = s.find_live(*input.parent);
      if (!parent) {
        throw Error(ErrorCode::UnknownParent, "no live memory " + to_string(*input.parent));
      }
      parent_path = parent->path;
    }
    const Timestamp ts = s.stamp();
    MemoryRecord r;
    r.id = make_id(next_id_++);
    r.content = input.content;
    r.tags = input.tags;
    r.importance = input.importance;
    r.created_at = ts;
    r.updated_at = ts;
    r.parent_id = input.parent;
    r.path = parent_path.empty() ? to_string(r.id) : parent_path + "/" + to_string(r.id);
    r.entity_vector = input.entity_vector;
    r.provenance.created_by = input.agent.agent_id;
    r.provenance.source_protocol = input.agent.protocol;
    r.provenance.trust_at_write = input.trust_at_write;
    r.provenance.chain.push_back({input.agent.agent_id, ProvenanceAction::Create, ts, std::nullopt});
    s.put(r, MutationKind::Created);
    return r.id;
  };
}

MemoryId MemoryStore::remember(NewMemory input) {
  check_importance(input.importance);
  return write<MemoryId>(remember_job(std::move(input)));
}

std::vector<MemoryId> MemoryStore::remember_many(std::vector<NewMemory> inputs) {
  for (const auto& in : inputs) check_importance(in.importance);
  std::vector<std::future<MemoryId>> pending;
  pending.reserve(inputs.size());
  for (auto& in : inputs) pending.push_back(submit<MemoryId>(remember_job(std::move(in))));
  std::vector<MemoryId> ids;
  ids.reserve(pending.size());
  std::exception_ptr first;
  for (auto& f : pending) {
    try {
      ids.push_back(f.get());
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
  return ids;
}

MemoryRecord MemoryStore::update(MemoryId id, const MemoryPatch& patch, const std::string& agent) {
  if (patch.importance) check_importance(*patch.importance);
  return write<MemoryRecord>([id, patch, agent](Staging& s) {
    auto r = s.find_live(id);
    if (!r) throw Error(ErrorCode::NotFound, "memory " + to_string(id));
    std::string changed;
    auto mark = [&changed](const char* name) {
      if (!changed.empty()) changed += ",";
      changed += name;
    };
    if (patch.content) {
      r->content = *patch.content;
      mark("content");
    }
    if (patch.tags) {
      r->tags = *patch.tags;
      mark("tags");
    }
    if (patch.importance) {
      r->importance = *patch.importance;
      mark("importance");
    }
    std::optional<std::string> note = patch.note;
    if (!note && !changed.empty()) note = "changed: " + changed;
    const Timestamp ts = s.stamp();
    r->updated_at = ts;
    r->provenance.chain.push_back({agent, ProvenanceAction::Update, ts, note});
    s.put(*r, MutationKind::Updated);
    return *r;
  });
}

void MemoryStore::remove(MemoryId id, const std::string& agent) {
  write<bool>([id, agent](Staging& s) {
    auto target = s.find_live(id);
    if (!target) throw Error(ErrorCode::NotFound, "memory " + to_string(id));
    const Timestamp ts = s.stamp();
    auto tombstone = [&](MemoryRecord r, std::optional<std::string> note) {
      r.provenance.chain.push_back({agent, ProvenanceAction::DeleteRequest, ts, std::move(note)});
      r.deleted = true;
      r.updated_at = ts;
      s.put(r, MutationKind::Deleted);
    };
    for (auto& child : s.descendants(target->path)) {
      if (!child.deleted) tombstone(std::move(child), "cascade from " + to_string(id));
    }
    tombstone(std::move(*target), std::nullopt);
    return true;
  });
}

std::size_t MemoryStore::compact() {
  return write<std::size_t>([](Staging& s) {
    auto dead = s.all_tombstoned();
    for (const auto& r : dead) s.purge(r);
    return dead.size();
  });
}

void MemoryStore::run_serialized(std::function<void()> task) {
  auto done = std::make_shared<std::promise<void>>();
  auto future = done->get_future();
  Job job;
  job.finish = [task = std::move(task), done](std::exception_ptr) {
    try {
      task();
      done->set_value();
    } catch (...) {
      done->set_exception(std::current_exception());
    }
  };
  enqueue(std::move(job));
  future.get();
}

MemoryRecord MemoryStore::get(MemoryId id) const {
  auto r = find(id);
  if (!r) throw Error(ErrorCode::NotFound, "memory " + to_string(id));
  return std::move(*r);
}

std::optional<MemoryRecord> MemoryStore::find(MemoryId id) const {
  std::shared_lock lock(state_mu_);
  auto it = records_.find(id);
  if (it == records_.end() || it->second.deleted) return std::nullopt;
  return it->second;
}

std::optional<MemoryRecord> MemoryStore::find_any(MemoryId id) const {
  std::shared_lock lock(state_mu_);
  auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<MemoryRecord> MemoryStore::children(MemoryId id) const {
  std::shared_lock lock(state_mu_);
  auto self = records_.find(id);
  if (self == records_.end() || self->second.deleted) {
    throw Error(ErrorCode::NotFound, "memory " + to_string(id));
  }
  std::vector<MemoryRecord> out;
  if (auto it = children_.find(id); it != children_.end()) {
    for (MemoryId child : it->second) {
      const auto& rec = records_.at(child);
      if (!rec.deleted) out.push_back(rec);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<MemoryRecord> MemoryStore::subtree(MemoryId id) const {
  std::shared_lock lock(state_mu_);
  auto self = records_.find(id);
  if (self == records_.end() || self->second.deleted) {
    throw Error(ErrorCode::NotFound, "memory " + to_string(id));
  }
  const std::string prefix = self->second.path + "/";
  std::vector<MemoryRecord> out;
  for (auto it = by_path_.lower_bound(prefix);
       it != by_path_.end() && has_prefix(it->first, prefix); ++it) {
    const auto& rec = records_.at(it->second);
    if (!rec.deleted) out.push_back(rec);
  }
  return out;
}

std::optional<MemoryRecord> MemoryStore::parent_of(MemoryId id) const {
  std::shared_lock lock(state_mu_);
  auto self = records_.find(id);
  if (self == records_.end() || self->second.deleted) {
    throw Error(ErrorCode::NotFound, "memory " + to_string(id));
  }
  if (!self->second.parent_id) return std::nullopt;
  auto parent = records_.find(*self->second.parent_id);
  if (parent == records_.end()) return std::nullopt;
  return parent->second;
}

std::vector<MemoryRecord> MemoryStore::live_records() const {
  std::vector<MemoryRecord> out;
  {
    std::shared_lock lock(state_mu_);
    out.reserve(live_count_);
    for (const auto& [id, rec] : records_) {
      if (!rec.deleted) out.push_back(rec);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<MemoryRecord> MemoryStore::all_records() const {
  std::vector<MemoryRecord> out;
  {
    std::shared_lock lock(state_mu_);
    out.reserve(records_.size());
    for (const auto& [id, rec] : records_) out.push_back(rec);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::size_t MemoryStore::live_count() const {
  std::shared_lock lock(state_mu_);
  return live_count_;
}

std::size_t MemoryStore::export_json(const std::filesystem::path& dest) const {
  const auto records = all_records();
  json memories = json::array();
  for (const auto& r : records) memories.push_back(to_json(r));
  json doc = {{"version", kExportVersion},
              {"exported_at", format_iso8601(clock_->now())},
              {"memories", std::move(memories)}};
  std::ofstream out(dest, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + dest.string() + " for writing");
  out << doc.dump(2) << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + dest.string());
  return records.size();
}

std::size_t MemoryStore::import_json(const std::filesystem::path& src) {
  std::ifstream in(src, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + src.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("malformed export: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("version") || !doc.contains("memories") ||
      !doc.at("memories").is_array()) {
    throw Error(ErrorCode::SchemaMismatch, "export must be {version, exported_at, memories}");
  }
  if (doc.at("version") != kExportVersion) {
    throw Error(ErrorCode::SchemaMismatch, "unsupported export version");
  }
  std::vector<MemoryRecord> incoming;
  for (const auto& m : doc.at("memories")) {
    auto r = record_from_json(m);
    check_importance(r.importance);
    incoming.push_back(std::move(r));
  }
  return write<std::size_t>([this, incoming = std::move(incoming)](Staging& s) {
    std::uint64_t max_id = 0;
    for (const auto& r : incoming) {
      if (s.find_any(r.id)) {
        throw Error(ErrorCode::InvalidArgument, "memory " + to_string(r.id) + " already exists");
      }
      max_id = std::max(max_id, to_u64(r.id));
    }
    for (const auto& r : incoming) {
      last_ts_ = std::max({last_ts_, r.created_at, r.updated_at});
      s.put(r, MutationKind::Imported);
    }
    next_id_ = std::max(next_id_, max_id + 1);
    return incoming.size();
  });
}

void MemoryStore::add_commit_listener(CommitListener listener) {
  std::lock_guard lock(listeners_mu_);
  listeners_.push_back(std::move(listener));
}

}  // namespace agentmem
