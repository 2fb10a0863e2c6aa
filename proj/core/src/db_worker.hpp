#pragma once
// Background thread owning one SQLite connection. Posted writes are drained in
// batches, each batch inside one transaction. Internal to the core library.

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <thread>
#include <type_traits>

#include "sqlite_db.hpp"

namespace agentmem::detail {

class DbWorker {
 public:
  using Opener = std::function<std::unique_ptr<Database>()>;
  using Task = std::function<void(Database&)>;

  /// The connection is opened lazily, on the first task that needs it.
  explicit DbWorker(Opener open) : open_(std::move(open)), thread_([this] { run(); }) {}

  ~DbWorker() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

  DbWorker(const DbWorker&) = delete;
  DbWorker& operator=(const DbWorker&) = delete;

  /// Fire-and-forget write. Errors are swallowed; callers keep their own in-memory truth.
  void post(Task task) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back({std::move(task), nullptr});
    }
    cv_.notify_all();
  }

  /// Runs `fn` after everything posted before it and returns its result. When
  /// `needs_db` is false the connection is passed as nullptr and not opened.
  template <class F>
  auto call(F&& fn, bool needs_db = true) {
    using R = std::invoke_result_t<F&, Database*>;
    std::packaged_task<R(Database*)> task(std::forward<F>(fn));
    auto result = task.get_future();
    {
      std::lock_guard lock(mu_);
      queue_.push_back({nullptr, [&task](Database* db) { task(db); },
                        needs_db});
    }
    cv_.notify_all();
    return result.get();
  }

  /// Closes the connection (if open) and runs `fn` with it closed.
  void close_then(std::function<void()> fn) {
    call(
        [this, &fn](Database*) {
          db_.reset();
          fn();
          return 0;
        },
        false);
  }

  void flush() {
    call([](Database*) { return 0; }, false);
  }

 private:
  struct Item {
    Task write;
    std::function<void(Database*)> sync;
    bool needs_db = false;
  };

  Database* connection() {
    if (!db_) db_ = open_();
    return db_.get();
  }

  void run() {
    for (;;) {
      std::deque<Item> items;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        items.swap(queue_);
      }
      std::size_t i = 0;
      while (i < items.size()) {
        if (items[i].write) {
          std::size_t j = i;
          try {
            Database* db = connection();
            Transaction tx(*db);
            for (; j < items.size() && items[j].write; ++j) items[j].write(*db);
            tx.commit();
          } catch (...) {
            for (; j < items.size() && items[j].write; ++j) {
            }
          }
          i = j;
        } else {
          Database* db = nullptr;
          if (items[i].needs_db) {
            try {
              db = connection();
            } catch (...) {
            }
          }
          items[i].sync(db);
          ++i;
        }
      }
    }
  }

  Opener open_;
  std::unique_ptr<Database> db_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Item> queue_;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace agentmem::detail
