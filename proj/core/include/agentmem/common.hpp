#pragma once
// Shared vocabulary types: ids, timestamps, protocols, clocks and the error type.

#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace agentmem {

enum class MemoryId : std::uint64_t {};

constexpr std::uint64_t to_u64(MemoryId id) noexcept { return static_cast<std::uint64_t>(id); }
constexpr MemoryId make_id(std::uint64_t v) noexcept { return static_cast<MemoryId>(v); }
std::string to_string(MemoryId id);

using Millis = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Millis>;

constexpr std::int64_t to_epoch_ms(Timestamp t) noexcept { return t.time_since_epoch().count(); }
constexpr Timestamp from_epoch_ms(std::int64_t ms) noexcept { return Timestamp{Millis{ms}}; }

/// Fractional days between two timestamps (negative if `later` precedes `earlier`).
double days_between(Timestamp earlier, Timestamp later) noexcept;

/// "2026-01-02T03:04:05.678Z"
std::string format_iso8601(Timestamp t);
std::optional<Timestamp> parse_iso8601(std::string_view text);

enum class Protocol { MCP, CLI, REST, A2A };

std::string_view to_string(Protocol p) noexcept;
std::optional<Protocol> parse_protocol(std::string_view text) noexcept;

enum class ErrorCode {
  NotFound,
  TrustDenied,
  UnknownParent,
  InvalidImportance,
  InvalidArgument,
  IoFailure,
  SchemaMismatch,
  CapExceeded,
  UnknownCategory,
  UnknownAgent,
  SelfFlag,
  InsufficientCorpus,
  InsufficientData,
  EmptyInput,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Time source. Injectable so retention and decay can be driven by a simulated clock.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override {
    return std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now());
  }
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start) : now_(start) {}

  Timestamp now() const override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void set(Timestamp t) {
    std::lock_guard lock(mu_);
    now_ = t;
  }
  void advance(Millis d) {
    std::lock_guard lock(mu_);
    now_ += d;
  }

 private:
  mutable std::mutex mu_;
  Timestamp now_;
};

/// Agent identity as asserted by the caller, together with the protocol it arrived on.
struct AgentContext {
  std::string agent_id;
  Protocol protocol = Protocol::CLI;
};

}  // namespace agentmem

template <>
struct std::hash<agentmem::MemoryId> {
  std::size_t operator()(agentmem::MemoryId id) const noexcept {
    return std::hash<std::uint64_t>{}(agentmem::to_u64(id));
  }
};
