#pragma once
// Per-agent trust: a Beta posterior (default) and the incremental decayed-step score,
// the signal table that drives both, write/delete enforcement and forensic queries.

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentmem/common.hpp"

namespace agentmem {
class MemoryStore;
}

namespace agentmem::trust {

enum class SignalKind {
  VerifiedRecall,
  ConsistentWrite,
  LowErrorRate,
  ContradictoryWrite,
  FlaggedContent,
  AnomalousBurst,
};

inline constexpr SignalKind kAllSignals[] = {
    SignalKind::VerifiedRecall,     SignalKind::ConsistentWrite, SignalKind::LowErrorRate,
    SignalKind::ContradictoryWrite, SignalKind::FlaggedContent,  SignalKind::AnomalousBurst};

/// Signed step size of a signal.
double magnitude(SignalKind kind) noexcept;
std::string_view to_string(SignalKind kind) noexcept;
std::optional<SignalKind> parse_signal(std::string_view name) noexcept;

enum class TrustMode { Posterior, Incremental };

std::string_view to_string(TrustMode mode) noexcept;
std::optional<TrustMode> parse_mode(std::string_view name) noexcept;

inline constexpr double kPriorAlpha = 2.0;
inline constexpr double kPriorBeta = 1.0;
inline constexpr double kDefaultKappa = 100.0;
inline constexpr double kDefaultEta = 0.01;
inline constexpr double kDefaultThreshold = 0.3;

struct TrustState {
  std::string agent;
  double alpha = kPriorAlpha;
  double beta = kPriorBeta;
  double t_inc = 1.0;
  std::uint64_t n = 0;
  double eta = kDefaultEta;

  double posterior() const noexcept { return alpha / (alpha + beta); }
  double score(TrustMode mode) const noexcept {
    return mode == TrustMode::Posterior ? posterior() : t_inc;
  }
};

/// Both models advance together. The incremental step uses n before the increment:
/// t <- clamp01(t + delta / (1 + n * eta)). The posterior adds |delta| * kappa to alpha
/// (positive) or beta (negative).
TrustState apply_signal(TrustState state, SignalKind kind, double kappa = kDefaultKappa) noexcept;

nlohmann::json to_json(const TrustState& state, TrustMode mode);

struct TrustConfig {
  double threshold = kDefaultThreshold;
  TrustMode mode = TrustMode::Posterior;
  double kappa = kDefaultKappa;
  double eta = kDefaultEta;
};

enum class Operation { Read, Write, Delete };

struct Decision {
  bool allowed = true;
  std::string reason;

  explicit operator bool() const noexcept { return allowed; }
};

class TrustEngine {
 public:
  /// Called with the updated state while the engine lock is held, so calls for one
  /// agent arrive in signal order. Must not call back into the engine.
  using Listener = std::function<void(const TrustState&, std::optional<SignalKind>)>;

  explicit TrustEngine(TrustConfig config = {}) : config_(config) {}

  /// Idempotent. Returns true on first registration.
  bool register_agent(const std::string& agent);
  bool known(const std::string& agent) const;

  /// Throws UnknownAgent.
  TrustState record_signal(const std::string& agent, SignalKind kind);
  /// Throws UnknownAgent.
  double trust(const std::string& agent) const { return trust(agent, config_.mode); }
  double trust(const std::string& agent, TrustMode mode) const;
  TrustState state(const std::string& agent) const;
  std::vector<TrustState> states() const;

  /// Denies writes and deletes when trust < threshold. Unregistered agents are judged
  /// by the prior. Reads are always allowed.
  Decision enforce(const std::string& agent, Operation op) const;

  /// Loads persisted state without notifying the listener.
  void restore(const TrustState& state);
  void set_listener(Listener listener);

  const TrustConfig& config() const noexcept { return config_; }

 private:
  TrustState fresh(const std::string& agent) const;

  TrustConfig config_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, TrustState> states_;
  Listener listener_;
};

/// Live memories whose provenance chain has any entry by `agent`, ascending.
std::vector<MemoryId> isolate(const MemoryStore& store, const std::string& agent);

/// Records a flagged_content signal against the memory's creator and appends a
/// provenance note by the reporter. Throws NotFound, SelfFlag, UnknownAgent.
TrustState flag_content(MemoryStore& store, TrustEngine& engine, MemoryId id,
                        const std::string& reporter);

}  // namespace agentmem::trust
