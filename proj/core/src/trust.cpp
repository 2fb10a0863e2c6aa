#include "agentmem/trust.hpp"

#include <algorithm>
#include <cmath>

#include "agentmem/memory_store.hpp"

namespace agentmem::trust {

double magnitude(SignalKind kind) noexcept {
  switch (kind) {
    case SignalKind::VerifiedRecall: return 0.015;
    case SignalKind::ConsistentWrite: return 0.01;
    case SignalKind::LowErrorRate: return 0.02;
    case SignalKind::ContradictoryWrite: return -0.02;
    case SignalKind::FlaggedContent: return -0.03;
    case SignalKind::AnomalousBurst: return -0.025;
  }
  return 0.0;
}

std::string_view to_string(SignalKind kind) noexcept {
  switch (kind) {
    case SignalKind::VerifiedRecall: return "verified_recall";
    case SignalKind::ConsistentWrite: return "consistent_write";
    case SignalKind::LowErrorRate: return "low_error_rate";
    case SignalKind::ContradictoryWrite: return "contradictory_write";
    case SignalKind::FlaggedContent: return "flagged_content";
    case SignalKind::AnomalousBurst: return "anomalous_burst";
  }
  return "";
}

std::optional<SignalKind> parse_signal(std::string_view name) noexcept {
  for (const auto k : kAllSignals) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(TrustMode mode) noexcept {
  return mode == TrustMode::Incremental ? "incremental" : "posterior";
}

std::optional<TrustMode> parse_mode(std::string_view name) noexcept {
  if (name == "posterior") return TrustMode::Posterior;
  if (name == "incremental") return TrustMode::Incremental;
  return std::nullopt;
}

TrustState apply_signal(TrustState s, SignalKind kind, double kappa) noexcept {
  const double delta = magnitude(kind);
  const double step = delta / (1.0 + static_cast<double>(s.n) * s.eta);
  s.t_inc = std::clamp(s.t_inc + step, 0.0, 1.0);
  ++s.n;
  if (delta > 0.0) {
    s.alpha += delta * kappa;
  } else {
    s.beta += -delta * kappa;
  }
  return s;
}

nlohmann::json to_json(const TrustState& s, TrustMode mode) {
  return {{"agent", s.agent},       {"trust", s.score(mode)},   {"mode", to_string(mode)},
          {"alpha", s.alpha},       {"beta", s.beta},           {"posterior", s.posterior()},
          {"incremental", s.t_inc}, {"signals", s.n}};
}

TrustState TrustEngine::fresh(const std::string& agent) const {
  TrustState s;
  s.agent = agent;
  s.eta = config_.eta;
  return s;
}

bool TrustEngine::register_agent(const std::string& agent) {
  std::lock_guard lock(mu_);
  auto [it, inserted] = states_.try_emplace(agent, fresh(agent));
  if (inserted && listener_) listener_(it->second, std::nullopt);
  return inserted;
}

bool TrustEngine::known(const std::string& agent) const {
  std::lock_guard lock(mu_);
  return states_.contains(agent);
}

TrustState TrustEngine::record_signal(const std::string& agent, SignalKind kind) {
  std::lock_guard lock(mu_);
  auto it = states_.find(agent);
  if (it == states_.end()) throw Error(ErrorCode::UnknownAgent, "agent '" + agent + "'");
  it->second = apply_signal(it->second, kind, config_.kappa);
  if (listener_) listener_(it->second, kind);
  return it->second;
}

double TrustEngine::trust(const std::string& agent, TrustMode mode) const {
  return state(agent).score(mode);
}

TrustState TrustEngine::state(const std::string& agent) const {
  std::lock_guard lock(mu_);
  auto it = states_.find(agent);
  if (it == states_.end()) throw Error(ErrorCode::UnknownAgent, "agent '" + agent + "'");
  return it->second;
}

std::vector<TrustState> TrustEngine::states() const {
  std::vector<TrustState> out;
  {
    std::lock_guard lock(mu_);
    out.reserve(states_.size());
    for (const auto& [_, s] : states_) out.push_back(s);
  }
  std::sort(out.begin(), out.end(),
            [](const TrustState& a, const TrustState& b) { return a.agent < b.agent; });
  return out;
}

Decision TrustEngine::enforce(const std::string& agent, Operation op) const {
  if (op == Operation::Read) return {};
  double score;
  {
    std::lock_guard lock(mu_);
    auto it = states_.find(agent);
    score = (it == states_.end() ? fresh(agent) : it->second).score(config_.mode);
  }
  if (score < config_.threshold) {
    return {false, "agent '" + agent + "' trust " + std::to_string(score) + " below threshold " +
                       std::to_string(config_.threshold)};
  }
  return {};
}

void TrustEngine::restore(const TrustState& state) {
  std::lock_guard lock(mu_);
  states_[state.agent] = state;
}

void TrustEngine::set_listener(Listener listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

std::vector<MemoryId> isolate(const MemoryStore& store, const std::string& agent) {
  std::vector<MemoryId> out;
  for (const auto& r : store.live_records()) {
    const auto& chain = r.provenance.chain;
    if (std::any_of(chain.begin(), chain.end(),
                    [&](const ProvenanceEntry& e) { return e.agent == agent; })) {
      out.push_back(r.id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

TrustState flag_content(MemoryStore& store, TrustEngine& engine, MemoryId id,
                        const std::string& reporter) {
  const MemoryRecord record = store.get(id);
  const std::string& creator = record.provenance.created_by;
  if (creator == reporter) {
    throw Error(ErrorCode::SelfFlag, "agent '" + reporter + "' cannot flag its own memory");
  }
  if (!engine.known(creator)) engine.register_agent(creator);
  MemoryPatch note;
  note.note = "flagged_content by " + reporter;
  store.update(id, note, reporter);
  return engine.record_signal(creator, SignalKind::FlaggedContent);
}

}  // namespace agentmem::trust
