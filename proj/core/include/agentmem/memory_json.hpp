#pragma once

#include <nlohmann/json.hpp>

#include "agentmem/memory_store.hpp"

namespace agentmem {

nlohmann::json to_json(const ProvenanceBlock& block);
nlohmann::json to_json(const MemoryRecord& record);

/// Throws SchemaMismatch on missing or mistyped fields.
ProvenanceBlock provenance_from_json(const nlohmann::json& j);
MemoryRecord record_from_json(const nlohmann::json& j);

}  // namespace agentmem
