#include "agentmem/memory_json.hpp"

namespace agentmem {

using nlohmann::json;

json to_json(const ProvenanceBlock& block) {
  json chain = json::array();
  for (const auto& e : block.chain) {
    chain.push_back({{"agent", e.agent},
                     {"action", to_string(e.action)},
                     {"timestamp", format_iso8601(e.timestamp)},
                     {"note", e.note ? json(*e.note) : json(nullptr)}});
  }
  return {{"created_by", block.created_by},
          {"source_protocol", to_string(block.source_protocol)},
          {"trust_at_write", block.trust_at_write},
          {"chain", std::move(chain)}};
}

json to_json(const MemoryRecord& r) {
  json tags = json::array();
  for (const auto& t : r.tags) tags.push_back(t);
  json entity = json::object();
  for (const auto& [term, w] : r.entity_vector) entity[term] = w;
  return {{"id", to_u64(r.id)},
          {"content", r.content},
          {"tags", std::move(tags)},
          {"importance", r.importance},
          {"created_at", format_iso8601(r.created_at)},
          {"updated_at", format_iso8601(r.updated_at)},
          {"parent_id", r.parent_id ? json(to_u64(*r.parent_id)) : json(nullptr)},
          {"path", r.path},
          {"entity_vector", std::move(entity)},
          {"deleted", r.deleted},
          {"provenance", to_json(r.provenance)}};
}

namespace {

[[noreturn]] void mismatch(const std::string& what) {
  throw Error(ErrorCode::SchemaMismatch, what);
}

const json& field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) mismatch(std::string("missing field '") + name + "'");
  return j.at(name);
}

std::string string_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) mismatch(std::string("field '") + name + "' is not a string");
  return v.get<std::string>();
}

Timestamp time_field(const json& j, const char* name) {
  auto t = parse_iso8601(string_field(j, name));
  if (!t) mismatch(std::string("field '") + name + "' is not an ISO-8601 UTC timestamp");
  return *t;
}

}  // namespace

ProvenanceBlock provenance_from_json(const json& j) {
  ProvenanceBlock block;
  block.created_by = string_field(j, "created_by");
  auto proto = parse_protocol(string_field(j, "source_protocol"));
  if (!proto) mismatch("unknown source_protocol");
  block.source_protocol = *proto;
  const auto& trust = field(j, "trust_at_write");
  if (!trust.is_number()) mismatch("trust_at_write is not a number");
  block.trust_at_write = trust.get<double>();
  const auto& chain = field(j, "chain");
  if (!chain.is_array()) mismatch("chain is not an array");
  for (const auto& e : chain) {
    ProvenanceEntry entry;
    entry.agent = string_field(e, "agent");
    auto action = parse_provenance_action(string_field(e, "action"));
    if (!action) mismatch("unknown provenance action");
    entry.action = *action;
    entry.timestamp = time_field(e, "timestamp");
    if (e.contains("note") && !e.at("note").is_null()) {
      if (!e.at("note").is_string()) mismatch("note is not a string");
      entry.note = e.at("note").get<std::string>();
    }
    block.chain.push_back(std::move(entry));
  }
  if (block.chain.empty()) mismatch("provenance chain is empty");
  return block;
}

MemoryRecord record_from_json(const json& j) {
  MemoryRecord r;
  const auto& id = field(j, "id");
  if (!id.is_number_unsigned()) mismatch("id is not an unsigned integer");
  r.id = make_id(id.get<std::uint64_t>());
  r.content = string_field(j, "content");
  const auto& tags = field(j, "tags");
  if (!tags.is_array()) mismatch("tags is not an array");
  for (const auto& t : tags) {
    if (!t.is_string()) mismatch("tag is not a string");
    r.tags.insert(t.get<std::string>());
  }
  const auto& imp = field(j, "importance");
  if (!imp.is_number_integer()) mismatch("importance is not an integer");
  r.importance = imp.get<int>();
  r.created_at = time_field(j, "created_at");
  r.updated_at = time_field(j, "updated_at");
  const auto& parent = field(j, "parent_id");
  if (!parent.is_null()) {
    if (!parent.is_number_unsigned()) mismatch("parent_id is not an unsigned integer");
    r.parent_id = make_id(parent.get<std::uint64_t>());
  }
  r.path = string_field(j, "path");
  if (j.contains("entity_vector") && !j.at("entity_vector").is_null()) {
    const auto& ev = j.at("entity_vector");
    if (!ev.is_object()) mismatch("entity_vector is not an object");
    for (const auto& [term, w] : ev.items()) {
      if (!w.is_number()) mismatch("entity weight is not a number");
      r.entity_vector[term] = w.get<double>();
    }
  }
  if (j.contains("deleted")) {
    if (!j.at("deleted").is_boolean()) mismatch("deleted is not a boolean");
    r.deleted = j.at("deleted").get<bool>();
  }
  r.provenance = provenance_from_json(field(j, "provenance"));
  return r;
}

}  // namespace agentmem
