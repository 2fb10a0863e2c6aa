#include "agentmem/memory_json.hpp"
#include "service.hpp"

namespace agentmem::service {

nlohmann::json hit_to_json(const search::SearchHit& hit) {
  return {{"id", to_u64(hit.record.id)},
          {"score", hit.score},
          {"base", hit.base},
          {"bm25", hit.bm25},
          {"tfidf", hit.tfidf},
          {"memory", to_json(hit.record)}};
}

nlohmann::json hits_to_json(const search::SearchResult& result) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& h : result.hits) out.push_back(hit_to_json(h));
  return out;
}

learning::ProjectContext context_from_json(const nlohmann::json& j) {
  learning::ProjectContext c;
  if (!j.is_object()) return c;
  if (auto it = j.find("active_paths"); it != j.end()) c.active_paths = it->get<std::vector<std::string>>();
  if (auto it = j.find("recent_tags"); it != j.end()) c.recent_tags = it->get<std::vector<std::string>>();
  if (auto it = j.find("cluster_hint"); it != j.end() && !it->is_null()) {
    c.cluster_hint = it->is_string() ? it->get<std::string>() : it->dump();
  }
  if (auto it = j.find("explicit_label"); it != j.end() && !it->is_null()) {
    c.explicit_label = it->get<std::string>();
  }
  return c;
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::UnknownAgent:
      return 404;
    case ErrorCode::TrustDenied:
      return 403;
    case ErrorCode::UnknownParent:
    case ErrorCode::InvalidImportance:
    case ErrorCode::InvalidArgument:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::UnknownCategory:
    case ErrorCode::SelfFlag:
    case ErrorCode::EmptyInput:
      return 400;
    case ErrorCode::CapExceeded:
    case ErrorCode::InsufficientCorpus:
    case ErrorCode::InsufficientData:
      return 409;
    case ErrorCode::IoFailure:
      return 500;
  }
  return 500;
}

}  // namespace agentmem::service
