#include "agentmem/pattern_learning.hpp"

#include <algorithm>
#include <utility>

#include "agentmem/common.hpp"
#include "agentmem/text_index.hpp"

namespace agentmem::patterns {

namespace {

constexpr std::pair<std::string_view, Category> kLexicon[] = {
    {"angular", Category::Frontend},     {"browser", Category::Frontend},
    {"component", Category::Frontend},   {"components", Category::Frontend},
    {"css", Category::Frontend},         {"dom", Category::Frontend},
    {"frontend", Category::Frontend},    {"html", Category::Frontend},
    {"javascript", Category::Frontend},  {"nextjs", Category::Frontend},
    {"react", Category::Frontend},       {"svelte", Category::Frontend},
    {"tailwind", Category::Frontend},    {"typescript", Category::Frontend},
    {"ui", Category::Frontend},          {"vite", Category::Frontend},
    {"vue", Category::Frontend},         {"webpack", Category::Frontend},

    {"api", Category::Backend},          {"backend", Category::Backend},
    {"django", Category::Backend},       {"endpoint", Category::Backend},
    {"endpoints", Category::Backend},    {"express", Category::Backend},
    {"fastapi", Category::Backend},      {"flask", Category::Backend},
    {"graphql", Category::Backend},      {"grpc", Category::Backend},
    {"microservice", Category::Backend}, {"microservices", Category::Backend},
    {"nodejs", Category::Backend},       {"rails", Category::Backend},
    {"rest", Category::Backend},         {"server", Category::Backend},
    {"spring", Category::Backend},

    {"database", Category::Database},    {"migration", Category::Database},
    {"migrations", Category::Database},  {"mongodb", Category::Database},
    {"mysql", Category::Database},       {"orm", Category::Database},
    {"postgres", Category::Database},    {"postgresql", Category::Database},
    {"redis", Category::Database},       {"schema", Category::Database},
    {"sql", Category::Database},         {"sqlite", Category::Database},

    {"ansible", Category::DevOps},       {"aws", Category::DevOps},
    {"azure", Category::DevOps},         {"ci", Category::DevOps},
    {"container", Category::DevOps},     {"containers", Category::DevOps},
    {"deploy", Category::DevOps},        {"deployment", Category::DevOps},
    {"devops", Category::DevOps},        {"docker", Category::DevOps},
    {"gcp", Category::DevOps},           {"helm", Category::DevOps},
    {"k8s", Category::DevOps},           {"kubernetes", Category::DevOps},
    {"nginx", Category::DevOps},         {"terraform", Category::DevOps},

    {"ai", Category::MlAi},              {"classifier", Category::MlAi},
    {"dataset", Category::MlAi},         {"embedding", Category::MlAi},
    {"embeddings", Category::MlAi},      {"inference", Category::MlAi},
    {"llm", Category::MlAi},             {"ml", Category::MlAi},
    {"neural", Category::MlAi},          {"pytorch", Category::MlAi},
    {"sklearn", Category::MlAi},         {"tensorflow", Category::MlAi},
    {"training", Category::MlAi},

    {"coverage", Category::Testing},     {"e2e", Category::Testing},
    {"jest", Category::Testing},         {"mock", Category::Testing},
    {"mocks", Category::Testing},        {"pytest", Category::Testing},
    {"tdd", Category::Testing},          {"test", Category::Testing},
    {"testing", Category::Testing},      {"tests", Category::Testing},
    {"unittest", Category::Testing},

    {"auth", Category::Security},        {"authentication", Category::Security},
    {"authorization", Category::Security}, {"csrf", Category::Security},
    {"encryption", Category::Security},  {"jwt", Category::Security},
    {"oauth", Category::Security},       {"password", Category::Security},
    {"secrets", Category::Security},     {"security", Category::Security},
    {"tls", Category::Security},         {"vulnerability", Category::Security},
    {"xss", Category::Security},

    {"cargo", Category::Tooling},        {"cli", Category::Tooling},
    {"cmake", Category::Tooling},        {"debugger", Category::Tooling},
    {"eslint", Category::Tooling},       {"formatter", Category::Tooling},
    {"git", Category::Tooling},          {"linter", Category::Tooling},
    {"makefile", Category::Tooling},     {"npm", Category::Tooling},
    {"pip", Category::Tooling},          {"prettier", Category::Tooling},
    {"tooling", Category::Tooling},      {"vscode", Category::Tooling},
};

std::size_t slot(PatternKind kind, Category c) {
  return static_cast<std::size_t>(kind) * kCategoryCount + static_cast<std::size_t>(c);
}

}  // namespace

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::Frontend: return "frontend";
    case Category::Backend: return "backend";
    case Category::Database: return "database";
    case Category::DevOps: return "devops";
    case Category::MlAi: return "ml-ai";
    case Category::Testing: return "testing";
    case Category::Security: return "security";
    case Category::Tooling: return "tooling";
  }
  return "frontend";
}

std::optional<Category> parse_category(std::string_view name) noexcept {
  for (const auto c : kAllCategories) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

Category category_from_name(std::string_view name) {
  if (auto c = parse_category(name)) return *c;
  throw Error(ErrorCode::UnknownCategory, "unknown category '" + std::string(name) + "'");
}

std::set<Category> categorize_tokens(const std::vector<std::string>& tokens) {
  std::set<Category> out;
  for (const auto& t : tokens) {
    for (const auto& [word, c] : kLexicon) {
      if (word == t) out.insert(c);
    }
  }
  return out;
}

std::set<Category> categorize(std::string_view content, const std::set<std::string>& tags) {
  auto tokens = text::tokenize(content);
  for (const auto& tag : tags) {
    auto more = text::tokenize(tag);
    tokens.insert(tokens.end(), more.begin(), more.end());
  }
  return categorize_tokens(tokens);
}

std::string_view to_string(PatternKind k) noexcept {
  return k == PatternKind::Style ? "style" : "preference";
}

BetaPrior prior_for(PatternKind kind) noexcept {
  return kind == PatternKind::Style ? BetaPrior{1.0, 5.0} : BetaPrior{1.0, 4.0};
}

PatternState PatternState::fresh(PatternKind kind, Category category) {
  const auto p = prior_for(kind);
  return {kind, category, p.alpha, p.beta, 0, 0};
}

double confidence(const PatternState& s) noexcept {
  const double raw = (s.alpha + static_cast<double>(s.k)) /
                     (s.alpha + s.beta + static_cast<double>(s.n));
  return std::min(kMaxConfidence, raw);
}

PatternTracker::PatternTracker() {
  for (const auto kind : {PatternKind::Preference, PatternKind::Style}) {
    for (const auto c : kAllCategories) states_[slot(kind, c)] = PatternState::fresh(kind, c);
  }
}

const PatternState& PatternTracker::observe(PatternKind kind, Category category, bool positive) {
  auto& s = states_[slot(kind, category)];
  ++s.n;
  if (positive) ++s.k;
  return s;
}

const PatternState& PatternTracker::observe(std::string_view category, bool positive,
                                            PatternKind kind) {
  return observe(kind, category_from_name(category), positive);
}

const PatternState& PatternTracker::state(PatternKind kind, Category category) const {
  return states_[slot(kind, category)];
}

std::vector<PatternState> PatternTracker::states() const {
  return {states_.begin(), states_.end()};
}

void PatternTracker::restore(const PatternState& state) {
  states_[slot(state.kind, state.category)] = state;
}

nlohmann::json PatternTracker::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : states_) {
    out.push_back({{"kind", to_string(s.kind)},
                   {"category", to_string(s.category)},
                   {"alpha", s.alpha},
                   {"beta", s.beta},
                   {"k", s.k},
                   {"n", s.n},
                   {"confidence", confidence(s)}});
  }
  return out;
}

}  // namespace agentmem::patterns
