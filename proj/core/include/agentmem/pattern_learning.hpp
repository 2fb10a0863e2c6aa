#pragma once
// Beta-Binomial preference tracking over a fixed set of technology categories.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace agentmem::patterns {

enum class Category { Frontend, Backend, Database, DevOps, MlAi, Testing, Security, Tooling };

inline constexpr std::size_t kCategoryCount = 8;
inline constexpr std::array<Category, kCategoryCount> kAllCategories = {
    Category::Frontend, Category::Backend,  Category::Database, Category::DevOps,
    Category::MlAi,     Category::Testing,  Category::Security, Category::Tooling};

std::string_view to_string(Category c) noexcept;
std::optional<Category> parse_category(std::string_view name) noexcept;
/// Throws UnknownCategory.
Category category_from_name(std::string_view name);

/// Keyword-lexicon match over the content and tags.
std::set<Category> categorize(std::string_view content, const std::set<std::string>& tags = {});
std::set<Category> categorize_tokens(const std::vector<std::string>& tokens);

enum class PatternKind { Preference, Style };

std::string_view to_string(PatternKind k) noexcept;

struct BetaPrior {
  double alpha;
  double beta;
};

BetaPrior prior_for(PatternKind kind) noexcept;

inline constexpr double kMaxConfidence = 0.95;

struct PatternState {
  PatternKind kind = PatternKind::Preference;
  Category category = Category::Frontend;
  double alpha = 1.0;
  double beta = 4.0;
  std::uint64_t k = 0;  // positive evidence
  std::uint64_t n = 0;  // total observations

  static PatternState fresh(PatternKind kind, Category category);
};

/// min(0.95, (alpha + k) / (alpha + beta + N))
double confidence(const PatternState& state) noexcept;

/// One state per (kind, category).
class PatternTracker {
 public:
  PatternTracker();

  const PatternState& observe(PatternKind kind, Category category, bool positive);
  /// Throws UnknownCategory.
  const PatternState& observe(std::string_view category, bool positive,
                              PatternKind kind = PatternKind::Preference);

  const PatternState& state(PatternKind kind, Category category) const;
  std::vector<PatternState> states() const;
  void restore(const PatternState& state);

  nlohmann::json to_json() const;

 private:
  std::array<PatternState, 2 * kCategoryCount> states_;
};

}  // namespace agentmem::patterns
