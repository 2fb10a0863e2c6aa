#include "agentmem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "agentmem/common.hpp"

namespace agentmem::metrics {

double dcg_at(std::size_t k, const std::vector<int>& ranked_labels) {
  double dcg = 0.0;
  const std::size_t n = std::min(k, ranked_labels.size());
  for (std::size_t i = 0; i < n; ++i) {
    dcg += (std::exp2(ranked_labels[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg;
}

double ndcg_at(std::size_t k, const std::vector<int>& ranked_labels,
               const std::vector<int>& judged_labels) {
  std::vector<int> ideal = judged_labels;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg_at(k, ideal);
  return idcg > 0.0 ? dcg_at(k, ranked_labels) / idcg : 0.0;
}

double ndcg_at(std::size_t k, const std::vector<int>& ranked_labels) {
  return ndcg_at(k, ranked_labels, ranked_labels);
}

double reciprocal_rank(const std::vector<bool>& relevant) {
  for (std::size_t i = 0; i < relevant.size(); ++i) {
    if (relevant[i]) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double mrr(const std::vector<std::vector<bool>>& rankings) {
  if (rankings.empty()) throw Error(ErrorCode::EmptyInput, "mrr of no rankings");
  double sum = 0.0;
  for (const auto& r : rankings) sum += reciprocal_rank(r);
  return sum / static_cast<double>(rankings.size());
}

double mean_ndcg_at(std::size_t k, const std::vector<std::vector<int>>& rankings,
                    const std::vector<std::vector<int>>& judged) {
  if (rankings.empty()) throw Error(ErrorCode::EmptyInput, "ndcg of no rankings");
  double sum = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    sum += q < judged.size() ? ndcg_at(k, rankings[q], judged[q]) : ndcg_at(k, rankings[q]);
  }
  return sum / static_cast<double>(rankings.size());
}

double recall_at(std::size_t k, const std::vector<bool>& relevant, std::size_t total_relevant) {
  if (total_relevant == 0) return 0.0;
  const std::size_t n = std::min(k, relevant.size());
  const auto hits = std::count(relevant.begin(), relevant.begin() + static_cast<std::ptrdiff_t>(n), true);
  return static_cast<double>(hits) / static_cast<double>(total_relevant);
}

int relevance_from_importance(int importance) noexcept {
  if (importance >= 8) return 3;
  if (importance >= 5) return 2;
  return 1;
}

}  // namespace agentmem::metrics
