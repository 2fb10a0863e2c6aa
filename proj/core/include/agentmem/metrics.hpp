#pragma once
// Ranking-quality metrics.

#include <cstddef>
#include <vector>

namespace agentmem::metrics {

/// Sum over the first k of (2^rel - 1) / log2(rank + 1), rank starting at 1.
double dcg_at(std::size_t k, const std::vector<int>& ranked_labels);

/// DCG@k of the ranking over DCG@k of the ideal ordering of `judged_labels`
/// (every judged item for the query, retrieved or not). 0 when nothing is relevant.
double ndcg_at(std::size_t k, const std::vector<int>& ranked_labels,
               const std::vector<int>& judged_labels);
/// Ideal ordering taken from the ranked labels themselves.
double ndcg_at(std::size_t k, const std::vector<int>& ranked_labels);

/// Reciprocal rank of the first relevant item, 0 if none.
double reciprocal_rank(const std::vector<bool>& relevant);
/// Mean over queries. Throws EmptyInput.
double mrr(const std::vector<std::vector<bool>>& rankings);
/// Mean NDCG@k over queries. Throws EmptyInput.
double mean_ndcg_at(std::size_t k, const std::vector<std::vector<int>>& rankings,
                    const std::vector<std::vector<int>>& judged);

/// Relevant items in the first k over all relevant items (0 when there are none).
double recall_at(std::size_t k, const std::vector<bool>& relevant, std::size_t total_relevant);

/// Graded relevance of a correct-topic item: importance 1-4 -> 1, 5-7 -> 2, 8-10 -> 3.
int relevance_from_importance(int importance) noexcept;

}  // namespace agentmem::metrics
