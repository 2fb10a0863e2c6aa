#pragma once
// Tokenization, BM25 inverted index and TF-IDF vectors.

#include <cstdint>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "agentmem/common.hpp"

namespace agentmem::text {

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

template <class V>
using StringMap = std::unordered_map<std::string, V, StringHash, std::equal_to<>>;

/// Lowercased letter/digit runs of a UTF-8 string. Tokens under two code points and
/// English stopwords are dropped.
std::vector<std::string> tokenize(std::string_view utf8);

bool is_stopword(std::string_view token) noexcept;

/// Term -> raw count, sorted by term.
using TermCounts = std::vector<std::pair<std::string, std::uint32_t>>;

TermCounts count_terms(const std::vector<std::string>& tokens);

class CorpusStats {
 public:
  virtual ~CorpusStats() = default;
  virtual std::size_t document_count() const = 0;
  virtual std::size_t document_frequency(std::string_view term) const = 0;
};

/// Standalone document-frequency table, for corpora that are not in an index.
class TermStatistics final : public CorpusStats {
 public:
  void add_document(const TermCounts& terms);
  std::size_t document_count() const override { return documents_; }
  std::size_t document_frequency(std::string_view term) const override;

 private:
  std::size_t documents_ = 0;
  StringMap<std::size_t> df_;
};

/// ln((1 + N) / (1 + df)) + 1
double smoothed_idf(std::size_t documents, std::size_t df) noexcept;

struct TfIdfVector {
  std::vector<std::pair<std::string, double>> weights;  // sorted by term, all > 0
  double norm = 0.0;

  bool empty() const noexcept { return weights.empty(); }
};

TfIdfVector tfidf_vector(const TermCounts& terms, const CorpusStats& stats);
TfIdfVector tfidf_vector(std::string_view text, const CorpusStats& stats);

/// In [0, 1]; 0 when either vector is empty.
double cosine(const TfIdfVector& a, const TfIdfVector& b) noexcept;

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// ln(1 + (N - df + 0.5) / (df + 0.5))
double bm25_idf(std::size_t documents, std::size_t df) noexcept;

struct Posting {
  MemoryId id;
  std::uint32_t tf;
};

struct PostingList {
  std::string term;
  std::vector<Posting> postings;  // sorted by id

  std::size_t document_frequency() const noexcept { return postings.size(); }
};

struct ScoredId {
  MemoryId id;
  double score;
};

class InvertedIndex {
  struct Document {
    TermCounts terms;
    std::uint32_t length = 0;
    Timestamp created_at{};
  };

 public:
  explicit InvertedIndex(Bm25Params params = {}) : params_(params) {}

  /// Replaces any earlier version of the document.
  void index(MemoryId id, std::string_view content, Timestamp created_at);
  void deindex(MemoryId id);
  void clear();

  /// Consistent read access; holds a shared lock for its lifetime.
  class ReadView final : public CorpusStats {
   public:
    std::size_t document_count() const override { return index_->docs_.size(); }
    std::size_t document_frequency(std::string_view term) const override;

    /// Documents containing any query token, BM25-scored, best first; ties go to
    /// the newer document. limit == 0 returns every match.
    std::vector<ScoredId> match(std::string_view query, std::size_t limit) const;
    std::vector<ScoredId> match_tokens(const std::vector<std::string>& tokens,
                                       std::size_t limit) const;

    const TermCounts* term_counts(MemoryId id) const;
    const PostingList* postings(std::string_view term) const;
    double average_length() const;

   private:
    friend class InvertedIndex;
    explicit ReadView(const InvertedIndex& index) : index_(&index), lock_(index.mu_) {}

    const InvertedIndex* index_;
    std::shared_lock<std::shared_mutex> lock_;
  };

  ReadView read() const { return ReadView(*this); }

  std::vector<ScoredId> match(std::string_view query, std::size_t limit) const {
    return read().match(query, limit);
  }
  std::size_t size() const { return read().document_count(); }

 private:
  void deindex_locked(MemoryId id);

  Bm25Params params_;
  mutable std::shared_mutex mu_;
  StringMap<PostingList> postings_;
  std::unordered_map<MemoryId, Document> docs_;
  std::uint64_t total_length_ = 0;
};

}  // namespace agentmem::text
