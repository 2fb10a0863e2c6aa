#include "agentmem/text_index.hpp"

#include <algorithm>
#include <iterator>
#include <cmath>
#include <unordered_set>

namespace agentmem::text {

namespace {

// Decodes one code point; malformed bytes decode as U+FFFD and consume one byte.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto lead = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto c = static_cast<unsigned char>(s[i + k]);
    return (c & 0xC0) == 0x80 ? (c & 0x3F) : -1;
  };
  if (lead < 0x80) {
    ++i;
    return lead;
  }
  if ((lead & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) {
      i += 2;
      return static_cast<char32_t>(((lead & 0x1F) << 6) | c1);
    }
  } else if ((lead & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = c1 >= 0 ? cont(2) : -1;
    if (c2 >= 0) {
      i += 3;
      return static_cast<char32_t>(((lead & 0x0F) << 12) | (c1 << 6) | c2);
    }
  } else if ((lead & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = c1 >= 0 ? cont(2) : -1, c3 = c2 >= 0 ? cont(3) : -1;
    if (c3 >= 0) {
      i += 4;
      return static_cast<char32_t>(((lead & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
    }
  }
  ++i;
  return 0xFFFD;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Word characters: ASCII letters/digits and every non-ASCII code point outside the
// punctuation, symbol, space and emoji blocks.
bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  }
  if (cp <= 0xBF) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xFE00 && cp <= 0xFE0F) return false;
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  if (cp >= 0xFF1A && cp <= 0xFF20) return false;
  if (cp >= 0xFF3B && cp <= 0xFF40) return false;
  if (cp >= 0xFF5B && cp <= 0xFF65) return false;
  if (cp == 0xFFFD) return false;
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0x80) return cp;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;  // Latin-1
  if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;  // Latin Extended-A
  if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
  if (cp >= 0x14A && cp <= 0x177 && cp % 2 == 0) return cp + 1;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E && cp % 2 == 1) return cp + 1;
  if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 32;  // Greek
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;  // Cyrillic
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

constexpr std::string_view kStopwords[] = {
    "a",       "about",  "above",   "after",   "again",   "against", "all",    "am",
    "an",      "and",    "any",     "are",     "as",      "at",      "be",     "because",
    "been",    "before", "being",   "below",   "between", "both",    "but",    "by",
    "can",     "could",  "did",     "do",      "does",    "doing",   "down",   "during",
    "each",    "few",    "for",     "from",    "further", "had",     "has",    "have",
    "having",  "he",     "her",     "here",    "hers",    "herself", "him",    "himself",
    "his",     "how",    "if",      "in",      "into",    "is",      "it",     "its",
    "itself",  "just",   "me",      "more",    "most",    "my",      "myself", "no",
    "nor",     "not",    "now",     "of",      "off",     "on",      "once",   "only",
    "or",      "other",  "our",     "ours",    "ourselves", "out",   "over",   "own",
    "same",    "she",    "should",  "so",      "some",    "such",    "than",   "that",
    "the",     "their",  "theirs",  "them",    "themselves", "then", "there",  "these",
    "they",    "this",   "those",   "through", "to",      "too",     "under",  "until",
    "up",      "very",   "was",     "we",      "were",    "what",    "when",   "where",
    "which",   "while",  "who",     "whom",    "why",     "will",    "with",   "would",
    "you",     "your",   "yours",   "yourself", "yourselves", "also", "via",
};

const std::unordered_set<std::string_view>& stopword_set() {
  static const std::unordered_set<std::string_view> set(std::begin(kStopwords), std::end(kStopwords));
  return set;
}

}  // namespace

bool is_stopword(std::string_view token) noexcept { return stopword_set().contains(token); }

std::vector<std::string> tokenize(std::string_view utf8) {
  std::vector<std::string> out;
  std::string current;
  std::size_t points = 0;
  auto flush = [&] {
    if (points >= 2 && !is_stopword(current)) out.push_back(current);
    current.clear();
    points = 0;
  };
  std::size_t i = 0;
  while (i < utf8.size()) {
    const char32_t cp = next_code_point(utf8, i);
    if (is_word_char(cp)) {
      append_utf8(current, to_lower(cp));
      ++points;
    } else {
      flush();
    }
  }
  flush();
  return out;
}

TermCounts count_terms(const std::vector<std::string>& tokens) {
  std::vector<std::string> sorted(tokens);
  std::sort(sorted.begin(), sorted.end());
  TermCounts out;
  for (auto& t : sorted) {
    if (!out.empty() && out.back().first == t) {
      ++out.back().second;
    } else {
      out.emplace_back(std::move(t), 1U);
    }
  }
  return out;
}

void TermStatistics::add_document(const TermCounts& terms) {
  ++documents_;
  for (const auto& [term, count] : terms) ++df_[term];
}

std::size_t TermStatistics::document_frequency(std::string_view term) const {
  auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

double smoothed_idf(std::size_t documents, std::size_t df) noexcept {
  return std::log((1.0 + static_cast<double>(documents)) / (1.0 + static_cast<double>(df))) + 1.0;
}

TfIdfVector tfidf_vector(const TermCounts& terms, const CorpusStats& stats) {
  TfIdfVector v;
  const std::size_t n = stats.document_count();
  double sq = 0.0;
  v.weights.reserve(terms.size());
  for (const auto& [term, count] : terms) {
    const double w = static_cast<double>(count) * smoothed_idf(n, stats.document_frequency(term));
    if (w > 0.0) {
      v.weights.emplace_back(term, w);
      sq += w * w;
    }
  }
  v.norm = std::sqrt(sq);
  return v;
}

TfIdfVector tfidf_vector(std::string_view text, const CorpusStats& stats) {
  return tfidf_vector(count_terms(tokenize(text)), stats);
}

double cosine(const TfIdfVector& a, const TfIdfVector& b) noexcept {
  if (a.empty() || b.empty() || a.norm <= 0.0 || b.norm <= 0.0) return 0.0;
  double dot = 0.0;
  auto ia = a.weights.begin();
  auto ib = b.weights.begin();
  while (ia != a.weights.end() && ib != b.weights.end()) {
    const int cmp = ia->first.compare(ib->first);
    if (cmp == 0) {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    } else if (cmp < 0) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return std::clamp(dot / (a.norm * b.norm), 0.0, 1.0);
}

double bm25_idf(std::size_t documents, std::size_t df) noexcept {
  const double n = static_cast<double>(documents);
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

void InvertedIndex::index(MemoryId id, std::string_view content, Timestamp created_at) {
  auto terms = count_terms(tokenize(content));
  std::unique_lock lock(mu_);
  deindex_locked(id);
  Document doc;
  for (const auto& [term, count] : terms) {
    doc.length += count;
    auto& list = postings_[term];
    if (list.term.empty()) list.term = term;
    auto& p = list.postings;
    if (p.empty() || p.back().id < id) {
      p.push_back({id, count});
    } else {
      auto pos = std::lower_bound(p.begin(), p.end(), id,
                                  [](const Posting& a, MemoryId b) { return a.id < b; });
      p.insert(pos, {id, count});
    }
  }
  doc.terms = std::move(terms);
  doc.created_at = created_at;
  total_length_ += doc.length;
  docs_.emplace(id, std::move(doc));
}

void InvertedIndex::deindex(MemoryId id) {
  std::unique_lock lock(mu_);
  deindex_locked(id);
}

void InvertedIndex::clear() {
  std::unique_lock lock(mu_);
  postings_.clear();
  docs_.clear();
  total_length_ = 0;
}

void InvertedIndex::deindex_locked(MemoryId id) {
  auto it = docs_.find(id);
  if (it == docs_.end()) return;
  for (const auto& [term, count] : it->second.terms) {
    auto pl = postings_.find(term);
    if (pl == postings_.end()) continue;
    auto& p = pl->second.postings;
    auto pos = std::lower_bound(p.begin(), p.end(), id,
                                [](const Posting& a, MemoryId b) { return a.id < b; });
    if (pos != p.end() && pos->id == id) p.erase(pos);
    if (p.empty()) postings_.erase(pl);
  }
  total_length_ -= it->second.length;
  docs_.erase(it);
}

std::size_t InvertedIndex::ReadView::document_frequency(std::string_view term) const {
  auto it = index_->postings_.find(term);
  return it == index_->postings_.end() ? 0 : it->second.postings.size();
}

const TermCounts* InvertedIndex::ReadView::term_counts(MemoryId id) const {
  auto it = index_->docs_.find(id);
  return it == index_->docs_.end() ? nullptr : &it->second.terms;
}

const PostingList* InvertedIndex::ReadView::postings(std::string_view term) const {
  auto it = index_->postings_.find(term);
  return it == index_->postings_.end() ? nullptr : &it->second;
}

double InvertedIndex::ReadView::average_length() const {
  if (index_->docs_.empty()) return 0.0;
  return static_cast<double>(index_->total_length_) / static_cast<double>(index_->docs_.size());
}

std::vector<ScoredId> InvertedIndex::ReadView::match(std::string_view query,
                                                     std::size_t limit) const {
  return match_tokens(tokenize(query), limit);
}

std::vector<ScoredId> InvertedIndex::ReadView::match_tokens(const std::vector<std::string>& tokens,
                                                            std::size_t limit) const {
  std::vector<std::string> terms(tokens);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

  const std::size_t n = index_->docs_.size();
  const double avgdl = average_length();
  const double k1 = index_->params_.k1;
  const double b = index_->params_.b;

  std::unordered_map<MemoryId, double> acc;
  for (const auto& term : terms) {
    const PostingList* list = postings(term);
    if (list == nullptr) continue;
    const double idf = bm25_idf(n, list->postings.size());
    for (const auto& posting : list->postings) {
      const double dl = index_->docs_.at(posting.id).length;
      const double tf = posting.tf;
      const double norm = k1 * (1.0 - b + b * (avgdl > 0.0 ? dl / avgdl : 1.0));
      acc[posting.id] += idf * tf * (k1 + 1.0) / (tf + norm);
    }
  }

  struct Ranked {
    ScoredId hit;
    Timestamp created;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(acc.size());
  for (const auto& [id, score] : acc) {
    ranked.push_back({{id, score}, index_->docs_.at(id).created_at});
  }
  auto better = [](const Ranked& a, const Ranked& b) {
    if (a.hit.score != b.hit.score) return a.hit.score > b.hit.score;
    if (a.created != b.created) return a.created > b.created;
    return a.hit.id > b.hit.id;
  };
  if (limit != 0 && limit < ranked.size()) {
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(limit),
                      ranked.end(), better);
    ranked.resize(limit);
  } else {
    std::sort(ranked.begin(), ranked.end(), better);
  }
  std::vector<ScoredId> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(r.hit);
  return out;
}

}  // namespace agentmem::text
