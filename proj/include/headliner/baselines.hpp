#pragma once

// Non-neural baselines: BM25 headline retrieval over training headlines,
// first-sentence (prefix), and a random sentence.

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "headliner/common.hpp"
#include "headliner/corpus.hpp"

namespace headliner::baselines {

using corpus::Tokens;

inline Tokens truncated(Tokens t, std::size_t cap = corpus::kHeadlineTokenCap) {
  if (t.size() > cap) t.resize(cap);
  return t;
}

// Okapi BM25 over a fixed set of headlines. The query is a full article token
// multiset: repeated query terms weight their term's contribution.
class Bm25Index {
 public:
  explicit Bm25Index(std::vector<Tokens> headlines, double k1 = 1.2, double b = 0.75)
      : headlines_(std::move(headlines)), k1_(k1), b_(b) {
    if (headlines_.empty()) fail("bm25: empty headline index");
    double total_len = 0.0;
    for (std::size_t h = 0; h < headlines_.size(); ++h) {
      if (headlines_[h].empty()) fail("bm25: empty headline at index %zu", h);
      total_len += static_cast<double>(headlines_[h].size());
      std::unordered_map<std::string, int> tf;
      for (const auto& tok : headlines_[h]) ++tf[tok];
      for (const auto& [tok, count] : tf)
        postings_[tok].push_back({h, count});  // headlines scanned in id order,
                                               // so postings stay sorted by id
    }
    avg_len_ = total_len / static_cast<double>(headlines_.size());
  }

  std::size_t size() const { return headlines_.size(); }
  const Tokens& headline(std::size_t i) const { return headlines_[i]; }

  // idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5)), nonnegative for any df <= N
  double idf(const std::string& term) const {
    const auto it = postings_.find(term);
    const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
    const double n = static_cast<double>(headlines_.size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }

  // BM25 score of one headline for the query multiset
  double score(const Tokens& query, std::size_t h) const {
    if (h >= headlines_.size()) fail("bm25: headline index %zu out of range", h);
    std::unordered_map<std::string, int> qf;
    for (const auto& tok : query) ++qf[tok];
    std::unordered_map<std::string, int> tf;
    for (const auto& tok : headlines_[h]) ++tf[tok];
    const double len_norm =
        k1_ * (1.0 - b_ + b_ * static_cast<double>(headlines_[h].size()) / avg_len_);
    double s = 0.0;
    for (const auto& [tok, q] : qf) {
      const auto it = tf.find(tok);
      if (it == tf.end()) continue;
      const double f = static_cast<double>(it->second);
      s += static_cast<double>(q) * idf(tok) * f * (k1_ + 1.0) / (f + len_norm);
    }
    return s;
  }

  // headline maximizing the BM25 score; ties go to the lowest headline id
  std::size_t best(const Tokens& query) const {
    std::vector<double> scores(headlines_.size(), 0.0);
    std::unordered_map<std::string, int> qf;
    for (const auto& tok : query) ++qf[tok];
    for (const auto& [tok, q] : qf) {
      const auto it = postings_.find(tok);
      if (it == postings_.end()) continue;
      const double w = static_cast<double>(q) * idf(tok) * (k1_ + 1.0);
      for (const auto& [h, count] : it->second) {
        const double f = static_cast<double>(count);
        const double len_norm =
            k1_ * (1.0 - b_ + b_ * static_cast<double>(headlines_[h].size()) / avg_len_);
        scores[h] += w * f / (f + len_norm);
      }
    }
    std::size_t best_h = 0;
    for (std::size_t h = 1; h < scores.size(); ++h)
      if (scores[h] > scores[best_h]) best_h = h;
    return best_h;
  }

 private:
  struct Posting {
    std::size_t headline;
    int tf;
  };
  std::vector<Tokens> headlines_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  double avg_len_ = 0.0;
  double k1_, b_;
};

inline Tokens bm25_headline(const Tokens& article_tokens, const Bm25Index& index) {
  return truncated(index.headline(index.best(article_tokens)));
}

inline Tokens prefix_headline(const corpus::Document& doc) {
  if (doc.sentences.empty()) fail("prefix_headline: \"%s\" has no sentences", doc.id.c_str());
  return truncated(doc.sentences.front());
}

inline Tokens random_headline(const corpus::Document& doc, std::uint64_t seed) {
  if (doc.sentences.empty()) fail("random_headline: \"%s\" has no sentences", doc.id.c_str());
  Rng rng(seed);
  return truncated(doc.sentences[rng.uniform_index(doc.sentences.size())]);
}

}  // namespace headliner::baselines
