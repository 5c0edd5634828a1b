#pragma once

// Topic modeling: LDA via collapsed Gibbs sampling, fold-in inference for
// unseen token lists, popular-reference retrieval over a topic index, and the
// element-wise topic product that feeds sentence representations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "headliner/common.hpp"
#include "headliner/corpus.hpp"

namespace headliner::topics {

using TopicVec = std::vector<double>;

struct TopicModel {
  int K = 0;
  std::size_t V = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<std::vector<double>> phi;  // K rows of length V, each summing to 1

  void save(const std::string& path) const {
    std::string out;
    out += "HLTM";
    le::put_u32(out, 1);
    le::put_u32(out, static_cast<std::uint32_t>(K));
    le::put_u64(out, V);
    le::put_f64(out, alpha);
    le::put_f64(out, beta);
    for (const auto& row : phi)
      for (double v : row) le::put_f64(out, v);
    write_file(path, out);
  }

  static TopicModel load(const std::string& path) {
    le::Reader r(read_file(path), path);
    r.expect_magic("HLTM");
    const std::uint32_t version = r.u32();
    if (version != 1) fail("%s: unsupported topic model version %u", path.c_str(), version);
    TopicModel m;
    m.K = static_cast<int>(r.u32());
    m.V = r.u64();
    m.alpha = r.f64();
    m.beta = r.f64();
    if (m.K < 2 || m.V == 0) fail("%s: degenerate topic model (K=%d, V=%zu)", path.c_str(), m.K, m.V);
    m.phi.assign(static_cast<std::size_t>(m.K), std::vector<double>(m.V));
    for (auto& row : m.phi) {
      double sum = 0.0;
      for (double& v : row) {
        v = r.f64();
        sum += v;
      }
      if (std::fabs(sum - 1.0) > 1e-6) fail("%s: phi row sums to %g", path.c_str(), sum);
    }
    if (!r.at_end()) fail("%s: trailing bytes", path.c_str());
    return m;
  }
};

// ---------------------------------------------------------------------------
// Training and inference
// ---------------------------------------------------------------------------

// Collapsed Gibbs over token-topic assignments. `docs` are token-id bags into
// a vocabulary of size vocab_size; ids the corpus never uses simply keep their
// beta-smoothed prior mass.
inline TopicModel lda_train(const std::vector<std::vector<int>>& docs,
                            std::size_t vocab_size, int K, double alpha, double beta,
                            int iterations, std::uint64_t seed) {
  if (docs.empty()) fail("lda_train: no documents");
  if (vocab_size == 0) fail("lda_train: empty vocabulary");
  if (K < 2) fail("lda_train: K must be >= 2 (got %d)", K);
  if (iterations < 1) fail("lda_train: iterations must be >= 1");
  if (alpha <= 0.0 || beta <= 0.0) fail("lda_train: alpha and beta must be positive");
  for (const auto& d : docs)
    for (int w : d)
      if (w < 0 || static_cast<std::size_t>(w) >= vocab_size)
        fail("lda_train: token id %d out of range [0,%zu)", w, vocab_size);

  const std::size_t kK = static_cast<std::size_t>(K);
  Rng rng = Rng(seed).substream("lda");

  std::vector<std::vector<int>> assign(docs.size());
  std::vector<std::vector<long long>> n_dk(docs.size(), std::vector<long long>(kK, 0));
  std::vector<std::vector<long long>> n_kw(kK, std::vector<long long>(vocab_size, 0));
  std::vector<long long> n_k(kK, 0);

  for (std::size_t d = 0; d < docs.size(); ++d) {
    assign[d].resize(docs[d].size());
    for (std::size_t i = 0; i < docs[d].size(); ++i) {
      const int z = static_cast<int>(rng.uniform_index(kK));
      assign[d][i] = z;
      ++n_dk[d][static_cast<std::size_t>(z)];
      ++n_kw[static_cast<std::size_t>(z)][static_cast<std::size_t>(docs[d][i])];
      ++n_k[static_cast<std::size_t>(z)];
    }
  }

  const double vbeta = static_cast<double>(vocab_size) * beta;
  std::vector<double> weights(kK);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      for (std::size_t i = 0; i < docs[d].size(); ++i) {
        const std::size_t w = static_cast<std::size_t>(docs[d][i]);
        const std::size_t old = static_cast<std::size_t>(assign[d][i]);
        --n_dk[d][old];
        --n_kw[old][w];
        --n_k[old];
        for (std::size_t k = 0; k < kK; ++k)
          weights[k] = (static_cast<double>(n_dk[d][k]) + alpha) *
                       (static_cast<double>(n_kw[k][w]) + beta) /
                       (static_cast<double>(n_k[k]) + vbeta);
        const std::size_t z = rng.sample_weights(weights);
        assign[d][i] = static_cast<int>(z);
        ++n_dk[d][z];
        ++n_kw[z][w];
        ++n_k[z];
      }
    }
  }

  TopicModel model;
  model.K = K;
  model.V = vocab_size;
  model.alpha = alpha;
  model.beta = beta;
  model.phi.assign(kK, std::vector<double>(vocab_size));
  for (std::size_t k = 0; k < kK; ++k) {
    const double denom = static_cast<double>(n_k[k]) + vbeta;
    for (std::size_t w = 0; w < vocab_size; ++w)
      model.phi[k][w] = (static_cast<double>(n_kw[k][w]) + beta) / denom;
  }
  return model;
}

// Fold-in Gibbs with phi frozen; alpha-smoothed normalized counts. An empty
// token list carries no evidence and returns the uniform vector.
inline TopicVec infer_topic_vec(const TopicModel& model, const std::vector<int>& tokens,
                                int iterations, std::uint64_t seed) {
  const std::size_t kK = static_cast<std::size_t>(model.K);
  if (tokens.empty()) return TopicVec(kK, 1.0 / static_cast<double>(model.K));
  if (iterations < 1) fail("infer_topic_vec: iterations must be >= 1");
  for (int w : tokens)
    if (w < 0 || static_cast<std::size_t>(w) >= model.V)
      fail("infer_topic_vec: token id %d out of range [0,%zu)", w, model.V);

  Rng rng(seed);
  std::vector<int> assign(tokens.size());
  std::vector<long long> m_k(kK, 0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int z = static_cast<int>(rng.uniform_index(kK));
    assign[i] = z;
    ++m_k[static_cast<std::size_t>(z)];
  }
  std::vector<double> weights(kK);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::size_t w = static_cast<std::size_t>(tokens[i]);
      const std::size_t old = static_cast<std::size_t>(assign[i]);
      --m_k[old];
      for (std::size_t k = 0; k < kK; ++k)
        weights[k] = (static_cast<double>(m_k[k]) + model.alpha) * model.phi[k][w];
      const std::size_t z = rng.sample_weights(weights);
      assign[i] = static_cast<int>(z);
      ++m_k[z];
    }
  }
  TopicVec theta(kK);
  const double denom = static_cast<double>(tokens.size()) +
                       static_cast<double>(model.K) * model.alpha;
  for (std::size_t k = 0; k < kK; ++k)
    theta[k] = (static_cast<double>(m_k[k]) + model.alpha) / denom;
  return theta;
}

// ---------------------------------------------------------------------------
// Popular-reference retrieval
// ---------------------------------------------------------------------------

struct IndexEntry {
  std::string id;
  TopicVec article_vec;
  TopicVec headline_vec;
  long long popularity = 0;
};

struct PopularReference {
  std::string source_id;
  TopicVec headline_vec;
  double similarity = 0.0;
  long long popularity = 0;
};

inline double inner_product(const TopicVec& a, const TopicVec& b) {
  if (a.size() != b.size())
    fail("inner_product: length mismatch %zu vs %zu", a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Rank entries by inner product with the query (the query's own id is
// excluded), then pick the most popular among the top m. Similarity ties keep
// index order; popularity ties prefer the more similar entry.
inline PopularReference retrieve_popular_reference(const TopicVec& query,
                                                   const std::string& query_id,
                                                   const std::vector<IndexEntry>& index,
                                                   std::size_t m) {
  if (index.empty()) fail("retrieve_popular_reference: empty index");
  if (m < 1) fail("retrieve_popular_reference: m must be >= 1");

  struct Scored {
    double sim;
    std::size_t pos;
  };
  std::vector<Scored> scored;
  scored.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i].id == query_id) continue;
    scored.push_back({inner_product(query, index[i].article_vec), i});
  }
  if (scored.empty())
    fail("retrieve_popular_reference: index holds only the query document");
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) { return a.sim > b.sim; });

  const std::size_t top = std::min(m, scored.size());
  std::size_t best = 0;
  for (std::size_t i = 1; i < top; ++i)
    if (index[scored[i].pos].popularity > index[scored[best].pos].popularity) best = i;
  // within equal popularity the earliest candidate already has the highest
  // similarity (and index order below that), so a strict scan suffices

  const IndexEntry& e = index[scored[best].pos];
  return {e.id, e.headline_vec, scored[best].sim, e.popularity};
}

// element-wise product, the "popularity information" attached to sentence k
inline TopicVec popularity_info(const TopicVec& sentence, const TopicVec& reference) {
  if (sentence.size() != reference.size())
    fail("popularity_info: length mismatch %zu vs %zu", sentence.size(), reference.size());
  TopicVec out(sentence.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sentence[i] * reference[i];
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: retrieval index and the per-document topic cache
// ---------------------------------------------------------------------------

inline void save_index(const std::vector<IndexEntry>& index, int K, const std::string& path) {
  std::string out;
  out += "HLTI";
  le::put_u32(out, 1);
  le::put_u32(out, static_cast<std::uint32_t>(K));
  le::put_u64(out, index.size());
  for (const auto& e : index) {
    if (e.article_vec.size() != static_cast<std::size_t>(K) ||
        e.headline_vec.size() != static_cast<std::size_t>(K))
      fail("save_index: entry \"%s\" has wrong vector length", e.id.c_str());
    le::put_str(out, e.id);
    le::put_i64(out, e.popularity);
    for (double v : e.article_vec) le::put_f64(out, v);
    for (double v : e.headline_vec) le::put_f64(out, v);
  }
  write_file(path, out);
}

inline std::vector<IndexEntry> load_index(const std::string& path, int* k_out = nullptr) {
  le::Reader r(read_file(path), path);
  r.expect_magic("HLTI");
  if (r.u32() != 1) fail("%s: unsupported index version", path.c_str());
  const int K = static_cast<int>(r.u32());
  const std::uint64_t n = r.u64();
  std::vector<IndexEntry> index;
  index.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    IndexEntry e;
    e.id = r.str();
    e.popularity = r.i64();
    e.article_vec.resize(static_cast<std::size_t>(K));
    for (double& v : e.article_vec) v = r.f64();
    e.headline_vec.resize(static_cast<std::size_t>(K));
    for (double& v : e.headline_vec) v = r.f64();
    index.push_back(std::move(e));
  }
  if (!r.at_end()) fail("%s: trailing bytes", path.c_str());
  if (k_out) *k_out = K;
  return index;
}

// Everything the extractor needs per document, computed once and cached.
struct DocTopics {
  std::string id;
  TopicVec article_vec;                 // this article's distribution
  TopicVec reference_vec;               // retrieved popular headline's distribution
  double reference_similarity = 0.0;
  std::vector<TopicVec> sentence_vecs;  // one per sentence
};

inline void save_doc_topics(const std::vector<DocTopics>& docs, int K,
                            const std::string& path) {
  std::string out;
  out += "HLDT";
  le::put_u32(out, 1);
  le::put_u32(out, static_cast<std::uint32_t>(K));
  le::put_u64(out, docs.size());
  for (const auto& d : docs) {
    le::put_str(out, d.id);
    le::put_f64(out, d.reference_similarity);
    for (double v : d.article_vec) le::put_f64(out, v);
    for (double v : d.reference_vec) le::put_f64(out, v);
    le::put_u64(out, d.sentence_vecs.size());
    for (const auto& s : d.sentence_vecs) {
      if (s.size() != static_cast<std::size_t>(K))
        fail("save_doc_topics: \"%s\" sentence vector has wrong length", d.id.c_str());
      for (double v : s) le::put_f64(out, v);
    }
  }
  write_file(path, out);
}

inline std::vector<DocTopics> load_doc_topics(const std::string& path, int* k_out = nullptr) {
  le::Reader r(read_file(path), path);
  r.expect_magic("HLDT");
  if (r.u32() != 1) fail("%s: unsupported cache version", path.c_str());
  const int K = static_cast<int>(r.u32());
  const std::uint64_t n = r.u64();
  std::vector<DocTopics> docs;
  docs.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    DocTopics d;
    d.id = r.str();
    d.reference_similarity = r.f64();
    d.article_vec.resize(static_cast<std::size_t>(K));
    for (double& v : d.article_vec) v = r.f64();
    d.reference_vec.resize(static_cast<std::size_t>(K));
    for (double& v : d.reference_vec) v = r.f64();
    const std::uint64_t s = r.u64();
    d.sentence_vecs.assign(s, TopicVec(static_cast<std::size_t>(K)));
    for (auto& vec : d.sentence_vecs)
      for (double& v : vec) v = r.f64();
    docs.push_back(std::move(d));
  }
  if (!r.at_end()) fail("%s: trailing bytes", path.c_str());
  if (k_out) *k_out = K;
  return docs;
}

// ---------------------------------------------------------------------------
// Corpus-level composition: train the model, infer every distribution, build
// the popular-headline index from training documents, and attach each
// document's retrieved reference.
// ---------------------------------------------------------------------------

struct CorpusTopics {
  TopicModel model;
  std::vector<IndexEntry> index;      // training docs that carry comment counts
  std::vector<DocTopics> doc_topics;  // one per document, corpus order
};

inline CorpusTopics build_corpus_topics(const std::vector<corpus::Document>& docs,
                                        const corpus::Vocabulary& vocab, int K, double alpha,
                                        double beta, int train_iterations,
                                        int fold_in_iterations, std::size_t m,
                                        std::uint64_t seed) {
  if (docs.empty()) fail("build_corpus_topics: no documents");
  const auto derived = [&](const std::string& name) {
    return Rng(seed).substream(name).next_u64();
  };

  std::vector<std::vector<int>> article_ids;
  article_ids.reserve(docs.size());
  for (const auto& d : docs) article_ids.push_back(vocab.encode(d.all_tokens()));

  CorpusTopics out;
  out.model = lda_train(article_ids, vocab.size(), K, alpha, beta, train_iterations,
                        derived("lda"));

  out.doc_topics.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const corpus::Document& d = docs[i];
    DocTopics dt;
    dt.id = d.id;
    dt.article_vec = infer_topic_vec(out.model, article_ids[i], fold_in_iterations,
                                     derived("fold-article-" + d.id));
    dt.sentence_vecs.reserve(d.sentences.size());
    for (std::size_t s = 0; s < d.sentences.size(); ++s)
      dt.sentence_vecs.push_back(infer_topic_vec(out.model, vocab.encode(d.sentences[s]),
                                                 fold_in_iterations,
                                                 derived(strfmt("fold-sentence-%zu-", s) + d.id)));
    out.doc_topics.push_back(std::move(dt));

    if (d.split == corpus::Split::train && d.comments.has_value()) {
      IndexEntry e;
      e.id = d.id;
      e.article_vec = out.doc_topics.back().article_vec;
      e.headline_vec = infer_topic_vec(out.model, vocab.encode(d.headline), fold_in_iterations,
                                       derived("fold-headline-" + d.id));
      e.popularity = *d.comments;
      out.index.push_back(std::move(e));
    }
  }
  if (out.index.empty()) fail("build_corpus_topics: no training documents with comment counts");

  for (std::size_t i = 0; i < docs.size(); ++i) {
    const PopularReference ref =
        retrieve_popular_reference(out.doc_topics[i].article_vec, docs[i].id, out.index, m);
    out.doc_topics[i].reference_vec = ref.headline_vec;
    out.doc_topics[i].reference_similarity = ref.similarity;
  }
  return out;
}

}  // namespace headliner::topics
