// The sentence extractor: a convolutional sentence encoder feeding a
// bidirectional LSTM, topic-product feature augmentation, a glimpse attention
// pass, and a pointer head that yields a categorical distribution over the
// article's sentences. Pretraining minimizes the negative log-likelihood of
// the faithfulness index, optionally plus the popularity index.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "headliner/autodiff.hpp"
#include "headliner/common.hpp"
#include "headliner/corpus.hpp"
#include "headliner/layers.hpp"
#include "headliner/optim.hpp"
#include "headliner/topics.hpp"

namespace headliner::extractor {

using ad::Tensor;

struct ExtractorConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;      // token embedding width
  std::size_t conv_channels = 20;  // channels per convolution width
  std::size_t hidden = 32;         // LSTM hidden size per direction
  std::size_t topics = 16;         // topic vector length K
  std::size_t attention_dim = 32;  // glimpse/pointer space and z dimension
  std::size_t sentence_cap = corpus::kSentenceTokenCap;
  bool use_pta_features = true;    // topic-product slice of e_k
  bool use_pta_loss = true;        // popularity term in the pretraining loss
};

inline void init_params(optim::ParamStore& store, const ExtractorConfig& cfg, Rng& rng) {
  if (cfg.vocab_size == 0) fail("extractor: vocab_size not set");
  const std::size_t feat = 2 * cfg.hidden + cfg.topics;
  store.create("extractor/embed",
               optim::xavier_uniform(rng, cfg.vocab_size, cfg.embed_dim));
  layers::init_conv_bank(store, "extractor", rng, cfg.embed_dim, cfg.conv_channels);
  layers::init_bilstm(store, "extractor/enc", rng, 3 * cfg.conv_channels, cfg.hidden);
  store.create("extractor/z", optim::uniform_vector(rng, cfg.attention_dim, 0.1));
  layers::init_additive_attention(store, "extractor/glimpse", rng, cfg.attention_dim, feat,
                                  cfg.attention_dim);
  store.create("extractor/project/w",
               optim::xavier_uniform(rng, feat, cfg.attention_dim));
  layers::init_additive_attention(store, "extractor/pointer", rng, cfg.attention_dim, feat,
                                  cfg.attention_dim);
}

// sentence tokens -> capped id list; rejects sentences that are empty or all
// padding after truncation
inline std::vector<int> encode_sentence_ids(const corpus::Vocabulary& vocab,
                                            const corpus::Tokens& tokens, std::size_t cap) {
  if (tokens.empty()) fail("extractor: empty sentence");
  corpus::Tokens capped(tokens.begin(),
                        tokens.begin() + static_cast<long>(std::min(tokens.size(), cap)));
  std::vector<int> ids = vocab.encode(capped);
  bool content = false;
  for (int id : ids)
    if (id != corpus::Vocabulary::kPad) content = true;
  if (!content) fail("extractor: sentence is all padding");
  return ids;
}

// CNN sentence vectors r_k contextualized by the biLSTM into s_k
inline std::vector<ad::Value> encode_sentences(optim::GraphParams& p,
                                               const ExtractorConfig& cfg,
                                               const std::vector<std::vector<int>>& sentences) {
  if (sentences.empty()) fail("extractor: document has no sentences");
  std::vector<ad::Value> r;
  r.reserve(sentences.size());
  for (const auto& ids : sentences) {
    if (ids.empty()) fail("extractor: empty sentence id list");
    ad::Value emb = ad::embedding(p["extractor/embed"], ids);
    r.push_back(layers::conv_bank_vector(p, "extractor", emb));
  }
  return layers::run_bilstm(p, "extractor/enc", r, cfg.hidden);
}

// e_k = [s_k ; theta^S_k (x) theta^ref]; the topic slice is a constant input
// (cleared entirely when use_pta_features is off, keeping shapes identical)
inline std::vector<ad::Value> pta_features(ad::Tape& tape, const std::vector<ad::Value>& s,
                                           const std::vector<topics::TopicVec>& sentence_vecs,
                                           const topics::TopicVec& reference_vec,
                                           bool use_pta_features) {
  if (s.size() != sentence_vecs.size())
    fail("extractor: %zu sentence states vs %zu topic vecs", s.size(), sentence_vecs.size());
  const std::size_t k = reference_vec.size();
  std::vector<ad::Value> e;
  e.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (sentence_vecs[i].size() != k)
      fail("extractor: sentence topic vec %zu has length %zu, want %zu", i,
           sentence_vecs[i].size(), k);
    Tensor prod({k});
    if (use_pta_features)
      for (std::size_t j = 0; j < k; ++j) prod.data[j] = sentence_vecs[i][j] * reference_vec[j];
    e.push_back(ad::concat({s[i], tape.leaf(std::move(prod))}));
  }
  return e;
}

struct ExtractionOutput {
  std::vector<ad::Value> e;  // PTA features per sentence
  ad::Value alpha;           // glimpse attention weights
  ad::Value logits;          // pointer scores o
  ad::Value p;               // extraction distribution P(k)
};

// glimpse (u, alpha, c) then pointer scoring (o, P)
inline ExtractionOutput pointer_distribution(optim::GraphParams& p,
                                             std::vector<ad::Value> e) {
  if (e.empty()) fail("extractor: no feature vectors");
  ad::Value alpha = layers::additive_attention(p, "extractor/glimpse", p["extractor/z"], e);
  std::vector<ad::Value> projected;
  projected.reserve(e.size());
  for (const ad::Value& ek : e) projected.push_back(ad::vecmat(ek, p["extractor/project/w"]));
  ad::Value c = layers::attention_context(alpha, projected);

  ad::Value wq = ad::vecmat(c, p["extractor/pointer/wq"]);
  std::vector<ad::Value> scores;
  scores.reserve(e.size());
  for (const ad::Value& ek : e) {
    ad::Value pre = ad::add(ad::vecmat(ek, p["extractor/pointer/wk"]), wq);
    scores.push_back(ad::dot(p["extractor/pointer/v"], ad::tanh_v(pre)));
  }
  ad::Value logits = ad::stack_scalars(scores);
  return {std::move(e), alpha, logits, ad::softmax(logits)};
}

// full forward pass for one document
inline ExtractionOutput forward(ad::Tape& tape, optim::GraphParams& p,
                                const ExtractorConfig& cfg,
                                const std::vector<std::vector<int>>& sentences,
                                const std::vector<topics::TopicVec>& sentence_vecs,
                                const topics::TopicVec& reference_vec) {
  std::vector<ad::Value> s = encode_sentences(p, cfg, sentences);
  std::vector<ad::Value> e =
      pta_features(tape, s, sentence_vecs, reference_vec, cfg.use_pta_features);
  return pointer_distribution(p, std::move(e));
}

// -log P(y), plus -log P(y') under the popularity-aware loss
inline ad::Value pretrain_loss(const ExtractionOutput& out, std::size_t y, std::size_t y_prime,
                               bool use_pta_loss) {
  const std::size_t n = out.p.val().shape[0];
  if (y >= n) fail("extractor: faithfulness index %zu of %zu sentences", y, n);
  ad::Value loss = ad::neg_log_pick(out.p, y);
  if (use_pta_loss) {
    if (y_prime >= n) fail("extractor: popularity index %zu of %zu sentences", y_prime, n);
    loss = ad::add(loss, ad::neg_log_pick(out.p, y_prime));
  }
  return loss;
}

}  // namespace headliner::extractor
