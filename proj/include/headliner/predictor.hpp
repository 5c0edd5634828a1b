// The binary popularity predictor: convolutions of widths {1,2,3} over the
// headline tokens, an LSTM over the per-position channel-concatenated feature
// maps, one additive attention head per kernel width, and a linear head whose
// sigmoid is the popularity probability used as the RL reward term. The
// per-width attention weights are exportable for heatmap inspection.
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "headliner/autodiff.hpp"
#include "headliner/common.hpp"
#include "headliner/corpus.hpp"
#include "headliner/layers.hpp"
#include "headliner/optim.hpp"

namespace headliner::predictor {

using ad::Tensor;

struct PredictorConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t conv_channels = 20;
  std::size_t hidden = 32;
  std::size_t attention_dim = 32;
  std::size_t headline_cap = corpus::kHeadlineTokenCap;
};

inline void init_params(optim::ParamStore& store, const PredictorConfig& cfg, Rng& rng) {
  if (cfg.vocab_size == 0) fail("predictor: vocab_size not set");
  store.create("predictor/embed",
               optim::xavier_uniform(rng, cfg.vocab_size, cfg.embed_dim));
  layers::init_conv_bank(store, "predictor", rng, cfg.embed_dim, cfg.conv_channels);
  layers::init_lstm(store, "predictor/lstm", rng, 3 * cfg.conv_channels, cfg.hidden);
  for (std::size_t w : layers::kConvWidths) {
    // per-width head: query = LSTM state, key = that width's feature row
    layers::init_additive_attention(store, strfmt("predictor/att%zu", w), rng, cfg.hidden,
                                    cfg.conv_channels, cfg.attention_dim);
  }
  layers::init_affine(store, "predictor/out", rng, 3 * cfg.hidden, 1);
}

inline std::vector<int> encode_headline_ids(const corpus::Vocabulary& vocab,
                                            const corpus::Tokens& headline, std::size_t cap) {
  if (headline.empty()) fail("predictor: empty headline");
  corpus::Tokens capped(
      headline.begin(),
      headline.begin() + static_cast<long>(std::min(headline.size(), cap)));
  return vocab.encode(capped);
}

struct ForwardOut {
  ad::Value logit;                    // scalar
  std::array<ad::Value, 3> attention; // weights over positions, one per width
};

// graph-building forward pass shared by training and scoring
inline ForwardOut forward_logit(ad::Tape& tape, optim::GraphParams& p,
                                const PredictorConfig& cfg, const std::vector<int>& ids) {
  (void)tape;
  if (ids.empty()) fail("predictor: empty id list");
  ad::Value emb = ad::embedding(p["predictor/embed"], ids);
  const std::vector<ad::Value> maps = layers::conv_bank_maps(p, "predictor", emb);
  ad::Value per_pos = layers::concat_maps_per_position(maps);
  std::vector<ad::Value> rows;
  rows.reserve(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) rows.push_back(ad::row(per_pos, t));
  const std::vector<ad::Value> states = layers::run_lstm(p, "predictor/lstm", rows, cfg.hidden);

  std::array<ad::Value, 3> attention;
  std::vector<ad::Value> contexts;
  for (std::size_t wi = 0; wi < 3; ++wi) {
    const std::string prefix = strfmt("predictor/att%zu", layers::kConvWidths[wi]);
    std::vector<ad::Value> scores;
    scores.reserve(ids.size());
    for (std::size_t t = 0; t < ids.size(); ++t) {
      ad::Value pre = ad::add(ad::vecmat(states[t], p[prefix + "/wq"]),
                              ad::vecmat(ad::row(maps[wi], t), p[prefix + "/wk"]));
      scores.push_back(ad::dot(p[prefix + "/v"], ad::tanh_v(pre)));
    }
    ad::Value alpha = ad::softmax(ad::stack_scalars(scores));
    attention[wi] = alpha;
    contexts.push_back(layers::attention_context(alpha, states));
  }
  ad::Value logit = ad::pick(layers::affine(p, "predictor/out", ad::concat(contexts)), 0);
  return {logit, attention};
}

struct PopScore {
  double probability = 0.0;
  double logit = 0.0;
  std::array<std::vector<double>, 3> attention;  // per width, per position
};

// pure scoring with frozen parameters; deterministic per input
inline PopScore pop_score(optim::ParamStore& store, const PredictorConfig& cfg,
                          const corpus::Tokens& headline, const corpus::Vocabulary& vocab) {
  const std::vector<int> ids = encode_headline_ids(vocab, headline, cfg.headline_cap);
  ad::Tape tape;
  optim::GraphParams p(tape, store);
  const ForwardOut out = forward_logit(tape, p, cfg, ids);
  PopScore score;
  score.logit = out.logit.val().item();
  score.probability = 1.0 / (1.0 + std::exp(-score.logit));
  for (std::size_t wi = 0; wi < 3; ++wi) score.attention[wi] = out.attention[wi].val().data;
  return score;
}

struct LabeledHeadline {
  corpus::Tokens tokens;
  int label = 0;  // 1 = popular (comments >= train median)
};

// scalar binary cross-entropy on the sigmoid of the logit
inline ad::Value bce_loss(ad::Tape& tape, ad::Value logit, int label) {
  ad::Value prob = ad::sigmoid_v(logit);
  ad::Value target = label == 1 ? prob : ad::sub(tape.leaf(Tensor::scalar(1.0)), prob);
  return ad::scale(ad::log_floor(target), -1.0);
}

struct TrainReport {
  double final_train_loss = 0.0;
  double val_accuracy = 0.0;
  std::size_t steps = 0;
};

inline double accuracy(optim::ParamStore& store, const PredictorConfig& cfg,
                       const std::vector<LabeledHeadline>& examples,
                       const corpus::Vocabulary& vocab) {
  if (examples.empty()) fail("predictor: no examples to evaluate");
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    const PopScore s = pop_score(store, cfg, ex.tokens, vocab);
    const int pred = s.probability > 0.5 ? 1 : 0;
    if (pred == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

// minibatch BCE training; deterministic per seed; epochs=0 leaves parameters
// untouched
inline TrainReport train(optim::ParamStore& store, const PredictorConfig& cfg,
                         const std::vector<LabeledHeadline>& train_set,
                         const std::vector<LabeledHeadline>& val_set,
                         const corpus::Vocabulary& vocab, std::size_t epochs,
                         std::size_t batch_size, const optim::AdamConfig& adam,
                         std::uint64_t seed) {
  if (train_set.empty()) fail("predictor: empty training set");
  if (batch_size == 0) fail("predictor: zero batch size");
  bool has_pos = false, has_neg = false;
  for (const auto& ex : train_set) (ex.label == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) fail("predictor: training set has a single class");

  Rng rng = Rng(seed).substream("predictor-train");
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainReport report;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      ad::Tape tape;
      optim::GraphParams p(tape, store);
      std::vector<ad::Value> losses;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = train_set[order[i]];
        const std::vector<int> ids = encode_headline_ids(vocab, ex.tokens, cfg.headline_cap);
        losses.push_back(bce_loss(tape, forward_logit(tape, p, cfg, ids).logit, ex.label));
      }
      ad::Value loss = ad::mean(ad::stack_scalars(losses));
      report.final_train_loss = loss.val().item();
      tape.backward(loss);
      p.step(adam);
      ++report.steps;
    }
  }
  if (!val_set.empty()) report.val_accuracy = accuracy(store, cfg, val_set, vocab);
  return report;
}

// CSV rows (headline_idx, kernel_width, position, weight) for every headline
inline std::string attention_heatmap_csv(optim::ParamStore& store, const PredictorConfig& cfg,
                                         const std::vector<corpus::Tokens>& headlines,
                                         const corpus::Vocabulary& vocab) {
  std::string csv = "headline_idx,kernel_width,position,weight\n";
  for (std::size_t h = 0; h < headlines.size(); ++h) {
    const PopScore s = pop_score(store, cfg, headlines[h], vocab);
    for (std::size_t wi = 0; wi < 3; ++wi)
      for (std::size_t t = 0; t < s.attention[wi].size(); ++t)
        csv += strfmt("%zu,%zu,%zu,%.12g\n", h, layers::kConvWidths[wi], t,
                      s.attention[wi][t]);
  }
  return csv;
}

}  // namespace headliner::predictor
