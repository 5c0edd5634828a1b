// Reusable network building blocks composed from autodiff primitives: the
// width-{1,2,3} convolution bank, LSTM sequence runners, and small affine
// helpers. Parameter tensors live in a ParamStore and are bound to the
// current tape through GraphParams; every function here takes the binder so
// the same weights serve training tapes and throwaway inference tapes alike.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "headliner/autodiff.hpp"
#include "headliner/common.hpp"
#include "headliner/optim.hpp"
#include "headliner/tensor.hpp"

namespace headliner::layers {

inline constexpr std::size_t kConvWidths[] = {1, 2, 3};

// ---- parameter creation -----------------------------------------------------

inline void init_conv_bank(optim::ParamStore& store, const std::string& prefix, Rng& rng,
                           std::size_t embed_dim, std::size_t channels) {
  for (std::size_t w : kConvWidths) {
    store.create(strfmt("%s/conv%zu/w", prefix.c_str(), w),
                 optim::xavier_uniform(rng, w * embed_dim, channels));
    store.create(strfmt("%s/conv%zu/b", prefix.c_str(), w), optim::zeros_vector(channels));
  }
}

inline void init_lstm(optim::ParamStore& store, const std::string& prefix, Rng& rng,
                      std::size_t input_dim, std::size_t hidden) {
  store.create(prefix + "/wx", optim::xavier_uniform(rng, input_dim, 4 * hidden));
  store.create(prefix + "/wh", optim::xavier_uniform(rng, hidden, 4 * hidden));
  store.create(prefix + "/b", optim::zeros_vector(4 * hidden));
}

inline void init_bilstm(optim::ParamStore& store, const std::string& prefix, Rng& rng,
                        std::size_t input_dim, std::size_t hidden) {
  init_lstm(store, prefix + "/fw", rng, input_dim, hidden);
  init_lstm(store, prefix + "/bw", rng, input_dim, hidden);
}

inline void init_affine(optim::ParamStore& store, const std::string& prefix, Rng& rng,
                        std::size_t input_dim, std::size_t output_dim) {
  store.create(prefix + "/w", optim::xavier_uniform(rng, input_dim, output_dim));
  store.create(prefix + "/b", optim::zeros_vector(output_dim));
}

// ---- forward blocks ---------------------------------------------------------

inline ad::Value affine(optim::GraphParams& p, const std::string& prefix, ad::Value x) {
  return ad::add(ad::vecmat(x, p[prefix + "/w"]), p[prefix + "/b"]);
}

// per-width feature maps over an embedded sequence [T,E]: conv -> +bias ->
// tanh, keeping all T positions (the convolution right-pads)
inline std::vector<ad::Value> conv_bank_maps(optim::GraphParams& p, const std::string& prefix,
                                             ad::Value embedded) {
  std::vector<ad::Value> maps;
  for (std::size_t w : kConvWidths) {
    ad::Value m = ad::conv1d(embedded, p[strfmt("%s/conv%zu/w", prefix.c_str(), w)], w);
    m = ad::tanh_v(ad::add_rowwise(m, p[strfmt("%s/conv%zu/b", prefix.c_str(), w)]));
    maps.push_back(m);
  }
  return maps;
}

// pooled sentence vector: max over time per width, concatenated -> [3*channels]
inline ad::Value conv_bank_vector(optim::GraphParams& p, const std::string& prefix,
                                  ad::Value embedded) {
  std::vector<ad::Value> pooled;
  for (ad::Value m : conv_bank_maps(p, prefix, embedded)) pooled.push_back(ad::max_over_time(m));
  return ad::concat(pooled);
}

// channel-axis concatenation per position: three [T,C] maps -> [T, 3C]
inline ad::Value concat_maps_per_position(const std::vector<ad::Value>& maps) {
  if (maps.empty()) fail("concat_maps_per_position: no maps");
  const std::size_t tlen = maps[0].val().shape[0];
  std::vector<ad::Value> rows;
  rows.reserve(tlen);
  for (std::size_t t = 0; t < tlen; ++t) {
    std::vector<ad::Value> parts;
    for (ad::Value m : maps) parts.push_back(ad::row(m, t));
    rows.push_back(ad::concat(parts));
  }
  return ad::stack_rows(rows);
}

struct LstmState {
  ad::Value h;
  ad::Value c;
};

// one step through the fused cell; splits the [h' ; c'] output
inline LstmState lstm_step(optim::GraphParams& p, const std::string& prefix, ad::Value x,
                           const LstmState& state, std::size_t hidden) {
  ad::Value hc = ad::lstm_cell(x, state.h, state.c, p[prefix + "/wx"], p[prefix + "/wh"],
                               p[prefix + "/b"]);
  return {ad::slice(hc, 0, hidden), ad::slice(hc, hidden, 2 * hidden)};
}

inline LstmState zero_state(ad::Tape& tape, std::size_t hidden) {
  return {tape.leaf(optim::zeros_vector(hidden)), tape.leaf(optim::zeros_vector(hidden))};
}

// run a unidirectional LSTM over rank-1 inputs; returns the hidden state at
// every position
inline std::vector<ad::Value> run_lstm(optim::GraphParams& p, const std::string& prefix,
                                       const std::vector<ad::Value>& inputs,
                                       std::size_t hidden) {
  if (inputs.empty()) fail("run_lstm: empty sequence");
  LstmState s = zero_state(*inputs[0].tape(), hidden);
  std::vector<ad::Value> states;
  states.reserve(inputs.size());
  for (const ad::Value& x : inputs) {
    s = lstm_step(p, prefix, x, s, hidden);
    states.push_back(s.h);
  }
  return states;
}

// bidirectional LSTM: concatenated forward and backward hidden states, [2H]
// per position
inline std::vector<ad::Value> run_bilstm(optim::GraphParams& p, const std::string& prefix,
                                         const std::vector<ad::Value>& inputs,
                                         std::size_t hidden) {
  const std::vector<ad::Value> fw = run_lstm(p, prefix + "/fw", inputs, hidden);
  std::vector<ad::Value> reversed(inputs.rbegin(), inputs.rend());
  const std::vector<ad::Value> bw = run_lstm(p, prefix + "/bw", reversed, hidden);
  std::vector<ad::Value> out;
  out.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    out.push_back(ad::concat({fw[i], bw[inputs.size() - 1 - i]}));
  return out;
}

// additive (tanh) attention scores of one query against a list of keys:
// score_i = v . tanh(W_q q + W_k k_i); returns the softmax-normalized weights
inline ad::Value additive_attention(optim::GraphParams& p, const std::string& prefix,
                                    ad::Value query, const std::vector<ad::Value>& keys) {
  if (keys.empty()) fail("additive_attention: no keys");
  ad::Value wq = ad::vecmat(query, p[prefix + "/wq"]);
  std::vector<ad::Value> scores;
  scores.reserve(keys.size());
  for (const ad::Value& k : keys) {
    ad::Value pre = ad::add(ad::vecmat(k, p[prefix + "/wk"]), wq);
    scores.push_back(ad::dot(p[prefix + "/v"], ad::tanh_v(pre)));
  }
  return ad::softmax(ad::stack_scalars(scores));
}

inline void init_additive_attention(optim::ParamStore& store, const std::string& prefix,
                                    Rng& rng, std::size_t query_dim, std::size_t key_dim,
                                    std::size_t attn_dim) {
  store.create(prefix + "/wq", optim::xavier_uniform(rng, query_dim, attn_dim));
  store.create(prefix + "/wk", optim::xavier_uniform(rng, key_dim, attn_dim));
  store.create(prefix + "/v",
               optim::uniform_vector(rng, attn_dim, std::sqrt(3.0 / static_cast<double>(attn_dim))));
}

// weighted sum of rank-1 values under attention weights: sum_i alpha_i k_i
inline ad::Value attention_context(ad::Value alpha, const std::vector<ad::Value>& keys) {
  return ad::vecmat(alpha, ad::stack_rows(keys));
}

}  // namespace headliner::layers
