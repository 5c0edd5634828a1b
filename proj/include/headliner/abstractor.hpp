// The abstractor: an attention encoder-decoder with a copy mechanism that
// rewrites one extracted sentence into a headline. Each decode step mixes a
// vocabulary softmax with the attention distribution over source positions
// through a generation gate, so out-of-vocabulary source words remain
// emittable. Provides the teacher-forced loss, greedy/sampled decoding, and
// the self-critical popularity surrogate.
#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "headliner/autodiff.hpp"
#include "headliner/common.hpp"
#include "headliner/corpus.hpp"
#include "headliner/layers.hpp"
#include "headliner/optim.hpp"

namespace headliner::abstractor {

using ad::Tensor;

struct AbstractorConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden = 32;         // per encoder direction; decoder hidden
  std::size_t attention_dim = 32;
  std::size_t max_len = 30;        // decode cap
  std::size_t source_cap = corpus::kSentenceTokenCap;
  std::size_t target_cap = corpus::kHeadlineTokenCap;
};

inline void init_params(optim::ParamStore& store, const AbstractorConfig& cfg, Rng& rng) {
  if (cfg.vocab_size == 0) fail("abstractor: vocab_size not set");
  const std::size_t h = cfg.hidden, e = cfg.embed_dim;
  store.create("abstractor/embed", optim::xavier_uniform(rng, cfg.vocab_size, e));
  layers::init_bilstm(store, "abstractor/enc", rng, e, h);
  // decoder input: previous token embedding plus the previous context vector
  layers::init_lstm(store, "abstractor/dec", rng, e + 2 * h, h);
  layers::init_additive_attention(store, "abstractor/att", rng, h, 2 * h, cfg.attention_dim);
  layers::init_affine(store, "abstractor/out", rng, h + 2 * h, cfg.vocab_size);
  layers::init_affine(store, "abstractor/gate", rng, e + h + 2 * h, 1);
}

// mutable diagnostics for OOV handling during scoring
struct AbstractorCounters {
  std::size_t unk_scored_targets = 0;  // targets neither in vocab nor in source
};

namespace detail {

struct Encoded {
  corpus::Tokens tokens;           // truncated source tokens
  std::vector<ad::Value> states;   // [2H] per position
};

inline Encoded encode_source(optim::GraphParams& p, const AbstractorConfig& cfg,
                             const corpus::Tokens& source, const corpus::Vocabulary& vocab) {
  if (source.empty()) fail("abstractor: empty source");
  corpus::Tokens capped(
      source.begin(),
      source.begin() + static_cast<long>(std::min(source.size(), cfg.source_cap)));
  const std::vector<int> ids = vocab.encode(capped);
  ad::Value emb = ad::embedding(p["abstractor/embed"], ids);
  std::vector<ad::Value> rows;
  rows.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) rows.push_back(ad::row(emb, i));
  return {std::move(capped), layers::run_bilstm(p, "abstractor/enc", rows, cfg.hidden)};
}

struct StepState {
  layers::LstmState dec;
  ad::Value context;  // [2H]
};

inline StepState initial_state(ad::Tape& tape, const AbstractorConfig& cfg) {
  return {layers::zero_state(tape, cfg.hidden),
          tape.leaf(optim::zeros_vector(2 * cfg.hidden))};
}

struct StepOut {
  ad::Value p_vocab;  // [V] generation distribution
  ad::Value attn;     // [S] copy distribution over source positions
  ad::Value gate;     // scalar p_gen in (0,1), or the frozen override
  StepState next;
};

inline StepOut decode_step(optim::GraphParams& p, const AbstractorConfig& cfg,
                           const Encoded& enc, const StepState& state, int prev_id,
                           std::optional<double> gate_override) {
  ad::Tape& tape = *state.context.tape();
  ad::Value x = ad::row(ad::embedding(p["abstractor/embed"], {prev_id}), 0);
  ad::Value dec_in = ad::concat({x, state.context});
  layers::LstmState dec = layers::lstm_step(p, "abstractor/dec", dec_in, state.dec, cfg.hidden);
  ad::Value attn = layers::additive_attention(p, "abstractor/att", dec.h, enc.states);
  ad::Value context = layers::attention_context(attn, enc.states);
  ad::Value p_vocab = ad::softmax(layers::affine(p, "abstractor/out", ad::concat({dec.h, context})));
  ad::Value gate;
  if (gate_override) {
    gate = tape.leaf(Tensor::scalar(*gate_override));
  } else {
    ad::Value pre = layers::affine(p, "abstractor/gate", ad::concat({x, dec.h, context}));
    gate = ad::pick(ad::sigmoid_v(pre), 0);
  }
  return {p_vocab, attn, gate, {dec, context}};
}

// graph-side mixture probability of one token: gate * P_vocab(token) +
// (1-gate) * sum of attention over source positions holding it. A target in
// neither vocabulary nor source is scored through the UNK generation slot.
inline ad::Value mixture_prob(ad::Tape& tape, const StepOut& step, const Encoded& enc,
                              const corpus::Vocabulary& vocab, const std::string& token,
                              AbstractorCounters* counters) {
  int id = vocab.lookup(token);
  Tensor mask({enc.tokens.size()});
  bool in_source = false;
  for (std::size_t i = 0; i < enc.tokens.size(); ++i)
    if (enc.tokens[i] == token) {
      mask.data[i] = 1.0;
      in_source = true;
    }
  const bool in_vocab = id != corpus::Vocabulary::kUnk || token == vocab.token(id);
  if (!in_vocab && !in_source && counters) ++counters->unk_scored_targets;

  ad::Value one_minus = ad::sub(tape.leaf(Tensor::scalar(1.0)), step.gate);
  ad::Value copy_term = ad::smul(one_minus, ad::dot(step.attn, tape.leaf(std::move(mask))));
  if (!in_vocab && in_source) return copy_term;  // copy path only
  ad::Value gen_term =
      ad::smul(step.gate, ad::pick(step.p_vocab, static_cast<std::size_t>(id)));
  return in_source ? ad::add(gen_term, copy_term) : gen_term;
}

}  // namespace detail

// mean negative log-likelihood of the target tokens plus a terminating EOS
// under the per-step copy mixture
inline ad::Value teacher_forced_loss(ad::Tape& tape, optim::GraphParams& p,
                                     const AbstractorConfig& cfg, const corpus::Tokens& source,
                                     const corpus::Tokens& target,
                                     const corpus::Vocabulary& vocab,
                                     AbstractorCounters* counters = nullptr,
                                     std::optional<double> gate_override = std::nullopt) {
  if (target.empty()) fail("abstractor: empty target");
  const detail::Encoded enc = detail::encode_source(p, cfg, source, vocab);
  corpus::Tokens tgt(
      target.begin(),
      target.begin() + static_cast<long>(std::min(target.size(), cfg.target_cap)));
  tgt.push_back(vocab.token(corpus::Vocabulary::kEos));

  detail::StepState state = detail::initial_state(tape, cfg);
  int prev_id = corpus::Vocabulary::kBos;
  std::vector<ad::Value> probs;
  probs.reserve(tgt.size());
  for (const std::string& token : tgt) {
    detail::StepOut step = detail::decode_step(p, cfg, enc, state, prev_id, gate_override);
    probs.push_back(detail::mixture_prob(tape, step, enc, vocab, token, counters));
    state = step.next;
    const int id = vocab.lookup(token);
    prev_id = id;  // OOV targets feed UNK back in
  }
  ad::Value logs = ad::log_floor(ad::stack_scalars(probs));
  return ad::scale(ad::sum(logs), -1.0 / static_cast<double>(tgt.size()));
}

enum class DecodeMode { greedy, sample };

struct DecodeResult {
  corpus::Tokens tokens;            // emitted tokens, EOS excluded
  std::vector<double> gates;        // p_gen per step taken (incl. the EOS step)
  std::vector<double> probs;        // chosen-token probability per step taken
  double sum_logprob = 0.0;
  ad::Value sum_logprob_value;      // graph node over all steps taken
  bool ended_with_eos = false;
};

// autoregressive decode from BOS; greedy takes the mixture argmax, sample
// draws from it. The copy path emits actual source tokens, so the output may
// contain words outside the vocabulary.
inline DecodeResult generate(ad::Tape& tape, optim::GraphParams& p, const AbstractorConfig& cfg,
                             const corpus::Tokens& source, const corpus::Vocabulary& vocab,
                             DecodeMode mode, Rng& rng,
                             std::optional<double> gate_override = std::nullopt) {
  if (cfg.max_len == 0) fail("abstractor: zero decode cap");
  const detail::Encoded enc = detail::encode_source(p, cfg, source, vocab);
  detail::StepState state = detail::initial_state(tape, cfg);
  int prev_id = corpus::Vocabulary::kBos;

  DecodeResult out;
  std::vector<ad::Value> chosen_probs;
  while (out.tokens.size() < cfg.max_len) {
    detail::StepOut step = detail::decode_step(p, cfg, enc, state, prev_id, gate_override);
    const double gate = step.gate.val().item();

    // extended distribution as plain numbers: vocabulary slots plus
    // out-of-vocabulary source tokens
    std::vector<double> vocab_probs(step.p_vocab.val().data);
    for (double& v : vocab_probs) v *= gate;
    std::map<std::string, double> oov_mass;
    for (std::size_t i = 0; i < enc.tokens.size(); ++i) {
      const double m = (1.0 - gate) * step.attn.val().data[i];
      const int id = vocab.lookup(enc.tokens[i]);
      if (id != corpus::Vocabulary::kUnk || enc.tokens[i] == vocab.token(id))
        vocab_probs[static_cast<std::size_t>(id)] += m;
      else
        oov_mass[enc.tokens[i]] += m;
    }

    int chosen_id = -1;
    std::string chosen_oov;
    if (mode == DecodeMode::greedy) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < vocab_probs.size(); ++i)
        if (vocab_probs[i] > vocab_probs[best]) best = i;
      double best_p = vocab_probs[best];
      chosen_id = static_cast<int>(best);
      for (const auto& [tok, m] : oov_mass)
        if (m > best_p) {
          best_p = m;
          chosen_id = -1;
          chosen_oov = tok;
        }
    } else {
      double total = 0.0;
      for (double v : vocab_probs) total += v;
      for (const auto& [tok, m] : oov_mass) total += m;
      double u = rng.uniform01() * total;
      for (std::size_t i = 0; i < vocab_probs.size(); ++i) {
        u -= vocab_probs[i];
        if (u <= 0.0) {
          chosen_id = static_cast<int>(i);
          break;
        }
      }
      if (chosen_id < 0 && u > 0.0) {
        for (const auto& [tok, m] : oov_mass) {
          u -= m;
          if (u <= 0.0) {
            chosen_oov = tok;
            break;
          }
        }
        if (chosen_oov.empty() && !oov_mass.empty()) chosen_oov = oov_mass.rbegin()->first;
      }
      if (chosen_id < 0 && chosen_oov.empty()) chosen_id = static_cast<int>(vocab_probs.size()) - 1;
    }

    const std::string token =
        chosen_id >= 0 ? vocab.token(chosen_id) : chosen_oov;
    chosen_probs.push_back(detail::mixture_prob(tape, step, enc, vocab, token, nullptr));
    out.gates.push_back(gate);
    out.probs.push_back(chosen_probs.back().val().item());

    if (chosen_id == corpus::Vocabulary::kEos) {
      out.ended_with_eos = true;
      break;
    }
    out.tokens.push_back(token);
    state = step.next;
    prev_id = chosen_id >= 0 ? chosen_id : corpus::Vocabulary::kUnk;
  }

  out.sum_logprob_value = ad::sum(ad::log_floor(ad::stack_scalars(chosen_probs)));
  out.sum_logprob = out.sum_logprob_value.val().item();
  return out;
}

// self-critical surrogate for the popularity loss: the advantage of the
// sampled sequence over the greedy baseline weights its negative log-prob, so
// gradients reinforce samples the popularity scorer prefers
inline ad::Value popularity_loss_step(const DecodeResult& sampled, const DecodeResult& greedy,
                                      const std::function<double(const corpus::Tokens&)>& pop) {
  if (!sampled.sum_logprob_value.valid()) fail("abstractor: sampled decode has no graph");
  const double advantage = pop(sampled.tokens) - pop(greedy.tokens);
  return ad::scale(sampled.sum_logprob_value, -advantage);
}

}  // namespace headliner::abstractor
