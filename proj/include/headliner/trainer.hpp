#pragma once
// Training pipeline: dataset plumbing, the three supervised pretraining
// phases, the A2C reinforcement phase that couples extractor, abstractor and
// predictor, and the generation step that writes per-method headline files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "headliner/abstractor.hpp"
#include "headliner/autodiff.hpp"
#include "headliner/baselines.hpp"
#include "headliner/common.hpp"
#include "headliner/config.hpp"
#include "headliner/corpus.hpp"
#include "headliner/extractor.hpp"
#include "headliner/labels.hpp"
#include "headliner/metrics.hpp"
#include "headliner/optim.hpp"
#include "headliner/predictor.hpp"
#include "headliner/topics.hpp"

#include <json.hpp>

namespace headliner::trainer {

using ad::Tensor;

// ---- dataset ----------------------------------------------------------------

// documents joined with their topic vectors and proxy labels, plus split
// index lists; everything keyed by document id
struct Dataset {
  std::vector<corpus::Document> docs;
  corpus::Vocabulary vocab;
  std::vector<topics::DocTopics> doc_topics;
  std::vector<labels::ProxyLabels> proxy;
  std::vector<std::size_t> train_idx, val_idx, test_idx;

  const topics::DocTopics& topic(const std::string& id) const {
    const auto it = topic_by_id_.find(id);
    if (it == topic_by_id_.end()) fail("dataset: no topic vectors for document \"%s\"", id.c_str());
    return doc_topics[it->second];
  }
  const labels::ProxyLabels& label(const std::string& id) const {
    const auto it = label_by_id_.find(id);
    if (it == label_by_id_.end()) fail("dataset: no proxy labels for document \"%s\"", id.c_str());
    return proxy[it->second];
  }
  const std::vector<std::size_t>& split(corpus::Split s) const {
    switch (s) {
      case corpus::Split::train: return train_idx;
      case corpus::Split::val: return val_idx;
      default: return test_idx;
    }
  }

  void build_indices() {
    topic_by_id_.clear();
    label_by_id_.clear();
    train_idx.clear();
    val_idx.clear();
    test_idx.clear();
    for (std::size_t i = 0; i < doc_topics.size(); ++i) topic_by_id_[doc_topics[i].id] = i;
    for (std::size_t i = 0; i < proxy.size(); ++i) label_by_id_[proxy[i].doc_id] = i;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      switch (docs[i].split) {
        case corpus::Split::train: train_idx.push_back(i); break;
        case corpus::Split::val: val_idx.push_back(i); break;
        case corpus::Split::test: test_idx.push_back(i); break;
      }
    }
  }

 private:
  std::unordered_map<std::string, std::size_t> topic_by_id_, label_by_id_;
};

inline Dataset load_dataset(const config::Paths& paths) {
  Dataset ds;
  ds.docs = corpus::ingest(paths.corpus());
  ds.vocab = corpus::Vocabulary::load(paths.vocab());
  ds.doc_topics = topics::load_doc_topics(paths.doc_topics());
  ds.proxy = labels::load_labels(paths.labels());
  ds.build_indices();
  return ds;
}

inline std::vector<std::vector<int>> encode_document(const corpus::Vocabulary& vocab,
                                                     const corpus::Document& doc) {
  std::vector<std::vector<int>> ids;
  ids.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) ids.push_back(extractor::encode_sentence_ids(vocab, s, corpus::kSentenceTokenCap));
  return ids;
}

// ---- reward ------------------------------------------------------------------

// r = ROUGE-L F1 against the reference headline plus the (weighted)
// popularity probability; an empty generation earns zero on both terms
inline double compute_reward(const corpus::Tokens& generated, const corpus::Tokens& reference,
                             double pop_probability, double lambda_pop = 1.0) {
  if (reference.empty()) fail("reward: empty reference headline");
  if (!(pop_probability >= 0.0 && pop_probability <= 1.0))
    fail("reward: pop probability %g outside [0,1]", pop_probability);
  if (!(lambda_pop >= 0.0)) fail("reward: negative lambda_pop %g", lambda_pop);
  const double rouge = generated.empty() ? 0.0 : metrics::rouge_l(generated, reference).f1;
  return rouge + lambda_pop * pop_probability;
}

// ---- critic ------------------------------------------------------------------

constexpr std::size_t kCriticHidden = 64;

inline void init_critic(optim::ParamStore& store, Rng& rng, std::size_t input_dim) {
  Rng r = rng.substream("critic");
  layers::init_affine(store, "critic/l1", r, input_dim, kCriticHidden);
  layers::init_affine(store, "critic/l2", r, kCriticHidden, kCriticHidden);
  layers::init_affine(store, "critic/out", r, kCriticHidden, 1);
}

// state summary fed to the critic: the mean of the sentence features as plain
// numbers, so no gradient flows from the value head into the extractor
inline Tensor mean_feature_vector(const std::vector<ad::Value>& e) {
  if (e.empty()) fail("critic: no sentence features");
  Tensor m({e[0].val().shape[0]});
  for (const auto& v : e) {
    const Tensor& t = v.val();
    if (t.shape != m.shape) fail("critic: ragged sentence features");
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] += t.data[i];
  }
  for (double& x : m.data) x /= static_cast<double>(e.size());
  return m;
}

inline ad::Value critic_value(ad::Tape& tape, optim::GraphParams& p, const Tensor& features) {
  ad::Value x = tape.leaf(features);
  x = ad::tanh_v(layers::affine(p, "critic/l1", x));
  x = ad::tanh_v(layers::affine(p, "critic/l2", x));
  return ad::pick(layers::affine(p, "critic/out", x), 0);
}

// ---- A2C update --------------------------------------------------------------

struct Trajectory {
  std::string doc_id;
  std::size_t action = 0;  // extracted sentence index
  ad::Value log_pi;        // log P(action), node on the update tape
  ad::Value value;         // critic estimate, node on the same tape
  double reward = 0.0;
  double rouge_term = 0.0;
  double pop_term = 0.0;
  double entropy = 0.0;  // policy entropy at this state
};

struct A2cStats {
  double policy_loss = 0.0;
  double critic_loss = 0.0;
  double mean_advantage = 0.0;
};

// one actor-critic step: policy loss -mean(advantage * log pi) with the
// advantage detached, critic loss mean (v - r)^2, a single backward pass, and
// separate Adam steps for the two parameter stores
inline A2cStats a2c_update(ad::Tape& tape, optim::GraphParams& extractor_params,
                           optim::GraphParams& critic_params,
                           const std::vector<Trajectory>& batch, const optim::AdamConfig& adam) {
  if (batch.empty()) fail("a2c: empty trajectory batch");
  std::vector<ad::Value> policy_terms, critic_terms;
  policy_terms.reserve(batch.size());
  critic_terms.reserve(batch.size());
  A2cStats stats;
  for (const auto& t : batch) {
    const double advantage = t.reward - t.value.val().item();
    stats.mean_advantage += advantage;
    policy_terms.push_back(ad::scale(t.log_pi, -advantage));
    ad::Value diff = ad::sub(t.value, tape.leaf(Tensor::scalar(t.reward)));
    critic_terms.push_back(ad::mul(diff, diff));
  }
  stats.mean_advantage /= static_cast<double>(batch.size());
  ad::Value policy_loss = ad::mean(ad::stack_scalars(policy_terms));
  ad::Value critic_loss = ad::mean(ad::stack_scalars(critic_terms));
  stats.policy_loss = policy_loss.val().item();
  stats.critic_loss = critic_loss.val().item();
  if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.critic_loss))
    fail("a2c: non-finite loss (policy %g, critic %g)", stats.policy_loss, stats.critic_loss);
  tape.backward(ad::add(policy_loss, critic_loss));
  extractor_params.step(adam);
  critic_params.step(adam);
  return stats;
}

// ---- reward log ---------------------------------------------------------------

struct RewardRow {
  std::size_t update_idx = 0;
  double mean_reward = 0.0;
  double mean_rouge_term = 0.0;
  double mean_pop_term = 0.0;
  double entropy = 0.0;
};

struct RewardLog {
  std::vector<RewardRow> rows;

  void append(const RewardRow& r) {
    if (!rows.empty() && r.update_idx != rows.back().update_idx + 1)
      fail("reward log: update %zu does not follow %zu", r.update_idx, rows.back().update_idx);
    rows.push_back(r);
  }

  std::string csv() const {
    std::string out = "update_idx,mean_reward,mean_rouge_term,mean_pop_term,entropy\n";
    for (const auto& r : rows)
      out += strfmt("%zu,%.12g,%.12g,%.12g,%.12g\n", r.update_idx, r.mean_reward,
                    r.mean_rouge_term, r.mean_pop_term, r.entropy);
    return out;
  }
};

// ---- extractor pretraining -----------------------------------------------------

struct ExtractorPhaseReport {
  double final_train_loss = 0.0;
  double val_agreement = 0.0;  // top-1 match with the faithfulness label
  std::size_t steps = 0;
};

// fraction of documents where argmax P(k) equals the faithfulness label
inline double extraction_agreement(optim::ParamStore& store, const extractor::ExtractorConfig& cfg,
                                   const Dataset& data, const std::vector<std::size_t>& idxs) {
  if (idxs.empty()) fail("extractor: no documents to evaluate");
  std::size_t hits = 0;
  for (std::size_t i : idxs) {
    const corpus::Document& doc = data.docs[i];
    const topics::DocTopics& tv = data.topic(doc.id);
    ad::Tape tape;
    optim::GraphParams p(tape, store);
    const extractor::ExtractionOutput out = extractor::forward(
        tape, p, cfg, encode_document(data.vocab, doc), tv.sentence_vecs, tv.reference_vec);
    const std::vector<double>& probs = out.p.val().data;
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
      if (probs[k] > probs[best]) best = k;
    if (best == data.label(doc.id).y) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(idxs.size());
}

inline ExtractorPhaseReport pretrain_extractor(optim::ParamStore& store,
                                               const extractor::ExtractorConfig& cfg,
                                               const Dataset& data, std::size_t epochs,
                                               std::size_t batch_size,
                                               const optim::AdamConfig& adam, std::uint64_t seed) {
  if (data.train_idx.empty()) fail("extractor: empty training split");
  if (batch_size == 0) fail("extractor: zero batch size");
  Rng rng = Rng(seed).substream("extractor-pretrain");
  std::vector<std::size_t> order = data.train_idx;

  ExtractorPhaseReport report;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      ad::Tape tape;
      optim::GraphParams p(tape, store);
      std::vector<ad::Value> losses;
      losses.reserve(stop - start);
      for (std::size_t bi = start; bi < stop; ++bi) {
        const corpus::Document& doc = data.docs[order[bi]];
        const topics::DocTopics& tv = data.topic(doc.id);
        const labels::ProxyLabels& lab = data.label(doc.id);
        const extractor::ExtractionOutput out = extractor::forward(
            tape, p, cfg, encode_document(data.vocab, doc), tv.sentence_vecs, tv.reference_vec);
        losses.push_back(extractor::pretrain_loss(out, lab.y, lab.y_prime, cfg.use_pta_loss));
      }
      ad::Value loss = ad::mean(ad::stack_scalars(losses));
      report.final_train_loss = loss.val().item();
      if (!std::isfinite(report.final_train_loss))
        fail("extractor: non-finite loss at step %zu", report.steps);
      tape.backward(loss);
      p.step(adam);
      ++report.steps;
    }
  }
  if (!data.val_idx.empty())
    report.val_agreement = extraction_agreement(store, cfg, data, data.val_idx);
  return report;
}

// ---- abstractor pretraining ------------------------------------------------------

struct AbstractorPhaseReport {
  double final_train_loss = 0.0;
  double val_rouge_l = 0.0;  // mean greedy ROUGE-L F1 against the headline
  std::size_t steps = 0;
  std::size_t unk_scored_targets = 0;
};

// mean greedy-decode ROUGE-L F1 over the given documents, abstracting the
// faithfulness-labeled sentence
inline double abstraction_rouge(optim::ParamStore& store, const abstractor::AbstractorConfig& cfg,
                                const Dataset& data, const std::vector<std::size_t>& idxs) {
  if (idxs.empty()) fail("abstractor: no documents to evaluate");
  Rng unused(0);  // greedy decodes never consult the stream
  double total = 0.0;
  for (std::size_t i : idxs) {
    const corpus::Document& doc = data.docs[i];
    const corpus::Tokens& source = doc.sentences[data.label(doc.id).y];
    ad::Tape tape;
    optim::GraphParams p(tape, store);
    const abstractor::DecodeResult out = abstractor::generate(
        tape, p, cfg, source, data.vocab, abstractor::DecodeMode::greedy, unused);
    total += out.tokens.empty() ? 0.0 : metrics::rouge_l(out.tokens, doc.headline).f1;
  }
  return total / static_cast<double>(idxs.size());
}

inline AbstractorPhaseReport pretrain_abstractor(optim::ParamStore& store,
                                                 const abstractor::AbstractorConfig& cfg,
                                                 const Dataset& data, std::size_t epochs,
                                                 std::size_t batch_size,
                                                 const optim::AdamConfig& adam,
                                                 std::uint64_t seed) {
  if (data.train_idx.empty()) fail("abstractor: empty training split");
  if (batch_size == 0) fail("abstractor: zero batch size");
  Rng rng = Rng(seed).substream("abstractor-pretrain");
  std::vector<std::size_t> order = data.train_idx;

  AbstractorPhaseReport report;
  abstractor::AbstractorCounters counters;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      ad::Tape tape;
      optim::GraphParams p(tape, store);
      std::vector<ad::Value> losses;
      losses.reserve(stop - start);
      for (std::size_t bi = start; bi < stop; ++bi) {
        const corpus::Document& doc = data.docs[order[bi]];
        const corpus::Tokens& source = doc.sentences[data.label(doc.id).y];
        losses.push_back(abstractor::teacher_forced_loss(tape, p, cfg, source, doc.headline,
                                                         data.vocab, &counters));
      }
      ad::Value loss = ad::mean(ad::stack_scalars(losses));
      report.final_train_loss = loss.val().item();
      if (!std::isfinite(report.final_train_loss))
        fail("abstractor: non-finite loss at step %zu", report.steps);
      tape.backward(loss);
      p.step(adam);
      ++report.steps;
    }
  }
  report.unk_scored_targets = counters.unk_scored_targets;
  if (!data.val_idx.empty()) report.val_rouge_l = abstraction_rouge(store, cfg, data, data.val_idx);
  return report;
}

// ---- predictor training -----------------------------------------------------------

inline std::vector<predictor::LabeledHeadline> labeled_headlines(
    const Dataset& data, const std::vector<std::size_t>& idxs,
    const std::unordered_map<std::string, int>& label_by_id) {
  std::vector<predictor::LabeledHeadline> out;
  out.reserve(idxs.size());
  for (std::size_t i : idxs) {
    const corpus::Document& doc = data.docs[i];
    const auto it = label_by_id.find(doc.id);
    if (it == label_by_id.end()) continue;  // document carries no comment count
    out.push_back({doc.headline, it->second});
  }
  return out;
}

// median-split labels from training comment counts, then supervised training
// on train-split headlines with validation accuracy on the val split
inline predictor::TrainReport train_predictor_phase(optim::ParamStore& store,
                                                    const predictor::PredictorConfig& cfg,
                                                    const Dataset& data, std::size_t epochs,
                                                    std::size_t batch_size,
                                                    const optim::AdamConfig& adam,
                                                    std::uint64_t seed) {
  std::unordered_map<std::string, int> label_by_id;
  for (const auto& l : corpus::median_split_labels(data.docs)) label_by_id[l.doc_id] = l.label;
  const auto train_set = labeled_headlines(data, data.train_idx, label_by_id);
  const auto val_set = labeled_headlines(data, data.val_idx, label_by_id);
  if (val_set.empty()) fail("predictor: empty validation split");
  return predictor::train(store, cfg, train_set, val_set, data.vocab, epochs, batch_size, adam,
                          seed);
}

// ---- reinforcement phase -----------------------------------------------------------

struct RlOptions {
  std::size_t updates = 120;
  std::size_t batch = 8;
  bool use_pop_reward = true;    // include the predictor term in the reward
  bool joint_abstractor = true;  // keep training the abstractor during RL
  double lambda_pop = 1.0;       // weight of the pop term inside the reward
  double lambda_a = 1.0;         // weight of the abstractor surrogate loss
  std::string log_path;          // when non-empty, reward log rewritten each update
};

struct RlReport {
  RewardLog log;
  A2cStats last;
  std::size_t abstractor_steps = 0;
};

// policy entropy -sum p log p; zero-probability entries contribute zero
inline double policy_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

// A2C over single-step episodes: sample a sentence, abstract it (sampled
// decode), score reward = ROUGE-L F1 + pop, update extractor+critic, and
// optionally keep training the abstractor with the self-critical surrogate
inline RlReport train_rl(optim::ParamStore& extractor_store, optim::ParamStore& critic_store,
                         optim::ParamStore& abstractor_store, optim::ParamStore& predictor_store,
                         const extractor::ExtractorConfig& ext_cfg,
                         const abstractor::AbstractorConfig& abs_cfg,
                         const predictor::PredictorConfig& pred_cfg, const Dataset& data,
                         const RlOptions& opts, const optim::AdamConfig& adam,
                         std::uint64_t seed) {
  if (data.train_idx.empty()) fail("rl: empty training split");
  if (opts.batch == 0) fail("rl: zero batch size");
  Rng rng = Rng(seed).substream("rl");

  const auto pop_probability = [&](const corpus::Tokens& tokens) -> double {
    if (tokens.empty()) return 0.0;
    return predictor::pop_score(predictor_store, pred_cfg, tokens, data.vocab).probability;
  };
  // the "w/o pop" ablation removes the popularity signal everywhere, so the
  // abstractor surrogate (which needs pop scores) is disabled with it
  const bool joint = opts.joint_abstractor && opts.use_pop_reward;

  RlReport report;
  for (std::size_t update = 0; update < opts.updates; ++update) {
    ad::Tape policy_tape;
    optim::GraphParams ext_params(policy_tape, extractor_store);
    optim::GraphParams critic_params(policy_tape, critic_store);
    ad::Tape abs_tape;
    optim::GraphParams abs_params(abs_tape, abstractor_store);

    std::vector<Trajectory> batch;
    std::vector<ad::Value> surrogates;
    batch.reserve(opts.batch);
    RewardRow row;
    row.update_idx = update;

    for (std::size_t slot = 0; slot < opts.batch; ++slot) {
      const corpus::Document& doc =
          data.docs[data.train_idx[rng.uniform_index(data.train_idx.size())]];
      const topics::DocTopics& tv = data.topic(doc.id);

      const extractor::ExtractionOutput out =
          extractor::forward(policy_tape, ext_params, ext_cfg, encode_document(data.vocab, doc),
                             tv.sentence_vecs, tv.reference_vec);
      const std::vector<double>& probs = out.p.val().data;
      const std::size_t action = rng.sample_weights(probs);

      Trajectory traj;
      traj.doc_id = doc.id;
      traj.action = action;
      traj.log_pi = ad::scale(ad::neg_log_pick(out.p, action), -1.0);
      traj.value = critic_value(policy_tape, critic_params, mean_feature_vector(out.e));
      traj.entropy = policy_entropy(probs);

      const corpus::Tokens& source = doc.sentences[action];
      abstractor::DecodeResult sampled;
      if (joint) {
        sampled = abstractor::generate(abs_tape, abs_params, abs_cfg, source, data.vocab,
                                       abstractor::DecodeMode::sample, rng);
      } else {
        ad::Tape scratch;
        optim::GraphParams scratch_params(scratch, abstractor_store);
        sampled = abstractor::generate(scratch, scratch_params, abs_cfg, source, data.vocab,
                                       abstractor::DecodeMode::sample, rng);
      }

      traj.rouge_term =
          sampled.tokens.empty() ? 0.0 : metrics::rouge_l(sampled.tokens, doc.headline).f1;
      traj.pop_term =
          opts.use_pop_reward ? opts.lambda_pop * pop_probability(sampled.tokens) : 0.0;
      traj.reward = compute_reward(sampled.tokens, doc.headline,
                                   opts.use_pop_reward ? pop_probability(sampled.tokens) : 0.0,
                                   opts.lambda_pop);

      if (joint) {
        ad::Tape scratch;
        optim::GraphParams scratch_params(scratch, abstractor_store);
        Rng unused(0);
        const abstractor::DecodeResult greedy =
            abstractor::generate(scratch, scratch_params, abs_cfg, source, data.vocab,
                                 abstractor::DecodeMode::greedy, unused);
        surrogates.push_back(ad::scale(
            abstractor::popularity_loss_step(sampled, greedy, pop_probability), opts.lambda_a));
      }

      row.mean_reward += traj.reward;
      row.mean_rouge_term += traj.rouge_term;
      row.mean_pop_term += traj.pop_term;
      row.entropy += traj.entropy;
      batch.push_back(std::move(traj));
    }

    const double n = static_cast<double>(opts.batch);
    row.mean_reward /= n;
    row.mean_rouge_term /= n;
    row.mean_pop_term /= n;
    row.entropy /= n;
    if (!std::isfinite(row.entropy)) fail("rl: non-finite policy entropy at update %zu", update);

    report.last = a2c_update(policy_tape, ext_params, critic_params, batch, adam);

    if (joint && !surrogates.empty()) {
      ad::Value loss = ad::mean(ad::stack_scalars(surrogates));
      if (!std::isfinite(loss.val().item()))
        fail("rl: non-finite abstractor surrogate at update %zu", update);
      abs_tape.backward(loss);
      abs_params.step(adam);
      ++report.abstractor_steps;
    }

    report.log.append(row);
    if (!opts.log_path.empty()) write_file(opts.log_path, report.log.csv());
  }
  return report;
}

// ---- generation ---------------------------------------------------------------------

struct GenerationRecord {
  std::string id;
  corpus::Tokens tokens;
  double copy_rate = 0.0;  // overlap with the article's tokens
  double logprob = 0.0;    // decoder log-probability; 0 for non-neural methods
};

inline std::string generation_to_jsonl(const std::vector<GenerationRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json rec;
    rec["id"] = r.id;
    rec["tokens"] = r.tokens;
    rec["copy_rate"] = r.copy_rate;
    rec["logprob"] = r.logprob;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<GenerationRecord> parse_generation(const std::string& text,
                                                      const std::string& what) {
  std::vector<GenerationRecord> out;
  int line_no = 0;
  for (const std::string& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("%s line %d: invalid JSON (%s)", what.c_str(), line_no, e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("tokens"))
      fail("%s line %d: expected an object with id and tokens", what.c_str(), line_no);
    GenerationRecord g;
    try {
      g.id = rec.at("id").get<std::string>();
      g.tokens = rec.at("tokens").get<corpus::Tokens>();
      g.copy_rate = rec.value("copy_rate", 0.0);
      g.logprob = rec.value("logprob", 0.0);
    } catch (const nlohmann::json::exception& e) {
      fail("%s line %d: bad field type (%s)", what.c_str(), line_no, e.what());
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline std::vector<GenerationRecord> load_generation(const std::string& path) {
  return parse_generation(read_file(path), path);
}

enum class Method { porlhg, seq2seq, bm25, prefix, random_sentence };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::porlhg: return "porlhg";
    case Method::seq2seq: return "seq2seq-approx";
    case Method::bm25: return "bm25";
    case Method::prefix: return "prefix";
    default: return "random";
  }
}

inline Method parse_method(const std::string& name) {
  if (name == "porlhg") return Method::porlhg;
  if (name == "seq2seq-approx" || name == "seq2seq") return Method::seq2seq;
  if (name == "bm25") return Method::bm25;
  if (name == "prefix") return Method::prefix;
  if (name == "random") return Method::random_sentence;
  fail("unknown generation method \"%s\" (expected porlhg, seq2seq-approx, bm25, prefix, random)",
       name.c_str());
}

inline corpus::Tokens truncated_article(const corpus::Document& doc) {
  corpus::Tokens all = doc.all_tokens();
  if (all.size() > corpus::kArticleTokenCap) all.resize(corpus::kArticleTokenCap);
  return all;
}

// greedy end-to-end headline: extract the argmax sentence, then abstract it
inline abstractor::DecodeResult porlhg_decode(optim::ParamStore& extractor_store,
                                              optim::ParamStore& abstractor_store,
                                              const extractor::ExtractorConfig& ext_cfg,
                                              const abstractor::AbstractorConfig& abs_cfg,
                                              const Dataset& data, const corpus::Document& doc) {
  const topics::DocTopics& tv = data.topic(doc.id);
  std::size_t best = 0;
  {
    ad::Tape tape;
    optim::GraphParams p(tape, extractor_store);
    const extractor::ExtractionOutput out = extractor::forward(
        tape, p, ext_cfg, encode_document(data.vocab, doc), tv.sentence_vecs, tv.reference_vec);
    const std::vector<double>& probs = out.p.val().data;
    for (std::size_t k = 1; k < probs.size(); ++k)
      if (probs[k] > probs[best]) best = k;
  }
  ad::Tape tape;
  optim::GraphParams p(tape, abstractor_store);
  Rng unused(0);
  return abstractor::generate(tape, p, abs_cfg, doc.sentences[best], data.vocab,
                              abstractor::DecodeMode::greedy, unused);
}

// generate headlines for every document in the split and record them with
// copy rate (versus the article tokens) and decoder log-probability
inline std::vector<GenerationRecord> generate_records(
    Method method, const Dataset& data, corpus::Split split,
    optim::ParamStore* extractor_store, optim::ParamStore* abstractor_store,
    const extractor::ExtractorConfig& ext_cfg, const abstractor::AbstractorConfig& abs_cfg,
    std::uint64_t seed) {
  const std::vector<std::size_t>& idxs = data.split(split);
  if (idxs.empty()) fail("generate: empty document split");
  const bool needs_abstractor = method == Method::porlhg || method == Method::seq2seq;
  const bool needs_extractor = method == Method::porlhg;
  if (needs_abstractor && abstractor_store == nullptr)
    fail("generate: method %s needs abstractor parameters", method_name(method));
  if (needs_extractor && extractor_store == nullptr)
    fail("generate: method %s needs extractor parameters", method_name(method));

  std::optional<baselines::Bm25Index> index;
  if (method == Method::bm25) {
    std::vector<corpus::Tokens> headlines;
    headlines.reserve(data.train_idx.size());
    for (std::size_t i : data.train_idx) headlines.push_back(data.docs[i].headline);
    index.emplace(std::move(headlines));
  }

  std::vector<GenerationRecord> out;
  out.reserve(idxs.size());
  for (std::size_t n = 0; n < idxs.size(); ++n) {
    const corpus::Document& doc = data.docs[idxs[n]];
    GenerationRecord rec;
    rec.id = doc.id;
    switch (method) {
      case Method::porlhg: {
        const abstractor::DecodeResult d =
            porlhg_decode(*extractor_store, *abstractor_store, ext_cfg, abs_cfg, data, doc);
        rec.tokens = d.tokens;
        rec.logprob = d.sum_logprob;
        break;
      }
      case Method::seq2seq: {
        ad::Tape tape;
        optim::GraphParams p(tape, *abstractor_store);
        Rng unused(0);
        const abstractor::DecodeResult d =
            abstractor::generate(tape, p, abs_cfg, truncated_article(doc), data.vocab,
                                 abstractor::DecodeMode::greedy, unused, /*gate_override=*/1.0);
        rec.tokens = d.tokens;
        rec.logprob = d.sum_logprob;
        break;
      }
      case Method::bm25:
        rec.tokens = baselines::bm25_headline(doc.all_tokens(), *index);
        break;
      case Method::prefix:
        rec.tokens = baselines::prefix_headline(doc);
        break;
      case Method::random_sentence:
        rec.tokens = baselines::random_headline(doc, seed + n);
        break;
    }
    const corpus::Tokens article = doc.all_tokens();
    rec.copy_rate = rec.tokens.empty() ? 0.0 : metrics::copy_rate(rec.tokens, article);
    out.push_back(std::move(rec));
  }
  return out;
}

// ---- full pipeline --------------------------------------------------------------------

struct PipelineReport {
  ExtractorPhaseReport extractor;
  AbstractorPhaseReport abstractor;
  predictor::TrainReport predictor;
  RlReport rl;
};

inline extractor::ExtractorConfig make_extractor_config(const config::RunConfig& c,
                                                        const Dataset& data, int topics_k) {
  extractor::ExtractorConfig cfg;
  cfg.vocab_size = data.vocab.size();
  cfg.embed_dim = c.index("model.embed_dim");
  cfg.conv_channels = c.index("model.conv_channels");
  cfg.hidden = c.index("model.hidden");
  cfg.topics = static_cast<std::size_t>(topics_k);
  cfg.attention_dim = c.index("model.attention_dim");
  cfg.use_pta_features = c.flag("ablation.use_pta_features");
  cfg.use_pta_loss = c.flag("ablation.use_pta_loss");
  return cfg;
}

inline abstractor::AbstractorConfig make_abstractor_config(const config::RunConfig& c,
                                                           const Dataset& data) {
  abstractor::AbstractorConfig cfg;
  cfg.vocab_size = data.vocab.size();
  cfg.embed_dim = c.index("model.embed_dim");
  cfg.hidden = c.index("model.hidden");
  cfg.attention_dim = c.index("model.attention_dim");
  cfg.max_len = c.index("decode.max_len");
  return cfg;
}

inline predictor::PredictorConfig make_predictor_config(const config::RunConfig& c,
                                                        const Dataset& data) {
  predictor::PredictorConfig cfg;
  cfg.vocab_size = data.vocab.size();
  cfg.embed_dim = c.index("model.embed_dim");
  cfg.conv_channels = c.index("model.conv_channels");
  cfg.hidden = c.index("model.hidden");
  cfg.attention_dim = c.index("model.attention_dim");
  return cfg;
}

inline RlOptions make_rl_options(const config::RunConfig& c, const config::Paths& paths) {
  RlOptions opts;
  opts.updates = c.index("rl.updates");
  opts.batch = c.index("rl.batch");
  opts.use_pop_reward = c.flag("ablation.use_pop_reward");
  opts.joint_abstractor = c.flag("rl.joint_abstractor");
  opts.lambda_pop = c.num("reward.lambda_pop");
  opts.lambda_a = c.num("abstractor.lambda_a");
  opts.log_path = paths.reward_log();
  return opts;
}

// all four phases in order, reading the corpus artifacts from disk and
// leaving checkpoints, the reward log, and reports behind
inline PipelineReport run_pipeline(const config::RunConfig& c) {
  const config::Paths paths(c);
  const std::uint64_t seed = c.seed();
  const optim::AdamConfig adam = config::make_adam(c);
  Dataset data = load_dataset(paths);
  if (data.doc_topics.empty()) fail("pipeline: no topic vectors loaded");
  const int topics_k = static_cast<int>(data.doc_topics.front().article_vec.size());

  const extractor::ExtractorConfig ext_cfg = make_extractor_config(c, data, topics_k);
  const abstractor::AbstractorConfig abs_cfg = make_abstractor_config(c, data);
  const predictor::PredictorConfig pred_cfg = make_predictor_config(c, data);

  // one named substream per network, so a staged run (one command per phase)
  // starts from the same parameters as this single-process pipeline
  Rng init = Rng(seed).substream("init");
  optim::ParamStore ext_store, abs_store, pred_store, critic_store;
  Rng ext_rng = init.substream("extractor");
  extractor::init_params(ext_store, ext_cfg, ext_rng);
  Rng abs_rng = init.substream("abstractor");
  abstractor::init_params(abs_store, abs_cfg, abs_rng);
  Rng pred_rng = init.substream("predictor");
  predictor::init_params(pred_store, pred_cfg, pred_rng);
  init_critic(critic_store, init, 2 * ext_cfg.hidden + ext_cfg.topics);

  PipelineReport report;
  report.extractor = pretrain_extractor(ext_store, ext_cfg, data, c.index("train.extractor_epochs"),
                                        c.index("train.batch"), adam, seed);
  report.abstractor =
      pretrain_abstractor(abs_store, abs_cfg, data, c.index("train.abstractor_epochs"),
                          c.index("train.batch"), adam, seed);
  report.predictor = train_predictor_phase(pred_store, pred_cfg, data,
                                           c.index("train.predictor_epochs"),
                                           c.index("train.batch"), adam, seed);
  report.rl = train_rl(ext_store, critic_store, abs_store, pred_store, ext_cfg, abs_cfg, pred_cfg,
                       data, make_rl_options(c, paths), adam, seed);

  ext_store.save(paths.extractor());
  abs_store.save(paths.abstractor());
  pred_store.save(paths.predictor());
  critic_store.save(paths.critic());
  write_file(paths.reward_log(), report.rl.log.csv());
  return report;
}

}  // namespace headliner::trainer
