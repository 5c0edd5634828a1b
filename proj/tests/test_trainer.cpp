#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fd_check.hpp"
#include "headliner/trainer.hpp"

using namespace headliner;
using ad::Tensor;
using corpus::Tokens;

namespace {

std::map<std::string, std::vector<double>> snapshot(optim::ParamStore& store) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& name : store.names()) out[name] = store.entry(name).value.data;
  return out;
}

// a small end-to-end dataset: synthetic corpus, vocabulary, fitted topics,
// and proxy labels, exactly as the pipeline would assemble them
trainer::Dataset mini_dataset(std::uint64_t seed) {
  corpus::SynthConfig scfg;
  scfg.n_docs = 60;
  scfg.n_sentences = 3;
  scfg.sentence_len = 5;
  scfg.n_topic_pools = 2;
  scfg.pool_words = 10;
  scfg.filler_words = 12;

  trainer::Dataset ds;
  ds.docs = corpus::generate_synthetic_corpus(seed, scfg);
  ds.vocab = corpus::build_vocabulary(ds.docs, 500);
  topics::CorpusTopics fitted =
      topics::build_corpus_topics(ds.docs, ds.vocab, 3, 0.5, 0.1, 40, 10, 2, seed);
  ds.doc_topics = std::move(fitted.doc_topics);
  ds.proxy.reserve(ds.docs.size());
  for (std::size_t i = 0; i < ds.docs.size(); ++i)
    ds.proxy.push_back(labels::build_proxy_labels(ds.docs[i], ds.doc_topics[i]));
  ds.build_indices();
  return ds;
}

struct MiniModels {
  extractor::ExtractorConfig ext_cfg;
  abstractor::AbstractorConfig abs_cfg;
  predictor::PredictorConfig pred_cfg;
  optim::ParamStore ext, abs, pred, critic;
};

MiniModels mini_models(const trainer::Dataset& data, std::uint64_t seed) {
  MiniModels m;
  m.ext_cfg.vocab_size = data.vocab.size();
  m.ext_cfg.embed_dim = 6;
  m.ext_cfg.conv_channels = 4;
  m.ext_cfg.hidden = 4;
  m.ext_cfg.topics = data.doc_topics.front().article_vec.size();
  m.ext_cfg.attention_dim = 4;
  m.abs_cfg.vocab_size = data.vocab.size();
  m.abs_cfg.embed_dim = 6;
  m.abs_cfg.hidden = 4;
  m.abs_cfg.attention_dim = 4;
  m.pred_cfg.vocab_size = data.vocab.size();
  m.pred_cfg.embed_dim = 6;
  m.pred_cfg.conv_channels = 4;
  m.pred_cfg.hidden = 4;
  m.pred_cfg.attention_dim = 4;

  Rng rng(seed);
  extractor::init_params(m.ext, m.ext_cfg, rng);
  abstractor::init_params(m.abs, m.abs_cfg, rng);
  predictor::init_params(m.pred, m.pred_cfg, rng);
  trainer::init_critic(m.critic, rng, 2 * m.ext_cfg.hidden + m.ext_cfg.topics);
  return m;
}

}  // namespace

TEST_CASE("the reward recomposes ROUGE-L and the popularity term", "[trainer]") {
  const Tokens reference = {"the", "cat", "sat"};

  SECTION("a perfect match with zero pop weight scores exactly one") {
    REQUIRE(trainer::compute_reward(reference, reference, 0.9, 0.0) == 1.0);
  }
  SECTION("reward adds lambda-weighted popularity to the ROUGE term") {
    const Tokens gen = {"the", "dog", "sat"};
    const double expect = metrics::rouge_l(gen, reference).f1 + 0.5 * 0.8;
    REQUIRE(trainer::compute_reward(gen, reference, 0.8, 0.5) ==
            Catch::Approx(expect).margin(1e-12));
  }
  SECTION("an empty generation earns only the popularity term") {
    REQUIRE(trainer::compute_reward({}, reference, 0.25, 1.0) == 0.25);
  }
  SECTION("rewards stay inside [0, 2] at lambda one") {
    REQUIRE(trainer::compute_reward(reference, reference, 1.0, 1.0) == 2.0);
  }
  SECTION("invalid inputs are rejected") {
    REQUIRE_THROWS_AS(trainer::compute_reward(reference, {}, 0.5, 1.0), Error);
    REQUIRE_THROWS_AS(trainer::compute_reward(reference, reference, -0.1, 1.0), Error);
    REQUIRE_THROWS_AS(trainer::compute_reward(reference, reference, 1.1, 1.0), Error);
    REQUIRE_THROWS_AS(trainer::compute_reward(reference, reference, 0.5, -1.0), Error);
  }
}

TEST_CASE("the critic regresses features to a constant target", "[trainer]") {
  const std::size_t dim = 6;
  optim::ParamStore store;
  Rng rng(3);
  trainer::init_critic(store, rng, dim);

  std::vector<Tensor> features;
  Rng frng(17);
  for (int i = 0; i < 4; ++i) {
    Tensor f({dim});
    for (double& x : f.data) x = frng.uniform_real(-1.0, 1.0);
    features.push_back(f);
  }

  optim::AdamConfig adam;
  adam.lr = 1e-2;
  for (int step = 0; step < 300; ++step) {
    ad::Tape tape;
    optim::GraphParams p(tape, store);
    std::vector<ad::Value> losses;
    for (const Tensor& f : features) {
      ad::Value diff = ad::sub(trainer::critic_value(tape, p, f),
                               tape.leaf(Tensor::scalar(0.7)));
      losses.push_back(ad::mul(diff, diff));
    }
    ad::Value loss = ad::mean(ad::stack_scalars(losses));
    tape.backward(loss);
    p.step(adam);
  }

  for (const Tensor& f : features) {
    ad::Tape tape;
    optim::GraphParams p(tape, store);
    REQUIRE(trainer::critic_value(tape, p, f).val().item() ==
            Catch::Approx(0.7).margin(1e-2));
  }
}

TEST_CASE("critic loss gradients match central differences", "[trainer][grad]") {
  const std::size_t dim = 5;
  optim::ParamStore store;
  Rng rng(7);
  trainer::init_critic(store, rng, dim);

  std::vector<Tensor> features;
  Rng frng(23);
  for (int i = 0; i < 2; ++i) {
    Tensor f({dim});
    for (double& x : f.data) x = frng.uniform_real(-1.0, 1.0);
    features.push_back(f);
  }
  const std::vector<double> targets = {0.4, 1.3};

  fdtest::check_gradients(store, [&](ad::Tape& tape, optim::GraphParams& p) {
    std::vector<ad::Value> losses;
    for (std::size_t i = 0; i < features.size(); ++i) {
      ad::Value diff = ad::sub(trainer::critic_value(tape, p, features[i]),
                               tape.leaf(Tensor::scalar(targets[i])));
      losses.push_back(ad::mul(diff, diff));
    }
    return ad::mean(ad::stack_scalars(losses));
  });
}

TEST_CASE("actor-critic updates move both networks the right way", "[trainer]") {
  // one fixed two-sentence state with uniform topic vectors
  corpus::Document doc;
  doc.id = "d0";
  doc.sentences = {{"alpha", "bravo"}, {"charlie", "delta"}};
  doc.headline = {"alpha"};
  doc.split = corpus::Split::train;
  const corpus::Vocabulary vocab = corpus::build_vocabulary({doc}, 100);

  extractor::ExtractorConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.embed_dim = 4;
  cfg.conv_channels = 3;
  cfg.hidden = 4;
  cfg.topics = 2;
  cfg.attention_dim = 4;
  const std::vector<std::vector<double>> svecs = {{0.5, 0.5}, {0.5, 0.5}};
  const std::vector<double> ref = {0.5, 0.5};

  optim::ParamStore ext_store, critic_store;
  Rng rng(9);
  extractor::init_params(ext_store, cfg, rng);
  trainer::init_critic(critic_store, rng, 2 * cfg.hidden + cfg.topics);

  const auto make_trajectory = [&](ad::Tape& tape, optim::GraphParams& ep,
                                   optim::GraphParams& cp) {
    const auto out = extractor::forward(tape, ep, cfg, trainer::encode_document(vocab, doc),
                                        svecs, ref);
    trainer::Trajectory t;
    t.doc_id = doc.id;
    t.action = 0;
    t.log_pi = ad::scale(ad::neg_log_pick(out.p, 0), -1.0);
    t.value = trainer::critic_value(tape, cp, trainer::mean_feature_vector(out.e));
    t.entropy = trainer::policy_entropy(out.p.val().data);
    return t;
  };

  optim::AdamConfig adam;
  adam.lr = 1e-2;

  SECTION("zero advantage leaves every parameter exactly unchanged") {
    const auto ext_before = snapshot(ext_store);
    const auto critic_before = snapshot(critic_store);

    ad::Tape tape;
    optim::GraphParams ep(tape, ext_store), cp(tape, critic_store);
    trainer::Trajectory t = make_trajectory(tape, ep, cp);
    t.reward = t.value.val().item();  // advantage is exactly zero
    const auto stats = trainer::a2c_update(tape, ep, cp, {t}, adam);

    REQUIRE(stats.mean_advantage == 0.0);
    REQUIRE(stats.critic_loss == 0.0);
    REQUIRE(snapshot(ext_store) == ext_before);
    REQUIRE(snapshot(critic_store) == critic_before);
  }

  SECTION("a positive advantage reinforces the action and corrects the critic") {
    double logp_before = 0.0, value_before = 0.0, reward = 0.0;
    {
      ad::Tape tape;
      optim::GraphParams ep(tape, ext_store), cp(tape, critic_store);
      trainer::Trajectory t = make_trajectory(tape, ep, cp);
      value_before = t.value.val().item();
      logp_before = t.log_pi.val().item();
      reward = value_before + 1.0;
      t.reward = reward;
      const auto stats = trainer::a2c_update(tape, ep, cp, {t}, adam);
      REQUIRE(stats.mean_advantage == Catch::Approx(1.0).margin(1e-12));
    }
    ad::Tape tape;
    optim::GraphParams ep(tape, ext_store), cp(tape, critic_store);
    const trainer::Trajectory after = make_trajectory(tape, ep, cp);
    REQUIRE(after.log_pi.val().item() > logp_before);
    REQUIRE(std::abs(after.value.val().item() - reward) < std::abs(value_before - reward));
  }

  SECTION("an empty batch is rejected") {
    ad::Tape tape;
    optim::GraphParams ep(tape, ext_store), cp(tape, critic_store);
    REQUIRE_THROWS_AS(trainer::a2c_update(tape, ep, cp, {}, adam), Error);
  }
}

TEST_CASE("policy entropy follows the textbook values", "[trainer]") {
  REQUIRE(trainer::policy_entropy({0.25, 0.25, 0.25, 0.25}) ==
          Catch::Approx(std::log(4.0)).margin(1e-12));
  REQUIRE(trainer::policy_entropy({1.0, 0.0, 0.0}) == 0.0);
  REQUIRE(trainer::policy_entropy({0.5, 0.5}) ==
          Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("the reward log enforces ordering and serializes cleanly", "[trainer]") {
  trainer::RewardLog log;
  log.append({0, 0.5, 0.25, 0.25, 1.5});
  log.append({1, 0.75, 0.5, 0.25, 1.25});
  REQUIRE_THROWS_AS(log.append({3, 0.0, 0.0, 0.0, 0.0}), Error);
  REQUIRE_THROWS_AS(log.append({1, 0.0, 0.0, 0.0, 0.0}), Error);

  REQUIRE(log.csv() ==
          "update_idx,mean_reward,mean_rouge_term,mean_pop_term,entropy\n"
          "0,0.5,0.25,0.25,1.5\n"
          "1,0.75,0.5,0.25,1.25\n");
}

TEST_CASE("generation records survive a JSONL round trip", "[trainer]") {
  std::vector<trainer::GenerationRecord> records;
  records.push_back({"doc-1", {"hello", "world"}, 0.5, -3.25});
  records.push_back({"doc-2", {}, 0.0, 0.0});

  const std::string text = trainer::generation_to_jsonl(records);
  const auto parsed = trainer::parse_generation(text, "test");
  REQUIRE(parsed.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    REQUIRE(parsed[i].id == records[i].id);
    REQUIRE(parsed[i].tokens == records[i].tokens);
    REQUIRE(parsed[i].copy_rate == records[i].copy_rate);
    REQUIRE(parsed[i].logprob == records[i].logprob);
  }

  SECTION("parse failures name the offending line") {
    REQUIRE_THROWS_WITH(trainer::parse_generation("{\"id\":\"a\",\"tokens\":[]}\nnot json\n", "gen"),
                        Catch::Matchers::ContainsSubstring("line 2"));
    REQUIRE_THROWS_WITH(trainer::parse_generation("{\"tokens\":[]}\n", "gen"),
                        Catch::Matchers::ContainsSubstring("line 1"));
    REQUIRE_THROWS_WITH(trainer::parse_generation("{\"id\":7,\"tokens\":[]}\n", "gen"),
                        Catch::Matchers::ContainsSubstring("line 1"));
  }
}

TEST_CASE("method names round-trip and reject unknowns", "[trainer]") {
  using trainer::Method;
  for (Method m : {Method::porlhg, Method::seq2seq, Method::bm25, Method::prefix,
                   Method::random_sentence})
    REQUIRE(trainer::parse_method(trainer::method_name(m)) == m);
  REQUIRE(trainer::parse_method("seq2seq") == Method::seq2seq);
  REQUIRE_THROWS_AS(trainer::parse_method("oracle"), Error);
}

TEST_CASE("pretraining phases run end to end on a small corpus", "[trainer]") {
  const trainer::Dataset data = mini_dataset(77);
  REQUIRE_FALSE(data.train_idx.empty());
  REQUIRE_FALSE(data.val_idx.empty());
  REQUIRE_FALSE(data.test_idx.empty());
  MiniModels m = mini_models(data, 5);
  optim::AdamConfig adam;
  adam.lr = 5e-3;

  const auto ext = trainer::pretrain_extractor(m.ext, m.ext_cfg, data, 1, 8, adam, 11);
  REQUIRE(ext.steps == (data.train_idx.size() + 7) / 8);
  REQUIRE(std::isfinite(ext.final_train_loss));
  REQUIRE(ext.val_agreement >= 0.0);
  REQUIRE(ext.val_agreement <= 1.0);

  const auto abs = trainer::pretrain_abstractor(m.abs, m.abs_cfg, data, 1, 8, adam, 11);
  REQUIRE(abs.steps == ext.steps);
  REQUIRE(std::isfinite(abs.final_train_loss));
  REQUIRE(abs.val_rouge_l >= 0.0);
  REQUIRE(abs.val_rouge_l <= 1.0);

  const auto pred = trainer::train_predictor_phase(m.pred, m.pred_cfg, data, 1, 8, adam, 11);
  REQUIRE(pred.steps > 0);
  REQUIRE(pred.val_accuracy >= 0.0);
  REQUIRE(pred.val_accuracy <= 1.0);

  SECTION("dataset accessors resolve ids and reject strangers") {
    const auto& doc = data.docs[data.train_idx.front()];
    REQUIRE(data.topic(doc.id).id == doc.id);
    REQUIRE(data.label(doc.id).doc_id == doc.id);
    REQUIRE_THROWS_AS(data.topic("no-such-doc"), Error);
    REQUIRE_THROWS_AS(data.label("no-such-doc"), Error);
  }
}

TEST_CASE("reinforcement learning logs bounded rewards deterministically", "[trainer][rl]") {
  const trainer::Dataset data = mini_dataset(77);
  MiniModels m = mini_models(data, 5);
  optim::AdamConfig adam;
  adam.lr = 1e-3;

  trainer::RlOptions opts;
  opts.updates = 3;
  opts.batch = 4;
  const auto log_path =
      (std::filesystem::temp_directory_path() / "headliner_test_reward_log.csv").string();
  opts.log_path = log_path;

  // duplicate every store so the same phase can be replayed bit-for-bit
  MiniModels twin = m;

  const auto report = trainer::train_rl(m.ext, m.critic, m.abs, m.pred, m.ext_cfg, m.abs_cfg,
                                        m.pred_cfg, data, opts, adam, 101);
  REQUIRE(report.log.rows.size() == opts.updates);
  REQUIRE(report.abstractor_steps == opts.updates);
  for (const auto& row : report.log.rows) {
    REQUIRE(row.mean_reward >= 0.0);
    REQUIRE(row.mean_reward <= 2.0);
    REQUIRE(row.mean_reward ==
            Catch::Approx(row.mean_rouge_term + row.mean_pop_term).margin(1e-12));
    REQUIRE(row.entropy >= 0.0);
  }
  REQUIRE(read_file(log_path) == report.log.csv());

  SECTION("an identical replay reproduces the log and the parameters") {
    trainer::RlOptions replay = opts;
    replay.log_path.clear();
    const auto again = trainer::train_rl(twin.ext, twin.critic, twin.abs, twin.pred,
                                         twin.ext_cfg, twin.abs_cfg, twin.pred_cfg, data,
                                         replay, adam, 101);
    REQUIRE(again.log.csv() == report.log.csv());
    REQUIRE(snapshot(twin.ext) == snapshot(m.ext));
    REQUIRE(snapshot(twin.critic) == snapshot(m.critic));
    REQUIRE(snapshot(twin.abs) == snapshot(m.abs));
  }

  SECTION("dropping the popularity reward silences pop terms and joint updates") {
    trainer::RlOptions ablated = opts;
    ablated.log_path.clear();
    ablated.use_pop_reward = false;
    const auto run = trainer::train_rl(twin.ext, twin.critic, twin.abs, twin.pred, twin.ext_cfg,
                                       twin.abs_cfg, twin.pred_cfg, data, ablated, adam, 101);
    REQUIRE(run.abstractor_steps == 0);
    for (const auto& row : run.log.rows) REQUIRE(row.mean_pop_term == 0.0);
  }

  SECTION("disabling joint abstraction keeps the reward intact") {
    trainer::RlOptions ablated = opts;
    ablated.log_path.clear();
    ablated.joint_abstractor = false;
    const auto abs_before = snapshot(twin.abs);
    const auto run = trainer::train_rl(twin.ext, twin.critic, twin.abs, twin.pred, twin.ext_cfg,
                                       twin.abs_cfg, twin.pred_cfg, data, ablated, adam, 101);
    REQUIRE(run.abstractor_steps == 0);
    REQUIRE(snapshot(twin.abs) == abs_before);
  }

  SECTION("degenerate options are rejected") {
    trainer::RlOptions bad = opts;
    bad.batch = 0;
    REQUIRE_THROWS_AS(trainer::train_rl(twin.ext, twin.critic, twin.abs, twin.pred, twin.ext_cfg,
                                        twin.abs_cfg, twin.pred_cfg, data, bad, adam, 101),
                      Error);
  }
}

TEST_CASE("every generation method produces a record per document", "[trainer]") {
  const trainer::Dataset data = mini_dataset(77);
  MiniModels m = mini_models(data, 5);

  for (trainer::Method method :
       {trainer::Method::porlhg, trainer::Method::seq2seq, trainer::Method::bm25,
        trainer::Method::prefix, trainer::Method::random_sentence}) {
    const auto records = trainer::generate_records(method, data, corpus::Split::test, &m.ext,
                                                   &m.abs, m.ext_cfg, m.abs_cfg, 55);
    INFO("method " << trainer::method_name(method));
    REQUIRE(records.size() == data.test_idx.size());
    for (std::size_t n = 0; n < records.size(); ++n) {
      REQUIRE(records[n].id == data.docs[data.test_idx[n]].id);
      REQUIRE(records[n].copy_rate >= 0.0);
      REQUIRE(records[n].copy_rate <= 1.0);
    }
  }

  SECTION("the prefix baseline echoes the first sentence") {
    const auto records = trainer::generate_records(trainer::Method::prefix, data,
                                                   corpus::Split::test, nullptr, nullptr,
                                                   m.ext_cfg, m.abs_cfg, 55);
    for (std::size_t n = 0; n < records.size(); ++n) {
      const auto& doc = data.docs[data.test_idx[n]];
      REQUIRE(records[n].tokens == baselines::prefix_headline(doc));
      REQUIRE(records[n].copy_rate == 1.0);
    }
  }

  SECTION("the random baseline is reproducible per seed") {
    const auto a = trainer::generate_records(trainer::Method::random_sentence, data,
                                             corpus::Split::test, nullptr, nullptr, m.ext_cfg,
                                             m.abs_cfg, 55);
    const auto b = trainer::generate_records(trainer::Method::random_sentence, data,
                                             corpus::Split::test, nullptr, nullptr, m.ext_cfg,
                                             m.abs_cfg, 55);
    for (std::size_t n = 0; n < a.size(); ++n) REQUIRE(a[n].tokens == b[n].tokens);
  }

  SECTION("neural methods demand their parameter stores") {
    REQUIRE_THROWS_AS(trainer::generate_records(trainer::Method::porlhg, data,
                                                corpus::Split::test, nullptr, &m.abs, m.ext_cfg,
                                                m.abs_cfg, 55),
                      Error);
    REQUIRE_THROWS_AS(trainer::generate_records(trainer::Method::seq2seq, data,
                                                corpus::Split::test, &m.ext, nullptr, m.ext_cfg,
                                                m.abs_cfg, 55),
                      Error);
  }
}
