// Command-line entry point. Subcommands cover the full pipeline from corpus
// ingest through RL training and analysis; see README.md for a walkthrough.
//
// Every command reads the same key=value configuration (defaults, then
// --config file, then --seed/--out, then --set overrides) and exchanges data
// with the other commands purely through files in the output directory.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "headliner/analysis.hpp"
#include "headliner/config.hpp"
#include "headliner/trainer.hpp"

namespace {

using namespace headliner;

struct CommonArgs {
  std::string config_file;
  std::string out_dir;
  std::int64_t seed = 0;
  bool seed_given = false;
  std::vector<std::string> overrides;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "configuration file (key=value lines)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory (default: config paths.dir)");
  cmd->add_option("--seed", args.seed, "random seed (required wherever randomness is drawn)")
      ->each([&args](const std::string&) { args.seed_given = true; });
  cmd->add_option("--set", args.overrides, "override one configuration key, as key=value")
      ->take_all();
}

config::RunConfig build_config(const CommonArgs& args) {
  config::RunConfig c;
  if (!args.config_file.empty()) c.load_file(args.config_file);
  if (args.seed_given) c.set("seed", std::to_string(args.seed));
  if (!args.out_dir.empty()) c.set("paths.dir", args.out_dir);
  for (const auto& kv : args.overrides) c.set_pair(kv);
  return c;
}

void ensure_out_dir(const config::Paths& paths) {
  std::error_code ec;
  std::filesystem::create_directories(paths.dir, ec);
  if (ec) fail("cannot create output directory %s: %s", paths.dir.c_str(),
               ec.message().c_str());
}

void write_corpus_artifacts(const config::RunConfig& c, const std::vector<corpus::Document>& docs) {
  const config::Paths paths(c);
  ensure_out_dir(paths);
  corpus::serialize(docs, paths.corpus());
  const corpus::Vocabulary vocab = corpus::build_vocabulary(docs, c.index("vocab.cap"));
  vocab.save(paths.vocab());
  std::printf("wrote %zu documents and a %zu-entry vocabulary under %s\n", docs.size(),
              vocab.size(), paths.dir.c_str());
}

// ---- corpus stages ---------------------------------------------------------

int cmd_ingest(const config::RunConfig& c, const std::string& input) {
  write_corpus_artifacts(c, corpus::ingest(input));
  return 0;
}

int cmd_synth(const config::RunConfig& c) {
  write_corpus_artifacts(c, corpus::generate_synthetic_corpus(c.seed(), config::make_synth(c)));
  return 0;
}

int cmd_train_lda(const config::RunConfig& c) {
  const config::Paths paths(c);
  const std::vector<corpus::Document> docs = corpus::ingest(paths.corpus());
  const corpus::Vocabulary vocab = corpus::Vocabulary::load(paths.vocab());
  const topics::CorpusTopics fitted = topics::build_corpus_topics(
      docs, vocab, static_cast<int>(c.index("lda.topics")), c.lda_alpha(), c.num("lda.beta"),
      static_cast<int>(c.index("lda.train_iterations")),
      static_cast<int>(c.index("lda.fold_in_iterations")), c.index("retrieval.m"), c.seed());
  fitted.model.save(paths.topic_model());
  topics::save_index(fitted.index, fitted.model.K, paths.topic_index());
  topics::save_doc_topics(fitted.doc_topics, fitted.model.K, paths.doc_topics());
  std::printf("trained %d topics over %zu documents (index of %zu popular references)\n",
              fitted.model.K, docs.size(), fitted.index.size());
  return 0;
}

int cmd_build_labels(const config::RunConfig& c) {
  const config::Paths paths(c);
  const std::vector<corpus::Document> docs = corpus::ingest(paths.corpus());
  const std::vector<topics::DocTopics> doc_topics = topics::load_doc_topics(paths.doc_topics());
  std::unordered_map<std::string, const topics::DocTopics*> by_id;
  for (const auto& t : doc_topics) by_id[t.id] = &t;

  std::vector<labels::ProxyLabels> proxy;
  proxy.reserve(docs.size());
  for (const auto& doc : docs) {
    const auto it = by_id.find(doc.id);
    if (it == by_id.end())
      fail("build-labels: no topic vectors for document \"%s\" (run train-lda first)",
           doc.id.c_str());
    proxy.push_back(labels::build_proxy_labels(doc, *it->second));
  }
  labels::save_labels(proxy, paths.labels());
  std::printf("wrote proxy labels for %zu documents to %s\n", proxy.size(),
              paths.labels().c_str());
  return 0;
}

// ---- training stages -------------------------------------------------------

int topics_k_of(const trainer::Dataset& data) {
  if (data.doc_topics.empty()) fail("no topic vectors loaded (run train-lda first)");
  return static_cast<int>(data.doc_topics.front().article_vec.size());
}

int cmd_pretrain_extractor(const config::RunConfig& c) {
  const config::Paths paths(c);
  const trainer::Dataset data = trainer::load_dataset(paths);
  const extractor::ExtractorConfig cfg =
      trainer::make_extractor_config(c, data, topics_k_of(data));
  optim::ParamStore store;
  Rng rng = Rng(c.seed()).substream("init").substream("extractor");
  extractor::init_params(store, cfg, rng);
  const auto report =
      trainer::pretrain_extractor(store, cfg, data, c.index("train.extractor_epochs"),
                                  c.index("train.batch"), config::make_adam(c), c.seed());
  store.save(paths.extractor());
  std::printf("extractor pretrained: %zu steps, final loss %.4f, val agreement %.3f\n",
              report.steps, report.final_train_loss, report.val_agreement);
  return 0;
}

int cmd_pretrain_abstractor(const config::RunConfig& c) {
  const config::Paths paths(c);
  const trainer::Dataset data = trainer::load_dataset(paths);
  const abstractor::AbstractorConfig cfg = trainer::make_abstractor_config(c, data);
  optim::ParamStore store;
  Rng rng = Rng(c.seed()).substream("init").substream("abstractor");
  abstractor::init_params(store, cfg, rng);
  const auto report =
      trainer::pretrain_abstractor(store, cfg, data, c.index("train.abstractor_epochs"),
                                   c.index("train.batch"), config::make_adam(c), c.seed());
  store.save(paths.abstractor());
  std::printf(
      "abstractor pretrained: %zu steps, final loss %.4f, val ROUGE-L %.3f "
      "(%zu UNK-scored targets)\n",
      report.steps, report.final_train_loss, report.val_rouge_l, report.unk_scored_targets);
  return 0;
}

int cmd_train_predictor(const config::RunConfig& c) {
  const config::Paths paths(c);
  const trainer::Dataset data = trainer::load_dataset(paths);
  const predictor::PredictorConfig cfg = trainer::make_predictor_config(c, data);
  optim::ParamStore store;
  Rng rng = Rng(c.seed()).substream("init").substream("predictor");
  predictor::init_params(store, cfg, rng);
  const auto report =
      trainer::train_predictor_phase(store, cfg, data, c.index("train.predictor_epochs"),
                                     c.index("train.batch"), config::make_adam(c), c.seed());
  store.save(paths.predictor());
  std::printf("predictor trained: %zu steps, final loss %.4f, val accuracy %.3f\n",
              report.steps, report.final_train_loss, report.val_accuracy);
  return 0;
}

int cmd_train_rl(const config::RunConfig& c) {
  const config::Paths paths(c);
  const trainer::Dataset data = trainer::load_dataset(paths);
  const extractor::ExtractorConfig ext_cfg =
      trainer::make_extractor_config(c, data, topics_k_of(data));
  const abstractor::AbstractorConfig abs_cfg = trainer::make_abstractor_config(c, data);
  const predictor::PredictorConfig pred_cfg = trainer::make_predictor_config(c, data);

  optim::ParamStore ext_store = optim::ParamStore::load(paths.extractor());
  optim::ParamStore abs_store = optim::ParamStore::load(paths.abstractor());
  optim::ParamStore pred_store = optim::ParamStore::load(paths.predictor());
  optim::ParamStore critic_store;
  Rng init = Rng(c.seed()).substream("init");
  trainer::init_critic(critic_store, init, 2 * ext_cfg.hidden + ext_cfg.topics);

  const trainer::RlOptions opts = trainer::make_rl_options(c, paths);
  const trainer::RlReport report =
      trainer::train_rl(ext_store, critic_store, abs_store, pred_store, ext_cfg, abs_cfg,
                        pred_cfg, data, opts, config::make_adam(c), c.seed());

  ext_store.save(paths.extractor());
  abs_store.save(paths.abstractor());
  critic_store.save(paths.critic());
  write_file(paths.reward_log(), report.log.csv());
  const auto& last = report.log.rows.back();
  std::printf(
      "reinforcement finished: %zu updates, %zu abstractor steps, final mean reward %.4f\n",
      report.log.rows.size(), report.abstractor_steps, last.mean_reward);
  return 0;
}

// ---- generation, evaluation, analysis ---------------------------------------

const std::vector<trainer::Method>& all_methods() {
  static const std::vector<trainer::Method> m = {
      trainer::Method::porlhg, trainer::Method::seq2seq, trainer::Method::bm25,
      trainer::Method::prefix, trainer::Method::random_sentence};
  return m;
}

int cmd_generate(const config::RunConfig& c, const std::string& method_name,
                 const std::string& split_name) {
  const config::Paths paths(c);
  const trainer::Dataset data = trainer::load_dataset(paths);
  const trainer::Method method = trainer::parse_method(method_name);
  const corpus::Split split = corpus::split_from_name(split_name);

  const extractor::ExtractorConfig ext_cfg =
      trainer::make_extractor_config(c, data, topics_k_of(data));
  const abstractor::AbstractorConfig abs_cfg = trainer::make_abstractor_config(c, data);

  optim::ParamStore ext_store, abs_store;
  optim::ParamStore* ext = nullptr;
  optim::ParamStore* abs = nullptr;
  if (method == trainer::Method::porlhg) {
    ext_store = optim::ParamStore::load(paths.extractor());
    ext = &ext_store;
  }
  if (method == trainer::Method::porlhg || method == trainer::Method::seq2seq) {
    abs_store = optim::ParamStore::load(paths.abstractor());
    abs = &abs_store;
  }

  const auto records =
      trainer::generate_records(method, data, split, ext, abs, ext_cfg, abs_cfg, c.seed());
  const std::string out_path = paths.generation(trainer::method_name(method));
  write_file(out_path, trainer::generation_to_jsonl(records));
  std::printf("generated %zu headlines (%s, %s split) -> %s\n", records.size(),
              trainer::method_name(method), corpus::split_name(split), out_path.c_str());
  return 0;
}

int cmd_evaluate(const config::RunConfig& c, std::vector<std::string> methods) {
  const config::Paths paths(c);
  const std::vector<corpus::Document> docs = corpus::ingest(paths.corpus());
  std::unordered_map<std::string, corpus::Tokens> references, sources;
  for (const auto& doc : docs) {
    references[doc.id] = doc.headline;
    sources[doc.id] = doc.all_tokens();
  }

  if (methods.empty())
    for (trainer::Method m : all_methods()) methods.push_back(trainer::method_name(m));

  std::vector<analysis::EvalRow> rows;
  for (const std::string& name : methods) {
    trainer::parse_method(name);  // reject unknown method names early
    const std::string path = paths.generation(name);
    if (!std::filesystem::exists(path))
      fail("evaluate: missing generation file %s for method \"%s\" (run generate first)",
           path.c_str(), name.c_str());
    const auto records = trainer::load_generation(path);
    std::vector<analysis::SystemOutput> outputs;
    outputs.reserve(records.size());
    for (const auto& r : records) outputs.push_back({r.id, r.tokens});
    rows.push_back(analysis::evaluation_row(name, outputs, references, sources));
  }

  const std::string csv = analysis::evaluation_csv(rows);
  write_file(paths.evaluation(), csv);
  std::printf("%s", csv.c_str());
  std::printf("wrote %s\n", paths.evaluation().c_str());
  return 0;
}

int cmd_analyze(const config::RunConfig& c) {
  const config::Paths paths(c);
  const std::vector<corpus::Document> docs = corpus::ingest(paths.corpus());
  const corpus::Vocabulary vocab = corpus::Vocabulary::load(paths.vocab());
  const analysis::Lexicons lex = analysis::load_lexicons(c.str("analysis.lexicon_dir"));

  // hypothesis significance: popular vs unpopular ground-truth headlines
  std::unordered_map<std::string, int> label_by_id;
  for (const auto& l : corpus::median_split_labels(docs)) label_by_id[l.doc_id] = l.label;
  std::vector<analysis::HeadlineFeatures> popular, unpopular;
  for (const auto& doc : docs) {
    const auto it = label_by_id.find(doc.id);
    if (it == label_by_id.end()) continue;
    (it->second == 1 ? popular : unpopular)
        .push_back(analysis::headline_features(doc.headline, lex));
  }
  const auto sig = analysis::significance_report(popular, unpopular);
  write_file(paths.significance(), analysis::significance_csv(sig));
  std::size_t significant = 0;
  for (const auto& row : sig) significant += row.significant ? 1 : 0;

  // predictor-based reports need the trained predictor
  predictor::PredictorConfig pred_cfg;
  pred_cfg.vocab_size = vocab.size();
  pred_cfg.embed_dim = c.index("model.embed_dim");
  pred_cfg.conv_channels = c.index("model.conv_channels");
  pred_cfg.hidden = c.index("model.hidden");
  pred_cfg.attention_dim = c.index("model.attention_dim");
  optim::ParamStore pred_store = optim::ParamStore::load(paths.predictor());

  // attractiveness per method (where a generation file exists) plus the
  // ground-truth test headlines as a reference row
  std::string attract = "method,attractiveness_rate,headlines\n";
  {
    std::vector<corpus::Tokens> reference_headlines;
    for (const auto& doc : docs)
      if (doc.split == corpus::Split::test) reference_headlines.push_back(doc.headline);
    if (!reference_headlines.empty())
      attract += strfmt("reference,%.12g,%zu\n",
                        analysis::attractiveness_rate(pred_store, pred_cfg,
                                                      reference_headlines, vocab),
                        reference_headlines.size());
  }
  for (trainer::Method m : all_methods()) {
    const std::string path = paths.generation(trainer::method_name(m));
    if (!std::filesystem::exists(path)) continue;
    std::vector<corpus::Tokens> headlines;
    for (const auto& r : trainer::load_generation(path))
      if (!r.tokens.empty()) headlines.push_back(r.tokens);
    if (headlines.empty()) continue;
    attract += strfmt("%s,%.12g,%zu\n", trainer::method_name(m),
                      analysis::attractiveness_rate(pred_store, pred_cfg, headlines, vocab),
                      headlines.size());
  }
  write_file(paths.attractiveness(), attract);

  // attention heatmap over the first test-split headlines
  std::vector<corpus::Tokens> heatmap_headlines;
  for (const auto& doc : docs) {
    if (doc.split != corpus::Split::test) continue;
    heatmap_headlines.push_back(doc.headline);
    if (heatmap_headlines.size() == 50) break;
  }
  if (!heatmap_headlines.empty())
    write_file(paths.heatmap(),
               predictor::attention_heatmap_csv(pred_store, pred_cfg, heatmap_headlines, vocab));

  std::printf("analysis: %zu/%zu hypotheses significant; wrote %s, %s, %s\n", significant,
              sig.size(), paths.significance().c_str(), paths.attractiveness().c_str(),
              paths.heatmap().c_str());
  return 0;
}

// ---- gradient self-check -----------------------------------------------------

// assertion-free central-difference comparison over every parameter of one
// loss; returns the maximum relative error across probed entries
double max_grad_error(optim::ParamStore& store,
                      const std::function<ad::Value(ad::Tape&, optim::GraphParams&)>& loss) {
  const double h = 1e-5;
  Rng probe_rng(1234);

  std::map<std::string, Tensor> grads;
  {
    ad::Tape tape;
    optim::GraphParams p(tape, store);
    for (const auto& name : store.names()) (void)p[name];  // bind every leaf
    ad::Value value = loss(tape, p);
    tape.backward(value);
    for (const auto& [name, v] : p.bound()) grads.emplace(name, tape.grad(v));
  }

  const auto loss_value = [&]() {
    ad::Tape tape;
    optim::GraphParams p(tape, store);
    return loss(tape, p).val().item();
  };

  double worst = 0.0;
  for (const auto& name : store.names()) {
    auto& entry = store.entry(name);
    const Tensor& g = grads.at(name);
    std::vector<std::size_t> probes;
    if (entry.value.numel() <= 4) {
      for (std::size_t i = 0; i < entry.value.numel(); ++i) probes.push_back(i);
    } else {
      probes.push_back(0);
      for (int k = 0; k < 3; ++k) probes.push_back(probe_rng.uniform_index(entry.value.numel()));
    }
    for (std::size_t i : probes) {
      const double saved = entry.value.data[i];
      entry.value.data[i] = saved + h;
      const double up = loss_value();
      entry.value.data[i] = saved - h;
      const double down = loss_value();
      entry.value.data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double rel =
          std::abs(g.data[i] - fd) / std::max({std::abs(g.data[i]), std::abs(fd), 1.0});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

int cmd_grad_check(const config::RunConfig& c) {
  const std::uint64_t seed = c.seed();
  corpus::Document doc;
  doc.id = "g0";
  doc.sentences = {{"alpha", "bravo", "charlie"}, {"delta", "echo", "fox"}};
  doc.headline = {"bravo", "echo"};
  doc.split = corpus::Split::train;
  const corpus::Vocabulary vocab = corpus::build_vocabulary({doc}, 100);
  const double tol = 1e-6;
  bool ok = true;

  const auto report = [&](const char* name, double err) {
    const bool pass = err < tol;
    ok = ok && pass;
    std::printf("gradient check %-24s max relative error %.3g  [%s]\n", name, err,
                pass ? "PASS" : "FAIL");
  };

  {
    extractor::ExtractorConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.embed_dim = 4;
    cfg.conv_channels = 3;
    cfg.hidden = 3;
    cfg.topics = 2;
    cfg.attention_dim = 4;
    optim::ParamStore store;
    Rng rng(seed);
    extractor::init_params(store, cfg, rng);
    std::vector<std::vector<int>> ids;
    for (const auto& s : doc.sentences)
      ids.push_back(extractor::encode_sentence_ids(vocab, s, cfg.sentence_cap));
    const std::vector<std::vector<double>> svecs = {{0.7, 0.3}, {0.2, 0.8}};
    const std::vector<double> ref = {0.6, 0.4};
    report("extraction loss", max_grad_error(store, [&](ad::Tape& t, optim::GraphParams& p) {
             return extractor::pretrain_loss(
                 extractor::forward(t, p, cfg, ids, svecs, ref), 0, 1, true);
           }));
  }
  {
    abstractor::AbstractorConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.embed_dim = 4;
    cfg.hidden = 3;
    cfg.attention_dim = 4;
    optim::ParamStore store;
    Rng rng(seed);
    abstractor::init_params(store, cfg, rng);
    report("abstraction loss", max_grad_error(store, [&](ad::Tape& t, optim::GraphParams& p) {
             return abstractor::teacher_forced_loss(t, p, cfg, doc.sentences[0], doc.headline,
                                                    vocab);
           }));
  }
  {
    predictor::PredictorConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.embed_dim = 4;
    cfg.conv_channels = 3;
    cfg.hidden = 3;
    cfg.attention_dim = 3;
    optim::ParamStore store;
    Rng rng(seed);
    predictor::init_params(store, cfg, rng);
    const std::vector<int> ids = predictor::encode_headline_ids(vocab, doc.headline, 30);
    report("classification loss", max_grad_error(store, [&](ad::Tape& t, optim::GraphParams& p) {
             return predictor::bce_loss(t, predictor::forward_logit(t, p, cfg, ids).logit, 1);
           }));
  }
  {
    optim::ParamStore store;
    Rng rng(seed);
    trainer::init_critic(store, rng, 5);
    Tensor f({5});
    Rng frng(seed + 1);
    for (double& x : f.data) x = frng.uniform_real(-1.0, 1.0);
    report("critic loss", max_grad_error(store, [&](ad::Tape& t, optim::GraphParams& p) {
             ad::Value diff =
                 ad::sub(trainer::critic_value(t, p, f), t.leaf(Tensor::scalar(0.8)));
             return ad::mul(diff, diff);
           }));
  }

  if (!ok) {
    std::fprintf(stderr, "error: gradient self-check failed\n");
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"popularity-reinforced headline generation pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string ingest_input;
  std::string gen_method = "porlhg";
  std::string gen_split = "test";
  std::vector<std::string> eval_methods;

  CLI::App* ingest = app.add_subcommand("ingest", "load and normalize a corpus file");
  ingest->add_option("--input", ingest_input, "corpus JSONL file to ingest")
      ->required()
      ->check(CLI::ExistingFile);
  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  CLI::App* train_lda = app.add_subcommand("train-lda", "fit topics and the popularity index");
  CLI::App* build_labels = app.add_subcommand("build-labels", "build proxy extraction labels");
  CLI::App* pre_ext =
      app.add_subcommand("pretrain-extractor", "supervised pretraining of the extractor");
  CLI::App* pre_abs =
      app.add_subcommand("pretrain-abstractor", "teacher-forced pretraining of the abstractor");
  CLI::App* train_pred =
      app.add_subcommand("train-predictor", "train the popularity predictor");
  CLI::App* train_rl = app.add_subcommand("train-rl", "advantage actor-critic training");
  CLI::App* generate = app.add_subcommand("generate", "decode headlines for one method");
  generate->add_option("--method", gen_method,
                       "porlhg | seq2seq-approx | bm25 | prefix | random");
  generate->add_option("--split", gen_split, "train | val | test");
  CLI::App* evaluate = app.add_subcommand("evaluate", "ROUGE and copy-rate tables");
  evaluate->add_option("--method", eval_methods, "methods to evaluate (default: all)")
      ->take_all();
  CLI::App* analyze =
      app.add_subcommand("analyze", "hypothesis significance, attractiveness, heatmap");
  CLI::App* grad_check =
      app.add_subcommand("grad-check", "finite-difference gradient self-check");

  for (CLI::App* cmd : {ingest, synth, train_lda, build_labels, pre_ext, pre_abs, train_pred,
                        train_rl, generate, evaluate, analyze, grad_check})
    add_common_flags(cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    const config::RunConfig c = build_config(args);
    if (ingest->parsed()) return cmd_ingest(c, ingest_input);
    if (synth->parsed()) return cmd_synth(c);
    if (train_lda->parsed()) return cmd_train_lda(c);
    if (build_labels->parsed()) return cmd_build_labels(c);
    if (pre_ext->parsed()) return cmd_pretrain_extractor(c);
    if (pre_abs->parsed()) return cmd_pretrain_abstractor(c);
    if (train_pred->parsed()) return cmd_train_predictor(c);
    if (train_rl->parsed()) return cmd_train_rl(c);
    if (generate->parsed()) return cmd_generate(c, gen_method, gen_split);
    if (evaluate->parsed()) return cmd_evaluate(c, eval_methods);
    if (analyze->parsed()) return cmd_analyze(c);
    if (grad_check->parsed()) return cmd_grad_check(c);
    std::fprintf(stderr, "error: no command selected\n");
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
