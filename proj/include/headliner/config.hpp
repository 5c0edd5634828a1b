// Run configuration: a flat key=value registry in which every key has a
// default, unknown keys are rejected, and the seed must be given explicitly
// for any command that draws randomness. Files use one key=value pair per
// line with '#' comments; single overrides arrive as "key=value" strings.
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "headliner/common.hpp"
#include "headliner/corpus.hpp"
#include "headliner/optim.hpp"

namespace headliner::config {

class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"seed", ""},  // intentionally blank: randomness requires an explicit seed
        {"paths.dir", "out"},
        {"vocab.cap", "30000"},
        {"synth.docs", "2500"},
        {"synth.sentences", "5"},
        {"synth.sentence_len", "8"},
        {"synth.topic_pools", "4"},
        {"synth.pool_words", "30"},
        {"synth.filler_words", "40"},
        {"synth.headline_keep", "0.7"},
        {"synth.conflict_frac", "0.3"},
        {"lda.topics", "16"},
        {"lda.alpha", "0"},  // 0 selects the 50/K default
        {"lda.beta", "0.01"},
        {"lda.train_iterations", "200"},
        {"lda.fold_in_iterations", "20"},
        {"retrieval.m", "5"},
        {"model.embed_dim", "32"},
        {"model.conv_channels", "20"},
        {"model.hidden", "32"},
        {"model.attention_dim", "32"},
        {"train.lr", "0.001"},
        {"train.clip_norm", "2.0"},
        {"train.batch", "32"},
        {"train.extractor_epochs", "4"},
        {"train.abstractor_epochs", "4"},
        {"train.predictor_epochs", "6"},
        {"rl.updates", "120"},
        {"rl.batch", "8"},
        {"rl.joint_abstractor", "true"},
        {"ablation.use_pta_features", "true"},
        {"ablation.use_pta_loss", "true"},
        {"ablation.use_pop_reward", "true"},
        {"reward.lambda_pop", "1.0"},
        {"abstractor.lambda_a", "1.0"},
        {"decode.max_len", "30"},
        {"analysis.lexicon_dir", "data/lexicons"},
    };
    return d;
  }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) fail("config: unknown key \"%s\"", key.c_str());
    it->second = value;
  }

  // "key=value" as passed to --set
  void set_pair(const std::string& pair) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0)
      fail("config: expected key=value, got \"%s\"", pair.c_str());
    set(pair.substr(0, eq), pair.substr(eq + 1));
  }

  void load_file(const std::string& path) {
    std::size_t line_no = 0;
    for (std::string line : split_lines(read_file(path))) {
      ++line_no;
      const std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos || eq == 0)
        fail("%s:%zu: expected key=value, got \"%s\"", path.c_str(), line_no, trimmed.c_str());
      set(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
    }
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail("config: unknown key \"%s\"", key.c_str());
    return it->second;
  }

  double num(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      fail("config: key \"%s\" has non-numeric value \"%s\"", key.c_str(), v.c_str());
    }
  }

  long long integer(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      fail("config: key \"%s\" has non-integer value \"%s\"", key.c_str(), v.c_str());
    }
  }

  std::size_t index(const std::string& key) const {
    const long long v = integer(key);
    if (v < 0) fail("config: key \"%s\" must be non-negative, got %lld", key.c_str(), v);
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("config: key \"%s\" must be true/false, got \"%s\"", key.c_str(), v.c_str());
  }

  bool seed_set() const { return !str("seed").empty(); }

  std::uint64_t seed() const {
    if (!seed_set()) fail("config: seed is required for this command (pass --seed <int>)");
    return static_cast<std::uint64_t>(integer("seed"));
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  // effective LDA alpha: explicit value, or the 50/K convention when left 0
  double lda_alpha() const {
    const double a = num("lda.alpha");
    if (a < 0.0) fail("config: lda.alpha must be non-negative");
    return a > 0.0 ? a : 50.0 / static_cast<double>(index("lda.topics"));
  }

 private:
  std::map<std::string, std::string> values_;
};

// ---- adapters into module configs -------------------------------------------

inline corpus::SynthConfig make_synth(const RunConfig& c) {
  corpus::SynthConfig s;
  s.n_docs = static_cast<int>(c.integer("synth.docs"));
  s.n_sentences = static_cast<int>(c.integer("synth.sentences"));
  s.sentence_len = static_cast<int>(c.integer("synth.sentence_len"));
  s.n_topic_pools = static_cast<int>(c.integer("synth.topic_pools"));
  s.pool_words = static_cast<int>(c.integer("synth.pool_words"));
  s.filler_words = static_cast<int>(c.integer("synth.filler_words"));
  s.headline_keep = c.num("synth.headline_keep");
  s.conflict_frac = c.num("synth.conflict_frac");
  return s;
}

inline optim::AdamConfig make_adam(const RunConfig& c) {
  optim::AdamConfig a;
  a.lr = c.num("train.lr");
  a.clip_norm = c.num("train.clip_norm");
  return a;
}

// fixed output-file layout under paths.dir
struct Paths {
  std::string dir;
  explicit Paths(const RunConfig& c) : dir(c.str("paths.dir")) {}
  std::string corpus() const { return dir + "/corpus.jsonl"; }
  std::string vocab() const { return dir + "/vocab.txt"; }
  std::string topic_model() const { return dir + "/topics.hltm"; }
  std::string topic_index() const { return dir + "/index.hlti"; }
  std::string doc_topics() const { return dir + "/doc_topics.hldt"; }
  std::string labels() const { return dir + "/labels.jsonl"; }
  std::string extractor() const { return dir + "/extractor.hlcp"; }
  std::string abstractor() const { return dir + "/abstractor.hlcp"; }
  std::string predictor() const { return dir + "/predictor.hlcp"; }
  std::string critic() const { return dir + "/critic.hlcp"; }
  std::string reward_log() const { return dir + "/reward_log.csv"; }
  std::string heatmap() const { return dir + "/heatmap.csv"; }
  std::string generation(const std::string& method) const {
    return dir + "/generated-" + method + ".jsonl";
  }
  std::string evaluation() const { return dir + "/evaluation.csv"; }
  std::string significance() const { return dir + "/significance.csv"; }
  std::string attractiveness() const { return dir + "/attractiveness.csv"; }
};

}  // namespace headliner::config
