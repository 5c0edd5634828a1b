#include <catch_amalgamated.hpp>

#include <filesystem>
#include <string>

#include "headliner/config.hpp"

using namespace headliner;

TEST_CASE("every configuration key carries a usable default", "[config]") {
  const config::RunConfig c;
  for (const auto& [key, value] : config::RunConfig::defaults()) {
    INFO("key " << key);
    REQUIRE(c.str(key) == value);
  }
  // the sole deliberately blank default: randomness needs an explicit seed
  REQUIRE_FALSE(c.seed_set());
  REQUIRE(c.index("rl.updates") == 120);
  REQUIRE(c.num("reward.lambda_pop") == 1.0);
  REQUIRE(c.flag("rl.joint_abstractor"));
  REQUIRE(c.flag("ablation.use_pta_features"));
  REQUIRE(c.index("decode.max_len") == 30);
}

TEST_CASE("unknown keys are rejected on read and write", "[config]") {
  config::RunConfig c;
  REQUIRE_THROWS_WITH(c.set("no.such.key", "1"),
                      Catch::Matchers::ContainsSubstring("no.such.key"));
  REQUIRE_THROWS_WITH(c.str("no.such.key"),
                      Catch::Matchers::ContainsSubstring("no.such.key"));
}

TEST_CASE("typed getters parse the full value or fail loudly", "[config]") {
  config::RunConfig c;
  c.set("train.lr", "0.5");
  REQUIRE(c.num("train.lr") == 0.5);
  c.set("train.lr", "0.5x");
  REQUIRE_THROWS_WITH(c.num("train.lr"), Catch::Matchers::ContainsSubstring("train.lr"));

  c.set("rl.updates", "42");
  REQUIRE(c.integer("rl.updates") == 42);
  c.set("rl.updates", "42.5");
  REQUIRE_THROWS_AS(c.integer("rl.updates"), Error);
  c.set("rl.updates", "-3");
  REQUIRE(c.integer("rl.updates") == -3);
  REQUIRE_THROWS_WITH(c.index("rl.updates"),
                      Catch::Matchers::ContainsSubstring("non-negative"));

  c.set("rl.joint_abstractor", "1");
  REQUIRE(c.flag("rl.joint_abstractor"));
  c.set("rl.joint_abstractor", "false");
  REQUIRE_FALSE(c.flag("rl.joint_abstractor"));
  c.set("rl.joint_abstractor", "yes");
  REQUIRE_THROWS_AS(c.flag("rl.joint_abstractor"), Error);
}

TEST_CASE("command-line overrides use key=value", "[config]") {
  config::RunConfig c;
  c.set_pair("lda.topics=8");
  REQUIRE(c.index("lda.topics") == 8);
  c.set_pair("paths.dir=/tmp/run");
  REQUIRE(c.str("paths.dir") == "/tmp/run");
  REQUIRE_THROWS_AS(c.set_pair("lda.topics"), Error);
  REQUIRE_THROWS_AS(c.set_pair("=8"), Error);
  REQUIRE_THROWS_AS(c.set_pair("not.a.key=8"), Error);
}

TEST_CASE("config files accept comments and report offending lines", "[config]") {
  const auto path =
      (std::filesystem::temp_directory_path() / "headliner_test_config.cfg").string();

  SECTION("a well-formed file with comments and blank lines loads") {
    write_file(path,
               "# experiment defaults\n"
               "\n"
               "lda.topics = 4\n"
               "  train.lr=0.01  \n"
               "synth.docs=100\n");
    config::RunConfig c;
    c.load_file(path);
    REQUIRE(c.index("lda.topics") == 4);
    REQUIRE(c.num("train.lr") == 0.01);
    REQUIRE(c.integer("synth.docs") == 100);
    // untouched keys keep their defaults
    REQUIRE(c.index("rl.batch") == 8);
  }

  SECTION("a malformed line is named by number") {
    write_file(path, "lda.topics=4\nthis line has no equals\n");
    config::RunConfig c;
    REQUIRE_THROWS_WITH(c.load_file(path), Catch::Matchers::ContainsSubstring(":2:"));
  }

  SECTION("an unknown key inside a file is rejected") {
    write_file(path, "mystery.key=1\n");
    config::RunConfig c;
    REQUIRE_THROWS_WITH(c.load_file(path),
                        Catch::Matchers::ContainsSubstring("mystery.key"));
  }
}

TEST_CASE("seeds must be explicit before any randomness", "[config]") {
  config::RunConfig c;
  REQUIRE_THROWS_WITH(c.seed(), Catch::Matchers::ContainsSubstring("--seed"));
  c.set("seed", "7");
  REQUIRE(c.seed_set());
  REQUIRE(c.seed() == 7);
}

TEST_CASE("the LDA alpha default follows the 50 over K convention", "[config]") {
  config::RunConfig c;
  c.set("lda.topics", "25");
  REQUIRE(c.lda_alpha() == Catch::Approx(2.0).margin(1e-12));
  c.set("lda.alpha", "0.3");
  REQUIRE(c.lda_alpha() == 0.3);
  c.set("lda.alpha", "-1");
  REQUIRE_THROWS_AS(c.lda_alpha(), Error);
}

TEST_CASE("adapters map configuration into module structs", "[config]") {
  config::RunConfig c;
  c.set("synth.docs", "64");
  c.set("synth.conflict_frac", "0.25");
  const corpus::SynthConfig s = config::make_synth(c);
  REQUIRE(s.n_docs == 64);
  REQUIRE(s.conflict_frac == 0.25);
  REQUIRE(s.n_sentences == 5);

  c.set("train.lr", "0.005");
  c.set("train.clip_norm", "1.5");
  const optim::AdamConfig a = config::make_adam(c);
  REQUIRE(a.lr == 0.005);
  REQUIRE(a.clip_norm == 1.5);
}

TEST_CASE("output paths share one directory with fixed names", "[config]") {
  config::RunConfig c;
  c.set("paths.dir", "/tmp/exp");
  const config::Paths p(c);
  REQUIRE(p.corpus() == "/tmp/exp/corpus.jsonl");
  REQUIRE(p.vocab() == "/tmp/exp/vocab.txt");
  REQUIRE(p.topic_model() == "/tmp/exp/topics.hltm");
  REQUIRE(p.doc_topics() == "/tmp/exp/doc_topics.hldt");
  REQUIRE(p.labels() == "/tmp/exp/labels.jsonl");
  REQUIRE(p.extractor() == "/tmp/exp/extractor.hlcp");
  REQUIRE(p.reward_log() == "/tmp/exp/reward_log.csv");
  REQUIRE(p.generation("bm25") == "/tmp/exp/generated-bm25.jsonl");
  REQUIRE(p.evaluation() == "/tmp/exp/evaluation.csv");
  REQUIRE(p.significance() == "/tmp/exp/significance.csv");
  REQUIRE(p.attractiveness() == "/tmp/exp/attractiveness.csv");
}
