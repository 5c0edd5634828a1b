#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "fd_check.hpp"
#include "headliner/corpus.hpp"
#include "headliner/predictor.hpp"

using namespace headliner;
using ad::Tensor;
using corpus::Tokens;

namespace {

const std::vector<std::string>& fillers() {
  static const std::vector<std::string> words = {"alpha",  "bravo", "charlie", "delta",
                                                 "echo",   "fox",   "golf",    "hotel",
                                                 "india",  "juliet"};
  return words;
}

corpus::Vocabulary planted_vocab() {
  corpus::Document doc;
  doc.id = "v";
  doc.sentences = {fillers()};
  doc.headline = {"wow"};
  return corpus::build_vocabulary({doc}, 100);
}

struct PlantedSets {
  std::vector<predictor::LabeledHeadline> train;
  std::vector<predictor::LabeledHeadline> val;
};

// headlines of random filler words; the popular half carries a trailing
// marker token, so the label is linearly recoverable from content
PlantedSets planted_sets(std::uint64_t seed) {
  Rng rng(seed);
  PlantedSets sets;
  for (std::size_t i = 0; i < 160; ++i) {
    predictor::LabeledHeadline ex;
    const std::size_t len = 3 + rng.uniform_index(4);
    for (std::size_t t = 0; t < len; ++t)
      ex.tokens.push_back(fillers()[rng.uniform_index(fillers().size())]);
    ex.label = i % 2 == 0 ? 1 : 0;
    if (ex.label == 1) ex.tokens.push_back("wow");
    (i < 120 ? sets.train : sets.val).push_back(ex);
  }
  return sets;
}

predictor::PredictorConfig small_cfg(const corpus::Vocabulary& vocab) {
  predictor::PredictorConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.embed_dim = 8;
  cfg.conv_channels = 6;
  cfg.hidden = 8;
  cfg.attention_dim = 8;
  return cfg;
}

optim::ParamStore fresh_store(const predictor::PredictorConfig& cfg, std::uint64_t seed) {
  optim::ParamStore store;
  Rng rng(seed);
  predictor::init_params(store, cfg, rng);
  return store;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("popularity scores are deterministic, bounded, and normalized", "[predictor]") {
  const corpus::Vocabulary vocab = planted_vocab();
  const predictor::PredictorConfig cfg = small_cfg(vocab);
  optim::ParamStore store = fresh_store(cfg, 5);
  const Tokens headline = {"alpha", "wow", "charlie", "delta"};

  const auto a = predictor::pop_score(store, cfg, headline, vocab);
  const auto b = predictor::pop_score(store, cfg, headline, vocab);
  REQUIRE(a.probability == b.probability);
  REQUIRE(a.logit == b.logit);
  REQUIRE(a.probability > 0.0);
  REQUIRE(a.probability < 1.0);
  REQUIRE(a.probability == Catch::Approx(sigmoid(a.logit)).margin(1e-12));
  for (std::size_t wi = 0; wi < 3; ++wi) {
    REQUIRE(a.attention[wi] == b.attention[wi]);
    REQUIRE(a.attention[wi].size() == headline.size());
    double total = 0.0;
    for (double w : a.attention[wi]) {
      REQUIRE(w >= 0.0);
      total += w;
    }
    REQUIRE(total == Catch::Approx(1.0).margin(1e-6));
  }

  REQUIRE_THROWS_AS(predictor::pop_score(store, cfg, {}, vocab), Error);

  SECTION("headlines are truncated to the cap before scoring") {
    Tokens long_headline(40, "alpha");
    const auto s = predictor::pop_score(store, cfg, long_headline, vocab);
    REQUIRE(s.attention[0].size() == cfg.headline_cap);
  }
}

TEST_CASE("binary cross-entropy matches its closed form", "[predictor]") {
  const auto bce = [](double logit, int label) {
    ad::Tape tape;
    return predictor::bce_loss(tape, tape.leaf(Tensor::scalar(logit)), label).val().item();
  };
  REQUIRE(bce(0.0, 1) == Catch::Approx(std::log(2.0)).margin(1e-12));
  REQUIRE(bce(0.0, 0) == Catch::Approx(std::log(2.0)).margin(1e-12));
  REQUIRE(bce(1.3, 1) == Catch::Approx(-std::log(sigmoid(1.3))).margin(1e-12));
  REQUIRE(bce(1.3, 0) == Catch::Approx(-std::log(1.0 - sigmoid(1.3))).margin(1e-12));
  REQUIRE(bce(-2.0, 1) == Catch::Approx(-std::log(sigmoid(-2.0))).margin(1e-12));
}

TEST_CASE("classification loss gradients match central differences", "[predictor][grad]") {
  const corpus::Vocabulary vocab = planted_vocab();
  predictor::PredictorConfig cfg = small_cfg(vocab);
  cfg.embed_dim = 4;
  cfg.conv_channels = 3;
  cfg.hidden = 3;
  cfg.attention_dim = 3;
  optim::ParamStore store = fresh_store(cfg, 11);
  const std::vector<int> ids =
      predictor::encode_headline_ids(vocab, {"alpha", "wow", "bravo"}, cfg.headline_cap);

  fdtest::check_gradients(store, [&](ad::Tape& tape, optim::GraphParams& p) {
    return predictor::bce_loss(tape, predictor::forward_logit(tape, p, cfg, ids).logit, 1);
  });
}

TEST_CASE("training separates planted marker headlines", "[predictor]") {
  const corpus::Vocabulary vocab = planted_vocab();
  const predictor::PredictorConfig cfg = small_cfg(vocab);
  optim::ParamStore store = fresh_store(cfg, 7);
  const PlantedSets sets = planted_sets(99);
  optim::AdamConfig adam;
  adam.lr = 1e-2;

  const auto report =
      predictor::train(store, cfg, sets.train, sets.val, vocab, 6, 8, adam, 21);
  REQUIRE(report.steps == 6 * 15);  // six epochs of 120 examples in batches of 8
  REQUIRE(std::isfinite(report.final_train_loss));
  REQUIRE(report.val_accuracy >= 0.90);

  SECTION("evaluating the same model against flipped labels mirrors accuracy") {
    std::vector<predictor::LabeledHeadline> flipped = sets.val;
    for (auto& ex : flipped) ex.label = 1 - ex.label;
    const double mirrored = predictor::accuracy(store, cfg, flipped, vocab);
    REQUIRE(mirrored == Catch::Approx(1.0 - report.val_accuracy).margin(1e-12));
  }

  SECTION("retraining on flipped labels learns the inverted concept") {
    optim::ParamStore flipped_store = fresh_store(cfg, 7);
    std::vector<predictor::LabeledHeadline> train_flipped = sets.train;
    for (auto& ex : train_flipped) ex.label = 1 - ex.label;
    std::vector<predictor::LabeledHeadline> val_flipped = sets.val;
    for (auto& ex : val_flipped) ex.label = 1 - ex.label;
    const auto inverted = predictor::train(flipped_store, cfg, train_flipped, val_flipped,
                                           vocab, 6, 8, adam, 21);
    REQUIRE(inverted.val_accuracy >= 0.90);
  }

  SECTION("marker headlines score higher on average") {
    double marker_sum = 0.0, plain_sum = 0.0;
    std::size_t marker_n = 0, plain_n = 0;
    for (const auto& ex : sets.val) {
      const double prob = predictor::pop_score(store, cfg, ex.tokens, vocab).probability;
      if (ex.label == 1) {
        marker_sum += prob;
        ++marker_n;
      } else {
        plain_sum += prob;
        ++plain_n;
      }
    }
    REQUIRE(marker_n > 0);
    REQUIRE(plain_n > 0);
    REQUIRE(marker_sum / marker_n > plain_sum / plain_n);
  }

  SECTION("attention localizes the marker token") {
    // the width-w feature at position t spans tokens [t, t+w-1] (right-padded
    // convolution), so a hit means the argmax window covers the final token
    std::size_t hits = 0, cases = 0;
    for (const auto& ex : sets.val) {
      if (ex.label != 1) continue;
      const auto s = predictor::pop_score(store, cfg, ex.tokens, vocab);
      const std::size_t marker_pos = ex.tokens.size() - 1;
      for (std::size_t wi = 0; wi < 3; ++wi) {
        const std::size_t width = layers::kConvWidths[wi];
        std::size_t best = 0;
        for (std::size_t t = 1; t < s.attention[wi].size(); ++t)
          if (s.attention[wi][t] > s.attention[wi][best]) best = t;
        ++cases;
        if (best <= marker_pos && marker_pos <= best + width - 1) ++hits;
      }
    }
    REQUIRE(cases > 0);
    REQUIRE(static_cast<double>(hits) / static_cast<double>(cases) >= 0.70);
  }

  SECTION("the heatmap export is complete and normalized") {
    std::vector<Tokens> headlines;
    for (std::size_t i = 0; i < 5; ++i) headlines.push_back(sets.val[i].tokens);
    const std::string csv = predictor::attention_heatmap_csv(store, cfg, headlines, vocab);

    std::istringstream in(csv);
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "headline_idx,kernel_width,position,weight");

    std::size_t rows = 0;
    std::map<std::pair<std::size_t, std::size_t>, double> sums;
    while (std::getline(in, line)) {
      std::size_t h = 0, w = 0, t = 0;
      double weight = 0.0;
      REQUIRE(std::sscanf(line.c_str(), "%zu,%zu,%zu,%lf", &h, &w, &t, &weight) == 4);
      sums[{h, w}] += weight;
      ++rows;
    }
    std::size_t expected = 0;
    for (const auto& hl : headlines) expected += 3 * hl.size();
    REQUIRE(rows == expected);
    REQUIRE(sums.size() == headlines.size() * 3);
    for (const auto& [key, total] : sums)
      REQUIRE(total == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("zero training epochs leave parameters untouched", "[predictor]") {
  const corpus::Vocabulary vocab = planted_vocab();
  const predictor::PredictorConfig cfg = small_cfg(vocab);
  optim::ParamStore store = fresh_store(cfg, 31);
  const PlantedSets sets = planted_sets(1);

  std::map<std::string, std::vector<double>> before;
  for (const auto& name : store.names()) before[name] = store.entry(name).value.data;

  const auto report = predictor::train(store, cfg, sets.train, sets.val, vocab, 0, 8,
                                       optim::AdamConfig{}, 2);
  REQUIRE(report.steps == 0);
  for (const auto& name : store.names()) REQUIRE(store.entry(name).value.data == before[name]);
}

TEST_CASE("degenerate training inputs are rejected", "[predictor]") {
  const corpus::Vocabulary vocab = planted_vocab();
  const predictor::PredictorConfig cfg = small_cfg(vocab);
  optim::ParamStore store = fresh_store(cfg, 33);

  std::vector<predictor::LabeledHeadline> one_class = {{{"alpha", "wow"}, 1},
                                                       {{"bravo", "wow"}, 1}};
  REQUIRE_THROWS_AS(
      predictor::train(store, cfg, one_class, {}, vocab, 1, 4, optim::AdamConfig{}, 2), Error);
  REQUIRE_THROWS_AS(predictor::train(store, cfg, {}, {}, vocab, 1, 4, optim::AdamConfig{}, 2),
                    Error);
  std::vector<predictor::LabeledHeadline> two_class = {{{"alpha"}, 1}, {{"bravo"}, 0}};
  REQUIRE_THROWS_AS(
      predictor::train(store, cfg, two_class, {}, vocab, 1, 0, optim::AdamConfig{}, 2), Error);
  REQUIRE_THROWS_AS(predictor::accuracy(store, cfg, {}, vocab), Error);
}
