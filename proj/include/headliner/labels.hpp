#pragma once

// Extractor proxy labels: the faithfulness target y (sentence with the best
// ROUGE-L recall against the headline) and the popularity target y' (sentence
// whose topic distribution overlaps the retrieved popular headline most).

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "headliner/common.hpp"
#include "headliner/corpus.hpp"
#include "headliner/metrics.hpp"
#include "headliner/topics.hpp"

namespace headliner::labels {

struct ProxyLabels {
  std::string doc_id;
  std::size_t y = 0;        // faithfulness: argmax rouge_recalls
  std::size_t y_prime = 0;  // popularity: argmax topic_scores
  std::vector<double> rouge_recalls;  // per sentence
  std::vector<double> topic_scores;   // per sentence, standardized
};

namespace detail {

inline std::size_t argmax_earliest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace detail

// Sentence maximizing ROUGE-L recall against the headline; earliest tie wins.
inline std::pair<std::size_t, std::vector<double>> faithfulness_label(
    const corpus::Document& doc) {
  if (doc.sentences.empty()) fail("faithfulness_label: \"%s\" has no sentences", doc.id.c_str());
  if (doc.headline.empty()) fail("faithfulness_label: \"%s\" has no headline", doc.id.c_str());
  std::vector<double> recalls;
  recalls.reserve(doc.sentences.size());
  for (const auto& sent : doc.sentences)
    recalls.push_back(metrics::rouge_l(sent, doc.headline).recall);
  return {detail::argmax_earliest(recalls), std::move(recalls)};
}

// Per-sentence popularity score: the summed element-wise product of the
// sentence topic vector with the retrieved reference, standardized to zero
// mean and unit standard deviation (all-zero when the scores are constant).
// Standardization is affine, so the argmax is that of the raw sums.
inline std::pair<std::size_t, std::vector<double>> popularity_label(
    const std::vector<topics::TopicVec>& sentence_vecs, const topics::TopicVec& reference) {
  if (sentence_vecs.empty()) fail("popularity_label: no sentences");
  std::vector<double> raw;
  raw.reserve(sentence_vecs.size());
  for (const auto& vec : sentence_vecs) {
    const auto info = topics::popularity_info(vec, reference);
    double s = 0.0;
    for (double v : info) s += v;
    raw.push_back(s);
  }
  const std::size_t idx = detail::argmax_earliest(raw);

  double mean = 0.0;
  for (double v : raw) mean += v;
  mean /= static_cast<double>(raw.size());
  double var = 0.0;
  for (double v : raw) var += (v - mean) * (v - mean);
  var /= static_cast<double>(raw.size());
  const double sd = std::sqrt(var);
  std::vector<double> scores(raw.size(), 0.0);
  if (sd > 0.0)
    for (std::size_t i = 0; i < raw.size(); ++i) scores[i] = (raw[i] - mean) / sd;
  return {idx, std::move(scores)};
}

inline ProxyLabels build_proxy_labels(const corpus::Document& doc,
                                      const topics::DocTopics& topics_for_doc) {
  if (doc.id != topics_for_doc.id)
    fail("build_proxy_labels: document \"%s\" paired with topics for \"%s\"",
         doc.id.c_str(), topics_for_doc.id.c_str());
  if (topics_for_doc.sentence_vecs.size() != doc.sentences.size())
    fail("build_proxy_labels: \"%s\" has %zu sentences but %zu topic vectors",
         doc.id.c_str(), doc.sentences.size(), topics_for_doc.sentence_vecs.size());
  ProxyLabels out;
  out.doc_id = doc.id;
  auto [y, recalls] = faithfulness_label(doc);
  auto [yp, scores] = popularity_label(topics_for_doc.sentence_vecs,
                                       topics_for_doc.reference_vec);
  out.y = y;
  out.y_prime = yp;
  out.rouge_recalls = std::move(recalls);
  out.topic_scores = std::move(scores);
  return out;
}

// ---- cache file: one JSON record per document ----

inline void save_labels(const std::vector<ProxyLabels>& labels, const std::string& path) {
  std::string out;
  for (const auto& l : labels) {
    nlohmann::json rec;
    rec["id"] = l.doc_id;
    rec["y"] = l.y;
    rec["y_prime"] = l.y_prime;
    rec["rouge_recall"] = l.rouge_recalls;
    rec["topic_score"] = l.topic_scores;
    out += rec.dump();
    out += '\n';
  }
  write_file(path, out);
}

inline std::vector<ProxyLabels> load_labels(const std::string& path) {
  std::vector<ProxyLabels> out;
  int line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("%s line %d: invalid record: %s", path.c_str(), line_no, e.what());
    }
    for (const char* field : {"id", "y", "y_prime", "rouge_recall", "topic_score"})
      if (!rec.contains(field))
        fail("%s line %d: missing field \"%s\"", path.c_str(), line_no, field);
    ProxyLabels l;
    l.doc_id = rec["id"].get<std::string>();
    l.y = rec["y"].get<std::size_t>();
    l.y_prime = rec["y_prime"].get<std::size_t>();
    l.rouge_recalls = rec["rouge_recall"].get<std::vector<double>>();
    l.topic_scores = rec["topic_score"].get<std::vector<double>>();
    if (l.y >= l.rouge_recalls.size() || l.y_prime >= l.topic_scores.size())
      fail("%s line %d: label index out of range", path.c_str(), line_no);
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace headliner::labels
