#pragma once

// Corpus handling: document ingest/serialization, vocabulary construction,
// median-split popularity labels, and a deterministic synthetic corpus
// generator for desk-scale experiments.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "headliner/common.hpp"

namespace headliner::corpus {

using Tokens = std::vector<std::string>;

// corpus-wide truncation caps, in tokens
constexpr std::size_t kHeadlineTokenCap = 30;
constexpr std::size_t kSentenceTokenCap = 30;
constexpr std::size_t kArticleTokenCap = 100;

enum class Split { train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  fail("invalid split value: \"%s\"", s.c_str());
}

struct Document {
  std::string id;
  std::vector<Tokens> sentences;
  Tokens headline;
  std::optional<long long> comments;
  Split split = Split::train;

  bool operator==(const Document& o) const {
    return id == o.id && sentences == o.sentences && headline == o.headline &&
           comments == o.comments && split == o.split;
  }

  Tokens all_tokens() const {
    Tokens out;
    for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
  }
};

// ---------------------------------------------------------------------------
// Ingest / serialize. One JSON record per line:
//   {"id": str, "sentences": [[str]], "headline": [str],
//    "comments": int|null, "split": "train"|"val"|"test"}
// Tokens are lowercased on load; the corpus format is pre-tokenized.
// ---------------------------------------------------------------------------

namespace detail {

inline Tokens parse_token_array(const nlohmann::json& arr, int line_no, const char* field) {
  if (!arr.is_array())
    fail("line %d: field \"%s\": expected an array of strings", line_no, field);
  Tokens out;
  out.reserve(arr.size());
  for (const auto& t : arr) {
    if (!t.is_string())
      fail("line %d: field \"%s\": expected string tokens", line_no, field);
    std::string tok = lowercase(t.get<std::string>());
    if (tok.empty()) fail("line %d: field \"%s\": empty token", line_no, field);
    out.push_back(std::move(tok));
  }
  return out;
}

}  // namespace detail

inline Document parse_document(const nlohmann::json& rec, int line_no) {
  if (!rec.is_object()) fail("line %d: record is not an object", line_no);
  for (const char* field : {"id", "sentences", "headline", "comments", "split"})
    if (!rec.contains(field)) fail("line %d: missing field \"%s\"", line_no, field);

  Document doc;
  if (!rec["id"].is_string()) fail("line %d: field \"id\": expected string", line_no);
  doc.id = rec["id"].get<std::string>();
  if (doc.id.empty()) fail("line %d: field \"id\": empty", line_no);

  if (!rec["sentences"].is_array() || rec["sentences"].empty())
    fail("line %d: field \"sentences\": expected non-empty array", line_no);
  for (const auto& sent : rec["sentences"]) {
    Tokens toks = detail::parse_token_array(sent, line_no, "sentences");
    if (toks.empty()) fail("line %d: field \"sentences\": empty sentence", line_no);
    doc.sentences.push_back(std::move(toks));
  }

  doc.headline = detail::parse_token_array(rec["headline"], line_no, "headline");
  if (doc.headline.empty()) fail("line %d: field \"headline\": empty", line_no);

  if (rec["comments"].is_null()) {
    doc.comments = std::nullopt;
  } else if (rec["comments"].is_number_integer()) {
    long long c = rec["comments"].get<long long>();
    if (c < 0) fail("line %d: field \"comments\": negative comment count", line_no);
    doc.comments = c;
  } else {
    fail("line %d: field \"comments\": expected integer or null", line_no);
  }

  if (!rec["split"].is_string()) fail("line %d: field \"split\": expected string", line_no);
  const std::string sp = rec["split"].get<std::string>();
  if (sp != "train" && sp != "val" && sp != "test")
    fail("line %d: field \"split\": invalid value \"%s\"", line_no, sp.c_str());
  doc.split = split_from_name(sp);
  return doc;
}

inline std::vector<Document> ingest(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<Document> docs;
  docs.reserve(lines.size());
  int line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("line %d: invalid record: %s", line_no, e.what());
    }
    docs.push_back(parse_document(rec, line_no));
  }
  return docs;
}

inline nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json rec;
  rec["id"] = doc.id;
  rec["sentences"] = doc.sentences;
  rec["headline"] = doc.headline;
  if (doc.comments)
    rec["comments"] = *doc.comments;
  else
    rec["comments"] = nullptr;
  rec["split"] = split_name(doc.split);
  return rec;
}

inline std::string to_jsonl(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& doc : docs) {
    out += document_to_json(doc).dump();
    out += '\n';
  }
  return out;
}

inline void serialize(const std::vector<Document>& docs, const std::string& path) {
  write_file(path, to_jsonl(docs));
}

// ---------------------------------------------------------------------------
// Vocabulary. Reserved ids 0-3 are PAD/UNK/BOS/EOS; kept tokens follow.
// ---------------------------------------------------------------------------

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  Vocabulary() : id_to_token_{"<pad>", "<unk>", "<bos>", "<eos>"} {
    for (int id = 0; id < kReserved; ++id)
      token_to_id_.emplace(id_to_token_[static_cast<std::size_t>(id)], id);
  }

  int add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    const int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    return id;
  }

  // id of the token, or UNK when absent
  int lookup(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

  const std::string& token(int id) const {
    if (id < 0 || id >= static_cast<int>(id_to_token_.size()))
      fail("vocabulary: id %d out of range", id);
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  // total size including the 4 reserved ids
  std::size_t size() const { return id_to_token_.size(); }

  std::vector<int> encode(const Tokens& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(lookup(t));
    return ids;
  }

  void save(const std::string& path) const {
    std::string out;
    for (std::size_t i = kReserved; i < id_to_token_.size(); ++i) {
      out += id_to_token_[i];
      out += '\n';
    }
    write_file(path, out);
  }

  static Vocabulary load(const std::string& path) {
    Vocabulary v;
    for (const auto& line : read_lines(path)) {
      if (line.empty()) continue;
      v.add(line);
    }
    return v;
  }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Keeps the `cap` most frequent tokens over sentences and headlines of
// train-split documents. Frequency ties break lexicographically.
inline Vocabulary build_vocabulary(const std::vector<Document>& docs, std::size_t cap) {
  if (docs.empty()) fail("build_vocabulary: no documents");
  if (cap < 1) fail("build_vocabulary: cap must be >= 1");
  std::map<std::string, long long> counts;
  bool any_train = false;
  for (const auto& doc : docs) {
    if (doc.split != Split::train) continue;
    any_train = true;
    for (const auto& sent : doc.sentences)
      for (const auto& tok : sent) ++counts[tok];
    for (const auto& tok : doc.headline) ++counts[tok];
  }
  if (!any_train) fail("build_vocabulary: no train-split documents");

  std::vector<std::pair<std::string, long long>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  for (std::size_t i = 0; i < items.size() && i < cap; ++i) vocab.add(items[i].first);
  return vocab;
}

// ---------------------------------------------------------------------------
// Median-split popularity labels
// ---------------------------------------------------------------------------

struct PopularityLabel {
  std::string doc_id;
  int label = 0;  // 1 iff comments >= train median
};

// Median of train-split comment counts; midpoint of the two central order
// statistics for even counts.
inline double train_comment_median(const std::vector<Document>& docs) {
  std::vector<long long> counts;
  for (const auto& doc : docs)
    if (doc.split == Split::train && doc.comments) counts.push_back(*doc.comments);
  if (counts.empty()) fail("median_split_labels: no train-split comment counts available");
  std::sort(counts.begin(), counts.end());
  const std::size_t n = counts.size();
  if (n % 2 == 1) return static_cast<double>(counts[n / 2]);
  return 0.5 * (static_cast<double>(counts[n / 2 - 1]) + static_cast<double>(counts[n / 2]));
}

// Labels every document that has a comment count, against the train median.
inline std::vector<PopularityLabel> median_split_labels(const std::vector<Document>& docs) {
  const double median = train_comment_median(docs);
  std::vector<PopularityLabel> labels;
  for (const auto& doc : docs) {
    if (!doc.comments) continue;
    labels.push_back({doc.id, static_cast<double>(*doc.comments) < median ? 0 : 1});
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Synthetic corpus generator. Each document has exactly one salient sentence
// sharing most of the headline's tokens. Headlines of "popular" documents
// carry a marker token and draw comment counts from a high regime, so the
// median split recovers marker presence. With conflict_frac > 0, a slice of
// the popular documents hides the marker in a decoy sentence instead of the
// salient one, putting faithfulness and popularity in tension.
// ---------------------------------------------------------------------------

struct SynthConfig {
  int n_docs = 2500;
  int n_sentences = 5;
  int sentence_len = 8;
  int n_topic_pools = 4;
  int pool_words = 30;
  int filler_words = 40;
  std::vector<std::string> markers = {"wow", "stunning", "shocking", "unbelievable"};
  double headline_keep = 0.7;   // fraction of salient tokens kept in the headline
  double conflict_frac = 0.0;   // fraction of popular docs with the marker in a decoy
  long long low_comments_max = 100;
  long long high_comments_min = 500;
  long long high_comments_max = 1000;
};

inline void validate(const SynthConfig& cfg) {
  if (cfg.n_docs < 1) fail("synthetic corpus: n_docs must be >= 1");
  if (cfg.n_sentences < 1) fail("synthetic corpus: n_sentences must be >= 1");
  if (cfg.sentence_len < 3) fail("synthetic corpus: sentence_len must be >= 3");
  if (cfg.n_topic_pools < 2) fail("synthetic corpus: n_topic_pools must be >= 2");
  if (cfg.pool_words < cfg.sentence_len)
    fail("synthetic corpus: pool_words must be >= sentence_len");
  if (cfg.filler_words < cfg.sentence_len)
    fail("synthetic corpus: filler_words must be >= sentence_len");
  if (cfg.markers.empty()) fail("synthetic corpus: marker set is empty");
  if (cfg.headline_keep <= 0.0 || cfg.headline_keep > 1.0)
    fail("synthetic corpus: headline_keep must be in (0,1]");
  if (cfg.conflict_frac < 0.0 || cfg.conflict_frac > 1.0)
    fail("synthetic corpus: conflict_frac must be in [0,1]");
  if (cfg.conflict_frac > 0.0 && cfg.n_sentences < 2)
    fail("synthetic corpus: conflicts need at least 2 sentences");
  if (cfg.high_comments_min <= cfg.low_comments_max)
    fail("synthetic corpus: comment regimes must be separated");
  if (cfg.high_comments_max < cfg.high_comments_min)
    fail("synthetic corpus: bad high comment regime");
}

inline std::vector<Document> generate_synthetic_corpus(std::uint64_t seed,
                                                       const SynthConfig& cfg) {
  validate(cfg);
  Rng rng = Rng(seed).substream("corpus");

  std::vector<std::vector<std::string>> pools(static_cast<std::size_t>(cfg.n_topic_pools));
  for (int p = 0; p < cfg.n_topic_pools; ++p)
    for (int w = 0; w < cfg.pool_words; ++w)
      pools[static_cast<std::size_t>(p)].push_back(strfmt("t%dw%d", p, w));
  std::vector<std::string> fillers;
  for (int w = 0; w < cfg.filler_words; ++w) fillers.push_back(strfmt("f%d", w));

  auto sample_distinct = [&rng](const std::vector<std::string>& from, int n) {
    std::vector<std::size_t> idx(from.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    Tokens out;
    for (int i = 0; i < n; ++i) out.push_back(from[idx[static_cast<std::size_t>(i)]]);
    return out;
  };

  std::vector<Document> docs;
  docs.reserve(static_cast<std::size_t>(cfg.n_docs));
  for (int i = 0; i < cfg.n_docs; ++i) {
    Document doc;
    doc.id = strfmt("synth-%06d", i);
    doc.split = (i % 10 == 8) ? Split::val : (i % 10 == 9) ? Split::test : Split::train;

    const bool popular = (i % 2 == 0);
    const bool conflict =
        popular && cfg.n_sentences >= 2 && rng.uniform01() < cfg.conflict_frac;
    const std::size_t pool = rng.uniform_index(pools.size());
    const std::string marker = cfg.markers[rng.uniform_index(cfg.markers.size())];

    const int L = cfg.sentence_len;
    Tokens salient_core = sample_distinct(pools[pool], L);
    const int keep = std::max(2, static_cast<int>(std::lround(cfg.headline_keep * L)));

    doc.headline.assign(salient_core.begin(), salient_core.begin() + std::min(keep, L));
    if (popular) doc.headline.push_back(marker);

    Tokens salient = salient_core;
    if (popular && !conflict) salient.push_back(marker);

    const std::size_t n_sent = static_cast<std::size_t>(cfg.n_sentences);
    const std::size_t salient_idx = rng.uniform_index(n_sent);
    std::size_t decoy_idx = salient_idx;
    if (conflict) {
      decoy_idx = rng.uniform_index(n_sent - 1);
      if (decoy_idx >= salient_idx) ++decoy_idx;
    }

    doc.sentences.resize(n_sent);
    for (std::size_t k = 0; k < n_sent; ++k) {
      if (k == salient_idx) {
        doc.sentences[k] = salient;
        continue;
      }
      if (conflict && k == decoy_idx) {
        // shares under 60% of the headline so the salient sentence stays the
        // unique faithfulness target, but carries the popularity markers
        Tokens decoy;
        const int shared =
            std::max(1, static_cast<int>(std::lround(0.4 * keep)) - 1);
        for (int s = 0; s < shared && s < keep; ++s) decoy.push_back(salient_core[static_cast<std::size_t>(s)]);
        decoy.push_back(marker);
        decoy.push_back(cfg.markers[rng.uniform_index(cfg.markers.size())]);
        Tokens pad = sample_distinct(fillers, std::max(0, L - static_cast<int>(decoy.size())));
        decoy.insert(decoy.end(), pad.begin(), pad.end());
        rng.shuffle(decoy);
        doc.sentences[k] = decoy;
        continue;
      }
      // background sentence: fillers plus words from a different pool
      std::size_t other = rng.uniform_index(pools.size() - 1);
      if (other >= pool) ++other;
      Tokens half_a = sample_distinct(fillers, L / 2);
      Tokens half_b = sample_distinct(pools[other], L - L / 2);
      Tokens sent = half_a;
      sent.insert(sent.end(), half_b.begin(), half_b.end());
      rng.shuffle(sent);
      doc.sentences[k] = sent;
    }

    doc.comments = popular ? rng.uniform_int(cfg.high_comments_min, cfg.high_comments_max)
                           : rng.uniform_int(0, cfg.low_comments_max);
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace headliner::corpus
