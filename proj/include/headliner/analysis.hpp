#pragma once
// Corpus- and system-level reports: the eleven headline hypotheses, the
// Mann-Whitney significance table, the attractiveness rate, and the
// ROUGE/copy-rate evaluation table.

#include <algorithm>
#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "headliner/common.hpp"
#include "headliner/corpus.hpp"
#include "headliner/metrics.hpp"
#include "headliner/predictor.hpp"

namespace headliner::analysis {

// ---- lexicons ---------------------------------------------------------------

// word lists behind the signal/pronoun/sentiment/negative features; the lists
// ship as plain-text resources and are approximations by construction
struct Lexicons {
  std::set<std::string> signal_words;
  std::set<std::string> pronouns;
  std::set<std::string> sentiment_words;
  std::set<std::string> negative_words;
};

inline std::set<std::string> load_word_set(const std::string& path) {
  std::set<std::string> words;
  for (const std::string& line : split_lines(read_file(path))) {
    const std::string w = trim(line);
    if (w.empty() || w[0] == '#') continue;
    words.insert(w);
  }
  if (words.empty()) fail("lexicon \"%s\" is empty", path.c_str());
  return words;
}

// loads the four fixed-name lexicon files from a directory
inline Lexicons load_lexicons(const std::string& dir) {
  Lexicons lex;
  lex.signal_words = load_word_set(dir + "/signal_words.txt");
  lex.pronouns = load_word_set(dir + "/pronouns.txt");
  lex.sentiment_words = load_word_set(dir + "/sentiment_words.txt");
  lex.negative_words = load_word_set(dir + "/negative_words.txt");
  return lex;
}

// ---- headline features --------------------------------------------------------

struct HeadlineFeatures {
  int h1_char_length = 0;            // characters incl. single inter-token spaces
  double h2_avg_token_chars = 0.0;   // mean token length in characters
  bool h3_has_question = false;      // a "?" occurs
  bool h4_partial_quote = false;     // quoted span shorter than the headline
  bool h5_full_quote = false;        // the entire headline is quoted
  bool h6_signal_word = false;       // any token in the signal lexicon
  bool h7_pronoun = false;           // any token in the pronoun lexicon
  bool h8_sentiment_word = false;    // any token in the sentiment lexicon
  bool h9_negative_word = false;     // any token in the negative lexicon
  bool h10_has_number = false;       // any token parses as a number
  bool h11_starts_with_pronoun = false;
};

constexpr std::size_t kHypotheses = 11;

namespace detail {

inline bool is_quote_char(char c) { return c == '"'; }

// digits; or digits with one decimal point; or comma-grouped digits
inline bool is_number_token(const std::string& t) {
  if (t.empty()) return false;
  const bool all_digits = std::all_of(t.begin(), t.end(), [](unsigned char c) {
    return c >= '0' && c <= '9';
  });
  if (all_digits) return true;

  const std::size_t dot = t.find('.');
  if (dot != std::string::npos) {
    if (t.find('.', dot + 1) != std::string::npos) return false;
    if (dot == 0 || dot + 1 == t.size()) return false;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (i != dot && !(t[i] >= '0' && t[i] <= '9')) return false;
    return true;
  }

  // comma-grouped: 1-3 leading digits, then groups of exactly three
  if (t.find(',') == std::string::npos) return false;
  std::size_t i = 0;
  while (i < t.size() && t[i] >= '0' && t[i] <= '9') ++i;
  if (i == 0 || i > 3) return false;
  while (i < t.size()) {
    if (t[i] != ',') return false;
    ++i;
    for (int d = 0; d < 3; ++d, ++i)
      if (i >= t.size() || !(t[i] >= '0' && t[i] <= '9')) return false;
  }
  return true;
}

inline bool contains_any(const corpus::Tokens& tokens, const std::set<std::string>& words) {
  for (const auto& t : tokens)
    if (words.count(t)) return true;
  return false;
}

}  // namespace detail

// deterministic feature vector for one headline; quote features pair up quote
// characters over the space-joined string
inline HeadlineFeatures headline_features(const corpus::Tokens& headline, const Lexicons& lex) {
  if (headline.empty()) fail("headline_features: empty headline");
  HeadlineFeatures f;

  std::string joined;
  std::size_t total_chars = 0;
  for (std::size_t i = 0; i < headline.size(); ++i) {
    if (i) joined += ' ';
    joined += headline[i];
    total_chars += headline[i].size();
  }
  f.h1_char_length = static_cast<int>(joined.size());
  f.h2_avg_token_chars = static_cast<double>(total_chars) / static_cast<double>(headline.size());
  f.h3_has_question = joined.find('?') != std::string::npos;

  std::vector<std::size_t> quote_pos;
  for (std::size_t i = 0; i < joined.size(); ++i)
    if (detail::is_quote_char(joined[i])) quote_pos.push_back(i);
  for (std::size_t q = 0; q + 1 < quote_pos.size(); q += 2) {
    const bool spans_all = quote_pos[q] == 0 && quote_pos[q + 1] == joined.size() - 1;
    if (spans_all)
      f.h5_full_quote = true;
    else
      f.h4_partial_quote = true;
  }

  f.h6_signal_word = detail::contains_any(headline, lex.signal_words);
  f.h7_pronoun = detail::contains_any(headline, lex.pronouns);
  f.h8_sentiment_word = detail::contains_any(headline, lex.sentiment_words);
  f.h9_negative_word = detail::contains_any(headline, lex.negative_words);
  for (const auto& t : headline)
    if (detail::is_number_token(t)) {
      f.h10_has_number = true;
      break;
    }
  f.h11_starts_with_pronoun = lex.pronouns.count(headline.front()) > 0;
  return f;
}

// numeric view of one hypothesis (booleans as 0/1)
inline double feature_value(const HeadlineFeatures& f, std::size_t hypothesis) {
  switch (hypothesis) {
    case 0: return static_cast<double>(f.h1_char_length);
    case 1: return f.h2_avg_token_chars;
    case 2: return f.h3_has_question ? 1.0 : 0.0;
    case 3: return f.h4_partial_quote ? 1.0 : 0.0;
    case 4: return f.h5_full_quote ? 1.0 : 0.0;
    case 5: return f.h6_signal_word ? 1.0 : 0.0;
    case 6: return f.h7_pronoun ? 1.0 : 0.0;
    case 7: return f.h8_sentiment_word ? 1.0 : 0.0;
    case 8: return f.h9_negative_word ? 1.0 : 0.0;
    case 9: return f.h10_has_number ? 1.0 : 0.0;
    case 10: return f.h11_starts_with_pronoun ? 1.0 : 0.0;
    default: fail("feature_value: hypothesis index %zu out of range", hypothesis);
  }
}

inline const char* hypothesis_name(std::size_t hypothesis) {
  static const std::array<const char*, kHypotheses> names = {
      "H1", "H2", "H3", "H4", "H5", "H6", "H7", "H8", "H9", "H10", "H11"};
  if (hypothesis >= kHypotheses) fail("hypothesis index %zu out of range", hypothesis);
  return names[hypothesis];
}

inline const char* hypothesis_description(std::size_t hypothesis) {
  static const std::array<const char*, kHypotheses> text = {
      "character length with spaces", "mean token character length", "contains a question mark",
      "contains a partial quote",     "entirely quoted",             "contains a signal word",
      "contains a pronoun",           "contains a sentiment word",   "contains a negative word",
      "contains a number",            "starts with a pronoun"};
  if (hypothesis >= kHypotheses) fail("hypothesis index %zu out of range", hypothesis);
  return text[hypothesis];
}

// ---- significance -------------------------------------------------------------

struct SignificanceRow {
  std::string hypothesis;
  std::string description;
  double p_value = 1.0;
  bool significant = false;  // p <= 0.05
  double median_a = 0.0;
  double median_b = 0.0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// two-sided Mann-Whitney U per hypothesis (group a vs group b); a feature
// constant across both groups is degenerate and recorded with p = 1
inline std::vector<SignificanceRow> significance_report(
    const std::vector<HeadlineFeatures>& group_a, const std::vector<HeadlineFeatures>& group_b) {
  if (group_a.empty() || group_b.empty()) fail("significance: empty group");
  std::vector<SignificanceRow> rows;
  rows.reserve(kHypotheses);
  for (std::size_t h = 0; h < kHypotheses; ++h) {
    std::vector<double> va, vb;
    va.reserve(group_a.size());
    vb.reserve(group_b.size());
    for (const auto& f : group_a) va.push_back(feature_value(f, h));
    for (const auto& f : group_b) vb.push_back(feature_value(f, h));

    SignificanceRow row;
    row.hypothesis = hypothesis_name(h);
    row.description = hypothesis_description(h);
    row.median_a = detail::median_of(va);
    row.median_b = detail::median_of(vb);

    bool constant = true;
    for (double x : va)
      if (x != va.front()) constant = false;
    for (double x : vb)
      if (x != va.front()) constant = false;
    if (constant) {
      row.p_value = 1.0;
    } else {
      row.p_value = metrics::mann_whitney_u(va, vb).p_value;
    }
    row.significant = row.p_value <= 0.05;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string significance_csv(const std::vector<SignificanceRow>& rows) {
  std::string out = "hypothesis,description,p_value,significant,median_group_a,median_group_b\n";
  for (const auto& r : rows)
    out += strfmt("%s,%s,%.12g,%d,%.12g,%.12g\n", r.hypothesis.c_str(), r.description.c_str(),
                  r.p_value, r.significant ? 1 : 0, r.median_a, r.median_b);
  return out;
}

// ---- attractiveness rate ---------------------------------------------------------

// percentage of headlines the predictor scores above 0.5
inline double attractiveness_rate(optim::ParamStore& store, const predictor::PredictorConfig& cfg,
                                  const std::vector<corpus::Tokens>& headlines,
                                  const corpus::Vocabulary& vocab) {
  if (headlines.empty()) fail("attractiveness_rate: empty headline list");
  std::size_t attractive = 0;
  for (const auto& h : headlines)
    if (predictor::pop_score(store, cfg, h, vocab).probability > 0.5) ++attractive;
  return 100.0 * static_cast<double>(attractive) / static_cast<double>(headlines.size());
}

// ---- evaluation table --------------------------------------------------------------

struct SystemOutput {
  std::string id;
  corpus::Tokens tokens;
};

struct EvalRow {
  std::string method;
  double rouge1_f1 = 0.0;  // all four reported as percentages
  double rouge2_f1 = 0.0;
  double rougel_f1 = 0.0;
  double copy_rate = 0.0;
  std::size_t documents = 0;
};

// mean ROUGE F1 (x100) and copy rate (x100) for one method's outputs against
// references and sources aligned by document id
inline EvalRow evaluation_row(const std::string& method, const std::vector<SystemOutput>& outputs,
                              const std::unordered_map<std::string, corpus::Tokens>& references,
                              const std::unordered_map<std::string, corpus::Tokens>& sources) {
  if (outputs.empty()) fail("evaluation: no outputs for method \"%s\"", method.c_str());
  std::string missing;
  for (const auto& o : outputs) {
    if (references.count(o.id) && sources.count(o.id)) continue;
    if (!missing.empty()) missing += ", ";
    missing += o.id;
  }
  if (!missing.empty())
    fail("evaluation: method \"%s\" has outputs for unknown documents: %s", method.c_str(),
         missing.c_str());

  EvalRow row;
  row.method = method;
  row.documents = outputs.size();
  for (const auto& o : outputs) {
    const corpus::Tokens& ref = references.at(o.id);
    const corpus::Tokens& src = sources.at(o.id);
    if (!o.tokens.empty()) {
      row.rouge1_f1 += metrics::rouge_n(o.tokens, ref, 1).f1;
      row.rouge2_f1 += metrics::rouge_n(o.tokens, ref, 2).f1;
      row.rougel_f1 += metrics::rouge_l(o.tokens, ref).f1;
      row.copy_rate += metrics::copy_rate(o.tokens, src);
    }
  }
  const double n = static_cast<double>(outputs.size());
  row.rouge1_f1 *= 100.0 / n;
  row.rouge2_f1 *= 100.0 / n;
  row.rougel_f1 *= 100.0 / n;
  row.copy_rate *= 100.0 / n;
  return row;
}

inline std::string evaluation_csv(const std::vector<EvalRow>& rows) {
  std::string out = "method,rouge1_f1,rouge2_f1,rougel_f1,copy_rate,documents\n";
  for (const auto& r : rows)
    out += strfmt("%s,%.12g,%.12g,%.12g,%.12g,%zu\n", r.method.c_str(), r.rouge1_f1, r.rouge2_f1,
                  r.rougel_f1, r.copy_rate, r.documents);
  return out;
}

}  // namespace headliner::analysis
