#pragma once

// Text metrics: LCS, ROUGE-1/2/L, copy rate, and the Mann-Whitney U test.
// All functions are pure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "headliner/common.hpp"

namespace headliner::metrics {

using Tokens = std::vector<std::string>;

struct RougeScore {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

inline double f1_of(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

// Longest common subsequence length, classic O(|a|*|b|) DP with a rolling row.
inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline RougeScore rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (reference.empty()) fail("rouge_l: empty reference");
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  RougeScore s;
  s.recall = lcs / static_cast<double>(reference.size());
  s.precision = candidate.empty() ? 0.0 : lcs / static_cast<double>(candidate.size());
  s.f1 = f1_of(s.precision, s.recall);
  return s;
}

namespace detail {

inline std::unordered_map<std::string, int> ngram_counts(const Tokens& tokens, int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      if (j) key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

// Clipped n-gram overlap, n in {1, 2}.
inline RougeScore rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
  if (n < 1 || n > 2) fail("rouge_n: n must be 1 or 2 (got %d)", n);
  if (static_cast<int>(reference.size()) < n)
    fail("rouge_n: reference has %zu tokens, need at least %d", reference.size(), n);
  const auto ref_counts = detail::ngram_counts(reference, n);
  const auto cand_counts = detail::ngram_counts(candidate, n);
  long long overlap = 0, cand_total = 0, ref_total = 0;
  for (const auto& [gram, c] : cand_counts) {
    cand_total += c;
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) overlap += std::min(c, it->second);
  }
  for (const auto& [gram, c] : ref_counts) ref_total += c;
  RougeScore s;
  s.recall = static_cast<double>(overlap) / static_cast<double>(ref_total);
  s.precision =
      cand_total > 0 ? static_cast<double>(overlap) / static_cast<double>(cand_total) : 0.0;
  s.f1 = f1_of(s.precision, s.recall);
  return s;
}

// Fraction of generated tokens that appear anywhere in the source.
inline double copy_rate(const Tokens& generated, const Tokens& source) {
  if (generated.empty()) fail("copy_rate: empty generated sequence");
  std::unordered_set<std::string> src(source.begin(), source.end());
  std::size_t hits = 0;
  for (const auto& t : generated)
    if (src.count(t)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(generated.size());
}

// ---------------------------------------------------------------------------
// Mann-Whitney U
// ---------------------------------------------------------------------------

enum class UMethod { exact, normal_approx };
enum class UMode { exact, normal, auto_select };

struct UTestResult {
  double u_statistic = 0.0;  // U of the first group
  double p_value = 1.0;
  UMethod method = UMethod::normal_approx;
};

namespace detail {

struct RankedPool {
  std::vector<double> ranks;  // midranks, in pooled-sorted order
  std::vector<int> group;     // 0 = group a, 1 = group b, same order
  double tie_sum = 0.0;       // sum of t^3 - t over tie groups
  double rank_sum_a = 0.0;
};

inline RankedPool rank_pool(const std::vector<double>& a, const std::vector<double>& b) {
  struct Tagged {
    double v;
    int g;
  };
  std::vector<Tagged> pool;
  pool.reserve(a.size() + b.size());
  for (double v : a) pool.push_back({v, 0});
  for (double v : b) pool.push_back({v, 1});
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Tagged& x, const Tagged& y) { return x.v < y.v; });

  RankedPool out;
  out.ranks.resize(pool.size());
  out.group.resize(pool.size());
  std::size_t i = 0;
  while (i < pool.size()) {
    std::size_t j = i;
    while (j < pool.size() && pool[j].v == pool[i].v) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    const double t = static_cast<double>(j - i);
    if (t > 1.0) out.tie_sum += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      out.ranks[k] = midrank;
      out.group[k] = pool[k].g;
      if (pool[k].g == 0) out.rank_sum_a += midrank;
    }
    i = j;
  }
  return out;
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Exact two-sided p by enumerating every assignment of n1 pooled ranks to the
// first group. Conditional on the observed values, so ties are handled by the
// shared midranks.
inline double exact_two_sided_p(const std::vector<double>& ranks, std::size_t n1,
                                double u_obs) {
  const std::size_t n = ranks.size();
  const std::size_t n2 = n - n1;
  if (n > 24) fail("mann_whitney_u: exact enumeration infeasible for n1+n2 > 24 (got %zu)", n);
  const double mu = 0.5 * static_cast<double>(n1) * static_cast<double>(n2);
  const double dev_obs = std::abs(u_obs - mu) - 1e-9;
  const double base = 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);

  std::vector<std::size_t> idx(n1);
  for (std::size_t i = 0; i < n1; ++i) idx[i] = i;
  unsigned long long total = 0, extreme = 0;
  bool more = true;
  while (more) {
    double rank_sum = 0.0;
    for (std::size_t i : idx) rank_sum += ranks[i];
    const double u = rank_sum - base;
    ++total;
    if (std::abs(u - mu) >= dev_obs) ++extreme;
    // advance to the next combination: find the rightmost index that can move
    more = false;
    for (std::size_t k = n1; k-- > 0;) {
      if (idx[k] < n - n1 + k) {
        ++idx[k];
        for (std::size_t j = k + 1; j < n1; ++j) idx[j] = idx[j - 1] + 1;
        more = true;
        break;
      }
    }
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace detail

// Two-sided Mann-Whitney U test. U is computed for group a via rank sums with
// midrank ties. Under auto_select, p is exact (full enumeration) when
// n1+n2 <= 12 and a tie-corrected, continuity-corrected normal approximation
// otherwise; the other modes force one method.
inline UTestResult mann_whitney_u(const std::vector<double>& group_a,
                                  const std::vector<double>& group_b,
                                  UMode mode = UMode::auto_select) {
  if (group_a.empty() || group_b.empty()) fail("mann_whitney_u: empty group");
  const std::size_t n1 = group_a.size(), n2 = group_b.size();
  const auto pool = detail::rank_pool(group_a, group_b);
  const double u_a =
      pool.rank_sum_a - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);

  UTestResult res;
  res.u_statistic = u_a;

  const std::size_t n = n1 + n2;
  const bool use_exact =
      (mode == UMode::exact) || (mode == UMode::auto_select && n <= 12);

  // all values identical: every rank is tied, the statistic carries no signal
  if (pool.tie_sum >= static_cast<double>(n * n * n - n) - 1e-9 && n > 1) {
    res.p_value = 1.0;
    res.method = use_exact ? UMethod::exact : UMethod::normal_approx;
    return res;
  }

  if (use_exact) {
    res.method = UMethod::exact;
    res.p_value = detail::exact_two_sided_p(pool.ranks, n1, u_a);
    return res;
  }

  res.method = UMethod::normal_approx;
  const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2);
  const double dn = dn1 + dn2;
  const double mu = 0.5 * dn1 * dn2;
  const double tie_correction = pool.tie_sum / (dn * (dn - 1.0));
  double var = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_correction);
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  double dev = std::abs(u_a - mu) - 0.5;  // continuity correction
  if (dev < 0.0) dev = 0.0;
  const double z = dev / std::sqrt(var);
  res.p_value = std::min(1.0, 2.0 * detail::normal_sf(z));
  return res;
}

}  // namespace headliner::metrics
