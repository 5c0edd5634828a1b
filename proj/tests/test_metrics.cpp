#include <catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "headliner/common.hpp"
#include "headliner/metrics.hpp"

using namespace headliner;
using metrics::Tokens;

namespace {

// Oracle: longest common subsequence by enumerating every subsequence of `a`
// (bitmask) and testing it against `b` with a two-pointer scan. Exponential,
// so only for short inputs; shares no code with the DP implementation.
std::size_t lcs_brute(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
    Tokens sub;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (1u << i)) sub.push_back(a[i]);
    std::size_t j = 0;
    for (const auto& tok : b) {
      if (j < sub.size() && tok == sub[j]) ++j;
    }
    if (j == sub.size()) best = std::max(best, sub.size());
  }
  return best;
}

// Oracle: U statistic straight from its pairwise definition,
// #(a > b) + 0.5 * #(a == b), bypassing rank sums entirely.
double u_brute(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a)
    for (double y : b) {
      if (x > y)
        u += 1.0;
      else if (x == y)
        u += 0.5;
    }
  return u;
}

// Oracle: exact two-sided p via the same pairwise-count U over every way of
// labeling the pooled values, independent of the midrank machinery.
double exact_p_brute(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  const std::size_t n = pool.size(), n1 = a.size();
  const double mu = 0.5 * static_cast<double>(n1) * static_cast<double>(n - n1);
  const double dev_obs = std::fabs(u_brute(a, b) - mu) - 1e-9;
  unsigned long long total = 0, extreme = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
    std::vector<double> ga, gb;
    for (std::size_t i = 0; i < n; ++i)
      (mask & (1u << i) ? ga : gb).push_back(pool[i]);
    ++total;
    if (std::fabs(u_brute(ga, gb) - mu) >= dev_obs) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

Tokens random_tokens(Rng& rng, std::size_t max_len, int alphabet) {
  const std::size_t len = rng.uniform_index(max_len + 1);
  Tokens out;
  for (std::size_t i = 0; i < len; ++i)
    out.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(
                                     static_cast<std::size_t>(alphabet)))));
  return out;
}

}  // namespace

TEST_CASE("lcs matches brute-force enumeration on random pairs", "[metrics]") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const Tokens a = random_tokens(rng, 8, 3);
    const Tokens b = random_tokens(rng, 8, 3);
    REQUIRE(metrics::lcs_length(a, b) == lcs_brute(a, b));
  }
}

TEST_CASE("lcs frozen examples", "[metrics]") {
  REQUIRE(metrics::lcs_length({"a", "b", "c", "d"}, {"a", "c", "d", "e"}) == 3);
  REQUIRE(metrics::lcs_length({}, {"a"}) == 0);
  REQUIRE(metrics::lcs_length({"x"}, {"y"}) == 0);
  REQUIRE(metrics::lcs_length({"a", "a", "a"}, {"a", "a"}) == 2);
}

TEST_CASE("rouge-l frozen example", "[metrics]") {
  const auto s = metrics::rouge_l({"the", "cat", "sat"},
                                  {"the", "cat", "sat", "on", "the", "mat"});
  REQUIRE(s.recall == Catch::Approx(0.5));
  REQUIRE(s.precision == Catch::Approx(1.0));
  REQUIRE(s.f1 == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("rouge-l edge cases", "[metrics]") {
  const auto empty_cand = metrics::rouge_l({}, {"a", "b"});
  REQUIRE(empty_cand.recall == 0.0);
  REQUIRE(empty_cand.precision == 0.0);
  REQUIRE(empty_cand.f1 == 0.0);
  REQUIRE_THROWS_AS(metrics::rouge_l({"a"}, {}), Error);
  const auto identical = metrics::rouge_l({"a", "b"}, {"a", "b"});
  REQUIRE(identical.f1 == Catch::Approx(1.0));
}

TEST_CASE("rouge-n frozen examples", "[metrics]") {
  const auto r1 = metrics::rouge_n({"a", "b", "c"}, {"a", "c", "d"}, 1);
  REQUIRE(r1.recall == Catch::Approx(2.0 / 3.0));
  REQUIRE(r1.precision == Catch::Approx(2.0 / 3.0));

  const auto r2 = metrics::rouge_n({"a", "b", "c", "d"}, {"b", "c", "d", "e"}, 2);
  REQUIRE(r2.recall == Catch::Approx(2.0 / 3.0));
  REQUIRE(r2.precision == Catch::Approx(2.0 / 3.0));

  // clipping: candidate repeats a unigram more often than the reference has it
  const auto clipped = metrics::rouge_n({"a", "a", "a"}, {"a", "b"}, 1);
  REQUIRE(clipped.recall == Catch::Approx(0.5));
  REQUIRE(clipped.precision == Catch::Approx(1.0 / 3.0));

  REQUIRE_THROWS_AS(metrics::rouge_n({"a"}, {"b"}, 3), Error);
  REQUIRE_THROWS_AS(metrics::rouge_n({"a", "b"}, {"c"}, 2), Error);
}

TEST_CASE("copy rate counts source membership", "[metrics]") {
  REQUIRE(metrics::copy_rate({"a", "b", "x"}, {"a", "b", "c"}) == Catch::Approx(2.0 / 3.0));
  REQUIRE(metrics::copy_rate({"q"}, {"a"}) == 0.0);
  REQUIRE(metrics::copy_rate({"a", "a"}, {"a"}) == 1.0);
  REQUIRE_THROWS_AS(metrics::copy_rate({}, {"a"}), Error);
}

TEST_CASE("mann-whitney u matches the pairwise-count definition", "[metrics]") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a, b;
    const std::size_t n1 = 1 + rng.uniform_index(6), n2 = 1 + rng.uniform_index(6);
    for (std::size_t i = 0; i < n1; ++i)
      a.push_back(static_cast<double>(rng.uniform_index(5)));  // ties likely
    for (std::size_t i = 0; i < n2; ++i)
      b.push_back(static_cast<double>(rng.uniform_index(5)));
    const auto res = metrics::mann_whitney_u(a, b);
    REQUIRE(res.u_statistic == Catch::Approx(u_brute(a, b)));
  }
}

TEST_CASE("mann-whitney frozen example: full separation", "[metrics]") {
  const auto res =
      metrics::mann_whitney_u({1, 2, 3}, {4, 5, 6}, metrics::UMode::exact);
  REQUIRE(res.u_statistic == 0.0);
  REQUIRE(res.method == metrics::UMethod::exact);
  // 2 of the C(6,3)=20 labelings are at least as extreme as |U - 4.5| = 4.5
  REQUIRE(res.p_value == Catch::Approx(0.1));
}

TEST_CASE("mann-whitney exact p matches independent enumeration", "[metrics]") {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> a, b;
    const std::size_t n1 = 2 + rng.uniform_index(4), n2 = 2 + rng.uniform_index(4);
    for (std::size_t i = 0; i < n1; ++i)
      a.push_back(static_cast<double>(rng.uniform_index(4)));
    for (std::size_t i = 0; i < n2; ++i)
      b.push_back(static_cast<double>(rng.uniform_index(4)));
    const auto res = metrics::mann_whitney_u(a, b, metrics::UMode::exact);
    REQUIRE(res.p_value == Catch::Approx(exact_p_brute(a, b)).margin(1e-12));
  }
}

TEST_CASE("mann-whitney normal approximation tracks the exact test", "[metrics]") {
  // continuous draws: tie-free, where the 0.02 agreement bound holds for
  // every possible U at these group sizes
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a, b;
    for (int i = 0; i < 6; ++i) {
      a.push_back(rng.uniform_real(0.0, 10.0));
      b.push_back(rng.uniform_real(0.0, 10.0) + (trial % 5));  // varied separation
    }
    const double pe = metrics::mann_whitney_u(a, b, metrics::UMode::exact).p_value;
    const double pn = metrics::mann_whitney_u(a, b, metrics::UMode::normal).p_value;
    REQUIRE(std::fabs(pe - pn) <= 0.02);
  }
}

TEST_CASE("mann-whitney properties", "[metrics]") {
  Rng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a, b;
    const std::size_t n1 = 2 + rng.uniform_index(5), n2 = 2 + rng.uniform_index(5);
    for (std::size_t i = 0; i < n1; ++i) a.push_back(rng.uniform01());
    for (std::size_t i = 0; i < n2; ++i) b.push_back(rng.uniform01());
    const auto ab = metrics::mann_whitney_u(a, b);
    const auto ba = metrics::mann_whitney_u(b, a);
    // U_a + U_b = n1*n2, and the two-sided p does not depend on group order
    REQUIRE(ab.u_statistic + ba.u_statistic ==
            Catch::Approx(static_cast<double>(n1 * n2)));
    REQUIRE(ab.p_value == Catch::Approx(ba.p_value));
  }
}

TEST_CASE("mann-whitney degenerate and error cases", "[metrics]") {
  // all values identical: no signal, p = 1 in both modes
  const std::vector<double> same{2, 2, 2};
  REQUIRE(metrics::mann_whitney_u(same, same, metrics::UMode::exact).p_value == 1.0);
  REQUIRE(metrics::mann_whitney_u(same, same, metrics::UMode::normal).p_value == 1.0);
  REQUIRE_THROWS_AS(metrics::mann_whitney_u({}, {1.0}), Error);
  // forcing exact beyond the enumeration bound errors instead of stalling
  std::vector<double> big_a(13, 0.0), big_b(13, 1.0);
  for (std::size_t i = 0; i < big_a.size(); ++i) big_a[i] = static_cast<double>(i);
  for (std::size_t i = 0; i < big_b.size(); ++i) big_b[i] = 100.0 + static_cast<double>(i);
  REQUIRE_THROWS_AS(metrics::mann_whitney_u(big_a, big_b, metrics::UMode::exact), Error);
}

TEST_CASE("mann-whitney with midrank ties", "[metrics]") {
  // pooled [1,1,1,2,2,2] -> midranks 2,2,2,5,5,5; R_a = 9, U_a = 9 - 6 = 3
  const auto res = metrics::mann_whitney_u({1, 1, 2}, {1, 2, 2}, metrics::UMode::exact);
  REQUIRE(res.u_statistic == Catch::Approx(3.0));
  REQUIRE(res.p_value == Catch::Approx(exact_p_brute({1, 1, 2}, {1, 2, 2})).margin(1e-12));
}
