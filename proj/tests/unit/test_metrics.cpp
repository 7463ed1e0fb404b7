#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "agentrl/error.hpp"
#include "agentrl/metrics.hpp"
#include "agentrl/rng.hpp"

using namespace agentrl;

namespace {

// O(n^2) tau-a: every pair judged by the relative order in both lists.
double pair_count_tau(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> pos_b;
  for (std::size_t i = 0; i < b.size(); ++i) pos_b[b[i]] = static_cast<int>(i);
  int conc = 0, disc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      (pos_b[a[i]] < pos_b[a[j]] ? conc : disc)++;
    }
  }
  const double pairs = a.size() * (a.size() - 1) / 2.0;
  return (conc - disc) / pairs;
}

AnswerTokens tokens(std::vector<std::string> t) {
  std::sort(t.begin(), t.end());
  return AnswerTokens{t};
}

double tau(const std::vector<int>& a, const std::vector<int>& b) {
  return *kendall_tau<int>(std::span<const int>(a), std::span<const int>(b));
}

double reward(const std::vector<int>& a, const std::vector<int>& g) {
  return iou_kendall_reward<int>(std::span<const int>(a), std::span<const int>(g));
}

}  // namespace

TEST_CASE("normalize_answer applies the four rules") {
  CHECK(normalize_answer("The Ouse and Foss") == tokens({"ouse", "and", "foss"}));
  CHECK(normalize_answer("").tokens.empty());
  CHECK(normalize_answer("York") == normalize_answer("york"));
  CHECK(normalize_answer("  an apple,   a pear! ") == tokens({"apple", "pear"}));
  CHECK(normalize_answer("theatre") == tokens({"theatre"}));
}

TEST_CASE("exact_match compares multisets") {
  CHECK(exact_match(tokens({"ouse", "foss"}), tokens({"foss", "ouse"})) == 1);
  CHECK(exact_match(tokens({"york"}), tokens({"ouse", "foss"})) == 0);
  CHECK(exact_match(tokens({"a", "b"}), tokens({"a", "b", "b"})) == 0);
  CHECK(exact_match(tokens({}), tokens({})) == 1);
}

TEST_CASE("f1 examples") {
  CHECK(f1(tokens({"x", "y"}), tokens({"x", "y"})) == 1.0);
  CHECK(f1(tokens({"a", "b", "c"}), tokens({"b", "c", "d"})) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(f1(tokens({"york"}), tokens({"ouse", "foss"})) == 0.0);
  CHECK(f1(tokens({}), tokens({"ouse"})) == 0.0);
  CHECK(f1(tokens({}), tokens({})) == 1.0);
}

TEST_CASE("exact_match and f1 agree with a brute-force multiset counter on random multisets") {
  Rng rng(11);
  const std::vector<std::string> alphabet = {"a1", "b2", "c3", "d4", "e5"};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> p, g;
    const auto np = rng.below(6), ng = rng.below(6);
    for (std::uint64_t i = 0; i < np; ++i) p.push_back(alphabet[rng.below(alphabet.size())]);
    for (std::uint64_t i = 0; i < ng; ++i) g.push_back(alphabet[rng.below(alphabet.size())]);
    // Oracle: strike out matched tokens one at a time.
    std::vector<std::string> rest = g;
    int same = 0;
    for (const auto& t : p) {
      auto it = std::find(rest.begin(), rest.end(), t);
      if (it != rest.end()) {
        ++same;
        rest.erase(it);
      }
    }
    const bool equal = same == static_cast<int>(p.size()) && same == static_cast<int>(g.size());
    double expected;
    if (p.empty() && g.empty()) {
      expected = 1.0;
    } else if (same == 0) {
      expected = 0.0;
    } else {
      const double prec = static_cast<double>(same) / p.size(), rec = static_cast<double>(same) / g.size();
      expected = 2 * prec * rec / (prec + rec);
    }
    CHECK(exact_match(tokens(p), tokens(g)) == (equal ? 1 : 0));
    CHECK(std::abs(f1(tokens(p), tokens(g)) - expected) <= 1e-12);
  }
}

TEST_CASE("kendall_tau examples") {
  CHECK(tau({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(tau({1, 2, 3}, {3, 2, 1}) == -1.0);
  CHECK(tau({1, 2, 3}, {1, 3, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const std::vector<int> one = {4};
  CHECK_FALSE(kendall_tau<int>(std::span<const int>(one), std::span<const int>(one)).has_value());
}

TEST_CASE("kendall_tau equals pair counting on every permutation of sizes 2 to 6") {
  for (int n = 2; n <= 6; ++n) {
    std::vector<int> base(n);
    std::iota(base.begin(), base.end(), 0);
    std::vector<int> perm = base;
    do {
      CHECK(std::abs(tau(perm, base) - pair_count_tau(perm, base)) <= 1e-12);
    } while (std::next_permutation(perm.begin(), perm.end()));
    std::vector<int> rev(base.rbegin(), base.rend());
    CHECK(tau(base, base) == 1.0);
    CHECK(tau(base, rev) == -1.0);
  }
}

TEST_CASE("iou_kendall_reward examples") {
  CHECK(reward({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(reward({1, 2}, {3, 4}) == 0.0);
  CHECK(reward({1, 2, 3}, {3, 2, 1}) == 0.0);
  CHECK(reward({}, {}) == 1.0);
  CHECK(reward({}, {1}) == 0.0);
  // One common record: tau falls back to 1, reward is the IoU.
  CHECK(reward({1, 5}, {1, 6, 7}) == doctest::Approx(0.25).epsilon(1e-15));
  // Duplicates are dropped before comparison.
  CHECK(reward({1, 1, 2, 2}, {1, 2}) == 1.0);
}

TEST_CASE("iou_kendall_reward stays in [0,1] and is 1 exactly on matching sets and orders") {
  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<int> a, g;
    const auto na = rng.below(6), ng = rng.below(6);
    for (std::uint64_t i = 0; i < na; ++i) a.push_back(static_cast<int>(rng.below(6)));
    for (std::uint64_t i = 0; i < ng; ++i) g.push_back(static_cast<int>(rng.below(6)));
    const double r = reward(a, g);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    const auto da = dedup_first_appearance<int>(std::span<const int>(a));
    const auto dg = dedup_first_appearance<int>(std::span<const int>(g));
    CHECK((r == 1.0) == (da == dg));
  }
}

TEST_CASE("aggregate_metrics examples") {
  auto m = aggregate_metrics({{0.3, 0.5, 0.5}}, 3);
  CHECK(m.ir == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(m.fr == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(m.ar == doctest::Approx(130.0 / 3.0).epsilon(1e-12));

  m = aggregate_metrics({{0.397}, {0.397}}, 10);
  CHECK(m.ir == m.fr);
  CHECK(m.fr == m.ar);
  CHECK(m.ir == doctest::Approx(39.7).epsilon(1e-12));

  m = aggregate_metrics({{1.0}, {1.0}, {1.0}}, 10);
  CHECK(m == AggregateMetrics{100.0, 100.0, 100.0});

  // Carry-forward after an early stop.
  m = aggregate_metrics({{0.0, 1.0}}, 4);
  CHECK(m.ar == doctest::Approx(75.0).epsilon(1e-12));

  CHECK_THROWS_AS(aggregate_metrics({}, 3), ContractViolation);
  CHECK_THROWS_AS(aggregate_metrics({{0.1, 0.2}}, 1), ContractViolation);
}

TEST_CASE("aggregate_metrics keeps FR >= IR for non-decreasing sequences") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> m;
    for (int t = 0; t < 5; ++t) {
      std::vector<double> r{rng.uniform()};
      const auto len = rng.below(5);
      for (std::uint64_t k = 0; k < len; ++k) r.push_back(std::min(1.0, r.back() + rng.uniform() * 0.3));
      m.push_back(r);
    }
    const auto a = aggregate_metrics(m, 5);
    CHECK(a.fr >= a.ir);
  }
}
