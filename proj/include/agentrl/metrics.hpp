#pragma once

// Answer, ranking and aggregate metrics used as environment rewards and in
// reports. Everything here is a pure function.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "agentrl/error.hpp"

namespace agentrl {

// Multiset of normalized answer tokens. Kept sorted so equality is multiset
// equality.
struct AnswerTokens {
  std::vector<std::string> tokens;

  bool operator==(const AnswerTokens&) const = default;
};

// Lowercase, drop ASCII punctuation, drop the articles a/an/the, split on
// whitespace.
AnswerTokens normalize_answer(std::string_view text);

int exact_match(const AnswerTokens& pred, const AnswerTokens& gold);

// Token-level F1. Both empty scores 1; exactly one empty scores 0.
double f1(const AnswerTokens& pred, const AnswerTokens& gold);

namespace detail {

// Merge sort that counts inversions in `ranks`.
std::uint64_t count_inversions(std::vector<std::size_t>& ranks);

}  // namespace detail

// Kendall tau-a between two orderings of the same distinct elements, computed
// from an O(n log n) inversion count. Returns nullopt for fewer than two
// elements, where tau is undefined.
template <class T, class Hash = std::hash<T>>
std::optional<double> kendall_tau(std::span<const T> order_a, std::span<const T> order_b) {
  if (order_a.size() != order_b.size()) {
    throw ContractViolation("kendall_tau needs two orderings of one set");
  }
  const std::size_t n = order_a.size();
  if (n < 2) return std::nullopt;
  std::unordered_map<T, std::size_t, Hash> rank_in_b;
  rank_in_b.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rank_in_b.emplace(order_b[i], i).second) {
      throw ContractViolation("kendall_tau elements must be distinct");
    }
  }
  std::vector<std::size_t> ranks;
  ranks.reserve(n);
  for (const T& v : order_a) {
    auto it = rank_in_b.find(v);
    if (it == rank_in_b.end()) throw ContractViolation("kendall_tau orderings differ in content");
    ranks.push_back(it->second);
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const auto discordant = static_cast<double>(detail::count_inversions(ranks));
  return (pairs - 2.0 * discordant) / pairs;
}

template <class T, class Hash = std::hash<T>>
std::vector<T> dedup_first_appearance(std::span<const T> xs) {
  std::unordered_set<T, Hash> seen;
  std::vector<T> out;
  for (const T& x : xs) {
    if (seen.insert(x).second) out.push_back(x);
  }
  return out;
}

// IoU of the deduplicated record sets times (tau + 1) / 2, where tau compares
// the common records ordered by first appearance in A and in G. Fewer than two
// common records count as tau = 1; two empty lists score 1.
template <class T, class Hash = std::hash<T>>
double iou_kendall_reward(std::span<const T> result, std::span<const T> gold) {
  const std::vector<T> a = dedup_first_appearance<T, Hash>(result);
  const std::vector<T> g = dedup_first_appearance<T, Hash>(gold);
  if (a.empty() && g.empty()) return 1.0;

  std::unordered_set<T, Hash> a_set(a.begin(), a.end());
  std::unordered_set<T, Hash> g_set(g.begin(), g.end());
  std::vector<T> common_in_a;
  std::vector<T> common_in_g;
  for (const T& x : a) {
    if (g_set.count(x)) common_in_a.push_back(x);
  }
  for (const T& x : g) {
    if (a_set.count(x)) common_in_g.push_back(x);
  }
  const std::size_t inter = common_in_a.size();
  const std::size_t uni = a.size() + g.size() - inter;
  const double iou = static_cast<double>(inter) / static_cast<double>(uni);
  if (inter == 0) return 0.0;
  const double tau = kendall_tau<T, Hash>(std::span<const T>(common_in_a),
                                          std::span<const T>(common_in_g))
                         .value_or(1.0);
  return iou * ((tau + 1.0) / 2.0);
}

// Initial / final / average reward, each averaged over tasks and scaled x100.
struct AggregateMetrics {
  double ir = 0.0;
  double fr = 0.0;
  double ar = 0.0;

  bool operator==(const AggregateMetrics&) const = default;
};

// Each task's rewards are carry-forward padded to K slots (an early-stopped
// task keeps its last reward).
AggregateMetrics aggregate_metrics(const std::vector<std::vector<double>>& reward_matrix,
                                   std::size_t K);

}  // namespace agentrl
