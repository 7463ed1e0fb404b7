#include "agentrl/metrics.hpp"

#include <cctype>
#include <map>

namespace agentrl {

AnswerTokens normalize_answer(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    auto uc = static_cast<unsigned char>(c);
    if (std::ispunct(uc)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(uc)));
  }
  AnswerTokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && current != "a" && current != "an" && current != "the") {
      out.tokens.push_back(current);
    }
    current.clear();
  };
  for (char c : cleaned) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  std::sort(out.tokens.begin(), out.tokens.end());
  return out;
}

namespace {

std::map<std::string_view, int> counts(const AnswerTokens& a) {
  std::map<std::string_view, int> m;
  for (const auto& t : a.tokens) ++m[t];
  return m;
}

}  // namespace

int exact_match(const AnswerTokens& pred, const AnswerTokens& gold) {
  return counts(pred) == counts(gold) ? 1 : 0;
}

double f1(const AnswerTokens& pred, const AnswerTokens& gold) {
  if (pred.tokens.empty() && gold.tokens.empty()) return 1.0;
  if (pred.tokens.empty() || gold.tokens.empty()) return 0.0;
  auto pc = counts(pred);
  auto gc = counts(gold);
  int num_same = 0;
  for (const auto& [tok, n] : pc) {
    if (auto it = gc.find(tok); it != gc.end()) num_same += std::min(n, it->second);
  }
  if (num_same == 0) return 0.0;
  const double precision = static_cast<double>(num_same) / static_cast<double>(pred.tokens.size());
  const double recall = static_cast<double>(num_same) / static_cast<double>(gold.tokens.size());
  return 2.0 * precision * recall / (precision + recall);
}

namespace detail {

std::uint64_t count_inversions(std::vector<std::size_t>& ranks) {
  std::vector<std::size_t> buffer(ranks.size());
  std::uint64_t inversions = 0;
  for (std::size_t width = 1; width < ranks.size(); width *= 2) {
    for (std::size_t lo = 0; lo < ranks.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, ranks.size());
      const std::size_t hi = std::min(lo + 2 * width, ranks.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (ranks[j] < ranks[i]) {
          inversions += mid - i;
          buffer[k++] = ranks[j++];
        } else {
          buffer[k++] = ranks[i++];
        }
      }
      while (i < mid) buffer[k++] = ranks[i++];
      while (j < hi) buffer[k++] = ranks[j++];
    }
    ranks.swap(buffer);
  }
  return inversions;
}

}  // namespace detail

AggregateMetrics aggregate_metrics(const std::vector<std::vector<double>>& reward_matrix,
                                   std::size_t K) {
  if (reward_matrix.empty()) throw ContractViolation("aggregate_metrics: empty task set");
  if (K == 0) throw ContractViolation("aggregate_metrics: K must be >= 1");
  double ir = 0.0, fr = 0.0, ar = 0.0;
  for (const auto& rewards : reward_matrix) {
    if (rewards.empty() || rewards.size() > K) {
      throw ContractViolation("aggregate_metrics: each task needs 1..K rewards");
    }
    // Mean as first + mean offset, so a constant sequence averages to itself exactly.
    double offset = 0.0;
    for (std::size_t k = 0; k < K; ++k) offset += rewards[std::min(k, rewards.size() - 1)] - rewards.front();
    ir += rewards.front();
    fr += rewards.back();
    ar += rewards.front() + offset / static_cast<double>(K);
  }
  const double n = static_cast<double>(reward_matrix.size());
  return {100.0 * ir / n, 100.0 * fr / n, 100.0 * ar / n};
}

}  // namespace agentrl
