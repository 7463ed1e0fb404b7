#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "../support/oracles.hpp"
#include "agentrl/error.hpp"
#include "agentrl/policy.hpp"
#include "agentrl/rng.hpp"

using namespace agentrl;

namespace {

// One active feature whose row holds the given scores.
ParamVector with_scores(const std::vector<double>& scores, std::size_t slots = 0) {
  if (slots == 0) slots = scores.size();
  auto p = ParamVector::zeros(Role::Planner, 2, slots);
  for (std::size_t j = 0; j < scores.size(); ++j) p.values()[1 * slots + j] = scores[j];
  return p;
}

const FeatureVector kFeature1{{1}};

FeatureVector random_features(std::size_t dim, Rng& rng) {
  FeatureVector f;
  for (std::uint32_t i = 0; i < dim; ++i) {
    if (rng.uniform() < 0.5) f.indices.push_back(i);
  }
  if (f.indices.empty()) f.indices.push_back(0);
  return f;
}

std::vector<double> dense_grad(const ParamVector& p, const FeatureVector& f, std::size_t table,
                               std::uint32_t index) {
  std::vector<double> g(p.values().size(), 0.0);
  grad_logprob(p, f, table, index).add_to(g, p.max_action_slots(), 1.0);
  return g;
}

}  // namespace

TEST_CASE("distribution examples") {
  auto zero = ParamVector::zeros(Role::Planner, 3, 4);
  auto d = distribution(zero, FeatureVector{{0, 2}}, 4, 1.0);
  for (double p : d.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  d = distribution(with_scores({1.0, 3.0, 3.0}), kFeature1, 3, 0.0);
  CHECK(d.probs == std::vector<double>{0.0, 1.0, 0.0});

  d = distribution(with_scores({0.0, std::log(3.0)}), kFeature1, 2, 1.0);
  CHECK(d.probs[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(d.probs[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("temperature divides the scores") {
  auto p = with_scores({0.0, 2.0 * std::log(3.0)});
  auto d = distribution(p, kFeature1, 2, 2.0);
  CHECK(d.probs[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("action_scores sums the active rows and rejects oversized tables") {
  auto p = ParamVector::zeros(Role::Planner, 3, 4);
  for (std::size_t k = 0; k < p.values().size(); ++k) p.values()[k] = static_cast<double>(k);
  const auto s = action_scores(p, FeatureVector{{0, 2}}, 3);
  CHECK(s == std::vector<double>{0 + 8, 1 + 9, 2 + 10});
  const auto shifted = action_scores(p, FeatureVector{{0, 2}}, 2, 2);
  CHECK(shifted == std::vector<double>{2 + 10, 3 + 11});
  CHECK_THROWS_AS(action_scores(p, FeatureVector{{0}}, 5), ConfigError);
  CHECK_THROWS_AS(action_scores(p, FeatureVector{{0}}, 3, 2), ConfigError);
}

TEST_CASE("distributions are normalized and greedy matches argmax") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t table = 1 + rng.below(12);
    auto p = ParamVector::random(Role::Planner, 8, table, trial, 2.0);
    const auto f = random_features(8, rng);
    const auto d = distribution(p, f, table, 1.0);
    double sum = 0.0;
    for (double x : d.probs) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    const auto greedy = distribution(p, f, table, 0.0);
    std::size_t best = 0;
    for (std::size_t j = 1; j < table; ++j) {
      if (d.probs[j] > d.probs[best]) best = j;
    }
    CHECK(greedy.probs[best] == 1.0);
    Rng srng(0);
    CHECK(sample(p, f, table, 0.0, srng) == std::pair<std::uint32_t, double>{static_cast<std::uint32_t>(best), 0.0});
  }
}

TEST_CASE("sample draws from the distribution and reports its log-prob") {
  auto p = with_scores({0.0, std::log(3.0)});
  Rng rng(42);
  int ones = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto [idx, lp] = sample(p, kFeature1, 2, 1.0, rng);
    CHECK(lp == doctest::Approx(std::log(idx == 1 ? 0.75 : 0.25)).epsilon(1e-12));
    ones += static_cast<int>(idx);
  }
  CHECK(std::abs(ones / static_cast<double>(n) - 0.75) < 0.02);
}

TEST_CASE("logprob_of examples") {
  auto zero = ParamVector::zeros(Role::Planner, 3, 4);
  for (std::uint32_t j = 0; j < 4; ++j) {
    CHECK(logprob_of(zero, FeatureVector{{1}}, 4, j) == doctest::Approx(-1.3862943611198906).epsilon(1e-15));
  }
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = ParamVector::random(Role::Planner, 6, 5, trial, 1.0);
    const auto f = random_features(6, rng);
    const auto d = distribution(p, f, 5, 1.0);
    for (std::uint32_t j = 0; j < 5; ++j) CHECK(std::abs(logprob_of(p, f, 5, j) - std::log(d.probs[j])) <= 1e-12);
  }
}

TEST_CASE("logprob_of stays finite and accurate for large scores") {
  const std::vector<double> scores = {1000.0, -1000.0, 999.0, 0.0};
  auto p = with_scores(scores);
  const auto ref = oracle::softmax_ld(scores);
  for (std::uint32_t j = 0; j < 4; ++j) {
    const double lp = logprob_of(p, kFeature1, 4, j);
    CHECK(std::isfinite(lp));
    // Extended precision reference for the log-probs themselves.
    long double mx = 1000.0L, z = 0;
    for (double s : scores) z += std::exp(static_cast<long double>(s) - mx);
    const double expected = static_cast<double>(static_cast<long double>(scores[j]) - mx - std::log(z));
    CHECK(lp == doctest::Approx(expected).epsilon(1e-12));
    if (ref[j] > 0) CHECK(std::exp(lp) == doctest::Approx(ref[j]).epsilon(1e-12));
  }
}

TEST_CASE("grad_logprob examples") {
  auto zero = ParamVector::zeros(Role::Planner, 3, 2);
  const auto g = grad_logprob(zero, FeatureVector{{0, 2}}, 2, 0);
  for (std::uint32_t i : {0u, 2u}) {
    CHECK(g.at(i, 0) == doctest::Approx(0.5));
    CHECK(g.at(i, 1) == doctest::Approx(-0.5));
  }
  CHECK(g.at(1, 0) == 0.0);

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = ParamVector::random(Role::Planner, 6, 7, trial, 1.0);
    const auto f = random_features(6, rng);
    const auto gr = grad_logprob(p, f, 7, static_cast<std::uint32_t>(rng.below(7)));
    for (std::uint32_t i : f.indices) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 7; ++j) sum += gr.at(i, j);
      CHECK(std::abs(sum) <= 1e-12);
    }
  }
}

TEST_CASE("grad_logprob matches central finite differences") {
  Rng rng(4);
  for (std::size_t table : {2u, 3u, 8u, 32u}) {
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t slots = table + rng.below(3);
      const std::size_t offset = slots - table;
      auto p = ParamVector::random(Role::Planner, 5, slots, rng.next(), 1.0);
      const auto f = random_features(5, rng);
      const auto index = static_cast<std::uint32_t>(rng.below(table));
      std::vector<double> analytic(p.values().size(), 0.0);
      grad_logprob(p, f, table, index, offset).add_to(analytic, slots, 1.0);
      const auto numeric = oracle::central_diff(
          [&](const std::vector<double>& x) {
            return logprob_of(ParamVector(Role::Planner, 5, slots, 0, x), f, table, index, offset);
          },
          p.values());
      CHECK(oracle::relative_error(analytic, numeric) <= 1e-6);
    }
  }
}

TEST_CASE("a constant score shift changes neither distribution nor gradient") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = ParamVector::random(Role::Planner, 4, 6, trial, 1.0);
    const FeatureVector f{{0, 3}};
    auto q = p;
    const double c = rng.uniform() * 20 - 10;
    for (std::size_t j = 0; j < 6; ++j) q.values()[3 * 6 + j] += c;
    const auto dp = distribution(p, f, 6, 1.0), dq = distribution(q, f, 6, 1.0);
    for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(dp.probs[j] - dq.probs[j]) <= 1e-9);
    const auto gp = dense_grad(p, f, 6, 2), gq = dense_grad(q, f, 6, 2);
    for (std::size_t k = 0; k < gp.size(); ++k) CHECK(std::abs(gp[k] - gq[k]) <= 1e-9);
  }
}

TEST_CASE("featurize_state keeps the three banks apart") {
  const FeatureSpace space{10, 3, false};
  StateText s{{1, 2}, {}, {4, 5, 6, 7}};
  const auto f = featurize_state(s, space);
  // Only the last 3 history tokens enter.
  CHECK(f.indices == std::vector<std::uint32_t>{1, 2, 25, 26, 27});
  CHECK(featurize_state(s, space) == f);

  StateText r = s;
  r.reflection_tokens = {2, 9};
  const auto g = featurize_state(r, space);
  std::vector<std::uint32_t> extra;
  for (std::uint32_t i : g.indices) {
    if (std::find(f.indices.begin(), f.indices.end(), i) == f.indices.end()) extra.push_back(i);
  }
  CHECK(extra == std::vector<std::uint32_t>{12, 19});

  const FeatureSpace shared{10, 3, true};
  CHECK(featurize_state(s, shared).indices.back() == shared.role_flag());
}

TEST_CASE("featurize_trajectory encodes actions, final observation, reward and termination") {
  Vocab v({"t0", "Lookup", "Finish", "a3", "o4", "o5"});
  const FeatureSpace space{v.size(), 16, false};
  Trajectory t;
  t.steps.push_back(Step{StateText{{0}, {}, {}}, AgentAction{{}, ActionKind::Lookup, {3}, 0}, -0.1, {4}});
  t.steps.push_back(Step{StateText{{0}, {}, {}}, AgentAction{{}, ActionKind::Finish, {}, 1}, -0.1, {5}});
  t.terminal_reward = 0.3;
  t.terminated_by = Termination::Submitted;
  const auto f = featurize_trajectory(t, v, space);
  const std::uint32_t V = 6;
  CHECK(f.indices == std::vector<std::uint32_t>{0, V + 1, V + 2, V + 3, 2 * V + 5,
                                                static_cast<std::uint32_t>(space.reward_bucket(1)),
                                                static_cast<std::uint32_t>(space.submitted_flag())});
  CHECK(reward_bucket(0.0) == 0);
  CHECK(reward_bucket(0.25) == 1);
  CHECK(reward_bucket(0.99) == 2);
  CHECK(reward_bucket(1.0) == 3);
}

TEST_CASE("reflection tokens can change the greedy action") {
  const FeatureSpace space{10, 16, false};
  auto p = ParamVector::zeros(Role::Planner, space.dim(), 3);
  p.values()[1 * 3 + 0] = 1.0;         // task token 1 favours slot 0
  p.values()[(10 + 7) * 3 + 2] = 5.0;  // reflection token 7 favours slot 2
  StateText plain{{1}, {}, {}};
  StateText hinted{{1}, {7}, {}};
  Rng rng(0);
  CHECK(sample(p, featurize_state(plain, space), 3, 0.0, rng).first == 0);
  CHECK(sample(p, featurize_state(hinted, space), 3, 0.0, rng).first == 2);
}

TEST_CASE("checkpoints round trip bit-exactly") {
  auto p = ParamVector::random(Role::Reflector, 7, 5, 1234, 3.0);
  p.values()[0] = 0.1;
  p.values()[1] = -0.0;
  p.values()[2] = std::numeric_limits<double>::denorm_min();
  p.values()[3] = 1e308;
  std::stringstream ss;
  write_checkpoint(ss, p);
  const auto q = read_checkpoint(ss);
  CHECK(q.role() == Role::Reflector);
  CHECK(q.seed() == 1234);
  REQUIRE(q.values().size() == p.values().size());
  for (std::size_t k = 0; k < p.values().size(); ++k) {
    CHECK(std::signbit(q.values()[k]) == std::signbit(p.values()[k]));
    CHECK(q.values()[k] == p.values()[k]);
  }

  std::string text = ss.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), DataError);
  std::istringstream garbage("not a checkpoint\n");
  CHECK_THROWS_AS(read_checkpoint(garbage), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/x.ckpt"), DataError);
}

TEST_CASE("random initialization is reproducible and finite") {
  const auto a = ParamVector::random(Role::Planner, 10, 4, 9, 0.01);
  const auto b = ParamVector::random(Role::Planner, 10, 4, 9, 0.01);
  CHECK(a == b);
  CHECK(a.all_finite());
  CHECK_FALSE(a == ParamVector::random(Role::Planner, 10, 4, 10, 0.01));
}
