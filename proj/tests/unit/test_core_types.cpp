#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "agentrl/core_types.hpp"
#include "agentrl/error.hpp"
#include "agentrl/rng.hpp"

using namespace agentrl;

namespace {

Vocab numbered_vocab(int n) {
  std::vector<std::string> t;
  for (int i = 0; i < n; ++i) t.push_back("w" + std::to_string(i));
  return Vocab(t);
}

Reflection refl(TokenId t, std::uint32_t after) { return Reflection{{t}, -0.5, after}; }

Trajectory traj(const std::string& id, std::uint32_t k, double reward) {
  Trajectory t;
  t.task_id = id;
  t.trial_index = k;
  t.terminal_reward = reward;
  t.terminated_by = Termination::Submitted;
  t.steps.push_back(Step{StateText{{1, 2}, {}, {}}, AgentAction{{3}, ActionKind::Finish, {}, 0}, -0.1, {4}});
  return t;
}

}  // namespace

TEST_CASE("Vocab ids are dense and lookup inverts id") {
  Vocab v;
  CHECK(v.add("alpha") == 0);
  CHECK(v.add("beta") == 1);
  CHECK(v.add("alpha") == 0);
  for (TokenId i = 0; i < v.size(); ++i) CHECK(v.id(v.lookup(i)) == i);
  CHECK_THROWS_AS(v.id("gamma"), InvalidTokenError);
  CHECK_THROWS_AS(v.lookup(2), InvalidTokenError);
  CHECK_THROWS_AS(Vocab(std::vector<std::string>{"x", "x"}), ConfigError);
}

TEST_CASE("append_reflections examples") {
  const Vocab v = numbered_vocab(30);
  const StateText initial{{5, 9}, {}, {}};
  CHECK(append_reflections(initial, {}, v).reflection_tokens.empty());

  const std::vector<Reflection> one = {refl(17, 0)};
  const StateText s1 = append_reflections(initial, one, v);
  CHECK(s1.reflection_tokens == TokenSeq{17});
  CHECK(s1.task_tokens == TokenSeq{5, 9});
  CHECK(s1.history_tokens.empty());

  const std::vector<Reflection> two = {refl(17, 0), refl(23, 1)};
  CHECK(append_reflections(initial, two, v).reflection_tokens == TokenSeq{17, 23});
}

TEST_CASE("append_reflections is associative over concatenation") {
  const Vocab v = numbered_vocab(30);
  const StateText initial{{5, 9}, {}, {}};
  const std::vector<Reflection> first = {refl(17, 0)};
  const std::vector<Reflection> second = {refl(23, 1)};
  const std::vector<Reflection> both = {refl(17, 0), refl(23, 1)};
  const StateText stepwise = append_reflections(append_reflections(initial, first, v), second, v);
  CHECK(stepwise == append_reflections(initial, both, v));
}

TEST_CASE("append_reflections rejects foreign tokens and non-initial states") {
  const Vocab v = numbered_vocab(10);
  const std::vector<Reflection> bad = {refl(99, 0)};
  CHECK_THROWS_AS(append_reflections(StateText{{1}, {}, {}}, bad, v), InvalidTokenError);
  CHECK_THROWS_AS(append_reflections(StateText{{1}, {}, {2}}, {}, v), ContractViolation);
}

TEST_CASE("trial_rewards projects terminal rewards in order") {
  TrialSequence one("t", {traj("t", 0, 0.0)}, {}, std::nullopt);
  CHECK(trial_rewards(one) == std::vector<double>{0.0});
  TrialSequence three("t", {traj("t", 0, 0.3), traj("t", 1, 0.5), traj("t", 2, 1.0)},
                      {refl(1, 0), refl(1, 1)}, 2);
  CHECK(trial_rewards(three) == std::vector<double>{0.3, 0.5, 1.0});
}

TEST_CASE("TrialSequence enforces its ordering invariants") {
  CHECK_THROWS_AS(TrialSequence("t", {traj("t", 1, 0.0), traj("t", 0, 0.0)}, {refl(1, 0)}, std::nullopt),
                  ContractViolation);
  CHECK_THROWS_AS(TrialSequence("t", {traj("t", 0, 0.0), traj("t", 1, 0.0)}, {refl(1, 0), refl(1, 1)},
                                std::nullopt),
                  ContractViolation);
  CHECK_THROWS_AS(TrialSequence("t", {traj("t", 0, 1.0), traj("t", 1, 1.0)}, {refl(1, 0)}, 0),
                  ContractViolation);
  CHECK_THROWS_AS(TrialSequence("t", {}, {}, std::nullopt), ContractViolation);
  // Solved at trial j: exactly j reflections and nothing after.
  TrialSequence solved("t", {traj("t", 0, 0.2), traj("t", 1, 1.0)}, {refl(1, 0)}, 1);
  CHECK(solved.reflections().size() == 1);
}

TEST_CASE("trajectory log round trip") {
  Rng rng(9);
  std::vector<Trajectory> ts;
  for (std::uint32_t k = 0; k < 3; ++k) {
    Trajectory t;
    t.task_id = "task-" + std::to_string(k);
    t.trial_index = k;
    const auto n = 1 + rng.below(4);
    for (std::uint64_t i = 0; i < n; ++i) {
      StateText s{{1, 2, 3}, k ? TokenSeq{7} : TokenSeq{}, TokenSeq(i, 4)};
      AgentAction a{{5}, ActionKind::Lookup, {6, 8}, static_cast<std::uint32_t>(i)};
      t.steps.push_back(Step{s, a, -rng.uniform() * 3.0, {9, static_cast<TokenId>(i)}});
    }
    t.terminal_reward = rng.uniform();
    t.terminated_by = k % 2 ? Termination::StepLimit : Termination::Submitted;
    ts.push_back(t);
  }
  std::ostringstream out;
  write_trajectory_log(out, ts);
  std::istringstream in(out.str());
  CHECK(parse_trajectory_log(in) == ts);
}

TEST_CASE("state encoding round trip") {
  const StateText s{{1, 2}, {}, {3, 4, 5}};
  CHECK(encode_state(s) == "1,2||3,4,5");
  CHECK(decode_state(encode_state(s)) == s);
  CHECK_THROWS_AS(decode_state("1,2|3"), DataError);
}
