#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace agentrl {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

// Token alphabet of one experiment. Ids are dense, 0..size()-1.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(const std::vector<std::string>& tokens);

  // Adds a token, or returns the id it already has.
  TokenId add(std::string_view token);

  TokenId id(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& lookup(TokenId id) const;

  bool contains(TokenId id) const { return id < tokens_.size(); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Space-joined rendering, mostly for logs and debugging.
  std::string render(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct StateText {
  TokenSeq task_tokens;
  TokenSeq reflection_tokens;
  TokenSeq history_tokens;

  bool operator==(const StateText&) const = default;
};

enum class ActionKind : std::uint8_t { Lookup, Finish, Goto, Take, Use, Execute, Submit };

std::string_view to_string(ActionKind kind);
ActionKind parse_action_kind(std::string_view s);

struct AgentAction {
  TokenSeq thought;
  ActionKind kind = ActionKind::Submit;
  TokenSeq args;
  std::uint32_t action_id = 0;

  bool operator==(const AgentAction&) const = default;
};

struct Step {
  StateText state;
  AgentAction action;
  double behavior_logprob = 0.0;  // natural log, <= 0
  TokenSeq observation;

  bool operator==(const Step&) const = default;
};

enum class Termination : std::uint8_t { Submitted, StepLimit };

std::string_view to_string(Termination t);
Termination parse_termination(std::string_view s);

// One trial. The terminal reward lives on the trajectory itself; it is the
// environment's verdict on the finished attempt.
struct Trajectory {
  std::string task_id;
  std::uint32_t trial_index = 0;
  std::vector<Step> steps;
  double terminal_reward = 0.0;
  Termination terminated_by = Termination::StepLimit;

  bool operator==(const Trajectory&) const = default;
};

struct Reflection {
  TokenSeq tokens;  // exactly one token from the environment's reflection alphabet
  double behavior_logprob = 0.0;
  std::uint32_t produced_after_trial = 0;

  bool operator==(const Reflection&) const = default;
};

// All trials of one task. Construction validates the ordering invariants:
// trial indices run 0..n-1, reflection k follows trial k, nothing follows a
// solved trial.
class TrialSequence {
 public:
  TrialSequence(std::string task_id, std::vector<Trajectory> trials,
                std::vector<Reflection> reflections, std::optional<std::uint32_t> solved_at);

  const std::string& task_id() const { return task_id_; }
  const std::vector<Trajectory>& trials() const { return trials_; }
  const std::vector<Reflection>& reflections() const { return reflections_; }
  std::optional<std::uint32_t> solved_at() const { return solved_at_; }

  bool operator==(const TrialSequence&) const = default;

 private:
  std::string task_id_;
  std::vector<Trajectory> trials_;
  std::vector<Reflection> reflections_;
  std::optional<std::uint32_t> solved_at_;
};

// s0^{k+1} = s0^k + f^k, applied for every reflection in trial order.
StateText append_reflections(const StateText& initial, std::span<const Reflection> reflections,
                             const Vocab& vocab);

std::vector<double> trial_rewards(const TrialSequence& seq);

// "task|reflection|history" with comma-joined ids in each bank.
std::string encode_state(const StateText& s);
StateText decode_state(std::string_view field);

// Line-delimited trajectory log. One tab-separated record per step:
//   task_id trial step state action_id behavior_logprob observation kind thought args
// where state is "task|reflection|history" (comma-joined ids each), followed
// by one trial-end record:
//   task_id trial end terminal_reward terminated_by
void write_trajectory_log(std::ostream& out, std::span<const Trajectory> trajectories);
std::vector<Trajectory> parse_trajectory_log(std::istream& in);

}  // namespace agentrl
