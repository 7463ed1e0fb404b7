#include "agentrl/core_types.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "agentrl/error.hpp"
#include "agentrl/text_io.hpp"

namespace agentrl {

Vocab::Vocab(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) {
    if (index_.count(t)) throw ConfigError("duplicate vocab token '" + t + "'");
    add(t);
  }
}

TokenId Vocab::add(std::string_view token) {
  std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

TokenId Vocab::id(std::string_view token) const {
  if (auto found = find(token)) return *found;
  throw InvalidTokenError("unknown token '" + std::string(token) + "'");
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::lookup(TokenId id) const {
  if (!contains(id)) throw InvalidTokenError("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::string Vocab::render(std::span<const TokenId> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += lookup(ids[i]);
  }
  return out;
}

namespace {
constexpr std::string_view kKindNames[] = {"Lookup", "Finish", "Goto", "Take",
                                           "Use",    "Execute", "Submit"};
}

std::string_view to_string(ActionKind kind) { return kKindNames[static_cast<int>(kind)]; }

ActionKind parse_action_kind(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == s) return static_cast<ActionKind>(i);
  }
  throw DataError("unknown action kind '" + std::string(s) + "'");
}

std::string_view to_string(Termination t) {
  return t == Termination::Submitted ? "submitted" : "step_limit";
}

Termination parse_termination(std::string_view s) {
  if (s == "submitted") return Termination::Submitted;
  if (s == "step_limit") return Termination::StepLimit;
  throw DataError("unknown termination '" + std::string(s) + "'");
}

TrialSequence::TrialSequence(std::string task_id, std::vector<Trajectory> trials,
                             std::vector<Reflection> reflections,
                             std::optional<std::uint32_t> solved_at)
    : task_id_(std::move(task_id)),
      trials_(std::move(trials)),
      reflections_(std::move(reflections)),
      solved_at_(solved_at) {
  if (trials_.empty()) throw ContractViolation("trial sequence without trials");
  for (std::size_t k = 0; k < trials_.size(); ++k) {
    if (trials_[k].trial_index != k) {
      throw ContractViolation("trial indices of " + task_id_ + " are not consecutive from 0");
    }
    if (trials_[k].task_id != task_id_) throw ContractViolation("trial belongs to another task");
  }
  // Either one reflection between each pair of trials, or none at all when
  // reflection is disabled.
  if (!reflections_.empty() && reflections_.size() != trials_.size() - 1) {
    throw ContractViolation("reflection count must equal trial count - 1");
  }
  for (std::size_t k = 0; k < reflections_.size(); ++k) {
    if (reflections_[k].produced_after_trial != k) {
      throw ContractViolation("reflections out of trial order");
    }
  }
  if (solved_at_ && *solved_at_ + 1 != trials_.size()) {
    throw ContractViolation("trials continue after the solved trial");
  }
}

StateText append_reflections(const StateText& initial, std::span<const Reflection> reflections,
                             const Vocab& vocab) {
  if (!initial.history_tokens.empty()) {
    throw ContractViolation("reflections can only be appended to an initial state");
  }
  std::vector<const Reflection*> ordered;
  ordered.reserve(reflections.size());
  for (const auto& r : reflections) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const Reflection* a, const Reflection* b) {
    return a->produced_after_trial < b->produced_after_trial;
  });

  StateText out = initial;
  for (const Reflection* r : ordered) {
    for (TokenId t : r->tokens) {
      if (!vocab.contains(t)) {
        throw InvalidTokenError("reflection token " + std::to_string(t) + " not in vocab");
      }
      out.reflection_tokens.push_back(t);
    }
  }
  return out;
}

std::vector<double> trial_rewards(const TrialSequence& seq) {
  std::vector<double> out;
  out.reserve(seq.trials().size());
  for (const auto& t : seq.trials()) out.push_back(t.terminal_reward);
  return out;
}

std::string encode_state(const StateText& s) {
  return text::join_ids(s.task_tokens) + '|' + text::join_ids(s.reflection_tokens) + '|' +
         text::join_ids(s.history_tokens);
}

StateText decode_state(std::string_view field) {
  auto parts = text::split(field, '|');
  if (parts.size() != 3) throw DataError("state field needs three '|' separated banks");
  return StateText{text::parse_ids(parts[0]), text::parse_ids(parts[1]), text::parse_ids(parts[2])};
}

void write_trajectory_log(std::ostream& out, std::span<const Trajectory> trajectories) {
  for (const auto& traj : trajectories) {
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
      const Step& s = traj.steps[i];
      out << traj.task_id << '\t' << traj.trial_index << '\t' << i << '\t' << encode_state(s.state)
          << '\t' << s.action.action_id << '\t' << text::format_double(s.behavior_logprob) << '\t'
          << text::join_ids(s.observation) << '\t' << to_string(s.action.kind) << '\t'
          << text::join_ids(s.action.thought) << '\t' << text::join_ids(s.action.args) << '\n';
    }
    out << traj.task_id << '\t' << traj.trial_index << "\tend\t"
        << text::format_double(traj.terminal_reward) << '\t' << to_string(traj.terminated_by)
        << '\n';
  }
}

std::vector<Trajectory> parse_trajectory_log(std::istream& in) {
  std::vector<Trajectory> out;
  std::optional<Trajectory> open;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = text::split(line, '\t');
    try {
      if (f.size() < 3) throw DataError("too few fields");
      std::string task_id(f[0]);
      auto trial = static_cast<std::uint32_t>(text::parse_uint(f[1]));
      if (!open) {
        open.emplace();
        open->task_id = task_id;
        open->trial_index = trial;
      } else if (open->task_id != task_id || open->trial_index != trial) {
        throw DataError("record interleaves two trials");
      }
      if (f[2] == "end") {
        if (f.size() != 5) throw DataError("trial-end record needs 5 fields");
        open->terminal_reward = text::parse_double(f[3]);
        open->terminated_by = parse_termination(f[4]);
        out.push_back(std::move(*open));
        open.reset();
        continue;
      }
      if (f.size() != 10) throw DataError("step record needs 10 fields");
      if (text::parse_uint(f[2]) != open->steps.size()) throw DataError("step index out of order");
      Step s;
      s.state = decode_state(f[3]);
      s.action.action_id = static_cast<std::uint32_t>(text::parse_uint(f[4]));
      s.behavior_logprob = text::parse_double(f[5]);
      s.observation = text::parse_ids(f[6]);
      s.action.kind = parse_action_kind(f[7]);
      s.action.thought = text::parse_ids(f[8]);
      s.action.args = text::parse_ids(f[9]);
      open->steps.push_back(std::move(s));
    } catch (const DataError& e) {
      throw DataError("trajectory log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (open) throw DataError("trajectory log ends inside a trial");
  return out;
}

}  // namespace agentrl
