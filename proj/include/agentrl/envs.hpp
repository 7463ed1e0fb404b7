#pragma once

// Environment contract and the three toy worlds:
//   graphqa   - two-hop question answering over a small relation graph (token F1 reward)
//   gridhouse - find a bowl and examine it under the desk lamp (binary success)
//   setquery  - pick the query whose result matches a gold record list (IoU x Kendall)
// Every environment is a pure function of (task, state, action). Internal
// state is recovered by replaying the actions recorded in the history tokens.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "agentrl/core_types.hpp"
#include "agentrl/rng.hpp"

namespace agentrl {

enum class EnvKind : std::uint8_t { GraphQa, GridHouse, SetQuery };

std::string_view to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view s);

struct EnvConfig {
  EnvKind kind = EnvKind::GraphQa;
  std::uint32_t entity_count = 12;   // graphqa
  std::uint32_t location_count = 6;  // gridhouse
  std::uint32_t table_rows = 10;     // setquery
  std::uint32_t step_limit = 5;
  double expert_error_rate = 0.25;
  std::uint64_t seed = 0;

  // Throws ConfigError for out-of-range values.
  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

// Defaults for one environment kind, including its step limit (5 / 20 / 10).
EnvConfig default_env_config(EnvKind kind);
std::uint32_t default_step_limit(EnvKind kind);

// key=value text manifest pinning one world.
std::string write_env_manifest(const EnvConfig& config);
EnvConfig parse_env_manifest(std::string_view text);

struct GraphSpec {
  std::uint32_t topic = 0;
  std::uint32_t first_relation = 0;
  std::uint32_t second_relation = 0;
  bool second_ambiguous = false;
  // targets[entity][relation] -> sorted entity ids
  std::vector<std::vector<std::vector<std::uint32_t>>> targets;
  std::vector<std::uint32_t> gold;  // sorted entity ids
};

struct HouseSpec {
  std::uint32_t bowl_at = 0;
  std::uint32_t lamp_at = 0;
  std::uint32_t mug_at = 0;
  std::uint32_t book_at = 0;
  std::uint32_t clue_at = 0;  // location named in the task text, right most of the time
};

struct QuerySpec {
  std::vector<std::vector<bool>> attrs;  // attrs[row][filter]
  std::vector<std::uint32_t> sort_key;   // distinct per row
  std::uint32_t gold_filter = 0;
  std::uint32_t gold_order = 0;  // 0 ascending, 1 descending
  bool filter_ambiguous = false;
};

using HiddenSpec = std::variant<GraphSpec, HouseSpec, QuerySpec>;

class Environment;

// One task. The ground truth is private to the environments.
class TaskInstance {
 public:
  TaskInstance(std::string task_id, TokenSeq task_tokens, HiddenSpec hidden)
      : task_id(std::move(task_id)), task_tokens(std::move(task_tokens)), hidden_(std::move(hidden)) {}

  std::string task_id;
  TokenSeq task_tokens;

 private:
  friend class Environment;
  HiddenSpec hidden_;
};

struct ActionEntry {
  ActionKind kind;
  TokenSeq args;
  TokenSeq thought;

  bool operator==(const ActionEntry&) const = default;
};

// Fixed per environment: slot j always means the same action, so a linear
// policy's per-slot weights carry over between states and tasks.
struct ActionTable {
  std::vector<ActionEntry> entries;

  std::size_t size() const { return entries.size(); }
  AgentAction make(std::uint32_t index) const;
};

struct StepResult {
  TokenSeq observation;
  StateText next_state;
  bool done = false;
  std::optional<double> reward_if_done;
  Termination terminated_by = Termination::StepLimit;  // meaningful when done
};

class Environment {
 public:
  virtual ~Environment() = default;

  const EnvConfig& config() const { return config_; }
  EnvKind kind() const { return config_.kind; }
  const Vocab& vocab() const { return vocab_; }
  std::uint32_t step_limit() const { return config_.step_limit; }

  // Reflection alphabet: token ids a reflector may emit, in index order.
  const std::vector<TokenId>& reflection_alphabet() const { return alphabet_; }
  std::uint32_t reflection_index(TokenId token) const;
  std::size_t action_slots() const { return table_.size(); }

  virtual std::vector<TaskInstance> generate_tasks(std::size_t count, Rng& rng,
                                                   std::string_view id_prefix = "task") const = 0;

  StateText reset(const TaskInstance& task, std::span<const Reflection> reflections) const;
  const ActionTable& legal_actions(const TaskInstance& task, const StateText& state) const;
  StepResult step(const TaskInstance& task, const StateText& state, const AgentAction& action) const;
  double final_reward(const TaskInstance& task, const Trajectory& trajectory) const;
  bool evaluator_pass(const TaskInstance& task, const Trajectory& trajectory) const;
  AgentAction expert_action(const TaskInstance& task, const StateText& state, double error_rate,
                            Rng& rng) const;
  Reflection expert_reflection(const TaskInstance& task, const Trajectory& failed) const;

  // Index of the oracle-optimal action after the given action prefix.
  std::uint32_t optimal_action(const TaskInstance& task, std::span<const std::uint32_t> prior) const {
    return optimal_after(task, prior);
  }

  // Action ids recorded in a history token sequence, in order.
  std::vector<std::uint32_t> parse_actions(const TokenSeq& history) const;

 protected:
  explicit Environment(EnvConfig config);

  struct Transition {
    TokenSeq observation;
    bool submitted = false;
  };

  // Called by derived constructors after vocab_, table_ and alphabet_ are set.
  void finalize();

  static const HiddenSpec& hidden(const TaskInstance& task) { return task.hidden_; }

  virtual Transition transition(const TaskInstance& task, std::span<const std::uint32_t> prior,
                                std::uint32_t action) const = 0;
  virtual double score(const TaskInstance& task, std::span<const std::uint32_t> actions,
                       bool submitted) const = 0;
  virtual bool passes(const TaskInstance& task, std::span<const std::uint32_t> actions,
                      bool submitted) const = 0;
  virtual std::uint32_t optimal_after(const TaskInstance& task,
                                      std::span<const std::uint32_t> prior) const = 0;
  // Action the scripted expert means to take. The default is the oracle;
  // environments whose task text can be ambiguous override it so that the
  // expert acts only on the text and its reflections, guessing when needed.
  virtual std::uint32_t expert_intent(const TaskInstance& task, const StateText& state,
                                      std::span<const std::uint32_t> prior, Rng& rng) const {
    (void)state;
    (void)rng;
    return optimal_after(task, prior);
  }
  // Corrective hint for the first departure from the oracle.
  virtual TokenId hint_for(const TaskInstance& task, std::span<const std::uint32_t> actions) const = 0;

  // Index of the first action that differs from the oracle, if any.
  std::optional<std::size_t> first_mistake(const TaskInstance& task,
                                           std::span<const std::uint32_t> actions) const;

  EnvConfig config_;
  Vocab vocab_;
  ActionTable table_;
  std::vector<TokenId> alphabet_;

 private:
  std::vector<bool> is_kind_token_;
  std::vector<bool> is_arg_token_;
  std::unordered_map<std::string, std::uint32_t> entry_by_key_;
  std::unordered_map<TokenId, std::uint32_t> alphabet_index_;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& config);

// Picks the action index for a state; returns (index, behavior log-prob).
using ActionChooser =
    std::function<std::pair<std::uint32_t, double>(const StateText&, const ActionTable&)>;

// Plays one trial from reset to termination.
Trajectory play_trial(const Environment& env, const TaskInstance& task,
                      std::span<const Reflection> reflections, std::uint32_t trial_index,
                      const ActionChooser& choose);

}  // namespace agentrl
