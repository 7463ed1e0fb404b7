#include <algorithm>
#include <sstream>

#include "agentrl/envs.hpp"
#include "agentrl/error.hpp"
#include "agentrl/text_io.hpp"
#include "envs_internal.hpp"

namespace agentrl {

namespace {

std::string entry_key(TokenId kind_token, std::span<const TokenId> args) {
  std::string key = std::to_string(kind_token);
  for (TokenId a : args) key += ',' + std::to_string(a);
  return key;
}

}  // namespace

std::string_view to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::GraphQa: return "graphqa";
    case EnvKind::GridHouse: return "gridhouse";
    case EnvKind::SetQuery: return "setquery";
  }
  return "?";
}

EnvKind parse_env_kind(std::string_view s) {
  if (s == "graphqa") return EnvKind::GraphQa;
  if (s == "gridhouse") return EnvKind::GridHouse;
  if (s == "setquery") return EnvKind::SetQuery;
  throw ConfigError("unknown env kind '" + std::string(s) + "'");
}

std::uint32_t default_step_limit(EnvKind kind) {
  switch (kind) {
    case EnvKind::GraphQa: return 5;
    case EnvKind::GridHouse: return 20;
    case EnvKind::SetQuery: return 10;
  }
  return 5;
}

EnvConfig default_env_config(EnvKind kind) {
  EnvConfig c;
  c.kind = kind;
  c.step_limit = default_step_limit(kind);
  return c;
}

void EnvConfig::validate() const {
  if (step_limit < 1) throw ConfigError("step_limit must be >= 1");
  if (!(expert_error_rate >= 0.0 && expert_error_rate < 1.0)) {
    throw ConfigError("expert_error_rate must lie in [0, 1)");
  }
  switch (kind) {
    case EnvKind::GraphQa:
      if (entity_count < 6 || entity_count > 200) throw ConfigError("entity_count must lie in [6, 200]");
      if (step_limit < 3) throw ConfigError("graphqa needs step_limit >= 3 to be solvable");
      break;
    case EnvKind::GridHouse:
      if (location_count < 3 || location_count > 64) {
        throw ConfigError("location_count must lie in [3, 64]");
      }
      if (step_limit < 4) throw ConfigError("gridhouse needs step_limit >= 4 to be solvable");
      break;
    case EnvKind::SetQuery:
      if (table_rows < 4 || table_rows > 500) throw ConfigError("table_rows must lie in [4, 500]");
      if (step_limit < 2) throw ConfigError("setquery needs step_limit >= 2 to be solvable");
      break;
  }
}

std::string write_env_manifest(const EnvConfig& c) {
  std::ostringstream out;
  out << "env_kind=" << to_string(c.kind) << '\n'
      << "entity_count=" << c.entity_count << '\n'
      << "location_count=" << c.location_count << '\n'
      << "table_rows=" << c.table_rows << '\n'
      << "step_limit=" << c.step_limit << '\n'
      << "expert_error_rate=" << text::format_double(c.expert_error_rate) << '\n'
      << "seed=" << c.seed << '\n';
  return out.str();
}

EnvConfig parse_env_manifest(std::string_view content) {
  EnvConfig c;
  bool have_limit = false;
  for (auto raw : text::split(content, '\n')) {
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("manifest line without '='");
    auto key = text::trim(line.substr(0, eq));
    auto value = text::trim(line.substr(eq + 1));
    try {
      if (key == "env_kind") {
        c.kind = parse_env_kind(value);
      } else if (key == "entity_count") {
        c.entity_count = static_cast<std::uint32_t>(text::parse_uint(value));
      } else if (key == "location_count") {
        c.location_count = static_cast<std::uint32_t>(text::parse_uint(value));
      } else if (key == "table_rows") {
        c.table_rows = static_cast<std::uint32_t>(text::parse_uint(value));
      } else if (key == "step_limit") {
        c.step_limit = static_cast<std::uint32_t>(text::parse_uint(value));
        have_limit = true;
      } else if (key == "expert_error_rate") {
        c.expert_error_rate = text::parse_double(value);
      } else if (key == "seed") {
        c.seed = text::parse_uint(value);
      } else {
        throw ConfigError("unknown manifest key '" + std::string(key) + "'");
      }
    } catch (const DataError& e) {
      throw ConfigError("manifest key '" + std::string(key) + "': " + e.what());
    }
  }
  if (!have_limit) c.step_limit = default_step_limit(c.kind);
  c.validate();
  return c;
}

AgentAction ActionTable::make(std::uint32_t index) const {
  if (index >= entries.size()) throw ContractViolation("action index outside the action table");
  const auto& e = entries[index];
  return AgentAction{e.thought, e.kind, e.args, index};
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) { config_.validate(); }

void Environment::finalize() {
  is_kind_token_.assign(vocab_.size(), false);
  is_arg_token_.assign(vocab_.size(), false);
  for (std::uint32_t i = 0; i < table_.size(); ++i) {
    const auto& e = table_.entries[i];
    const TokenId kind_token = vocab_.id(to_string(e.kind));
    is_kind_token_[kind_token] = true;
    for (TokenId a : e.args) is_arg_token_[a] = true;
    entry_by_key_.emplace(entry_key(kind_token, e.args), i);
  }
  for (std::uint32_t i = 0; i < alphabet_.size(); ++i) alphabet_index_.emplace(alphabet_[i], i);
}

std::uint32_t Environment::reflection_index(TokenId token) const {
  auto it = alphabet_index_.find(token);
  if (it == alphabet_index_.end()) {
    throw InvalidTokenError("token " + std::to_string(token) + " is not in the reflection alphabet");
  }
  return it->second;
}

std::vector<std::uint32_t> Environment::parse_actions(const TokenSeq& history) const {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const TokenId t = history[i];
    if (t >= is_kind_token_.size() || !is_kind_token_[t]) continue;
    std::size_t j = i + 1;
    while (j < history.size() && history[j] < is_arg_token_.size() && is_arg_token_[history[j]]) ++j;
    auto it = entry_by_key_.find(
        entry_key(t, std::span<const TokenId>(history.data() + i + 1, j - i - 1)));
    if (it == entry_by_key_.end()) throw ContractViolation("history holds an unknown action");
    out.push_back(it->second);
    i = j - 1;
  }
  return out;
}

StateText Environment::reset(const TaskInstance& task, std::span<const Reflection> reflections) const {
  for (const auto& r : reflections) {
    for (TokenId t : r.tokens) (void)reflection_index(t);
  }
  StateText base{task.task_tokens, {}, {}};
  return append_reflections(base, reflections, vocab_);
}

const ActionTable& Environment::legal_actions(const TaskInstance&, const StateText&) const {
  return table_;
}

StepResult Environment::step(const TaskInstance& task, const StateText& state,
                             const AgentAction& action) const {
  if (action.action_id >= table_.size()) throw ContractViolation("illegal action id");
  const auto& entry = table_.entries[action.action_id];
  if (entry.kind != action.kind || entry.args != action.args) {
    throw ContractViolation("action does not match its action-table entry");
  }
  std::vector<std::uint32_t> actions = parse_actions(state.history_tokens);
  if (actions.size() >= config_.step_limit) throw ContractViolation("trial already hit its step limit");

  Transition t = transition(task, actions, action.action_id);
  actions.push_back(action.action_id);

  StepResult out;
  out.observation = t.observation;
  out.next_state = state;
  auto& h = out.next_state.history_tokens;
  h.insert(h.end(), action.thought.begin(), action.thought.end());
  h.push_back(vocab_.id(to_string(action.kind)));
  h.insert(h.end(), action.args.begin(), action.args.end());
  h.insert(h.end(), t.observation.begin(), t.observation.end());

  out.done = t.submitted || actions.size() >= config_.step_limit;
  if (out.done) {
    out.terminated_by = t.submitted ? Termination::Submitted : Termination::StepLimit;
    out.reward_if_done = score(task, actions, t.submitted);
  }
  return out;
}

namespace {

std::vector<std::uint32_t> action_ids(const Trajectory& t) {
  std::vector<std::uint32_t> ids;
  ids.reserve(t.steps.size());
  for (const auto& s : t.steps) ids.push_back(s.action.action_id);
  return ids;
}

}  // namespace

double Environment::final_reward(const TaskInstance& task, const Trajectory& trajectory) const {
  return score(task, action_ids(trajectory), trajectory.terminated_by == Termination::Submitted);
}

bool Environment::evaluator_pass(const TaskInstance& task, const Trajectory& trajectory) const {
  return passes(task, action_ids(trajectory), trajectory.terminated_by == Termination::Submitted);
}

AgentAction Environment::expert_action(const TaskInstance& task, const StateText& state,
                                       double error_rate, Rng& rng) const {
  const auto prior = parse_actions(state.history_tokens);
  std::uint32_t index = expert_intent(task, state, prior, rng);
  const auto n = static_cast<std::uint32_t>(table_.size());
  if (rng.uniform() < error_rate && n > 1) {
    auto k = static_cast<std::uint32_t>(rng.below(n - 1));
    index = k < index ? k : k + 1;
  }
  return table_.make(index);
}

std::optional<std::size_t> Environment::first_mistake(const TaskInstance& task,
                                                      std::span<const std::uint32_t> actions) const {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] != optimal_after(task, actions.first(i))) return i;
  }
  return std::nullopt;
}

Reflection Environment::expert_reflection(const TaskInstance& task, const Trajectory& failed) const {
  if (failed.terminal_reward >= 1.0) {
    throw ContractViolation("expert_reflection called on a successful trajectory");
  }
  const TokenId hint = hint_for(task, action_ids(failed));
  return Reflection{{hint}, 0.0, failed.trial_index};
}

Trajectory play_trial(const Environment& env, const TaskInstance& task,
                      std::span<const Reflection> reflections, std::uint32_t trial_index,
                      const ActionChooser& choose) {
  Trajectory traj;
  traj.task_id = task.task_id;
  traj.trial_index = trial_index;
  StateText state = env.reset(task, reflections);
  while (true) {
    const ActionTable& table = env.legal_actions(task, state);
    auto [index, logprob] = choose(state, table);
    AgentAction action = table.make(index);
    StepResult r = env.step(task, state, action);
    traj.steps.push_back(Step{std::move(state), std::move(action), logprob, r.observation});
    state = std::move(r.next_state);
    if (r.done) {
      traj.terminal_reward = *r.reward_if_done;
      traj.terminated_by = r.terminated_by;
      return traj;
    }
  }
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config) {
  switch (config.kind) {
    case EnvKind::GraphQa: return internal::make_graphqa(config);
    case EnvKind::GridHouse: return internal::make_gridhouse(config);
    case EnvKind::SetQuery: return internal::make_setquery(config);
  }
  throw ConfigError("unknown environment kind");
}

}  // namespace agentrl
