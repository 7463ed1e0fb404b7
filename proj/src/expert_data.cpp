#include "agentrl/expert_data.hpp"

#include <istream>
#include <ostream>
#include <set>

#include "agentrl/error.hpp"
#include "agentrl/text_io.hpp"

namespace agentrl {

std::vector<TrialSequence> collect_expert_trials(const Environment& env,
                                                 std::span<const TaskInstance> tasks, std::uint32_t K,
                                                 double error_rate, std::uint64_t seed) {
  if (K < 1) throw ContractViolation("K must be >= 1");
  std::vector<TrialSequence> out;
  out.reserve(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const TaskInstance& task = tasks[t];
    Rng rng(derive_seed(seed, t, 0x657870657274ULL));
    std::vector<Trajectory> trials;
    std::vector<Reflection> reflections;
    std::optional<std::uint32_t> solved_at;
    for (std::uint32_t k = 0; k < K; ++k) {
      auto expert = [&](const StateText& state, const ActionTable&) {
        return std::pair{env.expert_action(task, state, error_rate, rng).action_id, 0.0};
      };
      trials.push_back(play_trial(env, task, reflections, k, expert));
      if (env.evaluator_pass(task, trials.back())) {
        solved_at = k;
        break;
      }
      if (k + 1 < K) reflections.push_back(env.expert_reflection(task, trials.back()));
    }
    out.emplace_back(task.task_id, std::move(trials), std::move(reflections), solved_at);
  }
  return out;
}

IlDatasets build_il_datasets(const Environment& env, std::span<const TaskInstance> tasks,
                             std::span<const TrialSequence> sequences, std::size_t window) {
  std::unordered_map<std::string_view, const TaskInstance*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.task_id, &t);
  const FeatureSpace space{env.vocab().size(), window, false};
  const auto table_size = static_cast<std::uint32_t>(env.action_slots());
  const auto alphabet_size = static_cast<std::uint32_t>(env.reflection_alphabet().size());

  IlDatasets data;
  for (const auto& seq : sequences) {
    auto it = by_id.find(seq.task_id());
    if (it == by_id.end()) throw DataError("sequence for unknown task " + seq.task_id());
    const TaskInstance& task = *it->second;
    const auto& trials = seq.trials();
    for (const auto& traj : trials) {
      if (!env.evaluator_pass(task, traj)) continue;
      for (const auto& step : traj.steps) {
        data.planner.push_back({task.task_id, step.state, step.action.action_id, table_size});
      }
    }
    const auto& refl = seq.reflections();
    for (std::size_t k = 0; k < refl.size(); ++k) {
      const double improvement = trials[k + 1].terminal_reward - trials[k].terminal_reward;
      if (!(improvement > 0.0)) continue;
      if (refl[k].tokens.size() != 1) throw ContractViolation("reflections hold exactly one token");
      data.reflector.push_back({task.task_id, featurize_trajectory(trials[k], env.vocab(), space),
                                env.reflection_index(refl[k].tokens.front()), alphabet_size,
                                improvement});
    }
  }
  if (data.planner.empty()) data.warnings.push_back("planner IL dataset is empty: no expert trial passed the evaluator");
  if (data.reflector.empty()) data.warnings.push_back("reflector IL dataset is empty: no reflection improved the next trial");
  return data;
}

DatasetStats dataset_stats(std::string_view env, std::span<const PlannerExample> planner,
                           std::span<const ReflectorExample> reflector) {
  DatasetStats s;
  s.env = std::string(env);
  s.planner_examples = planner.size();
  s.reflector_examples = reflector.size();
  std::set<std::string_view> tasks;
  // A trajectory starts wherever the history is empty.
  for (const auto& p : planner) {
    if (p.state.history_tokens.empty()) ++s.planner_trajectories;
    tasks.insert(p.task_id);
  }
  for (const auto& r : reflector) tasks.insert(r.task_id);
  s.tasks = tasks.size();
  return s;
}

void write_datasets(std::ostream& out, const DatasetManifest& m, const IlDatasets& data) {
  out << "# manifest env_kind=" << to_string(m.env.kind) << " entity_count=" << m.env.entity_count
      << " location_count=" << m.env.location_count << " table_rows=" << m.env.table_rows
      << " step_limit=" << m.env.step_limit << " env_seed=" << m.env.seed << " seed=" << m.seed
      << " error_rate=" << text::format_double(m.error_rate) << " K=" << m.K << '\n';
  for (const auto& p : data.planner) {
    out << "P\t" << p.task_id << '\t' << encode_state(p.state) << '\t' << p.action_id << '\t'
        << p.table_size << '\n';
  }
  for (const auto& r : data.reflector) {
    out << "R\t" << r.task_id << '\t' << text::join_ids(r.traj_features.indices) << '\t'
        << r.reflection_index << '\t' << r.alphabet_size << '\t'
        << text::format_double(r.observed_improvement) << '\n';
  }
}

namespace {

DatasetManifest parse_manifest(std::string_view line) {
  DatasetManifest m;
  auto fields = text::split(line, ' ');
  if (fields.size() < 2 || fields[0] != "#" || fields[1] != "manifest") {
    throw DataError("dataset file must start with a manifest line");
  }
  for (std::size_t i = 2; i < fields.size(); ++i) {
    auto eq = fields[i].find('=');
    if (eq == std::string_view::npos) throw DataError("manifest field without '='");
    auto key = fields[i].substr(0, eq);
    auto value = fields[i].substr(eq + 1);
    if (key == "env_kind") {
      try {
        m.env.kind = parse_env_kind(value);
      } catch (const ConfigError& e) {
        throw DataError(e.what());
      }
    } else if (key == "entity_count") {
      m.env.entity_count = static_cast<std::uint32_t>(text::parse_uint(value));
    } else if (key == "location_count") {
      m.env.location_count = static_cast<std::uint32_t>(text::parse_uint(value));
    } else if (key == "table_rows") {
      m.env.table_rows = static_cast<std::uint32_t>(text::parse_uint(value));
    } else if (key == "step_limit") {
      m.env.step_limit = static_cast<std::uint32_t>(text::parse_uint(value));
    } else if (key == "env_seed") {
      m.env.seed = text::parse_uint(value);
    } else if (key == "seed") {
      m.seed = text::parse_uint(value);
    } else if (key == "error_rate") {
      m.error_rate = text::parse_double(value);
    } else if (key == "K") {
      m.K = static_cast<std::uint32_t>(text::parse_uint(value));
    } else {
      throw DataError("unknown manifest field '" + std::string(key) + "'");
    }
  }
  m.env.expert_error_rate = m.error_rate;
  return m;
}

}  // namespace

IlDatasets read_datasets(std::istream& in, DatasetManifest* manifest) {
  IlDatasets data;
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset file is empty");
  DatasetManifest m = parse_manifest(line);
  if (manifest) *manifest = m;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = text::split(line, '\t');
    try {
      if (f[0] == "P") {
        if (f.size() != 5) throw DataError("planner record needs 5 fields");
        PlannerExample p{std::string(f[1]), decode_state(f[2]),
                         static_cast<std::uint32_t>(text::parse_uint(f[3])),
                         static_cast<std::uint32_t>(text::parse_uint(f[4]))};
        if (p.action_id >= p.table_size) throw DataError("action_id outside table");
        data.planner.push_back(std::move(p));
      } else if (f[0] == "R") {
        if (f.size() != 6) throw DataError("reflector record needs 6 fields");
        ReflectorExample r{std::string(f[1]), FeatureVector{text::parse_ids(f[2])},
                           static_cast<std::uint32_t>(text::parse_uint(f[3])),
                           static_cast<std::uint32_t>(text::parse_uint(f[4])),
                           text::parse_double(f[5])};
        if (r.reflection_index >= r.alphabet_size) throw DataError("reflection index outside alphabet");
        if (!(r.observed_improvement > 0.0)) throw DataError("reflector example without improvement");
        data.reflector.push_back(std::move(r));
      } else {
        throw DataError("unknown record type '" + std::string(f[0]) + "'");
      }
    } catch (const DataError& e) {
      throw DataError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return data;
}

}  // namespace agentrl
