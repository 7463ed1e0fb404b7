#pragma once

// Imitation-learning data: scripted-expert rollouts, evaluator filtering and
// the planner / reflector datasets built from them.

#include <iosfwd>
#include <string>
#include <vector>

#include "agentrl/envs.hpp"
#include "agentrl/policy.hpp"

namespace agentrl {

struct PlannerExample {
  std::string task_id;
  StateText state;
  std::uint32_t action_id = 0;
  std::uint32_t table_size = 0;

  bool operator==(const PlannerExample&) const = default;
};

struct ReflectorExample {
  std::string task_id;
  FeatureVector traj_features;  // built without the shared-mode role flag
  std::uint32_t reflection_index = 0;
  std::uint32_t alphabet_size = 0;
  double observed_improvement = 0.0;

  bool operator==(const ReflectorExample&) const = default;
};

struct IlDatasets {
  std::vector<PlannerExample> planner;
  std::vector<ReflectorExample> reflector;
  std::vector<std::string> warnings;  // data-starvation notes; collection still proceeds
};

// Up to K expert trials per task with error injection; an expert reflection
// follows each failed trial; stops at the first evaluator pass.
std::vector<TrialSequence> collect_expert_trials(const Environment& env,
                                                 std::span<const TaskInstance> tasks, std::uint32_t K,
                                                 double error_rate, std::uint64_t seed);

// Planner set: every step of every evaluator-passing trial. Reflector set:
// every reflection followed by a strict reward improvement.
IlDatasets build_il_datasets(const Environment& env, std::span<const TaskInstance> tasks,
                             std::span<const TrialSequence> sequences, std::size_t window = 16);

struct DatasetStats {
  std::string env;
  std::size_t planner_examples = 0;
  std::size_t planner_trajectories = 0;
  std::size_t reflector_examples = 0;
  std::size_t tasks = 0;
};

DatasetStats dataset_stats(std::string_view env, std::span<const PlannerExample> planner,
                           std::span<const ReflectorExample> reflector);

struct DatasetManifest {
  EnvConfig env;
  std::uint64_t seed = 0;
  double error_rate = 0.0;
  std::uint32_t K = 0;
};

// Line-delimited records after one manifest line:
//   # manifest env_kind=... seed=... error_rate=... K=...
//   P <tab> task_id <tab> task|reflection|history <tab> action_id <tab> table_size
//   R <tab> task_id <tab> feature indices <tab> reflection_index <tab> alphabet_size <tab> improvement
void write_datasets(std::ostream& out, const DatasetManifest& manifest, const IlDatasets& data);
IlDatasets read_datasets(std::istream& in, DatasetManifest* manifest = nullptr);

}  // namespace agentrl
