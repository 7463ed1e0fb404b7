#pragma once

// Experiment runner: flat key = value configs and the five phase commands
// (collect, train-il, train-rl, evaluate, report). Every command writes into
// the run's output directory:
//   config.resolved         fully resolved config, parseable by parse_config
//   manifest.<command>.txt  seed and content hashes of the config and inputs
//   datasets.txt, dataset_stats.csv, expert_trials.log        (collect)
//   *_il.ckpt, il_history.csv                                  (train-il)
//   *_rl.ckpt, rl_history.csv, rl_trace.csv                    (train-rl)
//   metrics_<ckpt>.csv, rewards_<ckpt>.csv, trajectories_<ckpt>.log, reflections_<ckpt>.csv
//                                                              (evaluate)

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "agentrl/envs.hpp"
#include "agentrl/training.hpp"

namespace agentrl {

struct ExperimentConfig {
  EnvConfig env;
  TrainingConfig training;
  std::size_t train_tasks = 200;
  std::size_t eval_tasks = 100;
  std::string output_dir = "runs/default";
  std::string run_name;  // defaults to the last component of output_dir

  // Single seed for the world, the tasks and training.
  std::uint64_t seed() const { return training.seed; }
  void set_seed(std::uint64_t seed);
  std::string resolved_run_name() const;

  // Throws ConfigError.
  void validate() const;
};

// Errors (unknown key, type mismatch, constraint violation) are ConfigError
// messages of the form "<source>:<line>: <key>: <reason>".
ExperimentConfig parse_config_text(std::string_view text, std::string_view source = "config");
ExperimentConfig parse_config(const std::string& path);
// Inverse of parse_config_text: every key, one per line.
std::string resolved_config_text(const ExperimentConfig& config);

struct TaskSplits {
  std::vector<TaskInstance> train;
  std::vector<TaskInstance> eval;
};

// Train tasks then eval tasks, drawn from one stream keyed by the seed.
TaskSplits make_task_splits(const Environment& env, const ExperimentConfig& config);

enum class CheckpointKind : std::uint8_t { Il, Rl };
CheckpointKind parse_checkpoint_kind(std::string_view s);
std::string_view to_string(CheckpointKind kind);

AgentParams load_agent(const std::string& dir, CheckpointKind kind, const Environment& env,
                       const ExperimentConfig& config);
// shared_<kind>.ckpt, or planner_<kind>.ckpt and reflector_<kind>.ckpt.
std::vector<std::string> checkpoint_paths(const std::string& dir, CheckpointKind kind, bool shared);
std::vector<std::string> save_agent(const std::string& dir, CheckpointKind kind, const AgentParams& agent);

std::string metrics_csv_header();
std::string metrics_csv_row(std::string_view run, std::size_t task_count, std::uint32_t K,
                            const AggregateMetrics& m);

// Long format: run,task_id,trial,reward (trials actually run).
std::string rewards_csv(std::string_view run, const EvalResult& result);
// Reads back a rewards CSV into per-task reward lists, in file order.
std::vector<std::vector<double>> parse_rewards_csv(std::string_view text);

struct CommandOutput {
  std::vector<std::string> files;     // paths written
  std::vector<std::string> warnings;  // non-fatal notes for stderr
};

CommandOutput cmd_collect(const ExperimentConfig& config);
CommandOutput cmd_train_il(const ExperimentConfig& config);
CommandOutput cmd_train_rl(const ExperimentConfig& config);
CommandOutput cmd_evaluate(const ExperimentConfig& config, CheckpointKind checkpoint);
// Joins each run's metrics line (metrics_rl.csv, else metrics_il.csv) into
// comparison.csv and a lambda_sweep.csv keyed by lambda_planner, both in
// config.output_dir.
CommandOutput cmd_report(const ExperimentConfig& config, const std::vector<std::string>& run_dirs);

}  // namespace agentrl
