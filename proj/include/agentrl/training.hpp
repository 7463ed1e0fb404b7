#pragma once

// Imitation learning (cross-entropy on expert data) and the off-policy joint
// policy gradient: clipped importance weights, shaped reflector rewards, and
// an IL regularizer on both policies.

#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agentrl/envs.hpp"
#include "agentrl/expert_data.hpp"
#include "agentrl/metrics.hpp"
#include "agentrl/policy.hpp"

namespace agentrl {

struct TrainingConfig {
  std::uint32_t K = 10;
  double lambda_planner = 1.0;
  double lambda_reflector = 1.0;
  double alpha = 1.0;
  double epsilon = 0.2;
  double learning_rate = 0.1;
  std::uint32_t il_epochs = 3;
  std::uint32_t rl_iterations = 10;
  std::uint32_t rl_epochs_per_iteration = 3;
  std::size_t buffer_capacity = 10000;
  // RL minibatch size and the size of each IL regularizer sample.
  std::size_t batch_size = 32;
  // Minibatch size of the IL phase.
  std::size_t il_batch_size = 1;
  double explore_temperature = 1.0;
  double eval_temperature = 0.0;
  bool shared_params = false;
  std::uint64_t seed = 0;

  // A frozen component keeps its random initialization through both phases.
  bool freeze_planner = false;
  bool freeze_reflector = false;
  // No reflections are produced; every trial starts from the bare task.
  bool disable_reflection = false;
  std::size_t history_window = 16;
  double init_scale = 0.01;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// One classification example for either policy, already featurized.
struct IlRecord {
  FeatureVector features;
  std::uint32_t label = 0;
  std::uint32_t table_size = 0;
};

struct PlannerRecord {
  FeatureVector features;
  std::uint32_t action_id = 0;
  std::uint32_t table_size = 0;
  double behavior_logprob = 0.0;
  double trajectory_return = 0.0;  // R_pi: the trial's terminal reward
};

struct ReflectorRecord {
  FeatureVector traj_features;
  std::uint32_t reflection_index = 0;
  std::uint32_t alphabet_size = 0;
  double behavior_logprob = 0.0;
  double shaped_reward = 0.0;  // R_mu, may be negative
};

template <class Record>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(Record r) {
    if (capacity_ == 0) return;
    if (records_.size() == capacity_) records_.pop_front();
    records_.push_back(std::move(r));
    ++inserted_;
  }

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  const std::deque<Record>& records() const { return records_; }
  const Record& operator[](std::size_t i) const { return records_[i]; }

 private:
  std::size_t capacity_;
  std::deque<Record> records_;
  std::uint64_t inserted_ = 0;
};

struct ReplayBuffers {
  ReplayBuffer<PlannerRecord> planner;
  ReplayBuffer<ReflectorRecord> reflector;

  explicit ReplayBuffers(std::size_t capacity) : planner(capacity), reflector(capacity) {}
};

// Planner and reflector parameters. In shared mode `planner` holds the single
// vector and the reflector's slots follow the planner's.
struct AgentParams {
  ParamVector planner;
  ParamVector reflector;
  bool shared = false;
  std::size_t planner_slots = 0;
  std::size_t reflector_slots = 0;

  static AgentParams init(const Environment& env, const FeatureSpace& space, bool shared,
                          std::uint64_t seed, double scale);

  const ParamVector& reflector_params() const { return shared ? planner : reflector; }
  ParamVector& reflector_params() { return shared ? planner : reflector; }
  std::size_t reflector_offset() const { return shared ? planner_slots : 0; }
};

std::vector<IlRecord> to_il_records(std::span<const PlannerExample> examples, const FeatureSpace& space);
// Adds the role flag when `space.shared`.
std::vector<IlRecord> to_il_records(std::span<const ReflectorExample> examples, const FeatureSpace& space);

// Mean cross-entropy of the batch and its gradient (dense, ParamVector layout).
double il_loss_and_grad(const ParamVector& params, std::span<const IlRecord> batch,
                        std::size_t slot_offset, std::vector<double>* grad);

// params -= lr * mean gradient. Returns the loss before the update.
double il_step(ParamVector& params, std::span<const IlRecord> batch, double learning_rate,
               std::size_t slot_offset = 0);

struct ShapedRewards {
  std::vector<double> planner;    // R_pi[k] = r_k
  std::vector<double> reflector;  // R_mu[k] = alpha * (r_{k+1} - r_k)
};
ShapedRewards shape_rewards(std::span<const double> trial_rewards, double alpha);

double importance_weight(double new_logprob, double behavior_logprob, double epsilon);

struct RlGradient {
  std::vector<double> grad;  // mean over the batch
  double surrogate = 0.0;    // mean of -w * R
};

// Clipped-surrogate gradient. Inside [1-eps, 1+eps] a record contributes
// -w * R * grad log pi. Outside it, a record whose descent step would push the
// ratio further out contributes nothing; one whose step pulls it back
// contributes with the clipped weight.
RlGradient rl_grad_planner(const ParamVector& params, std::span<const PlannerRecord> batch,
                           double epsilon, std::size_t slot_offset = 0);
RlGradient rl_grad_reflector(const ParamVector& params, std::span<const ReflectorRecord> batch,
                             double epsilon, std::size_t slot_offset = 0);

struct UpdateTrace {
  std::vector<double> rl_grad;
  std::vector<double> il_grad;  // unscaled; all zero when the IL batch is empty
  std::vector<double> grad;     // rl_grad + lambda * il_grad
  double rl_surrogate = 0.0;
  double il_loss = 0.0;
  double il_regularizer_norm = 0.0;  // L2 norm of lambda * il_grad
};

// params -= lr * (rl_grad + lambda * il_grad).
UpdateTrace augmented_update(ParamVector& params, std::span<const PlannerRecord> rl_batch,
                             std::span<const IlRecord> il_batch, double lambda, double epsilon,
                             double learning_rate, std::size_t slot_offset = 0);
UpdateTrace augmented_update(ParamVector& params, std::span<const ReflectorRecord> rl_batch,
                             std::span<const IlRecord> il_batch, double lambda, double epsilon,
                             double learning_rate, std::size_t slot_offset = 0);

struct RolloutOptions {
  std::uint32_t K = 10;
  double temperature = 0.0;
  bool reflect = true;
  FeatureSpace space;
};

// Up to K trials with the learned planner and reflector. Behavior log-probs
// are recorded at temperature 1 whatever the sampling temperature.
TrialSequence rollout(const AgentParams& agent, const Environment& env, const TaskInstance& task,
                      const RolloutOptions& options, Rng& rng);

// Every step becomes a PlannerRecord carrying its trial's reward; every
// reflection a ReflectorRecord carrying its shaped reward.
void push_sequence(ReplayBuffers& buffers, const TrialSequence& seq, const Environment& env,
                   const FeatureSpace& space, double alpha);

struct EvalResult {
  AggregateMetrics metrics;                  // x100
  std::vector<std::vector<double>> rewards;  // per task, one entry per trial actually run
  std::vector<TrialSequence> sequences;
};

EvalResult evaluate_agent(const AgentParams& agent, const Environment& env,
                          std::span<const TaskInstance> tasks, const RolloutOptions& options,
                          std::uint64_t seed);

struct HistoryRow {
  std::string phase;  // "init", "il" or "rl"
  std::uint32_t iteration = 0;
  double planner_loss = 0.0;
  double reflector_loss = 0.0;
  AggregateMetrics eval;
};

std::string history_csv_header();
std::string history_csv_row(const HistoryRow& row);

// Trains both policies on fixed IL datasets for config.il_epochs.
// Returns (mean planner loss, mean reflector loss) of the last epoch.
std::pair<double, double> train_il(AgentParams& agent, const std::vector<IlRecord>& planner_data,
                                   const std::vector<IlRecord>& reflector_data,
                                   const TrainingConfig& config, Rng& rng);

struct RlIterationStats {
  double planner_loss = 0.0;
  double reflector_loss = 0.0;
  double mean_il_regularizer_norm = 0.0;
};

// One RL iteration: explore over train_tasks, push into the buffers, then
// rl_epochs_per_iteration passes of augmented updates.
RlIterationStats rl_iteration(AgentParams& agent, ReplayBuffers& buffers, const Environment& env,
                              std::span<const TaskInstance> train_tasks,
                              const std::vector<IlRecord>& planner_il,
                              const std::vector<IlRecord>& reflector_il, const TrainingConfig& config,
                              std::uint32_t iteration);

struct FrameworkResult {
  AgentParams il_params;
  AgentParams final_params;
  std::vector<HistoryRow> history;
  DatasetStats il_stats;
  std::vector<std::string> warnings;
};

// Seeds of the expert-collection and IL-shuffle streams, shared by the
// framework and the phase-by-phase CLI so both produce identical results.
std::uint64_t expert_collection_seed(std::uint64_t seed);
std::uint64_t il_shuffle_seed(std::uint64_t seed);

using HistoryCallback = std::function<void(const HistoryRow&)>;

// Expert collection, IL datasets, IL training, then rl_iterations rounds of
// exploration and augmented updates. History holds the random-init, post-IL
// and per-iteration evaluations at eval_temperature.
FrameworkResult run_practical_framework(const Environment& env, std::span<const TaskInstance> train_tasks,
                                        std::span<const TaskInstance> eval_tasks,
                                        const TrainingConfig& config,
                                        const HistoryCallback& on_row = {});

}  // namespace agentrl
