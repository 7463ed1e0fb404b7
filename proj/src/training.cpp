#include "agentrl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "agentrl/error.hpp"
#include "agentrl/text_io.hpp"

namespace agentrl {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kExpertStream = 2;
constexpr std::uint64_t kIlStream = 3;
constexpr std::uint64_t kExploreStream = 4;
constexpr std::uint64_t kUpdateStream = 5;
constexpr std::uint64_t kEvalStream = 6;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

struct RecordView {
  const FeatureVector* features;
  std::uint32_t label;
  std::uint32_t table_size;
  double behavior_logprob;
  double reward;
};

RecordView view(const PlannerRecord& r) {
  return {&r.features, r.action_id, r.table_size, r.behavior_logprob, r.trajectory_return};
}
RecordView view(const ReflectorRecord& r) {
  return {&r.traj_features, r.reflection_index, r.alphabet_size, r.behavior_logprob, r.shaped_reward};
}

template <class Record>
RlGradient clipped_gradient(const ParamVector& params, std::span<const Record> batch, double epsilon,
                            std::size_t slot_offset) {
  if (batch.empty()) throw ContractViolation("RL batch is empty");
  RlGradient out;
  out.grad.assign(params.values().size(), 0.0);
  const double n = static_cast<double>(batch.size());
  for (const Record& rec : batch) {
    const RecordView r = view(rec);
    const double lp = logprob_of(params, *r.features, r.table_size, r.label, slot_offset);
    const double ratio = std::exp(lp - r.behavior_logprob);
    const double w = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    out.surrogate -= w * r.reward / n;
    if (r.reward == 0.0) continue;
    const bool inside = ratio >= 1.0 - epsilon && ratio <= 1.0 + epsilon;
    const bool saturated = (r.reward > 0.0 && ratio > 1.0 + epsilon) ||
                           (r.reward < 0.0 && ratio < 1.0 - epsilon);
    if (!inside && saturated) continue;
    if (!(w >= 1.0 - epsilon && w <= 1.0 + epsilon)) throw ContractViolation("importance weight escaped its clip range");
    grad_logprob(params, *r.features, r.table_size, r.label, slot_offset)
        .add_to(out.grad, params.max_action_slots(), -w * r.reward / n);
  }
  return out;
}

template <class Record>
UpdateTrace augmented(ParamVector& params, std::span<const Record> rl_batch, std::span<const IlRecord> il_batch,
                      double lambda, double epsilon, double learning_rate, std::size_t slot_offset) {
  UpdateTrace t;
  RlGradient rl = clipped_gradient(params, rl_batch, epsilon, slot_offset);
  t.rl_grad = std::move(rl.grad);
  t.rl_surrogate = rl.surrogate;
  t.il_grad.assign(t.rl_grad.size(), 0.0);
  if (!il_batch.empty()) t.il_loss = il_loss_and_grad(params, il_batch, slot_offset, &t.il_grad);
  t.grad.resize(t.rl_grad.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < t.grad.size(); ++i) {
    const double reg = lambda * t.il_grad[i];
    t.grad[i] = t.rl_grad[i] + reg;
    sq += reg * reg;
  }
  t.il_regularizer_norm = std::sqrt(sq);
  auto& v = params.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * t.grad[i];
  return t;
}

template <class T>
std::vector<T> gather(const std::vector<T>& data, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

template <class T>
std::vector<T> gather(const std::deque<T>& data, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

std::vector<IlRecord> sample_il_batch(const std::vector<IlRecord>& data, std::size_t n, Rng& rng) {
  std::vector<IlRecord> out;
  if (data.empty()) return out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(data[rng.below(data.size())]);
  return out;
}

// Runs `fn(batch_indices)` over one shuffled pass of n items; returns the mean of fn's results.
template <class Fn>
double shuffled_pass(std::size_t n, std::size_t batch_size, Rng& rng, Fn&& fn) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_in_place(order, rng);
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t from = 0; from < n; from += batch_size) {
    const std::size_t to = std::min(n, from + batch_size);
    total += fn(std::span<const std::size_t>(order.data() + from, to - from));
    ++batches;
  }
  return batches ? total / static_cast<double>(batches) : 0.0;
}

}  // namespace

void TrainingConfig::validate() const {
  require(K >= 1, "K must be >= 1");
  require(lambda_planner >= 0.0, "lambda_planner must be >= 0");
  require(lambda_reflector >= 0.0, "lambda_reflector must be >= 0");
  require(alpha > 0.0, "alpha must be > 0");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(buffer_capacity >= 1, "buffer_capacity must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(il_batch_size >= 1, "il_batch_size must be >= 1");
  require(explore_temperature >= 0.0, "explore_temperature must be >= 0");
  require(eval_temperature >= 0.0, "eval_temperature must be >= 0");
  require(history_window >= 1, "history_window must be >= 1");
  require(init_scale >= 0.0, "init_scale must be >= 0");
  require(!(freeze_planner && freeze_reflector && rl_iterations > 0),
          "freeze_planner and freeze_reflector together leave nothing to train");
}

AgentParams AgentParams::init(const Environment& env, const FeatureSpace& space, bool shared,
                              std::uint64_t seed, double scale) {
  AgentParams a;
  a.shared = shared;
  a.planner_slots = env.action_slots();
  a.reflector_slots = env.reflection_alphabet().size();
  if (shared) {
    a.planner = ParamVector::random(Role::Shared, space.dim(), a.planner_slots + a.reflector_slots,
                                    derive_seed(seed, kInitStream, 0), scale);
  } else {
    a.planner = ParamVector::random(Role::Planner, space.dim(), a.planner_slots,
                                    derive_seed(seed, kInitStream, 1), scale);
    a.reflector = ParamVector::random(Role::Reflector, space.dim(), a.reflector_slots,
                                      derive_seed(seed, kInitStream, 2), scale);
  }
  return a;
}

std::vector<IlRecord> to_il_records(std::span<const PlannerExample> examples, const FeatureSpace& space) {
  std::vector<IlRecord> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back({featurize_state(e.state, space), e.action_id, e.table_size});
  return out;
}

std::vector<IlRecord> to_il_records(std::span<const ReflectorExample> examples, const FeatureSpace& space) {
  std::vector<IlRecord> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    IlRecord r{e.traj_features, e.reflection_index, e.alphabet_size};
    if (space.shared) {
      r.features.indices.push_back(static_cast<std::uint32_t>(space.role_flag()));
      std::sort(r.features.indices.begin(), r.features.indices.end());
      r.features.indices.erase(std::unique(r.features.indices.begin(), r.features.indices.end()),
                               r.features.indices.end());
    }
    out.push_back(std::move(r));
  }
  return out;
}

double il_loss_and_grad(const ParamVector& params, std::span<const IlRecord> batch,
                        std::size_t slot_offset, std::vector<double>* grad) {
  if (batch.empty()) throw ContractViolation("IL batch is empty");
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& r : batch) {
    loss -= logprob_of(params, r.features, r.table_size, r.label, slot_offset) / n;
    if (grad) {
      grad_logprob(params, r.features, r.table_size, r.label, slot_offset)
          .add_to(*grad, params.max_action_slots(), -1.0 / n);
    }
  }
  return loss;
}

double il_step(ParamVector& params, std::span<const IlRecord> batch, double learning_rate,
               std::size_t slot_offset) {
  std::vector<double> grad(params.values().size(), 0.0);
  const double loss = il_loss_and_grad(params, batch, slot_offset, &grad);
  auto& v = params.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * grad[i];
  return loss;
}

ShapedRewards shape_rewards(std::span<const double> trial_rewards, double alpha) {
  if (trial_rewards.empty()) throw ContractViolation("shape_rewards needs at least one trial");
  ShapedRewards s;
  s.planner.assign(trial_rewards.begin(), trial_rewards.end());
  for (std::size_t k = 0; k + 1 < trial_rewards.size(); ++k) {
    s.reflector.push_back(alpha * (trial_rewards[k + 1] - trial_rewards[k]));
  }
  return s;
}

double importance_weight(double new_logprob, double behavior_logprob, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ContractViolation("epsilon must lie in (0, 1)");
  return std::clamp(std::exp(new_logprob - behavior_logprob), 1.0 - epsilon, 1.0 + epsilon);
}

RlGradient rl_grad_planner(const ParamVector& params, std::span<const PlannerRecord> batch,
                           double epsilon, std::size_t slot_offset) {
  return clipped_gradient(params, batch, epsilon, slot_offset);
}

RlGradient rl_grad_reflector(const ParamVector& params, std::span<const ReflectorRecord> batch,
                             double epsilon, std::size_t slot_offset) {
  return clipped_gradient(params, batch, epsilon, slot_offset);
}

UpdateTrace augmented_update(ParamVector& params, std::span<const PlannerRecord> rl_batch,
                             std::span<const IlRecord> il_batch, double lambda, double epsilon,
                             double learning_rate, std::size_t slot_offset) {
  return augmented(params, rl_batch, il_batch, lambda, epsilon, learning_rate, slot_offset);
}

UpdateTrace augmented_update(ParamVector& params, std::span<const ReflectorRecord> rl_batch,
                             std::span<const IlRecord> il_batch, double lambda, double epsilon,
                             double learning_rate, std::size_t slot_offset) {
  return augmented(params, rl_batch, il_batch, lambda, epsilon, learning_rate, slot_offset);
}

TrialSequence rollout(const AgentParams& agent, const Environment& env, const TaskInstance& task,
                      const RolloutOptions& options, Rng& rng) {
  if (options.K < 1) throw ContractViolation("K must be >= 1");
  const double temp = options.temperature;
  const auto& alphabet = env.reflection_alphabet();
  std::vector<Trajectory> trials;
  std::vector<Reflection> reflections;
  std::optional<std::uint32_t> solved_at;

  auto choose = [&](const StateText& state, const ActionTable& table) {
    const FeatureVector f = featurize_state(state, options.space);
    auto [index, lp] = sample(agent.planner, f, table.size(), temp, rng);
    if (temp != 1.0) lp = logprob_of(agent.planner, f, table.size(), index);
    return std::pair{index, lp};
  };

  for (std::uint32_t k = 0; k < options.K; ++k) {
    trials.push_back(play_trial(env, task, reflections, k, choose));
    if (env.evaluator_pass(task, trials.back())) {
      solved_at = k;
      break;
    }
    if (options.reflect && k + 1 < options.K) {
      const FeatureVector f = featurize_trajectory(trials.back(), env.vocab(), options.space);
      const ParamVector& mu = agent.reflector_params();
      const std::size_t offset = agent.reflector_offset();
      auto [index, lp] = sample(mu, f, alphabet.size(), temp, rng, offset);
      if (temp != 1.0) lp = logprob_of(mu, f, alphabet.size(), index, offset);
      reflections.push_back(Reflection{{alphabet[index]}, lp, k});
    }
  }
  return TrialSequence(task.task_id, std::move(trials), std::move(reflections), solved_at);
}

void push_sequence(ReplayBuffers& buffers, const TrialSequence& seq, const Environment& env,
                   const FeatureSpace& space, double alpha) {
  const auto rewards = trial_rewards(seq);
  const ShapedRewards shaped = shape_rewards(rewards, alpha);
  const auto& trials = seq.trials();
  for (std::size_t k = 0; k < trials.size(); ++k) {
    for (const auto& step : trials[k].steps) {
      buffers.planner.push({featurize_state(step.state, space), step.action.action_id,
                            static_cast<std::uint32_t>(env.action_slots()), step.behavior_logprob,
                            shaped.planner[k]});
    }
  }
  const auto& refl = seq.reflections();
  for (std::size_t k = 0; k < refl.size(); ++k) {
    buffers.reflector.push({featurize_trajectory(trials[k], env.vocab(), space),
                            env.reflection_index(refl[k].tokens.at(0)),
                            static_cast<std::uint32_t>(env.reflection_alphabet().size()),
                            refl[k].behavior_logprob, shaped.reflector[k]});
  }
}

EvalResult evaluate_agent(const AgentParams& agent, const Environment& env,
                          std::span<const TaskInstance> tasks, const RolloutOptions& options,
                          std::uint64_t seed) {
  EvalResult out;
  out.sequences.reserve(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    Rng rng(derive_seed(seed, kEvalStream, t));
    out.sequences.push_back(rollout(agent, env, tasks[t], options, rng));
    out.rewards.push_back(trial_rewards(out.sequences.back()));
  }
  out.metrics = aggregate_metrics(out.rewards, options.K);
  return out;
}

std::string history_csv_header() {
  return "phase,iteration,planner_loss,reflector_loss,eval_IR,eval_FR,eval_AR";
}

std::string history_csv_row(const HistoryRow& r) {
  std::ostringstream out;
  out << r.phase << ',' << r.iteration << ',' << text::format_double(r.planner_loss) << ','
      << text::format_double(r.reflector_loss) << ',' << text::format_double(r.eval.ir) << ','
      << text::format_double(r.eval.fr) << ',' << text::format_double(r.eval.ar);
  return out.str();
}

std::pair<double, double> train_il(AgentParams& agent, const std::vector<IlRecord>& planner_data,
                                   const std::vector<IlRecord>& reflector_data,
                                   const TrainingConfig& config, Rng& rng) {
  double planner_loss = 0.0;
  double reflector_loss = 0.0;
  for (std::uint32_t epoch = 0; epoch < config.il_epochs; ++epoch) {
    if (!config.freeze_planner && !planner_data.empty()) {
      planner_loss = shuffled_pass(planner_data.size(), config.il_batch_size, rng, [&](auto idx) {
        return il_step(agent.planner, gather(planner_data, idx), config.learning_rate);
      });
    }
    if (!config.freeze_reflector && !config.disable_reflection && !reflector_data.empty()) {
      reflector_loss = shuffled_pass(reflector_data.size(), config.il_batch_size, rng, [&](auto idx) {
        return il_step(agent.reflector_params(), gather(reflector_data, idx), config.learning_rate,
                       agent.reflector_offset());
      });
    }
  }
  return {planner_loss, reflector_loss};
}

RlIterationStats rl_iteration(AgentParams& agent, ReplayBuffers& buffers, const Environment& env,
                              std::span<const TaskInstance> train_tasks,
                              const std::vector<IlRecord>& planner_il,
                              const std::vector<IlRecord>& reflector_il, const TrainingConfig& config,
                              std::uint32_t iteration) {
  const FeatureSpace space{env.vocab().size(), config.history_window, config.shared_params};
  const RolloutOptions explore{config.K, config.explore_temperature, !config.disable_reflection, space};
  for (std::size_t t = 0; t < train_tasks.size(); ++t) {
    Rng rng(derive_seed(config.seed, kExploreStream, (std::uint64_t{iteration} << 32) | t));
    push_sequence(buffers, rollout(agent, env, train_tasks[t], explore, rng), env, space, config.alpha);
  }

  RlIterationStats stats;
  Rng rng(derive_seed(config.seed, kUpdateStream, iteration));
  double norm_total = 0.0;
  std::size_t updates = 0;
  for (std::uint32_t epoch = 0; epoch < config.rl_epochs_per_iteration; ++epoch) {
    if (!config.freeze_planner && !buffers.planner.empty()) {
      stats.planner_loss = shuffled_pass(buffers.planner.size(), config.batch_size, rng, [&](auto idx) {
        const auto batch = gather(buffers.planner.records(), idx);
        const auto il = sample_il_batch(planner_il, config.batch_size, rng);
        const UpdateTrace t = augmented_update(agent.planner, std::span<const PlannerRecord>(batch), il,
                                               config.lambda_planner, config.epsilon, config.learning_rate);
        norm_total += t.il_regularizer_norm;
        ++updates;
        return t.rl_surrogate + config.lambda_planner * t.il_loss;
      });
    }
    if (!config.freeze_reflector && !buffers.reflector.empty()) {
      stats.reflector_loss = shuffled_pass(buffers.reflector.size(), config.batch_size, rng, [&](auto idx) {
        const auto batch = gather(buffers.reflector.records(), idx);
        const auto il = sample_il_batch(reflector_il, config.batch_size, rng);
        const UpdateTrace t = augmented_update(agent.reflector_params(), std::span<const ReflectorRecord>(batch),
                                               il, config.lambda_reflector, config.epsilon,
                                               config.learning_rate, agent.reflector_offset());
        norm_total += t.il_regularizer_norm;
        ++updates;
        return t.rl_surrogate + config.lambda_reflector * t.il_loss;
      });
    }
  }
  stats.mean_il_regularizer_norm = updates ? norm_total / static_cast<double>(updates) : 0.0;
  return stats;
}

std::uint64_t expert_collection_seed(std::uint64_t seed) { return derive_seed(seed, kExpertStream, 0); }
std::uint64_t il_shuffle_seed(std::uint64_t seed) { return derive_seed(seed, kIlStream, 0); }

FrameworkResult run_practical_framework(const Environment& env, std::span<const TaskInstance> train_tasks,
                                        std::span<const TaskInstance> eval_tasks,
                                        const TrainingConfig& config, const HistoryCallback& on_row) {
  config.validate();
  if (train_tasks.empty() || eval_tasks.empty()) throw ConfigError("train and eval task sets must be nonempty");
  const FeatureSpace space{env.vocab().size(), config.history_window, config.shared_params};
  const RolloutOptions eval_opts{config.K, config.eval_temperature, !config.disable_reflection, space};

  FrameworkResult result;
  auto record = [&](HistoryRow row) {
    if (on_row) on_row(row);
    result.history.push_back(std::move(row));
  };

  AgentParams agent = AgentParams::init(env, space, config.shared_params, config.seed, config.init_scale);
  record({"init", 0, 0.0, 0.0, evaluate_agent(agent, env, eval_tasks, eval_opts, config.seed).metrics});

  const auto sequences = collect_expert_trials(env, train_tasks, config.K, env.config().expert_error_rate,
                                               expert_collection_seed(config.seed));
  const IlDatasets data = build_il_datasets(env, train_tasks, sequences, config.history_window);
  result.il_stats = dataset_stats(to_string(env.kind()), data.planner, data.reflector);
  result.warnings = data.warnings;
  const auto planner_il = to_il_records(data.planner, space);
  const auto reflector_il = to_il_records(data.reflector, space);

  Rng il_rng(il_shuffle_seed(config.seed));
  const auto [pl, rl] = train_il(agent, planner_il, reflector_il, config, il_rng);
  record({"il", 0, pl, rl, evaluate_agent(agent, env, eval_tasks, eval_opts, config.seed).metrics});
  result.il_params = agent;

  ReplayBuffers buffers(config.buffer_capacity);
  for (std::uint32_t it = 1; it <= config.rl_iterations; ++it) {
    const auto stats = rl_iteration(agent, buffers, env, train_tasks, planner_il, reflector_il, config, it);
    record({"rl", it, stats.planner_loss, stats.reflector_loss,
            evaluate_agent(agent, env, eval_tasks, eval_opts, config.seed).metrics});
  }
  result.final_params = std::move(agent);
  return result;
}

}  // namespace agentrl
