#include <doctest.h>

#include <set>
#include <sstream>
#include <vector>

#include "agentrl/error.hpp"
#include "agentrl/expert_data.hpp"

using namespace agentrl;

namespace {

std::vector<TaskInstance> tasks_for(const Environment& env, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return env.generate_tasks(n, rng);
}

Trajectory scripted(const Environment& env, const TaskInstance& task, std::vector<std::uint32_t> script,
                    std::uint32_t trial) {
  std::size_t i = 0;
  return play_trial(env, task, {}, trial, [&](const StateText&, const ActionTable&) {
    return std::pair<std::uint32_t, double>{script[i++], 0.0};
  });
}

bool is_ambiguous(const Environment& env, const TaskInstance& task) {
  for (TokenId t : task.task_tokens) {
    const auto& name = env.vocab().lookup(t);
    if (name.rfind("q2:amb", 0) == 0 || name.rfind("fgroup:", 0) == 0) return true;
  }
  return false;
}

// Two failing graphqa trials with hand-set rewards and one reflection between them.
TrialSequence two_trials(const Environment& env, const TaskInstance& task, double r0, double r1) {
  const auto finish = static_cast<std::uint32_t>(env.action_slots() - 1);
  auto a = scripted(env, task, {finish}, 0);
  auto b = scripted(env, task, {finish}, 1);
  a.terminal_reward = r0;
  b.terminal_reward = r1;
  return TrialSequence(task.task_id, {a, b}, {Reflection{{env.reflection_alphabet()[2]}, -1.0, 0}},
                       std::nullopt);
}

}  // namespace

TEST_CASE("an error-free expert on gridhouse solves every task at trial 1") {
  auto env = make_environment(default_env_config(EnvKind::GridHouse));
  const auto tasks = tasks_for(*env, 50, 1);
  const auto seqs = collect_expert_trials(*env, tasks, 10, 0.0, 3);
  for (const auto& s : seqs) {
    CHECK(s.solved_at() == std::optional<std::uint32_t>(0));
    CHECK(s.reflections().empty());
  }
  const auto data = build_il_datasets(*env, tasks, seqs);
  CHECK(data.reflector.empty());
  CHECK(data.planner.size() > 0);
}

TEST_CASE("an error-free expert needs a hint only for ambiguous task text") {
  for (EnvKind kind : {EnvKind::GraphQa, EnvKind::SetQuery}) {
    auto env = make_environment(default_env_config(kind));
    const auto tasks = tasks_for(*env, 100, 2);
    const auto seqs = collect_expert_trials(*env, tasks, 10, 0.0, 4);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      REQUIRE(seqs[t].solved_at().has_value());
      if (is_ambiguous(*env, tasks[t])) {
        CHECK(*seqs[t].solved_at() <= 1);
      } else {
        CHECK(*seqs[t].solved_at() == 0);
      }
      // Every kept trial is a perfect one.
      for (const auto& traj : seqs[t].trials()) {
        if (env->evaluator_pass(tasks[t], traj)) CHECK(traj.terminal_reward == 1.0);
      }
    }
  }
}

TEST_CASE("error rate 1 makes the first trial fail") {
  auto env = make_environment(default_env_config(EnvKind::GridHouse));
  const auto tasks = tasks_for(*env, 30, 5);
  for (const auto& s : collect_expert_trials(*env, tasks, 1, 1.0, 6)) {
    CHECK(s.trials()[0].terminal_reward == 0.0);
    CHECK_FALSE(s.solved_at().has_value());
  }
  for (EnvKind kind : {EnvKind::GraphQa, EnvKind::SetQuery}) {
    auto e = make_environment(default_env_config(kind));
    const auto ts = tasks_for(*e, 100, 5);
    std::size_t failed = 0;
    for (const auto& s : collect_expert_trials(*e, ts, 1, 1.0, 6)) failed += s.solved_at() ? 0 : 1;
    CHECK(failed >= 95);
  }
}

TEST_CASE("collection is reproducible for a fixed seed") {
  auto env = make_environment(default_env_config(EnvKind::SetQuery));
  const auto tasks = tasks_for(*env, 30, 7);
  CHECK(collect_expert_trials(*env, tasks, 5, 0.3, 8) == collect_expert_trials(*env, tasks, 5, 0.3, 8));
  CHECK_FALSE(collect_expert_trials(*env, tasks, 5, 0.3, 8) == collect_expert_trials(*env, tasks, 5, 0.3, 9));
}

TEST_CASE("reflections are kept only when the next trial improves") {
  auto env = make_environment(default_env_config(EnvKind::GraphQa));
  const auto tasks = tasks_for(*env, 2, 9);
  std::vector<TrialSequence> up{two_trials(*env, tasks[0], 0.3, 0.8)};
  auto data = build_il_datasets(*env, tasks, up);
  REQUIRE(data.reflector.size() == 1);
  CHECK(data.reflector[0].observed_improvement == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(data.reflector[0].reflection_index == 2);
  CHECK(data.reflector[0].alphabet_size == env->reflection_alphabet().size());

  std::vector<TrialSequence> down{two_trials(*env, tasks[0], 0.8, 0.3)};
  CHECK(build_il_datasets(*env, tasks, down).reflector.empty());
  std::vector<TrialSequence> flat{two_trials(*env, tasks[0], 0.5, 0.5)};
  CHECK(build_il_datasets(*env, tasks, flat).reflector.empty());
}

TEST_CASE("all-failed sequences leave the planner set empty with a warning") {
  auto env = make_environment(default_env_config(EnvKind::GraphQa));
  const auto tasks = tasks_for(*env, 2, 9);
  std::vector<TrialSequence> seqs{two_trials(*env, tasks[0], 0.0, 0.0), two_trials(*env, tasks[1], 0.0, 0.0)};
  const auto data = build_il_datasets(*env, tasks, seqs);
  CHECK(data.planner.empty());
  CHECK(data.warnings.size() == 2);
}

TEST_CASE("dataset contents and stats match a recount over the sequences") {
  for (EnvKind kind : {EnvKind::GraphQa, EnvKind::GridHouse, EnvKind::SetQuery}) {
    auto env = make_environment(default_env_config(kind));
    const auto tasks = tasks_for(*env, 60, 10);
    const auto seqs = collect_expert_trials(*env, tasks, 10, 0.25, 11);
    const auto data = build_il_datasets(*env, tasks, seqs);

    std::size_t steps = 0, passing = 0, improved = 0;
    std::set<std::string> task_ids;
    for (std::size_t t = 0; t < seqs.size(); ++t) {
      const auto& trials = seqs[t].trials();
      for (const auto& traj : trials) {
        if (env->evaluator_pass(tasks[t], traj)) {
          steps += traj.steps.size();
          ++passing;
          task_ids.insert(tasks[t].task_id);
        }
      }
      for (std::size_t k = 0; k + 1 < trials.size(); ++k) {
        if (trials[k + 1].terminal_reward > trials[k].terminal_reward) {
          ++improved;
          task_ids.insert(tasks[t].task_id);
        }
      }
    }
    const auto stats = dataset_stats(to_string(kind), data.planner, data.reflector);
    CHECK(stats.planner_examples == steps);
    CHECK(stats.planner_trajectories == passing);
    CHECK(stats.reflector_examples == improved);
    CHECK(stats.tasks == task_ids.size());
    CHECK(stats.planner_examples > stats.reflector_examples);
    for (const auto& r : data.reflector) CHECK(r.observed_improvement > 0.0);
    for (const auto& p : data.planner) CHECK(p.action_id < p.table_size);
  }
  const auto empty = dataset_stats("graphqa", {}, {});
  CHECK(empty.planner_examples == 0);
  CHECK(empty.reflector_examples == 0);
  CHECK(empty.tasks == 0);
}

TEST_CASE("dataset files round trip") {
  auto env = make_environment(default_env_config(EnvKind::SetQuery));
  const auto tasks = tasks_for(*env, 30, 12);
  const auto data = build_il_datasets(*env, tasks, collect_expert_trials(*env, tasks, 10, 0.25, 13));
  DatasetManifest m{env->config(), 13, 0.25, 10};
  std::stringstream ss;
  write_datasets(ss, m, data);
  DatasetManifest back;
  const auto read = read_datasets(ss, &back);
  CHECK(read.planner == data.planner);
  CHECK(read.reflector == data.reflector);
  CHECK(back.env == m.env);
  CHECK(back.seed == 13);
  CHECK(back.error_rate == 0.25);
  CHECK(back.K == 10);

  std::istringstream no_manifest("P\tx\t1||\t0\t3\n");
  CHECK_THROWS_AS(read_datasets(no_manifest), DataError);
  std::istringstream bad_record(ss.str().substr(0, ss.str().find('\n') + 1) + "P\tx\t1||\t7\t3\n");
  CHECK_THROWS_AS(read_datasets(bad_record), DataError);
}
