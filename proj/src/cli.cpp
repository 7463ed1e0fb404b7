#include "agentrl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "agentrl/error.hpp"
#include "agentrl/expert_data.hpp"
#include "agentrl/text_io.hpp"

namespace agentrl {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTaskStream = 100;

bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw DataError("not a boolean: '" + std::string(s) + "'");
}

std::uint32_t parse_u32(std::string_view s) {
  const std::uint64_t v = text::parse_uint(s);
  if (v > UINT32_MAX) throw DataError("integer out of range: '" + std::string(s) + "'");
  return static_cast<std::uint32_t>(v);
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define AGENTRL_KEY(name, field, parse, show)                                                   \
  Key {                                                                                          \
    name, [](ExperimentConfig& c, std::string_view v) { c.field = parse(v); },                  \
        [](const ExperimentConfig& c) { return show(c.field); }                                  \
  }

std::string u64_text(std::uint64_t v) { return std::to_string(v); }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"env",
          [](ExperimentConfig& c, std::string_view v) { c.env.kind = parse_env_kind(v); },
          [](const ExperimentConfig& c) { return std::string(to_string(c.env.kind)); }},
      Key{"seed", [](ExperimentConfig& c, std::string_view v) { c.set_seed(text::parse_uint(v)); },
          [](const ExperimentConfig& c) { return u64_text(c.seed()); }},
      AGENTRL_KEY("entity_count", env.entity_count, parse_u32, u64_text),
      AGENTRL_KEY("location_count", env.location_count, parse_u32, u64_text),
      AGENTRL_KEY("table_rows", env.table_rows, parse_u32, u64_text),
      AGENTRL_KEY("step_limit", env.step_limit, parse_u32, u64_text),
      AGENTRL_KEY("expert_error_rate", env.expert_error_rate, text::parse_double, text::format_double),
      AGENTRL_KEY("train_tasks", train_tasks, text::parse_uint, u64_text),
      AGENTRL_KEY("eval_tasks", eval_tasks, text::parse_uint, u64_text),
      AGENTRL_KEY("K", training.K, parse_u32, u64_text),
      AGENTRL_KEY("lambda_planner", training.lambda_planner, text::parse_double, text::format_double),
      AGENTRL_KEY("lambda_reflector", training.lambda_reflector, text::parse_double, text::format_double),
      AGENTRL_KEY("alpha", training.alpha, text::parse_double, text::format_double),
      AGENTRL_KEY("epsilon", training.epsilon, text::parse_double, text::format_double),
      AGENTRL_KEY("learning_rate", training.learning_rate, text::parse_double, text::format_double),
      AGENTRL_KEY("il_epochs", training.il_epochs, parse_u32, u64_text),
      AGENTRL_KEY("il_batch_size", training.il_batch_size, text::parse_uint, u64_text),
      AGENTRL_KEY("rl_iterations", training.rl_iterations, parse_u32, u64_text),
      AGENTRL_KEY("rl_epochs_per_iteration", training.rl_epochs_per_iteration, parse_u32, u64_text),
      AGENTRL_KEY("buffer_capacity", training.buffer_capacity, text::parse_uint, u64_text),
      AGENTRL_KEY("batch_size", training.batch_size, text::parse_uint, u64_text),
      AGENTRL_KEY("explore_temperature", training.explore_temperature, text::parse_double,
                  text::format_double),
      AGENTRL_KEY("eval_temperature", training.eval_temperature, text::parse_double, text::format_double),
      AGENTRL_KEY("history_window", training.history_window, text::parse_uint, u64_text),
      AGENTRL_KEY("init_scale", training.init_scale, text::parse_double, text::format_double),
      AGENTRL_KEY("shared_params", training.shared_params, parse_bool, bool_text),
      AGENTRL_KEY("freeze_planner", training.freeze_planner, parse_bool, bool_text),
      AGENTRL_KEY("freeze_reflector", training.freeze_reflector, parse_bool, bool_text),
      AGENTRL_KEY("disable_reflection", training.disable_reflection, parse_bool, bool_text),
      Key{"output_dir", [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); },
          [](const ExperimentConfig& c) { return c.output_dir; }},
      Key{"run_name", [](ExperimentConfig& c, std::string_view v) { c.run_name = std::string(v); },
          [](const ExperimentConfig& c) { return c.run_name; }},
  };
  return table;
}

#undef AGENTRL_KEY

const Key* find_key(std::string_view name) {
  for (const auto& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << v;
  return out.str();
}

std::string path_in(const std::string& dir, std::string_view name) {
  return (fs::path(dir) / fs::path(std::string(name))).string();
}

std::string read_input(const std::string& path) {
  if (!fs::exists(path)) throw DataError("missing input file: " + path);
  return text::read_file(path);
}

// Writes files and keeps their hashes for the run manifest.
class RunWriter {
 public:
  RunWriter(const ExperimentConfig& config, std::string command)
      : config_(config), command_(std::move(command)) {
    fs::create_directories(config.output_dir);
    config_text_ = resolved_config_text(config);
    write("config.resolved", config_text_, false);
  }

  void input(const std::string& path, const std::string& content) {
    inputs_.emplace_back(fs::path(path).filename().string(), text::fnv1a(content));
  }

  void write(std::string_view name, const std::string& content, bool record = true) {
    const std::string path = path_in(config_.output_dir, name);
    text::write_file(path, content);
    out_.files.push_back(path);
    if (record) outputs_.emplace_back(std::string(name), text::fnv1a(content));
  }

  CommandOutput finish() {
    std::ostringstream m;
    m << "command=" << command_ << '\n'
      << "seed=" << config_.seed() << '\n'
      << "config_hash=" << hex64(text::fnv1a(config_text_)) << '\n';
    for (const auto& [name, h] : inputs_) m << "input " << name << ' ' << hex64(h) << '\n';
    for (const auto& [name, h] : outputs_) m << "output " << name << ' ' << hex64(h) << '\n';
    write("manifest." + command_ + ".txt", m.str(), false);
    return std::move(out_);
  }

  void checkpoints(const std::vector<std::string>& paths) {
    for (const auto& path : paths) {
      out_.files.push_back(path);
      outputs_.emplace_back(fs::path(path).filename().string(), text::fnv1a(text::read_file(path)));
    }
  }

  CommandOutput& out() { return out_; }

 private:
  const ExperimentConfig& config_;
  std::string command_;
  std::string config_text_;
  std::vector<std::pair<std::string, std::uint64_t>> inputs_;
  std::vector<std::pair<std::string, std::uint64_t>> outputs_;
  CommandOutput out_;
};

FeatureSpace feature_space(const Environment& env, const ExperimentConfig& config) {
  return FeatureSpace{env.vocab().size(), config.training.history_window, config.training.shared_params};
}

RolloutOptions eval_options(const Environment& env, const ExperimentConfig& config) {
  return RolloutOptions{config.training.K, config.training.eval_temperature,
                        !config.training.disable_reflection, feature_space(env, config)};
}

struct LoadedDatasets {
  IlDatasets data;
  std::vector<IlRecord> planner;
  std::vector<IlRecord> reflector;
};

LoadedDatasets load_datasets(RunWriter& writer, const Environment& env, const ExperimentConfig& config) {
  const std::string path = path_in(config.output_dir, "datasets.txt");
  const std::string content = read_input(path);
  writer.input(path, content);
  std::istringstream in(content);
  DatasetManifest manifest;
  LoadedDatasets out;
  out.data = read_datasets(in, &manifest);
  if (!(manifest.env == config.env)) {
    throw DataError("datasets.txt was collected for a different environment config");
  }
  const FeatureSpace space = feature_space(env, config);
  out.planner = to_il_records(out.data.planner, space);
  out.reflector = to_il_records(out.data.reflector, space);
  return out;
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::string s = history_csv_header() + "\n";
  for (const auto& r : rows) s += history_csv_row(r) + "\n";
  return s;
}

std::vector<std::string> csv_fields(std::string_view line) {
  std::vector<std::string> out;
  for (auto f : text::split(line, ',')) out.emplace_back(text::trim(f));
  return out;
}

std::vector<std::string_view> data_lines(std::string_view content) {
  std::vector<std::string_view> out;
  for (auto line : text::split(content, '\n')) {
    if (!text::trim(line).empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

void ExperimentConfig::set_seed(std::uint64_t seed) {
  training.seed = seed;
  env.seed = seed;
}

std::string ExperimentConfig::resolved_run_name() const {
  if (!run_name.empty()) return run_name;
  const fs::path p = fs::path(output_dir).lexically_normal();
  std::string name = p.filename().string();
  if (name.empty()) name = p.parent_path().filename().string();
  return name.empty() ? "run" : name;
}

void ExperimentConfig::validate() const {
  env.validate();
  training.validate();
  if (train_tasks == 0) throw ConfigError("train_tasks must be >= 1");
  if (eval_tasks == 0) throw ConfigError("eval_tasks must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must be nonempty");
  if (run_name.find(',') != std::string::npos) throw ConfigError("run_name may not contain ','");
}

ExperimentConfig parse_config_text(std::string_view text_in, std::string_view source) {
  ExperimentConfig config;
  std::map<std::string, std::size_t> line_of;
  std::size_t line_no = 0;
  auto fail = [&](std::size_t line, std::string_view key, const std::string& why) {
    std::string where(source);
    if (line) where += ":" + std::to_string(line);
    throw ConfigError(where + ": " + std::string(key) + ": " + why);
  };
  for (auto raw : text::split(text_in, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, line, "expected 'key = value'");
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string_view value = text::trim(line.substr(eq + 1));
    const Key* k = find_key(key);
    if (!k) fail(line_no, key, "unknown key");
    if (line_of.count(key)) fail(line_no, key, "duplicate key");
    line_of[key] = line_no;
    try {
      k->set(config, value);
    } catch (const std::exception& e) {
      fail(line_no, key, e.what());
    }
  }
  // step_limit follows env unless given.
  if (!line_of.count("step_limit")) config.env.step_limit = default_step_limit(config.env.kind);
  try {
    config.validate();
  } catch (const ConfigError& e) {
    // Report against the first key the message names.
    const std::string msg = e.what();
    std::string best;
    std::size_t best_pos = std::string::npos;
    for (const auto& k : keys()) {
      const auto pos = msg.find(k.name);
      if (pos != std::string::npos && (pos < best_pos || (pos == best_pos && k.name.size() > best.size()))) {
        best = k.name;
        best_pos = pos;
      }
    }
    if (best.empty() || msg.rfind(std::string(to_string(config.env.kind)), 0) == 0) best = "env";
    fail(line_of.count(best) ? line_of[best] : 0, best, msg);
  }
  return config;
}

ExperimentConfig parse_config(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError(path + ": config file not found");
  return parse_config_text(text::read_file(path), path);
}

std::string resolved_config_text(const ExperimentConfig& config) {
  std::string s;
  for (const auto& k : keys()) s += k.name + " = " + k.get(config) + "\n";
  return s;
}

TaskSplits make_task_splits(const Environment& env, const ExperimentConfig& config) {
  Rng rng(derive_seed(config.seed(), kTaskStream));
  TaskSplits splits;
  splits.train = env.generate_tasks(config.train_tasks, rng, "train");
  splits.eval = env.generate_tasks(config.eval_tasks, rng, "eval");
  return splits;
}

CheckpointKind parse_checkpoint_kind(std::string_view s) {
  if (s == "il") return CheckpointKind::Il;
  if (s == "rl") return CheckpointKind::Rl;
  throw ConfigError("checkpoint must be 'il' or 'rl', got '" + std::string(s) + "'");
}

std::string_view to_string(CheckpointKind kind) { return kind == CheckpointKind::Il ? "il" : "rl"; }

AgentParams load_agent(const std::string& dir, CheckpointKind kind, const Environment& env,
                       const ExperimentConfig& config) {
  const auto paths = checkpoint_paths(dir, kind, config.training.shared_params);
  const FeatureSpace space = feature_space(env, config);
  AgentParams agent;
  agent.shared = config.training.shared_params;
  agent.planner_slots = env.action_slots();
  agent.reflector_slots = env.reflection_alphabet().size();
  auto load = [&](const std::string& path, Role role, std::size_t slots) {
    if (!fs::exists(path)) throw DataError("missing checkpoint: " + path);
    ParamVector p = load_checkpoint(path);
    if (p.role() != role || p.feature_dim() != space.dim() || p.max_action_slots() != slots) {
      throw DataError("checkpoint " + path + " does not match the configured environment");
    }
    return p;
  };
  if (agent.shared) {
    agent.planner = load(paths[0], Role::Shared, agent.planner_slots + agent.reflector_slots);
  } else {
    agent.planner = load(paths[0], Role::Planner, agent.planner_slots);
    agent.reflector = load(paths[1], Role::Reflector, agent.reflector_slots);
  }
  return agent;
}

std::vector<std::string> checkpoint_paths(const std::string& dir, CheckpointKind kind, bool shared) {
  const std::string suffix = "_" + std::string(to_string(kind)) + ".ckpt";
  if (shared) return {path_in(dir, "shared" + suffix)};
  return {path_in(dir, "planner" + suffix), path_in(dir, "reflector" + suffix)};
}

std::vector<std::string> save_agent(const std::string& dir, CheckpointKind kind, const AgentParams& agent) {
  const auto paths = checkpoint_paths(dir, kind, agent.shared);
  save_checkpoint(paths[0], agent.planner);
  if (!agent.shared) save_checkpoint(paths[1], agent.reflector);
  return paths;
}

std::string metrics_csv_header() { return "run,task_count,K,IR,FR,AR"; }

std::string metrics_csv_row(std::string_view run, std::size_t task_count, std::uint32_t K,
                            const AggregateMetrics& m) {
  return std::string(run) + "," + std::to_string(task_count) + "," + std::to_string(K) + "," +
         text::format_double(m.ir) + "," + text::format_double(m.fr) + "," + text::format_double(m.ar);
}

std::string rewards_csv(std::string_view run, const EvalResult& result) {
  std::string s = "run,task_id,trial,reward\n";
  for (std::size_t t = 0; t < result.sequences.size(); ++t) {
    const auto& id = result.sequences[t].task_id();
    for (std::size_t k = 0; k < result.rewards[t].size(); ++k) {
      s += std::string(run) + "," + id + "," + std::to_string(k) + "," +
           text::format_double(result.rewards[t][k]) + "\n";
    }
  }
  return s;
}

std::vector<std::vector<double>> parse_rewards_csv(std::string_view content) {
  const auto lines = data_lines(content);
  if (lines.empty() || text::trim(lines[0]) != "run,task_id,trial,reward") {
    throw DataError("rewards CSV: bad header");
  }
  std::vector<std::vector<double>> out;
  std::string current;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv_fields(lines[i]);
    if (f.size() != 4) throw DataError("rewards CSV: expected 4 fields on line " + std::to_string(i + 1));
    const std::size_t trial = text::parse_uint(f[2]);
    if (out.empty() || f[1] != current) {
      if (trial != 0) throw DataError("rewards CSV: task " + f[1] + " does not start at trial 0");
      out.emplace_back();
      current = f[1];
    } else if (trial != out.back().size()) {
      throw DataError("rewards CSV: trials out of order for task " + f[1]);
    }
    out.back().push_back(text::parse_double(f[3]));
  }
  return out;
}

CommandOutput cmd_collect(const ExperimentConfig& config) {
  config.validate();
  RunWriter w(config, "collect");
  const auto env = make_environment(config.env);
  const auto splits = make_task_splits(*env, config);
  const auto sequences = collect_expert_trials(*env, splits.train, config.training.K,
                                               config.env.expert_error_rate,
                                               expert_collection_seed(config.seed()));
  const IlDatasets data = build_il_datasets(*env, splits.train, sequences, config.training.history_window);

  std::ostringstream ds;
  write_datasets(ds, DatasetManifest{config.env, config.seed(), config.env.expert_error_rate, config.training.K},
                 data);
  w.write("datasets.txt", ds.str());

  const DatasetStats st = dataset_stats(to_string(env->kind()), data.planner, data.reflector);
  w.write("dataset_stats.csv", "env,planner_examples,planner_trajectories,reflector_examples,tasks\n" + st.env +
                                   "," + std::to_string(st.planner_examples) + "," +
                                   std::to_string(st.planner_trajectories) + "," +
                                   std::to_string(st.reflector_examples) + "," + std::to_string(st.tasks) + "\n");

  std::ostringstream log;
  for (const auto& seq : sequences) write_trajectory_log(log, seq.trials());
  w.write("expert_trials.log", log.str());
  w.out().warnings = data.warnings;
  return w.finish();
}

CommandOutput cmd_train_il(const ExperimentConfig& config) {
  config.validate();
  RunWriter w(config, "train-il");
  const auto env = make_environment(config.env);
  const auto splits = make_task_splits(*env, config);
  const LoadedDatasets data = load_datasets(w, *env, config);
  const FeatureSpace space = feature_space(*env, config);
  const RolloutOptions eval_opts = eval_options(*env, config);

  AgentParams agent = AgentParams::init(*env, space, config.training.shared_params, config.seed(),
                                        config.training.init_scale);
  std::vector<HistoryRow> history;
  history.push_back({"init", 0, 0.0, 0.0, evaluate_agent(agent, *env, splits.eval, eval_opts, config.seed()).metrics});
  Rng rng(il_shuffle_seed(config.seed()));
  const auto [pl, rl] = train_il(agent, data.planner, data.reflector, config.training, rng);
  history.push_back({"il", 0, pl, rl, evaluate_agent(agent, *env, splits.eval, eval_opts, config.seed()).metrics});

  w.checkpoints(save_agent(config.output_dir, CheckpointKind::Il, agent));
  w.write("il_history.csv", history_csv(history));
  w.out().warnings = data.data.warnings;
  return w.finish();
}

CommandOutput cmd_train_rl(const ExperimentConfig& config) {
  config.validate();
  RunWriter w(config, "train-rl");
  const auto env = make_environment(config.env);
  const auto splits = make_task_splits(*env, config);
  const LoadedDatasets data = load_datasets(w, *env, config);
  const RolloutOptions eval_opts = eval_options(*env, config);

  AgentParams agent = load_agent(config.output_dir, CheckpointKind::Il, *env, config);
  for (const auto& path : checkpoint_paths(config.output_dir, CheckpointKind::Il, agent.shared)) {
    w.input(path, text::read_file(path));
  }
  ReplayBuffers buffers(config.training.buffer_capacity);
  std::vector<HistoryRow> history;
  std::string trace = "iteration,mean_il_regularizer_norm\n";
  for (std::uint32_t it = 1; it <= config.training.rl_iterations; ++it) {
    const auto stats = rl_iteration(agent, buffers, *env, splits.train, data.planner, data.reflector,
                                    config.training, it);
    history.push_back({"rl", it, stats.planner_loss, stats.reflector_loss,
                       evaluate_agent(agent, *env, splits.eval, eval_opts, config.seed()).metrics});
    trace += std::to_string(it) + "," + text::format_double(stats.mean_il_regularizer_norm) + "\n";
  }
  w.checkpoints(save_agent(config.output_dir, CheckpointKind::Rl, agent));
  w.write("rl_history.csv", history_csv(history));
  w.write("rl_trace.csv", trace);
  return w.finish();
}

CommandOutput cmd_evaluate(const ExperimentConfig& config, CheckpointKind checkpoint) {
  config.validate();
  RunWriter w(config, "evaluate");
  const auto env = make_environment(config.env);
  const auto splits = make_task_splits(*env, config);
  const AgentParams agent = load_agent(config.output_dir, checkpoint, *env, config);
  for (const auto& path : checkpoint_paths(config.output_dir, checkpoint, agent.shared)) {
    w.input(path, text::read_file(path));
  }
  const std::string tag(to_string(checkpoint));

  const EvalResult result = evaluate_agent(agent, *env, splits.eval, eval_options(*env, config), config.seed());
  const std::string run = config.resolved_run_name();
  w.write("metrics_" + tag + ".csv", metrics_csv_header() + "\n" +
                                        metrics_csv_row(run, splits.eval.size(), config.training.K, result.metrics) +
                                        "\n");
  w.write("rewards_" + tag + ".csv", rewards_csv(run, result));

  std::ostringstream log;
  std::string refl = "run,task_id,after_trial,token,behavior_logprob\n";
  for (const auto& seq : result.sequences) {
    write_trajectory_log(log, seq.trials());
    for (const auto& r : seq.reflections()) {
      refl += run + "," + seq.task_id() + "," + std::to_string(r.produced_after_trial) + "," +
              std::string(env->vocab().lookup(r.tokens.at(0))) + "," + text::format_double(r.behavior_logprob) +
              "\n";
    }
  }
  w.write("trajectories_" + tag + ".log", log.str());
  w.write("reflections_" + tag + ".csv", refl);
  return w.finish();
}

CommandOutput cmd_report(const ExperimentConfig& config, const std::vector<std::string>& run_dirs) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
  RunWriter w(config, "report");
  std::string comparison = metrics_csv_header() + "\n";
  std::string sweep = "lambda,IR,FR,AR\n";
  for (const auto& dir : run_dirs) {
    const ExperimentConfig run_config = parse_config(path_in(dir, "config.resolved"));
    std::string path = path_in(dir, "metrics_rl.csv");
    if (!fs::exists(path)) path = path_in(dir, "metrics_il.csv");
    const std::string content = read_input(path);
    w.input(path, content);
    const auto lines = data_lines(content);
    if (lines.size() != 2 || text::trim(lines[0]) != metrics_csv_header()) {
      throw DataError(path + ": expected a header and one metrics line");
    }
    const auto f = csv_fields(lines[1]);
    if (f.size() != 6) throw DataError(path + ": expected 6 fields");
    comparison += std::string(text::trim(lines[1])) + "\n";
    sweep += text::format_double(run_config.training.lambda_planner) + "," + f[3] + "," + f[4] + "," + f[5] + "\n";
  }
  w.write("comparison.csv", comparison);
  w.write("lambda_sweep.csv", sweep);
  return w.finish();
}

}  // namespace agentrl
