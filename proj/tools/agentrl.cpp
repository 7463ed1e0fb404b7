// agentrl: collect | train-il | train-rl | evaluate | report
// Exit codes: 0 success, 2 config error, 3 data error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "agentrl/cli.hpp"
#include "agentrl/error.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planner/reflector agent training on toy text environments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "Flat key = value config file; defaults apply when omitted");
  app.add_option("--seed", seed, "Overrides the config seed");
  app.add_option("--out", out_dir, "Overrides the config output_dir");

  auto* collect = app.add_subcommand("collect", "Expert trials and IL datasets");
  auto* train_il = app.add_subcommand("train-il", "Imitation learning from the collected datasets");
  auto* train_rl = app.add_subcommand("train-rl", "Off-policy RL starting from the IL checkpoints");
  auto* evaluate = app.add_subcommand("evaluate", "K-trial evaluation on the held-out tasks");
  std::string checkpoint = "rl";
  evaluate->add_option("--checkpoint", checkpoint, "il or rl")->check(CLI::IsMember({"il", "rl"}));
  auto* report = app.add_subcommand("report", "Join run metrics into comparison tables");
  std::vector<std::string> run_dirs;
  report->add_option("runs", run_dirs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    agentrl::ExperimentConfig config =
        config_path.empty() ? agentrl::parse_config_text("", "defaults") : agentrl::parse_config(config_path);
    if (seed) config.set_seed(*seed);
    if (out_dir) config.output_dir = *out_dir;
    config.validate();

    agentrl::CommandOutput out;
    if (collect->parsed()) {
      out = agentrl::cmd_collect(config);
    } else if (train_il->parsed()) {
      out = agentrl::cmd_train_il(config);
    } else if (train_rl->parsed()) {
      out = agentrl::cmd_train_rl(config);
    } else if (evaluate->parsed()) {
      out = agentrl::cmd_evaluate(config, agentrl::parse_checkpoint_kind(checkpoint));
    } else {
      out = agentrl::cmd_report(config, run_dirs);
    }
    for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& f : out.files) std::cout << f << '\n';
    return 0;
  } catch (const agentrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const agentrl::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const agentrl::InvalidTokenError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
