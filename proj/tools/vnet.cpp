// Command-line front end: train, evaluate and sweep.
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vnet/harness.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string agent;
  std::string axis;
  std::string values;
  std::string seeds;
  std::string out;
  int episodes = -1;
  bool trace = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--agent", f.agent, "tabular | dqn | nearest_bs | max_rate | no_handoff_penalty");
  cmd->add_option("--axis", f.axis, "desired_velocity | n_tbs | n_avs");
  cmd->add_option("--values", f.values, "comma-separated axis values");
  cmd->add_option("--seeds", f.seeds, "comma-separated base seeds");
  cmd->add_option("--episodes", f.episodes, "training episodes (both learners)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--trace", f.trace, "write per-step trace and transition files");
  cmd->add_option("--set", f.sets, "extra key=value override, repeatable");
}

vnet::ScenarioConfig build_config(const CommonFlags& f) {
  std::optional<std::filesystem::path> path;
  if (!f.config.empty()) path = f.config;
  vnet::ScenarioConfig cfg = vnet::load_config(path);
  if (!f.agent.empty()) vnet::set_config_value(cfg, "agent", f.agent);
  if (!f.axis.empty()) vnet::set_config_value(cfg, "axis", f.axis);
  if (!f.values.empty()) vnet::set_config_value(cfg, "values", f.values);
  if (!f.seeds.empty()) vnet::set_config_value(cfg, "seeds", f.seeds);
  if (!f.out.empty()) vnet::set_config_value(cfg, "out", f.out);
  if (f.episodes >= 0) {
    cfg.learn.episodes = f.episodes;
    cfg.dqn.episodes = f.episodes;
  }
  if (f.trace) cfg.trace = true;
  for (const std::string& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    vnet::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void print_summaries(const std::vector<vnet::RunSummary>& rows) { vnet::write_summary_csv(std::cout, rows); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicular RF/THz co-simulator with Q-learning agents"};
  app.require_subcommand(1);

  CommonFlags train_flags, sweep_flags, eval_flags;
  auto* train = app.add_subcommand("train", "train one agent at the first axis value for every seed");
  add_common(train, train_flags);
  auto* sweep = app.add_subcommand("sweep", "train/evaluate over every axis value and seed");
  add_common(sweep, sweep_flags);
  auto* evaluate = app.add_subcommand("evaluate", "greedy rollouts of a stored Q-table or network checkpoint");
  add_common(evaluate, eval_flags);
  std::string artifact;
  evaluate->add_option("artifact", artifact, "file written by train or sweep (.qtable or .fnn)")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      vnet::ScenarioConfig cfg = build_config(train_flags);
      cfg.values.resize(1);
      print_summaries(vnet::run_sweep(cfg));
    } else if (*sweep) {
      print_summaries(vnet::run_sweep(build_config(sweep_flags)));
    } else if (*evaluate) {
      const vnet::ScenarioConfig cfg = build_config(eval_flags);
      std::vector<vnet::RunSummary> rows;
      for (std::uint64_t seed : cfg.seeds) rows.push_back(vnet::evaluate_artifact(cfg, artifact, seed));
      print_summaries(rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "vnet: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
