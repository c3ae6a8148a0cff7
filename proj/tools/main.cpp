// banditrex command-line experiment runner.
//
// Subcommands:
//   generate  write a synthetic dataset (4 CSVs + ground_truth.json)
//   run       execute the configured experiment end to end
//   evaluate  like run, but the environment is loaded from a data directory
//   report    aggregate a results directory into summary tables
//
// Exit codes: 0 success, 1 invalid configuration (the message names the
// offending field), 2 missing data file, 3 solver failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "banditrex/banditrex.hpp"

namespace {

using banditrex::ExperimentConfig;
using banditrex::json;

json load_json_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw banditrex::MissingDataFile("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw banditrex::InvalidConfig("config", std::string("not valid JSON: ") + e.what());
  }
  return j;
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        std::optional<std::uint64_t> seed_override,
                                        const std::vector<std::string>& policy_filter,
                                        std::optional<std::string> out_override) {
  json j = load_json_config(path);
  ExperimentConfig cfg = banditrex::experiment_config_from_json(j);
  if (seed_override) cfg.seed = *seed_override;
  if (out_override) cfg.output_dir = *out_override;
  if (!policy_filter.empty()) {
    std::vector<banditrex::PolicyConfig> kept;
    for (const std::string& name : policy_filter) {
      bool found = false;
      for (const banditrex::PolicyConfig& p : cfg.policies) {
        if (p.name == name) {
          kept.push_back(p);
          found = true;
          break;
        }
      }
      if (!found)
        throw banditrex::InvalidConfig("--policies", "unknown policy " + name);
    }
    cfg.policies = std::move(kept);
    cfg.validate();
  }
  return cfg;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override, bool quiet) {
  json j = load_json_config(config_path);
  banditrex::EnvConfig env_cfg =
      j.contains("environment")
          ? banditrex::io::env_config_from_json(j.at("environment"), "environment")
          : banditrex::io::env_config_from_json(j, "environment");
  if (seed_override) env_cfg.seed = *seed_override;
  env_cfg.validate();

  // the dataset chain hangs off the experiment seed when one is present, so
  // that `evaluate` against this directory reproduces `run` exactly
  std::uint64_t data_seed = env_cfg.seed;
  if (seed_override) data_seed = *seed_override;
  else if (j.contains("environment") && j.contains("seed"))
    data_seed = j.at("seed").get<std::uint64_t>();

  const banditrex::SyntheticEnvironment env = banditrex::generate_environment(env_cfg);
  // dataset = replication-0 logging data, same derivation chain as `run`
  const std::uint64_t rep_seed = banditrex::Rng::derive(data_seed, "replication", {0});
  const banditrex::GeneratedData data = banditrex::generate_logs(
      env, banditrex::LoggingPolicy::kUniformRandomK, env_cfg.horizon_weeks,
      banditrex::Rng::derive(rep_seed, "logs"));

  banditrex::io::save_environment(env, out_dir);
  banditrex::io::save_generated_data(data, out_dir);
  if (!quiet)
    std::cerr << "[banditrex] wrote challenges.csv, users.csv, weighins.csv, "
                 "selections.csv, ground_truth.json to "
              << out_dir << "\n";
  return 0;
}

int cmd_run(const ExperimentConfig& cfg, bool quiet) {
  const banditrex::RunOutputs out = banditrex::run_experiment(cfg, std::nullopt, quiet);
  banditrex::write_outputs(cfg, out, cfg.output_dir);
  if (!quiet)
    std::cerr << "[banditrex] results written to " << cfg.output_dir << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& data_dir, bool quiet) {
  const banditrex::SyntheticEnvironment env = banditrex::io::load_environment(data_dir);

  // integrity check: replication-0 selections regenerate identically
  const std::uint64_t rep_seed = banditrex::Rng::derive(cfg.seed, "replication", {0});
  const banditrex::GeneratedData regen = banditrex::generate_logs(
      env, banditrex::LoggingPolicy::kUniformRandomK, env.config.horizon_weeks,
      banditrex::Rng::derive(rep_seed, "logs"));
  const auto stored = banditrex::io::load_selections(
      (std::filesystem::path(data_dir) / "selections.csv").string());
  if (!(stored == regen.selections))
    throw banditrex::InvalidConfig(
        "seed", "data directory selections do not match the configured seed");

  const banditrex::RunOutputs out = banditrex::run_experiment(cfg, env, quiet);
  banditrex::write_outputs(cfg, out, cfg.output_dir);
  if (!quiet)
    std::cerr << "[banditrex] results written to " << cfg.output_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diversity-constrained contextual bandit experiment runner"};
  app.require_subcommand(1);
  app.fallthrough();  // --quiet etc. may follow the subcommand

  std::string config_path;
  std::string out_dir;
  std::string data_dir;
  std::string results_dir;
  std::vector<std::string> policy_filter;
  std::optional<std::uint64_t> seed_override;
  bool quiet = false;

  app.add_flag("--quiet", quiet, "suppress progress output");

  CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset");
  generate->add_option("--config", config_path, "environment config JSON")->required();
  generate->add_option("--out", out_dir, "output directory")->required();
  generate->add_option("--seed", seed_override, "override the config seed");

  CLI::App* run = app.add_subcommand("run", "run the configured experiment");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--out", out_dir, "override the config output_dir");
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--policies", policy_filter, "comma-separated policy filter")
      ->delimiter(',');

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "run against a generated data directory");
  evaluate->add_option("--config", config_path, "experiment config JSON")->required();
  evaluate->add_option("--data", data_dir, "directory written by generate")->required();
  evaluate->add_option("--out", out_dir, "override the config output_dir");
  evaluate->add_option("--seed", seed_override, "override the config seed");
  evaluate->add_option("--policies", policy_filter, "comma-separated policy filter")
      ->delimiter(',');

  CLI::App* report = app.add_subcommand("report", "summarize a results directory");
  report->add_option("results", results_dir, "results directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed())
      return cmd_generate(config_path, out_dir, seed_override, quiet);
    if (run->parsed()) {
      const ExperimentConfig cfg = load_experiment_config(
          config_path, seed_override, policy_filter,
          out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir));
      return cmd_run(cfg, quiet);
    }
    if (evaluate->parsed()) {
      const ExperimentConfig cfg = load_experiment_config(
          config_path, seed_override, policy_filter,
          out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir));
      return cmd_evaluate(cfg, data_dir, quiet);
    }
    if (report->parsed()) {
      banditrex::write_report(results_dir, std::cout);
      return 0;
    }
  } catch (const banditrex::InvalidConfig& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 1;
  } catch (const banditrex::MissingDataFile& e) {
    std::cerr << "missing data file: " << e.what() << "\n";
    return 2;
  } catch (const banditrex::SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
