#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sdcascade/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sampled-data cascade experiments"};
  app.require_subcommand(1);

  std::string name, config_path, out_dir;
  std::uint64_t seed = 1;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "run a registered experiment");
  run->add_option("--experiment", name, "experiment name")->required();
  run->add_option("--config", config_path, "JSON config file (omit for defaults)");
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--seed", seed, "sampling seed");
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* list = app.add_subcommand("list", "print registered experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(sdc::ExitCode::config_error);
  }

  if (*list) {
    for (const auto& e : sdc::experiment_registry()) std::cout << e.name << "\t" << e.description << "\n";
    return 0;
  }

  sdc::ExperimentConfig cfg;
  cfg.name = name;
  cfg.out_dir = out_dir;
  cfg.seed = seed;
  cfg.jobs = jobs;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config " << config_path << "\n";
      return static_cast<int>(sdc::ExitCode::config_error);
    }
    try {
      cfg.params = sdc::json::parse(in);
    } catch (const sdc::json::parse_error& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return static_cast<int>(sdc::ExitCode::config_error);
    }
    // a config may carry its own experiment name; the flag wins
    if (cfg.params.is_object()) cfg.params.erase("name");
  }
  return static_cast<int>(sdc::run_experiment(cfg, std::cerr));
}
