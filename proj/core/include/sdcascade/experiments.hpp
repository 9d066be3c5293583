#pragma once

// Named, reproducible experiments and the report writer shared by the CLI
// and the acceptance suite.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "sdcascade/numerics.hpp"

namespace sdc {

enum class ExitCode : int { pass = 0, failed = 1, config_error = 2, numeric_error = 3 };

/// Planned work exceeds the configured step budget.
class BudgetError : public DomainError {
 public:
  using DomainError::DomainError;
};

struct ExperimentConfig {
  std::string name;
  json params = json::object();
  std::filesystem::path out_dir;
  std::uint64_t seed = 1;
  int jobs = 1;
};

enum class FileKind { csv, dat };

/// Data file body without the provenance header.
struct OutputFile {
  std::string name;
  FileKind kind = FileKind::csv;
  std::string body;
};

struct ExperimentResult {
  bool passed = true;
  json metrics = json::object();
  std::vector<OutputFile> files;
  std::string summary;  // one line for the console
};

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::function<ExperimentResult(const json& params, std::uint64_t seed)> run;
};

const std::vector<ExperimentInfo>& experiment_registry();
const ExperimentInfo* find_experiment(const std::string& name);

/// FNV-1a (64 bit) of the canonical dump of {"experiment": name, "params": params}, as 16 hex digits.
std::string config_hash(const std::string& name, const json& params);

/// Writes metrics.json and every data file under config.out_dir. CSV and
/// .dat files start with a '#' comment line carrying the experiment name,
/// config hash and seed; metrics.json carries them in its "header" object.
void emit_report(const ExperimentResult& result, const ExperimentConfig& config);

/// Runs the experiment, writes its report and maps the outcome to an exit
/// code (config errors 2, numeric failures 3, failed checks 1).
ExitCode run_experiment(const ExperimentConfig& config, std::ostream& log);

/// Refuses work above params["max_steps"] (default 5e8 simulated steps).
void check_budget(const json& params, double planned_steps, const std::string& what);

// Individual experiments, callable without the report writer.
ExperimentResult run_example1(const json& params, std::uint64_t seed);
ExperimentResult run_unicycle_compare(const json& params, std::uint64_t seed);
ExperimentResult run_consistency_sweep(const json& params, std::uint64_t seed);
ExperimentResult run_lyapunov_audit(const json& params, std::uint64_t seed);
ExperimentResult run_pe_check(const json& params, std::uint64_t seed);
ExperimentResult run_cascade_theorem_demo(const json& params, std::uint64_t seed);

}  // namespace sdc
