#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "sdcascade/experiments.hpp"
#include "sdcascade/sampling.hpp"

namespace sdc {

namespace {

std::string header_line(const ExperimentConfig& config, const std::string& hash) {
  return "# experiment=" + config.name + " config_hash=" + hash + " seed=" + std::to_string(config.seed) + "\n";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string config_hash(const std::string& name, const json& params) {
  // nlohmann's object type is an ordered std::map, so dump() is canonical.
  const std::string canon = json{{"experiment", name}, {"params", params}}.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_budget(const json& params, double planned_steps, const std::string& what) {
  const double budget = params.value("max_steps", 5.0e8);
  if (!(budget > 0.0)) throw DomainError("max_steps must be positive");
  if (planned_steps > budget) {
    std::ostringstream msg;
    msg << what << " plans " << planned_steps << " steps, above the budget max_steps=" << budget;
    throw BudgetError(msg.str());
  }
}

void emit_report(const ExperimentResult& result, const ExperimentConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + config.out_dir.string() + ": " + ec.message());

  const std::string hash = config_hash(config.name, config.params);
  json doc;
  doc["header"] = {{"experiment", config.name}, {"config_hash", hash}, {"seed", config.seed}};
  doc["passed"] = result.passed;
  doc["metrics"] = result.metrics;
  json names = json::array();
  for (const auto& f : result.files) names.push_back(f.name);
  doc["files"] = names;
  write_file(config.out_dir / "metrics.json", doc.dump(2) + "\n");

  for (const auto& f : result.files) write_file(config.out_dir / f.name, header_line(config, hash) + f.body);
}

ExitCode run_experiment(const ExperimentConfig& config, std::ostream& log) {
  const ExperimentInfo* info = find_experiment(config.name);
  if (!info) {
    log << "error: unknown experiment '" << config.name << "'\n";
    return ExitCode::config_error;
  }
  if (!config.params.is_object()) {
    log << "error: config must be a JSON object\n";
    return ExitCode::config_error;
  }
  if (config.jobs < 1) {
    log << "error: --jobs must be at least 1\n";
    return ExitCode::config_error;
  }
  set_worker_count(config.jobs);

  ExperimentResult result;
  try {
    result = info->run(config.params, config.seed);
  } catch (const BudgetError& e) {
    log << "budget error: " << e.what() << "\n";
    return ExitCode::config_error;
  } catch (const json::exception& e) {
    log << "config error: " << e.what() << "\n";
    return ExitCode::config_error;
  } catch (const DomainError& e) {
    log << "config error: " << e.what() << "\n";
    return ExitCode::config_error;
  } catch (const NumericError& e) {
    log << "numeric error: " << e.what() << "\n";
    return ExitCode::numeric_error;
  }

  try {
    emit_report(result, config);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return ExitCode::failed;
  }
  log << config.name << ": " << (result.passed ? "PASS" : "FAIL");
  if (!result.summary.empty()) log << " (" << result.summary << ")";
  log << "\n";
  return result.passed ? ExitCode::pass : ExitCode::failed;
}

}  // namespace sdc
