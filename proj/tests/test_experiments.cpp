#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sdcascade/experiments.hpp"
#include "sdcascade/sampling.hpp"

using namespace sdc;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sdcascade_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExitCode run_quiet(ExperimentConfig cfg) {
  std::ostringstream log;
  return run_experiment(cfg, log);
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("registry lists the experiments") {
  for (const char* name : {"example1", "unicycle-compare", "consistency-sweep", "lyapunov-audit", "pe-check",
                           "cascade-theorem-demo"}) {
    const auto* info = find_experiment(name);
    REQUIRE(info != nullptr);
    CHECK_FALSE(info->description.empty());
  }
  CHECK(find_experiment("nope") == nullptr);
}

TEST_CASE("config hash is canonical") {
  const json a = json::parse(R"({"b": 1, "a": [1, 2]})");
  const json b = json::parse(R"({"a": [1, 2], "b": 1})");
  CHECK(config_hash("x", a) == config_hash("x", b));
  CHECK(config_hash("x", a) != config_hash("y", a));
  CHECK(config_hash("x", a).size() == 16);
  // FNV-1a of the empty-object document, computed by hand
  const std::string doc = R"({"experiment":"e","params":{}})";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream hex;
  hex << std::hex;
  hex.width(16);
  hex.fill('0');
  hex << h;
  CHECK(config_hash("e", json::object()) == hex.str());
}

TEST_CASE("report files carry the header") {
  ExperimentConfig cfg{"pe-check", json::object(), scratch("header"), 7, 1};
  REQUIRE(run_quiet(cfg) == ExitCode::pass);
  const auto hash = config_hash("pe-check", json::object());
  const auto body = slurp(cfg.out_dir / "pe_windows.csv");
  CHECK(body.rfind("# experiment=pe-check config_hash=" + hash + " seed=7\n", 0) == 0);
  const auto doc = json::parse(slurp(cfg.out_dir / "metrics.json"));
  CHECK(doc["header"]["config_hash"] == hash);
  CHECK(doc["header"]["seed"] == 7);
  CHECK(doc["passed"] == true);
}

TEST_CASE("exit codes") {
  CHECK(run_quiet({"nope", json::object(), scratch("unknown"), 1, 1}) == ExitCode::config_error);
  CHECK(run_quiet({"pe-check", json::array(), scratch("array"), 1, 1}) == ExitCode::config_error);
  CHECK(run_quiet({"pe-check", json::object(), scratch("jobs"), 1, 0}) == ExitCode::config_error);
  CHECK(run_quiet({"pe-check", {{"mu", "big"}}, scratch("type"), 1, 1}) == ExitCode::config_error);
  CHECK(run_quiet({"pe-check", {{"wr", 0}}, scratch("zero"), 1, 1}) == ExitCode::failed);
  CHECK(run_quiet({"example1", {{"max_steps", 10}}, scratch("budget"), 1, 1}) == ExitCode::config_error);
  CHECK_THROWS_AS(check_budget({{"max_steps", 100}}, 101.0, "x"), BudgetError);
  CHECK_NOTHROW(check_budget({{"max_steps", 100}}, 100.0, "x"));
}

TEST_CASE("example1 eigenvalues at T = 0.19") {
  const json p = {{"T", 0.19}, {"trajectories", 4}, {"steps", 200}, {"tail_window", 10}};
  const auto res = run_example1(p, 1);
  const auto& row = res.metrics["eigenvalues"][0];
  CHECK(row["euler_eigenvalues"][0].get<double>() == doctest::Approx(-0.9).epsilon(1e-10));
  CHECK(row["euler_eigenvalues"][1].get<double>() == doctest::Approx(0.9).epsilon(1e-10));
  // exact closed loop [[1 - T/2, 0], [-1, -1]]
  CHECK(row["exact_eigenvalues_re"][0].get<double>() == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(row["exact_eigenvalues_re"][1].get<double>() == doctest::Approx(1.0 - 0.19 / 2.0).epsilon(1e-7));
  CHECK(res.metrics["exact_unit_modulus_error_max"].get<double>() <= 1e-6);
  CHECK(res.metrics["checks"]["eigenvalues"] == true);
}

TEST_CASE("outputs do not depend on the worker count") {
  const std::vector<std::pair<std::string, json>> runs = {
      {"pe-check", json::object()},
      {"example1", {{"trajectories", 6}, {"steps", 300}, {"tail_window", 20}}},
      {"consistency-sweep", {{"samples", 32}}},
  };
  for (const auto& [name, params] : runs) {
    const auto a = scratch(name + "_j1"), b = scratch(name + "_j4");
    run_quiet({name, params, a, 3, 1});
    run_quiet({name, params, b, 3, 4});
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(a)) {
      ++files;
      CHECK_MESSAGE(slurp(entry.path()) == slurp(b / entry.path().filename()), entry.path().string());
    }
    CHECK(files >= 2);
  }
  set_worker_count(1);
}

TEST_CASE("seed changes random draws but not the config hash") {
  const json p = {{"trajectories", 3}, {"steps", 50}, {"tail_window", 5}};
  const auto a = run_example1(p, 1), b = run_example1(p, 2);
  CHECK(a.files[1].body != b.files[1].body);
  CHECK(run_example1(p, 1).files[1].body == a.files[1].body);
}

}
