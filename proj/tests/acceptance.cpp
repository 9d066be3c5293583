// Acceptance suite: one PASS/FAIL line per criterion.
//
//   sdcascade_acceptance [--known-failures 1,2] [--out DIR]
//
// Criteria listed as known failures still run and print FAIL, but do not
// change the exit status.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "sdcascade/experiments.hpp"
#include "sdcascade/sampling.hpp"
#include "sdcascade/unicycle.hpp"

using namespace sdc;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::set<std::string> parse_list(const std::string& s) {
  std::set<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Window sums of 400 sin^2(kT) summed directly over every start in one period.
double direct_pe_infimum(double T, double L) {
  const long l = static_cast<long>(std::floor(L / T));
  const long P = static_cast<long>(std::floor(2.0 * std::numbers::pi / T));
  double inf = std::numeric_limits<double>::infinity();
  for (long j = 0; j <= P; ++j) {
    double s = 0.0;
    for (long k = j; k <= j + l; ++k) {
      const double w = 20.0 * std::sin(static_cast<double>(k) * T);
      s += w * w;
    }
    inf = std::min(inf, T * s);
  }
  return inf;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> known;
  std::filesystem::path out_root = std::filesystem::temp_directory_path() / "sdcascade_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--known-failures" && i + 1 < argc) known = parse_list(argv[++i]);
    else if (a == "--out" && i + 1 < argc) out_root = argv[++i];
    else {
      std::cerr << "usage: sdcascade_acceptance [--known-failures 1,2] [--out DIR]\n";
      return 2;
    }
  }
  set_worker_count(1);

  int unexpected = 0;
  auto report = [&](const std::string& id, const std::string& title, const std::function<Result()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Result o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = seconds_since(t0);
    std::cout << "criterion " << id << " [" << title << "]: ";
    if (o.pass) {
      std::cout << "PASS";
    } else if (known.count(id)) {
      std::cout << "FAIL (known)";
    } else {
      std::cout << "FAIL";
      ++unexpected;
    }
    std::cout << " (" << o.detail << "; " << fmt(dt) << " s)" << std::endl;
  };

  auto timed = [](const std::function<ExperimentResult()>& run, double& secs) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run();
    secs = seconds_since(t0);
    return r;
  };

  report("1", "double integrator", [&] {
    double secs = 0.0;
    const auto r = timed([] { return run_example1(json::object(), 1); }, secs);
    const auto& m = r.metrics;
    const bool eig = m["euler_eigen_error_max"].get<double>() <= 1e-10;
    const bool unit = m["exact_unit_modulus_error_max"].get<double>() <= 1e-6;
    const double b = m["b"].get<double>();
    const auto conv = m["exact_converged_count"].get<std::size_t>();
    const bool fast = secs < 10.0;
    return Result{eig && unit && std::isfinite(b) && conv == 0 && fast,
                   "euler eig err " + fmt(m["euler_eigen_error_max"].get<double>()) + ", exact unit-modulus err " +
                       fmt(m["exact_unit_modulus_error_max"].get<double>()) + ", b=" + fmt(b) +
                       ", exact-proxy converged " + std::to_string(conv) + "/100, run " + fmt(secs) + " s"};
  });

  ExperimentResult uni;
  double uni_secs = 0.0;
  report("2", "unicycle comparison", [&] {
    uni = timed([] { return run_unicycle_compare(json::object(), 1); }, uni_secs);
    const auto& chk = uni.metrics["checks"];
    std::string ises;
    for (const auto& v : uni.metrics["variants"]) {
      ises += v["variant"].get<std::string>() + "=" + fmt(v["ise"].get<double>()) + " ";
    }
    const bool ok = chk["all_settle"].get<bool>() && chk["ise_full_below_none"].get<bool>() && uni_secs < 5.0;
    return Result{ok, "settle " + std::string(chk["all_settle"].get<bool>() ? "yes" : "no") + ", ISE " + ises +
                           "run " + fmt(uni_secs) + " s"};
  });

  report("3", "orientation exactness", [&] {
    if (uni.metrics.is_null() || !uni.metrics.contains("theta_exactness_error")) {
      uni = run_unicycle_compare(json::object(), 1);
    }
    const double err = uni.metrics["theta_exactness_error"].get<double>();
    // also the validated regime, where every variant is well behaved
    const json v = {{"refs", {{"vr", 0.5}, {"wr", {{"kind", "sine"}, {"amplitude", 0.5}}}}},
                    {"gains", {{"a1", 1.0}, {"a2", 1.0}, {"alpha_y", 0.1}}},
                    {"horizon_s", 1.0}};
    const auto r2 = run_unicycle_compare(v, 1);
    const double err2 = r2.metrics["theta_exactness_error"].get<double>();
    return Result{err <= 1e-12 && err2 <= 1e-12,
                   "max error " + fmt(err) + " (demo gains), " + fmt(err2) + " (validated gains) over " +
                       std::to_string(uni.metrics["theta_steps"].get<long>()) + " steps"};
  });

  report("4", "excitation", [&] {
    double secs = 0.0;
    const auto r = timed([] { return run_pe_check(json::object(), 1); }, secs);
    const double inf = r.metrics["infima"][0]["infimum"].get<double>();
    const double oracle = direct_pe_infimum(0.01, std::numbers::pi);
    const auto zero = run_pe_check({{"wr", 0}}, 1);
    const bool zero_falsified = zero.metrics["verdict"]["outcome"] == "falsified";
    const bool ok = r.passed && std::abs(inf - oracle) <= 1e-9 * oracle && zero_falsified && secs < 1.0;
    return Result{ok, "infimum " + fmt(inf) + " vs direct " + fmt(oracle) + " (mu 600), zero signal " +
                           zero.metrics["verdict"]["outcome"].get<std::string>() + ", run " + fmt(secs) + " s"};
  });

  ExperimentResult lyap;
  report("5", "lyapunov chain", [&] {
    double secs = 0.0;
    lyap = timed([] { return run_lyapunov_audit(json::object(), 1); }, secs);
    const auto& chk = lyap.metrics["checks"];
    if (!chk["constants_valid"].get<bool>()) return Result{false, "constants invalid"};
    std::string worst;
    for (const auto& c : lyap.metrics["chain"]["checks"]) {
      worst += c["name"].get<std::string>() + ":" + (c["worst_ratio"].is_null() ? "-" : fmt(c["worst_ratio"].get<double>())) + " ";
    }
    const bool ok = chk["chain"].get<bool>() && secs < 30.0;
    return Result{ok, "outcome " + lyap.metrics["chain"]["outcome"].get<std::string>() + ", worst ratios " + worst +
                           "run " + fmt(secs) + " s"};
  });

  report("6", "consistency orders", [&] {
    double secs = 0.0;
    const auto r = timed([] { return run_consistency_sweep({{"plant", "unicycle"}}, 1); }, secs);
    const double se = r.metrics["euler_slope"].get<double>(), sm = r.metrics["slope"].get<double>();
    const bool ok = std::abs(se - 2.0) <= 0.15 && sm >= 1.9 && secs < 30.0;
    return Result{ok, "euler slope " + fmt(se) + ", modified euler slope " + fmt(sm) + ", run " + fmt(secs) + " s"};
  });

  report("7", "interconnection bound", [&] {
    const auto refs = ReferenceSignal::make(ScalarSignal::constant(0.5), ScalarSignal::sine(0.5));
    const ControllerGains gains{1.0, 1.0, 0.1, CorrectionKind::full, 0.5};
    const std::vector<double> Ts{0.02, 0.01};
    const double c = interconnection_constant(refs, gains);
    const auto g1 = interconnection_growth_bound(refs, gains, 0.02);
    const auto g2 = ClassKFunction::affine_capped(c, c);
    const auto g3 = ClassKFunction::identity();
    AuditDomain dom;
    dom.x_radius = 5.0;
    dom.z_radius = 1.0;
    const auto scaled = check_interconnection_bound(closed_loop_euler_cascade(refs, gains), g1, g2, g3, dom, Ts);
    const auto unscaled =
        check_interconnection_bound(unscaled_interconnection_cascade(refs, gains), g1, g2, g3, dom, Ts);
    const bool ok = scaled.passed() && unscaled.falsified() && unscaled.witness.has_value();
    std::string wit = "none";
    if (unscaled.witness) {
      wit = unscaled.witness->check + " at T=" + fmt(unscaled.witness->T) + " k=" + std::to_string(unscaled.witness->k);
    }
    return Result{ok, "c=" + fmt(c) + ", with T factor " + to_string(scaled.outcome) + " (worst ratio " +
                           fmt(scaled.find_check("interconnection")->worst_ratio) + "), without T factor " +
                           to_string(unscaled.outcome) + ", witness " + wit};
  });

  report("8", "certificate transform", [&] {
    if (lyap.metrics.is_null()) lyap = run_lyapunov_audit(json::object(), 1);
    const double err = lyap.metrics["rho_closed_form_error"].get<double>();
    if (!lyap.metrics.contains("ugb")) return Result{false, "rho error " + fmt(err) + ", certificate not audited"};
    const auto& u = lyap.metrics["ugb"];
    const bool ugb = u["verdict"]["outcome"] == "pass";
    return Result{err <= 1e-8 && ugb, "rho error " + fmt(err) + ", W-increment audit " +
                                           u["verdict"]["outcome"].get<std::string>() + " with d=" +
                                           fmt(u["d"].get<double>()) + " (cases: decrease " +
                                           std::to_string(u["decrease_cases"].get<std::size_t>()) + ", V<=1 " +
                                           std::to_string(u["small_v_cases"].get<std::size_t>()) + ", V>1 " +
                                           std::to_string(u["large_v_cases"].get<std::size_t>()) + ")"};
  });

  json demo_metrics;
  report("9", "determinism", [&] {
    std::string mismatches;
    std::size_t files = 0;
    for (const auto& info : experiment_registry()) {
      const auto a = out_root / (info.name + "_jobs1");
      const auto b = out_root / (info.name + "_jobs4");
      std::filesystem::remove_all(a);
      std::filesystem::remove_all(b);
      std::ostringstream log;
      const auto ca = run_experiment({info.name, json::object(), a, 1, 1}, log);
      const auto cb = run_experiment({info.name, json::object(), b, 1, 4}, log);
      if (ca != cb) mismatches += info.name + "(exit code) ";
      if (!std::filesystem::exists(a)) {
        mismatches += info.name + "(no output) ";
        continue;
      }
      for (const auto& entry : std::filesystem::directory_iterator(a)) {
        ++files;
        if (slurp(entry.path()) != slurp(b / entry.path().filename())) {
          mismatches += info.name + "/" + entry.path().filename().string() + " ";
        }
      }
      if (info.name == "cascade-theorem-demo") demo_metrics = json::parse(slurp(a / "metrics.json"));
    }
    set_worker_count(1);
    return Result{mismatches.empty(), std::to_string(files) + " files compared across --jobs 1 and 4" +
                                           (mismatches.empty() ? "" : ", differing: " + mismatches)};
  });

  report("cross-check", "fitted envelope on the audited region", [&] {
    if (demo_metrics.is_null()) return Result{false, "cascade demo produced no report"};
    const auto& chk = demo_metrics["metrics"]["checks"];
    const bool hyp = chk["hypotheses"].get<bool>();
    const bool concl = chk["conclusion"].get<bool>();
    std::string beta = "none";
    if (!demo_metrics["metrics"]["fitted_beta"].is_null()) {
      beta = "M=" + fmt(demo_metrics["metrics"]["fitted_beta"]["gain"].get<double>()) +
             " lambda=" + fmt(demo_metrics["metrics"]["fitted_beta"]["rate"].get<double>());
    }
    return Result{!hyp || concl, std::string("hypotheses ") + (hyp ? "pass" : "fail") + ", falsify_spuas " +
                                      (concl ? "pass" : "fail") + ", fitted beta " + beta};
  });

  std::cout << (unexpected == 0 ? "acceptance: OK" : "acceptance: " + std::to_string(unexpected) + " unexpected failure(s)")
            << std::endl;
  return unexpected == 0 ? 0 : 1;
}
