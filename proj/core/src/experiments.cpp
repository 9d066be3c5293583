#include "sdcascade/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "sdcascade/cascade.hpp"
#include "sdcascade/discretize.hpp"
#include "sdcascade/sampling.hpp"
#include "sdcascade/stability.hpp"
#include "sdcascade/unicycle.hpp"

namespace sdc {

namespace {

std::vector<double> get_list(const json& p, const char* key, std::vector<double> fallback) {
  if (!p.contains(key)) return fallback;
  auto v = p.at(key).get<std::vector<double>>();
  if (v.empty()) throw DomainError(std::string(key) + " must not be empty");
  return v;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    out[i] = lo * std::pow(hi / lo, f);
  }
  return out;
}

std::ostringstream precise_stream() {
  std::ostringstream s;
  s.precision(17);
  return s;
}

void append_checks_csv(std::ostringstream& out, const std::string& audit, const StabilityVerdict& v) {
  for (const auto& c : v.checks) {
    out << audit << ',' << c.name << ',' << c.samples << ',' << c.min_slack << ',' << c.worst_ratio << ','
        << to_string(v.outcome) << '\n';
  }
}

// Defaults of the small-gain regime in which every case-study constant is positive.
json validated_defaults() {
  return {{"refs", {{"vr", {{"kind", "constant"}, {"amplitude", 0.5}}},
                    {"wr", {{"kind", "sine"}, {"amplitude", 0.5}, {"frequency", 1.0}}}}},
          {"gains", {{"a1", 1.0}, {"a2", 1.0}, {"alpha_y", 0.1}, {"correction", "full"}}},
          {"T", 0.01},
          {"T_star", 0.02},
          {"L_pe", std::numbers::pi}};
}

json with_defaults(json defaults, const json& params) {
  defaults.merge_patch(params);
  return defaults;
}

// ---- example1 ----------------------------------------------------------------

VectorField double_integrator() {
  VectorField f;
  f.dim_x = 2;
  f.dim_u = 1;
  f.eval = [](double, const Vector& x, const Vector& u) { return Vector{{x[1], u[0]}}; };
  return f;
}

InputLaw deadbeat_law() {
  return InputLaw::feedback(1, [](double T, long, const Vector& x) { return Vector{{-(x[0] + 2.0 * x[1]) / T}}; });
}

Eigen::Matrix2d jacobian_at_origin(const ParameterizedMap& F, double T, double h) {
  Eigen::Matrix2d J;
  for (int i = 0; i < 2; ++i) {
    Vector e = Vector::Zero(2);
    e[i] = h;
    J.col(i) = (F.step(T, 0, e) - F.step(T, 0, -e)) / (2.0 * h);
  }
  return J;
}

struct Ex1Trajectory {
  double log_ratio_max = -std::numeric_limits<double>::infinity();
  double tail_ratio = 0.0;
  double min_ratio = std::numeric_limits<double>::infinity();
};

}  // namespace

ExperimentResult run_example1(const json& params, std::uint64_t seed) {
  const auto T_list = get_list(params, "T_list", params.contains("T") ? std::vector<double>{params.at("T").get<double>()}
                                                                     : std::vector<double>{0.01, 0.1, 0.19, 0.3});
  const auto count = params.value("trajectories", std::size_t{100});
  const double T_lo = params.value("T_min", 1e-3), T_hi = params.value("T_max", 0.5);
  const long steps = params.value("steps", 10000L);
  const long tail = params.value("tail_window", 100L);
  const double fraction = params.value("converge_fraction", 0.1);
  const double decay = params.value("decay_rate", 0.5);
  const double tol = params.value("proxy_tol", 1e-10);
  if (!(T_lo > 0.0) || !(T_hi > T_lo) || steps < 1 || tail < 1 || tail > steps) {
    throw DomainError("example1: need 0 < T_min < T_max, steps >= tail_window >= 1");
  }
  for (double T : T_list) {
    if (!(T > 0.0) || !(T < 1.0)) throw DomainError("example1: T must lie in (0, 1)");
  }
  check_budget(params, 2.0 * static_cast<double>(count) * static_cast<double>(steps), "example1");

  const auto field = double_integrator();
  const auto law = deadbeat_law();
  const auto euler = euler_map(field, law);
  const auto exact = exact_proxy_map(field, law, tol);

  ExperimentResult res;
  auto eig = precise_stream();
  eig << "T,euler_re1,euler_im1,euler_re2,euler_im2,expected,euler_err,exact_re1,exact_im1,exact_re2,exact_im2,"
         "unit_modulus_err\n";
  double euler_err_max = 0.0, unit_err_max = 0.0;
  json eig_rows = json::array();
  for (double T : T_list) {
    Eigen::EigenSolver<Eigen::Matrix2d> es_e(jacobian_at_origin(euler, T, 1.0));
    Eigen::EigenSolver<Eigen::Matrix2d> es_x(jacobian_at_origin(exact, T, 1.0));
    auto le = es_e.eigenvalues();
    auto lx = es_x.eigenvalues();
    std::array<std::complex<double>, 2> e{le[0], le[1]}, x{lx[0], lx[1]};
    auto by_real = [](auto a, auto b) { return a.real() < b.real(); };
    std::sort(e.begin(), e.end(), by_real);
    std::sort(x.begin(), x.end(), by_real);
    const double r = std::sqrt(1.0 - T);
    const double err = std::max(std::abs(e[0] - std::complex<double>(-r, 0.0)), std::abs(e[1] - std::complex<double>(r, 0.0)));
    const double unit = std::min(std::abs(std::abs(x[0]) - 1.0), std::abs(std::abs(x[1]) - 1.0));
    euler_err_max = std::max(euler_err_max, err);
    unit_err_max = std::max(unit_err_max, unit);
    eig << T << ',' << e[0].real() << ',' << e[0].imag() << ',' << e[1].real() << ',' << e[1].imag() << ',' << r
        << ',' << err << ',' << x[0].real() << ',' << x[0].imag() << ',' << x[1].real() << ',' << x[1].imag() << ','
        << unit << '\n';
    eig_rows.push_back({{"T", T},
                        {"euler_eigenvalues", {e[0].real(), e[1].real()}},
                        {"euler_error", err},
                        {"exact_eigenvalues_re", {x[0].real(), x[1].real()}},
                        {"exact_eigenvalues_im", {x[0].imag(), x[1].imag()}},
                        {"exact_unit_modulus_error", unit}});
  }
  res.files.push_back({"example1_eigenvalues.csv", FileKind::csv, eig.str()});

  // Draw every random quantity before the parallel section.
  Rng rng(seed);
  std::vector<double> Ts(count);
  std::vector<Vector> x0s(count);
  for (std::size_t i = 0; i < count; ++i) {
    Ts[i] = rng.uniform(T_lo, T_hi);
    Vector x0(2);
    do {
      x0[0] = rng.uniform(-1.0, 1.0);
      x0[1] = rng.uniform(-1.0, 1.0);
    } while (x0.norm() == 0.0);
    x0s[i] = x0;
  }

  std::vector<Ex1Trajectory> out(count);
  parallel_for(count, [&](std::size_t i) {
    const double T = Ts[i];
    const double n0 = x0s[i].norm();
    auto& r = out[i];
    Vector x = x0s[i];
    for (long k = 0; k <= steps; ++k) {
      if (k > 0) x = euler.step(T, k - 1, x);
      const double n = x.norm();
      // logs keep e^{0.5 k T} from overflowing at large k
      if (n > 0.0) r.log_ratio_max = std::max(r.log_ratio_max, std::log(n / n0) + decay * static_cast<double>(k) * T);
    }
    x = x0s[i];
    for (long k = 0; k <= steps; ++k) {
      if (k > 0) x = exact.step(T, k - 1, x);
      const double ratio = x.norm() / n0;
      r.min_ratio = std::min(r.min_ratio, ratio);
      if (k > steps - tail) r.tail_ratio = std::max(r.tail_ratio, ratio);
    }
  });

  double log_b = -std::numeric_limits<double>::infinity();
  std::size_t converged = 0;
  double tail_min = std::numeric_limits<double>::infinity();
  auto traj = precise_stream();
  traj << "id,T,x1,x2,euler_ratio_max,exact_tail_ratio,exact_min_ratio,exact_converged\n";
  for (std::size_t i = 0; i < count; ++i) {
    const auto& r = out[i];
    log_b = std::max(log_b, r.log_ratio_max);
    const bool conv = r.tail_ratio < fraction;
    converged += conv ? 1 : 0;
    tail_min = std::min(tail_min, r.tail_ratio);
    traj << i << ',' << Ts[i] << ',' << x0s[i][0] << ',' << x0s[i][1] << ',' << std::exp(r.log_ratio_max) << ','
         << r.tail_ratio << ',' << r.min_ratio << ',' << (conv ? 1 : 0) << '\n';
  }
  res.files.push_back({"example1_trajectories.csv", FileKind::csv, traj.str()});

  // First trajectory under both models, every 10th step, for plotting.
  if (count > 0) {
    auto dat = precise_stream();
    dat << "# k t euler_x1 euler_x2 exact_x1 exact_x2\n";
    Vector xe = x0s[0], xx = x0s[0];
    const long shown = std::min(steps, 2000L);
    for (long k = 0; k <= shown; ++k) {
      if (k > 0) {
        xe = euler.step(Ts[0], k - 1, xe);
        xx = exact.step(Ts[0], k - 1, xx);
      }
      if (k % 10 == 0) {
        dat << k << ' ' << static_cast<double>(k) * Ts[0] << ' ' << xe[0] << ' ' << xe[1] << ' ' << xx[0] << ' '
            << xx[1] << '\n';
      }
    }
    res.files.push_back({"example1_sample.dat", FileKind::dat, dat.str()});
  }

  const double b = count > 0 ? std::exp(log_b) : 0.0;
  const bool eig_ok = euler_err_max <= 1e-10 && unit_err_max <= 1e-6;
  const bool b_ok = std::isfinite(b);
  const bool exact_ok = converged == 0;
  res.passed = eig_ok && b_ok && exact_ok;
  res.metrics = {{"eigenvalues", eig_rows},
                 {"euler_eigen_error_max", euler_err_max},
                 {"exact_unit_modulus_error_max", unit_err_max},
                 {"trajectories", count},
                 {"T_range", {T_lo, T_hi}},
                 {"decay_rate", decay},
                 {"b", b},
                 {"exact_steps", steps},
                 {"converge_fraction", fraction},
                 {"exact_converged_count", converged},
                 {"exact_tail_ratio_min", count > 0 ? json(tail_min) : json(nullptr)},
                 {"checks", {{"eigenvalues", eig_ok}, {"euler_envelope", b_ok}, {"exact_nonconvergence", exact_ok}}}};
  std::ostringstream s;
  s << "b=" << b << ", exact-proxy converged " << converged << "/" << count;
  res.summary = s.str();
  return res;
}

// ---- unicycle-compare ------------------------------------------------------------

namespace {

json demo_defaults(double T) {
  return {{"refs", {{"vr", {{"kind", "constant"}, {"amplitude", 1.0}}},
                    {"wr", {{"kind", "sine"}, {"amplitude", 20.0}, {"frequency", 1.0}}}}},
          {"gains", {{"a1", 10.0}, {"a2", 70.0}, {"alpha_y", 2.0 - T}}},
          {"T", T},
          {"horizon_s", 10.0},
          {"initial_error", {1.0, 1.0, 0.5}},
          {"plant", "euler"},
          {"variants", {"none", "scaled", "full"}}};
}

}  // namespace

ExperimentResult run_unicycle_compare(const json& params, std::uint64_t) {
  const double T0 = params.value("T", 0.01);
  const json p = with_defaults(demo_defaults(T0), params);
  const auto cfg = ComparisonConfig::from_json(p);
  const long theta_steps = p.value("theta_steps", 2000L);
  const long steps = horizon_index(cfg.horizon_s, cfg.T);
  check_budget(p, static_cast<double>(cfg.variants.size()) * static_cast<double>(steps + theta_steps),
               "unicycle-compare");

  const auto result = run_comparison_experiment(cfg);
  ExperimentResult res;
  for (const auto& run : result.runs) {
    auto csv = precise_stream();
    run.write_csv(csv);
    res.files.push_back({"unicycle_" + to_string(run.variant) + ".csv", FileKind::csv, csv.str()});
  }
  auto dat = precise_stream();
  dat << "# variant_index ise peak_v energy\n";
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& m = result.runs[i].metrics;
    dat << i << ' ' << m.ise << ' ' << m.peak_v << ' ' << m.energy << '\n';
  }
  res.files.push_back({"unicycle_metrics.dat", FileKind::dat, dat.str()});

  res.metrics = result.metrics_json();
  bool all_settle = true;
  std::optional<double> ise_none, ise_full;
  for (const auto& run : result.runs) {
    all_settle = all_settle && run.metrics.settle_full.has_value();
    if (run.variant == CorrectionKind::none) ise_none = run.metrics.ise;
    if (run.variant == CorrectionKind::full) ise_full = run.metrics.ise;
  }
  const bool ordering = ise_none && ise_full && *ise_full < *ise_none;

  // theta_e(k) against (1 - T a1)^k theta_e(0) on the Euler plant
  std::optional<double> theta_err;
  if (cfg.plant == PlantModel::euler) {
    auto long_cfg = cfg;
    long_cfg.horizon_s = static_cast<double>(theta_steps) * cfg.T;
    const auto long_run = run_comparison_experiment(long_cfg);
    const double q = 1.0 - cfg.T * cfg.gains.a1;
    double err = 0.0;
    for (const auto& run : long_run.runs) {
      for (const auto& row : run.rows) {
        if (row[0] > static_cast<double>(theta_steps)) break;
        err = std::max(err, std::abs(row[4] - std::pow(q, row[0]) * cfg.initial.theta_e));
      }
    }
    theta_err = err;
  }
  const bool theta_ok = !theta_err || *theta_err <= 1e-12;

  // Sufficient-condition constants at the simulation gains (flags only).
  LyapunovAuditPlan plan;
  plan.per_axis = p.value("constants_per_axis", std::size_t{11});
  plan.k_set = periodic_k0_samples(cfg.T);
  const auto constants = compute_case_study_constants(cfg.refs, cfg.gains, cfg.T, cfg.T, p.value("L_pe", std::numbers::pi), plan);
  res.metrics["constants"] = constants.to_json();
  res.metrics["constants_violated"] = constants.violated();
  res.metrics["theta_exactness_error"] = theta_err ? json(*theta_err) : json(nullptr);
  res.metrics["theta_steps"] = theta_steps;
  res.metrics["checks"] = {{"all_settle", all_settle}, {"ise_full_below_none", ordering}, {"theta_exact", theta_ok}};
  res.passed = all_settle && ordering && theta_ok;
  std::ostringstream s;
  if (ise_none && ise_full) s << "ISE none=" << *ise_none << " full=" << *ise_full;
  res.summary = s.str();
  return res;
}

// ---- consistency-sweep -----------------------------------------------------------

ExperimentResult run_consistency_sweep(const json& params, std::uint64_t) {
  const json p = with_defaults(validated_defaults(), params);
  const auto plant = p.value("plant", std::string("unicycle"));
  const auto T_list = get_list(p, "T_list", log_spaced(1e-3, 1e-1, 9));
  const auto samples = p.value("samples", std::size_t{256});
  const double half = p.value("half_width", 1.0);
  const double tol = p.value("proxy_tol", 1e-10);
  std::vector<long> ks = p.value("k_set", std::vector<long>{0, 1, 10, 100, 1000});
  check_budget(p, 4.0 * static_cast<double>(T_list.size() * ks.size() * samples), "consistency-sweep");

  VectorField field;
  InputLaw law = InputLaw::held(Vector::Zero(1));
  int dim = 0;
  if (plant == "unicycle") {
    const auto refs = ReferenceSignal::from_json(p.at("refs"));
    const auto gains = ControllerGains::from_json(p.at("gains"));
    for (double T : T_list) gains.validate(T);
    field = error_dynamics_field(refs);
    law = tracking_input_law(refs, gains);
    dim = 3;
  } else if (plant == "double-integrator") {
    field = double_integrator();
    law = InputLaw::feedback(1, [](double, long, const Vector& x) { return Vector{{-x[0] - 2.0 * x[1]}}; });
    dim = 2;
  } else {
    throw DomainError("consistency-sweep: plant must be 'unicycle' or 'double-integrator'");
  }

  const auto exact = exact_proxy_map(field, law, tol);
  const auto exact_fine = exact_proxy_map(field, law, tol / 10.0);
  const auto euler = euler_map(field, law);
  const auto modified = modified_euler_map(field, law);
  const Box box = Box::cube(dim, half);
  SupSampling sampling{samples};

  const auto rep_euler = consistency_order(exact, euler, box, ks, T_list, sampling, p.value("lipschitz_pairs", std::size_t{64}));
  const auto rep_mod = consistency_order(exact, modified, box, ks, T_list, sampling);
  const auto rep_halving = consistency_order(exact, exact_fine, box, ks, T_list, sampling);

  ExperimentResult res;
  auto c1 = precise_stream();
  rep_euler.write_csv(c1);
  res.files.push_back({"consistency_euler.csv", FileKind::csv, c1.str()});
  auto c2 = precise_stream();
  rep_mod.write_csv(c2);
  res.files.push_back({"consistency_modified_euler.csv", FileKind::csv, c2.str()});
  auto dat = precise_stream();
  dat << "# T euler_error modified_euler_error proxy_halving_gap\n";
  for (std::size_t i = 0; i < rep_euler.T_samples.size(); ++i) {
    dat << rep_euler.T_samples[i] << ' ' << rep_euler.max_errors[i] << ' ' << rep_mod.max_errors[i] << ' '
        << rep_halving.max_errors[i] << '\n';
  }
  res.files.push_back({"consistency.dat", FileKind::dat, dat.str()});

  const double halving = *std::max_element(rep_halving.max_errors.begin(), rep_halving.max_errors.end());
  const bool euler_ok = rep_euler.slope && std::abs(*rep_euler.slope - 2.0) <= 0.15;
  const bool mod_ok = rep_mod.slope && *rep_mod.slope >= 1.9;
  const bool halving_ok = halving < 10.0 * tol;
  res.passed = euler_ok && mod_ok && halving_ok;
  res.metrics = {{"plant", plant},
                 {"k_set", ks},
                 {"euler", rep_euler.summary()},
                 {"modified_euler", rep_mod.summary()},
                 {"slope", rep_mod.slope ? json(*rep_mod.slope) : json(nullptr)},
                 {"euler_slope", rep_euler.slope ? json(*rep_euler.slope) : json(nullptr)},
                 {"proxy_halving_gap", halving},
                 {"checks", {{"euler_slope", euler_ok}, {"modified_euler_slope", mod_ok}, {"proxy_halving", halving_ok}}}};
  std::ostringstream s;
  s << "slopes euler=" << (rep_euler.slope ? *rep_euler.slope : NAN)
    << " modified=" << (rep_mod.slope ? *rep_mod.slope : NAN);
  res.summary = s.str();
  return res;
}

// ---- lyapunov-audit ----------------------------------------------------------------

namespace {

struct ValidatedSetup {
  ReferenceSignal refs;
  ControllerGains gains;
  double T = 0.01;
  double T_star = 0.02;
  double L_pe = std::numbers::pi;
  LyapunovAuditPlan plan;
};

ValidatedSetup validated_setup(const json& p) {
  ValidatedSetup s;
  s.refs = ReferenceSignal::from_json(p.at("refs"));
  s.gains = ControllerGains::from_json(p.at("gains"));
  s.T = p.at("T").get<double>();
  s.T_star = p.at("T_star").get<double>();
  s.L_pe = p.at("L_pe").get<double>();
  s.gains.validate(s.T);
  if (!(s.T_star >= s.T)) throw DomainError("T_star must be at least T");
  s.plan.half_width = p.value("half_width", 5.0);
  s.plan.per_axis = p.value("per_axis", std::size_t{41});
  if (p.contains("k_set")) s.plan.k_set = p.at("k_set").get<std::vector<long>>();
  s.plan.tail_tol = p.value("tail_tol", 1e-10);
  return s;
}

double rho_closed_form(double s) { return s <= 1.0 ? s : 1.0 + std::log(s); }

}  // namespace

ExperimentResult run_lyapunov_audit(const json& params, std::uint64_t) {
  const json p = with_defaults(validated_defaults(), params);
  const auto setup = validated_setup(p);
  const double ks_count = setup.plan.k_set.empty() ? std::ceil(2.0 * std::numbers::pi / setup.T) + 1.0
                                                   : static_cast<double>(setup.plan.k_set.size());
  check_budget(p, 4.0 * ks_count * static_cast<double>(setup.plan.per_axis * setup.plan.per_axis), "lyapunov-audit");

  ExperimentResult res;
  const auto constants =
      compute_case_study_constants(setup.refs, setup.gains, setup.T, setup.T_star, setup.L_pe, setup.plan);
  res.metrics["constants"] = constants.to_json();
  res.metrics["constants_violated"] = constants.violated();

  // rho for phi(s) = s against its closed form
  UgbHypothesis hyp;
  const auto cert = make_ugb_certificate(hyp, [](double, long, const Vector&) { return 0.0; });
  auto rho_dat = precise_stream();
  rho_dat << "# s rho closed_form\n";
  double rho_err = 0.0;
  for (double s : log_spaced(1e-3, 1e3, 61)) {
    const double r = cert.rho_built(s), c = rho_closed_form(s);
    rho_err = std::max(rho_err, std::abs(r - c));
    rho_dat << s << ' ' << r << ' ' << c << '\n';
  }
  res.files.push_back({"rho.dat", FileKind::dat, rho_dat.str()});
  res.metrics["rho_closed_form_error"] = rho_err;
  const bool rho_ok = rho_err <= 1e-8;

  if (!constants.violated().empty()) {
    res.passed = false;
    res.metrics["checks"] = {{"constants_valid", false}, {"rho_closed_form", rho_ok}};
    res.summary = "constants invalid: " + constants.violated().front();
    return res;
  }

  const auto chain = audit_lyapunov_chain(setup.refs, setup.gains, constants, setup.plan);
  std::vector<long> ugb_ks = setup.plan.k_set;
  if (p.contains("ugb_k_set")) ugb_ks = p.at("ugb_k_set").get<std::vector<long>>();
  if (ugb_ks.empty()) ugb_ks = periodic_k0_samples(setup.T);
  const auto ugb = audit_unicycle_ugb(setup.refs, setup.gains, constants, p.value("ugb_x_radius", setup.plan.half_width),
                                      p.value("ugb_z_radius", 1.0), p.value("ugb_per_axis", std::size_t{21}),
                                      p.value("ugb_z_samples", std::size_t{9}), ugb_ks);

  // Envelope implied by the U sandwich and decrease, on zero-input trajectories.
  const double c2 = constants.c2.value;
  const auto beta_U =
      KLBound::exponential(std::sqrt(2.0 * c2 / constants.c1.value), constants.c3_tilde.value / (2.0 * c2));
  AuditGrid egrid;
  egrid.samples = p.value("envelope_samples", std::size_t{64});
  const double Ts0[] = {setup.T};
  const auto envelope = falsify_spuas(unicycle_zero_input_map(setup.refs, setup.gains), beta_U, setup.plan.half_width,
                                      0.0, Ts0, egrid, p.value("envelope_horizon_s", 20.0));

  auto csv = precise_stream();
  csv << "audit,check,samples,min_slack,worst_ratio,outcome\n";
  append_checks_csv(csv, "chain", chain);
  append_checks_csv(csv, "lyapunov-envelope", envelope);
  append_checks_csv(csv, "ugb", ugb.audit.verdict);
  res.files.push_back({"lyapunov_checks.csv", FileKind::csv, csv.str()});

  res.metrics["chain"] = chain.to_json();
  res.metrics["ugb"] = {{"d", ugb.d},
                        {"verdict", ugb.audit.verdict.to_json()},
                        {"decrease_cases", ugb.audit.decrease_cases},
                        {"small_v_cases", ugb.audit.small_v_cases},
                        {"large_v_cases", ugb.audit.large_v_cases}};
  res.metrics["lyapunov_envelope"] = {{"beta", beta_U.to_json()}, {"verdict", envelope.to_json()}};
  res.metrics["checks"] = {{"constants_valid", true},
                           {"lyapunov_envelope", envelope.passed()},
                           {"chain", chain.passed()},
                           {"ugb", ugb.audit.verdict.passed()},
                           {"rho_closed_form", rho_ok}};
  res.passed = chain.passed() && ugb.audit.verdict.passed() && rho_ok && envelope.passed();
  res.summary = "chain " + to_string(chain.outcome) + ", ugb " + to_string(ugb.audit.verdict.outcome);
  return res;
}

// ---- pe-check -------------------------------------------------------------------------

ExperimentResult run_pe_check(const json& params, std::uint64_t) {
  const json defaults = {{"vr", {{"kind", "constant"}, {"amplitude", 1.0}}},
                         {"wr", {{"kind", "sine"}, {"amplitude", 20.0}, {"frequency", 1.0}}},
                         {"T_list", {0.01}},
                         {"L", std::numbers::pi},
                         {"mu", 600.0},
                         {"j_samples", 0}};
  // merge_patch would drop a null or fold a scalar wr into the default object
  json p = defaults;
  for (const auto& [key, value] : params.items()) p[key] = value;
  const auto refs = ReferenceSignal::make(ScalarSignal::from_json(p.at("vr")), ScalarSignal::from_json(p.at("wr")));
  const auto T_list = get_list(p, "T_list", {});
  const double L = p.at("L").get<double>(), mu = p.at("mu").get<double>();
  const auto j_samples = p.at("j_samples").get<std::size_t>();
  if (!(L > 0.0) || !(mu > 0.0)) throw DomainError("pe-check: L and mu must be positive");
  double planned = 0.0;
  for (double T : T_list) {
    if (!(T > 0.0)) throw DomainError("pe-check: T must be positive");
    planned += (2.0 * std::numbers::pi / T + 1.0) * (L / T + 1.0);
  }
  check_budget(p, planned, "pe-check");

  const auto verdict = check_pe(refs, L, mu, T_list, j_samples);
  ExperimentResult res;
  auto csv = precise_stream();
  csv << "T,j,window_sum\n";
  json infima = json::array();
  for (double T : T_list) {
    const long P = static_cast<long>(std::floor(2.0 * std::numbers::pi / T));
    double inf = std::numeric_limits<double>::infinity();
    for (long j = 0; j <= P; ++j) {
      const double s = pe_window_sum(refs, L, T, j);
      inf = std::min(inf, s);
      csv << T << ',' << j << ',' << s << '\n';
    }
    infima.push_back({{"T", T}, {"infimum", inf}, {"sampled_infimum", pe_infimum(refs, L, T, j_samples)}});
  }
  res.files.push_back({"pe_windows.csv", FileKind::csv, csv.str()});
  res.metrics = {{"mu", mu}, {"L", L}, {"infima", infima}, {"verdict", verdict.to_json()}};
  res.passed = verdict.passed();
  res.summary = "verdict " + to_string(verdict.outcome);
  return res;
}

// ---- cascade-theorem-demo ---------------------------------------------------------------

namespace {

ClassKFunction compose(const ClassKFunction& outer, const ClassKFunction& inner, const std::string& name) {
  return ClassKFunction::custom(name, [outer, inner](double s) { return outer(inner(s)); });
}

struct HypothesisRow {
  std::string name;
  Outcome outcome;
  double worst_ratio;
  std::string detail;
};

double worst_ratio_of(const StabilityVerdict& v) {
  double r = 0.0;
  for (const auto& c : v.checks) r = std::max(r, c.worst_ratio);
  return r;
}

}  // namespace

ExperimentResult run_cascade_theorem_demo(const json& params, std::uint64_t seed) {
  json defaults = validated_defaults();
  defaults["per_axis"] = 21;
  const json p = with_defaults(defaults, params);
  const auto setup = validated_setup(p);
  const auto& refs = setup.refs;
  const auto& gains = setup.gains;
  const double T = setup.T;
  const auto T_list = get_list(p, "T_list", {T, T / 2.0});
  const double x_radius = p.value("x_radius", 5.0), z_radius = p.value("z_radius", 1.0);
  const double Delta = p.value("Delta", 2.0);
  const double horizon = p.value("horizon_s", 40.0);
  const auto samples = p.value("samples", std::size_t{64});
  for (double Ti : T_list) gains.validate(Ti);
  double planned = 0.0;
  for (double Ti : T_list) planned += 4.0 * static_cast<double>(3 * samples) * horizon / Ti;
  check_budget(p, planned, "cascade-theorem-demo");

  const auto sys = closed_loop_euler_cascade(refs, gains);
  const double T_hi = *std::max_element(T_list.begin(), T_list.end());
  std::vector<HypothesisRow> rows;
  ExperimentResult res;

  // Interconnection bound, then the same bound against f = F1T + G/T.
  const double c = interconnection_constant(refs, gains);
  const auto gamma1 = interconnection_growth_bound(refs, gains, T_hi);
  const auto gamma2 = ClassKFunction::affine_capped(c, c);
  const auto gamma3 = ClassKFunction::identity();
  AuditDomain dom;
  dom.x_radius = x_radius;
  dom.z_radius = z_radius;
  const auto a1_verdict = check_interconnection_bound(sys, gamma1, gamma2, gamma3, dom, T_list);
  const auto unscaled = check_interconnection_bound(unscaled_interconnection_cascade(refs, gains), gamma1, gamma2,
                                                    gamma3, dom, T_list);
  const auto* unscaled_ic = unscaled.find_check("interconnection");
  const bool unscaled_fails = unscaled.falsified() && unscaled.witness && unscaled_ic &&
                              unscaled_ic->worst_ratio > 1.0;
  rows.push_back({"interconnection", a1_verdict.outcome, worst_ratio_of(a1_verdict), "c=" + std::to_string(c)});
  rows.push_back({"interconnection-unscaled", unscaled.outcome, unscaled_ic ? unscaled_ic->worst_ratio : 0.0,
                  "expected falsified"});

  // Zero-input Lyapunov function U.
  const auto constants = compute_case_study_constants(refs, gains, T, setup.T_star, setup.L_pe, setup.plan);
  res.metrics["constants"] = constants.to_json();
  if (!constants.violated().empty()) {
    res.passed = false;
    res.metrics["constants_violated"] = constants.violated();
    res.summary = "constants invalid: " + constants.violated().front();
    return res;
  }
  const auto ks = periodic_k0_samples(T);
  auto table = std::make_shared<const ExcitationTable>(refs, T, *std::max_element(ks.begin(), ks.end()) + 1);
  const auto U = unicycle_U_candidate(refs, gains, constants, table);
  AuditGrid lgrid;
  lgrid.samples = p.value("lyapunov_samples", std::size_t{256});
  const double Ts0[] = {T};
  const auto lyap = audit_lyapunov(U, unicycle_zero_input_map(refs, gains), x_radius, 0.0, Ts0, lgrid);
  rows.push_back({"zero-input-lyapunov", lyap.outcome, worst_ratio_of(lyap), ""});

  // Driving subsystem.
  AuditGrid zgrid;
  zgrid.samples = 9;
  const auto beta_z = KLBound::exponential(1.0, gains.a1 / 2.0);
  const auto zv = falsify_spuas(driving_map(sys), beta_z, z_radius, 0.0, T_list, zgrid, horizon);
  rows.push_back({"z-spuas", zv.outcome, worst_ratio_of(zv), "beta=exp(1, a1/2)"});

  // Boundedness through the certificate W = rho(U), summability and iISNS.
  std::vector<long> ugb_ks = ks;
  const auto ugb = audit_unicycle_ugb(refs, gains, constants, x_radius, z_radius, p.value("ugb_per_axis", std::size_t{15}),
                                      9, ugb_ks);
  rows.push_back({"ugb-certificate", ugb.audit.verdict.outcome, worst_ratio_of(ugb.audit.verdict),
                  "d=" + std::to_string(ugb.d)});
  const auto& cert = ugb.audit.certificate;
  const double mu_gain = cert.mu_fn(1.0);
  const auto rho_sum = ClassKFunction::linear(1.01 * mu_gain / gains.a1);
  const auto alpha1 = compose(cert.rho_built, ClassKFunction::power(constants.c1.value / 2.0, 2.0), "rho(c1/2 s^2)");
  const auto alpha2 = compose(cert.rho_built, ClassKFunction::power(constants.c2.value, 2.0), "rho(c2 s^2)");

  const auto starts = sample_ball(3, Delta, samples);
  std::vector<Trajectory> z_trajs;
  std::vector<EnvelopeSample> envelopes;
  StabilityVerdict iisns_all;
  iisns_all.check("iisns");
  {
    struct Slot {
      CascadeTrajectory traj;
      Trajectory xi;
      StabilityVerdict iisns;
    };
    struct Task {
      double T;
      long k0;
      std::size_t start;
    };
    std::vector<Task> tasks;
    for (double Ti : T_list) {
      for (long k0 : periodic_k0_samples(Ti)) {
        for (std::size_t i = 0; i < starts.size(); ++i) tasks.push_back({Ti, k0, i});
      }
    }
    std::vector<Slot> slots(tasks.size());
    parallel_for(slots.size(), [&](std::size_t idx) {
      const double Ti = tasks[idx].T;
      const long k0 = tasks[idx].k0;
      const auto& xi0 = starts[tasks[idx].start];
      const auto steps = static_cast<std::size_t>(horizon_index(horizon, Ti));
      auto& s = slots[idx];
      s.traj = simulate_cascade(sys, Ti, k0, xi0.head(2), xi0.tail(1), steps);
      s.xi.T = Ti;
      s.xi.k0 = k0;
      for (std::size_t i = 0; i < s.traj.x.size(); ++i) {
        Vector xi(3);
        xi << s.traj.x.states[i], s.traj.z.states[i];
        s.xi.push(xi);
      }
      s.iisns = check_iisns(s.traj.x, s.traj.z.states, alpha1, alpha2, cert.mu_fn, Ti);
    });
    for (auto& s : slots) {
      z_trajs.push_back(s.traj.z);
      envelopes.push_back(s.xi.envelope());
      for (const auto& chk : s.iisns.checks) iisns_all.check("iisns").record(chk.worst_ratio, 1.0);
      if (s.iisns.witness) iisns_all.falsify(*s.iisns.witness);
    }
  }
  rows.push_back({"iisns", iisns_all.outcome, worst_ratio_of(iisns_all), ""});
  StabilityVerdict summ;
  summ.check("summability");
  for (double Ti : T_list) {
    std::vector<Trajectory> same_T;
    for (const auto& z : z_trajs) {
      if (z.T == Ti) same_T.push_back(z);
    }
    const auto v = check_summability(same_T, cert.mu_fn, rho_sum, Ti);
    for (const auto& chk : v.checks) summ.check("summability").record(chk.worst_ratio, 1.0);
    if (v.witness) summ.falsify(*v.witness);
    if (v.outcome == Outcome::inconclusive && summ.outcome == Outcome::pass) summ.outcome = Outcome::inconclusive;
  }
  rows.push_back({"summability", summ.outcome, worst_ratio_of(summ), ""});

  // Bounds fitted on the ensemble over the horizon, audited on the same
  // region over twice the horizon.
  double kappa_gain = 0.0;
  for (const auto& e : envelopes) {
    for (double n : e.norms) kappa_gain = std::max(kappa_gain, e.initial_norm > 0.0 ? n / e.initial_norm : 0.0);
  }
  kappa_gain *= 1.05;
  AuditGrid region;
  region.points = starts;
  const auto bounded =
      check_boundedness(sys, ClassKFunction::linear(kappa_gain), 0.0, Delta, T_list, region, 2.0 * horizon);
  rows.push_back({"bounded", bounded.outcome, worst_ratio_of(bounded), "kappa=" + std::to_string(kappa_gain)});

  // Continuity constants and probe (reported).
  const auto usc = estimate_usc_constants(sys, x_radius, z_radius, T_list, p.value("usc_samples", std::size_t{128}));
  UscProbeConfig probe;
  probe.delta = Delta;
  probe.eta = 1.0;
  probe.epsilon = p.value("usc_epsilon", 0.1);
  probe.L = 1.0;
  probe.T_list = T_list;
  probe.mu_grid = log_spaced(1e-3, 1.0, 7);
  probe.seed = seed;
  const auto probe_res = usc_probe(sys, probe);

  const bool hypotheses = a1_verdict.passed() && lyap.passed() && zv.passed() && ugb.audit.verdict.passed() &&
                          iisns_all.passed() && summ.passed() && bounded.passed();

  const auto fit = fit_kl_envelope(envelopes, 0.0);
  StabilityVerdict conclusion;
  conclusion.outcome = Outcome::inconclusive;
  if (fit.ok()) conclusion = falsify_spuas(sys, *fit.bound, Delta, 0.0, T_list, region, 2.0 * horizon);
  rows.push_back({"spuas-fitted-beta", conclusion.outcome, worst_ratio_of(conclusion),
                  fit.ok() ? "M=" + std::to_string(fit.gain) + " lambda=" + std::to_string(fit.rate) : "no fit"});

  auto csv = precise_stream();
  csv << "hypothesis,outcome,worst_ratio,detail\n";
  for (const auto& r : rows) csv << r.name << ',' << to_string(r.outcome) << ',' << r.worst_ratio << ',' << r.detail << '\n';
  res.files.push_back({"cascade_hypotheses.csv", FileKind::csv, csv.str()});

  if (fit.ok()) {
    // max normalized norm over the coarse set against the fitted beta at T
    auto dat = precise_stream();
    dat << "# t max_norm_ratio beta_ratio\n";
    std::vector<double> worst;
    for (const auto& e : envelopes) {
      if (e.T != T || e.initial_norm == 0.0) continue;
      if (worst.size() < e.norms.size()) worst.resize(e.norms.size(), 0.0);
      for (std::size_t i = 0; i < e.norms.size(); ++i) worst[i] = std::max(worst[i], e.norms[i] / e.initial_norm);
    }
    for (std::size_t i = 0; i < worst.size(); i += 50) {
      const double t = static_cast<double>(i) * T;
      dat << t << ' ' << worst[i] << ' ' << (*fit.bound)(1.0, t) << '\n';
    }
    res.files.push_back({"cascade_envelope.dat", FileKind::dat, dat.str()});
  }

  res.metrics["interconnection_c"] = c;
  res.metrics["interconnection"] = a1_verdict.to_json();
  res.metrics["interconnection_unscaled"] = unscaled.to_json();
  res.metrics["zero_input_lyapunov"] = lyap.to_json();
  res.metrics["z_spuas"] = zv.to_json();
  res.metrics["ugb"] = {{"d", ugb.d}, {"verdict", ugb.audit.verdict.to_json()}};
  res.metrics["iisns"] = iisns_all.to_json();
  res.metrics["summability"] = summ.to_json();
  res.metrics["bounded"] = {{"kappa_gain", kappa_gain}, {"verdict", bounded.to_json()}};
  res.metrics["usc"] = {{"K", usc.K}, {"K_state", usc.K_state}, {"K_input", usc.K_input}, {"bounded", usc.bounded},
                        {"probe_largest_mu", probe_res.largest_mu ? json(*probe_res.largest_mu) : json(nullptr)},
                        {"probe_mu_grid", probe.mu_grid},
                        {"probe_max_deviation", probe_res.max_deviation}};
  res.metrics["fitted_beta"] = fit.ok() ? json{{"gain", fit.gain}, {"rate", fit.rate}} : json(nullptr);
  res.metrics["conclusion"] = conclusion.to_json();
  res.metrics["checks"] = {{"hypotheses", hypotheses},
                           {"unscaled_interconnection_fails", unscaled_fails},
                           {"conclusion", conclusion.passed()}};
  res.passed = hypotheses && unscaled_fails && conclusion.passed();
  res.summary = std::string("hypotheses ") + (hypotheses ? "pass" : "fail") + ", conclusion " +
                to_string(conclusion.outcome);
  return res;
}

// ---- registry -------------------------------------------------------------------------------

const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> registry{
      {"example1", "double integrator: Euler vs exact-proxy eigenvalues and trajectories", run_example1},
      {"unicycle-compare", "tracking controller variants on the unicycle (emulated vs redesigned)",
       run_unicycle_compare},
      {"consistency-sweep", "one-step consistency order of Euler and modified Euler vs exact proxy",
       run_consistency_sweep},
      {"lyapunov-audit", "V/W/U Lyapunov chain and boundedness certificate in the validated regime",
       run_lyapunov_audit},
      {"pe-check", "persistency of excitation of the reference angular velocity", run_pe_check},
      {"cascade-theorem-demo", "cascade hypotheses audited, then the fitted-envelope conclusion",
       run_cascade_theorem_demo},
  };
  return registry;
}

const ExperimentInfo* find_experiment(const std::string& name) {
  for (const auto& e : experiment_registry()) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

}  // namespace sdc
