#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sdcascade/unicycle.hpp"

using namespace sdc;

namespace {

ReferenceSignal demo_refs() { return ReferenceSignal::make(ScalarSignal::constant(1.0), ScalarSignal::sine(20.0)); }

ControllerGains demo_gains(double T, CorrectionKind kind = CorrectionKind::full) {
  return {10.0, 70.0, 2.0 - T, kind, 0.5};
}

ReferenceSignal validated_refs() {
  return ReferenceSignal::make(ScalarSignal::constant(0.5), ScalarSignal::sine(0.5));
}

ControllerGains validated_gains() { return {1.0, 1.0, 0.1, CorrectionKind::full, 0.5}; }

}  // namespace

TEST_SUITE("unicycle") {

TEST_CASE("excitation of simple signals") {
  const auto zero = ReferenceSignal::make(ScalarSignal::constant(1.0), ScalarSignal::zero());
  CHECK(pe_infimum(zero, std::numbers::pi, 0.01) == 0.0);
  const auto c = ReferenceSignal::make(ScalarSignal::constant(1.0), ScalarSignal::constant(2.0));
  const long l = horizon_index(1.0, 0.1);
  CHECK(pe_window_sum(c, 1.0, 0.1, 3) == doctest::Approx(0.1 * (l + 1) * 4.0));
  CHECK(pe_infimum(c, 1.0, 0.1) == doctest::Approx(0.1 * (l + 1) * 4.0));
  const std::vector<double> Ts{0.1};
  CHECK(check_pe(zero, 1.0, 0.1, Ts).falsified());
  CHECK(check_pe(c, 1.0, 3.0, Ts).passed());
}

TEST_CASE("excitation of the sine reference matches direct sums") {
  const auto refs = demo_refs();
  const double T = 0.01, L = std::numbers::pi;
  const long l = static_cast<long>(std::floor(L / T));
  double inf = std::numeric_limits<double>::infinity();
  for (long j = 0; j <= 628; ++j) {
    double s = 0.0;
    for (long k = j; k <= j + l; ++k) s += 400.0 * std::sin(k * T) * std::sin(k * T);
    s *= T;
    CHECK(pe_window_sum(refs, L, T, j) == doctest::Approx(s).epsilon(1e-12));
    inf = std::min(inf, s);
  }
  CHECK(pe_infimum(refs, L, T) == doctest::Approx(inf).epsilon(1e-12));
  // Riemann sum of 400 sin^2 over a half period
  CHECK(inf == doctest::Approx(200.0 * std::numbers::pi).epsilon(0.02));
  const std::vector<double> Ts{T};
  CHECK(check_pe(refs, L, 600.0, Ts).passed());
  CHECK(check_pe(refs, L, 700.0, Ts).falsified());
}

TEST_CASE("window sums add over adjacent windows") {
  const auto refs = demo_refs();
  const double T = 0.01;
  const long l = horizon_index(1.0, T);
  // [0, l] + [l+1, 2l+1] = [0, 2l+1]
  const double a = pe_window_sum(refs, 1.0, T, 0), b = pe_window_sum(refs, 1.0, T, l + 1);
  const double whole = pe_window_sum(refs, (2.0 * static_cast<double>(l) + 1.5) * T, T, 0);
  CHECK(a + b == doctest::Approx(whole).epsilon(1e-12));
}

TEST_CASE("error dynamics field example") {
  const auto f = error_dynamics_field(demo_refs());
  const Vector d = f(0.0, Vector{{1.0, 2.0, 0.0}}, Vector{{3.0, 4.0}});
  // (4*2 - 3 + 1, -4*1 + 0, 0 - 4)
  CHECK(d[0] == doctest::Approx(6.0));
  CHECK(d[1] == doctest::Approx(-4.0));
  CHECK(d[2] == doctest::Approx(-4.0));
}

TEST_CASE("controller examples") {
  const double T = 0.01;
  const auto refs = demo_refs();
  const TrackingErrorState s{1.0, 1.0, 0.5};
  auto a = tracking_controller(0, s, refs, demo_gains(T, CorrectionKind::none), T);
  CHECK(a.v == doctest::Approx(71.0));
  CHECK(a.w == doctest::Approx(5.0));
  CHECK(a.vartheta == 0.0);
  // w_r(0) = 0, eps = 2: (70^2 - 2*70) / (2 (1 - 0.7))
  a = tracking_controller(0, s, refs, demo_gains(T), T);
  CHECK(a.vartheta == doctest::Approx(4760.0 / 0.6));
  CHECK(a.v == doctest::Approx(71.0 + T * 4760.0 / 0.6));
  a = tracking_controller(0, s, refs, demo_gains(T, CorrectionKind::scaled), T);
  CHECK(a.vartheta == doctest::Approx(0.5 * 4760.0));
  auto g = demo_gains(0.5);
  g.a2 = 2.0;
  g.alpha_y = 1e-3;
  const auto flat = ReferenceSignal::make(ScalarSignal::constant(1.0), ScalarSignal::zero());
  CHECK_THROWS_AS(redesign_correction(0, 1.0, 1.0, flat, g, 0.5), DomainError);
}

TEST_CASE("cascade form matches the euler map bit for bit") {
  const double T = 0.01;
  const auto refs = demo_refs();
  for (auto kind : {CorrectionKind::none, CorrectionKind::scaled, CorrectionKind::full}) {
    const auto gains = demo_gains(T, kind);
    const auto sys = closed_loop_euler_cascade(refs, gains);
    const auto F = euler_map(error_dynamics_field(refs), tracking_input_law(refs, gains));
    Rng rng(17);
    for (int i = 0; i < 10000; ++i) {
      const Vector s{{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-1.0, 1.0)}};
      const long k = static_cast<long>(rng.uniform() * 700.0);
      const Vector want = F.step(T, k, s);
      const Vector x = sys.f(T, k, s.head(2), s.tail(1));
      const Vector z = sys.g(T, k, s.tail(1));
      REQUIRE(x[0] == want[0]);
      REQUIRE(x[1] == want[1]);
      REQUIRE(z[0] == want[2]);
    }
  }
}

TEST_CASE("zero-input part plus interconnection is the closed loop") {
  const double T = 0.01;
  const auto refs = demo_refs();
  const auto gains = demo_gains(T);
  const auto sys = closed_loop_euler_cascade(refs, gains);
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const Vector x{{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)}};
    const double z = rng.uniform(-1.0, 1.0);
    const long k = static_cast<long>(rng.uniform() * 700.0);
    const Vector sum = unicycle_F1T(k, x, refs, gains, T) + unicycle_GT(k, x, z, refs, gains, T);
    CHECK((sum - sys.f(T, k, x, Vector{{z}})).norm() <= 1e-9 * (1.0 + sum.norm()));
    // |G| <= T c |z| (|x| + 1)
    const double c = interconnection_constant(refs, gains);
    CHECK(unicycle_GT(k, x, z, refs, gains, T).norm() <= T * c * std::abs(z) * (x.norm() + 1.0) + 1e-12);
  }
}

TEST_CASE("orientation error decays geometrically") {
  const double T = 0.01;
  const auto sys = closed_loop_euler_cascade(demo_refs(), demo_gains(T));
  Vector z{{0.5}};
  for (long k = 0; k < 300; ++k) {
    z = sys.g(T, k, z);
    CHECK(z[0] == doctest::Approx(0.5 * std::pow(1.0 - 0.1, k + 1)).epsilon(1e-12));
  }
}

TEST_CASE("V example and demo constants") {
  const auto refs = ReferenceSignal::make(ScalarSignal::constant(1.0), ScalarSignal::constant(1.0));
  const ControllerGains g{1.0, 1.0, 0.09, CorrectionKind::full, 0.5};
  CHECK(lyap_V(3, 1.0, 1.0, refs, g, 0.01) == doctest::Approx(1.9));

  LyapunovAuditPlan plan;
  plan.per_axis = 5;
  plan.k_set = {0, 1, 2};
  const double T = 0.01;
  const auto c = compute_case_study_constants(demo_refs(), demo_gains(T), T, T, std::numbers::pi, plan);
  CHECK(c.c1.value == doctest::Approx(-19.0));
  CHECK_FALSE(c.c1.valid);
  const auto bad = c.violated();
  CHECK(std::find(bad.begin(), bad.end(), "c1") != bad.end());
  CHECK_THROWS_AS(c.require_valid(), PreconditionError);
  CHECK_THROWS_AS(lyap_U(0, Vector{{1.0, 1.0}}, demo_refs(), demo_gains(T), c, T), PreconditionError);
  CHECK(c.c2.value == doctest::Approx(21.0));
  CHECK(c.c3.value == doctest::Approx(800.0));
}

TEST_CASE("W under a constant angular reference") {
  const double T = 0.05, omega = 1.5;
  const auto refs = ReferenceSignal::make(ScalarSignal::constant(1.0), ScalarSignal::constant(omega));
  // T sum e^{-iT} omega^2 = T omega^2 / (1 - e^{-T})
  const double want = -T * omega * omega / (1.0 - std::exp(-T)) * 4.0;
  CHECK(lyap_W(5, 2.0, refs, T) == doctest::Approx(want).epsilon(1e-9));
  CHECK(lyap_W(5, 0.0, refs, T) == 0.0);
  // T / (1 - e^{-T}) <= 2 below the threshold, so |W| <= 2 omega^2 y^2
  for (double Ts : {0.01, 0.1, 1.0}) {
    const double w = lyap_W(0, 1.0, refs, Ts);
    CHECK(-w <= 2.0 * omega * omega);
    CHECK(-w >= Ts * omega * omega);
  }
  const ExcitationTable table(refs, T, 10);
  CHECK(table(4) == doctest::Approx(excitation_weight(4, refs, T)));
  CHECK(table(50) == doctest::Approx(excitation_weight(50, refs, T)));
}

TEST_CASE("correction bound holds on samples") {
  const double T = 0.01;
  const auto refs = demo_refs();
  Rng rng(8);
  for (auto kind : {CorrectionKind::none, CorrectionKind::scaled, CorrectionKind::full}) {
    const auto g = demo_gains(T, kind);
    const double K = correction_bound(refs, g, T);
    for (int i = 0; i < 2000; ++i) {
      const double x = rng.uniform(-2.0, 2.0), y = rng.uniform(-2.0, 2.0);
      const long k = static_cast<long>(rng.uniform() * 700.0);
      CHECK(std::abs(correction_value(k, x, y, refs, g, T)) <= K * std::hypot(x, y) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("validated regime constants are valid") {
  LyapunovAuditPlan plan;
  plan.per_axis = 21;
  const auto c = compute_case_study_constants(validated_refs(), validated_gains(), 0.01, 0.02, std::numbers::pi, plan);
  CHECK(c.violated().empty());
  CHECK(c.c1.value == doctest::Approx(1.0 - 0.5 * 0.12 * 0.5));
  CHECK(c.c2.value == doctest::Approx(1.0 + 0.5 * 0.12 * 0.5));
  CHECK(c.w_M_respected);
  CHECK(c.T_below_T_tilde);
  CHECK(c.T3_star / -std::expm1(-c.T3_star) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_NOTHROW(c.require_valid());
}

TEST_CASE("comparison runs share the orientation error") {
  ComparisonConfig cfg;
  cfg.refs = demo_refs();
  cfg.T = 0.01;
  cfg.gains = demo_gains(cfg.T);
  cfg.horizon_s = 2.0;
  cfg.variants = {CorrectionKind::none, CorrectionKind::full};
  const auto res = run_comparison_experiment(cfg);
  REQUIRE(res.runs.size() == 2);
  REQUIRE(res.runs[0].rows.size() == res.runs[1].rows.size());
  for (std::size_t i = 0; i < res.runs[0].rows.size(); ++i) CHECK(res.runs[0].rows[i][4] == res.runs[1].rows[i][4]);
  CHECK(res.runs[0].rows.front()[5] == doctest::Approx(71.0));
}

TEST_CASE("zero initial error stays at zero") {
  ComparisonConfig cfg;
  cfg.refs = demo_refs();
  cfg.T = 0.01;
  cfg.gains = demo_gains(cfg.T);
  cfg.horizon_s = 1.0;
  cfg.initial = {0.0, 0.0, 0.0};
  const auto res = run_comparison_experiment(cfg);
  for (const auto& run : res.runs) {
    CHECK(run.metrics.ise == 0.0);
    CHECK(run.metrics.final_norm == 0.0);
    REQUIRE(run.metrics.settle_full);
    CHECK(*run.metrics.settle_full == 0);
  }
}

TEST_CASE("comparison config parsing") {
  const json j = {{"refs", {{"vr", 1.0}, {"wr", {{"kind", "sine"}, {"amplitude", 20.0}}}}},
                  {"gains", {{"a1", 10.0}, {"a2", 70.0}, {"alpha_y", 1.99}}},
                  {"T", 0.01},
                  {"variants", {"none", "full"}}};
  const auto cfg = ComparisonConfig::from_json(j);
  CHECK(cfg.refs.w_M == 20.0);
  CHECK(cfg.variants.size() == 2);
  auto bad = j;
  bad["T"] = 0.2;
  CHECK_THROWS_AS(ComparisonConfig::from_json(bad), DomainError);
  bad = j;
  bad["variants"] = {"half"};
  CHECK_THROWS_AS(ComparisonConfig::from_json(bad), DomainError);
}

}
