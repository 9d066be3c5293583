#include <doctest.h>

#include <cmath>

#include "sdcascade/stability.hpp"

using namespace sdc;

namespace {

ParameterizedMap scalar_map(std::function<double(double T, double x)> f) {
  return {1, 1.0, MapLabel::custom, [f](double T, long, const Vector& x) { return Vector{{f(T, x[0])}}; }};
}

LyapunovCandidate square(ClassKFunction alpha3) {
  return {[](double, long, const Vector& x) { return x.squaredNorm(); }, ClassKFunction::power(1.0, 2.0),
          ClassKFunction::power(1.0, 2.0), std::move(alpha3), std::nullopt};
}

Trajectory geometric(double T, double ratio, double z0, std::size_t n) {
  Trajectory tr{T, 0, {}, {}};
  double z = z0;
  for (std::size_t i = 0; i <= n; ++i, z *= ratio) tr.push(Vector{{z}});
  return tr;
}

// x+ = (1 - T) x + T z, or x + T z when neutral
CascadeSystem coupled(bool neutral = false) {
  CascadeSystem s;
  s.dim_x = 1;
  s.dim_z = 1;
  s.T_max = 1.0;
  s.f = [neutral](double T, long, const Vector& x, const Vector& z) {
    return Vector{(neutral ? 1.0 : 1.0 - T) * x + T * z};
  };
  s.g = [](double T, long, const Vector& z) { return Vector{(1.0 - T) * z}; };
  return s;
}

}  // namespace

TEST_SUITE("stability") {

TEST_CASE("sp-uas audit of a contraction") {
  const auto F = scalar_map([](double T, double x) { return (1.0 - T) * x; });
  const std::vector<double> Ts{0.1, 0.01};
  AuditGrid grid;
  grid.samples = 16;
  grid.k0_set = {0, 7};
  // (1 - T)^k <= exp(-kT)
  auto v = falsify_spuas(F, KLBound::exponential(1.0, 1.0), 2.0, 0.0, Ts, grid, 5.0);
  CHECK(v.passed());
  CHECK(v.find_check("envelope")->worst_ratio <= 1.0);

  v = falsify_spuas(F, KLBound::exponential(1.0, 2.0), 2.0, 0.0, Ts, grid, 5.0);
  REQUIRE(v.falsified());
  const auto& w = *v.witness;
  Vector y = w.initial_state;
  for (long k = w.k0; k < w.k; ++k) y = F.step(w.T, k, y);
  CHECK(y.norm() == doctest::Approx(w.measured));
  CHECK(w.measured > w.bound);

  // a floor of nu hides the late-time violation only with the max comparator
  const auto floor_v = falsify_spuas(F, KLBound::exponential(1.0, 1.0), 2.0, 0.5, Ts, grid, 5.0);
  CHECK(floor_v.passed());
  CHECK_THROWS_AS(falsify_spuas(F, KLBound::exponential(1.0, 1.0), 0.5, 0.5, Ts, grid, 5.0), DomainError);
}

TEST_CASE("sp-uas reports divergence as a violation") {
  const auto F = scalar_map([](double, double x) { return x * x * 1e10; });
  AuditGrid grid;
  grid.points = {Vector{{1.0}}};
  grid.k0_set = {0};
  const std::vector<double> Ts{0.1};
  const auto v = falsify_spuas(F, KLBound::exponential(1.0, 1.0), 2.0, 0.0, Ts, grid, 10.0);
  CHECK(v.falsified());
}

TEST_CASE("boundedness audit") {
  const std::vector<double> Ts{0.1};
  AuditGrid grid;
  grid.samples = 8;
  grid.k0_set = {0};
  const auto id = scalar_map([](double, double x) { return x; });
  CHECK(check_boundedness(id, ClassKFunction::identity(), 0.0, 1.0, Ts, grid, 3.0).passed());
  const auto grow = scalar_map([](double T, double x) { return (1.0 + T) * x; });
  CHECK(check_boundedness(grow, ClassKFunction::identity(), 0.0, 1.0, Ts, grid, 3.0).falsified());
  CHECK(check_boundedness(grow, ClassKFunction::linear(std::exp(3.0)), 0.0, 1.0, Ts, grid, 3.0).passed());
}

TEST_CASE("lyapunov audit of a contraction") {
  const auto F = scalar_map([](double T, double x) { return (1.0 - T) * x; });
  const std::vector<double> Ts{0.5, 0.1};
  AuditGrid grid;
  grid.samples = 32;
  grid.k0_set = {0};
  // dV = (T^2 - 2T) x^2 <= -T x^2 for T <= 1
  auto V = square(ClassKFunction::power(1.0, 2.0));
  V.L_mod = ClassKFunction::linear(2.0);
  auto v = audit_lyapunov(V, F, 1.0, 0.0, Ts, grid);
  CHECK(v.passed());
  CHECK(v.find_check("decrease")->min_slack >= 0.0);
  CHECK(v.find_check("decrease")->samples == 64);

  v = audit_lyapunov(square(ClassKFunction::power(2.0, 2.0)), F, 1.0, 0.0, Ts, grid);
  REQUIRE(v.falsified());
  CHECK(v.witness->check == "decrease");

  auto loose = square(ClassKFunction::power(1.0, 2.0));
  loose.L_mod = ClassKFunction::linear(0.5);
  v = audit_lyapunov(loose, F, 1.0, 0.0, Ts, grid);
  REQUIRE(v.falsified());
  CHECK(v.witness->check == "lipschitz");

  auto wrong = square(ClassKFunction::power(1.0, 2.0));
  wrong.alpha1 = ClassKFunction::power(2.0, 2.0);
  v = audit_lyapunov(wrong, F, 1.0, 0.0, Ts, grid);
  REQUIRE(v.falsified());
  CHECK(v.witness->check == "sandwich-lower");
}

TEST_CASE("practical decrease forms differ") {
  // identity map: dV = 0, so -T alpha3 + T nu only holds where alpha3 <= nu
  const auto F = scalar_map([](double, double x) { return x; });
  const std::vector<double> Ts{0.1};
  AuditGrid grid;
  grid.points = {Vector{{0.1}}};
  grid.k0_set = {0};
  const auto V = square(ClassKFunction::power(1.0, 2.0));
  CHECK(audit_lyapunov(V, F, 1.0, 0.5, Ts, grid, DecreaseForm::conventional).passed());
  CHECK(audit_lyapunov(V, F, 1.0, 0.5, Ts, grid, DecreaseForm::as_printed).falsified());
}

TEST_CASE("lyapunov constants imply an exponential envelope") {
  // alpha1 = alpha2 = s^2, alpha3 = s^2: |x(t)| <= exp(-t / 2)|x0|
  const auto F = scalar_map([](double T, double x) { return (1.0 - T) * x; });
  const std::vector<double> Ts{0.2, 0.05};
  AuditGrid grid;
  grid.samples = 16;
  grid.k0_set = {0};
  REQUIRE(audit_lyapunov(square(ClassKFunction::power(1.0, 2.0)), F, 1.0, 0.0, Ts, grid).passed());
  CHECK(falsify_spuas(F, KLBound::exponential(1.0, 0.5), 1.0, 0.0, Ts, grid, 20.0).passed());
}

TEST_CASE("summability of geometric driving trajectories") {
  const double a1 = 1.0, T = 0.1;
  std::vector<Trajectory> trs;
  for (double z0 : {0.0, 0.5, 1.0}) trs.push_back(geometric(T, 1.0 - T * a1, z0, 400));
  // T sum (1 - T a1)^k s = s / a1
  auto v = check_summability(trs, ClassKFunction::identity(), ClassKFunction::linear(1.001 / a1), T);
  CHECK(v.passed());
  CHECK(v.find_check("summability")->worst_ratio == doctest::Approx(1.0 / 1.001).epsilon(1e-9));
  v = check_summability(trs, ClassKFunction::identity(), ClassKFunction::linear(0.9 / a1), T);
  CHECK(v.falsified());
}

TEST_CASE("summability of the zero trajectory") {
  std::vector<Trajectory> trs{geometric(0.1, 0.5, 0.0, 10)};
  CHECK(check_summability(trs, ClassKFunction::identity(), ClassKFunction::linear(1.0), 0.1).passed());
}

TEST_CASE("harmonic terms are not certified") {
  Trajectory tr{0.1, 0, {}, {}};
  for (int k = 0; k < 300; ++k) tr.push(Vector{{1.0 / (k + 1.0)}});
  std::vector<Trajectory> trs{tr};
  const auto big = check_summability(trs, ClassKFunction::identity(), ClassKFunction::linear(1e6), 0.1);
  CHECK(big.outcome == Outcome::inconclusive);
  const auto small = check_summability(trs, ClassKFunction::identity(), ClassKFunction::linear(0.1), 0.1);
  CHECK(small.falsified());
}

TEST_CASE("certificate transform for linear growth") {
  const auto cert = make_ugb_certificate({ClassKFunction::identity(), ClassKFunction::linear(1.0),
                                          ClassKFunction::linear(2.0), 0.0},
                                         [](double, long, const Vector& x) { return x.squaredNorm(); });
  for (double s : {1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3}) {
    const double want = s <= 1.0 ? s : 1.0 + std::log(s);
    CHECK(cert.rho_built(s) == doctest::Approx(want).epsilon(1e-9));
  }
  double prev = cert.q(0.0);
  for (int i = 1; i < 200; ++i) {
    const double q = cert.q(0.05 * i);
    CHECK(q <= prev);
    prev = q;
  }
  CHECK(cert.mu_fn(1.0) == doctest::Approx(3.0));
  CHECK(cert.W_eval(0.1, 0, Vector{{2.0}}) == doctest::Approx(1.0 + std::log(4.0)));
}

TEST_CASE("certificate rejects fast growth") {
  const auto V = [](double, long, const Vector& x) { return x.squaredNorm(); };
  UgbHypothesis h{ClassKFunction::power(1.0, 2.0), ClassKFunction::linear(1.0), ClassKFunction::linear(1.0), 0.0};
  CHECK_THROWS_AS(make_ugb_certificate(h, V), DomainError);
  h.phi = ClassKFunction::polynomial({0.0, 1.0, 1.0});
  CHECK_THROWS_AS(make_ugb_certificate(h, V), DomainError);
  h.phi = ClassKFunction::power(1.0, 0.5);
  CHECK_NOTHROW(make_ugb_certificate(h, V));
  h.phi = ClassKFunction::custom("c", [](double s) { return s; });
  CHECK_THROWS_AS(make_ugb_certificate(h, V), DomainError);
}

TEST_CASE("certificate audit of a coupled scalar cascade") {
  // V(f(x,z)) - V(f(x,0)) = 2T c x z + T^2 z^2 <= T(|z|(V + 1) + |z|) for |z| <= 1, c <= 1
  LyapunovCandidate V{[](double, long, const Vector& x) { return x.squaredNorm(); }, ClassKFunction::power(1.0, 2.0),
                      ClassKFunction::power(1.0, 2.0), ClassKFunction::power(1.0, 2.0), std::nullopt};
  const UgbHypothesis h{ClassKFunction::identity(), ClassKFunction::linear(1.0), ClassKFunction::linear(2.0), 0.0};
  CertificateDomain dom;
  dom.x_radius = 3.0;
  dom.x_samples = 64;
  dom.z_samples = 9;
  dom.k_set = {0};
  const std::vector<double> Ts{0.1, 0.01};
  const auto audit = build_ugb_certificate(V, coupled(true), h, dom, Ts);
  CHECK(audit.verdict.passed());
  CHECK(audit.small_v_cases > 0);
  CHECK(audit.large_v_cases > 0);
  CHECK(audit.decrease_cases > 0);

  const UgbHypothesis tight{ClassKFunction::identity(), ClassKFunction::linear(0.1), ClassKFunction::linear(0.1), 0.0};
  const auto bad = build_ugb_certificate(V, coupled(), tight, dom, Ts);
  REQUIRE(bad.verdict.falsified());
  CHECK(bad.verdict.witness->check == "input-growth");
}

TEST_CASE("integral neutral stability inequality") {
  const double T = 0.1;
  const auto sys = coupled();
  std::vector<Vector> w;
  Rng rng(2);
  for (int i = 0; i < 100; ++i) w.push_back(Vector{{rng.uniform(-1.0, 1.0)}});
  const auto tr = simulate_driven(sys, T, 0, Vector{{0.7}}, InputSequence::make(0, w));
  // |x(k)| <= |x0| + T sum |z|
  const auto id = ClassKFunction::identity();
  CHECK(check_iisns(tr, w, id, id, id, T).passed());
  CHECK(check_iisns(tr, w, ClassKFunction::linear(3.0), id, id, T).falsified());
  CHECK_THROWS_AS(check_iisns(tr, std::span(w).first(10), id, id, id, T), DomainError);
}

}
