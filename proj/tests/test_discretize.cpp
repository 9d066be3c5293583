#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "sdcascade/discretize.hpp"

using namespace sdc;

namespace {

VectorField double_integrator() {
  return {2, 1, [](double, const Vector& x, const Vector& u) { return Vector{{x[1], u[0]}}; }};
}

InputLaw deadbeat() {
  return InputLaw::feedback(1, [](double T, long, const Vector& x) { return Vector{{-(x[0] + 2.0 * x[1]) / T}}; });
}

}  // namespace

TEST_SUITE("discretize") {

TEST_CASE("euler step example") {
  const auto F = euler_map(double_integrator(), InputLaw::held(Vector{{3.0}}));
  const Vector y = F.step(0.1, 0, Vector{{1.0, 2.0}});
  CHECK(y[0] == doctest::Approx(1.2));
  CHECK(y[1] == doctest::Approx(2.3));
  CHECK_THROWS_AS(F.step(0.0, 0, Vector{{1.0, 2.0}}), DomainError);
  CHECK_THROWS_AS(F.step(0.1, -1, Vector{{1.0, 2.0}}), DomainError);
}

TEST_CASE("modified euler integrates time dependence") {
  const VectorField f{1, 1, [](double t, const Vector&, const Vector&) { return Vector{{std::sin(t)}}; }};
  const auto F = modified_euler_map(f, InputLaw::held(Vector{{0.0}}));
  CHECK(F.step(0.1, 0, Vector{{1.0}})[0] == doctest::Approx(1.0 + (1.0 - std::cos(0.1))).epsilon(1e-13));
  // k = 3 covers [0.3, 0.4]
  CHECK(F.step(0.1, 3, Vector{{0.0}})[0] == doctest::Approx(std::cos(0.3) - std::cos(0.4)).epsilon(1e-13));
}

TEST_CASE("modified euler equals euler for time-invariant fields") {
  const VectorField f{2, 1, [](double, const Vector& x, const Vector& u) {
                        return Vector{{x[1] - x[0] * x[0], std::sin(x[0]) + u[0]}};
                      }};
  const auto law = InputLaw::feedback(1, [](double, long k, const Vector& x) { return Vector{{-x[1] + 0.1 * k}}; });
  const auto E = euler_map(f, law);
  const auto M = modified_euler_map(f, law);
  for (const auto& x : sample_box(Box::cube(2, 2.0), 50)) {
    for (long k : {0L, 5L}) {
      const Vector a = E.step(0.05, k, x), b = M.step(0.05, k, x);
      CHECK((a - b).norm() <= 1e-13);
    }
  }
}

TEST_CASE("exact proxy closed forms") {
  const auto F = exact_proxy_map(double_integrator(), InputLaw::held(Vector{{1.0}}));
  const Vector y = F.step(0.5, 0, Vector::Zero(2));
  CHECK(y[0] == doctest::Approx(0.125).epsilon(1e-9));
  CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-9));

  const VectorField decay{1, 1, [](double, const Vector& x, const Vector&) { return Vector{-x}; }};
  const auto D = exact_proxy_map(decay, InputLaw::held(Vector{{0.0}}));
  CHECK(D.step(1.0, 0, Vector{{1.0}})[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("exact proxy matches the deadbeat closed loop matrix") {
  const auto F = exact_proxy_map(double_integrator(), deadbeat());
  for (double T : {0.01, 0.19, 0.4}) {
    Eigen::Matrix2d A;
    A << 1.0 - T / 2.0, 0.0, -1.0, -1.0;
    for (const auto& x : sample_box(Box::cube(2, 1.0), 20)) {
      const Vector want = A * x;
      CHECK((F.step(T, 0, x) - want).norm() <= 1e-8 * (1.0 + x.norm()));
    }
  }
}

TEST_CASE("consistency of a map with itself") {
  const auto F = euler_map(double_integrator(), deadbeat());
  const std::vector<double> Ts{0.1, 0.05};
  const std::vector<long> ks{0};
  const auto rep = consistency_order(F, F, Box::cube(2, 1.0), ks, Ts, {64});
  for (double e : rep.max_errors) CHECK(e == 0.0);
  CHECK_FALSE(rep.slope.has_value());
}

TEST_CASE("euler against exact for held input is second order") {
  const double u = 0.7;
  const auto E = euler_map(double_integrator(), InputLaw::held(Vector{{u}}));
  const auto X = exact_proxy_map(double_integrator(), InputLaw::held(Vector{{u}}));
  const std::vector<double> Ts{0.2, 0.1, 0.05, 0.025};
  const std::vector<long> ks{0, 3};
  const auto rep = consistency_order(X, E, Box::cube(2, 1.0), ks, Ts, {64}, 32);
  REQUIRE(rep.T_samples.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(rep.max_errors[i] == doctest::Approx(0.5 * rep.T_samples[i] * rep.T_samples[i] * u).epsilon(1e-6));
  }
  REQUIRE(rep.slope);
  CHECK(*rep.slope == doctest::Approx(2.0).epsilon(1e-6));
  REQUIRE(rep.K_est);
  CHECK(*rep.K_est <= 1.2);
}

TEST_CASE("lipschitz growth estimates") {
  const std::vector<double> Ts{0.1, 0.05, 0.01};
  const std::vector<long> ks{0};
  const ParameterizedMap contraction{1, 1.0, MapLabel::custom,
                                     [](double T, long, const Vector& x) { return Vector{(1.0 - T) * x}; }};
  auto est = lipschitz_growth_estimate(contraction, Box::cube(1, 1.0), ks, Ts, 16);
  CHECK(est.bounded);
  CHECK(est.K == doctest::Approx(0.0).epsilon(1e-12));

  const ParameterizedMap id{2, 1.0, MapLabel::custom, [](double, long, const Vector& x) { return x; }};
  est = lipschitz_growth_estimate(id, Box::cube(2, 1.0), ks, Ts, 16);
  CHECK(est.K <= 1e-12);

  // |I + T [[0,1],[0,0]]| = 1 + T + O(T^2)
  const auto E = euler_map(double_integrator(), InputLaw::held(Vector{{0.0}}));
  est = lipschitz_growth_estimate(E, Box::cube(2, 1.0), ks, Ts, 64);
  CHECK(est.bounded);
  CHECK(est.K <= 1.0 + 0.1);
  CHECK(est.K >= 0.4);

  // excess independent of T: growth like sqrt(T) is not affine
  const ParameterizedMap root{1, 1.0, MapLabel::custom,
                              [](double T, long, const Vector& x) { return Vector{(1.0 + std::sqrt(T)) * x}; }};
  est = lipschitz_growth_estimate(root, Box::cube(1, 1.0), ks, std::vector<double>{0.1, 1e-4}, 16);
  CHECK_FALSE(est.bounded);
  CHECK_FALSE(est.diagnostic.empty());
}

TEST_CASE("halving T halves the euler Lipschitz excess") {
  const auto E = euler_map(double_integrator(), InputLaw::held(Vector{{0.0}}));
  const std::vector<long> ks{0};
  const auto a = lipschitz_growth_estimate(E, Box::cube(2, 1.0), ks, std::vector<double>{0.02}, 64);
  const auto b = lipschitz_growth_estimate(E, Box::cube(2, 1.0), ks, std::vector<double>{0.01}, 64);
  CHECK(b.excess[0] == doctest::Approx(a.excess[0] / 2.0).epsilon(0.05));
}

TEST_CASE("loglog slope") {
  const std::vector<double> x{1.0, 2.0, 4.0}, y{3.0, 12.0, 48.0};
  CHECK(*loglog_slope(x, y) == doctest::Approx(2.0));
  CHECK_FALSE(loglog_slope(x, std::vector<double>{1.0, 0.0, 1.0}));
  CHECK_FALSE(loglog_slope(std::vector<double>{1.0}, std::vector<double>{1.0}));
}

TEST_CASE("default index set") {
  const auto ks = default_index_set(1.0);
  REQUIRE(ks.size() == 7);
  CHECK(ks.front() == 0);
  CHECK(ks.back() == 6);
}

}
