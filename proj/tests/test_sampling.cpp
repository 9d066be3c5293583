#include <doctest.h>

#include <atomic>

#include "sdcascade/numerics.hpp"
#include "sdcascade/sampling.hpp"

using namespace sdc;

TEST_SUITE("sampling") {

TEST_CASE("halton radical inverse") {
  CHECK(halton(1, 0) == doctest::Approx(0.5));
  CHECK(halton(2, 0) == doctest::Approx(0.25));
  CHECK(halton(3, 0) == doctest::Approx(0.75));
  CHECK(halton(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(halton(2, 1) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("ball samples stay inside and start with origin and axes") {
  const auto pts = sample_ball(3, 2.0, 200);
  REQUIRE(pts.size() == 200);
  CHECK(pts[0].norm() == 0.0);
  for (int i = 0; i < 3; ++i) {
    bool plus = false, minus = false;
    for (const auto& p : pts) {
      if ((p - 2.0 * Vector::Unit(3, i)).norm() < 1e-15) plus = true;
      if ((p + 2.0 * Vector::Unit(3, i)).norm() < 1e-15) minus = true;
    }
    CHECK(plus);
    CHECK(minus);
  }
  for (const auto& p : pts) CHECK(p.norm() <= 2.0 + 1e-12);
}

TEST_CASE("box samples cover corners") {
  const Box b{Vector{{-1.0, 0.0}}, Vector{{1.0, 2.0}}};
  const auto pts = sample_box(b, 64);
  REQUIRE(pts.size() == 64);
  bool corner = false;
  for (const auto& p : pts) {
    CHECK(p[0] >= -1.0);
    CHECK(p[0] <= 1.0);
    CHECK(p[1] >= 0.0);
    CHECK(p[1] <= 2.0);
    if ((p - Vector{{1.0, 2.0}}).norm() == 0.0) corner = true;
  }
  CHECK(corner);
  CHECK(grid_box(Box::cube(2, 1.0), 5).size() == 25);
}

TEST_CASE("rng is reproducible") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
  }
  Rng u(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("parallel_for visits each slot once regardless of workers") {
  for (int jobs : {1, 2, 4, 7}) {
    set_worker_count(jobs);
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += static_cast<int>(i % 7) + 1; });
    for (std::size_t i = 0; i < hits.size(); ++i) CHECK(hits[i] == static_cast<int>(i % 7) + 1);
  }
  set_worker_count(1);
}

}
