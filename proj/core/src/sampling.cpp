#include "sdcascade/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "sdcascade/numerics.hpp"

namespace sdc {

namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                           43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};

std::atomic<int> g_workers{1};

}  // namespace

Box Box::cube(int dim, double half_width) {
  return Box{Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width)};
}

double halton(std::size_t index, int dim) {
  if (dim < 0 || dim >= static_cast<int>(std::size(kPrimes))) throw DomainError("halton: dimension out of range");
  const auto base = static_cast<std::size_t>(kPrimes[dim]);
  double f = 1.0, r = 0.0;
  std::size_t i = index;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

std::vector<Vector> sample_box(const Box& box, std::size_t count) {
  const int d = box.dim();
  if (d == 0 || box.upper.size() != d) throw DomainError("sample_box: malformed box");
  std::vector<Vector> out;
  out.reserve(count);
  const Vector mid = 0.5 * (box.lower + box.upper);
  if (d <= 10) {
    const std::size_t corners = std::size_t{1} << d;
    for (std::size_t c = 0; c < corners && out.size() < count; ++c) {
      Vector p(d);
      for (int j = 0; j < d; ++j) p[j] = ((c >> j) & 1U) ? box.upper[j] : box.lower[j];
      out.push_back(std::move(p));
    }
  }
  for (int j = 0; j < d && out.size() + 1 < count; ++j) {
    Vector lo = mid, hi = mid;
    lo[j] = box.lower[j];
    hi[j] = box.upper[j];
    out.push_back(std::move(lo));
    out.push_back(std::move(hi));
  }
  if (out.size() < count) out.push_back(mid);
  // Skip index 0 of the Halton sequence (the origin of the unit cube).
  for (std::size_t i = 1; out.size() < count; ++i) {
    Vector p(d);
    for (int j = 0; j < d; ++j) p[j] = box.lower[j] + (box.upper[j] - box.lower[j]) * halton(i, j);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Vector> sample_ball(int dim, double radius, std::size_t count) {
  if (dim <= 0 || !(radius >= 0.0)) throw DomainError("sample_ball: bad dimension or radius");
  std::vector<Vector> out;
  out.reserve(count);
  if (count > 0) out.push_back(Vector::Zero(dim));
  for (int j = 0; j < dim && out.size() + 1 < count; ++j) {
    Vector e = Vector::Zero(dim);
    e[j] = radius;
    out.push_back(e);
    out.push_back(-e);
  }
  // Map cube points radially onto the ball: the sup-norm radius becomes the
  // Euclidean radius, which keeps the shells evenly covered.
  for (std::size_t i = 1; out.size() < count; ++i) {
    Vector p(dim);
    for (int j = 0; j < dim; ++j) p[j] = 2.0 * halton(i, j) - 1.0;
    const double n2 = p.norm();
    if (n2 == 0.0) continue;
    p *= radius * p.cwiseAbs().maxCoeff() / n2;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Vector> grid_box(const Box& box, std::size_t per_axis) {
  const int d = box.dim();
  if (per_axis < 2) throw DomainError("grid_box: need at least two points per axis");
  std::size_t total = 1;
  for (int j = 0; j < d; ++j) total *= per_axis;
  std::vector<Vector> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vector p(d);
    std::size_t rem = idx;
    for (int j = 0; j < d; ++j) {
      const auto a = static_cast<double>(rem % per_axis) / static_cast<double>(per_axis - 1);
      rem /= per_axis;
      p[j] = box.lower[j] + (box.upper[j] - box.lower[j]) * a;
    }
    out.push_back(std::move(p));
  }
  return out;
}

// splitmix64
std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

void set_worker_count(int jobs) { g_workers.store(std::max(1, jobs)); }
int worker_count() { return g_workers.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::min<long>(worker_count(), static_cast<long>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace sdc
