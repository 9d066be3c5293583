#pragma once

// Deterministic sampling of compact sets and an ordered parallel map.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace sdc {

using Vector = Eigen::VectorXd;

/// Axis-aligned box [lower, upper].
struct Box {
  Vector lower;
  Vector upper;

  static Box cube(int dim, double half_width);
  int dim() const { return static_cast<int>(lower.size()); }
};

/// Component `dim` of the i-th Halton point (radical inverse in the dim-th prime).
double halton(std::size_t index, int dim);

/// Corner points, face centers, then Halton interior points; `count` total
/// (corners and faces are dropped first when count is small).
std::vector<Vector> sample_box(const Box& box, std::size_t count);

/// Points of the closed Euclidean ball of `radius`: the origin, the axis
/// points +-radius*e_i, then low-discrepancy interior points.
std::vector<Vector> sample_ball(int dim, double radius, std::size_t count);

/// Regular grid with `per_axis` points per coordinate over the box.
std::vector<Vector> grid_box(const Box& box, std::size_t per_axis);

/// Seeded uniform generator with a platform-independent mapping to doubles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

/// Number of worker threads used by parallel_for (default 1).
void set_worker_count(int jobs);
int worker_count();

/// Calls fn(i) for i in [0, n) across worker threads. fn must only write to
/// slot i of caller-owned storage so results are independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sdc
