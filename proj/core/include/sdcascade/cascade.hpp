#pragma once

// Parameterized time-varying cascades
//   x(k+1) = f_T(k, x(k), z(k))
//   z(k+1) = g_T(k, z(k))
// their simulation, and audits of the structural hypotheses used to argue
// stability of the cascade from its parts.

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "sdcascade/discretize.hpp"
#include "sdcascade/verdict.hpp"

namespace sdc {

struct CascadeSystem {
  int dim_x = 0;
  int dim_z = 0;
  double T_max = std::numeric_limits<double>::infinity();
  std::function<Vector(double T, long k, const Vector& x, const Vector& z)> f;
  std::function<Vector(double T, long k, const Vector& z)> g;  // never sees x
};

/// Input sequence z(start), z(start+1), ...
struct InputSequence {
  long start = 0;
  std::vector<Vector> values;
  double sup_norm = 0.0;

  static InputSequence make(long start, std::vector<Vector> values);
  static InputSequence zeros(long start, std::size_t length, int dim);
  const Vector& at(long k) const;
  bool covers(long k0, std::size_t steps) const;
};

struct Trajectory {
  double T = 0.0;
  long k0 = 0;
  std::vector<Vector> states;  // states[0] is the initial condition
  std::vector<double> norms;

  void push(Vector state);
  std::size_t size() const { return states.size(); }
  long last_index() const { return k0 + static_cast<long>(states.size()) - 1; }
  EnvelopeSample envelope() const;
  /// Columns k, t=kT, state components, norm.
  void write_csv(std::ostream& out, const std::vector<std::string>& names = {}) const;
};

struct CascadeTrajectory {
  Trajectory x;
  Trajectory z;
};

/// Raised when a simulated state becomes non-finite.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, long index) : NumericError(what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

CascadeTrajectory simulate_cascade(const CascadeSystem& sys, double T, long k0, const Vector& x0, const Vector& z0,
                                   std::size_t steps);

/// x-subsystem driven by an exogenous input; `steps` defaults to the input
/// length remaining after k0.
Trajectory simulate_driven(const CascadeSystem& sys, double T, long k0, const Vector& x0, const InputSequence& input,
                           std::optional<std::size_t> steps = std::nullopt);

/// Whole cascade as one parameterized map on xi = (x, z).
ParameterizedMap as_parameterized_map(const CascadeSystem& sys);

/// Zero-input x-subsystem x(k+1) = f_T(k, x, 0) as a parameterized map.
ParameterizedMap zero_input_map(const CascadeSystem& sys);

/// z-subsystem as a parameterized map.
ParameterizedMap driving_map(const CascadeSystem& sys);

/// Sampling plan for pointwise audits over x- and z-balls.
struct AuditDomain {
  double x_radius = 1.0;
  double z_radius = 1.0;
  std::size_t x_samples = 256;
  std::size_t z_samples = 16;
  std::vector<long> k_set;  // empty: {0, 1, P/2, P-1} with P = floor(2 pi / T)
};

std::vector<long> periodic_k0_samples(double T);

/// Checks |f_T(k,x,z)| <= gamma1(|xi|) and
/// |f_T(k,x,z) - f_T(k,x,0)| <= T gamma2(|x|) gamma3(|z|) on the samples.
StabilityVerdict check_interconnection_bound(const CascadeSystem& sys, const ClassKFunction& gamma1,
                                             const ClassKFunction& gamma2, const ClassKFunction& gamma3,
                                             const AuditDomain& domain, std::span<const double> T_list);

struct UscConstants {
  double K = 0.0;
  double K_state = 0.0;  // from |f(x1,z) - f(x2,z)| <= (1 + K T)|x1 - x2|
  double K_input = 0.0;  // from |f(x,z1) - f(x,z2)| <= K T |z1 - z2|
  bool bounded = true;
  StabilityVerdict verdict;
};

/// Empirical smallest K for the two Lipschitz conditions that imply uniform
/// continuity of driven solutions, over |x| <= delta_x, |z| <= delta_z.
UscConstants estimate_usc_constants(const CascadeSystem& sys, double delta_x, double delta_z,
                                    std::span<const double> T_list, std::size_t samples,
                                    std::span<const long> k_set = {});

struct UscProbeConfig {
  double delta = 1.0;
  double eta = 0.5;
  double epsilon = 0.1;
  double L = 1.0;
  std::vector<double> T_list;
  std::vector<double> mu_grid;  // ascending
  std::size_t initial_samples = 9;
  std::size_t random_inputs = 4;
  std::uint64_t seed = 1;
  std::vector<long> k0_set;  // empty: periodic_k0_samples(T)
};

struct UscProbeResult {
  std::optional<double> largest_mu;  // largest grid value with every smaller value also passing
  std::vector<bool> passes;          // per mu_grid entry
  std::vector<double> max_deviation; // per mu_grid entry
  std::size_t inputs_tested = 0;     // coverage per mu value
};

/// For each mu: compares driven and zero-input solutions from |x0| <= eta
/// over [k0, k0 + l_{L,T}] for piecewise-constant inputs with sup norm mu
/// (constant extremes plus seeded random switching inputs).
UscProbeResult usc_probe(const CascadeSystem& sys, const UscProbeConfig& config);

}  // namespace sdc
