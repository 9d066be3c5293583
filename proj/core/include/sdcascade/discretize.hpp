#pragma once

// Continuous-time plants and the parameterized discrete-time maps built from
// them (Euler, modified Euler, tolerance-controlled exact proxy), plus the
// one-step consistency and Lipschitz-growth measurements between map families.

#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sdcascade/numerics.hpp"
#include "sdcascade/sampling.hpp"

namespace sdc {

/// Right-hand side f(t, x, u) of a controlled ODE.
struct VectorField {
  int dim_x = 0;
  int dim_u = 0;
  std::function<Vector(double t, const Vector& x, const Vector& u)> eval;

  Vector operator()(double t, const Vector& x, const Vector& u) const { return eval(t, x, u); }
};

/// Input applied over a sampling interval: either a constant held input or a
/// state feedback u = u_T(k, x) evaluated at the sampling instant.
class InputLaw {
 public:
  using Feedback = std::function<Vector(double T, long k, const Vector& x)>;

  static InputLaw held(Vector u);
  static InputLaw feedback(int dim_u, Feedback law);

  Vector operator()(double T, long k, const Vector& x) const;
  int dim() const { return dim_; }

 private:
  int dim_ = 0;
  Feedback law_;
};

enum class MapLabel { euler, modified_euler, exact_proxy, custom };

std::string to_string(MapLabel label);

/// x(k+1) = F_T(k, x(k)) for T in (0, T_max).
struct ParameterizedMap {
  int dim = 0;
  double T_max = std::numeric_limits<double>::infinity();
  MapLabel label = MapLabel::custom;
  std::function<Vector(double T, long k, const Vector& x)> step_fn;

  /// Throws DomainError outside the admissible period range or for k < 0.
  Vector step(double T, long k, const Vector& x) const;
};

/// Raised when the exact-proxy integrator cannot reach the end of a
/// sampling interval (step-size underflow, non-finite state).
class IntegrationError : public NumericError {
 public:
  IntegrationError(const std::string& what, double t_fail) : NumericError(what), t_fail_(t_fail) {}
  double time() const { return t_fail_; }

 private:
  double t_fail_;
};

/// x + T f(kT, x, u(k)).
ParameterizedMap euler_map(const VectorField& f, const InputLaw& input);

/// x + integral over [kT,(k+1)T] of f(tau, x, u(k)) with x frozen; the
/// integral uses adaptive Gauss-Kronrod (7/15).
ParameterizedMap modified_euler_map(const VectorField& f, const InputLaw& input, double quad_tol = 1e-12);

/// Integrates the zero-order-hold ODE over one sampling interval with
/// Dormand-Prince 5(4) step control at absolute and relative tolerance `tol`.
ParameterizedMap exact_proxy_map(const VectorField& f, const InputLaw& input, double tol = 1e-10);

/// Default index set {0, ..., floor(2 pi / T)}.
std::vector<long> default_index_set(double T);

struct SupSampling {
  std::size_t samples = 4096;
};

struct ConsistencyReport {
  std::vector<double> T_samples;   // strictly decreasing
  std::vector<double> max_errors;  // sup-norm one-step gaps
  std::optional<double> slope;     // log-log least-squares order
  std::optional<double> K_est;     // Lipschitz growth constant of the approximate map

  void write_csv(std::ostream& out) const;
  json summary() const;
};

/// max_errors[i] = sup over sampled (k, x) of |F_ref - F_apx| at T_samples[i].
/// An empty k_set samples the default index set of each T.
ConsistencyReport consistency_order(const ParameterizedMap& ref, const ParameterizedMap& apx, const Box& domain,
                                    std::span<const long> k_set, std::span<const double> T_list,
                                    const SupSampling& sampling = {}, std::size_t lipschitz_pairs = 0);

struct LipschitzEstimate {
  double K = 0.0;
  bool bounded = true;
  std::vector<double> T_samples;
  std::vector<double> excess;  // max (|dF|/|dx| - 1) per T
  std::string diagnostic;
};

/// Smallest K with |F_T(k,x1) - F_T(k,x2)| <= (1 + K T)|x1 - x2| over the
/// sampled pairs, k and T. `bounded` is false when the excess ratio does not
/// shrink with T (growth faster than affine in T).
LipschitzEstimate lipschitz_growth_estimate(const ParameterizedMap& F, const Box& domain,
                                            std::span<const long> k_set, std::span<const double> T_list,
                                            std::size_t pair_samples);

/// Least-squares slope of log(y) against log(x); nullopt when any y <= 0 or
/// fewer than two points.
std::optional<double> loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace sdc
