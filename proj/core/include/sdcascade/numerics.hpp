#pragma once

// Comparison-function algebra shared by every audit: class K / K-infinity /
// N functions, KL bounds in the exponential and sigma-kappa families, the
// horizon index, and exponential envelope fitting over recorded trajectories.

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace sdc {

using json = nlohmann::json;

/// Raised on arguments outside an operation's domain (nonpositive periods,
/// empty sample sets, malformed tables).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot deliver a trustworthy value
/// (quadrature or integration failure, non-finite states).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest integer l with l*T <= L. Both arguments must be strictly positive.
long horizon_index(double L, double T);

struct InverseLookup {
  double value = 0.0;
  bool clamped = false;  // query fell outside the invertible range
};

/// Scalar comparison function on [0, inf).
///
/// Covers the class K / K-infinity gains (linear, power, tabulated), the
/// class N functions used as growth moduli (affine with optional cap), and
/// polynomials with nonnegative coefficients. Functions built at runtime by
/// other modules (for example the certificate transform rho) use the custom
/// kind, which evaluates but does not serialize.
class ClassKFunction {
 public:
  enum class Kind { linear, power, affine_capped, polynomial, tabulated, custom };

  ClassKFunction() : ClassKFunction(linear(1.0)) {}

  static ClassKFunction linear(double gain);
  static ClassKFunction identity() { return linear(1.0); }
  static ClassKFunction zero() { return linear(0.0); }
  static ClassKFunction power(double gain, double exponent);
  /// min(offset + gain*s, cap); class N when offset > 0.
  static ClassKFunction affine_capped(double gain, double offset,
                                      double cap = std::numeric_limits<double>::infinity());
  /// sum_i coeffs[i] * s^i with coeffs[i] >= 0.
  static ClassKFunction polynomial(std::vector<double> coeffs);
  /// Piecewise-linear through strictly increasing (input, output) pairs;
  /// extrapolates linearly with the end slopes.
  static ClassKFunction tabulated(std::vector<std::pair<double, double>> points);
  static ClassKFunction custom(std::string name, std::function<double(double)> fn);

  double operator()(double s) const;
  InverseLookup inverse(double y) const;

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const std::vector<double>& params() const { return params_; }
  bool zero_at_zero() const { return (*this)(0.0) == 0.0; }

  json to_json() const;
  static ClassKFunction from_json(const json& j);

 private:
  ClassKFunction(Kind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

  double eval_tabulated(double s) const;
  InverseLookup inverse_tabulated(double y) const;
  InverseLookup inverse_bisection(double y) const;

  Kind kind_ = Kind::linear;
  std::vector<double> params_;
  std::vector<std::pair<double, double>> table_;
  std::shared_ptr<const std::function<double(double)>> fn_;
  std::string name_;
};

/// beta(s, t): class KL comparison function.
///
/// Parametric forms:
///   exp          M * s * exp(-lambda t), M >= 1, lambda > 0
///   sigma_kappa  sigma(kappa(s) * exp(shift) * exp(-t))
/// plus two derived forms produced by kl_shift / kl_compose on arguments
/// that have no closed parametric shift.
class KLBound {
 public:
  enum class Form { exp, sigma_kappa, shifted, composed };

  static KLBound exponential(double gain, double rate);
  static KLBound sigma_kappa(ClassKFunction sigma, ClassKFunction kappa, double shift = 0.0);

  double operator()(double s, double t) const;

  Form form() const;
  /// Exp form only.
  double gain() const;
  double rate() const;

  json to_json() const;
  static KLBound from_json(const json& j);

  struct Node;

 private:
  explicit KLBound(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  friend KLBound kl_shift(const KLBound&, double);
  friend KLBound kl_compose(const KLBound&, const KLBound&, const KLBound&, const ClassKFunction&,
                            double, bool);

  std::shared_ptr<const Node> node_;
};

/// beta~ with beta(s,t) <= beta~(s, t + c).
KLBound kl_shift(const KLBound& beta, double c);

/// KL bound for a cascade assembled from the x-bound beta1, the input bound
/// beta2, the z-bound beta3 and the gain gamma. Each beta_i is first shifted
/// by c. The semiglobal form carries the 4/2 scale factors; the global form
/// drops them.
KLBound kl_compose(const KLBound& beta1, const KLBound& beta2, const KLBound& beta3,
                   const ClassKFunction& gamma, double c, bool global = false);

/// Norm history of one trajectory, indexed from its initial step.
struct EnvelopeSample {
  double T = 0.0;
  double initial_norm = 0.0;
  std::vector<double> norms;  // norms[i] = |phi(k0 + i)|
};

struct EnvelopeGrid {
  double gain_min = 1.0;
  double gain_max = 1.0e4;
  double gain_ratio = 1.25;
  double rate_min = 1.0e-4;
  double rate_max = 10.0;
  std::size_t rate_points = 1001;

  std::vector<double> gains() const;
  std::vector<double> rates() const;
};

struct EnvelopeWitness {
  std::size_t trajectory = 0;
  std::size_t step = 0;  // offset from k0
  double measured = 0.0;
  double bound = 0.0;
};

struct EnvelopeFit {
  std::optional<KLBound> bound;
  std::optional<EnvelopeWitness> witness;
  double gain = 0.0;
  double rate = 0.0;

  bool ok() const { return bound.has_value(); }
};

/// Smallest exp-form bound (least M, then largest lambda on the grid) with
/// |phi(k)| <= max{M |phi(k0)| exp(-lambda (k-k0) T), nu} for every sample.
/// Returns the first violation of the most permissive grid point when no
/// grid point fits.
EnvelopeFit fit_kl_envelope(std::span<const EnvelopeSample> trajectories, double nu,
                            const EnvelopeGrid& grid = {});

/// Adaptive Simpson quadrature of a scalar integrand on [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 50);

}  // namespace sdc
