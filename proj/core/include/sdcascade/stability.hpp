#pragma once

// Grid audits of the stability notions: SP-UAS envelopes, uniform
// boundedness, Lyapunov candidates, summability of driving trajectories,
// the UGB certificate transform W = rho(V), and the integral neutral
// stability inequality.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sdcascade/cascade.hpp"

namespace sdc {

struct LyapunovCandidate {
  std::function<double(double T, long k, const Vector& x)> eval;
  ClassKFunction alpha1;
  ClassKFunction alpha2;
  ClassKFunction alpha3;
  std::optional<ClassKFunction> L_mod;  // Lipschitz modulus; unchecked when absent

  double operator()(double T, long k, const Vector& x) const { return eval(T, k, x); }
};

/// Initial conditions and starting indices for trajectory and pointwise
/// audits. When `points` is empty, `samples` points of the ball are drawn
/// with sample_ball; an empty `k0_set` uses periodic_k0_samples(T).
struct AuditGrid {
  std::size_t samples = 128;
  std::vector<Vector> points;
  std::vector<long> k0_set;
  std::size_t lipschitz_pairs = 128;
  bool record_margins = false;
};

/// `max`: |phi(k)| <= max{beta, nu}. `plus`: |phi(k)| <= beta + nu.
enum class EnvelopeComparator { max, plus };

/// Definition-3 decrease as printed, dV <= -T(alpha3 + nu), or the
/// conventional practical form dV <= -T alpha3 + T nu.
enum class DecreaseForm { as_printed, conventional };

/// Simulates every grid initial condition with |y0| <= Delta for `horizon`
/// time units at each T and compares against beta.
StabilityVerdict falsify_spuas(const ParameterizedMap& F, const KLBound& beta, double Delta, double nu,
                               std::span<const double> T_list, const AuditGrid& grid, double horizon,
                               EnvelopeComparator comparator = EnvelopeComparator::max);
StabilityVerdict falsify_spuas(const CascadeSystem& sys, const KLBound& beta, double Delta, double nu,
                               std::span<const double> T_list, const AuditGrid& grid, double horizon,
                               EnvelopeComparator comparator = EnvelopeComparator::max);

/// |phi(k)| <= kappa(|y0|) + c along every sampled trajectory.
StabilityVerdict check_boundedness(const ParameterizedMap& F, const ClassKFunction& kappa, double c, double Delta,
                                   std::span<const double> T_list, const AuditGrid& grid, double horizon);
StabilityVerdict check_boundedness(const CascadeSystem& sys, const ClassKFunction& kappa, double c, double Delta,
                                   std::span<const double> T_list, const AuditGrid& grid, double horizon);

/// Pointwise checks named "sandwich-lower", "sandwich-upper", "decrease" and
/// "lipschitz". Margin rows (when requested) belong to the decrease check.
StabilityVerdict audit_lyapunov(const LyapunovCandidate& V, const ParameterizedMap& F, double Delta, double nu,
                                std::span<const double> T_list, const AuditGrid& grid,
                                DecreaseForm form = DecreaseForm::as_printed);

struct SummabilityOptions {
  double tail_fraction = 1e-6;  // tail must be below this fraction of the partial sum
};

/// T * sum_k mu(|z(k)|) <= rho(|z(k0)|) for each trajectory, the infinite
/// tail bounded by a geometric fit over the last third of the terms.
/// A tail that cannot be certified gives an inconclusive verdict.
StabilityVerdict check_summability(std::span<const Trajectory> z_trajectories, const ClassKFunction& mu,
                                   const ClassKFunction& rho, double T, const SummabilityOptions& options = {});

/// Growth functions and offset of the UGB hypothesis.
struct UgbHypothesis {
  ClassKFunction phi = ClassKFunction::identity();
  ClassKFunction gamma1_t;
  ClassKFunction gamma2_t;
  double c = 0.0;
};

struct UGBCertificate {
  ClassKFunction phi_growth;
  ClassKFunction gamma1_t;
  ClassKFunction gamma2_t;
  double c = 0.0;
  std::function<double(double)> q;
  ClassKFunction rho_built;
  ClassKFunction mu_fn;
  std::function<double(double T, long k, const Vector& x)> W_eval;
};

/// q(s) = 1/phi(1) for s <= 1 and 1/phi(s) beyond; rho = integral of q
/// (closed form below 1, adaptive Simpson above). Throws DomainError when
/// the integral of 1/phi over [1, inf) converges or cannot be decided.
UGBCertificate make_ugb_certificate(const UgbHypothesis& hyp, std::function<double(double, long, const Vector&)> V);

struct CertificateDomain {
  double x_radius = 1.0;
  double z_radius = 1.0;
  std::size_t x_samples = 256;
  std::size_t z_samples = 16;
  std::vector<Vector> x_points;  // overrides x_samples when nonempty
  std::vector<long> k_set;
};

struct CertificateAudit {
  UGBCertificate certificate;
  StabilityVerdict verdict;
  std::size_t decrease_cases = 0;  // V(k+1, f) <= V(k, x)
  std::size_t small_v_cases = 0;   // V increases from V <= 1
  std::size_t large_v_cases = 0;   // V increases from V > 1
};

/// Checks "sandwich-lower/upper" (alpha1 <= V <= alpha2 + c),
/// "input-growth", "zero-input-decrease" and the transformed
/// "w-increment" W(k+1, f(k,x,z)) - W(k,x) <= T mu(|z|).
CertificateAudit build_ugb_certificate(const LyapunovCandidate& V, const CascadeSystem& sys,
                                       const UgbHypothesis& hyp, const CertificateDomain& domain,
                                       std::span<const double> T_list);

/// alpha1(|x(k)|) <= alpha2(|x(k0)|) + T sum_{i<k} mu(|z(i)|) for every k.
/// `inputs[i]` is the input applied between states i and i+1.
StabilityVerdict check_iisns(const Trajectory& x_traj, std::span<const Vector> inputs, const ClassKFunction& alpha1,
                             const ClassKFunction& alpha2, const ClassKFunction& mu, double T);

}  // namespace sdc
