#pragma once

// Unicycle tracking case study: reference signals and their excitation,
// the tracking-error dynamics, the redesigned linear controller, the
// Lyapunov triple (V, W, U) with its constants, and the comparison between
// the emulated and redesigned controllers.

#include <array>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sdcascade/cascade.hpp"
#include "sdcascade/stability.hpp"

namespace sdc {

/// Raised when a routine needs constants that were computed but flagged
/// invalid; the message names the flag.
class PreconditionError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// a*sin(frequency*t + phase) + offset, or a constant / zero signal.
struct ScalarSignal {
  enum class Kind { zero, constant, sine };
  Kind kind = Kind::zero;
  double amplitude = 0.0;
  double frequency = 1.0;
  double phase = 0.0;
  double offset = 0.0;

  static ScalarSignal zero() { return {}; }
  static ScalarSignal constant(double value) { return {Kind::constant, value, 1.0, 0.0, 0.0}; }
  static ScalarSignal sine(double amplitude, double frequency = 1.0, double phase = 0.0, double offset = 0.0) {
    return {Kind::sine, amplitude, frequency, phase, offset};
  }

  double operator()(double t) const;
  double sup_bound() const;         // bound on |value|
  double derivative_bound() const;  // bound on |d/dt value|
  json to_json() const;
  static ScalarSignal from_json(const json& j);
};

struct ReferenceSignal {
  ScalarSignal v_r;
  ScalarSignal w_r;
  double w_M = 0.0;

  /// w_M taken as the largest of the analytic bounds on |v_r|, |w_r| and the
  /// rate of w_r (which bounds the difference quotient).
  static ReferenceSignal make(ScalarSignal v_r, ScalarSignal w_r);
  double v(long k, double T) const { return v_r(static_cast<double>(k) * T); }
  double w(long k, double T) const { return w_r(static_cast<double>(k) * T); }
  /// max over k in [0, steps] of max{|v_k|, |w_k|, |w_k - w_{k-1}|/T}.
  double measured_bound(double T, long steps) const;
  json to_json() const;
  static ReferenceSignal from_json(const json& j);
};

struct TrackingErrorState {
  double x_e = 0.0;
  double y_e = 0.0;
  double theta_e = 0.0;

  Vector as_vector() const;
  static TrackingErrorState from_vector(const Vector& v);
};

enum class CorrectionKind { none, scaled, full };

std::string to_string(CorrectionKind kind);
CorrectionKind correction_kind_from_string(const std::string& name);

struct ControllerGains {
  double a1 = 1.0;
  double a2 = 1.0;
  double alpha_y = 0.1;
  CorrectionKind correction = CorrectionKind::full;
  double scale = 0.5;  // numerator factor of the scaled variant

  /// Throws DomainError unless a1, a2, alpha_y > 0 and T a1 < 1.
  void validate(double T) const;
  json to_json() const;
  static ControllerGains from_json(const json& j);
};

struct ControlAction {
  double v = 0.0;
  double w = 0.0;
  double vartheta = 0.0;
};

// ---- excitation -------------------------------------------------------------

/// T * sum_{k=j}^{j+l} w_k^2 with l = horizon_index(L, T).
double pe_window_sum(const ReferenceSignal& refs, double L, double T, long j);

/// Minimum window sum over `j_samples` evenly spaced starts in one period
/// of 2 pi (0 means every start).
double pe_infimum(const ReferenceSignal& refs, double L, double T, std::size_t j_samples = 0);

StabilityVerdict check_pe(const ReferenceSignal& refs, double L, double mu, std::span<const double> T_list,
                          std::size_t j_samples = 0);

// ---- dynamics and control -----------------------------------------------------

/// State (x_e, y_e, theta_e), input (v, w):
///   x_e' = w y_e - v + v_r(t) cos theta_e
///   y_e' = -w x_e + v_r(t) sin theta_e
///   theta_e' = w_r(t) - w
VectorField error_dynamics_field(const ReferenceSignal& refs);

/// Numerator (a2^2 + w^2 - eps a2) x_e - (2 a2 w - eps w^3) y_e with w = w_r(k), eps = alpha_y + T.
double correction_numerator(long k, double x_e, double y_e, const ReferenceSignal& refs, const ControllerGains& gains,
                            double T);

/// Numerator over 2(1 - a2 T) + eps w^2 T. Throws DomainError on a vanishing denominator.
double redesign_correction(long k, double x_e, double y_e, const ReferenceSignal& refs, const ControllerGains& gains,
                           double T);

/// The correction selected by gains.correction.
double correction_value(long k, double x_e, double y_e, const ReferenceSignal& refs, const ControllerGains& gains,
                        double T);

/// Constant K with |vartheta(k, x)| <= K |x| for the selected variant.
double correction_bound(const ReferenceSignal& refs, const ControllerGains& gains, double T);

ControlAction tracking_controller(long k, const TrackingErrorState& state, const ReferenceSignal& refs,
                                  const ControllerGains& gains, double T);

InputLaw tracking_input_law(const ReferenceSignal& refs, const ControllerGains& gains);

/// Closed loop written as a cascade in x = (x_e, y_e), z = theta_e. The
/// maps evaluate the Euler step of the error dynamics under the controller,
/// so they agree bit for bit with euler_map(error_dynamics_field, controller).
CascadeSystem closed_loop_euler_cascade(const ReferenceSignal& refs, const ControllerGains& gains);

/// Zero-input part: ((1 - T a2) x_e + T w y_e - T^2 vartheta, y_e - T w x_e).
Vector unicycle_F1T(long k, const Vector& x, const ReferenceSignal& refs, const ControllerGains& gains, double T);
/// Interconnection: T (a1 z y_e - v_r + v_r cos z, -a1 z x_e + v_r sin z).
Vector unicycle_GT(long k, const Vector& x, double z, const ReferenceSignal& refs, const ControllerGains& gains,
                   double T);

/// Nominal x-subsystem f = F1T + G with G divided by T (the interconnection
/// without its sampling-period factor).
CascadeSystem unscaled_interconnection_cascade(const ReferenceSignal& refs, const ControllerGains& gains);

/// c with |G_T(k,x,z)| <= T c |z| (|x| + 1).
double interconnection_constant(const ReferenceSignal& refs, const ControllerGains& gains);

/// gamma1 with |f_T(k,x,z)| <= gamma1(|(x,z)|) for T <= T_max.
ClassKFunction interconnection_growth_bound(const ReferenceSignal& refs, const ControllerGains& gains, double T_max);

// ---- Lyapunov triple ------------------------------------------------------------

/// |x|^2 - eps w_r(k-1) x_e y_e, eps = alpha_y + T.
double lyap_V(long k, double x_e, double y_e, const ReferenceSignal& refs, const ControllerGains& gains, double T);

/// T sum_{i=k}^{k+N} e^{(k-i)T} w_i^2 with N the smallest count for which
/// 2 w_M^2 e^{-NT} <= tail_tol.
double excitation_weight(long k, const ReferenceSignal& refs, double T, double tail_tol = 1e-10);

/// -excitation sum times y_e^2, with N chosen so the tail is below tail_tol.
double lyap_W(long k, double y_e, const ReferenceSignal& refs, double T, double tail_tol = 1e-10);

/// Excitation weights tabulated over [0, k_max + 1]; falls back to direct
/// summation outside the table.
class ExcitationTable {
 public:
  ExcitationTable(const ReferenceSignal& refs, double T, long k_max, double tail_tol = 1e-10);
  double operator()(long k) const;
  double T() const { return T_; }

 private:
  ReferenceSignal refs_;
  double T_;
  double tail_tol_;
  std::vector<double> table_;
};

struct FlaggedConstant {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
};

struct CaseStudyConstants {
  double T = 0.0;       // audited sampling period
  double T_star = 0.0;  // design bound used in c1, c2, alpha_x
  double w_M = 0.0;
  double L_pe = 0.0;
  FlaggedConstant mu_pe, c1, c2, alpha_x, K1, c3, c4, K2, alpha_y_tilde, eps_small, c3_tilde, T_tilde;
  double T3_star = 0.0;  // also T4*: both thresholds solve T / (1 - e^{-T}) = 2
  double T5_star = 0.0;
  bool T_below_T_tilde = false;
  bool T_below_T5_star = false;
  bool w_M_respected = false;

  /// Names of the flags that are invalid, in declaration order.
  std::vector<std::string> violated() const;
  /// Throws PreconditionError naming the first invalid flag.
  void require_valid() const;
  json to_json() const;
};

struct LyapunovAuditPlan {
  double half_width = 5.0;  // state grid [-h, h]^2
  std::size_t per_axis = 41;
  std::vector<long> k_set;  // empty: {0, ..., ceil(2 pi / T)}
  double tail_tol = 1e-10;
};

std::vector<long> full_period_indices(double T);

/// c1, c2 and alpha_x from the closed forms, mu from the excitation
/// infimum, c3 = 2 w_M^2, c4 = e^{-L} mu / (1 - e^{-L}), alpha~_y = c4 / 4,
/// K1 and K2 as the smallest constants satisfying the V- and W-decrease
/// inequalities on the plan grid, then eps_small, c~3 and T~.
CaseStudyConstants compute_case_study_constants(const ReferenceSignal& refs, const ControllerGains& gains, double T,
                                                double T_star, double L_pe, const LyapunovAuditPlan& plan = {});

/// V + eps_small W.
double lyap_U(long k, const Vector& x, const ReferenceSignal& refs, const ControllerGains& gains,
              const CaseStudyConstants& constants, double T);

/// U as a Lyapunov candidate with alpha1 = c1/2 s^2, alpha2 = c2 s^2,
/// alpha3 = c~3 s^2 and L_mod(s) = 2 c2 s. Uses `table` for the weights.
LyapunovCandidate unicycle_U_candidate(const ReferenceSignal& refs, const ControllerGains& gains,
                                       const CaseStudyConstants& constants,
                                       std::shared_ptr<const ExcitationTable> table);

/// Zero-input map x -> F1T(k, x).
ParameterizedMap unicycle_zero_input_map(const ReferenceSignal& refs, const ControllerGains& gains);

/// Pointwise audit of the chain: "V-sandwich", "V-decrease", "W-sandwich",
/// "W-decrease", then the U checks of audit_lyapunov.
StabilityVerdict audit_lyapunov_chain(const ReferenceSignal& refs, const ControllerGains& gains,
                                      const CaseStudyConstants& constants, const LyapunovAuditPlan& plan = {});

struct UnicycleUgbAudit {
  double d = 0.0;  // gamma~1(s) = gamma~2(s) = d s
  CertificateAudit audit;
};

/// Certificate audit with V = U, phi(s) = s and linear gamma~1, gamma~2
/// fitted on the grid (|x| <= x_radius, |theta_e| <= z_radius).
UnicycleUgbAudit audit_unicycle_ugb(const ReferenceSignal& refs, const ControllerGains& gains,
                                    const CaseStudyConstants& constants, double x_radius, double z_radius,
                                    std::size_t per_axis, std::size_t z_samples, std::span<const long> k_set);

// ---- comparison experiment -----------------------------------------------------------

enum class PlantModel { euler, exact_proxy };

struct ComparisonConfig {
  ReferenceSignal refs;
  ControllerGains gains;
  double T = 0.01;
  double horizon_s = 10.0;
  TrackingErrorState initial{1.0, 1.0, 0.5};
  PlantModel plant = PlantModel::euler;
  std::vector<CorrectionKind> variants{CorrectionKind::none, CorrectionKind::scaled, CorrectionKind::full};
  double settle_tol = 1e-2;

  static ComparisonConfig from_json(const json& j);
};

struct VariantMetrics {
  double ise = 0.0;          // T sum (x_e^2 + y_e^2)
  double peak_v = 0.0;       // max |v|
  double energy = 0.0;       // T sum v^2
  std::optional<long> settle_xy;    // first step after which |(x_e, y_e)| <= tol
  std::optional<long> settle_full;  // same for |(x_e, y_e, theta_e)|
  double final_norm = 0.0;
};

struct VariantRun {
  CorrectionKind variant = CorrectionKind::none;
  std::vector<std::array<double, 8>> rows;  // k, t, x_e, y_e, theta_e, v, w, vartheta
  VariantMetrics metrics;

  void write_csv(std::ostream& out) const;
};

struct ComparisonResult {
  std::vector<VariantRun> runs;
  json metrics_json() const;
};

/// Simulates each variant from the common initial error. Divergence is
/// reported as DivergenceError naming the variant.
ComparisonResult run_comparison_experiment(const ComparisonConfig& config);

}  // namespace sdc
