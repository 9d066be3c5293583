#include "sdcascade/unicycle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sdc {

// ---- signals ----------------------------------------------------------------

double ScalarSignal::operator()(double t) const {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::constant: return amplitude;
    case Kind::sine: return amplitude * std::sin(frequency * t + phase) + offset;
  }
  return 0.0;
}

double ScalarSignal::sup_bound() const {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::constant: return std::abs(amplitude);
    case Kind::sine: return std::abs(amplitude) + std::abs(offset);
  }
  return 0.0;
}

double ScalarSignal::derivative_bound() const {
  return kind == Kind::sine ? std::abs(amplitude * frequency) : 0.0;
}

json ScalarSignal::to_json() const {
  switch (kind) {
    case Kind::zero: return {{"kind", "zero"}};
    case Kind::constant: return {{"kind", "constant"}, {"amplitude", amplitude}};
    case Kind::sine:
      return {{"kind", "sine"}, {"amplitude", amplitude}, {"frequency", frequency}, {"phase", phase}, {"offset", offset}};
  }
  return nullptr;
}

ScalarSignal ScalarSignal::from_json(const json& j) {
  if (j.is_number()) return j.get<double>() == 0.0 ? zero() : constant(j.get<double>());
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "zero") return zero();
  if (kind == "constant") return constant(j.at("amplitude").get<double>());
  if (kind == "sine") {
    return sine(j.at("amplitude").get<double>(), j.value("frequency", 1.0), j.value("phase", 0.0),
                j.value("offset", 0.0));
  }
  throw DomainError("unknown signal kind '" + kind + "'");
}

ReferenceSignal ReferenceSignal::make(ScalarSignal v_r, ScalarSignal w_r) {
  ReferenceSignal r{v_r, w_r, 0.0};
  r.w_M = std::max({v_r.sup_bound(), w_r.sup_bound(), w_r.derivative_bound()});
  return r;
}

double ReferenceSignal::measured_bound(double T, long steps) const {
  double m = 0.0;
  for (long k = 0; k <= steps; ++k) {
    m = std::max({m, std::abs(v(k, T)), std::abs(w(k, T)), std::abs(w(k, T) - w(k - 1, T)) / T});
  }
  return m;
}

json ReferenceSignal::to_json() const { return {{"vr", v_r.to_json()}, {"wr", w_r.to_json()}, {"w_M", w_M}}; }

ReferenceSignal ReferenceSignal::from_json(const json& j) {
  auto r = make(ScalarSignal::from_json(j.at("vr")), ScalarSignal::from_json(j.at("wr")));
  if (j.contains("w_M")) {
    r.w_M = j.at("w_M").get<double>();
    if (!(r.w_M >= 0.0)) throw DomainError("w_M must be nonnegative");
  }
  return r;
}

Vector TrackingErrorState::as_vector() const { return Vector{{x_e, y_e, theta_e}}; }

TrackingErrorState TrackingErrorState::from_vector(const Vector& v) {
  if (v.size() != 3) throw DomainError("tracking error state has three components");
  return {v[0], v[1], v[2]};
}

std::string to_string(CorrectionKind kind) {
  switch (kind) {
    case CorrectionKind::none: return "none";
    case CorrectionKind::scaled: return "scaled";
    case CorrectionKind::full: return "full";
  }
  return "none";
}

CorrectionKind correction_kind_from_string(const std::string& name) {
  if (name == "none") return CorrectionKind::none;
  if (name == "scaled") return CorrectionKind::scaled;
  if (name == "full") return CorrectionKind::full;
  throw DomainError("unknown correction variant '" + name + "'");
}

void ControllerGains::validate(double T) const {
  if (!(a1 > 0.0) || !(a2 > 0.0) || !(alpha_y > 0.0)) throw DomainError("gains a1, a2, alpha_y must be positive");
  if (!(T > 0.0) || !(T * a1 < 1.0)) throw DomainError("sampling period must satisfy 0 < T a1 < 1");
}

json ControllerGains::to_json() const {
  return {{"a1", a1}, {"a2", a2}, {"alpha_y", alpha_y}, {"correction", to_string(correction)}, {"scale", scale}};
}

ControllerGains ControllerGains::from_json(const json& j) {
  ControllerGains g;
  g.a1 = j.at("a1").get<double>();
  g.a2 = j.at("a2").get<double>();
  g.alpha_y = j.at("alpha_y").get<double>();
  if (j.contains("correction")) g.correction = correction_kind_from_string(j.at("correction").get<std::string>());
  g.scale = j.value("scale", 0.5);
  return g;
}

// ---- excitation -------------------------------------------------------------

double pe_window_sum(const ReferenceSignal& refs, double L, double T, long j) {
  const long l = horizon_index(L, T);
  double s = 0.0;
  for (long k = j; k <= j + l; ++k) {
    const double w = refs.w(k, T);
    s += w * w;
  }
  return T * s;
}

namespace {

long period_steps(const ReferenceSignal& refs, double T) {
  double period = 2.0 * std::numbers::pi;
  if (refs.w_r.kind == ScalarSignal::Kind::sine && refs.w_r.frequency != 0.0) {
    period = 2.0 * std::numbers::pi / std::abs(refs.w_r.frequency);
  }
  return std::max<long>(1, static_cast<long>(std::floor(period / T)));
}

std::vector<long> window_starts(const ReferenceSignal& refs, double T, std::size_t j_samples) {
  const long P = period_steps(refs, T);
  std::vector<long> js;
  if (j_samples == 0 || static_cast<long>(j_samples) > P) {
    for (long j = 0; j <= P; ++j) js.push_back(j);
  } else if (j_samples == 1) {
    js.push_back(0);
  } else {
    for (std::size_t i = 0; i < j_samples; ++i) {
      js.push_back(static_cast<long>(i) * P / static_cast<long>(j_samples - 1));
    }
  }
  return js;
}

}  // namespace

double pe_infimum(const ReferenceSignal& refs, double L, double T, std::size_t j_samples) {
  const auto js = window_starts(refs, T, j_samples);
  std::vector<double> sums(js.size());
  parallel_for(js.size(), [&](std::size_t i) { sums[i] = pe_window_sum(refs, L, T, js[i]); });
  return *std::min_element(sums.begin(), sums.end());
}

StabilityVerdict check_pe(const ReferenceSignal& refs, double L, double mu, std::span<const double> T_list,
                          std::size_t j_samples) {
  if (!(L > 0.0) || !(mu > 0.0)) throw DomainError("check_pe: L and mu must be positive");
  StabilityVerdict verdict;
  auto& summary = verdict.check("excitation");
  for (double T : T_list) {
    const auto js = window_starts(refs, T, j_samples);
    std::vector<double> sums(js.size());
    parallel_for(js.size(), [&](std::size_t i) { sums[i] = pe_window_sum(refs, L, T, js[i]); });
    for (std::size_t i = 0; i < js.size(); ++i) {
      // Excitation is a lower bound, so the roles of bound and measurement swap.
      summary.record(mu, sums[i]);
      if (sums[i] + kVerdictSlack < mu) {
        verdict.falsify({"excitation", T, js[i], Vector(0), js[i] + horizon_index(L, T), sums[i], mu, std::nullopt});
      }
    }
  }
  return verdict;
}

// ---- dynamics and control -----------------------------------------------------

VectorField error_dynamics_field(const ReferenceSignal& refs) {
  VectorField f;
  f.dim_x = 3;
  f.dim_u = 2;
  f.eval = [refs](double t, const Vector& s, const Vector& u) -> Vector {
    const double vr = refs.v_r(t), wr = refs.w_r(t);
    const double v = u[0], w = u[1];
    return Vector{{w * s[1] - v + vr * std::cos(s[2]), -w * s[0] + vr * std::sin(s[2]), wr - w}};
  };
  return f;
}

double correction_numerator(long k, double x_e, double y_e, const ReferenceSignal& refs, const ControllerGains& gains,
                            double T) {
  const double w = refs.w(k, T);
  const double eps = gains.alpha_y + T;
  const double a2 = gains.a2;
  return (a2 * a2 + w * w - eps * a2) * x_e - (2.0 * a2 * w - eps * w * w * w) * y_e;
}

double redesign_correction(long k, double x_e, double y_e, const ReferenceSignal& refs, const ControllerGains& gains,
                           double T) {
  const double w = refs.w(k, T);
  const double eps = gains.alpha_y + T;
  const double den = 2.0 * (1.0 - gains.a2 * T) + eps * w * w * T;
  if (std::abs(den) < 1e-12) {
    throw DomainError("correction denominator vanishes at k=" + std::to_string(k) + ", T=" + std::to_string(T));
  }
  return correction_numerator(k, x_e, y_e, refs, gains, T) / den;
}

double correction_value(long k, double x_e, double y_e, const ReferenceSignal& refs, const ControllerGains& gains,
                        double T) {
  switch (gains.correction) {
    case CorrectionKind::none: return 0.0;
    case CorrectionKind::scaled: return gains.scale * correction_numerator(k, x_e, y_e, refs, gains, T);
    case CorrectionKind::full: return redesign_correction(k, x_e, y_e, refs, gains, T);
  }
  return 0.0;
}

double correction_bound(const ReferenceSignal& refs, const ControllerGains& gains, double T) {
  const double w = refs.w_M, a2 = gains.a2, eps = gains.alpha_y + T;
  const double base = a2 * a2 + w * w + eps * a2 + 2.0 * a2 * w + eps * w * w * w;
  switch (gains.correction) {
    case CorrectionKind::none: return 0.0;
    case CorrectionKind::scaled: return std::abs(gains.scale) * base;
    case CorrectionKind::full:
      return a2 * T < 1.0 ? base / (2.0 * (1.0 - a2 * T)) : std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

ControlAction tracking_controller(long k, const TrackingErrorState& s, const ReferenceSignal& refs,
                                  const ControllerGains& gains, double T) {
  ControlAction a;
  a.w = refs.w(k, T) + gains.a1 * s.theta_e;
  a.vartheta = correction_value(k, s.x_e, s.y_e, refs, gains, T);
  a.v = refs.v(k, T) + gains.a2 * s.x_e + T * a.vartheta;
  return a;
}

InputLaw tracking_input_law(const ReferenceSignal& refs, const ControllerGains& gains) {
  return InputLaw::feedback(2, [refs, gains](double T, long k, const Vector& s) -> Vector {
    const auto a = tracking_controller(k, TrackingErrorState::from_vector(s), refs, gains, T);
    return Vector{{a.v, a.w}};
  });
}

CascadeSystem closed_loop_euler_cascade(const ReferenceSignal& refs, const ControllerGains& gains) {
  const auto field = error_dynamics_field(refs);
  const auto law = tracking_input_law(refs, gains);
  CascadeSystem sys;
  sys.dim_x = 2;
  sys.dim_z = 1;
  sys.T_max = 1.0 / gains.a1;
  sys.f = [field, law](double T, long k, const Vector& x, const Vector& z) -> Vector {
    const Vector s{{x[0], x[1], z[0]}};
    const double t = static_cast<double>(k) * T;
    const Vector next = s + T * field(t, s, law(T, k, s));
    return next.head(2);
  };
  sys.g = [field, law](double T, long k, const Vector& z) -> Vector {
    // The orientation update does not involve (x_e, y_e), so zeros stand in.
    const Vector s{{0.0, 0.0, z[0]}};
    const double t = static_cast<double>(k) * T;
    const Vector next = s + T * field(t, s, law(T, k, s));
    return next.tail(1);
  };
  return sys;
}

Vector unicycle_F1T(long k, const Vector& x, const ReferenceSignal& refs, const ControllerGains& gains, double T) {
  const double w = refs.w(k, T);
  const double th = correction_value(k, x[0], x[1], refs, gains, T);
  return Vector{{(1.0 - T * gains.a2) * x[0] + T * w * x[1] - T * T * th, x[1] - T * w * x[0]}};
}

Vector unicycle_GT(long k, const Vector& x, double z, const ReferenceSignal& refs, const ControllerGains& gains,
                   double T) {
  const double vr = refs.v(k, T);
  return Vector{{T * (gains.a1 * z * x[1] - vr + vr * std::cos(z)), T * (-gains.a1 * z * x[0] + vr * std::sin(z))}};
}

CascadeSystem unscaled_interconnection_cascade(const ReferenceSignal& refs, const ControllerGains& gains) {
  CascadeSystem sys;
  sys.dim_x = 2;
  sys.dim_z = 1;
  sys.T_max = 1.0 / gains.a1;
  sys.f = [refs, gains](double T, long k, const Vector& x, const Vector& z) -> Vector {
    return unicycle_F1T(k, x, refs, gains, T) + unicycle_GT(k, x, z[0], refs, gains, T) / T;
  };
  sys.g = [gains](double T, long, const Vector& z) -> Vector { return (1.0 - T * gains.a1) * z; };
  return sys;
}

double interconnection_constant(const ReferenceSignal& refs, const ControllerGains& gains) {
  // |(cos z - 1, sin z)| = 2|sin(z/2)| <= |z|, so |G| <= T |z| (a1 |x| + |v_r|).
  return std::max(gains.a1, refs.w_M);
}

ClassKFunction interconnection_growth_bound(const ReferenceSignal& refs, const ControllerGains& gains, double T_max) {
  // Row sums of the F1T matrix plus the interconnection bound, all at T_max.
  const double K = correction_bound(refs, gains, T_max);
  const double w = refs.w_M;
  const double lin = std::max(1.0, std::abs(1.0 - T_max * gains.a2)) + 2.0 * T_max * w + T_max * T_max * K + 1.0 +
                     T_max * refs.v_r.sup_bound();
  return ClassKFunction::polynomial({0.0, lin, T_max * gains.a1});
}

// ---- Lyapunov triple ------------------------------------------------------------

double lyap_V(long k, double x_e, double y_e, const ReferenceSignal& refs, const ControllerGains& gains, double T) {
  const double eps = gains.alpha_y + T;
  return x_e * x_e + y_e * y_e - eps * refs.w(k - 1, T) * x_e * y_e;
}

namespace {

// Smallest N with bound * e^{-N T} <= tail_tol.
long tail_terms(double bound, double T, double tail_tol) {
  if (!(tail_tol > 0.0)) throw DomainError("tail tolerance must be positive");
  if (bound <= tail_tol) return 0;
  return static_cast<long>(std::ceil(std::log(bound / tail_tol) / T));
}

double weight_sum(long k, const ReferenceSignal& refs, double T, long N) {
  double s = 0.0;
  for (long i = 0; i <= N; ++i) {
    const double w = refs.w(k + i, T);
    s += std::exp(-static_cast<double>(i) * T) * w * w;
  }
  return T * s;
}

}  // namespace

double excitation_weight(long k, const ReferenceSignal& refs, double T, double tail_tol) {
  return weight_sum(k, refs, T, tail_terms(2.0 * refs.w_M * refs.w_M, T, tail_tol));
}

double lyap_W(long k, double y_e, const ReferenceSignal& refs, double T, double tail_tol) {
  if (y_e == 0.0) return 0.0;
  const long N = tail_terms(2.0 * refs.w_M * refs.w_M * y_e * y_e, T, tail_tol);
  return -weight_sum(k, refs, T, N) * y_e * y_e;
}

ExcitationTable::ExcitationTable(const ReferenceSignal& refs, double T, long k_max, double tail_tol)
    : refs_(refs), T_(T), tail_tol_(tail_tol) {
  if (k_max < 0) throw DomainError("ExcitationTable: negative k_max");
  table_.resize(static_cast<std::size_t>(k_max) + 2);
  parallel_for(table_.size(), [&](std::size_t k) {
    table_[k] = excitation_weight(static_cast<long>(k), refs_, T_, tail_tol_);
  });
}

double ExcitationTable::operator()(long k) const {
  if (k >= 0 && k < static_cast<long>(table_.size())) return table_[static_cast<std::size_t>(k)];
  return excitation_weight(k, refs_, T_, tail_tol_);
}

std::vector<std::string> CaseStudyConstants::violated() const {
  std::vector<std::string> out;
  const std::pair<const char*, const FlaggedConstant*> flags[] = {
      {"mu_pe", &mu_pe}, {"c1", &c1}, {"c2", &c2}, {"alpha_x", &alpha_x}, {"K1", &K1}, {"c3", &c3}, {"c4", &c4},
      {"K2", &K2}, {"alpha_y_tilde", &alpha_y_tilde}, {"eps_small", &eps_small}, {"c3_tilde", &c3_tilde},
      {"T_tilde", &T_tilde}};
  for (const auto& [name, c] : flags) {
    if (!c->valid) out.emplace_back(name);
  }
  return out;
}

void CaseStudyConstants::require_valid() const {
  const auto bad = violated();
  if (!bad.empty()) throw PreconditionError("case-study constant '" + bad.front() + "' is not valid");
}

json CaseStudyConstants::to_json() const {
  auto flagged = [](const FlaggedConstant& c) {
    return json{{"value", std::isfinite(c.value) ? json(c.value) : json(nullptr)}, {"valid", c.valid}};
  };
  return {{"T", T},
          {"T_star", T_star},
          {"w_M", w_M},
          {"L_pe", L_pe},
          {"mu_pe", flagged(mu_pe)},
          {"c1", flagged(c1)},
          {"c2", flagged(c2)},
          {"alpha_x", flagged(alpha_x)},
          {"K1", flagged(K1)},
          {"c3", flagged(c3)},
          {"c4", flagged(c4)},
          {"K2", flagged(K2)},
          {"alpha_y_tilde", flagged(alpha_y_tilde)},
          {"eps_small", flagged(eps_small)},
          {"c3_tilde", flagged(c3_tilde)},
          {"T_tilde", flagged(T_tilde)},
          {"T3_star", T3_star},
          {"T5_star", T5_star},
          {"T_below_T_tilde", T_below_T_tilde},
          {"T_below_T5_star", T_below_T5_star},
          {"w_M_respected", w_M_respected},
          {"violated", violated()}};
}

std::vector<long> full_period_indices(double T) {
  const auto n = static_cast<long>(std::ceil(2.0 * std::numbers::pi / T));
  std::vector<long> ks(static_cast<std::size_t>(n) + 1);
  for (long k = 0; k <= n; ++k) ks[static_cast<std::size_t>(k)] = k;
  return ks;
}

namespace {

FlaggedConstant positive(double v) { return {v, std::isfinite(v) && v > 0.0}; }

std::vector<Vector> plan_points(const LyapunovAuditPlan& plan) {
  auto pts = grid_box(Box::cube(2, plan.half_width), plan.per_axis);
  std::erase_if(pts, [](const Vector& p) { return p.squaredNorm() == 0.0; });
  return pts;
}

std::vector<long> plan_ks(const LyapunovAuditPlan& plan, double T) {
  return plan.k_set.empty() ? full_period_indices(T) : plan.k_set;
}

// Root of T / (1 - e^{-T}) = 2 by bisection; the left side increases from 1.
double threshold_T3() {
  double lo = 1e-6, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid / -std::expm1(-mid) <= 2.0 ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

CaseStudyConstants compute_case_study_constants(const ReferenceSignal& refs, const ControllerGains& gains, double T,
                                                double T_star, double L_pe, const LyapunovAuditPlan& plan) {
  gains.validate(T);
  if (!(T_star >= T)) throw DomainError("T_star must be at least the audited T");
  if (!(L_pe > 0.0)) throw DomainError("PE window length must be positive");
  CaseStudyConstants c;
  c.T = T;
  c.T_star = T_star;
  c.w_M = refs.w_M;
  c.L_pe = L_pe;
  const double wM = refs.w_M;
  const double eps_star = gains.alpha_y + T_star;
  c.c1 = positive(1.0 - 0.5 * eps_star * wM);
  c.c2 = positive(1.0 + 0.5 * eps_star * wM);
  c.alpha_x = positive(gains.a2 - eps_star * wM * wM - 0.5 * eps_star * eps_star * wM * wM * (1.0 + gains.a2) *
                                                          (1.0 + gains.a2));
  c.mu_pe = positive(pe_infimum(refs, L_pe, T));
  c.c3 = positive(2.0 * wM * wM);
  const double eL = std::exp(-L_pe);
  c.c4 = positive(eL * c.mu_pe.value / (1.0 - eL));
  c.T3_star = threshold_T3();
  c.T5_star = c.c4.value / 4.0;
  c.alpha_y_tilde = positive(c.c4.value / 4.0);
  c.w_M_respected = refs.measured_bound(T, period_steps(refs, T)) <= wM + 1e-12;

  const auto pts = plan_points(plan);
  const auto ks = plan_ks(plan, T);
  const ExcitationTable table(refs, T, *std::max_element(ks.begin(), ks.end()) + 1, plan.tail_tol);
  const double ax = c.alpha_x.value, ay = gains.alpha_y, aty = c.alpha_y_tilde.value;
  struct Row {
    double k1 = -std::numeric_limits<double>::infinity();
    double k2 = -std::numeric_limits<double>::infinity();
    double k2_axis = -std::numeric_limits<double>::infinity();  // residual where x_e = 0
  };
  std::vector<Row> rows(ks.size());
  parallel_for(ks.size(), [&](std::size_t i) {
    const long k = ks[i];
    const double w = refs.w(k, T);
    auto& r = rows[i];
    for (const auto& x : pts) {
      const Vector xn = unicycle_F1T(k, x, refs, gains, T);
      const double n2 = x.squaredNorm();
      const double dV = (lyap_V(k + 1, xn[0], xn[1], refs, gains, T) - lyap_V(k, x[0], x[1], refs, gains, T)) / T;
      r.k1 = std::max(r.k1, (dV + ax * x[0] * x[0] + ay * w * w * x[1] * x[1]) / (T * n2));
      const double dW = (-table(k + 1) * xn[1] * xn[1] + table(k) * x[1] * x[1]) / T;
      const double resid = dW - w * w * x[1] * x[1] + aty * x[1] * x[1];
      if (x[0] != 0.0) r.k2 = std::max(r.k2, resid / (x[0] * x[0]));
      else r.k2_axis = std::max(r.k2_axis, resid);
    }
  });
  double k1 = 0.0, k2 = 0.0;
  bool axis_ok = true;
  for (const auto& r : rows) {
    k1 = std::max(k1, r.k1);
    k2 = std::max(k2, r.k2);
    axis_ok = axis_ok && r.k2_axis <= kVerdictSlack;
  }
  c.K1 = {k1, std::isfinite(k1)};
  c.K2 = {axis_ok ? k2 : std::numeric_limits<double>::infinity(), axis_ok && std::isfinite(k2)};

  const bool base_ok = c.c1.valid && c.c3.valid && c.alpha_x.valid && c.K2.valid && c.alpha_y_tilde.valid;
  const double ratio_x = k2 > 0.0 ? ax / (2.0 * k2) : std::numeric_limits<double>::infinity();
  const double es = std::min({c.c1.value / (2.0 * c.c3.value), ratio_x, gains.alpha_y});
  c.eps_small = {es, base_ok && std::isfinite(es) && es > 0.0};
  const double inner = std::min(ax / 2.0, es * aty);
  c.c3_tilde = {0.5 * inner, c.eps_small.valid && inner > 0.0};
  const double tt = k1 > 0.0 ? std::min(T_star, inner / (2.0 * k1)) : T_star;
  c.T_tilde = {tt, c.c3_tilde.valid && c.K1.valid && tt > 0.0};
  c.T_below_T_tilde = c.T_tilde.valid && T < tt;
  c.T_below_T5_star = T < c.T5_star;
  return c;
}

double lyap_U(long k, const Vector& x, const ReferenceSignal& refs, const ControllerGains& gains,
              const CaseStudyConstants& constants, double T) {
  constants.require_valid();
  return lyap_V(k, x[0], x[1], refs, gains, T) + constants.eps_small.value * lyap_W(k, x[1], refs, T);
}

LyapunovCandidate unicycle_U_candidate(const ReferenceSignal& refs, const ControllerGains& gains,
                                       const CaseStudyConstants& constants,
                                       std::shared_ptr<const ExcitationTable> table) {
  constants.require_valid();
  LyapunovCandidate U;
  const double es = constants.eps_small.value;
  U.eval = [refs, gains, es, table](double T, long k, const Vector& x) {
    const double S = std::abs(T - table->T()) == 0.0 ? (*table)(k) : excitation_weight(k, refs, T);
    return lyap_V(k, x[0], x[1], refs, gains, T) - es * S * x[1] * x[1];
  };
  U.alpha1 = ClassKFunction::power(constants.c1.value / 2.0, 2.0);
  U.alpha2 = ClassKFunction::power(constants.c2.value, 2.0);
  U.alpha3 = ClassKFunction::power(constants.c3_tilde.value, 2.0);
  U.L_mod = ClassKFunction::linear(2.0 * constants.c2.value);
  return U;
}

ParameterizedMap unicycle_zero_input_map(const ReferenceSignal& refs, const ControllerGains& gains) {
  ParameterizedMap map;
  map.dim = 2;
  map.T_max = 1.0 / gains.a1;
  map.step_fn = [refs, gains](double T, long k, const Vector& x) { return unicycle_F1T(k, x, refs, gains, T); };
  return map;
}

StabilityVerdict audit_lyapunov_chain(const ReferenceSignal& refs, const ControllerGains& gains,
                                      const CaseStudyConstants& constants, const LyapunovAuditPlan& plan) {
  constants.require_valid();
  const double T = constants.T;
  const auto pts = plan_points(plan);
  const auto ks = plan_ks(plan, T);
  auto table = std::make_shared<const ExcitationTable>(refs, T, *std::max_element(ks.begin(), ks.end()) + 1,
                                                       plan.tail_tol);
  StabilityVerdict verdict;
  for (const char* name : {"V-sandwich", "V-decrease", "W-sandwich", "W-decrease"}) verdict.check(name);

  struct Row {
    double v, v_lo, v_hi, dv, dv_bound, w, w_lo, w_hi, dw, dw_bound;
  };
  const std::size_t n = ks.size() * pts.size();
  std::vector<Row> rows(n);
  const auto& c = constants;
  parallel_for(n, [&](std::size_t idx) {
    const long k = ks[idx / pts.size()];
    const auto& x = pts[idx % pts.size()];
    const double wk = refs.w(k, T);
    const Vector xn = unicycle_F1T(k, x, refs, gains, T);
    const double n2 = x.squaredNorm(), xe2 = x[0] * x[0], ye2 = x[1] * x[1];
    auto& r = rows[idx];
    r.v = lyap_V(k, x[0], x[1], refs, gains, T);
    r.v_lo = c.c1.value * n2;
    r.v_hi = c.c2.value * n2;
    r.dv = (lyap_V(k + 1, xn[0], xn[1], refs, gains, T) - r.v) / T;
    r.dv_bound = -(c.alpha_x.value * xe2 + gains.alpha_y * wk * wk * ye2) + T * c.K1.value * n2;
    r.w = -(*table)(k)*ye2;
    r.w_lo = -c.c3.value * ye2;
    r.w_hi = -c.c4.value * ye2;
    r.dw = (-(*table)(k + 1) * xn[1] * xn[1] - r.w) / T;
    r.dw_bound = wk * wk * ye2 - c.alpha_y_tilde.value * ye2 + c.K2.value * xe2;
  });
  for (std::size_t idx = 0; idx < n; ++idx) {
    const auto& r = rows[idx];
    const long k = ks[idx / pts.size()];
    const auto& x = pts[idx % pts.size()];
    auto test = [&](const char* name, double measured, double bound) {
      verdict.check(name).record(measured, bound);
      if (measured > bound + kVerdictSlack) verdict.falsify({name, T, k, x, k, measured, bound, std::nullopt});
    };
    test("V-sandwich", r.v_lo, r.v);
    test("V-sandwich", r.v, r.v_hi);
    test("V-decrease", r.dv, r.dv_bound);
    test("W-sandwich", r.w_lo, r.w);
    test("W-sandwich", r.w, r.w_hi);
    test("W-decrease", r.dw, r.dw_bound);
  }

  AuditGrid grid;
  grid.points = pts;
  grid.k0_set = ks;
  grid.lipschitz_pairs = 256;
  const auto U = unicycle_U_candidate(refs, gains, constants, table);
  const double Delta = plan.half_width * std::numbers::sqrt2;
  const double Ts[] = {T};
  const auto u_verdict = audit_lyapunov(U, unicycle_zero_input_map(refs, gains), Delta, 0.0, Ts, grid);
  for (const auto& chk : u_verdict.checks) {
    auto renamed = chk;
    renamed.name = "U-" + chk.name;
    verdict.checks.push_back(renamed);
  }
  if (u_verdict.witness) {
    auto w = *u_verdict.witness;
    w.check = "U-" + w.check;
    verdict.falsify(w);
  }
  return verdict;
}

UnicycleUgbAudit audit_unicycle_ugb(const ReferenceSignal& refs, const ControllerGains& gains,
                                    const CaseStudyConstants& constants, double x_radius, double z_radius,
                                    std::size_t per_axis, std::size_t z_samples, std::span<const long> k_set) {
  constants.require_valid();
  const double T = constants.T;
  const auto sys = closed_loop_euler_cascade(refs, gains);
  std::vector<long> ks(k_set.begin(), k_set.end());
  if (ks.empty()) ks = periodic_k0_samples(T);
  auto table = std::make_shared<const ExcitationTable>(refs, T, *std::max_element(ks.begin(), ks.end()) + 1);
  const auto U = unicycle_U_candidate(refs, gains, constants, table);

  auto xs = grid_box(Box::cube(2, x_radius), per_axis);
  std::erase_if(xs, [&](const Vector& p) { return p.norm() > x_radius; });
  const auto zs = sample_ball(1, z_radius, z_samples);
  const Vector zero = Vector::Zero(1);

  // Smallest d with U(f(x,z)) - U(f(x,0)) <= T |z| (d U(x) + d) on the grid.
  const std::size_t n = ks.size() * xs.size();
  std::vector<double> ratios(n, 0.0);
  parallel_for(n, [&](std::size_t idx) {
    const long k = ks[idx / xs.size()];
    const auto& x = xs[idx % xs.size()];
    const double u0 = U(T, k, x);
    const double u_free = U(T, k + 1, sys.f(T, k, x, zero));
    double r = 0.0;
    for (const auto& z : zs) {
      if (z.norm() == 0.0) continue;
      const double growth = U(T, k + 1, sys.f(T, k, x, z)) - u_free;
      r = std::max(r, growth / (T * z.norm() * (u0 + 1.0)));
    }
    ratios[idx] = r;
  });
  const double d = *std::max_element(ratios.begin(), ratios.end()) * (1.0 + 1e-6) + 1e-12;

  UgbHypothesis hyp;
  hyp.phi = ClassKFunction::identity();
  hyp.gamma1_t = ClassKFunction::linear(d);
  hyp.gamma2_t = ClassKFunction::linear(d);
  hyp.c = 0.0;
  CertificateDomain domain;
  domain.x_points = xs;
  domain.z_radius = z_radius;
  domain.z_samples = z_samples;
  domain.k_set = ks;
  const double Ts[] = {T};
  return {d, build_ugb_certificate(U, sys, hyp, domain, Ts)};
}

// ---- comparison experiment -----------------------------------------------------------

ComparisonConfig ComparisonConfig::from_json(const json& j) {
  ComparisonConfig c;
  c.refs = ReferenceSignal::from_json(j.at("refs"));
  c.gains = ControllerGains::from_json(j.at("gains"));
  c.T = j.value("T", c.T);
  c.horizon_s = j.value("horizon_s", c.horizon_s);
  if (j.contains("initial_error")) {
    const auto v = j.at("initial_error").get<std::vector<double>>();
    if (v.size() != 3) throw DomainError("initial_error needs three components");
    c.initial = {v[0], v[1], v[2]};
  }
  const auto plant = j.value("plant", std::string("euler"));
  if (plant == "euler") c.plant = PlantModel::euler;
  else if (plant == "exact-proxy") c.plant = PlantModel::exact_proxy;
  else throw DomainError("plant must be 'euler' or 'exact-proxy'");
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : j.at("variants")) c.variants.push_back(correction_kind_from_string(v.get<std::string>()));
  }
  c.settle_tol = j.value("settle_tol", c.settle_tol);
  if (!(c.T > 0.0) || !(c.horizon_s > 0.0)) throw DomainError("T and horizon_s must be positive");
  c.gains.validate(c.T);
  return c;
}

void VariantRun::write_csv(std::ostream& out) const {
  out << "k,t,x_e,y_e,theta_e,v,w,vartheta\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << static_cast<long>(r[0]);
    for (std::size_t i = 1; i < r.size(); ++i) out << ',' << r[i];
    out << '\n';
  }
}

json ComparisonResult::metrics_json() const {
  json variants = json::array();
  for (const auto& run : runs) {
    const auto& m = run.metrics;
    variants.push_back({{"variant", to_string(run.variant)},
                        {"ise", m.ise},
                        {"peak_v", m.peak_v},
                        {"energy", m.energy},
                        {"settle_xy_step", m.settle_xy ? json(*m.settle_xy) : json(nullptr)},
                        {"settle_full_step", m.settle_full ? json(*m.settle_full) : json(nullptr)},
                        {"final_norm", m.final_norm}});
  }
  return {{"variants", variants}};
}

namespace {

VariantRun simulate_variant(const ComparisonConfig& cfg, CorrectionKind variant) {
  auto gains = cfg.gains;
  gains.correction = variant;
  const auto field = error_dynamics_field(cfg.refs);
  const auto law = tracking_input_law(cfg.refs, gains);
  const auto map = cfg.plant == PlantModel::euler ? euler_map(field, law) : exact_proxy_map(field, law);
  const double T = cfg.T;
  const long steps = horizon_index(cfg.horizon_s, T);
  VariantRun run;
  run.variant = variant;
  run.rows.reserve(static_cast<std::size_t>(steps) + 1);
  Vector s = cfg.initial.as_vector();
  long last_outside_xy = -1, last_outside_full = -1;
  for (long k = 0; k <= steps; ++k) {
    const auto a = tracking_controller(k, TrackingErrorState::from_vector(s), cfg.refs, gains, T);
    run.rows.push_back({static_cast<double>(k), static_cast<double>(k) * T, s[0], s[1], s[2], a.v, a.w, a.vartheta});
    const double nxy = std::hypot(s[0], s[1]);
    if (nxy > cfg.settle_tol) last_outside_xy = k;
    if (s.norm() > cfg.settle_tol) last_outside_full = k;
    if (k == steps) break;
    run.metrics.ise += T * (s[0] * s[0] + s[1] * s[1]);
    run.metrics.peak_v = std::max(run.metrics.peak_v, std::abs(a.v));
    run.metrics.energy += T * a.v * a.v;
    if (!std::isfinite(run.metrics.ise) || !std::isfinite(run.metrics.energy)) {
      throw DivergenceError("variant " + to_string(variant) + ": cost overflow at step " + std::to_string(k), k);
    }
    try {
      s = map.step(T, k, s);
    } catch (const IntegrationError& e) {
      throw DivergenceError("variant " + to_string(variant) + ": " + e.what(), k + 1);
    }
    if (!s.allFinite()) {
      throw DivergenceError("variant " + to_string(variant) + ": non-finite state at step " + std::to_string(k + 1),
                            k + 1);
    }
  }
  if (last_outside_xy < steps) run.metrics.settle_xy = last_outside_xy + 1;
  if (last_outside_full < steps) run.metrics.settle_full = last_outside_full + 1;
  run.metrics.final_norm = s.norm();
  return run;
}

}  // namespace

ComparisonResult run_comparison_experiment(const ComparisonConfig& config) {
  config.gains.validate(config.T);
  ComparisonResult result;
  result.runs.resize(config.variants.size());
  parallel_for(config.variants.size(),
               [&](std::size_t i) { result.runs[i] = simulate_variant(config, config.variants[i]); });
  return result;
}

}  // namespace sdc
