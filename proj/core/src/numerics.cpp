#include "sdcascade/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

namespace sdc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEnvelopeSlack = 1e-9;

const char* kind_name(ClassKFunction::Kind kind) {
  switch (kind) {
    case ClassKFunction::Kind::linear: return "linear";
    case ClassKFunction::Kind::power: return "power";
    case ClassKFunction::Kind::affine_capped: return "affine-capped";
    case ClassKFunction::Kind::polynomial: return "polynomial";
    case ClassKFunction::Kind::tabulated: return "tabulated";
    case ClassKFunction::Kind::custom: return "custom";
  }
  return "unknown";
}

void require_finite_nonneg(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) {
    throw DomainError(std::string(what) + " must be finite and nonnegative");
  }
}

}  // namespace

long horizon_index(double L, double T) {
  if (!(L > 0.0) || !(T > 0.0) || !std::isfinite(L) || !std::isfinite(T)) {
    throw DomainError("horizon_index: L and T must be finite and strictly positive");
  }
  auto l = static_cast<long>(std::floor(L / T));
  // floor(L/T) can be off by one when L/T rounds across an integer.
  while (static_cast<double>(l + 1) * T <= L) ++l;
  while (l > 0 && static_cast<double>(l) * T > L) --l;
  return l;
}

// ---------------------------------------------------------------------------
// ClassKFunction

ClassKFunction ClassKFunction::linear(double gain) {
  require_finite_nonneg(gain, "linear gain");
  return ClassKFunction(Kind::linear, {gain});
}

ClassKFunction ClassKFunction::power(double gain, double exponent) {
  require_finite_nonneg(gain, "power gain");
  if (!(exponent > 0.0) || !std::isfinite(exponent)) {
    throw DomainError("power exponent must be positive");
  }
  return ClassKFunction(Kind::power, {gain, exponent});
}

ClassKFunction ClassKFunction::affine_capped(double gain, double offset, double cap) {
  require_finite_nonneg(gain, "affine gain");
  require_finite_nonneg(offset, "affine offset");
  if (std::isnan(cap) || cap < offset) throw DomainError("affine cap must be >= offset");
  return ClassKFunction(Kind::affine_capped, {gain, offset, cap});
}

ClassKFunction ClassKFunction::polynomial(std::vector<double> coeffs) {
  if (coeffs.empty()) throw DomainError("polynomial needs at least one coefficient");
  for (double c : coeffs) require_finite_nonneg(c, "polynomial coefficient");
  return ClassKFunction(Kind::polynomial, std::move(coeffs));
}

ClassKFunction ClassKFunction::tabulated(std::vector<std::pair<double, double>> points) {
  if (points.size() < 2) throw DomainError("tabulated function needs at least two points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    require_finite_nonneg(points[i].first, "tabulated input");
    require_finite_nonneg(points[i].second, "tabulated output");
    if (i > 0 && (points[i].first <= points[i - 1].first || points[i].second <= points[i - 1].second)) {
      throw DomainError("tabulated points must be strictly increasing in both coordinates");
    }
  }
  ClassKFunction out(Kind::tabulated, {});
  out.table_ = std::move(points);
  return out;
}

ClassKFunction ClassKFunction::custom(std::string name, std::function<double(double)> fn) {
  if (!fn) throw DomainError("custom comparison function needs a callable");
  ClassKFunction out(Kind::custom, {});
  out.name_ = std::move(name);
  out.fn_ = std::make_shared<const std::function<double(double)>>(std::move(fn));
  return out;
}

double ClassKFunction::operator()(double s) const {
  switch (kind_) {
    case Kind::linear: return params_[0] * s;
    case Kind::power: return params_[0] * std::pow(s, params_[1]);
    case Kind::affine_capped: return std::min(params_[1] + params_[0] * s, params_[2]);
    case Kind::polynomial: {
      double acc = 0.0;
      for (auto it = params_.rbegin(); it != params_.rend(); ++it) acc = acc * s + *it;
      return acc;
    }
    case Kind::tabulated: return eval_tabulated(s);
    case Kind::custom: return (*fn_)(s);
  }
  return 0.0;
}

double ClassKFunction::eval_tabulated(double s) const {
  const auto& t = table_;
  auto seg = [&](std::size_t i) {
    const auto& [x0, y0] = t[i];
    const auto& [x1, y1] = t[i + 1];
    return y0 + (y1 - y0) * (s - x0) / (x1 - x0);
  };
  if (s <= t.front().first) return std::max(0.0, seg(0));
  if (s >= t.back().first) return seg(t.size() - 2);
  auto it = std::upper_bound(t.begin(), t.end(), s,
                             [](double v, const auto& p) { return v < p.first; });
  return seg(static_cast<std::size_t>(it - t.begin()) - 1);
}

InverseLookup ClassKFunction::inverse_tabulated(double y) const {
  const auto& t = table_;
  if (y <= t.front().second) return {t.front().first, y < t.front().second};
  if (y >= t.back().second) return {t.back().first, y > t.back().second};
  std::size_t lo = 0;
  std::size_t hi = t.size() - 1;
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (t[mid].second <= y) lo = mid; else hi = mid;
  }
  const auto& [x0, y0] = t[lo];
  const auto& [x1, y1] = t[hi];
  return {x0 + (x1 - x0) * (y - y0) / (y1 - y0), false};
}

InverseLookup ClassKFunction::inverse_bisection(double y) const {
  const auto& f = *this;
  if (y <= f(0.0)) return {0.0, y < f(0.0)};
  double hi = 1.0;
  int expansions = 0;
  while (f(hi) < y) {
    hi *= 2.0;
    if (++expansions > 1100) return {hi, true};
  }
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
    double mid = 0.5 * (lo + hi);
    if (f(mid) < y) lo = mid; else hi = mid;
  }
  return {0.5 * (lo + hi), false};
}

InverseLookup ClassKFunction::inverse(double y) const {
  switch (kind_) {
    case Kind::linear:
      if (params_[0] == 0.0) return {0.0, y != 0.0};
      return {std::max(0.0, y) / params_[0], y < 0.0};
    case Kind::power:
      if (params_[0] == 0.0) return {0.0, y != 0.0};
      return {std::pow(std::max(0.0, y) / params_[0], 1.0 / params_[1]), y < 0.0};
    case Kind::affine_capped: {
      const double gain = params_[0], offset = params_[1], cap = params_[2];
      if (y < offset) return {0.0, true};
      if (y > cap || gain == 0.0) return {gain == 0.0 ? 0.0 : (cap - offset) / gain, y != offset};
      return {(y - offset) / gain, false};
    }
    case Kind::tabulated: return inverse_tabulated(y);
    case Kind::polynomial:
    case Kind::custom: return inverse_bisection(y);
  }
  return {0.0, true};
}

json ClassKFunction::to_json() const {
  json params;
  switch (kind_) {
    case Kind::linear: params = {{"gain", params_[0]}}; break;
    case Kind::power: params = {{"gain", params_[0]}, {"exponent", params_[1]}}; break;
    case Kind::affine_capped:
      params = {{"gain", params_[0]}, {"offset", params_[1]}};
      if (std::isfinite(params_[2])) params["cap"] = params_[2];
      break;
    case Kind::polynomial: params = {{"coeffs", params_}}; break;
    case Kind::tabulated: {
      json pts = json::array();
      for (const auto& [x, y] : table_) pts.push_back({x, y});
      params = {{"points", pts}};
      break;
    }
    case Kind::custom:
      throw DomainError("custom comparison function '" + name_ + "' cannot be serialized");
  }
  return {{"kind", kind_name(kind_)}, {"params", params}};
}

ClassKFunction ClassKFunction::from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const json params = j.value("params", json::object());
  if (kind == "linear") return linear(params.at("gain").get<double>());
  if (kind == "identity") return identity();
  if (kind == "zero") return zero();
  if (kind == "power") return power(params.at("gain").get<double>(), params.at("exponent").get<double>());
  if (kind == "affine-capped") {
    return affine_capped(params.at("gain").get<double>(), params.value("offset", 0.0),
                         params.value("cap", kInf));
  }
  if (kind == "polynomial") return polynomial(params.at("coeffs").get<std::vector<double>>());
  if (kind == "tabulated") {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : params.at("points")) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return tabulated(std::move(pts));
  }
  throw DomainError("unknown comparison function kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// KLBound

struct ExpForm {
  double gain;
  double rate;
};
struct SigmaKappaForm {
  ClassKFunction sigma;
  ClassKFunction kappa;
  double shift;
};
struct ShiftedForm {
  KLBound inner;
  double c;
};
struct ComposedForm {
  KLBound b1, b2, b3;  // already shifted
  ClassKFunction gamma;
  bool global;
};

struct KLBound::Node {
  std::variant<ExpForm, SigmaKappaForm, ShiftedForm, ComposedForm> form;
};

KLBound KLBound::exponential(double gain, double rate) {
  if (!(gain >= 1.0) || !std::isfinite(gain)) throw DomainError("exp KL bound requires gain >= 1");
  if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("exp KL bound requires rate > 0");
  return KLBound(std::make_shared<const Node>(Node{ExpForm{gain, rate}}));
}

KLBound KLBound::sigma_kappa(ClassKFunction sigma, ClassKFunction kappa, double shift) {
  if (!(shift >= 0.0)) throw DomainError("sigma-kappa shift must be nonnegative");
  return KLBound(std::make_shared<const Node>(Node{SigmaKappaForm{std::move(sigma), std::move(kappa), shift}}));
}

double KLBound::operator()(double s, double t) const {
  return std::visit(
      [&](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ExpForm>) {
          return f.gain * s * std::exp(-f.rate * t);
        } else if constexpr (std::is_same_v<F, SigmaKappaForm>) {
          return f.sigma(f.kappa(s) * std::exp(f.shift - t));
        } else if constexpr (std::is_same_v<F, ShiftedForm>) {
          return f.inner(s, std::max(0.0, t - f.c));
        } else {
          const double h = 0.5 * t;
          const double inner_scale = f.global ? 1.0 : 2.0;
          const double outer_scale = f.global ? 1.0 : 4.0;
          const double z_scale = f.global ? 1.0 : 2.0;
          const double inner = inner_scale * f.b1(s, h) + inner_scale * f.gamma(f.b2(s, 0.0));
          return outer_scale * f.b1(inner, h) + outer_scale * f.gamma(f.b2(s, h)) + z_scale * f.b3(s, t);
        }
      },
      node_->form);
}

KLBound::Form KLBound::form() const {
  switch (node_->form.index()) {
    case 0: return Form::exp;
    case 1: return Form::sigma_kappa;
    case 2: return Form::shifted;
    default: return Form::composed;
  }
}

double KLBound::gain() const {
  if (const auto* e = std::get_if<ExpForm>(&node_->form)) return e->gain;
  throw DomainError("gain() is defined for exp-form KL bounds only");
}

double KLBound::rate() const {
  if (const auto* e = std::get_if<ExpForm>(&node_->form)) return e->rate;
  throw DomainError("rate() is defined for exp-form KL bounds only");
}

json KLBound::to_json() const {
  return std::visit(
      [](const auto& f) -> json {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ExpForm>) {
          return {{"kind", "exp"}, {"params", {{"gain", f.gain}, {"rate", f.rate}}}};
        } else if constexpr (std::is_same_v<F, SigmaKappaForm>) {
          return {{"kind", "sigma-kappa"},
                  {"params", {{"sigma", f.sigma.to_json()}, {"kappa", f.kappa.to_json()}, {"shift", f.shift}}}};
        } else if constexpr (std::is_same_v<F, ShiftedForm>) {
          return {{"kind", "shifted"}, {"params", {{"inner", f.inner.to_json()}, {"c", f.c}}}};
        } else {
          return {{"kind", "composed"},
                  {"params",
                   {{"beta1", f.b1.to_json()},
                    {"beta2", f.b2.to_json()},
                    {"beta3", f.b3.to_json()},
                    {"gamma", f.gamma.to_json()},
                    {"global", f.global}}}};
        }
      },
      node_->form);
}

KLBound KLBound::from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const json& p = j.at("params");
  if (kind == "exp") return exponential(p.at("gain").get<double>(), p.at("rate").get<double>());
  if (kind == "sigma-kappa") {
    return sigma_kappa(ClassKFunction::from_json(p.at("sigma")), ClassKFunction::from_json(p.at("kappa")),
                       p.value("shift", 0.0));
  }
  if (kind == "shifted") {
    return KLBound(std::make_shared<const Node>(Node{ShiftedForm{from_json(p.at("inner")), p.at("c").get<double>()}}));
  }
  if (kind == "composed") {
    return KLBound(std::make_shared<const Node>(Node{ComposedForm{
        from_json(p.at("beta1")), from_json(p.at("beta2")), from_json(p.at("beta3")),
        ClassKFunction::from_json(p.at("gamma")), p.value("global", false)}}));
  }
  throw DomainError("unknown KL bound kind '" + kind + "'");
}

KLBound kl_shift(const KLBound& beta, double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("kl_shift: c must be finite and nonnegative");
  if (c == 0.0) return beta;
  const auto& form = beta.node_->form;
  if (const auto* e = std::get_if<ExpForm>(&form)) {
    return KLBound::exponential(e->gain * std::exp(e->rate * c), e->rate);
  }
  if (const auto* sk = std::get_if<SigmaKappaForm>(&form)) {
    return KLBound::sigma_kappa(sk->sigma, sk->kappa, sk->shift + c);
  }
  if (const auto* sh = std::get_if<ShiftedForm>(&form)) {
    return KLBound(std::make_shared<const KLBound::Node>(KLBound::Node{ShiftedForm{sh->inner, sh->c + c}}));
  }
  return KLBound(std::make_shared<const KLBound::Node>(KLBound::Node{ShiftedForm{beta, c}}));
}

KLBound kl_compose(const KLBound& beta1, const KLBound& beta2, const KLBound& beta3,
                   const ClassKFunction& gamma, double c, bool global) {
  return KLBound(std::make_shared<const KLBound::Node>(KLBound::Node{
      ComposedForm{kl_shift(beta1, c), kl_shift(beta2, c), kl_shift(beta3, c), gamma, global}}));
}

// ---------------------------------------------------------------------------
// Envelope fitting

std::vector<double> EnvelopeGrid::gains() const {
  std::vector<double> out;
  for (double m = gain_min; m <= gain_max * (1.0 + 1e-12); m *= gain_ratio) out.push_back(m);
  return out;
}

std::vector<double> EnvelopeGrid::rates() const {
  std::vector<double> out(rate_points);
  const double a = std::log10(rate_min), b = std::log10(rate_max);
  for (std::size_t i = 0; i < rate_points; ++i) {
    out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(rate_points - 1));
  }
  return out;
}

namespace {

std::optional<EnvelopeWitness> first_violation(std::span<const EnvelopeSample> trajs, double nu, double gain,
                                               double rate) {
  for (std::size_t j = 0; j < trajs.size(); ++j) {
    const auto& tr = trajs[j];
    for (std::size_t i = 0; i < tr.norms.size(); ++i) {
      const double bound =
          std::max(gain * tr.initial_norm * std::exp(-rate * static_cast<double>(i) * tr.T), nu);
      if (tr.norms[i] > bound + kEnvelopeSlack) return EnvelopeWitness{j, i, tr.norms[i], bound};
    }
  }
  return std::nullopt;
}

}  // namespace

EnvelopeFit fit_kl_envelope(std::span<const EnvelopeSample> trajectories, double nu, const EnvelopeGrid& grid) {
  if (trajectories.empty()) throw DomainError("fit_kl_envelope: empty trajectory set");
  const auto gains = grid.gains();
  const auto rates = grid.rates();
  for (double m : gains) {
    if (first_violation(trajectories, nu, m, rates.front())) continue;
    // Feasibility is monotone in the rate; find the largest feasible index.
    std::size_t lo = 0, hi = rates.size();
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (first_violation(trajectories, nu, m, rates[mid])) hi = mid; else lo = mid;
    }
    EnvelopeFit fit;
    fit.gain = m;
    fit.rate = rates[lo];
    fit.bound = KLBound::exponential(m, rates[lo]);
    return fit;
  }
  EnvelopeFit fit;
  fit.gain = gains.back();
  fit.rate = rates.front();
  fit.witness = first_violation(trajectories, nu, fit.gain, fit.rate);
  return fit;
}

// ---------------------------------------------------------------------------

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) {
    if (std::abs(delta) > 15.0 * tol) throw NumericError("adaptive_simpson: maximum depth reached");
    return left + right + delta / 15.0;
  }
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double out = simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
  if (!std::isfinite(out)) throw NumericError("adaptive_simpson: non-finite integral");
  return out;
}

}  // namespace sdc
