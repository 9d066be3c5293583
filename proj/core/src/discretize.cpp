#include "sdcascade/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/numeric/odeint.hpp>

namespace sdc {

namespace {

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkResult {
  Vector kronrod;
  double error;
};

GkResult gk15(const std::function<Vector(double)>& g, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const Vector fc = g(c);
  Vector kr = kWgk[7] * fc;
  Vector ga = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const Vector f1 = g(c - h * kXgk[j]);
    const Vector f2 = g(c + h * kXgk[j]);
    kr += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) ga += kWg[j / 2] * (f1 + f2);
  }
  return {h * kr, h * (kr - ga).norm()};
}

Vector adaptive_gk(const std::function<Vector(double)>& g, double a, double b, double tol, int depth) {
  auto r = gk15(g, a, b);
  if (r.error <= tol * std::max(1.0, r.kronrod.norm())) return r.kronrod;
  if (depth <= 0) {
    throw NumericError("modified Euler quadrature did not converge on [" + std::to_string(a) + ", " +
                       std::to_string(b) + "]");
  }
  const double m = 0.5 * (a + b);
  return adaptive_gk(g, a, m, 0.5 * tol, depth - 1) + adaptive_gk(g, m, b, 0.5 * tol, depth - 1);
}

}  // namespace

InputLaw InputLaw::held(Vector u) {
  InputLaw out;
  out.dim_ = static_cast<int>(u.size());
  out.law_ = [u = std::move(u)](double, long, const Vector&) { return u; };
  return out;
}

InputLaw InputLaw::feedback(int dim_u, Feedback law) {
  if (!law) throw DomainError("InputLaw::feedback needs a callable");
  InputLaw out;
  out.dim_ = dim_u;
  out.law_ = std::move(law);
  return out;
}

Vector InputLaw::operator()(double T, long k, const Vector& x) const { return law_(T, k, x); }

std::string to_string(MapLabel label) {
  switch (label) {
    case MapLabel::euler: return "euler";
    case MapLabel::modified_euler: return "modified-euler";
    case MapLabel::exact_proxy: return "exact-proxy";
    case MapLabel::custom: return "custom";
  }
  return "custom";
}

Vector ParameterizedMap::step(double T, long k, const Vector& x) const {
  if (!(T > 0.0) || !(T < T_max)) {
    throw DomainError("map '" + to_string(label) + "' queried outside (0, T_max) at T=" + std::to_string(T));
  }
  if (k < 0) throw DomainError("step index must be nonnegative");
  return step_fn(T, k, x);
}

ParameterizedMap euler_map(const VectorField& f, const InputLaw& input) {
  ParameterizedMap map;
  map.dim = f.dim_x;
  map.label = MapLabel::euler;
  map.step_fn = [f, input](double T, long k, const Vector& x) -> Vector {
    const double t = static_cast<double>(k) * T;
    return x + T * f(t, x, input(T, k, x));
  };
  return map;
}

ParameterizedMap modified_euler_map(const VectorField& f, const InputLaw& input, double quad_tol) {
  ParameterizedMap map;
  map.dim = f.dim_x;
  map.label = MapLabel::modified_euler;
  map.step_fn = [f, input, quad_tol](double T, long k, const Vector& x) -> Vector {
    const Vector u = input(T, k, x);
    const double t0 = static_cast<double>(k) * T;
    auto g = [&](double tau) { return f(tau, x, u); };
    return x + adaptive_gk(g, t0, t0 + T, quad_tol, 30);
  };
  return map;
}

ParameterizedMap exact_proxy_map(const VectorField& f, const InputLaw& input, double tol) {
  if (!(tol > 0.0)) throw DomainError("exact_proxy_map: tol must be positive");
  ParameterizedMap map;
  map.dim = f.dim_x;
  map.label = MapLabel::exact_proxy;
  map.step_fn = [f, input, tol](double T, long k, const Vector& x) -> Vector {
    namespace odeint = boost::numeric::odeint;
    using State = std::vector<double>;
    const Vector u = input(T, k, x);
    const double t0 = static_cast<double>(k) * T;
    const auto n = static_cast<Eigen::Index>(x.size());
    auto rhs = [&](const State& s, State& ds, double tau) {
      const Vector dx = f(t0 + tau, Eigen::Map<const Vector>(s.data(), n), u);
      std::copy(dx.data(), dx.data() + n, ds.begin());
    };
    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(tol, tol);
    State s(x.data(), x.data() + n);
    double tau = 0.0;
    double dt = T;
    const double dt_min = 1e-14 * T;
    int attempts = 0;
    while (tau < T * (1.0 - 1e-14)) {
      dt = std::min(dt, T - tau);
      if (stepper.try_step(rhs, s, tau, dt) == odeint::fail) {
        if (dt < dt_min || ++attempts > 100000) {
          throw IntegrationError("exact proxy: step size underflow at t=" + std::to_string(t0 + tau), t0 + tau);
        }
        continue;
      }
      if (!std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); })) {
        throw IntegrationError("exact proxy: non-finite state at t=" + std::to_string(t0 + tau), t0 + tau);
      }
    }
    return Eigen::Map<const Vector>(s.data(), n);
  };
  return map;
}

std::vector<long> default_index_set(double T) {
  const auto last = static_cast<long>(std::floor(2.0 * std::numbers::pi / T));
  std::vector<long> out(static_cast<std::size_t>(last + 1));
  for (long k = 0; k <= last; ++k) out[static_cast<std::size_t>(k)] = k;
  return out;
}

std::optional<double> loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::nullopt;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

namespace {

std::vector<double> sorted_descending(std::span<const double> T_list) {
  std::vector<double> Ts(T_list.begin(), T_list.end());
  std::sort(Ts.begin(), Ts.end(), std::greater<>());
  Ts.erase(std::unique(Ts.begin(), Ts.end()), Ts.end());
  if (Ts.empty()) throw DomainError("empty list of sampling periods");
  for (double T : Ts) {
    if (!(T > 0.0)) throw DomainError("sampling periods must be positive");
  }
  return Ts;
}

// Index drawn from the k set using an extra Halton coordinate so (k, x)
// jointly cover the product set.
long pick_index(std::span<const long> k_set, const std::vector<long>& fallback, std::size_t i, int dim) {
  const auto& ks = k_set.empty() ? std::span<const long>(fallback) : k_set;
  const auto idx = static_cast<std::size_t>(halton(i + 1, dim) * static_cast<double>(ks.size()));
  return ks[std::min(idx, ks.size() - 1)];
}

}  // namespace

ConsistencyReport consistency_order(const ParameterizedMap& ref, const ParameterizedMap& apx, const Box& domain,
                                    std::span<const long> k_set, std::span<const double> T_list,
                                    const SupSampling& sampling, std::size_t lipschitz_pairs) {
  if (ref.dim != apx.dim || ref.dim != domain.dim()) throw DomainError("consistency_order: dimension mismatch");
  if (sampling.samples == 0) throw DomainError("consistency_order: empty domain sample");
  ConsistencyReport report;
  report.T_samples = sorted_descending(T_list);
  const auto points = sample_box(domain, sampling.samples);
  for (double T : report.T_samples) {
    const auto fallback = k_set.empty() ? default_index_set(T) : std::vector<long>{};
    std::vector<double> gaps(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
      const long k = pick_index(k_set, fallback, i, domain.dim());
      gaps[i] = (ref.step(T, k, points[i]) - apx.step(T, k, points[i])).norm();
    });
    report.max_errors.push_back(*std::max_element(gaps.begin(), gaps.end()));
  }
  report.slope = loglog_slope(report.T_samples, report.max_errors);
  if (lipschitz_pairs > 0) {
    const auto est = lipschitz_growth_estimate(apx, domain, k_set, T_list, lipschitz_pairs);
    if (est.bounded) report.K_est = est.K;
  }
  return report;
}

void ConsistencyReport::write_csv(std::ostream& out) const {
  out << "T,max_error,error_over_T\n";
  out.precision(17);
  for (std::size_t i = 0; i < T_samples.size(); ++i) {
    out << T_samples[i] << ',' << max_errors[i] << ',' << max_errors[i] / T_samples[i] << '\n';
  }
}

json ConsistencyReport::summary() const {
  json j;
  j["T"] = T_samples;
  j["max_error"] = max_errors;
  j["slope"] = slope ? json(*slope) : json(nullptr);
  j["K"] = K_est ? json(*K_est) : json(nullptr);
  return j;
}

LipschitzEstimate lipschitz_growth_estimate(const ParameterizedMap& F, const Box& domain,
                                            std::span<const long> k_set, std::span<const double> T_list,
                                            std::size_t pair_samples) {
  if (pair_samples < 2) throw DomainError("lipschitz_growth_estimate: need at least two sample pairs");
  if (F.dim != domain.dim()) throw DomainError("lipschitz_growth_estimate: dimension mismatch");
  const int d = domain.dim();
  const auto base = sample_box(domain, pair_samples);
  const Vector width = domain.upper - domain.lower;
  // Even pairs couple distant points; odd pairs probe a local perturbation.
  std::vector<std::pair<Vector, Vector>> pairs;
  pairs.reserve(pair_samples);
  for (std::size_t i = 0; i < pair_samples; ++i) {
    const Vector& x1 = base[i];
    Vector x2;
    if (i % 2 == 0) {
      x2 = base[(i + pair_samples / 2) % pair_samples];
    } else {
      Vector dir(d);
      for (int j = 0; j < d; ++j) dir[j] = 2.0 * halton(i + 7, j) - 1.0;
      if (dir.norm() == 0.0) dir.setOnes();
      x2 = x1 + 1e-3 * dir.normalized().cwiseProduct(width);
    }
    if ((x1 - x2).norm() == 0.0) x2 = x1 + 1e-3 * width;
    pairs.emplace_back(x1, std::move(x2));
  }

  LipschitzEstimate est;
  est.T_samples = sorted_descending(T_list);
  for (double T : est.T_samples) {
    const auto fallback = k_set.empty() ? default_index_set(T) : std::vector<long>{};
    std::vector<double> ratios(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
      const long k = pick_index(k_set, fallback, i, d);
      const auto& [x1, x2] = pairs[i];
      ratios[i] = (F.step(T, k, x1) - F.step(T, k, x2)).norm() / (x1 - x2).norm();
    });
    const double excess = *std::max_element(ratios.begin(), ratios.end()) - 1.0;
    est.excess.push_back(excess);
    est.K = std::max(est.K, std::max(0.0, excess) / T);
  }
  if (est.T_samples.size() >= 2) {
    const double e_big = est.excess.front(), e_small = est.excess.back();
    const double t_ratio = est.T_samples.back() / est.T_samples.front();
    if (e_small > 1e-9 && e_small > std::max(e_big, 0.0) * std::sqrt(t_ratio)) {
      est.bounded = false;
      est.diagnostic = "excess ratio " + std::to_string(e_small) + " at T=" + std::to_string(est.T_samples.back()) +
                       " does not shrink with T";
    }
  }
  return est;
}

}  // namespace sdc
