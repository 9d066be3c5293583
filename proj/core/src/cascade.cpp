#include "sdcascade/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sdc {

InputSequence InputSequence::make(long start, std::vector<Vector> values) {
  InputSequence seq;
  seq.start = start;
  seq.values = std::move(values);
  for (const auto& v : seq.values) seq.sup_norm = std::max(seq.sup_norm, v.norm());
  return seq;
}

InputSequence InputSequence::zeros(long start, std::size_t length, int dim) {
  return make(start, std::vector<Vector>(length, Vector::Zero(dim)));
}

const Vector& InputSequence::at(long k) const {
  if (k < start || k >= start + static_cast<long>(values.size())) {
    throw DomainError("input sequence does not cover index " + std::to_string(k));
  }
  return values[static_cast<std::size_t>(k - start)];
}

bool InputSequence::covers(long k0, std::size_t steps) const {
  return k0 >= start && k0 + static_cast<long>(steps) <= start + static_cast<long>(values.size());
}

void Trajectory::push(Vector state) {
  norms.push_back(state.norm());
  states.push_back(std::move(state));
}

EnvelopeSample Trajectory::envelope() const {
  if (states.empty()) throw DomainError("empty trajectory");
  return EnvelopeSample{T, norms.front(), norms};
}

void Trajectory::write_csv(std::ostream& out, const std::vector<std::string>& names) const {
  out << "k,t";
  const auto dim = states.empty() ? 0 : states.front().size();
  for (Eigen::Index j = 0; j < dim; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    out << ',' << (uj < names.size() ? names[uj] : "x" + std::to_string(j));
  }
  out << ",norm\n";
  out.precision(17);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const long k = k0 + static_cast<long>(i);
    out << k << ',' << static_cast<double>(k) * T;
    for (Eigen::Index j = 0; j < dim; ++j) out << ',' << states[i][j];
    out << ',' << norms[i] << '\n';
  }
}

namespace {

void check_finite(const Vector& v, long k, const char* which) {
  if (!v.allFinite()) {
    throw DivergenceError(std::string("non-finite ") + which + " state at step " + std::to_string(k), k);
  }
}

void check_period(const CascadeSystem& sys, double T) {
  if (!(T > 0.0) || !(T < sys.T_max)) throw DomainError("sampling period outside (0, T_max)");
}

}  // namespace

CascadeTrajectory simulate_cascade(const CascadeSystem& sys, double T, long k0, const Vector& x0, const Vector& z0,
                                   std::size_t steps) {
  check_period(sys, T);
  if (x0.size() != sys.dim_x || z0.size() != sys.dim_z) throw DomainError("simulate_cascade: dimension mismatch");
  CascadeTrajectory out{{T, k0, {}, {}}, {T, k0, {}, {}}};
  out.x.states.reserve(steps + 1);
  out.z.states.reserve(steps + 1);
  out.x.push(x0);
  out.z.push(z0);
  for (std::size_t i = 0; i < steps; ++i) {
    const long k = k0 + static_cast<long>(i);
    const Vector& x = out.x.states.back();
    const Vector& z = out.z.states.back();
    Vector xn = sys.f(T, k, x, z);
    Vector zn = sys.g(T, k, z);
    check_finite(xn, k + 1, "x");
    check_finite(zn, k + 1, "z");
    out.x.push(std::move(xn));
    out.z.push(std::move(zn));
  }
  return out;
}

Trajectory simulate_driven(const CascadeSystem& sys, double T, long k0, const Vector& x0, const InputSequence& input,
                           std::optional<std::size_t> steps) {
  check_period(sys, T);
  if (x0.size() != sys.dim_x) throw DomainError("simulate_driven: dimension mismatch");
  if (k0 < input.start) throw DomainError("simulate_driven: input starts after k0");
  const std::size_t available = input.values.size() - std::min<std::size_t>(input.values.size(),
                                                                             static_cast<std::size_t>(k0 - input.start));
  const std::size_t n = steps.value_or(available);
  if (!input.covers(k0, n)) throw DomainError("simulate_driven: input shorter than the horizon");
  Trajectory tr{T, k0, {}, {}};
  tr.states.reserve(n + 1);
  tr.push(x0);
  for (std::size_t i = 0; i < n; ++i) {
    const long k = k0 + static_cast<long>(i);
    Vector xn = sys.f(T, k, tr.states.back(), input.at(k));
    check_finite(xn, k + 1, "x");
    tr.push(std::move(xn));
  }
  return tr;
}

ParameterizedMap as_parameterized_map(const CascadeSystem& sys) {
  ParameterizedMap map;
  map.dim = sys.dim_x + sys.dim_z;
  map.T_max = sys.T_max;
  map.label = MapLabel::custom;
  map.step_fn = [sys](double T, long k, const Vector& xi) -> Vector {
    const Vector x = xi.head(sys.dim_x);
    const Vector z = xi.tail(sys.dim_z);
    Vector out(sys.dim_x + sys.dim_z);
    out << sys.f(T, k, x, z), sys.g(T, k, z);
    return out;
  };
  return map;
}

ParameterizedMap zero_input_map(const CascadeSystem& sys) {
  ParameterizedMap map;
  map.dim = sys.dim_x;
  map.T_max = sys.T_max;
  map.step_fn = [sys](double T, long k, const Vector& x) -> Vector {
    return sys.f(T, k, x, Vector::Zero(sys.dim_z));
  };
  return map;
}

ParameterizedMap driving_map(const CascadeSystem& sys) {
  ParameterizedMap map;
  map.dim = sys.dim_z;
  map.T_max = sys.T_max;
  map.step_fn = [sys](double T, long k, const Vector& z) -> Vector { return sys.g(T, k, z); };
  return map;
}

std::vector<long> periodic_k0_samples(double T) {
  const auto P = std::max<long>(1, static_cast<long>(std::floor(2.0 * std::numbers::pi / T)));
  std::vector<long> ks{0, 1, P / 2, P - 1};
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

StabilityVerdict check_interconnection_bound(const CascadeSystem& sys, const ClassKFunction& gamma1,
                                             const ClassKFunction& gamma2, const ClassKFunction& gamma3,
                                             const AuditDomain& domain, std::span<const double> T_list) {
  const auto xs = sample_ball(sys.dim_x, domain.x_radius, domain.x_samples);
  const auto zs = sample_ball(sys.dim_z, domain.z_radius, domain.z_samples);
  StabilityVerdict verdict;
  verdict.check("growth");
  verdict.check("interconnection");
  for (double T : T_list) {
    const auto ks = domain.k_set.empty() ? periodic_k0_samples(T) : domain.k_set;
    const Vector zero_z = Vector::Zero(sys.dim_z);
    struct Row {
      double growth, growth_bound, gap, gap_bound;
    };
    const std::size_t n = ks.size() * xs.size() * zs.size();
    std::vector<Row> rows(n);
    parallel_for(n, [&](std::size_t idx) {
      const auto& z = zs[idx % zs.size()];
      const auto& x = xs[(idx / zs.size()) % xs.size()];
      const long k = ks[idx / (zs.size() * xs.size())];
      const Vector fz = sys.f(T, k, x, z);
      const Vector f0 = sys.f(T, k, x, zero_z);
      const double xi = std::sqrt(x.squaredNorm() + z.squaredNorm());
      rows[idx] = {fz.norm(), gamma1(xi), (fz - f0).norm(), T * gamma2(x.norm()) * gamma3(z.norm())};
    });
    for (std::size_t idx = 0; idx < n; ++idx) {
      const auto& r = rows[idx];
      verdict.check("growth").record(r.growth, r.growth_bound);
      verdict.check("interconnection").record(r.gap, r.gap_bound);
      const bool growth_bad = r.growth > r.growth_bound + kVerdictSlack;
      const bool gap_bad = r.gap > r.gap_bound + kVerdictSlack;
      if (growth_bad || gap_bad) {
        const auto& z = zs[idx % zs.size()];
        const auto& x = xs[(idx / zs.size()) % xs.size()];
        const long k = ks[idx / (zs.size() * xs.size())];
        verdict.falsify(Witness{growth_bad ? "growth" : "interconnection", T, k, x, k,
                                growth_bad ? r.growth : r.gap, growth_bad ? r.growth_bound : r.gap_bound, z});
      }
    }
  }
  return verdict;
}

UscConstants estimate_usc_constants(const CascadeSystem& sys, double delta_x, double delta_z,
                                    std::span<const double> T_list, std::size_t samples,
                                    std::span<const long> k_set) {
  if (!(delta_x > 0.0) || !(delta_z > 0.0)) throw DomainError("estimate_usc_constants: radii must be positive");
  if (T_list.empty() || samples < 2) throw DomainError("estimate_usc_constants: empty sample plan");
  const auto xs = sample_ball(sys.dim_x, delta_x, samples);
  const auto zs = sample_ball(sys.dim_z, delta_z, samples);
  UscConstants out;
  auto& state_check = out.verdict.check("state-lipschitz");
  auto& input_check = out.verdict.check("input-lipschitz");
  std::vector<double> input_excess;  // max |df_z| / |dz| per T, for the T-scaling test
  for (double T : T_list) {
    const auto ks = k_set.empty() ? periodic_k0_samples(T) : std::vector<long>(k_set.begin(), k_set.end());
    const std::size_t n = ks.size() * samples;
    std::vector<std::pair<double, double>> ratios(n);
    parallel_for(n, [&](std::size_t idx) {
      const std::size_t i = idx % samples;
      const long k = ks[idx / samples];
      const std::size_t j = (i + samples / 2 + 1) % samples;
      const auto& x1 = xs[i];
      const auto& x2 = xs[j];
      const auto& z1 = zs[i];
      const auto& z2 = zs[j];
      double rs = 0.0, ri = 0.0;
      const double dx = (x1 - x2).norm(), dz = (z1 - z2).norm();
      if (dx > 0.0) rs = (sys.f(T, k, x1, z1) - sys.f(T, k, x2, z1)).norm() / dx;
      if (dz > 0.0) ri = (sys.f(T, k, x1, z1) - sys.f(T, k, x1, z2)).norm() / dz;
      ratios[idx] = {rs, ri};
    });
    double worst_input = 0.0;
    for (const auto& [rs, ri] : ratios) {
      out.K_state = std::max(out.K_state, std::max(0.0, rs - 1.0) / T);
      out.K_input = std::max(out.K_input, ri / T);
      worst_input = std::max(worst_input, ri);
    }
    input_excess.push_back(worst_input);
  }
  out.K = std::max(out.K_state, out.K_input);
  // Second pass: record margins against the final K.
  for (double T : T_list) {
    const auto ks = k_set.empty() ? periodic_k0_samples(T) : std::vector<long>(k_set.begin(), k_set.end());
    for (long k : ks) {
      for (std::size_t i = 0; i < samples; ++i) {
        const std::size_t j = (i + samples / 2 + 1) % samples;
        const double dx = (xs[i] - xs[j]).norm(), dz = (zs[i] - zs[j]).norm();
        state_check.record((sys.f(T, k, xs[i], zs[i]) - sys.f(T, k, xs[j], zs[i])).norm(), (1.0 + out.K * T) * dx);
        input_check.record((sys.f(T, k, xs[i], zs[i]) - sys.f(T, k, xs[i], zs[j])).norm(), out.K * T * dz);
      }
    }
  }
  // The input ratio must vanish with T; otherwise no finite K exists.
  if (T_list.size() >= 2) {
    std::vector<std::size_t> order(T_list.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return T_list[a] > T_list[b]; });
    const double big = input_excess[order.front()], small = input_excess[order.back()];
    const double t_ratio = T_list[order.back()] / T_list[order.front()];
    if (small > 1e-9 && small > big * std::sqrt(t_ratio)) {
      out.bounded = false;
      out.verdict.outcome = Outcome::falsified;
      out.verdict.note = "input Lipschitz ratio does not scale with T";
    }
  }
  return out;
}

namespace {

void probe_inputs(int dim, double mu, std::size_t horizon, std::size_t random_inputs, Rng& rng,
                  std::vector<std::vector<Vector>>& out) {
  out.clear();
  for (int j = 0; j < dim; ++j) {
    Vector e = Vector::Zero(dim);
    e[j] = mu;
    out.emplace_back(horizon, e);
    out.emplace_back(horizon, -e);
  }
  for (std::size_t r = 0; r < random_inputs; ++r) {
    std::vector<Vector> seq;
    seq.reserve(horizon);
    const std::size_t hold = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(std::max<std::size_t>(1, horizon / 4)));
    Vector current(dim);
    for (std::size_t i = 0; i < horizon; ++i) {
      if (i % hold == 0) {
        for (int j = 0; j < dim; ++j) current[j] = rng.uniform(-1.0, 1.0);
        if (current.norm() > 0.0) current *= mu / current.norm();
      }
      seq.push_back(current);
    }
    out.push_back(std::move(seq));
  }
}

}  // namespace

UscProbeResult usc_probe(const CascadeSystem& sys, const UscProbeConfig& cfg) {
  if (!(cfg.eta > 0.0) || !(cfg.eta < cfg.delta) || !(cfg.epsilon > 0.0) || !(cfg.L > 0.0)) {
    throw DomainError("usc_probe: need 0 < eta < delta, epsilon > 0, L > 0");
  }
  UscProbeResult res;
  Rng rng(cfg.seed);
  const auto x0s = sample_ball(sys.dim_x, cfg.eta, cfg.initial_samples);
  bool prefix_ok = true;
  for (double mu : cfg.mu_grid) {
    bool ok = true;
    double worst = 0.0;
    std::size_t tested = 0;
    for (double T : cfg.T_list) {
      const auto horizon = static_cast<std::size_t>(horizon_index(cfg.L, T));
      const auto k0s = cfg.k0_set.empty() ? periodic_k0_samples(T) : cfg.k0_set;
      std::vector<std::vector<Vector>> inputs;
      probe_inputs(sys.dim_z, mu, horizon, cfg.random_inputs, rng, inputs);
      tested += inputs.size();
      const std::size_t n = k0s.size() * x0s.size() * inputs.size();
      std::vector<double> dev(n, 0.0);
      parallel_for(n, [&](std::size_t idx) {
        const auto& w = inputs[idx % inputs.size()];
        const auto& x0 = x0s[(idx / inputs.size()) % x0s.size()];
        const long k0 = k0s[idx / (inputs.size() * x0s.size())];
        const auto driven = simulate_driven(sys, T, k0, x0, InputSequence::make(k0, w), horizon);
        const auto free = simulate_driven(sys, T, k0, x0, InputSequence::zeros(k0, horizon, sys.dim_z), horizon);
        double d = 0.0;
        for (std::size_t i = 0; i < driven.size(); ++i) d = std::max(d, (driven.states[i] - free.states[i]).norm());
        dev[idx] = d;
      });
      for (double d : dev) worst = std::max(worst, d);
    }
    ok = worst <= cfg.epsilon + kVerdictSlack;
    res.passes.push_back(ok);
    res.max_deviation.push_back(worst);
    res.inputs_tested = tested;
    prefix_ok = prefix_ok && ok;
    if (prefix_ok) res.largest_mu = mu;
  }
  return res;
}

}  // namespace sdc
