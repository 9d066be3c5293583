#include "sdcascade/stability.hpp"

#include <algorithm>
#include <cmath>

namespace sdc {

namespace {

std::vector<Vector> grid_points(const AuditGrid& grid, int dim, double radius) {
  if (!grid.points.empty()) return grid.points;
  return sample_ball(dim, radius, grid.samples);
}

std::vector<long> grid_k0(const AuditGrid& grid, double T) {
  return grid.k0_set.empty() ? periodic_k0_samples(T) : grid.k0_set;
}

// Outcome of one simulated trajectory against a pointwise-in-time bound.
struct TrajectoryCheck {
  double worst_slack = std::numeric_limits<double>::infinity();
  double worst_measured = 0.0;
  double worst_bound = 0.0;
  std::optional<long> first_violation;  // absolute step index
  double violation_measured = 0.0;
  double violation_bound = 0.0;
};

using BoundFn = std::function<double(double initial_norm, double elapsed)>;

StabilityVerdict audit_trajectories(const ParameterizedMap& F, const std::string& check_name, double Delta,
                                    std::span<const double> T_list, const AuditGrid& grid, double horizon,
                                    const BoundFn& bound) {
  if (!(horizon > 0.0)) throw DomainError("trajectory audit: horizon must be positive");
  const auto pts = grid_points(grid, F.dim, Delta);
  StabilityVerdict verdict;
  auto& summary = verdict.check(check_name);
  std::size_t sample_id = 0;
  for (double T : T_list) {
    const auto ks = grid_k0(grid, T);
    const auto steps = horizon_index(horizon, T);
    const std::size_t n = ks.size() * pts.size();
    std::vector<TrajectoryCheck> results(n);
    parallel_for(n, [&](std::size_t idx) {
      const long k0 = ks[idx / pts.size()];
      Vector y = pts[idx % pts.size()];
      const double y0 = y.norm();
      auto& r = results[idx];
      for (long i = 0; i <= steps; ++i) {
        if (i > 0) {
          y = F.step(T, k0 + i - 1, y);
          if (!y.allFinite()) {
            r.first_violation = k0 + i;
            r.violation_measured = std::numeric_limits<double>::infinity();
            r.violation_bound = bound(y0, static_cast<double>(i) * T);
            r.worst_slack = -std::numeric_limits<double>::infinity();
            return;
          }
        }
        const double measured = y.norm();
        const double b = bound(y0, static_cast<double>(i) * T);
        if (b - measured < r.worst_slack) {
          r.worst_slack = b - measured;
          r.worst_measured = measured;
          r.worst_bound = b;
        }
        if (measured > b + kVerdictSlack && !r.first_violation) {
          r.first_violation = k0 + i;
          r.violation_measured = measured;
          r.violation_bound = b;
        }
      }
    });
    for (std::size_t idx = 0; idx < n; ++idx, ++sample_id) {
      const auto& r = results[idx];
      const auto& y0 = pts[idx % pts.size()];
      if (std::isfinite(r.worst_slack)) summary.record(r.worst_measured, r.worst_bound);
      else summary.record(std::numeric_limits<double>::infinity(), r.violation_bound);
      if (grid.record_margins) verdict.margins.push_back({sample_id, y0.norm(), r.worst_bound, r.worst_measured});
      if (r.first_violation) {
        verdict.falsify(Witness{check_name, T, ks[idx / pts.size()], y0, *r.first_violation, r.violation_measured,
                                r.violation_bound, std::nullopt});
      }
    }
  }
  return verdict;
}

}  // namespace

StabilityVerdict falsify_spuas(const ParameterizedMap& F, const KLBound& beta, double Delta, double nu,
                               std::span<const double> T_list, const AuditGrid& grid, double horizon,
                               EnvelopeComparator comparator) {
  if (!(nu >= 0.0) || !(Delta > nu)) throw DomainError("falsify_spuas: need Delta > nu >= 0");
  const BoundFn bound = [&](double s, double t) {
    const double b = beta(s, t);
    return comparator == EnvelopeComparator::max ? std::max(b, nu) : b + nu;
  };
  return audit_trajectories(F, "envelope", Delta, T_list, grid, horizon, bound);
}

StabilityVerdict falsify_spuas(const CascadeSystem& sys, const KLBound& beta, double Delta, double nu,
                               std::span<const double> T_list, const AuditGrid& grid, double horizon,
                               EnvelopeComparator comparator) {
  return falsify_spuas(as_parameterized_map(sys), beta, Delta, nu, T_list, grid, horizon, comparator);
}

StabilityVerdict check_boundedness(const ParameterizedMap& F, const ClassKFunction& kappa, double c, double Delta,
                                   std::span<const double> T_list, const AuditGrid& grid, double horizon) {
  if (!(Delta > 0.0) || !(c >= 0.0)) throw DomainError("check_boundedness: need Delta > 0 and c >= 0");
  const BoundFn bound = [&](double s, double) { return kappa(s) + c; };
  return audit_trajectories(F, "bounded", Delta, T_list, grid, horizon, bound);
}

StabilityVerdict check_boundedness(const CascadeSystem& sys, const ClassKFunction& kappa, double c, double Delta,
                                   std::span<const double> T_list, const AuditGrid& grid, double horizon) {
  return check_boundedness(as_parameterized_map(sys), kappa, c, Delta, T_list, grid, horizon);
}

StabilityVerdict audit_lyapunov(const LyapunovCandidate& V, const ParameterizedMap& F, double Delta, double nu,
                                std::span<const double> T_list, const AuditGrid& grid, DecreaseForm form) {
  if (!(Delta > 0.0) || !(nu >= 0.0)) throw DomainError("audit_lyapunov: need Delta > 0 and nu >= 0");
  const auto pts = grid_points(grid, F.dim, Delta);
  StabilityVerdict verdict;
  for (const char* name : {"sandwich-lower", "sandwich-upper", "decrease"}) verdict.check(name);
  if (V.L_mod) verdict.check("lipschitz");

  struct PointRow {
    double v = 0.0, lower = 0.0, upper = 0.0, dv = 0.0, dv_bound = 0.0;
  };
  struct PairRow {
    double measured = 0.0, bound = 0.0;
    Vector r, s;
  };
  std::size_t sample_id = 0;
  for (double T : T_list) {
    const auto ks = grid_k0(grid, T);
    const std::size_t n = ks.size() * pts.size();
    std::vector<PointRow> rows(n);
    parallel_for(n, [&](std::size_t idx) {
      const long k = ks[idx / pts.size()];
      const auto& y = pts[idx % pts.size()];
      const double ny = y.norm();
      auto& r = rows[idx];
      r.v = V(T, k, y);
      r.lower = V.alpha1(ny);
      r.upper = V.alpha2(ny);
      r.dv = V(T, k + 1, F.step(T, k, y)) - r.v;
      r.dv_bound = form == DecreaseForm::as_printed ? -T * (V.alpha3(ny) + nu) : -T * V.alpha3(ny) + T * nu;
    });
    for (std::size_t idx = 0; idx < n; ++idx, ++sample_id) {
      const auto& r = rows[idx];
      const long k = ks[idx / pts.size()];
      const auto& y = pts[idx % pts.size()];
      verdict.check("sandwich-lower").record(r.lower, r.v);
      verdict.check("sandwich-upper").record(r.v, r.upper);
      verdict.check("decrease").record(r.dv, r.dv_bound);
      if (grid.record_margins) verdict.margins.push_back({sample_id, y.norm(), r.dv_bound, r.dv});
      if (r.lower > r.v + kVerdictSlack) verdict.falsify({"sandwich-lower", T, k, y, k, r.lower, r.v, std::nullopt});
      if (r.v > r.upper + kVerdictSlack) verdict.falsify({"sandwich-upper", T, k, y, k, r.v, r.upper, std::nullopt});
      if (r.dv > r.dv_bound + kVerdictSlack) verdict.falsify({"decrease", T, k, y, k, r.dv, r.dv_bound, std::nullopt});
    }
    if (!V.L_mod || grid.lipschitz_pairs == 0 || pts.empty()) continue;
    const std::size_t m = ks.size() * grid.lipschitz_pairs;
    std::vector<PairRow> pairs(m);
    parallel_for(m, [&](std::size_t idx) {
      const long k = ks[idx / grid.lipschitz_pairs];
      const std::size_t i = idx % grid.lipschitz_pairs;
      const auto& r = pts[i % pts.size()];
      Vector s;
      if (i % 2 == 0) {
        s = pts[(i + pts.size() / 2 + 1) % pts.size()];
      } else {
        Vector dir(r.size());
        for (Eigen::Index j = 0; j < r.size(); ++j) dir[j] = halton(i + 1, static_cast<int>(j)) - 0.5;
        s = r + 1e-3 * Delta * dir;
      }
      auto& p = pairs[idx];
      p.measured = std::abs(V(T, k, r) - V(T, k, s));
      p.bound = (*V.L_mod)(std::max(r.norm(), s.norm())) * (r - s).norm();
      p.r = r;
      p.s = std::move(s);
    });
    for (std::size_t idx = 0; idx < m; ++idx) {
      const auto& p = pairs[idx];
      const long k = ks[idx / grid.lipschitz_pairs];
      verdict.check("lipschitz").record(p.measured, p.bound);
      if (p.measured > p.bound + kVerdictSlack) verdict.falsify({"lipschitz", T, k, p.r, k, p.measured, p.bound, p.s});
    }
  }
  return verdict;
}

namespace {

// T * a_last * r / (1 - r) with r fitted on log a over the last third;
// infinity when the terms do not decay geometrically.
double geometric_tail(const std::vector<double>& terms, double T) {
  const std::size_t n = terms.size();
  const std::size_t first = n - n / 3;
  std::vector<double> xs, ys;
  bool any_positive = false;
  for (std::size_t i = first; i < n; ++i) {
    if (terms[i] > 0.0) {
      any_positive = true;
      xs.push_back(static_cast<double>(i));
      ys.push_back(std::log(terms[i]));
    }
  }
  if (!any_positive) return 0.0;
  if (xs.size() < 3) return std::numeric_limits<double>::infinity();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  if (!(slope < 0.0)) return std::numeric_limits<double>::infinity();
  const double r = std::exp(slope);
  // Anchor at the largest of the fitted line and the last term so a noisy
  // fit never underestimates the next term.
  const double last = std::max(terms.back(), std::exp(my + slope * (static_cast<double>(n - 1) - mx)));
  return T * last * r / (1.0 - r);
}

}  // namespace

StabilityVerdict check_summability(std::span<const Trajectory> z_trajectories, const ClassKFunction& mu,
                                   const ClassKFunction& rho, double T, const SummabilityOptions& options) {
  if (!(T > 0.0)) throw DomainError("check_summability: T must be positive");
  StabilityVerdict verdict;
  auto& summary = verdict.check("summability");
  bool inconclusive = false;
  for (std::size_t j = 0; j < z_trajectories.size(); ++j) {
    const auto& tr = z_trajectories[j];
    if (tr.states.empty()) throw DomainError("check_summability: empty trajectory");
    std::vector<double> terms(tr.norms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = mu(tr.norms[i]);
    const double bound = rho(tr.norms.front());
    double partial = 0.0;
    std::optional<std::size_t> exceeded;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      partial += T * terms[i];
      if (!exceeded && partial > bound + kVerdictSlack) exceeded = i;
    }
    const double tail = geometric_tail(terms, T);
    summary.record(partial + (std::isfinite(tail) ? tail : 0.0), bound);
    if (exceeded) {
      verdict.falsify({"summability", T, tr.k0, tr.states.front(), tr.k0 + static_cast<long>(*exceeded), partial,
                       bound, std::nullopt});
      continue;
    }
    if (partial > 0.0 && !(tail <= options.tail_fraction * partial)) {
      inconclusive = true;
      continue;
    }
    if (partial + tail > bound + kVerdictSlack) {
      verdict.falsify({"summability", T, tr.k0, tr.states.front(), tr.last_index(), partial + tail, bound,
                       std::nullopt});
    }
  }
  if (inconclusive && !verdict.falsified()) {
    verdict.outcome = Outcome::inconclusive;
    verdict.note = "geometric tail not certified below the requested fraction of the partial sum";
  }
  return verdict;
}

namespace {

// Whether the integral of 1/phi over [1, inf) diverges, decided from the
// parametric form.
bool reciprocal_integral_diverges(const ClassKFunction& phi) {
  const auto& p = phi.params();
  switch (phi.kind()) {
    case ClassKFunction::Kind::linear: return true;
    case ClassKFunction::Kind::power: return p[1] <= 1.0;
    case ClassKFunction::Kind::affine_capped: return true;
    case ClassKFunction::Kind::tabulated: return true;  // linear extrapolation
    case ClassKFunction::Kind::polynomial: {
      std::size_t degree = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) degree = i;
      }
      return degree <= 1;
    }
    case ClassKFunction::Kind::custom:
      throw DomainError("growth function '" + phi.name() + "': divergence of the reciprocal integral is undecidable");
  }
  return false;
}

}  // namespace

UGBCertificate make_ugb_certificate(const UgbHypothesis& hyp, std::function<double(double, long, const Vector&)> V) {
  const double phi1 = hyp.phi(1.0);
  if (!(phi1 > 0.0) || !std::isfinite(phi1)) throw DomainError("growth function must be positive at 1");
  if (!reciprocal_integral_diverges(hyp.phi)) {
    throw DomainError("growth function grows too fast: the integral of 1/phi over [1, inf) converges");
  }
  if (!(hyp.c >= 0.0)) throw DomainError("certificate offset must be nonnegative");
  UGBCertificate cert;
  cert.phi_growth = hyp.phi;
  cert.gamma1_t = hyp.gamma1_t;
  cert.gamma2_t = hyp.gamma2_t;
  cert.c = hyp.c;
  const ClassKFunction phi = hyp.phi;
  cert.q = [phi, phi1](double s) { return s <= 1.0 ? 1.0 / phi1 : 1.0 / phi(s); };
  const auto q = cert.q;
  cert.rho_built = ClassKFunction::custom("rho", [q, phi1](double s) {
    if (s <= 1.0) return s / phi1;
    return 1.0 / phi1 + adaptive_simpson(q, 1.0, s, 1e-10);
  });
  if (hyp.gamma1_t.kind() == ClassKFunction::Kind::linear && hyp.gamma2_t.kind() == ClassKFunction::Kind::linear) {
    cert.mu_fn = ClassKFunction::linear(hyp.gamma1_t.params()[0] + hyp.gamma2_t.params()[0] / phi1);
  } else {
    const auto g1 = hyp.gamma1_t, g2 = hyp.gamma2_t;
    cert.mu_fn = ClassKFunction::custom("mu", [g1, g2, phi1](double s) { return g1(s) + g2(s) / phi1; });
  }
  const auto rho = cert.rho_built;
  cert.W_eval = [rho, V = std::move(V)](double T, long k, const Vector& x) { return rho(V(T, k, x)); };
  return cert;
}

CertificateAudit build_ugb_certificate(const LyapunovCandidate& V, const CascadeSystem& sys,
                                       const UgbHypothesis& hyp, const CertificateDomain& domain,
                                       std::span<const double> T_list) {
  CertificateAudit out{make_ugb_certificate(hyp, V.eval), {}, 0, 0, 0};
  const auto& cert = out.certificate;
  auto& verdict = out.verdict;
  for (const char* name : {"sandwich-lower", "sandwich-upper", "zero-input-decrease", "input-growth", "w-increment"}) {
    verdict.check(name);
  }
  const auto xs = domain.x_points.empty() ? sample_ball(sys.dim_x, domain.x_radius, domain.x_samples)
                                          : domain.x_points;
  const auto zs = sample_ball(sys.dim_z, domain.z_radius, domain.z_samples);
  const Vector zero_z = Vector::Zero(sys.dim_z);

  struct Row {
    double v = 0.0, lower = 0.0, upper = 0.0, v_free = 0.0;
    std::vector<double> v_driven, growth_bound, w_inc, w_bound;
  };
  for (double T : T_list) {
    const auto ks = domain.k_set.empty() ? periodic_k0_samples(T) : domain.k_set;
    const std::size_t n = ks.size() * xs.size();
    std::vector<Row> rows(n);
    parallel_for(n, [&](std::size_t idx) {
      const long k = ks[idx / xs.size()];
      const auto& x = xs[idx % xs.size()];
      auto& r = rows[idx];
      r.v = V(T, k, x);
      r.lower = V.alpha1(x.norm());
      r.upper = V.alpha2(x.norm()) + hyp.c;
      r.v_free = V(T, k + 1, sys.f(T, k, x, zero_z));
      const double w0 = cert.rho_built(r.v);
      for (const auto& z : zs) {
        const double vz = V(T, k + 1, sys.f(T, k, x, z));
        r.v_driven.push_back(vz);
        r.growth_bound.push_back(T * (hyp.gamma1_t(z.norm()) * hyp.phi(r.v) + hyp.gamma2_t(z.norm())));
        r.w_inc.push_back(cert.rho_built(vz) - w0);
        r.w_bound.push_back(T * cert.mu_fn(z.norm()));
      }
    });
    for (std::size_t idx = 0; idx < n; ++idx) {
      const auto& r = rows[idx];
      const long k = ks[idx / xs.size()];
      const auto& x = xs[idx % xs.size()];
      verdict.check("sandwich-lower").record(r.lower, r.v);
      verdict.check("sandwich-upper").record(r.v, r.upper);
      verdict.check("zero-input-decrease").record(r.v_free - r.v, 0.0);
      if (r.lower > r.v + kVerdictSlack) verdict.falsify({"sandwich-lower", T, k, x, k, r.lower, r.v, std::nullopt});
      if (r.v > r.upper + kVerdictSlack) verdict.falsify({"sandwich-upper", T, k, x, k, r.v, r.upper, std::nullopt});
      if (r.v_free - r.v > kVerdictSlack) {
        verdict.falsify({"zero-input-decrease", T, k, x, k, r.v_free - r.v, 0.0, std::nullopt});
      }
      for (std::size_t j = 0; j < zs.size(); ++j) {
        const double growth = r.v_driven[j] - r.v_free;
        verdict.check("input-growth").record(growth, r.growth_bound[j]);
        verdict.check("w-increment").record(r.w_inc[j], r.w_bound[j]);
        if (growth > r.growth_bound[j] + kVerdictSlack) {
          verdict.falsify({"input-growth", T, k, x, k, growth, r.growth_bound[j], zs[j]});
        }
        if (r.w_inc[j] > r.w_bound[j] + kVerdictSlack) {
          verdict.falsify({"w-increment", T, k, x, k, r.w_inc[j], r.w_bound[j], zs[j]});
        }
        if (r.v_driven[j] <= r.v) ++out.decrease_cases;
        else if (r.v <= 1.0) ++out.small_v_cases;
        else ++out.large_v_cases;
      }
    }
  }
  return out;
}

StabilityVerdict check_iisns(const Trajectory& x_traj, std::span<const Vector> inputs, const ClassKFunction& alpha1,
                             const ClassKFunction& alpha2, const ClassKFunction& mu, double T) {
  if (x_traj.states.empty()) throw DomainError("check_iisns: empty trajectory");
  if (inputs.size() + 1 < x_traj.states.size()) throw DomainError("check_iisns: inputs shorter than trajectory");
  StabilityVerdict verdict;
  auto& summary = verdict.check("iisns");
  const double base = alpha2(x_traj.norms.front());
  double accumulated = 0.0;
  for (std::size_t i = 0; i < x_traj.states.size(); ++i) {
    if (i > 0) accumulated += T * mu(inputs[i - 1].norm());
    const double lhs = alpha1(x_traj.norms[i]);
    const double rhs = base + accumulated;
    summary.record(lhs, rhs);
    if (lhs > rhs + kVerdictSlack) {
      verdict.falsify({"iisns", T, x_traj.k0, x_traj.states.front(), x_traj.k0 + static_cast<long>(i), lhs, rhs,
                       std::nullopt});
    }
  }
  return verdict;
}

}  // namespace sdc
