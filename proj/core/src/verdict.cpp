#include "sdcascade/verdict.hpp"

#include <algorithm>
#include <cmath>

namespace sdc {

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::pass: return "pass";
    case Outcome::falsified: return "falsified";
    case Outcome::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

void CheckSummary::record(double measured, double bound) {
  ++samples;
  min_slack = std::min(min_slack, bound - measured);
  if (bound > 0.0) {
    worst_ratio = std::max(worst_ratio, measured / bound);
  } else if (measured > 0.0) {
    worst_ratio = std::numeric_limits<double>::infinity();
  }
}

CheckSummary& StabilityVerdict::check(const std::string& name) {
  for (auto& c : checks) {
    if (c.name == name) return c;
  }
  checks.push_back(CheckSummary{name});
  return checks.back();
}

const CheckSummary* StabilityVerdict::find_check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

void StabilityVerdict::falsify(Witness w) {
  outcome = Outcome::falsified;
  if (!witness) witness = std::move(w);
}

namespace {

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json StabilityVerdict::to_json() const {
  json j;
  j["outcome"] = to_string(outcome);
  if (witness) {
    const auto& w = *witness;
    j["witness"] = {{"check", w.check}, {"T", w.T},         {"k0", w.k0},
                    {"initial_state", vec_json(w.initial_state)}, {"k", w.k},
                    {"measured", w.measured}, {"bound", w.bound}};
    if (w.extra) j["witness"]["extra"] = vec_json(*w.extra);
  } else {
    j["witness"] = nullptr;
  }
  json cs = json::array();
  for (const auto& c : checks) {
    cs.push_back({{"name", c.name},
                  {"samples", c.samples},
                  {"min_slack", finite_or_null(c.min_slack)},
                  {"worst_ratio", finite_or_null(c.worst_ratio)}});
  }
  j["checks"] = cs;
  if (!note.empty()) j["note"] = note;
  return j;
}

void StabilityVerdict::write_margins_csv(std::ostream& out) const {
  out << "sample_id,norm,bound,measured,margin\n";
  out.precision(17);
  for (const auto& r : margins) {
    out << r.sample_id << ',' << r.norm << ',' << r.bound << ',' << r.measured << ',' << (r.bound - r.measured)
        << '\n';
  }
}

}  // namespace sdc
