#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sdcascade/numerics.hpp"
#include "sdcascade/sampling.hpp"

namespace sdc {

enum class Outcome { pass, falsified, inconclusive };

std::string to_string(Outcome outcome);

/// Sample at which a checked inequality failed. For trajectory checks
/// (T, k0, initial_state, k) re-simulates the violation; for pointwise checks
/// `k0 == k` and `initial_state` is the evaluated point.
struct Witness {
  std::string check;
  double T = 0.0;
  long k0 = 0;
  Vector initial_state;
  long k = 0;
  double measured = 0.0;
  double bound = 0.0;
  std::optional<Vector> extra;  // second point of a pair, or the input z
};

/// Worst observed margin of one named inequality.
struct CheckSummary {
  std::string name;
  std::size_t samples = 0;
  double min_slack = std::numeric_limits<double>::infinity();  // min(bound - measured)
  double worst_ratio = 0.0;                                     // max(measured / bound)

  void record(double measured, double bound);
};

struct MarginRow {
  std::size_t sample_id = 0;
  double norm = 0.0;
  double bound = 0.0;
  double measured = 0.0;
};

struct StabilityVerdict {
  Outcome outcome = Outcome::pass;
  std::optional<Witness> witness;
  std::vector<CheckSummary> checks;
  std::vector<MarginRow> margins;  // filled when margin recording is requested
  std::string note;

  bool passed() const { return outcome == Outcome::pass; }
  bool falsified() const { return outcome == Outcome::falsified; }

  CheckSummary& check(const std::string& name);
  const CheckSummary* find_check(const std::string& name) const;

  /// Keeps the first witness in grid order; later violations only update margins.
  void falsify(Witness w);

  json to_json() const;
  void write_margins_csv(std::ostream& out) const;
};

/// Absolute slack allowed for floating-point noise in every pass/fail test.
inline constexpr double kVerdictSlack = 1e-9;

}  // namespace sdc
