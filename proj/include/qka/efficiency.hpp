#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace qka::efficiency {

/// Qubit-efficiency accounting for a run with n participants, m key chunks
/// and l verification states, implemented literally:
///
///   eta = 2m / ( [6(m+l) transmitted + 6(m+l) decoy] qubits at preparation
///                + 8m qubits per chain hop across (n-1)/2 hops
///                + 6m qubits measured at recovery )
///
/// For l = m this reduces to 1/(2n+13). The circulating estimate 1/(2n) is
/// reported alongside for comparison; the exact rational is authoritative.
struct EfficiencyResult {
  int n = 0, m = 0, l = 0;
  long long numerator = 0;    // reduced
  long long denominator = 1;  // reduced
  double value = 0.0;
  bool closed_form = false;   // true when l == m (denominator is 2n+13)
  double approx_value = 0.0;  // 1/(2n)

  std::string to_text() const;
  nlohmann::ordered_json to_json() const;
};

EfficiencyResult compute(int n, int m, std::optional<int> l = std::nullopt);

}  // namespace qka::efficiency
