#include "qka/efficiency.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qka::efficiency {

EfficiencyResult compute(int n, int m, std::optional<int> l_opt) {
  const int l = l_opt.value_or(m);
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("participant count must be odd and >= 3");
  if (m < 1) throw std::invalid_argument("key length must be at least one chunk");
  if (l < 1) throw std::invalid_argument("verification-state count must be at least 1");

  EfficiencyResult r;
  r.n = n;
  r.m = m;
  r.l = l;

  const long long num = 2LL * m;
  const long long den = 12LL * (m + l) + 4LL * m * (n - 1) + 6LL * m;
  const long long g = std::gcd(num, den);
  r.numerator = num / g;
  r.denominator = den / g;
  r.value = static_cast<double>(num) / static_cast<double>(den);
  r.closed_form = (l == m);
  r.approx_value = 1.0 / (2.0 * n);
  return r;
}

nlohmann::ordered_json EfficiencyResult::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["m"] = m;
  j["l_verify"] = l;
  j["numerator"] = numerator;
  j["denominator"] = denominator;
  j["value"] = value;
  if (closed_form) j["closed_form_denominator"] = 2 * n + 13;
  j["approximation_1_over_2n"] = approx_value;
  return j;
}

std::string EfficiencyResult::to_text() const {
  std::ostringstream out;
  out << "eta = 2m / (12(m+l) + 4m(n-1) + 6m)  with n=" << n << " m=" << m << " l=" << l << "\n";
  out << "    = " << numerator << "/" << denominator << " = " << value << "\n";
  if (closed_form)
    out << "    closed form for l=m: 1/(2n+13) = 1/" << (2 * n + 13) << "\n";
  out << "circulating approximation 1/(2n) = " << approx_value << "\n";
  return out.str();
}

}  // namespace qka::efficiency
