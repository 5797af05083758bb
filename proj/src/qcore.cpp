#include "qka/qcore.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qka::qcore {

namespace {

void check_state(const StateVector& s) {
  if (s.num_qubits < 1 || s.num_qubits > kMaxQubits)
    throw std::invalid_argument("state must have between 1 and " +
                                std::to_string(kMaxQubits) + " qubits");
  if (s.amps.size() != (std::size_t{1} << s.num_qubits))
    throw std::invalid_argument("amplitude vector length does not match qubit count");
}

void check_qubit(const StateVector& s, int qubit) {
  if (qubit < 1 || qubit > s.num_qubits)
    throw std::out_of_range("qubit index " + std::to_string(qubit) +
                            " out of range for " + std::to_string(s.num_qubits) +
                            "-qubit state");
}

StateVector renormalized(StateVector s) {
  double n = std::sqrt(s.norm_sq());
  if (n <= 0.0) throw std::logic_error("attempt to renormalise a zero vector");
  for (auto& a : s.amps) a /= n;
  return s;
}

}  // namespace

double StateVector::norm_sq() const {
  double acc = 0.0;
  for (const auto& a : amps) acc += std::norm(a);
  return acc;
}

StateVector basis_state(const std::vector<int>& bits) {
  if (bits.empty() || bits.size() > static_cast<std::size_t>(kMaxQubits))
    throw std::invalid_argument("basis_state needs between 1 and " +
                                std::to_string(kMaxQubits) + " bits");
  std::size_t index = 0;
  for (int b : bits) {
    if (b != 0 && b != 1) throw std::invalid_argument("basis_state bits must be 0 or 1");
    index = (index << 1) | static_cast<std::size_t>(b);
  }
  StateVector s;
  s.num_qubits = static_cast<int>(bits.size());
  s.amps.assign(std::size_t{1} << s.num_qubits, Amplitude{0.0, 0.0});
  s.amps[index] = 1.0;
  return s;
}

StateVector make_cluster_state() {
  StateVector s;
  s.num_qubits = 6;
  s.amps.assign(64, Amplitude{0.0, 0.0});
  s.amps[0b000000] = 0.5;
  s.amps[0b000111] = 0.5;
  s.amps[0b111000] = 0.5;
  s.amps[0b111111] = -0.5;
  return s;
}

StateVector apply_x(const StateVector& s, int qubit) {
  check_state(s);
  check_qubit(s, qubit);
  const std::size_t mask = std::size_t{1} << bit_shift(s, qubit);
  StateVector out = s;
  for (std::size_t i = 0; i < out.amps.size(); ++i) out.amps[i] = s.amps[i ^ mask];
  return out;
}

std::pair<BitOutcome, StateVector> measure_qubit(const StateVector& s, int qubit,
                                                 BasisKind basis, RngStream& rng) {
  check_state(s);
  check_qubit(s, qubit);
  const std::size_t mask = std::size_t{1} << bit_shift(s, qubit);
  StateVector out = s;

  if (basis == BasisKind::kZ) {
    double p0 = 0.0;
    for (std::size_t i = 0; i < s.amps.size(); ++i)
      if (!(i & mask)) p0 += std::norm(s.amps[i]);
    const BitOutcome outcome = rng.next_unit() < p0 ? 0 : 1;
    for (std::size_t i = 0; i < out.amps.size(); ++i) {
      const int bit = (i & mask) ? 1 : 0;
      if (bit != outcome) out.amps[i] = 0.0;
    }
    return {outcome, renormalized(std::move(out))};
  }

  // X basis: project onto |+-> via the pair (i, i^mask) with i holding bit 0.
  double p_plus = 0.0;
  for (std::size_t i = 0; i < s.amps.size(); ++i) {
    if (i & mask) continue;
    p_plus += std::norm(s.amps[i] + s.amps[i | mask]) * 0.5;
  }
  const BitOutcome outcome = rng.next_unit() < p_plus ? 0 : 1;
  const double sign = outcome == 0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < out.amps.size(); ++i) {
    if (i & mask) continue;
    const Amplitude proj = (s.amps[i] + sign * s.amps[i | mask]) * 0.5;
    out.amps[i] = proj;
    out.amps[i | mask] = sign * proj;
  }
  return {outcome, renormalized(std::move(out))};
}

StateVector extend_with_ancilla(const StateVector& s, const StateVector& ancilla) {
  check_state(s);
  check_state(ancilla);
  if (s.num_qubits + ancilla.num_qubits > kMaxQubits)
    throw std::invalid_argument("combined register would exceed " +
                                std::to_string(kMaxQubits) + " qubits");
  StateVector out;
  out.num_qubits = s.num_qubits + ancilla.num_qubits;
  out.amps.assign(std::size_t{1} << out.num_qubits, Amplitude{0.0, 0.0});
  const std::size_t anc_dim = ancilla.amps.size();
  for (std::size_t i = 0; i < s.amps.size(); ++i)
    for (std::size_t j = 0; j < anc_dim; ++j) out.amps[i * anc_dim + j] = s.amps[i] * ancilla.amps[j];
  return out;
}

StateVector apply_two_qubit_unitary(const StateVector& s, int q1, int q2, const Mat4& u) {
  check_state(s);
  check_qubit(s, q1);
  check_qubit(s, q2);
  if (q1 == q2) throw std::invalid_argument("two-qubit unitary needs distinct qubits");

  // U must satisfy U^dagger U = I within tolerance.
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      Amplitude acc{0.0, 0.0};
      for (int k = 0; k < 4; ++k) acc += std::conj(u[k][r]) * u[k][c];
      const double expect = r == c ? 1.0 : 0.0;
      if (std::abs(acc - expect) > kTolerance)
        throw std::invalid_argument("matrix is not unitary within tolerance");
    }
  }

  const std::size_t m1 = std::size_t{1} << bit_shift(s, q1);
  const std::size_t m2 = std::size_t{1} << bit_shift(s, q2);
  StateVector out = s;
  for (std::size_t i = 0; i < s.amps.size(); ++i) {
    if (i & (m1 | m2)) continue;  // visit each 4-tuple once, from its 00 element
    const std::array<std::size_t, 4> idx = {i, i | m2, i | m1, i | m1 | m2};
    std::array<Amplitude, 4> v;
    for (int k = 0; k < 4; ++k) v[k] = s.amps[idx[k]];
    for (int r = 0; r < 4; ++r) {
      Amplitude acc{0.0, 0.0};
      for (int c = 0; c < 4; ++c) acc += u[r][c] * v[c];
      out.amps[idx[r]] = acc;
    }
  }
  return out;
}

Amplitude inner_product(const StateVector& a, const StateVector& b) {
  check_state(a);
  check_state(b);
  if (a.num_qubits != b.num_qubits)
    throw std::invalid_argument("inner product needs equal qubit counts");
  Amplitude acc{0.0, 0.0};
  for (std::size_t i = 0; i < a.amps.size(); ++i) acc += std::conj(a.amps[i]) * b.amps[i];
  return acc;
}

StateVector drop_qubit(const StateVector& s, int qubit) {
  check_state(s);
  check_qubit(s, qubit);
  if (s.num_qubits == 1) throw std::invalid_argument("cannot drop the last qubit");
  const std::size_t mask = std::size_t{1} << bit_shift(s, qubit);
  double p1 = 0.0;
  for (std::size_t i = 0; i < s.amps.size(); ++i)
    if (i & mask) p1 += std::norm(s.amps[i]);
  int value;
  if (p1 < kTolerance)
    value = 0;
  else if (p1 > 1.0 - kTolerance)
    value = 1;
  else
    throw std::invalid_argument("qubit is not in a computational eigenstate");

  StateVector out;
  out.num_qubits = s.num_qubits - 1;
  out.amps.assign(std::size_t{1} << out.num_qubits, Amplitude{0.0, 0.0});
  const std::size_t low = mask - 1;  // bits below the dropped position
  for (std::size_t i = 0; i < s.amps.size(); ++i) {
    if (((i & mask) ? 1 : 0) != value) continue;
    const std::size_t j = (i & low) | ((i >> 1) & ~low);
    out.amps[j] = s.amps[i];
  }
  return renormalized(std::move(out));
}

}  // namespace qka::qcore
