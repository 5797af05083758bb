#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "qka/rng.hpp"

namespace qka::qcore {

using Amplitude = std::complex<double>;

/// Hard cap on register width. The protocol needs six data qubits plus a
/// few eavesdropper ancillas; anything larger is outside this tool's scope.
inline constexpr int kMaxQubits = 10;

/// Tolerance for normalisation and unitarity checks.
inline constexpr double kTolerance = 1e-9;

enum class BasisKind { kZ, kX };

/// Measurement outcome. Z basis: 0 is |0>, 1 is |1>. X basis: 0 is |+>,
/// 1 is |->.
using BitOutcome = int;

/// Dense state vector over 1..kMaxQubits qubits. Qubit 1 is the most
/// significant bit of the amplitude index, so |q1 q2 ... qn> sits at index
/// q1*2^(n-1) + ... + qn. Plain value type; operations below return fresh
/// vectors rather than mutating in place.
struct StateVector {
  int num_qubits = 0;
  std::vector<Amplitude> amps;

  double norm_sq() const;
};

/// Bit position (from the least significant end) of `qubit` in an index.
inline int bit_shift(const StateVector& s, int qubit) { return s.num_qubits - qubit; }

/// |b1 b2 ... bn> for bits in {0,1}, 1..kMaxQubits entries.
StateVector basis_state(const std::vector<int>& bits);

/// The six-qubit cluster state (|000000> + |000111> + |111000> - |111111>)/2.
StateVector make_cluster_state();

/// Pauli X on one qubit (1-based).
StateVector apply_x(const StateVector& s, int qubit);

/// Projective measurement of one qubit in the given basis. Samples the
/// outcome from the Born rule using `rng`, zeroes the discarded branch and
/// renormalises. Returns the outcome together with the collapsed state.
std::pair<BitOutcome, StateVector> measure_qubit(const StateVector& s, int qubit,
                                                 BasisKind basis, RngStream& rng);

/// Tensor product s (x) ancilla; the ancilla qubits become the least
/// significant positions. Combined width must stay within kMaxQubits.
StateVector extend_with_ancilla(const StateVector& s, const StateVector& ancilla);

/// Row-major 4x4 unitary over the ordered pair basis |q1 q2> in {00,01,10,11}.
using Mat4 = std::array<std::array<Amplitude, 4>, 4>;

/// Applies `u` to qubits (q1, q2), q1 != q2. Rejects matrices that are not
/// unitary within kTolerance.
StateVector apply_two_qubit_unitary(const StateVector& s, int q1, int q2, const Mat4& u);

/// <a|b>, conjugate-linear in the first argument.
Amplitude inner_product(const StateVector& a, const StateVector& b);

/// Removes a qubit that is in a computational eigenstate (e.g. just
/// measured in Z), returning the state of the remaining qubits. Throws if
/// the qubit still carries amplitude on both values.
StateVector drop_qubit(const StateVector& s, int qubit);

}  // namespace qka::qcore
