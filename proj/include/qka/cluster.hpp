#pragma once

#include <array>
#include <optional>
#include <utility>

#include "qka/qcore.hpp"
#include "qka/rng.hpp"

namespace qka::cluster {

/// One two-bit key chunk, written "b1 b2" (e.g. the chunk "10" has b1=1,
/// b2=0).
struct Chunk {
  int b1 = 0;
  int b2 = 0;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// X-flip pattern on qubits 3..6. Composition is XOR.
struct FlipMask {
  int f3 = 0, f4 = 0, f5 = 0, f6 = 0;

  int value() const { return (f3 << 3) | (f4 << 2) | (f5 << 1) | f6; }
  static FlipMask from_value(int v);
  FlipMask operator^(const FlipMask& o) const {
    return {f3 ^ o.f3, f4 ^ o.f4, f5 ^ o.f5, f6 ^ o.f6};
  }
  friend bool operator==(const FlipMask&, const FlipMask&) = default;
};

/// (K_B chunk, K_D chunk) -> flips on qubits (3,4) and (5,6).
FlipMask chunks_to_mask(const Chunk& kb, const Chunk& kd);
std::pair<Chunk, Chunk> mask_to_chunks(const FlipMask& m);

/// The derived codebook: the sixteen-state orthonormal frame C_1..C_16 and
/// the bijection between flip masks and frame indices. Built once, from
/// first principles: each mask is applied to the base cluster state and the
/// result is matched against the frame's explicit ket table. Construction
/// throws if the match is not a clean bijection.
struct Codebook {
  std::array<qcore::StateVector, 16> frame;  // frame[i] is C_{i+1}
  std::array<int, 16> index_by_mask;         // mask value -> frame index 1..16
  std::array<int, 16> mask_by_index;         // frame index-1 -> mask value
};

const Codebook& derived_codebook();

/// Joint measurement of a six-qubit state in the cluster frame. Returns the
/// frame index 1..16, or nullopt when the state collapses into the 48-dim
/// complement of the frame's span, together with the post-measurement state.
std::pair<std::optional<int>, qcore::StateVector> cluster_basis_measure(
    const qcore::StateVector& state, RngStream& rng);

/// X-basis pair symbol: 0 when the two outcomes agree, 1 when they differ.
int pair_symbol_x(qcore::BitOutcome left, qcore::BitOutcome right);

/// Z-basis pair symbol: A = |00>, B = |11>, C = mixed.
enum class PairSymbolZ { kA, kB, kC };
PairSymbolZ pair_symbol_z(qcore::BitOutcome left, qcore::BitOutcome right);
char pair_symbol_z_char(PairSymbolZ s);

/// X-basis correlation of the cluster state: holds iff p12 = p34 xor p56.
bool check_x_correlation(int p12, int p34, int p56);

/// Z-basis correlation: r12 = A accepts (AA, BC, CB), r12 = B accepts
/// (BB, AC, CA), r12 = C never occurs on the honest state and is rejected.
bool check_z_correlation(PairSymbolZ r12, PairSymbolZ r34, PairSymbolZ r56);

/// Row-by-row comparison of the derived codebook with the reference
/// chunk-to-state table that circulates with the protocol description. The
/// reference table is known to disagree with the state list on three of its
/// K_B = 11 rows; the derived mapping is authoritative.
struct TableRow {
  Chunk kb, kd;
  int reference_index = 0;  // what the reference table claims
  int derived_index = 0;    // what applying the mask actually yields
  bool agree = false;
};
std::array<TableRow, 16> compare_reference_table();

}  // namespace qka::cluster
