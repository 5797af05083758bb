#include "qka/cluster.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qka::cluster {

namespace {

// Explicit ket table for the frame states C_1..C_16: four computational
// basis indices per state (qubit 1 = MSB), signs +,+,+,- in listed order.
// This is the ground truth the mask-derived states are matched against.
constexpr std::array<std::array<int, 4>, 16> kFrameKets = {{
    {0b000000, 0b000111, 0b111000, 0b111111},  // C1
    {0b000001, 0b000110, 0b111001, 0b111110},  // C2
    {0b000010, 0b000101, 0b111010, 0b111101},  // C3
    {0b000011, 0b000100, 0b111011, 0b111100},  // C4
    {0b000100, 0b000011, 0b111100, 0b111011},  // C5
    {0b000101, 0b000010, 0b111101, 0b111010},  // C6
    {0b000110, 0b000001, 0b111110, 0b111001},  // C7
    {0b000111, 0b000000, 0b111111, 0b111000},  // C8
    {0b001000, 0b001111, 0b110000, 0b110111},  // C9
    {0b001001, 0b001110, 0b110001, 0b110110},  // C10
    {0b001010, 0b001101, 0b110010, 0b110101},  // C11
    {0b001011, 0b001100, 0b110011, 0b110100},  // C12
    {0b001100, 0b001011, 0b110100, 0b110011},  // C13
    {0b001101, 0b001010, 0b110101, 0b110010},  // C14
    {0b001110, 0b001001, 0b110110, 0b110001},  // C15
    {0b001111, 0b001000, 0b110111, 0b110000},  // C16
}};

// Reference chunk-to-state table as published: rows in (K_B, K_D) order.
// The three rows mapping (11,01)->13, (11,10)->14 and (11,00)->15 contradict
// the ket table above; compare_reference_table() surfaces exactly those.
constexpr std::array<std::array<int, 3>, 16> kReferenceRows = {{
    // kb (2 bits), kd (2 bits), claimed index
    {0b00, 0b00, 1},
    {0b00, 0b01, 2},
    {0b00, 0b10, 3},
    {0b00, 0b11, 4},
    {0b01, 0b00, 5},
    {0b01, 0b01, 6},
    {0b01, 0b10, 7},
    {0b01, 0b11, 8},
    {0b10, 0b00, 9},
    {0b10, 0b01, 10},
    {0b10, 0b10, 11},
    {0b10, 0b11, 12},
    {0b11, 0b01, 13},
    {0b11, 0b10, 14},
    {0b11, 0b00, 15},
    {0b11, 0b11, 16},
}};

qcore::StateVector frame_state(int index1based) {
  qcore::StateVector s;
  s.num_qubits = 6;
  s.amps.assign(64, qcore::Amplitude{0.0, 0.0});
  const auto& kets = kFrameKets[index1based - 1];
  s.amps[kets[0]] = 0.5;
  s.amps[kets[1]] = 0.5;
  s.amps[kets[2]] = 0.5;
  s.amps[kets[3]] = -0.5;
  return s;
}

Codebook build_codebook() {
  Codebook cb;
  for (int i = 1; i <= 16; ++i) cb.frame[i - 1] = frame_state(i);

  // Frame states must be pairwise orthonormal before we trust the matching.
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      const double expect = i == j ? 1.0 : 0.0;
      const auto g = qcore::inner_product(cb.frame[i], cb.frame[j]);
      if (std::abs(g - expect) > qcore::kTolerance)
        throw std::logic_error("cluster frame is not orthonormal");
    }
  }

  cb.index_by_mask.fill(0);
  cb.mask_by_index.fill(-1);
  for (int mask = 0; mask < 16; ++mask) {
    qcore::StateVector s = qcore::make_cluster_state();
    const FlipMask fm = FlipMask::from_value(mask);
    if (fm.f3) s = qcore::apply_x(s, 3);
    if (fm.f4) s = qcore::apply_x(s, 4);
    if (fm.f5) s = qcore::apply_x(s, 5);
    if (fm.f6) s = qcore::apply_x(s, 6);

    int found = 0;
    for (int i = 1; i <= 16; ++i) {
      const double overlap = std::abs(qcore::inner_product(cb.frame[i - 1], s));
      if (overlap > 1.0 - qcore::kTolerance) {
        found = i;
        break;
      }
    }
    if (found == 0)
      throw std::logic_error("mask " + std::to_string(mask) + " does not land on a frame state");
    if (cb.mask_by_index[found - 1] != -1)
      throw std::logic_error("mask-to-index mapping is not a bijection");
    cb.index_by_mask[mask] = found;
    cb.mask_by_index[found - 1] = mask;
  }
  return cb;
}

}  // namespace

FlipMask FlipMask::from_value(int v) {
  if (v < 0 || v > 15) throw std::out_of_range("flip mask value must be 0..15");
  return {(v >> 3) & 1, (v >> 2) & 1, (v >> 1) & 1, v & 1};
}

FlipMask chunks_to_mask(const Chunk& kb, const Chunk& kd) {
  return {kb.b1, kb.b2, kd.b1, kd.b2};
}

std::pair<Chunk, Chunk> mask_to_chunks(const FlipMask& m) {
  return {Chunk{m.f3, m.f4}, Chunk{m.f5, m.f6}};
}

const Codebook& derived_codebook() {
  static const Codebook cb = build_codebook();
  return cb;
}

std::pair<std::optional<int>, qcore::StateVector> cluster_basis_measure(
    const qcore::StateVector& state, RngStream& rng) {
  if (state.num_qubits != 6)
    throw std::invalid_argument("cluster-basis measurement needs a six-qubit state");
  const Codebook& cb = derived_codebook();

  std::array<qcore::Amplitude, 16> overlap;
  std::array<double, 16> prob;
  double in_frame = 0.0;
  for (int i = 0; i < 16; ++i) {
    overlap[i] = qcore::inner_product(cb.frame[i], state);
    prob[i] = std::norm(overlap[i]);
    in_frame += prob[i];
  }
  double p_out = 1.0 - in_frame;
  if (p_out < 0.0) p_out = 0.0;
  const double total = in_frame + p_out;

  const double r = rng.next_unit() * total;
  double acc = 0.0;
  int picked = -1;
  for (int i = 0; i < 16; ++i) {
    acc += prob[i];
    if (r < acc) {
      picked = i;
      break;
    }
  }

  if (picked >= 0) {
    // Project onto the frame state, keeping the collapsed phase.
    qcore::StateVector post = cb.frame[picked];
    const qcore::Amplitude phase = overlap[picked] / std::abs(overlap[picked]);
    for (auto& a : post.amps) a *= phase;
    return {picked + 1, std::move(post)};
  }

  // Residual component outside the frame's span.
  qcore::StateVector post = state;
  for (int i = 0; i < 16; ++i)
    for (std::size_t k = 0; k < post.amps.size(); ++k)
      post.amps[k] -= overlap[i] * cb.frame[i].amps[k];
  const double n = std::sqrt(post.norm_sq());
  if (n <= 0.0) throw std::logic_error("outside-frame branch sampled with zero residual");
  for (auto& a : post.amps) a /= n;
  return {std::nullopt, std::move(post)};
}

int pair_symbol_x(qcore::BitOutcome left, qcore::BitOutcome right) {
  return left == right ? 0 : 1;
}

PairSymbolZ pair_symbol_z(qcore::BitOutcome left, qcore::BitOutcome right) {
  if (left == 0 && right == 0) return PairSymbolZ::kA;
  if (left == 1 && right == 1) return PairSymbolZ::kB;
  return PairSymbolZ::kC;
}

char pair_symbol_z_char(PairSymbolZ s) {
  switch (s) {
    case PairSymbolZ::kA: return 'A';
    case PairSymbolZ::kB: return 'B';
    default: return 'C';
  }
}

bool check_x_correlation(int p12, int p34, int p56) { return p12 == (p34 ^ p56); }

bool check_z_correlation(PairSymbolZ r12, PairSymbolZ r34, PairSymbolZ r56) {
  using Z = PairSymbolZ;
  if (r12 == Z::kA)
    return (r34 == Z::kA && r56 == Z::kA) || (r34 == Z::kB && r56 == Z::kC) ||
           (r34 == Z::kC && r56 == Z::kB);
  if (r12 == Z::kB)
    return (r34 == Z::kB && r56 == Z::kB) || (r34 == Z::kA && r56 == Z::kC) ||
           (r34 == Z::kC && r56 == Z::kA);
  return false;  // a mixed pair on qubits 1,2 never occurs honestly
}

std::array<TableRow, 16> compare_reference_table() {
  const Codebook& cb = derived_codebook();
  std::array<TableRow, 16> rows;
  for (int r = 0; r < 16; ++r) {
    const auto& src = kReferenceRows[r];
    TableRow& row = rows[r];
    row.kb = Chunk{(src[0] >> 1) & 1, src[0] & 1};
    row.kd = Chunk{(src[1] >> 1) & 1, src[1] & 1};
    row.reference_index = src[2];
    row.derived_index = cb.index_by_mask[chunks_to_mask(row.kb, row.kd).value()];
    row.agree = row.derived_index == row.reference_index;
  }
  return rows;
}

}  // namespace qka::cluster
