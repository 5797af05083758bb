#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qka/cluster.hpp"
#include "qka/rng.hpp"

namespace qka::hashmod {

/// A key as a flat bit string of even length 2m, chunked per two bits for
/// display ("10,11,01"). bits[0] is the most significant bit, matching the
/// ket-label convention elsewhere.
struct KeyString {
  std::vector<int> bits;

  int num_chunks() const { return static_cast<int>(bits.size()) / 2; }
  cluster::Chunk chunk(int j) const;          // 0-based chunk index
  void set_chunk(int j, const cluster::Chunk& c);
  KeyString xored(const KeyString& other) const;
  std::string to_chunked_string() const;      // "10,11,01"

  static KeyString zero(int m);
  static KeyString random(int m, RngStream& rng);
  static KeyString parse(const std::string& chunked);

  friend bool operator==(const KeyString&, const KeyString&) = default;
};

enum class HashMode { kXorLinear, kModExp };

/// Parameters of the homomorphic hash.
///
/// XOR-LINEAR: H(v) = M v over GF(2) with a pseudo-random L x 2m matrix M
/// derived from matrix_seed; combine is XOR and H(x (+) y) = H(x) (+) H(y)
/// holds for every pair. When 2m >= L the matrix is redrawn (still
/// deterministically from the seed) until it has full row rank.
///
/// MODEXP: H(v) = g^int(v) mod hash_modulus with combine as modular product,
/// so H(x)H(y) = H(x + y). The protocol combines keys with XOR, and
/// sum == xor only for pairwise-disjoint bit patterns; that caveat is the
/// caller's problem, not this module's.
struct HashParams {
  HashMode mode = HashMode::kXorLinear;
  // XOR-LINEAR
  int digest_bits = 64;
  int key_bits = 0;
  std::uint64_t matrix_seed = 0;
  std::vector<std::uint64_t> columns;  // columns[c] holds rows of column c
  // MODEXP
  std::uint64_t generator = 0;
  std::uint64_t hash_modulus = 0;
};

HashParams xor_linear_params(int digest_bits, int key_bits, std::uint64_t matrix_seed);
HashParams modexp_params(std::uint64_t generator, std::uint64_t hash_modulus);

/// Digest value. Carries enough of the mode parameters to combine and
/// serialise without looking the params up again.
struct Digest {
  HashMode mode = HashMode::kXorLinear;
  std::uint64_t value = 0;
  int width_bits = 64;            // XOR-LINEAR digest width
  std::uint64_t modulus = 0;      // MODEXP modulus (context, not identity)

  std::string to_string() const;  // "xl64:0123..." or "me:a3"
  static Digest parse(const std::string& text);

  // The modulus is combine context rather than part of the digest value; a
  // parsed "me:" digest compares equal to the one that produced it.
  friend bool operator==(const Digest& a, const Digest& b) {
    return a.mode == b.mode && a.width_bits == b.width_bits && a.value == b.value;
  }
};

Digest hash(const KeyString& key, const HashParams& params);
Digest combine(const Digest& a, const Digest& b);
Digest identity_digest(const HashParams& params);

/// Digests registered with the third-party centre, keyed by participant
/// identity.
using Registry = std::map<int, Digest>;

/// Folds the registered digests of `identities` with combine and compares
/// against `claimed`. Unknown identities throw.
bool verify_chain(const Registry& registry, const std::vector<int>& identities,
                  const Digest& claimed);

/// claimed == hash(key)?
bool verify_equal(const Digest& claimed, const KeyString& key, const HashParams& params);

/// GF(2) rank of the column set (used by the full-row-rank check; exposed
/// for tests).
int gf2_rank(const std::vector<std::uint64_t>& columns, int rows);

bool is_prime_u64(std::uint64_t n);

}  // namespace qka::hashmod
