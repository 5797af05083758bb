#include "qka/hashmod.hpp"

#include <algorithm>
#include <stdexcept>

namespace qka::hashmod {

namespace {

std::uint64_t width_mask(int bits) {
  return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
}

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t result = 1 % m;
  base %= m;
  while (exp) {
    if (exp & 1) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    exp >>= 1;
  }
  return result;
}

// g^int(bits) mod m, square-and-multiply over the bit string so the key
// length is not capped at 64 bits.
std::uint64_t powmod_bits(std::uint64_t g, const std::vector<int>& bits, std::uint64_t m) {
  std::uint64_t result = 1 % m;
  for (int b : bits) {
    result = mulmod(result, result, m);
    if (b) result = mulmod(result, g % m, m);
  }
  return result;
}

std::string to_hex(std::uint64_t v, int min_digits) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  while (v) {
    out.insert(out.begin(), digits[v & 0xf]);
    v >>= 4;
  }
  while (static_cast<int>(out.size()) < min_digits) out.insert(out.begin(), '0');
  return out;
}

std::uint64_t from_hex(const std::string& s) {
  if (s.empty() || s.size() > 16) throw std::invalid_argument("bad hex digest: '" + s + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    int d;
    if (c >= '0' && c <= '9')
      d = c - '0';
    else if (c >= 'a' && c <= 'f')
      d = c - 'a' + 10;
    else
      throw std::invalid_argument("bad hex digit in digest: '" + s + "'");
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

}  // namespace

cluster::Chunk KeyString::chunk(int j) const {
  if (j < 0 || 2 * j + 1 >= static_cast<int>(bits.size()))
    throw std::out_of_range("chunk index out of range");
  return {bits[2 * j], bits[2 * j + 1]};
}

void KeyString::set_chunk(int j, const cluster::Chunk& c) {
  if (j < 0 || 2 * j + 1 >= static_cast<int>(bits.size()))
    throw std::out_of_range("chunk index out of range");
  bits[2 * j] = c.b1;
  bits[2 * j + 1] = c.b2;
}

KeyString KeyString::xored(const KeyString& other) const {
  if (bits.size() != other.bits.size())
    throw std::invalid_argument("key length mismatch in xor");
  KeyString out = *this;
  for (std::size_t i = 0; i < bits.size(); ++i) out.bits[i] ^= other.bits[i];
  return out;
}

std::string KeyString::to_chunked_string() const {
  std::string out;
  for (int j = 0; j < num_chunks(); ++j) {
    if (j) out += ',';
    out += static_cast<char>('0' + bits[2 * j]);
    out += static_cast<char>('0' + bits[2 * j + 1]);
  }
  return out;
}

KeyString KeyString::zero(int m) {
  if (m < 1) throw std::invalid_argument("key needs at least one chunk");
  KeyString k;
  k.bits.assign(2 * m, 0);
  return k;
}

KeyString KeyString::random(int m, RngStream& rng) {
  KeyString k = zero(m);
  for (auto& b : k.bits) b = rng.next_bit();
  return k;
}

KeyString KeyString::parse(const std::string& chunked) {
  KeyString k;
  std::size_t i = 0;
  while (i < chunked.size()) {
    std::size_t j = chunked.find(',', i);
    if (j == std::string::npos) j = chunked.size();
    if (j - i != 2) throw std::invalid_argument("key chunks must be two bits: '" + chunked + "'");
    for (std::size_t t = i; t < j; ++t) {
      if (chunked[t] != '0' && chunked[t] != '1')
        throw std::invalid_argument("key bits must be 0 or 1: '" + chunked + "'");
      k.bits.push_back(chunked[t] - '0');
    }
    i = j + 1;
  }
  if (k.bits.empty()) throw std::invalid_argument("empty key string");
  return k;
}

int gf2_rank(const std::vector<std::uint64_t>& columns, int rows) {
  std::vector<std::uint64_t> basis;  // reduced pivot vectors
  const std::uint64_t mask = width_mask(rows);
  for (std::uint64_t c : columns) {
    std::uint64_t v = c & mask;
    for (std::uint64_t b : basis) {
      std::uint64_t r = v ^ b;
      if (r < v) v = r;
    }
    if (v) basis.push_back(v);
  }
  return static_cast<int>(basis.size());
}

HashParams xor_linear_params(int digest_bits, int key_bits, std::uint64_t matrix_seed) {
  if (digest_bits < 1 || digest_bits > 64)
    throw std::invalid_argument("digest width must be 1..64 bits");
  if (key_bits < 2 || key_bits % 2 != 0)
    throw std::invalid_argument("key width must be a positive even bit count");
  HashParams p;
  p.mode = HashMode::kXorLinear;
  p.digest_bits = digest_bits;
  p.key_bits = key_bits;
  p.matrix_seed = matrix_seed;

  RngStream rng(matrix_seed);
  const std::uint64_t mask = width_mask(digest_bits);
  // Full rank: injective on keys when the key is narrower than the digest
  // (so any forgery changes the digest), surjective otherwise. A random
  // matrix almost always qualifies; the redraw loop makes it a guarantee.
  const int want = std::min(key_bits, digest_bits);
  for (int attempt = 0; attempt < 256; ++attempt) {
    p.columns.clear();
    p.columns.reserve(key_bits);
    for (int c = 0; c < key_bits; ++c) p.columns.push_back(rng.next_u64() & mask);
    if (gf2_rank(p.columns, digest_bits) == want) return p;
  }
  throw std::runtime_error("could not draw a full-rank hash matrix");
}

HashParams modexp_params(std::uint64_t generator, std::uint64_t hash_modulus) {
  if (!is_prime_u64(hash_modulus))
    throw std::invalid_argument("hash modulus must be prime");
  if (generator < 2 || generator % hash_modulus == 0)
    throw std::invalid_argument("generator must be >= 2 and nonzero mod the modulus");
  HashParams p;
  p.mode = HashMode::kModExp;
  p.generator = generator;
  p.hash_modulus = hash_modulus;
  return p;
}

std::string Digest::to_string() const {
  if (mode == HashMode::kXorLinear)
    return "xl" + std::to_string(width_bits) + ":" + to_hex(value, (width_bits + 3) / 4);
  return "me:" + to_hex(value, 1);
}

Digest Digest::parse(const std::string& text) {
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("digest missing mode prefix");
  const std::string prefix = text.substr(0, colon);
  const std::string body = text.substr(colon + 1);
  Digest d;
  if (prefix == "me") {
    d.mode = HashMode::kModExp;
    d.value = from_hex(body);
    d.width_bits = 0;
    return d;
  }
  if (prefix.size() > 2 && prefix[0] == 'x' && prefix[1] == 'l') {
    d.mode = HashMode::kXorLinear;
    d.width_bits = std::stoi(prefix.substr(2));
    if (d.width_bits < 1 || d.width_bits > 64)
      throw std::invalid_argument("bad digest width: " + prefix);
    d.value = from_hex(body) & width_mask(d.width_bits);
    return d;
  }
  throw std::invalid_argument("unknown digest prefix: " + prefix);
}

Digest hash(const KeyString& key, const HashParams& params) {
  Digest d;
  d.mode = params.mode;
  if (params.mode == HashMode::kXorLinear) {
    if (static_cast<int>(key.bits.size()) != params.key_bits)
      throw std::invalid_argument("key width does not match hash matrix");
    d.width_bits = params.digest_bits;
    d.value = 0;
    for (std::size_t c = 0; c < key.bits.size(); ++c)
      if (key.bits[c]) d.value ^= params.columns[c];
    return d;
  }
  d.width_bits = 0;
  d.modulus = params.hash_modulus;
  d.value = powmod_bits(params.generator, key.bits, params.hash_modulus);
  return d;
}

Digest combine(const Digest& a, const Digest& b) {
  if (a.mode != b.mode) throw std::invalid_argument("cannot combine digests of different modes");
  Digest out = a;
  if (a.mode == HashMode::kXorLinear) {
    if (a.width_bits != b.width_bits)
      throw std::invalid_argument("cannot combine digests of different widths");
    out.value = a.value ^ b.value;
    return out;
  }
  if (a.modulus && b.modulus && a.modulus != b.modulus)
    throw std::invalid_argument("cannot combine digests over different moduli");
  const std::uint64_t m = a.modulus ? a.modulus : b.modulus;
  if (!m) throw std::invalid_argument("modexp digest combination needs a modulus");
  out.modulus = m;
  out.value = mulmod(a.value, b.value, m);
  return out;
}

Digest identity_digest(const HashParams& params) {
  Digest d;
  d.mode = params.mode;
  if (params.mode == HashMode::kXorLinear) {
    d.width_bits = params.digest_bits;
    d.value = 0;
  } else {
    d.width_bits = 0;
    d.modulus = params.hash_modulus;
    d.value = 1 % params.hash_modulus;
  }
  return d;
}

bool verify_chain(const Registry& registry, const std::vector<int>& identities,
                  const Digest& claimed) {
  Digest acc;
  acc.mode = claimed.mode;
  acc.width_bits = claimed.width_bits;
  acc.modulus = claimed.modulus;
  acc.value = 1;
  if (claimed.mode == HashMode::kXorLinear) acc.value = 0;
  for (int id : identities) {
    auto it = registry.find(id);
    if (it == registry.end())
      throw std::out_of_range("identity " + std::to_string(id) + " not registered");
    acc = combine(acc, it->second);
  }
  return acc == claimed;
}

bool verify_equal(const Digest& claimed, const KeyString& key, const HashParams& params) {
  return claimed == hash(key, params);
}

bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    if (n % p == 0) return n == p;
  }
  // Deterministic Miller-Rabin for 64-bit integers.
  std::uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  for (std::uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    std::uint64_t x = powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool witness = true;
    for (int i = 1; i < r; ++i) {
      x = mulmod(x, x, n);
      if (x == n - 1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

}  // namespace qka::hashmod
