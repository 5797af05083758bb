#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace qka {

/// Deterministic random stream: a seeded mt19937_64 plus the handful of
/// draws the simulator needs. Every randomized operation takes one of these
/// explicitly; there is no global randomness, so a seed fully determines a
/// run.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  int next_bit() { return static_cast<int>(next_u64() >> 63); }

  /// Uniform integer in [0, n). Rejection-sampled, so the distribution is
  /// exact and the draw count stays reproducible across platforms.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t split_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Sorted sample of `k` distinct values from {0, ..., population-1}.
inline std::vector<int> sample_sorted(RngStream& rng, int population, int k) {
  std::vector<int> picked;
  picked.reserve(k);
  // Floyd's algorithm keeps the draw count at exactly k.
  for (int j = population - k; j < population; ++j) {
    int t = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(j) + 1));
    bool dup = false;
    for (int p : picked) {
      if (p == t) {
        dup = true;
        break;
      }
    }
    picked.push_back(dup ? j : t);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace qka
