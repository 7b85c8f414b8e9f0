#pragma once

#include <cstdint>
#include <vector>

#include "certmark/stats.hpp"

namespace certmark {

// Counter-based keyed generator. Every output is a pure function of
// (key, counter), so a stream can be forked into independent lanes and
// consumed in any order (including from parallel workers) while staying
// bitwise reproducible.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  // Derive an independent stream for the given lane. Distinct lanes of the
  // same parent produce unrelated sequences.
  CounterRng fork(std::uint64_t lane) const {
    std::uint64_t k = mix(key_ ^ (0xd1342543de82ef95ULL * (lane + 1)));
    return CounterRng(mix(k + 0x2545f4914f6cdd1dULL));
  }

  std::uint64_t next_u64() { return mix(key_ + kGamma * ++counter_); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in the open interval (0, 1); safe as a quantile argument.
  double next_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal draw via the inverse CDF.
  double next_normal() { return stats::norm_inv_cdf(next_open()); }

  // Uniform in [0, bound) without modulo bias (Lemire's method).
  std::uint64_t next_below(std::uint64_t bound) {
    unsigned __int128 m =
        static_cast<unsigned __int128>(next_u64()) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      const std::uint64_t t = (0ULL - bound) % bound;
      while (lo < t) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_below(i)]);
    }
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace certmark
