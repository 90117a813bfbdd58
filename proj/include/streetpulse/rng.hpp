#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace streetpulse {

// Deterministic random source. Every randomized step in the library draws
// from this class rather than from the std distributions, whose mappings are
// implementation-defined; the raw mt19937 stream itself is pinned by the
// standard, so a seed fixes all results bit-exactly.
class SeededRng {
public:
  explicit SeededRng(std::uint32_t seed) : gen_(seed) {}

  std::uint32_t next_u32() { return gen_(); }

  // Uniform in [0, 1) with 24 bits of resolution.
  float uniform01() {
    return static_cast<float>(gen_() >> 8) * (1.0f / 16777216.0f);
  }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n); n must be nonzero.
  std::uint32_t below(std::uint32_t n) { return gen_() % n; }

  // Fisher-Yates shuffle (std::shuffle is implementation-defined).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(static_cast<std::uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937 gen_;
};

}  // namespace streetpulse
