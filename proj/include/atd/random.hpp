#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace atd {

// Seeded generator with toolchain-independent helpers. std::mt19937_64 output
// is fixed by the standard, but the <random> distributions and std::shuffle
// are not, so everything here is derived from raw engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::span<T> xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent stream seed, e.g. per epoch.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace atd
