#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cast {

// Random draws with a fixed, implementation-pinned mapping from engine output
// to values, so streams replay identically across platforms and library
// versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double probability) { return uniform() < probability; }

  // Unbiased integer on [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via the Marsaglia polar transform; pairs are cached.
  double normal();

  // Fisher-Yates with draws taken in a fixed order.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

  // k distinct indices from [0, n), in the order they were drawn.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Child seed for one unit of work, decorrelated from neighbours by integer
// mixing so that (stream, index) pairs never collide in practice.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

}  // namespace cast
