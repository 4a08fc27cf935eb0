#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace alseg {

// Purpose tags for stream splitting. Values are part of the reproducibility
// contract: changing one changes every run that consumes that stream.
enum class Stream : std::uint64_t {
  kData = 1,
  kSplit = 2,
  kInit = 3,
  kTrain = 4,
  kMcDropout = 5,
  kQuery = 6,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Hashes a base seed together with any number of tags into an independent
// seed. derive_seed(s, {a, b}) != derive_seed(s, {b, a}) in general.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept;

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage, Stream purpose) noexcept {
  return derive_seed(seed, {stage, static_cast<std::uint64_t>(purpose)});
}

// Portable random source. The engine is std::mt19937_64 (fully specified by
// the standard); all distributions are implemented here because the standard
// library distributions are not bit-reproducible across vendors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0. Unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  // Standard normal via Box-Muller (no cached second value).
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace alseg
