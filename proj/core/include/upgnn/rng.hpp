#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace upgnn {

// Mix a 64-bit value through the splitmix64 finalizer. Used to derive
// sub-stream seeds that are decorrelated from their parents.
std::uint64_t mix_seed(std::uint64_t x);

// Combine a seed with a label (and optionally an index) into a new seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name,
                          std::uint64_t index);

// Deterministic random source. The bit stream comes from std::mt19937_64
// (fully specified by the standard); every distribution on top of it is
// implemented here so draws are reproducible across compilers and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Return the seed this generator was constructed with.
  std::uint64_t seed() const { return seed_; }

  // Next raw 64-bit draw.
  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 bits of precision.
  double uniform();

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  // Unbiased uniform integer in [0, bound); bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound);

  // Bernoulli draw with success probability p.
  bool bernoulli(double p);

  // Standard normal via Box-Muller; one spare value is cached.
  double normal();

  // Normal with the given mean and standard deviation.
  double normal(double mean, double stddev);

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // Independent named sub-stream; does not advance this generator.
  Rng sub(std::string_view name) const;
  Rng sub(std::string_view name, std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace upgnn
