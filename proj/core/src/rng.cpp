#include "upgnn/rng.hpp"

#include <cmath>

#include "upgnn/errors.hpp"

namespace upgnn {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

// FNV-1a over the label bytes, so stream names map to stable 64-bit tags.
std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  return mix_seed(seed ^ hash_name(name));
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name,
                          std::uint64_t index) {
  return mix_seed(derive_seed(seed, name) ^ mix_seed(index));
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw ParameterError("uniform_index: bound must be positive");
  // Rejection sampling over the largest multiple of bound below 2^64.
  const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
  std::uint64_t draw = next_u64();
  while (draw >= limit) draw = next_u64();
  return draw % bound;
}

bool Rng::bernoulli(double p) { return uniform() < p; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0, 1] x [0, 1) so the log argument is never zero.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

Rng Rng::sub(std::string_view name) const {
  return Rng(derive_seed(seed_, name));
}

Rng Rng::sub(std::string_view name, std::uint64_t index) const {
  return Rng(derive_seed(seed_, name, index));
}

}  // namespace upgnn
