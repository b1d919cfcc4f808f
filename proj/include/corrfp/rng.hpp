#pragma once

// Portable deterministic randomness. std::mt19937_64 output is fixed by the
// standard; the standard distributions are not, so every draw used by the
// library goes through the helpers below.

#include <cstdint>
#include <initializer_list>
#include <random>

#include "corrfp/core.hpp"

namespace corrfp {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for a path of stream identifiers under `master`.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t step : path) h = mix64(h ^ mix64(step + 0x632BE59BD9B4E019ULL));
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), rejection sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ArgumentError("Rng::below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform draw over the m-1 states different from `s`.
  State other_state(State s, int m) {
    auto k = static_cast<State>(below(static_cast<std::uint64_t>(m - 1)));
    return k >= s ? k + 1 : k;
  }

 private:
  std::mt19937_64 engine_;
};

/// Inverse-CDF draw over `probs` in fixed state order. Rounding slack at the
/// top end falls on the last state with positive mass.
inline State sample_index(std::span<const double> probs, double u) {
  double acc = 0.0;
  State last_positive = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    acc += probs[k];
    last_positive = static_cast<State>(k);
    if (u < acc) return static_cast<State>(k);
  }
  return last_positive;
}

}  // namespace corrfp
