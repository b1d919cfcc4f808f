#pragma once

// Adversaries that turn one or more shared copies into a leaked sequence:
// flipping, subset removal, correlation repair and the two majority-based
// collusion strategies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "corrfp/core.hpp"
#include "corrfp/correlation.hpp"
#include "corrfp/rng.hpp"

namespace corrfp {

struct AttackConfig {
  double p_f = 0.0;
  double p_s = 0.0;
  double tau_c = 0.0;
  double p_e = 0.1;
  std::vector<std::size_t> coalition;  // 0-based recipients

  void validate(std::size_t num_sps) const {
    for (double v : {p_f, p_s, tau_c, p_e})
      if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("attack probabilities must lie in [0,1]");
    std::vector<std::size_t> sorted = coalition;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ArgumentError("coalition members must be distinct");
    for (std::size_t sp : coalition)
      if (sp >= num_sps) throw NotFoundError("coalition member " + std::to_string(sp + 1) +
                                             " has no copy");
  }
};

struct AttackDiagnostics {
  std::size_t majority_fallbacks = 0;
};

inline Sequence flipping_attack(const Sequence& copy, double p_f, std::uint64_t seed) {
  if (!(p_f >= 0.0 && p_f <= 1.0)) throw ArgumentError("p_f must lie in [0,1]");
  Rng rng(seed);
  Sequence out = copy;
  const int m = copy.alphabet.size();
  for (State& v : out.values)
    if (rng.uniform() < p_f && v != kRemoved) v = rng.other_state(v, m);
  return out;
}

inline Sequence subset_attack(const Sequence& copy, double p_s, std::uint64_t seed) {
  if (!(p_s >= 0.0 && p_s <= 1.0)) throw ArgumentError("p_s must lie in [0,1]");
  Rng rng(seed);
  Sequence out = copy;
  for (State& v : out.values)
    if (rng.uniform() < p_s) v = kRemoved;
  return out;
}

/// Left to right over the evolving sequence: a pair whose conditional falls
/// below tau_c is repaired to the most likely successor (lowest code on ties),
/// any other point is flipped with probability p_f.
inline Sequence correlation_attack(const Sequence& copy, const CorrelationModel& model,
                                   double tau_c, double p_f, std::uint64_t seed) {
  if (model.length() != copy.size()) throw DimensionError("model length does not match copy");
  if (!(p_f >= 0.0 && p_f <= 1.0)) throw ArgumentError("p_f must lie in [0,1]");
  copy.validate();
  Rng rng(seed);
  Sequence y = copy;
  const int m = copy.alphabet.size();
  if (rng.uniform() < p_f) y[0] = rng.other_state(y[0], m);
  for (Position j = 1; j < y.size(); ++j) {
    const double u = rng.uniform();
    if (model.conditional_unchecked(j, y[j - 1], y[j]) < tau_c) {
      State best = 0;
      double best_c = -1.0;
      for (State k = 0; k < m; ++k) {
        const double c = model.conditional_unchecked(j, y[j - 1], k);
        if (c > best_c) {
          best_c = c;
          best = k;
        }
      }
      y[j] = best;
    } else if (u < p_f) {
      y[j] = rng.other_state(y[j], m);
    }
  }
  return y;
}

namespace detail {

inline void check_copies(std::span<const Sequence> copies) {
  if (copies.size() < 2) throw ArgumentError("collusion needs at least 2 copies");
  for (const Sequence& c : copies) {
    if (c.size() != copies.front().size()) throw DimensionError("copies differ in length");
    if (!(c.alphabet == copies.front().alphabet)) throw DimensionError("copies differ in alphabet");
  }
}

}  // namespace detail

inline Sequence standard_majority(std::span<const Sequence> copies, std::uint64_t seed) {
  detail::check_copies(copies);
  Rng rng(seed);
  const int m = copies.front().alphabet.size();
  Sequence y = copies.front();
  std::vector<std::size_t> counts(static_cast<std::size_t>(m));
  std::vector<State> tied;
  for (Position j = 0; j < y.size(); ++j) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const Sequence& c : copies) ++counts[static_cast<std::size_t>(c[j])];
    const std::size_t best = *std::max_element(counts.begin(), counts.end());
    tied.clear();
    for (State k = 0; k < m; ++k)
      if (counts[static_cast<std::size_t>(k)] == best) tied.push_back(k);
    y[j] = tied.size() == 1 ? tied.front() : tied[rng.below(tied.size())];
  }
  return y;
}

/// Normalised weights t_k = match^c_k * mismatch^(n-c_k) * P(x_j = k | x_{j-1} = prev)
/// at one position; `counts` holds c_k and the conditional is 1 at j = 0.
/// Returns false (and leaves `out` zeroed) when every weight vanishes.
inline bool collusion_weights(std::span<const std::size_t> counts, std::size_t n, Position j,
                              State prev, double match, double mismatch,
                              const CorrelationModel& model, std::span<double> out) {
  const int m = model.states();
  double total = 0.0;
  for (int k = 0; k < m; ++k) {
    const auto c = static_cast<double>(counts[static_cast<std::size_t>(k)]);
    double t = std::pow(match, c) * std::pow(mismatch, static_cast<double>(n) - c);
    if (j > 0) t *= model.conditional_unchecked(j, prev, k);
    out[static_cast<std::size_t>(k)] = t;
    total += t;
  }
  if (!(total > 0.0)) {
    std::fill(out.begin(), out.end(), 0.0);
    return false;
  }
  for (double& v : out) v /= total;
  return true;
}

/// collusion_weights with match = 1 - p_e and mismatch = p_e/(m-1).
inline bool majority_weights(std::span<const std::size_t> counts, std::size_t n, Position j,
                             State prev, double p_e, const CorrelationModel& model,
                             std::span<double> out) {
  return collusion_weights(counts, n, j, prev, 1.0 - p_e, p_e / (model.states() - 1), model, out);
}

inline Sequence probabilistic_majority(std::span<const Sequence> copies,
                                       const CorrelationModel& model, double p_e, double p_f,
                                       std::uint64_t seed, AttackDiagnostics* diag = nullptr) {
  detail::check_copies(copies);
  if (model.length() != copies.front().size()) throw DimensionError("model length does not match copies");
  if (!(p_e > 0.0 && p_e < 1.0)) throw ArgumentError("p_e must lie in (0,1)");
  if (!(p_f >= 0.0 && p_f <= 1.0)) throw ArgumentError("p_f must lie in [0,1]");
  Rng rng(seed);
  const int m = copies.front().alphabet.size();
  const std::size_t n = copies.size();
  Sequence y = copies.front();
  std::vector<std::size_t> counts(static_cast<std::size_t>(m));
  std::vector<double> probs(static_cast<std::size_t>(m));
  for (Position j = 0; j < y.size(); ++j) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const Sequence& c : copies) ++counts[static_cast<std::size_t>(c[j])];
    const double u = rng.uniform();
    if (majority_weights(counts, n, j, j > 0 ? y[j - 1] : 0, p_e, model, probs)) {
      y[j] = sample_index(probs, u);
    } else {
      if (diag) ++diag->majority_fallbacks;
      const auto best = std::max_element(counts.begin(), counts.end());
      y[j] = static_cast<State>(best - counts.begin());
    }
    if (rng.uniform() < p_f) y[j] = rng.other_state(y[j], m);
  }
  return y;
}

}  // namespace corrfp
