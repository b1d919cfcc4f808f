#pragma once

// Utility, robustness and privacy metrics.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <span>
#include <vector>

#include "corrfp/core.hpp"

namespace corrfp {

/// Per-point utility weights; empty means unit weights.
struct UtilityWeights {
  std::vector<double> u;

  static UtilityWeights unit(std::size_t l) { return {std::vector<double>(l, 1.0)}; }
};

namespace detail {

inline double weighted_agreement(const Sequence& reference, const Sequence& other,
                                 const UtilityWeights& weights) {
  if (reference.size() != other.size())
    throw DimensionError("utility: length " + std::to_string(reference.size()) + " vs " +
                         std::to_string(other.size()));
  if (!weights.u.empty() && weights.u.size() != reference.size())
    throw DimensionError("utility: weight vector length mismatch");
  double num = 0.0, den = 0.0;
  for (Position j = 0; j < reference.size(); ++j) {
    const double w = weights.u.empty() ? 1.0 : weights.u[j];
    if (w < 0.0) throw ArgumentError("utility weights must be non-negative");
    num += w * (other[j] == reference[j] ? 1.0 : -1.0);
    den += w;
  }
  if (!(den > 0.0)) throw ArgumentError("utility weights must have a positive sum");
  return num / den;
}

}  // namespace detail

/// Weighted mean of +1 (match) / -1 (mismatch, including d0).
inline double owner_utility(const Sequence& original, const Sequence& copy,
                            const UtilityWeights& weights = {}) {
  return detail::weighted_agreement(original, copy, weights);
}

inline double attacker_utility(const Sequence& original, const Sequence& leaked,
                               const UtilityWeights& weights = {}) {
  return detail::weighted_agreement(original, leaked, weights);
}

struct TrialOutcome {
  std::size_t accused = 0;
  std::vector<std::size_t> coalition;
};

/// Fraction of trials whose accused recipient belongs to the coalition.
inline double accuracy(std::span<const TrialOutcome> trials) {
  if (trials.empty()) throw ArgumentError("accuracy: no trials");
  std::size_t hits = 0;
  for (const TrialOutcome& t : trials)
    if (std::find(t.coalition.begin(), t.coalition.end(), t.accused) != t.coalition.end()) ++hits;
  return static_cast<double>(hits) / static_cast<double>(trials.size());
}

/// Mean |x_j - y_j| over the points that were not removed.
inline double estimation_error(const Sequence& original, const Sequence& leaked) {
  if (original.size() != leaked.size()) throw DimensionError("estimation_error: length mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (Position j = 0; j < original.size(); ++j) {
    if (leaked[j] == kRemoved) continue;
    sum += std::abs(original[j] - leaked[j]);
    ++n;
  }
  if (n == 0) throw UndefinedError("estimation_error: every point was removed");
  return sum / static_cast<double>(n);
}

}  // namespace corrfp
