#pragma once

// Fingerprint generation: the naive scheme, the correlation-aware sequential
// sampler and its variant with pre-assigned (fixed) positions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "corrfp/core.hpp"
#include "corrfp/correlation.hpp"
#include "corrfp/rng.hpp"

namespace corrfp {

struct ProbabilityAssignment {
  std::vector<double> probs;
  // Every state was excluded; mass follows the raw conditional row instead.
  bool degenerate = false;
};

/// Positions whose shared value is decided before sampling.
struct Preassignment {
  std::vector<std::pair<Position, State>> fixed;  // sorted by position
  std::size_t f1 = 0;  // fixed positions
  std::size_t fi = 0;  // fixed positions that differ from the original

  static Preassignment make(const Sequence& original,
                            std::vector<std::pair<Position, State>> entries) {
    std::sort(entries.begin(), entries.end());
    Preassignment pre;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      auto [j, v] = entries[k];
      if (j >= original.size()) throw ArgumentError("fixed position outside sequence");
      if (!original.alphabet.contains(v)) throw ArgumentError("fixed value outside alphabet");
      if (k > 0 && entries[k - 1].first == j) {
        if (entries[k - 1].second != v) throw ArgumentError("conflicting fixed values");
        continue;
      }
      pre.fixed.emplace_back(j, v);
      if (v != original[j]) ++pre.fi;
    }
    pre.f1 = pre.fixed.size();
    return pre;
  }
};

struct Fingerprinted {
  Sequence copy;
  FingerprintRecord record;
  std::size_t degenerate_rows = 0;
};

namespace detail {

/// Branch ladder for one position, written into `out` (size m). Position `j`
/// is 0-based. Returns true on the all-excluded fallback.
inline bool assign_into(std::span<double> out, Position j, State original_value,
                        State prev_shared, std::optional<State> next_fixed, double prob,
                        double tau, const CorrelationModel& model) {
  const int m = model.states();
  if (j == 0) {
    for (int k = 0; k < m; ++k) out[static_cast<std::size_t>(k)] = prob / (m - 1);
    out[static_cast<std::size_t>(original_value)] = 1.0 - prob;
    return false;
  }
  constexpr double kUnassigned = -1.0;
  const bool look_ahead = next_fixed.has_value() && j + 1 < model.length();
  double assigned = 0.0;
  double free_weight = 0.0;
  for (int k = 0; k < m; ++k) {
    const double c = model.conditional_unchecked(j, prev_shared, k);
    auto& slot = out[static_cast<std::size_t>(k)];
    if (c < tau) {
      slot = 0.0;
    } else if (look_ahead && model.conditional_unchecked(j + 1, k, *next_fixed) < tau) {
      slot = 0.0;
    } else if (k == original_value) {
      slot = 1.0 - prob;
      assigned += slot;
    } else if (c > 0.0) {
      slot = kUnassigned;
      free_weight += c;
    } else {
      slot = 0.0;
    }
  }
  if (free_weight > 0.0) {
    const double remaining = 1.0 - assigned;
    for (int k = 0; k < m; ++k) {
      auto& slot = out[static_cast<std::size_t>(k)];
      if (slot == kUnassigned)
        slot = remaining * model.conditional_unchecked(j, prev_shared, k) / free_weight;
    }
    return false;
  }
  if (assigned > 0.0) {
    // Only the true state survived: it takes all of the mass.
    out[static_cast<std::size_t>(original_value)] = 1.0;
    return false;
  }
  for (int k = 0; k < m; ++k)
    out[static_cast<std::size_t>(k)] = model.conditional_unchecked(j, prev_shared, k);
  return true;
}

inline constexpr State kNotFixed = std::numeric_limits<State>::min();

}  // namespace detail

/// Sharing distribution for position `j` (0-based). `prev_shared` is ignored
/// at j = 0 and required otherwise; `next_fixed` is the forced value at j+1.
inline ProbabilityAssignment assign_probabilities(Position j, State original_value,
                                                  std::optional<State> prev_shared,
                                                  std::optional<State> next_fixed,
                                                  double prob, double tau,
                                                  const CorrelationModel& model) {
  if (!(prob >= 0.0 && prob < 1.0)) throw ArgumentError("prob must lie in [0,1)");
  if (j >= model.length()) throw ArgumentError("position outside model");
  const Alphabet alpha = model.alphabet();
  if (!alpha.contains(original_value)) throw ArgumentError("original value outside alphabet");
  if (j > 0 && !(prev_shared && alpha.contains(*prev_shared)))
    throw ArgumentError("prev_shared required for positions after the first");
  if (next_fixed && !alpha.contains(*next_fixed))
    throw ArgumentError("next_fixed outside alphabet");
  ProbabilityAssignment pa;
  pa.probs.assign(static_cast<std::size_t>(model.states()), 0.0);
  pa.degenerate = detail::assign_into(pa.probs, j, original_value, prev_shared.value_or(0),
                                      next_fixed, prob, tau, model);
  return pa;
}

/// Block-boundary rate update after `j` processed positions holding `count`
/// fingerprints: base*(1-theta) when ahead of p*j, base*(1+theta) when behind.
inline double adjust_rate(std::size_t count, std::size_t j, double p, double theta,
                          double base_rate) {
  const double expected = p * static_cast<double>(j);
  const auto c = static_cast<double>(count);
  if (c > expected) return base_rate * (1.0 - theta);
  if (c < expected) return base_rate * (1.0 + theta);
  return base_rate;
}

inline double adjust_rate(std::size_t count, std::size_t j, double p, double theta) {
  return adjust_rate(count, j, p, theta, p);
}

inline Fingerprinted fingerprint_naive(const Sequence& original, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("p must lie in [0,1]");
  original.validate();
  Rng rng(seed);
  Fingerprinted out{original, {}, 0};
  out.record.seed = seed;
  const int m = original.alphabet.size();
  for (Position j = 0; j < original.size(); ++j) {
    if (rng.uniform() < p) {
      out.copy[j] = rng.other_state(original[j], m);
      out.record.positions.push_back(j);
      out.record.values.push_back(out.copy[j]);
    }
  }
  return out;
}

/// Sequential sampler with explicit starting rate. Fixed positions are copied
/// verbatim and count towards the running fingerprint total.
inline Fingerprinted fingerprint_with_rate(const Sequence& original, const Preassignment& pre,
                                           double base_rate, const FingerprintParams& params,
                                           const CorrelationModel& model, std::uint64_t seed) {
  params.validate();
  original.validate();
  if (!(base_rate >= 0.0 && base_rate < 1.0))
    throw ArgumentError("fingerprinting rate " + std::to_string(base_rate) +
                        " outside [0,1)");
  if (model.length() != original.size())
    throw DimensionError("model length " + std::to_string(model.length()) +
                         " does not match sequence length " + std::to_string(original.size()));
  if (!(model.alphabet() == original.alphabet)) throw DimensionError("model alphabet mismatch");

  const std::size_t l = original.size();
  std::vector<State> fixed(l, detail::kNotFixed);
  for (auto [j, v] : pre.fixed) {
    if (j >= l) throw ArgumentError("fixed position outside sequence");
    fixed[j] = v;
  }

  Rng rng(seed);
  Fingerprinted out{original, {}, 0};
  out.record.seed = seed;
  std::vector<double> probs(static_cast<std::size_t>(model.states()));
  const std::size_t block = params.block_size();
  double prob = base_rate;
  std::size_t count = 0;
  for (Position j = 0; j < l; ++j) {
    if (fixed[j] != detail::kNotFixed) {
      out.copy[j] = fixed[j];
    } else {
      std::optional<State> next;
      if (j + 1 < l && fixed[j + 1] != detail::kNotFixed) next = fixed[j + 1];
      const State prev = j > 0 ? out.copy[j - 1] : 0;
      if (detail::assign_into(probs, j, original[j], prev, next, prob, params.tau, model))
        ++out.degenerate_rows;
      out.copy[j] = sample_index(probs, rng.uniform());
    }
    if (out.copy[j] != original[j]) {
      ++count;
      out.record.positions.push_back(j);
      out.record.values.push_back(out.copy[j]);
    }
    if ((j + 1) % block == 0) prob = adjust_rate(count, j + 1, params.p, params.theta, base_rate);
  }
  return out;
}

inline Fingerprinted fingerprint_alg1(const Sequence& original, const FingerprintParams& params,
                                      const CorrelationModel& model, std::uint64_t seed) {
  params.validate();
  return fingerprint_with_rate(original, Preassignment{}, params.p, params, model, seed);
}

/// Base rate that keeps the expected total at p*l given the fixed positions.
inline double preassigned_base_rate(double p, std::size_t l, const Preassignment& pre) {
  if (pre.f1 >= l) throw ArgumentError("every position is pre-assigned");
  return (p * static_cast<double>(l) - static_cast<double>(pre.fi)) /
         static_cast<double>(l - pre.f1);
}

inline Fingerprinted fingerprint_alg2(const Sequence& original, const Preassignment& pre,
                                      const FingerprintParams& params,
                                      const CorrelationModel& model, std::uint64_t seed) {
  params.validate();
  const double base = preassigned_base_rate(params.p, original.size(), pre);
  if (!(base >= 0.0 && base < 1.0))
    throw ArgumentError("base rate (p*l - f_i)/(l - f1) = " + std::to_string(base) +
                        " outside [0,1); p is incompatible with the pre-assignment");
  return fingerprint_with_rate(original, pre, base, params, model, seed);
}

}  // namespace corrfp
