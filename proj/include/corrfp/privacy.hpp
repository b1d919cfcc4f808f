#pragma once

// Privacy-oriented sharing: the lambda-overlap hybrid, where a fraction of the
// first recipient's fingerprints is replicated to everybody, and the
// randomized-response baseline that shares one noisy copy with everybody.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "corrfp/boneh_shaw.hpp"
#include "corrfp/core.hpp"
#include "corrfp/correlation.hpp"
#include "corrfp/fingerprint.hpp"
#include "corrfp/rng.hpp"

namespace corrfp {

struct HybridConfig {
  double lambda = 0.0;
  FingerprintParams base;
  // r <= 0 sizes the code to half of the non-overlapping budget.
  std::optional<BSConfig> bs;
};

inline SharingLedger hybrid_share(const Sequence& original, const HybridConfig& config,
                                  const CorrelationModel& model, std::size_t num_sps,
                                  std::uint64_t master_seed) {
  if (num_sps < 1) throw ArgumentError("need at least one recipient");
  if (!(config.lambda >= 0.0 && config.lambda <= 1.0))
    throw ArgumentError("lambda must lie in [0,1]");
  const FingerprintParams& params = config.base;
  SharingPlan plan{first_recipient_copy(original, params, model, master_seed), {}, std::nullopt};
  const FingerprintRecord& first = plan.first.record;
  const std::size_t f = first.positions.size();
  const auto overlap_count =
      static_cast<std::size_t>(std::floor(config.lambda * static_cast<double>(f) + 1e-9));

  std::vector<std::size_t> idx(f);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(master_seed, {streams::kOverlap}));
  for (std::size_t k = 0; k < overlap_count; ++k) std::swap(idx[k], idx[k + rng.below(f - k)]);
  std::vector<bool> in_overlap(f, false);
  for (std::size_t k = 0; k < overlap_count; ++k) {
    in_overlap[idx[k]] = true;
    plan.overlap.emplace_back(first.positions[idx[k]], first.values[idx[k]]);
  }

  if (config.lambda >= 1.0) {
    // Full overlap: everyone receives SP_1's copy. Sampling the leftover
    // budget p*l - f would make copies differ whenever f < p*l.
    SharingLedger ledger;
    ledger.original = original;
    ledger.params = params;
    ledger.overlap = first.positions;
    for (std::size_t sp = 0; sp < num_sps; ++sp) {
      ledger.records.push_back(first);
      ledger.records.back().sp_index = sp;
    }
    return ledger;
  }

  if (config.bs) {
    BSConfig bs = *config.bs;
    if (bs.r <= 0)
      bs.r = auto_block_size(params.p * (1.0 - config.lambda), original.size(), bs.c);
    if (bs.r >= 1) {
      if (overlap_count + bs.f1() > f)
        throw ConfigurationError("overlap of " + std::to_string(overlap_count) + " plus code length " +
                                 std::to_string(bs.f1()) + " exceeds the " + std::to_string(f) +
                                 " fingerprints of the first copy");
      FingerprintRecord rest;
      for (std::size_t k = 0; k < f; ++k) {
        if (in_overlap[k]) continue;
        rest.positions.push_back(first.positions[k]);
        rest.values.push_back(first.values[k]);
      }
      plan.layout = build_layout(original, rest, bs, derive_seed(master_seed, {streams::kLayout}));
    }
  }
  return share_from_plan(original, params, model, plan, num_sps, master_seed,
                         /*clamp_base_rate=*/true);
}

/// e^eps / (e^eps + m - 1).
inline double keep_prob_from_epsilon(double epsilon, int m = 3) {
  if (!(epsilon >= 0.0)) throw ArgumentError("epsilon must be >= 0");
  if (std::isinf(epsilon)) return 1.0;
  const double e = std::exp(epsilon);
  return e / (e + m - 1);
}

/// Inverse of keep_prob_from_epsilon: ln((m-1) q / (1-q)) for 1/m < q < 1.
inline double epsilon_from_keep_prob(double q, int m = 3) {
  if (!(q > 1.0 / m && q < 1.0))
    throw ArgumentError("keep probability must lie in (1/m, 1)");
  return std::log((m - 1) * q / (1.0 - q));
}

/// One randomized-response copy. Without `generalized` the three-state form
/// is required.
inline Sequence randomized_response(const Sequence& original, double epsilon, std::uint64_t seed,
                                    bool generalized = false) {
  original.validate();
  const int m = original.alphabet.size();
  if (!generalized && m != 3)
    throw ArgumentError("three-state randomized response needs m = 3; use the generalized form");
  const double keep = keep_prob_from_epsilon(epsilon, m);
  Rng rng(seed);
  Sequence out = original;
  for (State& v : out.values)
    if (!(rng.uniform() < keep)) v = rng.other_state(v, m);
  return out;
}

/// Every recipient gets the same noisy copy.
inline SharingLedger rr_share(const Sequence& original, double epsilon, std::size_t num_sps,
                              std::uint64_t seed, bool generalized = false) {
  if (num_sps < 1) throw ArgumentError("need at least one recipient");
  const Sequence noisy = randomized_response(original, epsilon, seed, generalized);
  FingerprintRecord rec = diff_fingerprints(original, noisy);
  rec.seed = seed;
  SharingLedger ledger;
  ledger.original = original;
  ledger.params.p = 1.0 - keep_prob_from_epsilon(epsilon, original.alphabet.size());
  ledger.params.theta = 0.0;
  ledger.params.tau = 0.0;
  for (std::size_t sp = 0; sp < num_sps; ++sp) {
    rec.sp_index = sp;
    ledger.records.push_back(rec);
  }
  return ledger;
}

}  // namespace corrfp
