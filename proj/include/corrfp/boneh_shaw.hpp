#pragma once

// Boneh-Shaw (c,r)-codes embedded into correlated data: codewords, the secret
// layout drawn from the first recipient's fingerprints, the multi-recipient
// sharing pipeline, block classification and the standalone code detector.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "corrfp/core.hpp"
#include "corrfp/correlation.hpp"
#include "corrfp/fingerprint.hpp"
#include "corrfp/rng.hpp"

namespace corrfp {

namespace streams {
inline constexpr std::uint64_t kRecipient = 1;
inline constexpr std::uint64_t kLayout = 2;
inline constexpr std::uint64_t kOverlap = 3;
}  // namespace streams

using Codeword = std::vector<std::uint8_t>;

/// Codeword i (1-based): (i-1)*r zeros followed by (c-i)*r ones.
inline Codeword codeword(const BSConfig& config, int i) {
  config.validate();
  if (i < 1 || i > config.c)
    throw ArgumentError("codeword index " + std::to_string(i) + " outside 1.." +
                        std::to_string(config.c));
  Codeword bits(config.f1(), 1);
  std::fill_n(bits.begin(), static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(config.r),
              std::uint8_t{0});
  return bits;
}

/// Codeword carried by recipient `sp` (0-based): recipients cycle through 1..c.
inline int codeword_for_recipient(std::size_t sp, int c) {
  return static_cast<int>(sp % static_cast<std::size_t>(c)) + 1;
}

/// r such that (c-1)*r is about half of the expected p*l fingerprints.
inline int auto_block_size(double p, std::size_t l, int c) {
  if (c < 2) throw ArgumentError("Boneh-Shaw c must be >= 2");
  return static_cast<int>(std::floor(p * static_cast<double>(l) / 2.0 / (c - 1)));
}

/// Draws f1 of the first recipient's fingerprints in random order.
inline CodeLayout build_layout(const Sequence& original, const FingerprintRecord& sp1_record,
                               const BSConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t f = sp1_record.positions.size();
  const std::size_t f1 = config.f1();
  if (f < f1)
    throw InsufficientFingerprintsError(
        "first copy has " + std::to_string(f) + " fingerprints but the code needs " +
        std::to_string(f1) + "; raise p or lower c, r");
  std::vector<std::size_t> idx(f);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t k = 0; k < f1; ++k) std::swap(idx[k], idx[k + rng.below(f - k)]);
  CodeLayout layout;
  layout.config = config;
  for (std::size_t k = 0; k < f1; ++k) {
    const Position j = sp1_record.positions[idx[k]];
    layout.positions.push_back(j);
    layout.fp_values.push_back(sp1_record.values[idx[k]]);
    layout.orig_values.push_back(original[j]);
  }
  return layout;
}

/// Fixed entries realising codeword i at the layout positions.
inline std::vector<std::pair<Position, State>> codeword_entries(const CodeLayout& layout, int i) {
  const Codeword bits = codeword(layout.config, i);
  std::vector<std::pair<Position, State>> entries;
  entries.reserve(bits.size());
  for (std::size_t k = 0; k < bits.size(); ++k)
    entries.emplace_back(layout.positions[k], bits[k] ? layout.fp_values[k] : layout.orig_values[k]);
  return entries;
}

/// Everything fixed after the first recipient's copy exists.
struct SharingPlan {
  Fingerprinted first;
  std::vector<std::pair<Position, State>> overlap;
  std::optional<CodeLayout> layout;
};

/// Generates recipients 2..num_sps from a plan. With `clamp_base_rate`, a
/// pre-assignment that already meets the p*l budget samples at rate 0 instead
/// of failing.
inline SharingLedger share_from_plan(const Sequence& original, const FingerprintParams& params,
                                     const CorrelationModel& model, const SharingPlan& plan,
                                     std::size_t num_sps, std::uint64_t master_seed,
                                     bool clamp_base_rate = false) {
  if (num_sps < 1) throw ArgumentError("need at least one recipient");
  SharingLedger ledger;
  ledger.original = original;
  ledger.params = params;
  ledger.layout = plan.layout;
  for (const auto& e : plan.overlap) ledger.overlap.push_back(e.first);
  std::sort(ledger.overlap.begin(), ledger.overlap.end());
  ledger.records.reserve(num_sps);

  FingerprintRecord first = plan.first.record;
  first.sp_index = 0;
  if (plan.layout) first.codeword_index = 1;
  ledger.records.push_back(std::move(first));

  for (std::size_t sp = 1; sp < num_sps; ++sp) {
    std::vector<std::pair<Position, State>> entries = plan.overlap;
    std::optional<int> w;
    if (plan.layout) {
      w = codeword_for_recipient(sp, plan.layout->config.c);
      auto cw = codeword_entries(*plan.layout, *w);
      entries.insert(entries.end(), cw.begin(), cw.end());
    }
    const Preassignment pre = Preassignment::make(original, std::move(entries));
    double base = preassigned_base_rate(params.p, original.size(), pre);
    if (clamp_base_rate) base = std::clamp(base, 0.0, std::nextafter(1.0, 0.0));
    if (!(base >= 0.0 && base < 1.0))
      throw ArgumentError("recipient " + std::to_string(sp + 1) + ": base rate " +
                          std::to_string(base) + " outside [0,1)");
    const std::uint64_t seed = derive_seed(master_seed, {streams::kRecipient, sp});
    Fingerprinted fp = fingerprint_with_rate(original, pre, base, params, model, seed);
    fp.record.sp_index = sp;
    fp.record.codeword_index = w;
    ledger.records.push_back(std::move(fp.record));
  }
  return ledger;
}

inline Fingerprinted first_recipient_copy(const Sequence& original,
                                          const FingerprintParams& params,
                                          const CorrelationModel& model,
                                          std::uint64_t master_seed) {
  return fingerprint_alg1(original, params, model,
                          derive_seed(master_seed, {streams::kRecipient, 0}));
}

/// Independent correlation-aware copies, no code embedded.
inline SharingLedger share_independent(const Sequence& original, const FingerprintParams& params,
                                       const CorrelationModel& model, std::size_t num_sps,
                                       std::uint64_t master_seed) {
  SharingPlan plan{first_recipient_copy(original, params, model, master_seed), {}, std::nullopt};
  return share_from_plan(original, params, model, plan, num_sps, master_seed);
}

/// Full pipeline: first copy, secret layout, then every later recipient gets
/// its codeword pre-assigned and the remaining fingerprints sampled.
inline SharingLedger share_all(const Sequence& original, const FingerprintParams& params,
                               const CorrelationModel& model, const BSConfig& config,
                               std::size_t num_sps, std::uint64_t master_seed) {
  SharingPlan plan{first_recipient_copy(original, params, model, master_seed), {}, std::nullopt};
  plan.layout = build_layout(original, plan.first.record, config,
                             derive_seed(master_seed, {streams::kLayout}));
  return share_from_plan(original, params, model, plan, num_sps, master_seed);
}

/// Copies that carry only the codeword, the code used on its own.
inline SharingLedger share_standalone(const Sequence& original, const FingerprintParams& params,
                                      const CorrelationModel& model, const BSConfig& config,
                                      std::size_t num_sps, std::uint64_t master_seed) {
  if (num_sps < 1) throw ArgumentError("need at least one recipient");
  Fingerprinted first = first_recipient_copy(original, params, model, master_seed);
  SharingLedger ledger;
  ledger.original = original;
  ledger.params = params;
  ledger.layout = build_layout(original, first.record, config,
                               derive_seed(master_seed, {streams::kLayout}));
  for (std::size_t sp = 0; sp < num_sps; ++sp) {
    const int w = codeword_for_recipient(sp, config.c);
    Sequence copy = original;
    for (auto [j, v] : codeword_entries(*ledger.layout, w)) copy[j] = v;
    FingerprintRecord rec = diff_fingerprints(original, copy);
    rec.sp_index = sp;
    rec.seed = sp == 0 ? first.record.seed : 0;
    rec.codeword_index = w;
    ledger.records.push_back(std::move(rec));
  }
  return ledger;
}

enum class BlockClass { kOnes, kZeros, kNeither };

inline const char* to_string(BlockClass b) {
  switch (b) {
    case BlockClass::kOnes: return "B1";
    case BlockClass::kZeros: return "BR";
    case BlockClass::kNeither: return "neither";
  }
  return "?";
}

/// Strict-majority classification of block b (1-based) of the leaked copy.
inline BlockClass classify_block(const Sequence& leaked, const CodeLayout& layout, int b) {
  const int c = layout.config.c;
  const auto r = static_cast<std::size_t>(layout.config.r);
  if (b < 1 || b > c - 1)
    throw ArgumentError("block " + std::to_string(b) + " outside 1.." + std::to_string(c - 1));
  std::size_t ones = 0, zeros = 0;
  for (std::size_t k = static_cast<std::size_t>(b - 1) * r; k < static_cast<std::size_t>(b) * r; ++k) {
    const Position j = layout.positions[k];
    if (j >= leaked.size()) throw DimensionError("layout position beyond leaked copy");
    const State y = leaked[j];
    if (y == layout.fp_values[k]) ++ones;
    else if (y == layout.orig_values[k]) ++zeros;
  }
  if (2 * ones > r) return BlockClass::kOnes;
  if (2 * zeros > r) return BlockClass::kZeros;
  return BlockClass::kNeither;
}

/// Codeword accused by the code alone: the first block of ones that follows a
/// block that is not ones. Returns 1 when no transition exists.
inline int bs_standalone_detect(const Sequence& leaked, const CodeLayout& layout) {
  const int c = layout.config.c;
  std::vector<BlockClass> cls(static_cast<std::size_t>(c));  // index b, 1..c-1
  for (int b = 1; b < c; ++b) cls[static_cast<std::size_t>(b)] = classify_block(leaked, layout, b);
  if (cls[1] == BlockClass::kOnes) return 1;
  for (int i = 2; i < c; ++i)
    if (cls[static_cast<std::size_t>(i - 1)] != BlockClass::kOnes &&
        cls[static_cast<std::size_t>(i)] == BlockClass::kOnes)
      return i;
  if (cls[static_cast<std::size_t>(c - 1)] == BlockClass::kZeros) return c;
  return 1;
}

}  // namespace corrfp
