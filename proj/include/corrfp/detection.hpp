#pragma once

// Leak attribution: similarity scores, probabilistic guilt scores and the
// combined detector that falls back on the embedded code when the leak looks
// like a collusion.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "corrfp/boneh_shaw.hpp"
#include "corrfp/core.hpp"

namespace corrfp {

enum class DetectionMethod { kSimilarity, kProbabilistic, kCombined };

inline const char* to_string(DetectionMethod m) {
  switch (m) {
    case DetectionMethod::kSimilarity: return "similarity";
    case DetectionMethod::kProbabilistic: return "probabilistic";
    case DetectionMethod::kCombined: return "combined";
  }
  return "?";
}

struct SuspectEvidence {
  std::size_t sp = 0;
  int codeword = 0;
  std::optional<BlockClass> block;           // block w
  std::optional<BlockClass> previous_block;  // block w-1
  bool passed = false;
};

struct DetectionResult {
  std::size_t accused = 0;
  std::vector<double> scores;
  std::vector<std::size_t> suspects;  // descending score
  DetectionMethod method = DetectionMethod::kSimilarity;
  std::vector<SuspectEvidence> block_evidence;
  bool fallback = false;  // no block check passed, or no similarity at all
};

namespace detail {

inline void check_leaked(const SharingLedger& ledger, const Sequence& leaked) {
  if (ledger.records.empty()) throw ArgumentError("ledger has no recipients");
  if (leaked.size() != ledger.original.size())
    throw DimensionError("leaked length " + std::to_string(leaked.size()) +
                         " does not match original length " +
                         std::to_string(ledger.original.size()));
}

/// Indices sorted by descending key, lowest index first on ties.
inline std::vector<std::size_t> rank_descending(const std::vector<double>& keys) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
  return order;
}

}  // namespace detail

/// |matched fingerprints| / |fingerprints| per recipient. A recipient without
/// fingerprints scores 0.
inline std::vector<double> similarity_scores(const SharingLedger& ledger, const Sequence& leaked) {
  detail::check_leaked(ledger, leaked);
  std::vector<double> sim(ledger.records.size(), 0.0);
  for (std::size_t i = 0; i < ledger.records.size(); ++i) {
    const FingerprintRecord& rec = ledger.records[i];
    if (rec.positions.empty()) continue;
    std::size_t matched = 0;
    for (std::size_t k = 0; k < rec.positions.size(); ++k)
      if (leaked[rec.positions[k]] == rec.values[k]) ++matched;
    sim[i] = static_cast<double>(matched) / static_cast<double>(rec.positions.size());
  }
  return sim;
}

/// Guilt evidence in log space: `certain` counts matched points held by this
/// recipient alone (a zero factor), `log_innocence` sums log(1 - 1/|V_j|)
/// over the remaining matched points.
struct GuiltEvidence {
  std::size_t certain = 0;
  double log_innocence = 0.0;

  double probability() const { return certain > 0 ? 1.0 : -std::expm1(log_innocence); }
  /// Orders by (certain, -log_innocence): a zero factor counts as an
  /// infinitesimal one, so recipients with certain points still separate.
  double rank_key() const {
    const double rest = -log_innocence;
    return static_cast<double>(certain) + rest / (1.0 + rest);
  }
};

inline std::vector<GuiltEvidence> guilt_evidence(const SharingLedger& ledger, const Sequence& leaked) {
  detail::check_leaked(ledger, leaked);
  const Sequence& x = ledger.original;
  const std::size_t l = x.size();
  const auto m = static_cast<std::size_t>(x.alphabet.size());
  const std::size_t total = ledger.records.size();

  // held[j*m + v]: recipients whose fingerprint at j has value v.
  std::vector<std::uint32_t> held(l * m, 0);
  std::vector<std::uint32_t> marked(l, 0);
  for (const FingerprintRecord& rec : ledger.records)
    for (std::size_t k = 0; k < rec.positions.size(); ++k) {
      ++held[rec.positions[k] * m + static_cast<std::size_t>(rec.values[k])];
      ++marked[rec.positions[k]];
    }

  // |V_j| for a recipient that matches y_j.
  auto holders = [&](Position j) -> std::size_t {
    const State y = leaked[j];
    if (y == x[j]) return total - marked[j];
    return held[j * m + static_cast<std::size_t>(y)];
  };
  auto accumulate = [](GuiltEvidence& e, std::size_t v, int sign) {
    if (v == 0) return;  // nobody holds y_j: base added nothing either
    if (v == 1) e.certain = static_cast<std::size_t>(static_cast<long long>(e.certain) + sign);
    else e.log_innocence += sign * std::log1p(-1.0 / static_cast<double>(v));
  };

  // Every recipient without a fingerprint at j matches wherever y_j = x_j.
  GuiltEvidence base;
  for (Position j = 0; j < l; ++j)
    if (leaked[j] != kRemoved && leaked[j] == x[j]) accumulate(base, holders(j), +1);

  std::vector<GuiltEvidence> out(total, base);
  for (std::size_t i = 0; i < total; ++i) {
    const FingerprintRecord& rec = ledger.records[i];
    for (std::size_t k = 0; k < rec.positions.size(); ++k) {
      const Position j = rec.positions[k];
      const State y = leaked[j];
      if (y == kRemoved) continue;
      if (y == x[j]) accumulate(out[i], holders(j), -1);
      else if (y == rec.values[k]) accumulate(out[i], holders(j), +1);
    }
  }
  return out;
}

/// 1 - prod over matched points of (1 - 1/|V_j|); removed points are skipped.
inline std::vector<double> probabilistic_scores(const SharingLedger& ledger, const Sequence& leaked) {
  std::vector<double> out;
  for (const GuiltEvidence& e : guilt_evidence(ledger, leaked)) out.push_back(e.probability());
  return out;
}

inline DetectionResult detect_similarity(const SharingLedger& ledger, const Sequence& leaked) {
  DetectionResult r;
  r.method = DetectionMethod::kSimilarity;
  r.scores = similarity_scores(ledger, leaked);
  r.suspects = detail::rank_descending(r.scores);
  r.accused = r.suspects.front();
  return r;
}

inline DetectionResult detect_probabilistic(const SharingLedger& ledger, const Sequence& leaked) {
  const std::vector<GuiltEvidence> ev = guilt_evidence(ledger, leaked);
  std::vector<double> keys;
  DetectionResult r;
  r.method = DetectionMethod::kProbabilistic;
  for (const GuiltEvidence& e : ev) {
    keys.push_back(e.rank_key());
    r.scores.push_back(e.probability());
  }
  r.suspects = detail::rank_descending(keys);
  r.accused = r.suspects.front();
  return r;
}

enum class ScoreSource { kSimilarity, kProbabilistic };

/// Single-leaker check first (best score above 0.5); otherwise the
/// floor(1/best) top suspects are screened with their codeword blocks.
inline DetectionResult detect_combined(const SharingLedger& ledger, const Sequence& leaked,
                                       ScoreSource source = ScoreSource::kSimilarity) {
  if (!ledger.layout) throw ArgumentError("combined detection needs a ledger with a code layout");
  DetectionResult r = source == ScoreSource::kSimilarity ? detect_similarity(ledger, leaked)
                                                         : detect_probabilistic(ledger, leaked);
  r.method = DetectionMethod::kCombined;
  const double best = r.scores[r.suspects.front()];
  if (best <= 0.0) {
    DetectionResult prob = detect_probabilistic(ledger, leaked);
    r.accused = prob.accused;
    r.suspects = {prob.accused};
    r.fallback = true;
    return r;
  }
  if (best > 0.5) {
    r.suspects.resize(1);
    return r;
  }
  const auto k = std::min(static_cast<std::size_t>(std::floor(1.0 / best)), r.suspects.size());
  r.suspects.resize(k);

  const CodeLayout& layout = *ledger.layout;
  const int c = layout.config.c;
  for (std::size_t sp : r.suspects) {
    SuspectEvidence ev;
    ev.sp = sp;
    ev.codeword = ledger.records[sp].codeword_index.value_or(codeword_for_recipient(sp, c));
    const int w = ev.codeword;
    if (w < c) ev.block = classify_block(leaked, layout, w);
    if (w > 1) ev.previous_block = classify_block(leaked, layout, w - 1);
    ev.passed = (!ev.block || *ev.block == BlockClass::kOnes) &&
                (!ev.previous_block || *ev.previous_block == BlockClass::kZeros);
    r.block_evidence.push_back(ev);
    if (ev.passed) {
      r.accused = sp;
      return r;
    }
  }
  r.accused = r.suspects.front();
  r.fallback = true;
  return r;
}

}  // namespace corrfp
