#pragma once

// Shared domain types: alphabets, sequences, fingerprint records and the
// sharing ledger.
//
// Conventions used throughout the library:
//   * states are integer coded 0..m-1, the removed-point marker is -1;
//   * data positions and recipient indices are 0-based in the C++ API and
//     1-based in every external format (CSV, JSON, CLI);
//   * Boneh-Shaw codeword and block numbers are 1-based everywhere.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace corrfp {

using State = std::int32_t;
using Position = std::size_t;

/// Code of a data point excluded from a leaked copy.
inline constexpr State kRemoved = -1;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class InsufficientFingerprintsError : public Error {
 public:
  using Error::Error;
};

class UndefinedError : public Error {
 public:
  using Error::Error;
};

class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(int m) : m_(m) {
    if (m < 2) throw ArgumentError("alphabet needs at least 2 states");
  }

  int size() const { return m_; }
  bool contains(State s) const { return s >= 0 && s < m_; }

  std::vector<State> states() const {
    std::vector<State> out(static_cast<std::size_t>(m_));
    for (int k = 0; k < m_; ++k) out[static_cast<std::size_t>(k)] = k;
    return out;
  }

  friend bool operator==(const Alphabet&, const Alphabet&) = default;

 private:
  int m_ = 2;
};

struct Sequence {
  Alphabet alphabet;
  std::vector<State> values;

  Sequence() = default;
  Sequence(Alphabet a, std::vector<State> v) : alphabet(a), values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  State operator[](Position j) const { return values[j]; }
  State& operator[](Position j) { return values[j]; }

  /// Throws unless every value is a state of the alphabet (or d0 when
  /// `allow_removed`).
  void validate(bool allow_removed = false) const {
    if (values.empty()) throw ArgumentError("sequence must not be empty");
    for (State v : values) {
      if (alphabet.contains(v)) continue;
      if (allow_removed && v == kRemoved) continue;
      throw ArgumentError("sequence value " + std::to_string(v) +
                          " outside alphabet of size " +
                          std::to_string(alphabet.size()));
    }
  }

  friend bool operator==(const Sequence&, const Sequence&) = default;
};

struct FingerprintRecord {
  std::size_t sp_index = 0;
  std::uint64_t seed = 0;
  std::vector<Position> positions;  // strictly increasing
  std::vector<State> values;        // shared value at each position
  std::optional<int> codeword_index;

  std::size_t count() const { return positions.size(); }

  friend bool operator==(const FingerprintRecord&,
                         const FingerprintRecord&) = default;
};

struct FingerprintParams {
  double p = 0.1;
  double theta = 0.5;
  double tau = 0.05;

  /// ceil(1/p); the tolerance keeps 1/0.1 from rounding up to 11.
  std::size_t block_size() const {
    return static_cast<std::size_t>(std::ceil(1.0 / p - 1e-9));
  }

  void validate() const {
    if (!(p > 0.0 && p < 1.0)) throw ArgumentError("p must lie in (0,1)");
    if (!(theta >= 0.0 && theta < 1.0))
      throw ArgumentError("theta must lie in [0,1)");
    if (!(tau >= 0.0)) throw ArgumentError("tau must be >= 0");
  }

  friend bool operator==(const FingerprintParams&,
                         const FingerprintParams&) = default;
};

struct BSConfig {
  int c = 10;
  int r = 5;

  std::size_t f1() const {
    return static_cast<std::size_t>(c - 1) * static_cast<std::size_t>(r);
  }

  void validate() const {
    if (c < 2) throw ArgumentError("Boneh-Shaw c must be >= 2");
    if (r < 1) throw ArgumentError("Boneh-Shaw r must be >= 1");
  }

  friend bool operator==(const BSConfig&, const BSConfig&) = default;
};

/// Secret bit-index -> data-position map of the embedded (c,r)-code. Bit k
/// lives at positions[k]; block b covers bits (b-1)*r .. b*r-1.
struct CodeLayout {
  BSConfig config;
  std::vector<Position> positions;
  std::vector<State> fp_values;    // first recipient's value ("one")
  std::vector<State> orig_values;  // original value ("zero")

  friend bool operator==(const CodeLayout&, const CodeLayout&) = default;
};

struct SharingLedger {
  Sequence original;
  std::vector<FingerprintRecord> records;
  std::optional<CodeLayout> layout;
  FingerprintParams params;
  // Positions replicated identically to every recipient (hybrid mode).
  std::vector<Position> overlap;

  std::size_t num_sps() const { return records.size(); }

  friend bool operator==(const SharingLedger&, const SharingLedger&) = default;
};

/// Positions/values where `copy` differs from `original`.
inline FingerprintRecord diff_fingerprints(const Sequence& original,
                                           const Sequence& copy) {
  if (original.size() != copy.size())
    throw DimensionError("diff_fingerprints: length " +
                         std::to_string(original.size()) + " vs " +
                         std::to_string(copy.size()));
  if (!(original.alphabet == copy.alphabet))
    throw DimensionError("diff_fingerprints: alphabet mismatch");
  FingerprintRecord rec;
  for (Position j = 0; j < original.size(); ++j) {
    if (copy[j] != original[j]) {
      rec.positions.push_back(j);
      rec.values.push_back(copy[j]);
    }
  }
  return rec;
}

inline Sequence apply_record(const Sequence& original,
                             const FingerprintRecord& record) {
  if (record.positions.size() != record.values.size())
    throw DimensionError("record positions/values length mismatch");
  Sequence out = original;
  for (std::size_t k = 0; k < record.positions.size(); ++k) {
    Position j = record.positions[k];
    if (j >= out.size()) throw DimensionError("record position out of range");
    out[j] = record.values[k];
  }
  return out;
}

/// Shared copy of recipient `sp` (0-based).
inline Sequence reconstruct_copy(const SharingLedger& ledger, std::size_t sp) {
  if (sp >= ledger.records.size())
    throw NotFoundError("no record for recipient " + std::to_string(sp + 1));
  return apply_record(ledger.original, ledger.records[sp]);
}

}  // namespace corrfp
