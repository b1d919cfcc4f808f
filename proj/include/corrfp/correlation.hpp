#pragma once

// Position-specific first-order correlation model between consecutive data
// points: for every position j >= 1 (0-based) an m x m row-stochastic matrix
// holding P(x_j = b | x_{j-1} = a), plus the marginal of x_0.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "corrfp/core.hpp"
#include "corrfp/rng.hpp"

namespace corrfp {

class CorrelationModel {
 public:
  static constexpr double kTolerance = 1e-9;

  CorrelationModel() = default;

  /// `cond` is laid out as [(length-1)][m][m], row-major.
  CorrelationModel(std::size_t length, int m, std::vector<double> marginal_first,
                   std::vector<double> cond)
      : length_(length),
        m_(m),
        marginal_(std::move(marginal_first)),
        cond_(std::move(cond)) {
    validate();
  }

  /// Replicates one transition matrix over every position.
  static CorrelationModel stationary(std::size_t length,
                                     std::vector<double> marginal_first,
                                     const std::vector<double>& matrix) {
    const auto m = static_cast<int>(marginal_first.size());
    if (matrix.size() != static_cast<std::size_t>(m * m))
      throw DimensionError("stationary: matrix must be m*m");
    if (length < 1) throw ArgumentError("stationary: length must be >= 1");
    std::vector<double> cond;
    cond.reserve((length - 1) * matrix.size());
    for (std::size_t j = 1; j < length; ++j)
      cond.insert(cond.end(), matrix.begin(), matrix.end());
    return CorrelationModel(length, m, std::move(marginal_first), std::move(cond));
  }

  /// Every row uniform.
  static CorrelationModel uniform(std::size_t length, int m) {
    std::vector<double> marginal(static_cast<std::size_t>(m), 1.0 / m);
    std::vector<double> matrix(static_cast<std::size_t>(m * m), 1.0 / m);
    return stationary(length, std::move(marginal), matrix);
  }

  std::size_t length() const { return length_; }
  int states() const { return m_; }
  Alphabet alphabet() const { return Alphabet(m_); }
  std::span<const double> marginal_first() const { return marginal_; }
  std::span<const double> raw() const { return cond_; }

  /// Row P(x_j = . | x_{j-1} = prev) for 1 <= j < length.
  std::span<const double> row(Position j, State prev) const {
    check_position(j);
    check_state(prev);
    return {cond_.data() + offset(j, prev), static_cast<std::size_t>(m_)};
  }

  /// P(x_j = next | x_{j-1} = prev); 1 for the first position.
  double conditional(Position j, State prev, State next) const {
    if (j == 0) {
      if (length_ == 0) throw ArgumentError("conditional: empty model");
      return 1.0;
    }
    check_position(j);
    check_state(prev);
    check_state(next);
    return cond_[offset(j, prev) + static_cast<std::size_t>(next)];
  }

  /// Unchecked lookup for hot loops; caller guarantees 1 <= j < length.
  double conditional_unchecked(Position j, State prev, State next) const {
    return cond_[offset(j, prev) + static_cast<std::size_t>(next)];
  }

  void validate() const {
    if (length_ < 1) throw ArgumentError("model length must be >= 1");
    if (m_ < 2) throw ArgumentError("model needs at least 2 states");
    const auto m = static_cast<std::size_t>(m_);
    if (marginal_.size() != m) throw DimensionError("marginal_first must have m entries");
    if (cond_.size() != (length_ - 1) * m * m)
      throw DimensionError("conditional table must hold (l-1)*m*m entries");
    check_distribution(marginal_, "marginal_first");
    for (std::size_t r = 0; r + m <= cond_.size(); r += m)
      check_distribution(std::span<const double>(cond_).subspan(r, m),
                         "row " + std::to_string(r / m));
  }

  friend bool operator==(const CorrelationModel&, const CorrelationModel&) = default;

 private:
  std::size_t offset(Position j, State prev) const {
    const auto m = static_cast<std::size_t>(m_);
    return ((j - 1) * m + static_cast<std::size_t>(prev)) * m;
  }

  void check_position(Position j) const {
    if (j < 1 || j >= length_)
      throw ArgumentError("position " + std::to_string(j) +
                          " has no transition in a model of length " +
                          std::to_string(length_));
  }

  void check_state(State s) const {
    if (s < 0 || s >= m_) throw ArgumentError("state " + std::to_string(s) + " outside model");
  }

  static void check_distribution(std::span<const double> d, const std::string& what) {
    double sum = 0.0;
    for (double v : d) {
      if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError(what + ": entry outside [0,1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kTolerance) throw ArgumentError(what + ": does not sum to 1");
  }

  std::size_t length_ = 0;
  int m_ = 0;
  std::vector<double> marginal_;
  std::vector<double> cond_;
};

/// Maximum-likelihood transition estimate with additive smoothing. Rows whose
/// denominator is zero fall back to uniform.
inline CorrelationModel estimate_from_corpus(std::span<const Sequence> corpus,
                                             double smoothing = 0.0) {
  if (corpus.empty()) throw ArgumentError("estimate_from_corpus: empty corpus");
  if (smoothing < 0.0) throw ArgumentError("smoothing must be >= 0");
  const std::size_t l = corpus.front().size();
  const int m = corpus.front().alphabet.size();
  const auto mm = static_cast<std::size_t>(m);
  for (const Sequence& s : corpus) {
    if (s.size() != l) throw DimensionError("estimate_from_corpus: ragged corpus");
    if (!(s.alphabet == corpus.front().alphabet))
      throw DimensionError("estimate_from_corpus: mixed alphabets");
    s.validate();
  }

  std::vector<double> first(mm, 0.0);
  std::vector<double> counts((l - 1) * mm * mm, 0.0);
  for (const Sequence& s : corpus) {
    first[static_cast<std::size_t>(s[0])] += 1.0;
    for (Position j = 1; j < l; ++j)
      counts[((j - 1) * mm + static_cast<std::size_t>(s[j - 1])) * mm +
             static_cast<std::size_t>(s[j])] += 1.0;
  }

  auto normalize = [&](std::span<double> row) {
    double total = std::accumulate(row.begin(), row.end(), 0.0) + smoothing * m;
    if (total <= 0.0) {
      for (double& v : row) v = 1.0 / m;
      return;
    }
    for (double& v : row) v = (v + smoothing) / total;
  };
  normalize(first);
  for (std::size_t r = 0; r < counts.size(); r += mm)
    normalize(std::span<double>(counts).subspan(r, mm));
  return CorrelationModel(l, m, std::move(first), std::move(counts));
}

inline Sequence sample_sequence(const CorrelationModel& model, std::uint64_t seed) {
  Rng rng(seed);
  Sequence out(model.alphabet(), std::vector<State>(model.length()));
  out[0] = sample_index(model.marginal_first(), rng.uniform());
  for (Position j = 1; j < model.length(); ++j)
    out[j] = sample_index(model.row(j, out[j - 1]), rng.uniform());
  return out;
}

/// Synthetic correlated corpus model. Each transition's rows are drawn from
/// Dirichlet(1..1) or, with probability `strong_fraction`, the transition is
/// near-deterministic: every row puts 1 - strong_leak on one site-specific
/// state and spreads the leak over the others (a low-diversity site).
struct SyntheticModelSpec {
  std::size_t length = 1000;
  int states = 3;
  double strong_fraction = 0.3;
  double strong_leak = 0.04;
  std::uint64_t seed = 1;
};

namespace detail {

inline void dirichlet_ones(Rng& rng, std::span<double> out) {
  double total = 0.0;
  for (double& v : out) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (double& v : out) v /= total;
}

}  // namespace detail

inline CorrelationModel make_synthetic_model(const SyntheticModelSpec& spec) {
  if (spec.length < 1) throw ArgumentError("synthetic model length must be >= 1");
  if (spec.states < 2) throw ArgumentError("synthetic model needs >= 2 states");
  if (!(spec.strong_fraction >= 0.0 && spec.strong_fraction <= 1.0))
    throw ArgumentError("strong_fraction must lie in [0,1]");
  if (!(spec.strong_leak >= 0.0 && spec.strong_leak < 1.0))
    throw ArgumentError("strong_leak must lie in [0,1)");
  Rng rng(spec.seed);
  const auto m = static_cast<std::size_t>(spec.states);
  std::vector<double> first(m);
  detail::dirichlet_ones(rng, first);
  std::vector<double> cond((spec.length - 1) * m * m);
  std::vector<double> leak(m - 1);
  for (Position j = 1; j < spec.length; ++j) {
    std::span<double> block(cond.data() + (j - 1) * m * m, m * m);
    if (rng.bernoulli(spec.strong_fraction)) {
      const std::size_t dominant = rng.below(m);
      for (std::size_t a = 0; a < m; ++a) {
        detail::dirichlet_ones(rng, leak);
        std::size_t next_leak = 0;
        for (std::size_t b = 0; b < m; ++b)
          block[a * m + b] = b == dominant ? 1.0 - spec.strong_leak : spec.strong_leak * leak[next_leak++];
      }
    } else {
      for (std::size_t a = 0; a < m; ++a) detail::dirichlet_ones(rng, block.subspan(a * m, m));
    }
  }
  return CorrelationModel(spec.length, spec.states, std::move(first), std::move(cond));
}

}  // namespace corrfp
