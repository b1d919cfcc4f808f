#include <gtest/gtest.h>

#include "test_util.hpp"

namespace corrfp {
namespace {

using testing::seq;

TEST(CorrelationModel, RejectsNonStochasticRows) {
  EXPECT_THROW(CorrelationModel(2, 2, {0.5, 0.5}, {0.6, 0.6, 0.5, 0.5}), ArgumentError);
  EXPECT_THROW(CorrelationModel(2, 2, {0.5, 0.5}, {1.2, -0.2, 0.5, 0.5}), ArgumentError);
  EXPECT_THROW(CorrelationModel(2, 2, {0.4, 0.5}, {0.5, 0.5, 0.5, 0.5}), ArgumentError);
  EXPECT_THROW(CorrelationModel(3, 2, {0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}), DimensionError);
  EXPECT_NO_THROW(CorrelationModel(2, 2, {0.5, 0.5}, {0.5, 0.5, 0.3, 0.7}));
}

TEST(Conditional, FirstPositionIsOne) {
  const CorrelationModel model = testing::stationary(4, {0.1, 0.9, 0.0, 1.0});
  for (State a = 0; a < 2; ++a)
    for (State b = 0; b < 2; ++b) EXPECT_EQ(model.conditional(0, a, b), 1.0);
  EXPECT_DOUBLE_EQ(model.conditional(2, 0, 1), 0.9);
  EXPECT_DOUBLE_EQ(model.conditional(3, 1, 1), 1.0);
  EXPECT_THROW(model.conditional(4, 0, 0), ArgumentError);
  EXPECT_THROW(model.conditional(1, 2, 0), ArgumentError);
}

TEST(Estimate, IdenticalCorpusGivesOneHotRows) {
  const std::vector<Sequence> corpus(5, seq(3, {0, 2, 1, 1}));
  const CorrelationModel model = estimate_from_corpus(corpus, 0.0);
  EXPECT_EQ(model.conditional(1, 0, 2), 1.0);
  EXPECT_EQ(model.conditional(2, 2, 1), 1.0);
  EXPECT_EQ(model.conditional(3, 1, 1), 1.0);
  EXPECT_EQ(model.marginal_first()[0], 1.0);
  // Unvisited rows fall back to uniform.
  EXPECT_DOUBLE_EQ(model.conditional(1, 1, 0), 1.0 / 3);
}

TEST(Estimate, TwoStateHandCount) {
  const std::vector<Sequence> corpus{seq(2, {0, 1}), seq(2, {0, 0})};
  const CorrelationModel model = estimate_from_corpus(corpus, 0.0);
  EXPECT_DOUBLE_EQ(model.conditional(1, 0, 0), 0.5);
  EXPECT_DOUBLE_EQ(model.conditional(1, 0, 1), 0.5);
}

TEST(Estimate, SmoothingFormula) {
  // From state 1 at position 1: two transitions to 0, one to 2.
  const std::vector<Sequence> corpus{seq(3, {1, 0}), seq(3, {1, 0}), seq(3, {1, 2}), seq(3, {0, 0})};
  const CorrelationModel model = estimate_from_corpus(corpus, 1.0);
  EXPECT_DOUBLE_EQ(model.conditional(1, 1, 0), 3.0 / 6.0);
  EXPECT_DOUBLE_EQ(model.conditional(1, 1, 1), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(model.conditional(1, 1, 2), 2.0 / 6.0);
  EXPECT_DOUBLE_EQ(model.conditional(1, 2, 0), 1.0 / 3.0);
}

TEST(Estimate, Errors) {
  EXPECT_THROW(estimate_from_corpus(std::vector<Sequence>{}, 0.0), ArgumentError);
  const std::vector<Sequence> ragged{seq(3, {0, 1}), seq(3, {0, 1, 2})};
  EXPECT_THROW(estimate_from_corpus(ragged, 0.0), DimensionError);
  const std::vector<Sequence> one{seq(3, {0, 1})};
  EXPECT_THROW(estimate_from_corpus(one, -1.0), ArgumentError);
}

TEST(Estimate, SmoothedRowsStrictlyPositiveOnRandomCorpora) {
  Rng rng(11);
  for (int round = 0; round < 30; ++round) {
    const int m = 2 + static_cast<int>(rng.below(3));
    const std::size_t l = 2 + rng.below(8);
    std::vector<Sequence> corpus;
    for (std::size_t n = 1 + rng.below(6); n > 0; --n) {
      std::vector<State> v(l);
      for (State& s : v) s = static_cast<State>(rng.below(static_cast<std::uint64_t>(m)));
      corpus.push_back(seq(m, v));
    }
    const CorrelationModel model = estimate_from_corpus(corpus, 1.0);
    for (double v : model.raw()) EXPECT_GT(v, 0.0);
    for (Position j = 1; j < l; ++j)
      for (State a = 0; a < m; ++a) {
        double sum = 0.0;
        for (double v : model.row(j, a)) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-9);
      }
  }
}

TEST(Sample, ForcedChain) {
  const CorrelationModel model(4, 3, {0.0, 0.0, 1.0},
                               {0, 1, 0, 0, 1, 0, 1, 0, 0,    // j=1: 2 -> 0
                                0, 1, 0, 1, 0, 0, 0, 1, 0,    // j=2: 0 -> 1
                                0, 0, 1, 0, 0, 1, 0, 0, 1});  // j=3: -> 2
  EXPECT_EQ(sample_sequence(model, 1).values, (std::vector<State>{2, 0, 1, 2}));
  EXPECT_EQ(sample_sequence(model, 99).values, (std::vector<State>{2, 0, 1, 2}));
}

TEST(Sample, DeterministicGivenSeed) {
  const CorrelationModel model = make_synthetic_model({200, 3, 0.3, 0.04, 5});
  EXPECT_EQ(sample_sequence(model, 17), sample_sequence(model, 17));
  EXPECT_NE(sample_sequence(model, 17), sample_sequence(model, 18));
}

TEST(Sample, EmpiricalTransitionsMatchModel) {
  const std::vector<double> matrix{0.7, 0.2, 0.1, 0.1, 0.6, 0.3, 0.25, 0.25, 0.5};
  const CorrelationModel model = testing::stationary(100001, matrix);
  const Sequence s = sample_sequence(model, 2024);
  std::vector<double> counts(9, 0.0), totals(3, 0.0);
  for (Position j = 1; j < s.size(); ++j) {
    counts[static_cast<std::size_t>(s[j - 1] * 3 + s[j])] += 1;
    totals[static_cast<std::size_t>(s[j - 1])] += 1;
  }
  for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(counts[k] / totals[k / 3], matrix[k], 0.01);
}

TEST(Sample, ReestimationRecoversModel) {
  const CorrelationModel model = make_synthetic_model({20, 3, 0.3, 0.04, 9});
  std::vector<Sequence> corpus;
  for (std::uint64_t i = 0; i < 20000; ++i) corpus.push_back(sample_sequence(model, derive_seed(1, {i})));
  const CorrelationModel est = estimate_from_corpus(corpus, 0.0);
  // Rows visited rarely carry more sampling noise; weight the check by visits.
  std::vector<double> visits(3);
  for (Position j = 1; j < 20; ++j) {
    std::fill(visits.begin(), visits.end(), 0.0);
    for (const Sequence& s : corpus) visits[static_cast<std::size_t>(s[j - 1])] += 1;
    for (State a = 0; a < 3; ++a) {
      if (visits[static_cast<std::size_t>(a)] < 2000) continue;
      for (State b = 0; b < 3; ++b)
        EXPECT_NEAR(est.conditional(j, a, b), model.conditional(j, a, b), 0.02) << j << ' ' << a << ' ' << b;
    }
  }
}

TEST(Synthetic, StrongTransitionsShareDominantState) {
  const SyntheticModelSpec spec{500, 3, 0.3, 0.04, 3};
  const CorrelationModel model = make_synthetic_model(spec);
  std::size_t strong = 0;
  for (Position j = 1; j < spec.length; ++j) {
    std::optional<State> dominant;
    bool all = true;
    for (State a = 0; a < 3; ++a) {
      const auto row = model.row(j, a);
      const auto it = std::max_element(row.begin(), row.end());
      if (std::abs(*it - 0.96) > 1e-12) {
        all = false;
        break;
      }
      const auto d = static_cast<State>(it - row.begin());
      if (dominant && *dominant != d) all = false;
      dominant = d;
    }
    if (all) ++strong;
  }
  EXPECT_NEAR(strong / 499.0, 0.3, testing::three_sigma(0.3, 499));
  EXPECT_EQ(make_synthetic_model(spec), model);
}

TEST(Synthetic, Validation) {
  EXPECT_THROW(make_synthetic_model({10, 1, 0.3, 0.04, 1}), ArgumentError);
  EXPECT_THROW(make_synthetic_model({10, 3, 1.3, 0.04, 1}), ArgumentError);
  EXPECT_THROW(make_synthetic_model({10, 3, 0.3, 1.0, 1}), ArgumentError);
}

}  // namespace
}  // namespace corrfp
