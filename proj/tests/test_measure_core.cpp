#include <gtest/gtest.h>

#include <random>

#include <varmeas/measure_core.hpp>

#include "oracles.hpp"

using namespace varmeas;

namespace {

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> w(n);
  for (auto& x : w) x = u(rng);
  return w;
}

std::vector<double> as_vec(const SignedMeasure& m) { return {m.weights().begin(), m.weights().end()}; }

}  // namespace

TEST(AtomSpace, RejectsEmptySpace) { EXPECT_THROW(AtomSpace(0), InvalidArgument); }

TEST(AtomSpace, LabelCountMustMatch) { EXPECT_THROW(AtomSpace(2, {"a"}), InvalidArgument); }

TEST(MeasurableSet, AlgebraOperations) {
  const auto a = MeasurableSet::from_mask(5, 0b00110);
  const auto b = MeasurableSet::from_mask(5, 0b01100);
  EXPECT_EQ((a | b).indices(), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ((a & b).indices(), (std::vector<std::size_t>{2}));
  EXPECT_EQ(a.complement().indices(), (std::vector<std::size_t>{0, 3, 4}));
  EXPECT_TRUE(a.disjoint_from(a.complement()));
  EXPECT_TRUE((a & b).subset_of(a));
  EXPECT_THROW(a | MeasurableSet::full(4), SpaceMismatch);
}

TEST(MeasurableSet, IndexOutOfRange) {
  const std::vector<std::size_t> idx{0, 7};
  EXPECT_THROW(MeasurableSet::from_indices(4, idx), InvalidArgument);
}

TEST(SignedMeasure, RejectsNonFiniteWeights) {
  EXPECT_THROW(SignedMeasure({1.0, std::nan("")}), InvalidArgument);
  EXPECT_THROW(SignedMeasure({1.0, INFINITY}), InvalidArgument);
}

TEST(SignedMeasure, EvalOnSets) {
  const SignedMeasure m({0.5, -0.25, 1.0});
  EXPECT_DOUBLE_EQ(eval(m, MeasurableSet::from_mask(3, 0b101)), 1.5);
  EXPECT_DOUBLE_EQ(eval(m, MeasurableSet::empty(3)), 0.0);
  EXPECT_THROW(eval(m, MeasurableSet::full(4)), SpaceMismatch);
}

TEST(Jordan, WorkedExample) {
  const SignedMeasure m({2.0, -1.0, 0.0, 3.0});
  const auto j = jordan(m);
  EXPECT_EQ(as_vec(j.pos), (std::vector<double>{2.0, 0.0, 0.0, 3.0}));
  EXPECT_EQ(as_vec(j.neg), (std::vector<double>{0.0, 1.0, 0.0, 0.0}));
  EXPECT_DOUBLE_EQ(m.total_variation(), 6.0);
}

TEST(Jordan, ReconstructionAndDisjointSupportsProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 12;
    const SignedMeasure m(random_weights(rng, n, -1.0, 1.0));
    const auto j = jordan(m);
    EXPECT_TRUE(j.pos.is_nonnegative());
    EXPECT_TRUE(j.neg.is_nonnegative());
    EXPECT_EQ(j.pos - j.neg, m);
    for (std::size_t i = 0; i < n; ++i) EXPECT_TRUE(j.pos[i] == 0.0 || j.neg[i] == 0.0);
  }
}

TEST(Hahn, SplitIsOptimalAgainstEnumeration) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + trial % 10;
    const auto w = random_weights(rng, n, -1.0, 1.0);
    const SignedMeasure m(w);
    const auto h = hahn(m);
    EXPECT_TRUE(h.p_set.disjoint_from(h.n_set));
    EXPECT_EQ(h.p_set | h.n_set, MeasurableSet::full(n));
    EXPECT_NEAR(eval(m, h.p_set), oracle::max_subset(w), 1e-12);
    EXPECT_NEAR(m.total_variation(), oracle::total_variation(w), 1e-12);
  }
}

TEST(Gaps, SupSetGapMatchesEnumeration) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + trial % 10;
    const auto a = random_weights(rng, n, -1.0, 1.0);
    const auto b = random_weights(rng, n, 0.0, 1.0);
    EXPECT_NEAR(sup_set_gap(SignedMeasure(a), SignedMeasure(b)), oracle::sup_set_gap(a, b), 1e-12);
  }
}

TEST(Gaps, SupSetGapBetweenHalfAndFullTv) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 300; ++trial) {
    const SignedMeasure a(random_weights(rng, 9, -1.0, 1.0)), b(random_weights(rng, 9, -1.0, 1.0));
    const double tv = total_variation_distance(a, b), gap = sup_set_gap(a, b);
    EXPECT_LE(0.5 * tv, gap + 1e-12);
    EXPECT_LE(gap, tv + 1e-12);
  }
}

TEST(Gaps, DyadicCoarsening) {
  const auto alg = Coarsening::dyadic(3, 1);
  EXPECT_EQ(alg.n_blocks(), 2u);
  const SignedMeasure m({1, -1, 1, -1, 2, 0, 0, 0});
  EXPECT_DOUBLE_EQ(sup_set_gap_on(m, SignedMeasure::zero(m.space()), alg), 2.0);
  EXPECT_EQ(alg.block_union(0b10).indices(), (std::vector<std::size_t>{4, 5, 6, 7}));
}

TEST(Integrate, ScalarAndVector) {
  const SignedMeasure m({0.5, 0.25, 0.25});
  const AtomFunction f({2.0, -4.0, 8.0});
  EXPECT_DOUBLE_EQ(integrate(f, m), 2.0);
  const AtomFunction g(m.space(), {1, 0, 0, 1, 1, 1}, 2);
  EXPECT_EQ(integrate_vector(g, m, MeasurableSet::full(3)), (std::vector<double>{0.75, 0.5}));
  EXPECT_THROW(integrate(g, m), DimensionMismatch);
  EXPECT_THROW(integrate(AtomFunction({1.0, 2.0}), m), SpaceMismatch);
}

TEST(Integrate, AdditiveOverDisjointSets) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 10;
    const SignedMeasure m(random_weights(rng, n, -1.0, 1.0));
    const AtomFunction f(random_weights(rng, n, -3.0, 3.0));
    const auto a = MeasurableSet::from_mask(n, rng() & 0x3ff);
    EXPECT_NEAR(integrate(f, m, a) + integrate(f, m, a.complement()), integrate(f, m), 1e-12);
  }
}

TEST(Integrate, DeviationMassUsesVariation) {
  const SignedMeasure m({0.5, -0.25, 0.25});
  const AtomFunction f({1.0, 1.0, 0.0}), g({0.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(deviation_mass(f, g, m, 0.5), 0.75);
  EXPECT_DOUBLE_EQ(deviation_mass(f, g, m, 1.0), 0.0);
}
