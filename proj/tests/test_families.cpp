#include <gtest/gtest.h>

#include <varmeas/families.hpp>

#include "oracles.hpp"

using namespace varmeas;

namespace {

SignedMeasure prob(std::vector<double> w) { return SignedMeasure(std::move(w)); }

}  // namespace

TEST(DecayCertificate, EvaluatesTerms) {
  auto d = DecayCertificate::power(2.0, 1.0) + DecayCertificate::geometric(1.0, 0.5);
  EXPECT_DOUBLE_EQ(d(4), 0.5 + 0.0625);
  EXPECT_DOUBLE_EQ(DecayCertificate::zero()(7), 0.0);
  EXPECT_TRUE(DecayCertificate::power(0.0, 1.0).is_zero());
  EXPECT_DOUBLE_EQ(d.scaled(2.0)(4), 2.0 * d(4));
}

TEST(DecayCertificate, RejectsNonDecayingTerms) {
  EXPECT_THROW(DecayCertificate::power(1.0, 0.0), InvalidArgument);
  EXPECT_THROW(DecayCertificate::geometric(1.0, 1.0), InvalidArgument);
  EXPECT_THROW(DecayCertificate::power(-1.0, 1.0), InvalidArgument);
}

TEST(DecayCertificate, JsonRoundTrip) {
  const auto d = DecayCertificate::power(3.0, 2.0, "3/n^2") + DecayCertificate::geometric(0.5, 0.25, "q");
  const nlohmann::json j = d;
  const auto back = j.get<DecayCertificate>();
  for (std::size_t n : {1u, 2u, 10u, 100u}) EXPECT_DOUBLE_EQ(back(n), d(n));
}

TEST(Rng, StreamsAreDeterministicAndDistinct) {
  auto a = Rng::stream(7, 3), b = Rng::stream(7, 3), c = Rng::stream(7, 4);
  const double x = a.uniform(), y = b.uniform(), z = c.uniform();
  EXPECT_EQ(x, y);
  EXPECT_NE(x, z);
}

TEST(ConvexMix, CertificateIsSound) {
  const auto m = prob({0.25, 0.25, 0.5});
  const auto mu = prob({1.0, 0.0, 0.0});
  const auto mf = convex_mix(m, mu, DecayCertificate::power(1.0, 1.0));
  EXPECT_TRUE(verify_measure_family(mf, 512).sound);
  EXPECT_EQ(mf.at(1), mu);
  EXPECT_NEAR(total_variation_distance(mf.at(4), m), 0.25 * total_variation_distance(mu, m), 1e-15);
}

TEST(ConvexMix, ConstantFamilyHasZeroGaps) {
  const auto m = prob({0.5, 0.5});
  const auto mf = constant_measure_family(m);
  for (std::size_t n : {1u, 50u}) EXPECT_EQ(total_variation_distance(mf.at(n), m), 0.0);
}

TEST(SignedMix, CertificateIsSound) {
  const SignedMeasure m({0.5, -0.25, 0.75}), mu({-1.0, 1.0, 0.0});
  const auto mf = signed_mix(m, mu, DecayCertificate::power(1.0, 0.5));
  EXPECT_FALSE(mf.nonneg);
  EXPECT_TRUE(verify_measure_family(mf, 256).sound);
}

TEST(JordanParts, FamiliesOfParts) {
  const SignedMeasure m({0.5, -0.25}), mu({-1.0, 1.0});
  const auto mf = signed_mix(m, mu, DecayCertificate::power(1.0, 1.0));
  const auto pos = jordan_part_family(mf, true), var = variation_family(mf);
  for (std::size_t n : {1u, 3u, 40u}) {
    EXPECT_EQ(pos.at(n), jordan(mf.at(n)).pos);
    EXPECT_EQ(var.at(n), mf.at(n).abs());
  }
  EXPECT_TRUE(verify_measure_family(pos, 128).sound);
  EXPECT_TRUE(verify_measure_family(var, 128).sound);
}

TEST(Rademacher, TotalVariationOneAndCoarseCancellation) {
  const auto mf = rademacher_family(6);
  EXPECT_EQ(mf.last_index(512), 6u);
  for (std::size_t k = 1; k <= 6; ++k) {
    EXPECT_NEAR(total_variation_distance(mf.at(k), mf.limit), 1.0, 1e-12);
    EXPECT_NEAR(sup_set_gap(mf.at(k), mf.limit), 0.5, 1e-12);
    if (k >= 2) {
      EXPECT_NEAR(sup_set_gap_on(mf.at(k), mf.limit, Coarsening::dyadic(6, k - 1)), 0.0, 1e-12);
    }
  }
  EXPECT_THROW(mf.at(7), InvalidArgument);
  EXPECT_THROW(rademacher_family(0), InvalidArgument);
}

TEST(MassEscape, IntegralStaysAtOne) {
  auto [mf, ff] = mass_escape_family(AtomSpace(5));
  for (std::size_t n : {1u, 2u, 17u, 400u}) EXPECT_NEAR(integrate(ff.at(n).abs(), mf.at(n)), 1.0, 1e-12);
  EXPECT_TRUE(verify_measure_family(mf, 256).sound);
  EXPECT_TRUE(verify_function_family(ff, mf.limit, 256).sound);
}

TEST(VacuousUac, MassesAreOneEverywhere) {
  auto [mf, ff] = vacuous_uac_family(AtomSpace(3));
  EXPECT_EQ(mf.at(9).total_variation(), 3.0);
  EXPECT_EQ(ff.at(9)[2], 9.0);
}

TEST(PerturbedFunction, SupCertificateIsSound) {
  const AtomFunction f({1.0, 2.0, 3.0}), g({1.0, -1.0, 0.5});
  const auto ff = perturbed_function(f, g, DecayCertificate::power(1.0, 1.0));
  EXPECT_TRUE(verify_function_family(ff, prob({0.2, 0.3, 0.5}), 256).sound);
  EXPECT_NEAR((ff.at(10) - f).sup_norm(), 0.1, 1e-15);
}

TEST(VerifyCertificate, DetectsUnsoundCertificate) {
  const auto m = prob({0.25, 0.75});
  auto mf = convex_mix(m, prob({1.0, 0.0}), DecayCertificate::power(1.0, 1.0));
  mf.tv_cert = DecayCertificate::power(0.1, 1.0);
  const auto c = verify_measure_family(mf, 64);
  EXPECT_FALSE(c.sound);
  EXPECT_EQ(c.first_violation, 1u);
}

TEST(AssessConvergence, TailRules) {
  std::vector<double> zero_tail{1.0, 0.5, 0.0, 0.0};
  EXPECT_EQ(assess_convergence(zero_tail, std::nullopt, 1e-3).verdict, Verdict::holds);
  std::vector<double> stuck{1.0, 1.0, 1.0, 1.0};
  EXPECT_EQ(assess_convergence(stuck, std::nullopt, 1e-3).verdict, Verdict::fails);
  std::vector<double> slow{1.0, 0.5, 0.3, 1e-4};
  EXPECT_EQ(assess_convergence(slow, std::nullopt, 1e-3).verdict, Verdict::inconclusive);
  std::vector<double> under{1.0, 0.5, 0.33, 0.25};
  EXPECT_EQ(assess_convergence(under, DecayCertificate::power(1.0, 1.0), 1e-3).verdict, Verdict::holds);
  std::vector<double> over{1.0, 0.6};
  EXPECT_EQ(assess_convergence(over, DecayCertificate::power(1.0, 1.0), 1e-3).verdict, Verdict::fails);
}
