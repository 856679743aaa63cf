#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/LU>

#include "ssr/error.hpp"
#include "ssr/gmm.hpp"
#include "support.hpp"

using namespace ssr;

namespace {

GaussianMixture figure_one_mixture() {
  return GaussianMixture::diagonal({0.2, 0.3, 0.5},
                                   {Vector2(1, -1), Vector2(-1, 0), Vector2(0, 2)},
                                   {Vector2(0.5, 0.5), Vector2(0.2, 0.2), Vector2(1, 1)});
}

GaussianMixture unit_normal(double mean = 0.0) {
  return GaussianMixture::diagonal({1.0}, {Vector1(mean)}, {Vector1(1.0)});
}

}  // namespace

TEST(GaussianMixture, RejectsWeightsThatDoNotSumToOne) {
  EXPECT_THROW(GaussianMixture::diagonal({0.5, 0.4}, {Vector1(0), Vector1(1)}, {Vector1(1), Vector1(1)}),
               ContractViolation);
}

TEST(GaussianMixture, RejectsIndefiniteCovariance) {
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(GaussianMixture({1.0}, {Vector2(0, 0)}, {bad}), ContractViolation);
}

TEST(GaussianMixture, RejectsMixedDimensions) {
  EXPECT_THROW(GaussianMixture::diagonal({0.5, 0.5}, {Vector1(0), Vector2(0, 0)}, {Vector1(1), Vector2(1, 1)}),
               ContractViolation);
}

TEST(GaussianMixture, FigureOneDensityAtThirdMean) {
  // Sum of the three closed-form Gaussian densities, evaluated at 40 digits.
  EXPECT_NEAR(figure_one_mixture().density(Vector2(0, 2)), 0.07958125146815304, 1e-15);
}

TEST(GaussianMixture, StandardNormalMode) {
  EXPECT_NEAR(unit_normal().density(Vector1(0)), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
}

TEST(GaussianMixture, FarTailIsTinyButFinite) {
  const double value = unit_normal().density(Vector1(45.0));
  EXPECT_TRUE(std::isfinite(value));
  EXPECT_LT(value, 1e-300);
  EXPECT_GE(value, 0.0);
}

TEST(GaussianMixture, DensityDimensionMismatchThrows) {
  EXPECT_THROW(unit_normal().density(Vector2(0, 0)), ContractViolation);
}

TEST(GaussianMixture, FullCovarianceDensityMatchesClosedForm) {
  Matrix cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.0;
  GaussianMixture g({1.0}, {Vector2(0.5, -0.5)}, {cov});
  EXPECT_FALSE(g.is_diagonal());
  const Vector x = Vector2(1.0, 0.3);
  const Vector d = x - Vector2(0.5, -0.5);
  const double expected = std::exp(-0.5 * d.dot(cov.inverse() * d)) / (2.0 * std::numbers::pi * std::sqrt(cov.determinant()));
  EXPECT_NEAR(g.density(x), expected, 1e-15);
}

TEST(GaussianMixture, SampleMeanConverges) {
  const auto draws = unit_normal().sample(7, 1'000'000);
  double sum = 0.0;
  for (const auto& d : draws) sum += d[0];
  EXPECT_LT(std::abs(sum / 1e6), 4.0 / std::sqrt(1e6));
}

TEST(GaussianMixture, DegenerateWeightsOnlyDrawFirstComponent) {
  auto g = GaussianMixture::diagonal({1.0, 0.0}, {Vector1(-100), Vector1(100)}, {Vector1(1), Vector1(1)});
  for (const auto& d : g.sample(3, 10'000)) ASSERT_LT(d[0], 0.0);
}

TEST(GaussianMixture, FigureOneComponentFrequencies) {
  // Figure weights with the means pushed apart so every draw can be
  // attributed to its component.
  auto g = GaussianMixture::diagonal({0.2, 0.3, 0.5}, {Vector2(100, 0), Vector2(0, 100), Vector2(-100, -100)},
                                     {Vector2(0.5, 0.5), Vector2(0.2, 0.2), Vector2(1, 1)});
  std::array<int, 3> counts{};
  for (const auto& d : g.sample(11, 100'000)) {
    if (d[0] > 50) ++counts[0];
    else if (d[1] > 50) ++counts[1];
    else ++counts[2];
  }
  EXPECT_NEAR(counts[0] / 1e5, 0.2, 0.01);
  EXPECT_NEAR(counts[1] / 1e5, 0.3, 0.01);
  EXPECT_NEAR(counts[2] / 1e5, 0.5, 0.01);
}

TEST(GaussianMixture, SamplingIsDeterministicPerSeed) {
  const auto a = figure_one_mixture().sample(42, 100);
  const auto b = figure_one_mixture().sample(42, 100);
  const auto c = figure_one_mixture().sample(43, 100);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
  EXPECT_NE(a[0], c[0]);
}

TEST(NormalCdf, KnownValues) {
  EXPECT_EQ(normal_cdf(0.0), 0.5);
  // 40-digit quadrature of the standard normal density.
  EXPECT_NEAR(normal_cdf(-0.5), 0.30853753872598690, 1e-15);
  // Tail oracle: 1 - Phi(8) = 6.2209605742717841e-16 (quadrature and the
  // asymptotic series agree to 6 digits).
  const double upper = normal_cdf(8.0);
  EXPECT_LT(upper, 1.0);
  EXPECT_NEAR(1.0 - upper, 6.2209605742717841e-16, 1.2e-16);
  EXPECT_NEAR(normal_cdf(-8.0), 6.2209605742717841e-16, 1e-28);
}

TEST(CouplingPair, RejectsUnsharedCovariances) {
  auto a = GaussianMixture::diagonal({1.0}, {Vector1(0)}, {Vector1(1.0)});
  auto b = GaussianMixture::diagonal({1.0}, {Vector1(0)}, {Vector1(2.0)});
  EXPECT_THROW(CouplingPair(a, b, Vector1(0)), ContractViolation);
}

TEST(CouplingPair, RejectsComponentCountMismatch) {
  auto a = unit_normal();
  auto b = GaussianMixture::diagonal({0.5, 0.5}, {Vector1(0), Vector1(1)}, {Vector1(1), Vector1(1)});
  EXPECT_THROW(CouplingPair(a, b, Vector1(0)), ContractViolation);
}

TEST(CouplingDelta, IdenticalDistributionsGiveZero) {
  EXPECT_EQ(coupling_delta(CouplingPair(unit_normal(), unit_normal(), Vector1(0))), 0.0);
}

TEST(CouplingDelta, UnitShiftSingleComponent) {
  // 1 - overlap of N(0,1) and N(1,1) = 1 - 2 Phi(-1/2).
  const double delta = coupling_delta(CouplingPair(unit_normal(), unit_normal(), Vector1(1.0)));
  EXPECT_NEAR(delta, 1.0 - 2.0 * 0.30853753872598690, 1e-14);
  EXPECT_NEAR(delta, 0.38292492254802620, 1e-14);
}

TEST(CouplingDelta, DegenerateComponentsContributeMinWeight) {
  auto g = GaussianMixture::diagonal({0.8, 0.2}, {Vector2(0, 0.8), Vector2(-0.8, -0.8)},
                                     {Vector2(0.3, 0.3), Vector2(0.3, 0.3)});
  EXPECT_EQ(coupling_delta(CouplingPair(g, g, Vector2(0, 0))), 0.0);

  auto h = GaussianMixture::diagonal({0.6, 0.4}, g.means(), {Vector2(0.3, 0.3), Vector2(0.3, 0.3)});
  EXPECT_NEAR(coupling_delta(CouplingPair(g, h, Vector2(0, 0))), 1.0 - (0.6 + 0.2), 1e-15);
}

TEST(CouplingDelta, ZeroWeightComponentCouplesNothing) {
  EXPECT_EQ(component_coupled_mass(0.3, 0.0, 0.0), 0.0);
  EXPECT_EQ(component_coupled_mass(0.0, 0.3, 1.0), 0.0);
}

TEST(CouplingDelta, WhiteningUsesCholeskyFactor) {
  Matrix cov(2, 2);
  cov << 4.0, 1.0, 1.0, 2.0;
  GaussianMixture g({1.0}, {Vector2(0, 0)}, {cov});
  const Vector gamma = Vector2(0.7, -0.4);
  const double mahalanobis = std::sqrt(gamma.dot(cov.inverse() * gamma));
  EXPECT_NEAR(coupling_delta(CouplingPair(g, g, gamma)), 1.0 - 2.0 * normal_cdf(-0.5 * mahalanobis), 1e-14);
}

TEST(CouplingDelta, SingleComponentReductionOnRandomInputs) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto [g, gamma] = test::random_single_component(rng, 1 + trial % 3);
    const double expected = 1.0 - 2.0 * normal_cdf(-0.5 * g.whiten(0, gamma).norm());
    ASSERT_NEAR(coupling_delta(CouplingPair(g, g, gamma)), expected, 1e-10);
  }
}

TEST(CouplingDelta, MonotoneInShiftForSingleComponent) {
  double previous = 0.0;
  for (double s = 0.0; s <= 12.0; s += 0.05) {
    const double d = coupling_delta(CouplingPair(unit_normal(), unit_normal(), Vector1(s)));
    ASSERT_GE(d, previous);
    previous = d;
  }
}

TEST(CouplingDelta, SymmetricUnderSwapAndNegatedShift) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const CouplingPair pair = test::random_pair(rng, 1 + trial % 3, 1 + trial % 3);
    const CouplingPair swapped(pair.right, pair.left, -pair.shift);
    ASSERT_NEAR(coupling_delta(pair), coupling_delta(swapped), 1e-14);
  }
}

TEST(CouplingDelta, StaysInUnitIntervalForExtremeShifts) {
  std::mt19937_64 rng(5);
  for (double scale : {0.0, 1e-12, 1e-3, 1.0, 1e3, 1e12}) {
    for (int trial = 0; trial < 20; ++trial) {
      CouplingPair pair = test::random_pair(rng, 2, 3);
      pair.shift *= scale;
      const double d = coupling_delta(pair);
      ASSERT_GE(d, 0.0);
      ASSERT_LE(d, 1.0);
    }
  }
}

TEST(CouplingDelta, ComponentMassNeverExceedsSmallerWeight) {
  for (double w : {0.05, 0.3, 0.5, 0.9}) {
    for (double wh : {0.05, 0.3, 0.5, 0.9}) {
      for (double b : {1e-9, 1e-3, 0.1, 1.0, 5.0}) {
        ASSERT_LE(component_coupled_mass(w, wh, b), std::min(w, wh) + 1e-15);
      }
    }
  }
}

TEST(CouplingDelta, ComponentMassDecreasesWithSeparation) {
  for (double w : {0.1, 0.5, 0.8}) {
    for (double wh : {0.1, 0.5, 0.8}) {
      double previous = component_coupled_mass(w, wh, 0.0);
      for (double b = 0.01; b < 10.0; b += 0.01) {
        const double m = component_coupled_mass(w, wh, b);
        ASSERT_LE(m, previous + 1e-15);
        previous = m;
      }
    }
  }
}

// The bound is usually written with eta = log(w/w_hat)/|b|^2 inside
// Phi(-(1/2 -+ eta)|b|), while the half-space derivation uses the threshold
// eta' = 1/2 - log(w/w_hat)/|b|^2. Both describe the same split point; the
// implementation must agree with the half-space rendering whichever way the
// weights are attached.
TEST(CouplingDelta, EtaConventionsDescribeTheSameSplit) {
  for (double w : {0.2, 0.5, 0.7}) {
    for (double wh : {0.3, 0.5, 0.8}) {
      for (double b : {0.05, 0.4, 1.3, 3.0}) {
        const double eta = std::log(w / wh) / (b * b);
        const double eta_split = 0.5 - std::log(w / wh) / (b * b);
        ASSERT_NEAR(eta_split, 0.5 - eta, 1e-15);
        // Mass of the half-space integration: the smaller term on each side.
        const double halfspace = w * normal_cdf((eta_split - 1.0) * b) + wh * normal_cdf(-eta_split * b);
        ASSERT_NEAR(component_coupled_mass(w, wh, b), halfspace, 1e-15);
        const double eta_hat = std::log(wh / w) / (b * b);
        const double closed = w * normal_cdf(-(0.5 - eta_hat) * b) + wh * normal_cdf(-(0.5 + eta_hat) * b);
        ASSERT_NEAR(component_coupled_mass(w, wh, b), closed, 1e-15);
      }
    }
  }
}

TEST(CouplingDelta, OppositeWeightAttachmentOvershootsTrueOverlap) {
  // Attaching w to Phi(-(1/2 - eta) b) with eta = log(w/w_hat)/b^2 claims
  // more coupled mass than the two weighted Gaussians share.
  const double w = 0.7, wh = 0.3, b = 0.2;
  const double eta = std::log(w / wh) / (b * b);
  const double swapped = w * normal_cdf(-(0.5 - eta) * b) + wh * normal_cdf(-(0.5 + eta) * b);
  EXPECT_GT(swapped, std::min(w, wh));
  EXPECT_LE(component_coupled_mass(w, wh, b), std::min(w, wh));
}

TEST(CouplingOracle, IdenticalMixturesGiveUnitMass) {
  auto g = GaussianMixture::diagonal({0.3, 0.7}, {Vector2(0, 0), Vector2(1, -1)}, {Vector2(1, 0.5), Vector2(0.3, 0.3)});
  const auto r = coupling_mass_oracle(CouplingPair(g, g, Vector2(0, 0)));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.mass, 1.0, 1e-7);
}

TEST(CouplingOracle, UnitShiftMatchesClosedForm) {
  const auto r = coupling_mass_oracle(CouplingPair(unit_normal(), unit_normal(), Vector1(1.0)));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.mass, 0.61707507745197379, 1e-7);
}

TEST(CouplingOracle, DisjointSupportsGiveNoMass) {
  const auto r = coupling_mass_oracle(CouplingPair(unit_normal(), unit_normal(), Vector1(100.0)));
  EXPECT_LE(r.mass, 1e-7);
}

TEST(CouplingOracle, RefusesHighDimension) {
  auto g = GaussianMixture::diagonal({1.0}, {Vector::Zero(4)}, {Vector::Ones(4)});
  EXPECT_THROW(coupling_mass_oracle(CouplingPair(g, g, Vector::Zero(4))), ContractViolation);
}

TEST(CouplingOracle, WarnsWhenRoundsExhausted) {
  OracleOptions tight;
  tight.max_rounds = 1;
  tight.target = 0.0;
  std::mt19937_64 rng(8);
  const auto r = coupling_mass_oracle(test::random_pair(rng, 1, 3), tight);
  ASSERT_GT(r.last_change, 0.0);
  EXPECT_FALSE(r.converged);
  EXPECT_TRUE(r.warning.has_value());
}

TEST(CouplingOracle, ClosedFormIsALowerBound) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 12; ++trial) {
    const CouplingPair pair = test::random_pair(rng, 1 + trial % 2, 1 + trial % 3);
    const auto r = coupling_mass_oracle(pair);
    ASSERT_TRUE(r.converged) << *r.warning;
    ASSERT_LE(1.0 - coupling_delta(pair), r.mass + 1e-6) << "trial " << trial;
  }
}

TEST(CouplingCompletion, AddsNoMassOnTheDiagonal) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    const CouplingPair pair = test::random_pair(rng, 1, 2);
    EXPECT_LE(completion_diagonal_mass(pair, 20'000), 1e-8);
  }
}
