#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "ssrcnn/calibration.hpp"
#include "ssrcnn/error.hpp"
#include "support.hpp"

namespace ssrcnn {
namespace {

using testing::random_vector;
using testing::Rng;
using Real = boost::multiprecision::cpp_bin_float_50;

// min{2, 3 - (1 - f)^mu (-ln f)^(1/mu)} in 50-digit arithmetic.
double gamma_oracle(double f, double mu) {
  const Real rf(f), rmu(mu);
  const Real v = 3 - pow(1 - rf, rmu) * pow(-log(rf), 1 / rmu);
  return v < 2 ? static_cast<double>(v) : 2.0;
}

TEST(AdaptiveGamma, PublishedValues) {
  EXPECT_EQ(adaptive_gamma(1.0, 4), 2.0);
  EXPECT_EQ(adaptive_gamma(0.5, 4), 2.0);
  EXPECT_NEAR(adaptive_gamma(0.01, 4), 1.5928, 1e-3);
}

TEST(AdaptiveGamma, AgreesWithHighPrecisionOracle) {
  for (double mu : {1.0, 2.0, 4.0, 8.0})
    for (double f = 1e-4; f <= 1.0; f *= 1.37) EXPECT_NEAR(adaptive_gamma(f, mu, false), gamma_oracle(f, mu), 1e-13);
}

TEST(AdaptiveGamma, MonotoneInFrequency) {
  double prev = -1e300;
  for (int i = 1; i <= 1000; ++i) {
    const double g = adaptive_gamma(i / 1000.0, 4);
    EXPECT_GE(g, prev);
    EXPECT_LE(g, 2.0);
    prev = g;
  }
}

TEST(AdaptiveGamma, ClampAndDomain) {
  const double tiny = 1e-300;
  EXPECT_LT(adaptive_gamma(tiny, 1.0, false), 0.0);
  EXPECT_EQ(adaptive_gamma(tiny, 1.0, true), 0.0);
  EXPECT_THROW(adaptive_gamma(0.0), InvalidArgument);
  EXPECT_THROW(adaptive_gamma(1.5), InvalidArgument);
  EXPECT_THROW(adaptive_gamma(0.5, 0.0), InvalidArgument);
}

TEST(FrequencyTable, LaplaceSmoothing) {
  const std::vector<double> counts{8, 0, 2};
  const FrequencyTable t = FrequencyTable::from_counts(counts);
  EXPECT_DOUBLE_EQ(t[0], 9.0 / 13.0);
  EXPECT_DOUBLE_EQ(t[1], 1.0 / 13.0);
  EXPECT_DOUBLE_EQ(t[2], 3.0 / 13.0);
  EXPECT_THROW(FrequencyTable({0.5, 0.0}), InvalidArgument);
}

TEST(FrequencyTable, CountsFromScenes) {
  SceneGraph g;
  g.objects = {{Box(0.3, 0.3, 0.1, 0.1), 0}, {Box(0.6, 0.6, 0.1, 0.1), 1}, {Box(0.5, 0.2, 0.1, 0.1), 1}};
  g.relations = {{0, 1, 2}, {2, 0, 2}, {1, 2, 0}};
  const auto obj = FrequencyTable::objects_in_triplets({g}, 2, 0.0);
  EXPECT_DOUBLE_EQ(obj[0], 2.0 / 6.0);
  EXPECT_DOUBLE_EQ(obj[1], 4.0 / 6.0);
  const auto pred = FrequencyTable::predicates({g}, 3, 1.0);
  EXPECT_DOUBLE_EQ(pred[2], 3.0 / 6.0);
}

TEST(LogitAdjust, PublishedExample) {
  const FrequencyTable f({0.9, 0.1});
  const Vector z = logit_adjust(Vector{1.0, 1.0}, f, 0.3);
  EXPECT_NEAR(z[0], 1.0316, 1e-4);
  EXPECT_NEAR(z[1], 1.6908, 1e-4);
  EXPECT_GT(z[1], z[0]);
}

TEST(LogitAdjust, TauZeroIsIdentity) {
  Rng rng(1);
  const FrequencyTable f({0.5, 0.2, 0.2, 0.1});
  for (int i = 0; i < 100; ++i) {
    const Vector z = random_vector(rng, 4, 5.0);
    EXPECT_EQ(logit_adjust(z, f, 0.0), z);
  }
}

TEST(LogitAdjust, UniformFrequencyKeepsArgmax) {
  Rng rng(2);
  const FrequencyTable f(std::vector<double>(7, 1.0 / 7.0));
  for (int i = 0; i < 1000; ++i) {
    const Vector z = random_vector(rng, 7, 5.0);
    const Vector a = logit_adjust(z, f, 0.3);
    EXPECT_EQ(std::max_element(a.begin(), a.end()) - a.begin(),
              std::max_element(z.begin(), z.end()) - z.begin());
  }
}

TEST(LogitAdjust, SizeMismatchThrows) {
  EXPECT_THROW(logit_adjust(Vector{1.0}, FrequencyTable({0.5, 0.5}), 0.3), DimensionMismatch);
}

}  // namespace
}  // namespace ssrcnn
