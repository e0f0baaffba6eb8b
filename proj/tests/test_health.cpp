#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "epitrace/health.hpp"

using namespace epitrace::health;

TEST(Beta4, SurvivalHoursTable) {
  EXPECT_EQ(beta4(MaterialSurface::Aerosol), 3);
  EXPECT_EQ(beta4(MaterialSurface::Copper), 4);
  EXPECT_EQ(beta4(MaterialSurface::Cardboard), 24);
  EXPECT_EQ(beta4(MaterialSurface::Other), 30);
  EXPECT_EQ(beta4(MaterialSurface::StainlessSteel), 48);
  EXPECT_EQ(beta4(MaterialSurface::Plastic), 72);
}

TEST(Beta4, NamesRoundTrip) {
  for (auto ms : kAllSurfaces) EXPECT_EQ(parse_surface(to_string(ms)), ms);
  EXPECT_FALSE(parse_surface("Wood"));
}

TEST(Probability, ZeroCoefficientsGiveHalf) {
  const ModelParams p{0, 0, 0, 0, SignConvention::StandardLogit};
  EXPECT_DOUBLE_EQ(infection_probability({-70, 300, 20, MaterialSurface::Copper}, p), 0.5);
  const ModelParams q{0, 0, 0, 0, SignConvention::AsWritten};
  EXPECT_DOUBLE_EQ(infection_probability({-40, 1, 0, MaterialSurface::Plastic}, q), 0.5);
}

TEST(Probability, LargeLogitLimits) {
  ModelParams p{800, 0, 0, 0, SignConvention::StandardLogit};
  EXPECT_EQ(infection_probability({}, p), 1.0);
  p.sign = SignConvention::AsWritten;
  EXPECT_EQ(infection_probability({}, p), 0.0);
}

TEST(Probability, PlasticSurfaceExample) {
  const ModelParams p{-3, 0, 0, 1e-4, SignConvention::StandardLogit};
  const double want = 1.0 / (1.0 + std::exp(1.32));  // z = -3 + 1e-4 * 600 * 72 = 1.32
  const double got = infection_probability({0, 0, 600, MaterialSurface::Plastic}, p);
  EXPECT_NEAR(got, 1.0 - want, 1e-12);
  EXPECT_NEAR(got, 0.789, 5e-4);
}

TEST(Probability, InteractionTermsMultiply) {
  const ModelParams p{0.5, -0.1, 0.02, 3e-5, SignConvention::StandardLogit};
  const ExposureFeatures f{-65, 400, 120, MaterialSurface::Cardboard};
  const double z = 0.5 + (-0.1 * -65) * (0.02 * 400) + (3e-5 * 120) * 24;
  EXPECT_DOUBLE_EQ(exposure_logit(f, p), z);
}

TEST(Probability, NonFiniteInputRejected) {
  const ModelParams p;
  try {
    infection_probability({std::numeric_limits<double>::quiet_NaN(), 1, 1, MaterialSurface::Other}, p);
    FAIL();
  } catch (const HealthError& e) {
    EXPECT_EQ(e.code(), HealthErrc::NonFiniteInput);
  }
  ModelParams inf = p;
  inf.beta3 = std::numeric_limits<double>::infinity();
  EXPECT_THROW(infection_probability({}, inf), HealthError);
}

// Random features and coefficients: probabilities stay in (0, 1), the two
// sign conventions are mirror images, and risk rises with delta_t_c when
// beta3 > 0 under the standard orientation.
TEST(Property, BoundsDualityMonotonicity) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> coef(-0.01, 0.01), rssi(-100, 0), dt(0, 1800);
  std::uniform_int_distribution<int> surface(0, 5);
  for (int i = 0; i < 2000; ++i) {
    ModelParams p{coef(rng) * 300, coef(rng), coef(rng), coef(rng) * 0.01, SignConvention::StandardLogit};
    const ExposureFeatures f{rssi(rng), dt(rng), dt(rng), kAllSurfaces[static_cast<std::size_t>(surface(rng))]};
    const double s = infection_probability(f, p);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    ModelParams a = p;
    a.sign = SignConvention::AsWritten;
    EXPECT_NEAR(infection_probability(f, a), 1.0 - s, 1e-12);

    p.beta3 = std::abs(p.beta3) + 1e-9;
    ExposureFeatures g = f;
    g.delta_t_c += 10.0;
    EXPECT_GE(infection_probability(g, p), infection_probability(f, p));
  }
}
