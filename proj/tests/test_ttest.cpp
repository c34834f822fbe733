#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "semdens/ttest.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace semdens;

TEST(PairedTTest, HandComputedExample) {
  const std::vector<double> a{0.9, 0.8, 0.7};
  const std::vector<double> b{0.6, 0.6, 0.6};
  const auto r = paired_t_test(a, b);
  EXPECT_EQ(r.n, 3u);
  EXPECT_NEAR(r.mean_difference, 0.2, 1e-15);
  EXPECT_NEAR(r.sd_difference, 0.1, 1e-15);
  EXPECT_NEAR(r.t, 2.0 * std::sqrt(3.0), 1e-12);
  EXPECT_EQ(r.df, 2.0);
  EXPECT_NEAR(r.p, 0.07417990022744855, 1e-12);
  EXPECT_NEAR(r.p, testkit::t_two_sided_p_quadrature(r.t, r.df), 1e-10);
}

TEST(PairedTTest, IdenticalSamplesGiveNull) {
  const std::vector<double> a{0.1, 0.5, 0.9};
  const auto r = paired_t_test(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
}

TEST(PairedTTest, ConstantDifferenceIsDegenerate) {
  const std::vector<double> a{0.9, 0.8, 0.7};
  const std::vector<double> b{0.7, 0.6, 0.5};
  try {
    paired_t_test(a, b);
    FAIL() << "expected DegenerateTTest";
  } catch (const DegenerateTTest& e) {
    EXPECT_NEAR(e.difference(), 0.2, 1e-12);
    EXPECT_NE(std::string(e.what()).find("0.2"), std::string::npos);
  }
}

TEST(PairedTTest, Errors) {
  const std::vector<double> two{0.1, 0.2};
  const std::vector<double> three{0.1, 0.2, 0.3};
  const std::vector<double> one{0.1};
  EXPECT_THROW(paired_t_test(two, three), Error);
  EXPECT_THROW(paired_t_test(one, one), Error);
}

TEST(PairedTTest, PValueMatchesQuadratureOracle) {
  testkit::Rng rng(51);
  for (int n = 0; n < 40; ++n) {
    const std::size_t size = testkit::uniform_index(rng, 2, 30);
    std::vector<double> a(size);
    std::vector<double> b(size);
    for (std::size_t i = 0; i < size; ++i) {
      a[i] = testkit::uniform(rng, 0.4, 1.0);
      b[i] = testkit::uniform(rng, 0.4, 1.0);
    }
    const auto r = paired_t_test(a, b);
    ASSERT_NEAR(r.p, testkit::t_two_sided_p_quadrature(r.t, r.df), 1e-9) << "t=" << r.t << " df=" << r.df;
  }
}
