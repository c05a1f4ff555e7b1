#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "valstab/error.hpp"
#include "valstab/stats.hpp"

using namespace valstab;

TEST(TTest, IdenticalSamplesGivePOne) {
  const std::vector<double> a{0.1, 0.3, 0.2, 0.5, 0.4};
  const auto r = t_test(a, a);
  EXPECT_DOUBLE_EQ(r.t, 0.0);
  EXPECT_DOUBLE_EQ(r.p, 1.0);
}

TEST(TTest, SeparatedSamples) {
  const std::vector<double> a{0, 0, 0, 0, 0}, b{1.0, 1.0001, 0.9999, 1.0002, 0.9998};
  EXPECT_LT(t_test(a, b).p, 1e-6);
  EXPECT_LT(t_test(a, b, TTestVariant::kWelch).p, 1e-6);
}

TEST(TTest, StudentMatchesClosedForm) {
  const std::vector<double> a{0.42, 0.47, 0.39, 0.51, 0.44}, b{0.36, 0.41, 0.33, 0.40, 0.38};
  const auto ma = oracle::moments(a), mb = oracle::moments(b);
  const double pooled = (4 * ma.var + 4 * mb.var) / 8;
  const double t = (ma.mean - mb.mean) / std::sqrt(pooled * (0.2 + 0.2));
  const auto r = t_test(a, b);
  EXPECT_NEAR(r.t, t, 1e-12);
  EXPECT_DOUBLE_EQ(r.df, 8.0);
  EXPECT_NEAR(r.p, oracle::t_two_sided_even_df(t, 8), 1e-9);
}

TEST(TTest, WelchMatchesNumericIntegral) {
  const std::vector<double> a{0.2, 0.9, 0.4, 0.7, 0.3, 0.8}, b{0.50, 0.52, 0.49, 0.51};
  const auto ma = oracle::moments(a), mb = oracle::moments(b);
  const double va = ma.var / 6, vb = mb.var / 4;
  const double t = (ma.mean - mb.mean) / std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) / (va * va / 5 + vb * vb / 3);
  const auto r = t_test(a, b, TTestVariant::kWelch);
  EXPECT_NEAR(r.df, df, 1e-12);
  EXPECT_NEAR(r.p, oracle::t_two_sided_numeric(t, df), 1e-9);
}

TEST(TTest, TooFewSamples) {
  try {
    t_test({1.0}, {1.0, 2.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewSamples);
  }
}

TEST(Fdr, Examples) {
  EXPECT_EQ(fdr_adjust({0.03}), (std::vector<double>{0.03}));
  EXPECT_EQ(fdr_adjust({0.2, 0.2, 0.2}), (std::vector<double>{0.2, 0.2, 0.2}));
  const std::vector<double> p{0.01, 0.04, 0.03, 0.005};
  const auto got = fdr_adjust(p);
  const auto want = oracle::bh(p);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-15);
  EXPECT_NEAR(got[0], 0.02, 1e-15);
  EXPECT_NEAR(got[1], 0.04, 1e-15);
}

TEST(Fdr, RejectsOutOfRange) {
  try {
    fdr_adjust({0.1, 1.2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRange);
  }
  EXPECT_THROW(fdr_adjust({std::nan("")}), Error);
}

TEST(Fdr, RandomVectorsMatchOracleAndAreMonotone) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < 200; ++c) {
    std::vector<double> p(1 + rng() % 40);
    for (auto& x : p) x = rng() % 5 == 0 ? 0.05 : u(rng);  // some exact ties
    const auto got = fdr_adjust(p);
    const auto want = oracle::bh(p);
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      order[i] = i;
      ASSERT_NEAR(got[i], want[i], 1e-15);
      ASSERT_GE(got[i], p[i]);
    }
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
    for (std::size_t k = 1; k < order.size(); ++k) ASSERT_LE(got[order[k - 1]], got[order[k]]);
  }
}

TEST(CompareModels, CellCounts) {
  std::vector<ModelSample> s;
  for (int m = 0; m < 21; ++m) s.push_back({"m" + std::to_string(m), {0.1 * m, 0.1 * m + 0.01, 0.1 * m - 0.02}});
  EXPECT_EQ(compare_models(s).cells(), 210u);
  s.resize(2);
  EXPECT_EQ(compare_models(s).cells(), 1u);
  s.resize(1);
  EXPECT_THROW(compare_models(s), Error);
}

TEST(CompareModels, SignificantWhereConstructed) {
  // Two clusters of models with identical noise; only cross-cluster pairs differ.
  const std::vector<double> noise{-0.01, 0.0, 0.01, 0.005, -0.005};
  std::vector<ModelSample> s;
  for (int m = 0; m < 4; ++m) {
    const double base = m < 2 ? 0.3 : 0.7;
    std::vector<double> v;
    for (double e : noise) v.push_back(base + e);
    s.push_back({"m" + std::to_string(m), v});
  }
  const auto cm = compare_models(s);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == j) continue;
      EXPECT_EQ(cm.significant[i][j], (i < 2) != (j < 2)) << i << "," << j;
      EXPECT_GE(cm.adjusted_p[i][j], cm.raw_p[i][j]);
      EXPECT_EQ(cm.raw_p[i][j], cm.raw_p[j][i]);
    }
  }
}

TEST(CompareModels, RelabelingEquivariance) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::vector<ModelSample> s;
  for (int m = 0; m < 6; ++m) {
    std::vector<double> v;
    for (int k = 0; k < 5; ++k) v.push_back(0.05 * m + 0.03 * g(rng));
    s.push_back({"m" + std::to_string(m), v});
  }
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  std::vector<ModelSample> shuffled;
  for (auto i : perm) shuffled.push_back(s[i]);
  const auto a = compare_models(s), b = compare_models(shuffled);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      if (i == j) continue;
      EXPECT_NEAR(b.adjusted_p[i][j], a.adjusted_p[perm[i]][perm[j]], 1e-15);
      EXPECT_EQ(b.significant[i][j], a.significant[perm[i]][perm[j]]);
    }
  }
  // Re-adjusting the same raw inputs leaves every decision unchanged.
  const auto again = compare_models(s);
  EXPECT_EQ(again.significant, a.significant);
}
