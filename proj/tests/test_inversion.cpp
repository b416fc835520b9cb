#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "lpchaos/inversion.hpp"

using namespace lpchaos;
using namespace lpchaos::inversion;

namespace {

KeyEvaluation make_key(std::mt19937_64& rng, const std::vector<double>& obs, double signal) {
  std::normal_distribution<double> n01;
  KeyEvaluation k;
  k.observed = obs;
  for (double o : obs) k.predicted.push_back(signal * o + n01(rng));
  k.n_fitted_means = 5;
  return k;
}

std::vector<double> normals(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST(SignificanceCounts, StrongKeysAllCount) {
  std::mt19937_64 rng(1);
  const auto obs = normals(rng, 40);
  std::vector<KeyEvaluation> keys;
  for (int i = 0; i < 12; ++i) keys.push_back(make_key(rng, obs, 20.0));
  EXPECT_EQ(key_significance_counts({keys}), (std::vector<std::size_t>{12}));
}

TEST(SignificanceCounts, NoiseKeysRarelyCount) {
  std::mt19937_64 rng(2);
  int zero = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto obs = normals(rng, 40);
    std::vector<KeyEvaluation> keys;
    for (int i = 0; i < 20; ++i) keys.push_back(make_key(rng, obs, 0.0));
    if (key_significance_counts({keys})[0] == 0) ++zero;
  }
  EXPECT_GE(zero, 190);
}

TEST(SignificanceCounts, HalfPlantedGivesAboutHalf) {
  std::mt19937_64 rng(3);
  const auto obs = normals(rng, 40);
  std::vector<KeyEvaluation> keys;
  for (int i = 0; i < 20; ++i) keys.push_back(make_key(rng, obs, i % 2 == 0 ? 5.0 : 0.0));
  const auto c = key_significance_counts({keys}, 0.05)[0];
  EXPECT_GE(c, 10u);
  EXPECT_LE(c, 12u);
}

TEST(SignificanceCounts, PerAttractorAndErrors) {
  std::mt19937_64 rng(4);
  const auto obs = normals(rng, 40);
  std::vector<KeyEvaluation> strong{make_key(rng, obs, 20.0), make_key(rng, obs, 20.0)};
  std::vector<KeyEvaluation> weak{make_key(rng, obs, 0.0)};
  const auto counts = key_significance_counts({strong, weak, strong});
  EXPECT_EQ(counts[0], 2u);
  EXPECT_EQ(counts[2], 2u);
  EXPECT_THROW((void)key_significance_counts({strong, {}}), ValidationError);
  // the fitted means reduce dof until the test is impossible
  strong[0].n_fitted_means = 38;
  EXPECT_THROW((void)key_significance_counts({strong}), ValidationError);
}

TEST(SmoothCounts, ConstantSpikeAndIdentity) {
  EXPECT_EQ(smooth_counts({4, 4, 4, 4}), (std::vector<double>{4, 4, 4, 4}));
  // weights 1/2, 1, 1/2 in the interior; renormalized at the ends
  const auto s = smooth_counts({0, 0, 1, 0, 0}, 1.0);
  const std::vector<double> expected{0.0, 0.25, 0.5, 0.25, 0.0};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(s[i], expected[i], 1e-15);
  EXPECT_NEAR(std::accumulate(s.begin(), s.end(), 0.0), 1.0, 1e-15);
  const auto edge = smooth_counts({3, 0, 0}, 1.0);
  EXPECT_NEAR(edge[0], 3.0 / 1.5, 1e-15);
  EXPECT_NEAR(edge[1], 1.5 / 2.0, 1e-15);
  const std::vector<double> raw{1, 5, 2, 9};
  EXPECT_EQ(smooth_counts(raw, 0.0), raw);
  EXPECT_THROW((void)smooth_counts({1, 2}), ValidationError);
  EXPECT_THROW((void)smooth_counts({1, 2, 3}, -1.0), ValidationError);
}

TEST(SmoothCounts, WiderBandwidthFlattens) {
  const std::vector<double> raw{0, 0, 0, 10, 0, 0, 0};
  const auto narrow = smooth_counts(raw, 1.0);
  const auto wide = smooth_counts(raw, 3.0);
  EXPECT_LT(wide[3], narrow[3]);
  EXPECT_GT(wide[1], narrow[1]);
}

TEST(EstimateParameter, DominantAttractor) {
  const std::vector<std::string> ids{"F5", "F6", "F7", "F8", "F9"};
  const std::vector<double> params{5, 6, 7, 8, 9};
  const std::vector<double> summaries{1, 2, 3, 4, 5};
  const auto r = estimate_parameter(ids, params, summaries, {0, 1, 9, 1, 0}, {1, 2, 10, 2, 1});
  EXPECT_EQ(r.chosen, (std::vector<std::size_t>{2}));
  EXPECT_EQ(r.estimate, 7.0);
  EXPECT_EQ(r.estimated_summary, 3.0);
}

TEST(EstimateParameter, TwoEqualPeaksAverage) {
  const std::vector<std::string> ids{"F5", "F6", "F7", "F8", "F9"};
  const std::vector<double> params{5, 6, 7, 8, 9};
  const auto r = estimate_parameter(ids, params, params, {0, 10, 5, 10, 0}, {0, 10, 5, 10, 0});
  EXPECT_EQ(r.chosen, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(r.estimate, 7.0);
}

TEST(EstimateParameter, EstimateLiesWithinChosenRange) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const std::vector<std::string> ids{"a", "b", "c", "d", "e", "f"};
  const std::vector<double> params{5, 6, 7, 8, 9, 10};
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> raw(6);
    for (double& c : raw) c = u(rng);
    const auto r = estimate_parameter(ids, params, params, raw, smooth_counts(raw), 0.8);
    double lo = 1e9;
    double hi = -1e9;
    for (std::size_t i : r.chosen) {
      lo = std::min(lo, params[i]);
      hi = std::max(hi, params[i]);
      EXPECT_GE(r.smoothed[i], 0.8 * *std::max_element(r.smoothed.begin(), r.smoothed.end()));
    }
    EXPECT_GE(r.estimate, lo - 1e-12);
    EXPECT_LE(r.estimate, hi + 1e-12);
  }
}

TEST(EstimateParameter, Errors) {
  const std::vector<std::string> ids{"a", "b", "c"};
  EXPECT_THROW((void)estimate_parameter(ids, {5, 6, 7}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}), ValidationError);
  EXPECT_THROW((void)estimate_parameter(ids, {7, 6, 5}, {0, 0, 0}, {1, 1, 1}, {1, 1, 1}), ValidationError);
  EXPECT_THROW((void)estimate_parameter(ids, {5, 6}, {0, 0}, {1, 1}, {1, 1}), ValidationError);
  EXPECT_THROW((void)estimate_parameter(ids, {5, 6, 7}, {0, 0, 0}, {1, 1, 1}, {1, 1, 1}, 0.0), ValidationError);
}
