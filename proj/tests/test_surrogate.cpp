#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "lpchaos/surrogate.hpp"

using namespace lpchaos;
using namespace lpchaos::surrogate;

namespace {

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += 0.5 * v * v;
  return e;
}

std::vector<double> final_state(const Trajectory& t) {
  const auto s = t.state(t.size() - 1);
  return {s.begin(), s.end()};
}

Trajectory manual(std::size_t sites, const std::vector<std::vector<double>>& states) {
  Trajectory t{sites, 1.0, {}};
  for (const auto& s : states) t.data.insert(t.data.end(), s.begin(), s.end());
  return t;
}

}  // namespace

TEST(Lorenz96, ZeroForcingZeroStateStaysZero) {
  const std::vector<double> x0(8, 0.0);
  const auto t = integrate_lorenz96(0.0, 8, 0.05, 500, x0);
  for (double v : t.data) EXPECT_EQ(v, 0.0);
}

TEST(Lorenz96, ConstantSolutionAtForcingIsPreserved) {
  for (double f : {5.0, 8.0, 10.0}) {
    const std::vector<double> x0(36, f);
    const auto t = integrate_lorenz96(f, 36, 0.05, 10000, x0);
    ASSERT_EQ(t.size(), 10001u);
    for (double v : final_state(t)) EXPECT_NEAR(v, f, 1e-9);
  }
}

TEST(Lorenz96, EnergyDecaysAtRateTwoWithoutForcing) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  std::vector<double> x0(12);
  for (double& v : x0) v = n01(rng);
  const double dt = 0.01;
  const auto t = integrate_lorenz96(0.0, 12, dt, 500, x0);
  const double e0 = energy(t.state(0));
  double prev = e0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double e = energy(t.state(i));
    EXPECT_LT(e, prev);
    EXPECT_NEAR(e / (e0 * std::exp(-2.0 * dt * static_cast<double>(i))), 1.0, 0.01) << "step " << i;
    prev = e;
  }
}

TEST(Lorenz96, Rk4ErrorShrinksSixteenfoldWhenStepHalves) {
  std::vector<double> x0(8, 8.0);
  x0[0] += 0.5;
  x0[3] -= 0.7;
  const double horizon = 1.0;
  auto run = [&](double dt) {
    return final_state(integrate_lorenz96(8.0, 8, dt, static_cast<std::size_t>(std::lround(horizon / dt)), x0));
  };
  const auto ref = run(0.05 / 64.0);
  auto err = [&](double dt) {
    const auto x = run(dt);
    double e = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) e = std::max(e, std::abs(x[i] - ref[i]));
    return e;
  };
  const double ratio = err(0.05) / err(0.025);
  EXPECT_GT(ratio, 12.0);
  EXPECT_LT(ratio, 20.0);
}

TEST(Lorenz96, DeterministicAndSeedOnlyPerturbsInitialState) {
  const std::vector<double> x0(10, 8.0);
  const auto a = integrate_lorenz96(8.0, 10, 0.05, 200, x0, 42, 0.01);
  const auto b = integrate_lorenz96(8.0, 10, 0.05, 200, x0, 42, 0.01);
  const auto c = integrate_lorenz96(8.0, 10, 0.05, 200, x0, 43, 0.01);
  EXPECT_EQ(a.data, b.data);
  EXPECT_NE(a.data, c.data);
  const auto d = integrate_lorenz96(8.0, 10, 0.05, 200, x0, 1, 0.0);
  const auto e = integrate_lorenz96(8.0, 10, 0.05, 200, x0, 2, 0.0);
  EXPECT_EQ(d.data, e.data);
}

TEST(Lorenz96, RejectsBadArguments) {
  const std::vector<double> x3(3, 1.0);
  EXPECT_THROW((void)integrate_lorenz96(8.0, 3, 0.05, 10, x3), ValidationError);
  const std::vector<double> x4(4, 1.0);
  EXPECT_THROW((void)integrate_lorenz96(8.0, 4, 0.0, 10, x4), ValidationError);
  EXPECT_THROW((void)integrate_lorenz96(8.0, 4, -0.1, 10, x4), ValidationError);
  std::vector<double> bad(4, 1.0);
  bad[2] = kNaN;
  EXPECT_THROW((void)integrate_lorenz96(8.0, 4, 0.05, 10, bad), ValidationError);
}

TEST(Lorenz96, BlowUpReportsTheStep) {
  std::vector<double> x0(8, 1e3);
  x0[1] = -1e3;
  try {
    (void)integrate_lorenz96(8.0, 8, 1.0, 1000, x0);
    FAIL() << "expected divergence";
  } catch (const IntegrationDiverged& e) {
    EXPECT_GE(e.step(), 1u);
    EXPECT_NE(std::string(e.what()).find("step " + std::to_string(e.step())), std::string::npos);
  }
}

TEST(SeasonalAggregate, ConstantTrajectoryGivesConstantSeasons) {
  const auto t = integrate_lorenz96(6.0, 4, 0.05, 99, std::vector<double>(4, 6.0));
  const std::vector<Observable> obs{{kSiteValue, 0}, {kSiteValue, 3}};
  const auto p = seasonal_aggregate(t, 20, obs);
  EXPECT_EQ(p.n_seasons(), 5);
  for (double v : p.series({kSiteValue, 3})) EXPECT_NEAR(v, 6.0, 1e-12);
}

TEST(SeasonalAggregate, SeasonLengthOneReturnsRawSamples) {
  std::vector<double> x0{1.0, 2.0, 3.0, 4.0};
  const auto t = integrate_lorenz96(8.0, 4, 0.05, 30, x0);
  const std::vector<Observable> obs{{kSiteValue, 2}};
  const auto p = seasonal_aggregate(t, 1, obs);
  ASSERT_EQ(p.n_seasons(), 31);
  for (int s = 0; s < 31; ++s) EXPECT_EQ(p.at({kSiteValue, 2}, s), t.state(static_cast<std::size_t>(s))[2]);
}

TEST(SeasonalAggregate, LinearRampSeasonMeansAndPartialSeasonDropped) {
  std::vector<std::vector<double>> states;
  for (int i = 0; i < 14; ++i) states.push_back({static_cast<double>(i), 0.0, 0.0, 0.0});
  const auto t = manual(4, states);
  const std::vector<Observable> obs{{kSiteValue, 0}};
  const auto p = seasonal_aggregate(t, 4, obs);
  ASSERT_EQ(p.n_seasons(), 3);
  EXPECT_DOUBLE_EQ(p.at({kSiteValue, 0}, 0), 1.5);
  EXPECT_DOUBLE_EQ(p.at({kSiteValue, 0}, 1), 5.5);
  EXPECT_DOUBLE_EQ(p.at({kSiteValue, 0}, 2), 9.5);
}

TEST(SeasonalAggregate, LocalEnergyIsMeanHalfSquare) {
  const auto t = manual(4, {{1, 0, 0, 0}, {3, 0, 0, 0}});
  const std::vector<Observable> obs{{kLocalEnergy, 0}};
  EXPECT_DOUBLE_EQ(seasonal_aggregate(t, 2, obs).at({kLocalEnergy, 0}, 0), (0.5 + 4.5) / 2.0);
}

TEST(SeasonalAggregate, Errors) {
  const auto t = manual(4, {{1, 0, 0, 0}, {3, 0, 0, 0}});
  EXPECT_THROW((void)seasonal_aggregate(t, 1, std::vector<Observable>{}), ValidationError);
  EXPECT_THROW((void)seasonal_aggregate(t, 3, std::vector<Observable>{{kSiteValue, 0}}), ValidationError);
  EXPECT_THROW((void)seasonal_aggregate(t, 0, std::vector<Observable>{{kSiteValue, 0}}), ValidationError);
  EXPECT_THROW((void)seasonal_aggregate(t, 1, std::vector<Observable>{{kSiteValue, 4}}), ValidationError);
}

TEST(SynthIndex, EqualRegionsGiveZero) {
  Panel p(0, 3);
  for (int s = 0; s < 4; ++s) p.set_series({kSiteValue, s}, {1.0, 1.0, 1.0});
  const std::vector<int> a{0, 1};
  const std::vector<int> b{2, 3};
  for (double v : synth_index(p, kSiteValue, a, b)) EXPECT_EQ(v, 0.0);
}

TEST(SynthIndex, DifferenceOfRegionMeans) {
  Panel p(0, 2);
  p.set_series({kSiteValue, 0}, {1.0, 3.0});
  p.set_series({kSiteValue, 1}, {3.0, 1.0});
  p.set_series({kSiteValue, 2}, {0.5, 0.5});
  const std::vector<int> a{0, 1};
  const std::vector<int> b{2};
  const auto idx = synth_index(p, kSiteValue, a, b);
  EXPECT_DOUBLE_EQ(idx[0], 1.5);
  EXPECT_DOUBLE_EQ(idx[1], 1.5);
}

TEST(SynthIndex, MatchesDirectRecomputationOnRandomPanel) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  Panel p(5, 30);
  for (int s = 0; s < 10; ++s) {
    std::vector<double> v(30);
    for (double& x : v) x = n01(rng);
    p.set_series({kSiteValue, s}, v);
  }
  const std::vector<int> a{1, 4, 7};
  const std::vector<int> b{0, 9};
  const auto idx = synth_index(p, kSiteValue, a, b);
  for (int t = 5; t < 35; ++t) {
    const double ma = (p.at({0, 1}, t) + p.at({0, 4}, t) + p.at({0, 7}, t)) / 3.0;
    const double mb = (p.at({0, 0}, t) + p.at({0, 9}, t)) / 2.0;
    EXPECT_NEAR(idx[static_cast<std::size_t>(t - 5)], ma - mb, 1e-14);
  }
}

TEST(SynthIndex, Errors) {
  Panel p(0, 2);
  p.set_series({kSiteValue, 0}, {1.0, 1.0});
  p.set_series({kSiteValue, 1}, {1.0, 1.0});
  const std::vector<int> a{0};
  const std::vector<int> overlap{0, 1};
  const std::vector<int> unknown{5};
  const std::vector<int> none;
  EXPECT_THROW((void)synth_index(p, kSiteValue, a, overlap), ValidationError);
  EXPECT_THROW((void)synth_index(p, kSiteValue, a, unknown), ValidationError);
  EXPECT_THROW((void)synth_index(p, kSiteValue, none, a), ValidationError);
}

TEST(SteadyState, ConstantSeriesIsSteadyFromTheStart) {
  EXPECT_EQ(detect_steady_state(std::vector<double>(100, 3.0), 20, 0.01), 0u);
}

TEST(SteadyState, PureTrendNeverSettles) {
  std::vector<double> x(200);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.05 * static_cast<double>(i);
  EXPECT_THROW((void)detect_steady_state(x, 40, 0.01), StationarityNotReached);
}

TEST(SteadyState, ExponentialTransientDetectedNearAnalyticSettlingTime) {
  const double amp = 5.0;
  const double tau = 20.0;
  const double tol = 0.01;
  const int window = 40;
  // |d/dt amp*exp(-t/tau)| < tol from t* onwards
  const double t_star = tau * std::log(amp / (tau * tol));
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<double> x(400);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = amp * std::exp(-static_cast<double>(i) / tau) + noise(rng);
  const auto s = static_cast<double>(detect_steady_state(x, window, tol));
  EXPECT_LE(std::abs(s - t_star), window);
}

TEST(SteadyState, EveryMonitoredSummaryMustSettle) {
  std::vector<std::vector<double>> s(2, std::vector<double>(200, 1.0));
  for (std::size_t i = 0; i < 100; ++i) s[1][i] = 0.1 * static_cast<double>(100 - i);
  EXPECT_GE(detect_steady_state(s, 20, 0.01), 80u);
  EXPECT_THROW((void)detect_steady_state(std::vector<double>(30, 1.0), 20, 0.01), ValidationError);
}

namespace {

SurrogateConfig small_config() {
  SurrogateConfig c;
  c.sites = 12;
  c.total_seasons = 300;
  c.min_steady_seasons = 60;
  c.trailing_seasons = 60;
  return c;
}

}  // namespace

TEST(AttractorLibrary, SingleParameterMatchesSteadyStateDetection) {
  const auto cfg = small_config();
  const auto lib = build_attractor_library({{8.0, "F8"}}, cfg);
  ASSERT_EQ(lib.size(), 1u);
  const auto& a = lib.front();
  const auto run = simulate(8.0, cfg, derive_seed(cfg.seed, "F8"));
  const auto start = detect_steady_state(stationarity_summaries(run.panel, cfg.sites), cfg.stationarity_window,
                                         cfg.slope_tol);
  EXPECT_EQ(a.steady_start, static_cast<int>(start));
  // no pre-steady seasons in the panel
  EXPECT_EQ(a.panel.first_season(), a.steady_start);
  EXPECT_EQ(a.panel.seasons().end, cfg.total_seasons);
  for (const auto id : a.panel.ids()) {
    for (double v : a.panel.series(id)) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(AttractorLibrary, SortedByParameterAndDeterministic) {
  const auto cfg = small_config();
  const auto a = build_attractor_library({{9.0, "F9"}, {6.0, "F6"}}, cfg);
  const auto b = build_attractor_library({{6.0, "F6"}, {9.0, "F9"}}, cfg);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].parameter.label, "F6");
  EXPECT_EQ(a[1].parameter.label, "F9");
  EXPECT_TRUE(a[0].panel == b[0].panel);
  EXPECT_TRUE(a[1].panel == b[1].panel);
}

TEST(AttractorLibrary, DuplicateParametersRejected) {
  const auto cfg = small_config();
  EXPECT_THROW((void)build_attractor_library({{6.0, "a"}, {6.0, "b"}}, cfg), ValidationError);
  EXPECT_THROW((void)build_attractor_library({{6.0, "a"}, {7.0, "a"}}, cfg), ValidationError);
}

TEST(AttractorLibrary, SteadyEnergyNonDecreasingInForcing) {
  std::vector<double> mean_energy(6, 0.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = small_config();
    cfg.seed = seed;
    const auto lib =
        build_attractor_library({{5, "F5"}, {6, "F6"}, {7, "F7"}, {8, "F8"}, {9, "F9"}, {10, "F10"}}, cfg);
    for (std::size_t i = 0; i < lib.size(); ++i) mean_energy[i] += lib[i].summary / 5.0;
  }
  for (std::size_t i = 1; i < mean_energy.size(); ++i) EXPECT_GE(mean_energy[i], mean_energy[i - 1]);
}

TEST(AttractorLibrary, FailureNamesTheParameter) {
  auto cfg = small_config();
  cfg.min_steady_seasons = 400;  // more steady seasons than the run has
  try {
    (void)build_attractor_library({{8.0, "F8"}}, cfg);
    FAIL() << "expected failure";
  } catch (const StageError& e) {
    EXPECT_NE(std::string(e.what()).find("F8"), std::string::npos);
  }
}

TEST(CorrelationDimension, UniformSquareIsTwo) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Trajectory t{4, 1.0, {}};
  for (int i = 0; i < 10000; ++i) t.data.insert(t.data.end(), {u(rng), u(rng), 0.0, 0.0});
  const std::vector<double> radii{0.01, 0.02, 0.04, 0.07, 0.1};
  EXPECT_NEAR(estimate_correlation_dimension(t, radii, 3000, 9), 2.0, 0.2);
}

TEST(CorrelationDimension, EvenlySpacedSegmentIsOne) {
  Trajectory t{4, 1.0, {}};
  for (int i = 0; i < 10000; ++i) t.data.insert(t.data.end(), {i / 9999.0, 0.0, 0.0, 0.0});
  const std::vector<double> radii{0.005, 0.01, 0.02, 0.05, 0.1};
  EXPECT_NEAR(estimate_correlation_dimension(t, radii, 3000, 9), 1.0, 0.1);
}

TEST(CorrelationDimension, Lorenz96FiveSitesIsBoundedByEmbedding) {
  std::vector<double> x0(5, 8.0);
  x0[0] += 0.01;
  const auto full = integrate_lorenz96(8.0, 5, 0.05, 20000, x0);
  Trajectory steady{5, 0.05, std::vector<double>(full.data.begin() + 2000 * 5, full.data.end())};
  const auto radii = auto_radii(steady, 3);
  const double d = estimate_correlation_dimension(steady, radii, 2000, 4);
  EXPECT_TRUE(std::isfinite(d));
  EXPECT_GT(d, 1.0);
  EXPECT_LT(d, 5.0);
}

TEST(CorrelationDimension, Errors) {
  Trajectory same{4, 1.0, {}};
  for (int i = 0; i < 200; ++i) same.data.insert(same.data.end(), {1.0, 1.0, 1.0, 1.0});
  const std::vector<double> radii{0.1, 1.0};
  EXPECT_THROW((void)estimate_correlation_dimension(same, radii, 200, 1), ValidationError);
  const std::vector<double> narrow{0.1, 0.5};
  EXPECT_THROW((void)estimate_correlation_dimension(same, narrow, 200, 1), ValidationError);
  EXPECT_THROW((void)estimate_correlation_dimension(same, radii, 50, 1), ValidationError);
}

TEST(CorrelationDimension, AttachedToAttractorWhenRequested) {
  auto cfg = small_config();
  cfg.estimate_dimension = true;
  cfg.dimension_sample = 500;
  const auto a = build_attractor({8.0, "F8"}, cfg);
  ASSERT_TRUE(a.dimension_estimate.has_value());
  EXPECT_GT(*a.dimension_estimate, 1.0);
  EXPECT_LT(*a.dimension_estimate, static_cast<double>(cfg.sites));
}
