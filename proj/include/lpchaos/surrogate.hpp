#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lpchaos/error.hpp"
#include "lpchaos/panel.hpp"
#include "lpchaos/util.hpp"

// Surrogate chaotic system standing in for fixed-forcing climate model runs.
// Lorenz-96 forcing F plays the role of the tuning parameter.
namespace lpchaos::surrogate {

struct TuningParameter {
  double value = 0.0;
  std::string label;
};

// Row-major sequence of K-dimensional states sampled every `dt`.
struct Trajectory {
  std::size_t sites = 0;
  double dt = 0.0;
  std::vector<double> data;

  [[nodiscard]] std::size_t size() const noexcept { return sites == 0 ? 0 : data.size() / sites; }
  [[nodiscard]] std::span<const double> state(std::size_t i) const noexcept {
    return {data.data() + i * sites, sites};
  }
};

namespace detail {

inline void lorenz96_rhs(std::span<const double> x, double forcing, std::span<double> dx) noexcept {
  const std::size_t k = x.size();
  for (std::size_t i = 0; i < k; ++i) {
    const double xp1 = x[(i + 1) % k];
    const double xm1 = x[(i + k - 1) % k];
    const double xm2 = x[(i + k - 2) % k];
    dx[i] = (xp1 - xm2) * xm1 - x[i] + forcing;
  }
}

}  // namespace detail

// Fixed-step RK4 integration of dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F.
// Returns n_steps + 1 states including x0. When `perturbation` > 0 the initial
// state is jittered by N(0, perturbation^2) noise drawn from `seed`.
[[nodiscard]] inline Trajectory integrate_lorenz96(double forcing, std::size_t sites, double dt, std::size_t n_steps,
                                                   std::span<const double> x0, std::uint64_t seed = 0,
                                                   double perturbation = 0.0) {
  if (sites < 4) throw ValidationError("Lorenz-96 needs at least 4 sites");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
  if (x0.size() != sites) throw ValidationError("initial state size does not match site count");
  if (!std::isfinite(forcing)) throw ValidationError("forcing must be finite");
  for (double v : x0) {
    if (!std::isfinite(v)) throw ValidationError("initial state must be finite");
  }

  Trajectory traj{sites, dt, {}};
  traj.data.reserve((n_steps + 1) * sites);
  std::vector<double> x(x0.begin(), x0.end());
  if (perturbation > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, perturbation);
    for (double& v : x) v += noise(rng);
  }
  traj.data.insert(traj.data.end(), x.begin(), x.end());

  std::vector<double> k1(sites), k2(sites), k3(sites), k4(sites), tmp(sites);
  for (std::size_t step = 1; step <= n_steps; ++step) {
    detail::lorenz96_rhs(x, forcing, k1);
    for (std::size_t i = 0; i < sites; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    detail::lorenz96_rhs(tmp, forcing, k2);
    for (std::size_t i = 0; i < sites; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    detail::lorenz96_rhs(tmp, forcing, k3);
    for (std::size_t i = 0; i < sites; ++i) tmp[i] = x[i] + dt * k3[i];
    detail::lorenz96_rhs(tmp, forcing, k4);
    for (std::size_t i = 0; i < sites; ++i) {
      x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(x[i])) throw IntegrationDiverged(step);
    }
    traj.data.insert(traj.data.end(), x.begin(), x.end());
  }
  return traj;
}

struct Observable {
  int variable = kSiteValue;  // kSiteValue or kLocalEnergy
  int site = 0;
};

// Arithmetic season means of each observable; a trailing partial season is dropped.
[[nodiscard]] inline Panel seasonal_aggregate(const Trajectory& traj, int season_length,
                                              std::span<const Observable> observables) {
  if (observables.empty()) throw ValidationError("no observables requested");
  if (season_length < 1) throw ValidationError("season length must be at least 1");
  if (traj.size() < static_cast<std::size_t>(season_length)) {
    throw ValidationError("trajectory shorter than one season");
  }
  const int n_seasons = static_cast<int>(traj.size() / static_cast<std::size_t>(season_length));
  Panel panel(0, n_seasons);
  for (const Observable& obs : observables) {
    if (obs.site < 0 || static_cast<std::size_t>(obs.site) >= traj.sites) {
      throw ValidationError("observable site " + std::to_string(obs.site) + " out of range");
    }
    if (obs.variable != kSiteValue && obs.variable != kLocalEnergy) {
      throw ValidationError("unsupported observable variable " + std::to_string(obs.variable));
    }
    std::vector<double> means(static_cast<std::size_t>(n_seasons));
    for (int s = 0; s < n_seasons; ++s) {
      double sum = 0.0;
      for (int j = 0; j < season_length; ++j) {
        const double v = traj.state(static_cast<std::size_t>(s * season_length + j))[static_cast<std::size_t>(obs.site)];
        sum += obs.variable == kSiteValue ? v : 0.5 * v * v;
      }
      means[static_cast<std::size_t>(s)] = sum / season_length;
    }
    panel.set_series({obs.variable, obs.site}, std::move(means));
  }
  return panel;
}

// Region-difference index: per season, mean over region_a minus mean over region_b.
[[nodiscard]] inline std::vector<double> synth_index(const Panel& panel, int variable, std::span<const int> region_a,
                                                     std::span<const int> region_b) {
  if (region_a.empty() || region_b.empty()) throw ValidationError("index regions must be non-empty");
  const std::set<int> a(region_a.begin(), region_a.end());
  for (int s : region_b) {
    if (a.contains(s)) throw ValidationError("index regions must be disjoint");
  }
  for (auto region : {region_a, region_b}) {
    for (int s : region) {
      if (!panel.has({variable, s})) throw ValidationError("unknown site id " + std::to_string(s));
    }
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(panel.n_seasons()));
  for (int t = panel.first_season(); t < panel.seasons().end; ++t) {
    double ma = 0.0;
    double mb = 0.0;
    for (int s : region_a) ma += panel.at({variable, s}, t);
    for (int s : region_b) mb += panel.at({variable, s}, t);
    out.push_back(ma / static_cast<double>(region_a.size()) - mb / static_cast<double>(region_b.size()));
  }
  return out;
}

// Earliest start s where every summary has |trend slope| < slope_tol over [s, s + window).
[[nodiscard]] inline std::size_t detect_steady_state(std::span<const std::vector<double>> summaries, int window,
                                                     double slope_tol) {
  if (summaries.empty()) throw ValidationError("no summaries to monitor");
  if (window < 2) throw ValidationError("stationarity window must be at least 2");
  const std::size_t w = static_cast<std::size_t>(window);
  std::size_t len = summaries.front().size();
  for (const auto& s : summaries) len = std::min(len, s.size());
  if (len < 2 * w) throw ValidationError("series shorter than two stationarity windows");
  for (std::size_t start = 0; start + w <= len; ++start) {
    bool ok = true;
    for (const auto& s : summaries) {
      if (std::abs(lpchaos::detail::trend_slope(std::span(s).subspan(start, w))) >= slope_tol) {
        ok = false;
        break;
      }
    }
    if (ok) return start;
  }
  throw StationarityNotReached("no stationary window found; lengthen the run");
}

[[nodiscard]] inline std::size_t detect_steady_state(const std::vector<double>& series, int window, double slope_tol) {
  return detect_steady_state(std::span(&series, 1), window, slope_tol);
}

// Grassberger-Procaccia correlation dimension: least-squares slope of
// log C(r) against log r over the supplied radii.
[[nodiscard]] inline double estimate_correlation_dimension(const Trajectory& traj, std::span<const double> radii,
                                                           std::size_t sample, std::uint64_t seed) {
  if (radii.size() < 2) throw ValidationError("need at least two radii");
  const auto [rmin, rmax] = std::minmax_element(radii.begin(), radii.end());
  if (!(*rmin > 0.0) || *rmax < 10.0 * *rmin) throw ValidationError("radii must be positive and span a decade");
  if (sample < 100) throw ValidationError("correlation dimension needs at least 100 sample points");
  if (traj.size() < 2) throw ValidationError("trajectory too short");

  std::vector<std::size_t> idx(traj.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (sample < idx.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(sample);
  }

  std::vector<double> sorted_r(radii.begin(), radii.end());
  std::sort(sorted_r.begin(), sorted_r.end());
  std::vector<double> r2(sorted_r.size());
  std::transform(sorted_r.begin(), sorted_r.end(), r2.begin(), [](double r) { return r * r; });
  std::vector<std::uint64_t> counts(sorted_r.size(), 0);
  std::uint64_t pairs = 0;
  bool any_distinct = false;
  const std::size_t k = traj.sites;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const double* pa = traj.data.data() + idx[a] * k;
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const double* pb = traj.data.data() + idx[b] * k;
      double d2 = 0.0;
      for (std::size_t i = 0; i < k; ++i) d2 += (pa[i] - pb[i]) * (pa[i] - pb[i]);
      ++pairs;
      if (d2 > 0.0) any_distinct = true;
      // counts are cumulative over the sorted radii
      const auto pos = std::upper_bound(r2.begin(), r2.end(), d2) - r2.begin();
      if (pos < static_cast<std::ptrdiff_t>(r2.size())) ++counts[static_cast<std::size_t>(pos)];
    }
  }
  if (!any_distinct) throw ValidationError("degenerate trajectory: all sampled points identical");
  for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];

  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < sorted_r.size(); ++i) {
    if (counts[i] == 0) continue;
    lx.push_back(std::log(sorted_r[i]));
    ly.push_back(std::log(static_cast<double>(counts[i]) / static_cast<double>(pairs)));
  }
  if (lx.size() < 2) throw ValidationError("too few radii with non-zero correlation sum");
  const double mx = lpchaos::detail::mean(lx);
  const double my = lpchaos::detail::mean(ly);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

struct IndexDefinition {
  std::vector<int> region_a;
  std::vector<int> region_b;
};

// Four region-difference indices spread around the ring, analogs of ENSO/PDO/AO/NAO.
[[nodiscard]] inline std::vector<IndexDefinition> default_indices(std::size_t sites) {
  std::vector<IndexDefinition> out;
  const int k = static_cast<int>(sites);
  const int block = std::max(1, k / 8);
  for (int j = 0; j < 4; ++j) {
    IndexDefinition def;
    const int a0 = (j * k) / 4;
    const int b0 = a0 + k / 8 + block / 2 + 1;
    for (int i = 0; i < block; ++i) {
      def.region_a.push_back((a0 + i) % k);
      def.region_b.push_back((b0 + i) % k);
    }
    out.push_back(std::move(def));
  }
  return out;
}

struct SurrogateConfig {
  std::size_t sites = 36;
  double dt = 0.05;
  int season_length = 20;
  int total_seasons = 600;
  int stationarity_window = 40;
  double slope_tol = 0.01;
  int min_steady_seasons = 100;
  int trailing_seasons = 100;  // summary statistic window at the end of each run
  double perturbation = 0.01;
  std::vector<IndexDefinition> indices;  // empty: default_indices(sites)
  bool estimate_dimension = false;
  std::size_t dimension_sample = 1000;
  std::uint64_t seed = 1;
};

struct AttractorEstimate {
  TuningParameter parameter;
  Panel panel;  // raw seasonal values, first season == steady_start
  int steady_start = 0;
  std::optional<double> dimension_estimate;
  double summary = 0.0;  // trailing mean local energy, the temperature analog
  std::uint64_t seed = 0;
};

// Full surrogate run for one parameter value: integrate, aggregate, append indices.
// Returns the raw panel and the trajectory.
struct SurrogateRun {
  Panel panel;
  Trajectory trajectory;
};

[[nodiscard]] inline SurrogateRun simulate(double forcing, const SurrogateConfig& cfg, std::uint64_t seed) {
  if (cfg.season_length < 1 || cfg.total_seasons < 1) throw ValidationError("bad season configuration");
  std::vector<double> x0(cfg.sites, forcing);
  x0[0] += 0.01;
  const std::size_t n_steps = static_cast<std::size_t>(cfg.total_seasons) * static_cast<std::size_t>(cfg.season_length);
  Trajectory traj = integrate_lorenz96(forcing, cfg.sites, cfg.dt, n_steps, x0, seed, cfg.perturbation);

  std::vector<Observable> observables;
  for (int v : {kSiteValue, kLocalEnergy}) {
    for (std::size_t s = 0; s < cfg.sites; ++s) observables.push_back({v, static_cast<int>(s)});
  }
  Panel panel = seasonal_aggregate(traj, cfg.season_length, observables);
  const auto indices = cfg.indices.empty() ? default_indices(cfg.sites) : cfg.indices;
  for (std::size_t j = 0; j < indices.size(); ++j) {
    panel.set_series({kIndex, static_cast<int>(j)},
                     synth_index(panel, kSiteValue, indices[j].region_a, indices[j].region_b));
  }
  return {std::move(panel), std::move(traj)};
}

// Per-variable site-mean summaries in units of the pooled per-site sd
// measured over the second half of the run.
[[nodiscard]] inline std::vector<std::vector<double>> stationarity_summaries(const Panel& panel, std::size_t sites) {
  std::vector<std::vector<double>> out;
  const int n = panel.n_seasons();
  for (int v : {kSiteValue, kLocalEnergy}) {
    std::vector<double> mean_series(static_cast<std::size_t>(n), 0.0);
    double ss = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < sites; ++s) {
      const auto& x = panel.series({v, static_cast<int>(s)});
      for (int t = 0; t < n; ++t) mean_series[static_cast<std::size_t>(t)] += x[static_cast<std::size_t>(t)] / static_cast<double>(sites);
      const auto tail = std::span(x).subspan(static_cast<std::size_t>(n / 2));
      const double m = lpchaos::detail::mean(tail);
      for (double val : tail) ss += (val - m) * (val - m);
      count += tail.size() - 1;
    }
    const double scale = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(count, 1)));
    for (double& val : mean_series) val /= scale > 0.0 ? scale : 1.0;
    out.push_back(std::move(mean_series));
  }
  return out;
}

// Radii between the 1% and 20% quantiles of sampled pairwise distances.
[[nodiscard]] inline std::vector<double> auto_radii(const Trajectory& traj, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, traj.size() - 1);
  std::vector<double> d;
  for (int i = 0; i < 4000; ++i) {
    const auto a = traj.state(pick(rng));
    const auto b = traj.state(pick(rng));
    double d2 = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d2 += (a[j] - b[j]) * (a[j] - b[j]);
    if (d2 > 0.0) d.push_back(std::sqrt(d2));
  }
  std::sort(d.begin(), d.end());
  if (d.empty()) return {};
  const double lo = d[d.size() / 100];
  const double hi = std::max(d[d.size() / 5], 10.0 * lo);
  std::vector<double> radii;
  for (int i = 0; i < 6; ++i) radii.push_back(lo * std::pow(hi / lo, i / 5.0));
  return radii;
}

[[nodiscard]] inline AttractorEstimate build_attractor(const TuningParameter& param, const SurrogateConfig& cfg) {
  const std::uint64_t seed = derive_seed(cfg.seed, param.label);
  SurrogateRun run = simulate(param.value, cfg, seed);
  const auto summaries = stationarity_summaries(run.panel, cfg.sites);
  const auto start = static_cast<int>(detect_steady_state(summaries, cfg.stationarity_window, cfg.slope_tol));
  if (run.panel.n_seasons() - start < cfg.min_steady_seasons) {
    throw StationarityNotReached("only " + std::to_string(run.panel.n_seasons() - start) +
                                 " steady seasons; lengthen the run");
  }
  AttractorEstimate est;
  est.parameter = param;
  est.steady_start = start;
  est.seed = seed;
  est.panel = run.panel.slice(start, run.panel.seasons().end);

  const int trail = std::min(cfg.trailing_seasons, est.panel.n_seasons());
  double energy = 0.0;
  for (std::size_t s = 0; s < cfg.sites; ++s) {
    const auto& e = est.panel.series({kLocalEnergy, static_cast<int>(s)});
    energy += lpchaos::detail::mean(std::span(e).last(static_cast<std::size_t>(trail)));
  }
  est.summary = energy / static_cast<double>(cfg.sites);

  if (cfg.estimate_dimension) {
    const std::size_t first_state = static_cast<std::size_t>(start) * static_cast<std::size_t>(cfg.season_length);
    Trajectory steady{cfg.sites, cfg.dt,
                      std::vector<double>(run.trajectory.data.begin() + static_cast<std::ptrdiff_t>(first_state * cfg.sites),
                                          run.trajectory.data.end())};
    const auto radii = auto_radii(steady, derive_seed(seed, "radii"));
    if (radii.size() >= 2) {
      est.dimension_estimate =
          estimate_correlation_dimension(steady, radii, cfg.dimension_sample, derive_seed(seed, "dimension"));
    }
  }
  return est;
}

// One attractor estimate per parameter, sorted by parameter value.
[[nodiscard]] inline std::vector<AttractorEstimate> build_attractor_library(std::vector<TuningParameter> params,
                                                                            const SurrogateConfig& cfg) {
  std::set<double> values;
  std::set<std::string> labels;
  for (const auto& p : params) {
    if (!std::isfinite(p.value)) throw ValidationError("tuning parameter must be finite");
    if (!values.insert(p.value).second) throw ValidationError("duplicate tuning parameter value " + p.label);
    if (!labels.insert(p.label).second) throw ValidationError("duplicate tuning parameter label " + p.label);
  }
  std::sort(params.begin(), params.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
  std::vector<AttractorEstimate> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    try {
      out.push_back(build_attractor(p, cfg));
    } catch (const Error& e) {
      throw StageError("surrogate-dynamics", "parameter " + p.label + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lpchaos::surrogate
