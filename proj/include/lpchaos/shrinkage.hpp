#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lpchaos/error.hpp"
#include "lpchaos/util.hpp"

namespace lpchaos::shrinkage {

struct ShrinkageReport {
  double shrinkage_factor = 1.0;  // sd_predicted / sd_observed
  std::size_t n_replicates = 0;
  std::size_t n_stations = 0;
  double sd_observed = 0.0;
  double sd_predicted = 0.0;
  double signal_noise_ratio = 0.0;  // sigma_R^2 with factor = sigma_R^2 / (1 + sigma_R^2)
  double mean_correlation = 0.0;    // average sample corr(Y, X2) per station
  double mean_slope = 0.0;          // average fitted slope of Y on X2
  std::uint64_t seed = 0;
};

struct BootstrapSpec {
  std::size_t n_stations = 8;
  std::size_t n_points = 100;
  std::size_t n_train = 96;  // regression uses the first n_train points, predicts the rest
  double noise_variance = 2.0;
  std::size_t n_reps = 1000;
};

/// Measures the attenuation of regression predictions when the predictor is
/// itself noisy. Per station: X1 ~ N(0,1), X2 = X1 + N(0, v), Y = X1 + N(0, v);
/// Y is regressed on X2 over the first n_train points and the remaining points
/// are predicted. Held-out indices act as seasons: Y and predictions are averaged
/// across stations per index, and the sd of those season averages is compared
/// over replicates.
[[nodiscard]] inline ShrinkageReport bootstrap_shrinkage(const BootstrapSpec& spec, std::uint64_t seed) {
  if (spec.n_reps < 100) throw ValidationError("bootstrap_shrinkage: need at least 100 replicates");
  if (spec.n_stations < 1) throw ValidationError("bootstrap_shrinkage: need at least one station");
  if (spec.n_train < 3 || spec.n_train + 2 > spec.n_points) {
    throw ValidationError("bootstrap_shrinkage: bad train/held-out split");
  }
  if (!(spec.noise_variance > 0.0)) throw ValidationError("bootstrap_shrinkage: noise variance must be positive");

  const std::size_t n_held = spec.n_points - spec.n_train;
  const double noise_sd = std::sqrt(spec.noise_variance);
  std::vector<double> x2(spec.n_points);
  std::vector<double> y(spec.n_points);
  std::vector<double> y_season(n_held);
  std::vector<double> p_season(n_held);
  double sum_sd_y = 0.0;
  double sum_sd_p = 0.0;
  double sum_corr = 0.0;
  double sum_slope = 0.0;

  for (std::size_t rep = 0; rep < spec.n_reps; ++rep) {
    std::mt19937_64 rng(derive_seed(seed, rep));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::fill(y_season.begin(), y_season.end(), 0.0);
    std::fill(p_season.begin(), p_season.end(), 0.0);
    for (std::size_t st = 0; st < spec.n_stations; ++st) {
      for (std::size_t i = 0; i < spec.n_points; ++i) {
        const double x1 = unit(rng);
        x2[i] = x1 + noise_sd * unit(rng);
        y[i] = x1 + noise_sd * unit(rng);
      }
      const auto train_x = std::span<const double>(x2).first(spec.n_train);
      const auto train_y = std::span<const double>(y).first(spec.n_train);
      const double mx = detail::mean(train_x);
      const double my = detail::mean(train_y);
      double sxy = 0.0;
      double sxx = 0.0;
      for (std::size_t i = 0; i < spec.n_train; ++i) {
        sxy += (train_x[i] - mx) * (train_y[i] - my);
        sxx += (train_x[i] - mx) * (train_x[i] - mx);
      }
      const double slope = sxy / sxx;
      const double intercept = my - slope * mx;
      for (std::size_t h = 0; h < n_held; ++h) {
        y_season[h] += y[spec.n_train + h] / static_cast<double>(spec.n_stations);
        p_season[h] += (intercept + slope * x2[spec.n_train + h]) / static_cast<double>(spec.n_stations);
      }
      sum_slope += slope;

      const double ax = detail::mean(x2);
      const double ay = detail::mean(y);
      double cxy = 0.0;
      double cxx = 0.0;
      double cyy = 0.0;
      for (std::size_t i = 0; i < spec.n_points; ++i) {
        cxy += (x2[i] - ax) * (y[i] - ay);
        cxx += (x2[i] - ax) * (x2[i] - ax);
        cyy += (y[i] - ay) * (y[i] - ay);
      }
      sum_corr += cxy / std::sqrt(cxx * cyy);
    }
    sum_sd_y += detail::sample_sd(y_season);
    sum_sd_p += detail::sample_sd(p_season);
  }

  ShrinkageReport rep;
  rep.n_replicates = spec.n_reps;
  rep.n_stations = spec.n_stations;
  rep.seed = seed;
  rep.sd_observed = sum_sd_y / static_cast<double>(spec.n_reps);
  rep.sd_predicted = sum_sd_p / static_cast<double>(spec.n_reps);
  rep.shrinkage_factor = rep.sd_predicted / rep.sd_observed;
  rep.signal_noise_ratio = rep.shrinkage_factor / (1.0 - rep.shrinkage_factor);
  const double fits = static_cast<double>(spec.n_reps * spec.n_stations);
  rep.mean_correlation = sum_corr / fits;
  rep.mean_slope = sum_slope / fits;
  return rep;
}

// Inverts the measured shrinkage: corrected mean = raw mean / factor.
[[nodiscard]] inline double apply_bias_correction(double raw_mean, double factor) {
  if (!(factor > 0.0)) throw ValidationError("bias correction factor must be positive");
  return raw_mean / factor;
}

[[nodiscard]] inline std::vector<double> apply_bias_correction(std::span<const double> raw_means, double factor) {
  std::vector<double> out;
  out.reserve(raw_means.size());
  for (double m : raw_means) out.push_back(apply_bias_correction(m, factor));
  return out;
}

enum class SteinMode {
  kExact,         // (1 - (n-2)/|X|^2) X + mu, factor may be negative
  kPositivePart,  // factor clamped at zero
};

struct SteinResult {
  std::vector<double> values;
  double factor = 1.0;
  bool passthrough = false;  // n < 3: formula undefined, input returned unchanged
};

/// James-Stein estimate (1 - (n - 2)/|X|^2) X + mu_bc for deviations X from mu_bc.
[[nodiscard]] inline SteinResult james_stein(std::span<const double> deviations, double mu_bc,
                                             SteinMode mode = SteinMode::kExact) {
  const std::size_t n = deviations.size();
  SteinResult out;
  out.values.resize(n);
  if (n < 3) {
    out.passthrough = true;
    for (std::size_t i = 0; i < n; ++i) out.values[i] = deviations[i] + mu_bc;
    return out;
  }
  double norm2 = 0.0;
  for (double x : deviations) norm2 += x * x;
  if (norm2 == 0.0) {
    out.factor = 0.0;
    std::fill(out.values.begin(), out.values.end(), mu_bc);
    return out;
  }
  out.factor = 1.0 - static_cast<double>(n - 2) / norm2;
  if (mode == SteinMode::kPositivePart) out.factor = std::max(0.0, out.factor);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = out.factor * deviations[i] + mu_bc;
  return out;
}

// One season of station predictions: bias-correct the regional mean, then
// shrink station deviations from it.
[[nodiscard]] inline SteinResult stein_shrink(std::span<const double> station_predictions, double bias_factor,
                                              SteinMode mode = SteinMode::kExact) {
  const double mu_bc = apply_bias_correction(detail::mean(station_predictions), bias_factor);
  std::vector<double> dev(station_predictions.size());
  for (std::size_t i = 0; i < dev.size(); ++i) dev[i] = station_predictions[i] - mu_bc;
  return james_stein(dev, mu_bc, mode);
}

struct Calibration {
  double slope = 1.0;
  double intercept = 0.0;
  bool degenerate = false;  // constant predictions: climatology fallback

  [[nodiscard]] double apply(double prediction) const noexcept { return slope * prediction + intercept; }
};

enum class CalibrationDirection {
  kObservationsOnPredictions,  // fit obs = a + b pred
  kPredictionsOnObservations,  // fit pred = a + b obs, then invert
};

/// Least-squares calibration over the calibration window; the returned map takes
/// a prediction to the observation scale either way.
[[nodiscard]] inline Calibration calibrate(std::span<const double> predictions, std::span<const double> observations,
                                           CalibrationDirection direction = CalibrationDirection::kObservationsOnPredictions) {
  if (predictions.size() != observations.size()) throw ValidationError("calibrate: length mismatch");
  std::vector<double> p;
  std::vector<double> o;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (std::isfinite(predictions[i]) && std::isfinite(observations[i])) {
      p.push_back(predictions[i]);
      o.push_back(observations[i]);
    }
  }
  if (p.size() < 3) throw ValidationError("calibrate: need at least 3 complete seasons");
  const double mp = detail::mean(p);
  const double mo = detail::mean(o);
  double spo = 0.0;
  double spp = 0.0;
  double soo = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    spo += (p[i] - mp) * (o[i] - mo);
    spp += (p[i] - mp) * (p[i] - mp);
    soo += (o[i] - mo) * (o[i] - mo);
  }
  if (!(spp > 1e-24 * std::max(1.0, mp * mp) * static_cast<double>(p.size()))) return {0.0, mo, true};
  if (direction == CalibrationDirection::kObservationsOnPredictions) {
    const double slope = spo / spp;
    return {slope, mo - slope * mp, false};
  }
  // pred = mp + b (obs - mo) inverted; b = 0 leaves nothing to invert
  const double b = soo > 0.0 ? spo / soo : 0.0;
  if (!(std::abs(b) > 1e-12 * std::sqrt(spp / std::max(soo, 1e-300)))) return {0.0, mo, true};
  return {1.0 / b, mo - mp / b, false};
}

}  // namespace lpchaos::shrinkage
