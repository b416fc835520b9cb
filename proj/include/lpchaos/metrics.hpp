#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "lpchaos/error.hpp"
#include "lpchaos/util.hpp"

// Skill and diagnostic statistics for seasonal forecasts.
namespace lpchaos::metrics {

struct Correlation {
  double r = 0.0;
  bool degenerate = false;  // zero variance in an input; r is reported as 0
};

/// Sample Pearson correlation. Zero variance in either input yields r = 0 with
/// the degenerate flag set rather than an error.
[[nodiscard]] inline Correlation pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("pearson: length mismatch");
  if (a.size() < 3) throw ValidationError("pearson: need at least 3 pairs");
  const double ma = detail::mean(a);
  const double mb = detail::mean(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw ValidationError("pearson: non-finite input");
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  // Relative cut so that exactly constant inputs with rounding residue still count as degenerate.
  const double scale_a = std::max(1.0, ma * ma) * static_cast<double>(a.size());
  const double scale_b = std::max(1.0, mb * mb) * static_cast<double>(b.size());
  if (saa <= 1e-24 * scale_a || sbb <= 1e-24 * scale_b) return {0.0, true};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

[[nodiscard]] inline double pearson_r(std::span<const double> a, std::span<const double> b) {
  return pearson(a, b).r;
}

enum class Sided { kOne, kTwo };

/// p-value of the t test for zero correlation, t = r sqrt(dof / (1 - r^2)).
/// One-sided tests the upper tail (positive correlation).
[[nodiscard]] inline double correlation_pvalue(double r, double dof, Sided sided = Sided::kOne) {
  if (!(dof >= 1.0)) throw ValidationError("correlation_pvalue: dof must be at least 1");
  if (!std::isfinite(r) || std::abs(r) > 1.0) throw ValidationError("correlation_pvalue: |r| must be <= 1");
  if (std::abs(r) == 1.0) {
    if (sided == Sided::kTwo || r > 0.0) return 0.0;
    return 1.0;
  }
  const double t = r * std::sqrt(dof / (1.0 - r * r));
  const boost::math::students_t dist(dof);
  if (sided == Sided::kOne) {
    return boost::math::cdf(boost::math::complement(dist, t));
  }
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

/// Correlation dof less the number of fitted seasonal means.
[[nodiscard]] inline std::size_t adjusted_dof(std::size_t n_pairs, std::size_t n_fitted_means) {
  if (n_pairs <= n_fitted_means + 2) throw ValidationError("adjusted_dof: non-positive degrees of freedom");
  return n_pairs - 2 - n_fitted_means;
}

struct TercileBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// 1/3 and 2/3 sample quantiles (linear interpolation between order statistics).
[[nodiscard]] inline TercileBounds tercile_bounds(std::span<const double> reference) {
  std::vector<double> v;
  for (double x : reference) {
    if (std::isfinite(x)) v.push_back(x);
  }
  if (v.size() < 3) throw ValidationError("tercile_bounds: need at least 3 reference values");
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {quantile(1.0 / 3.0), quantile(2.0 / 3.0)};
}

// 0 = below normal, 1 = near normal, 2 = above normal.
[[nodiscard]] constexpr int tercile_category(double x, TercileBounds b) noexcept {
  if (x < b.lower) return 0;
  if (x <= b.upper) return 1;
  return 2;
}

/// Heidke skill score over three equiprobable categories, 100 (H - T/3) / (T - T/3).
/// Forecast categories use `pred_bounds` when given, else the observation bounds.
[[nodiscard]] inline double heidke_skill(std::span<const double> pred, std::span<const double> obs, TercileBounds bounds,
                                         std::optional<TercileBounds> pred_bounds = std::nullopt) {
  if (pred.size() != obs.size()) throw ValidationError("heidke_skill: length mismatch");
  if (pred.empty()) throw ValidationError("heidke_skill: empty input");
  const TercileBounds pb = pred_bounds.value_or(bounds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (tercile_category(pred[i], pb) == tercile_category(obs[i], bounds)) ++hits;
  }
  const double total = static_cast<double>(pred.size());
  const double expected = total / 3.0;
  return 100.0 * (static_cast<double>(hits) - expected) / (total - expected);
}

struct RunningPoint {
  int start = 0;  // offset of the first season in the window
  std::size_t n_pairs = 0;
  bool gap = false;  // too few pooled pairs; r and hss are NaN
  double r = kNaN;
  double hss = kNaN;
};

/// Pearson r and Heidke skill pooled over stations for each run of `window`
/// consecutive seasons. pred[station][season] and obs[station][season] share
/// a season axis; non-finite cells are skipped.
[[nodiscard]] inline std::vector<RunningPoint> running_skill(const std::vector<std::vector<double>>& pred,
                                                             const std::vector<std::vector<double>>& obs, int window,
                                                             TercileBounds bounds,
                                                             std::optional<TercileBounds> pred_bounds = std::nullopt) {
  if (window < 2) throw ValidationError("running_skill: window must be at least 2");
  if (pred.size() != obs.size()) throw ValidationError("running_skill: station count mismatch");
  std::size_t len = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != obs[s].size()) throw ValidationError("running_skill: season count mismatch");
    len = std::max(len, pred[s].size());
  }
  std::vector<RunningPoint> out;
  for (std::size_t start = 0; start + static_cast<std::size_t>(window) <= len; ++start) {
    std::vector<double> p;
    std::vector<double> o;
    for (std::size_t s = 0; s < pred.size(); ++s) {
      for (std::size_t t = start; t < start + static_cast<std::size_t>(window) && t < pred[s].size(); ++t) {
        if (std::isfinite(pred[s][t]) && std::isfinite(obs[s][t])) {
          p.push_back(pred[s][t]);
          o.push_back(obs[s][t]);
        }
      }
    }
    RunningPoint pt;
    pt.start = static_cast<int>(start);
    pt.n_pairs = p.size();
    if (p.size() < 3) {
      pt.gap = true;
    } else {
      pt.r = pearson_r(p, o);
      pt.hss = heidke_skill(p, o, bounds, pred_bounds);
    }
    out.push_back(pt);
  }
  return out;
}

struct BoxLjung {
  double q = 0.0;
  double p = 1.0;
};

/// Ljung-Box portmanteau statistic Q = n(n+2) sum_k rho_k^2 / (n-k), chi-square(h) tail.
[[nodiscard]] inline BoxLjung box_ljung(std::span<const double> series, std::size_t n_lags) {
  const std::size_t n = series.size();
  if (n_lags < 1) throw ValidationError("box_ljung: need at least one lag");
  if (n <= n_lags + 1) throw ValidationError("box_ljung: series too short for the requested lags");
  const double m = detail::mean(series);
  double denom = 0.0;
  for (double v : series) denom += (v - m) * (v - m);
  if (!(denom > 1e-24 * std::max(1.0, m * m) * static_cast<double>(n))) {
    throw ValidationError("box_ljung: zero-variance series");
  }
  double q = 0.0;
  for (std::size_t k = 1; k <= n_lags; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) num += (series[t] - m) * (series[t + k] - m);
    const double rho = num / denom;
    q += rho * rho / static_cast<double>(n - k);
  }
  q *= static_cast<double>(n) * static_cast<double>(n + 2);
  const boost::math::chi_squared dist(static_cast<double>(n_lags));
  return {q, boost::math::cdf(boost::math::complement(dist, q))};
}

/// Benjamini-Hochberg step-up: indices (ascending) of rejected hypotheses at FDR q.
[[nodiscard]] inline std::vector<std::size_t> benjamini_hochberg(std::span<const double> pvalues, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("benjamini_hochberg: q must lie in (0, 1)");
  for (double p : pvalues) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("benjamini_hochberg: p-values must lie in [0, 1]");
  }
  const std::size_t m = pvalues.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
  std::size_t cutoff = 0;  // number of rejections
  for (std::size_t i = 0; i < m; ++i) {
    if (pvalues[order[i]] <= static_cast<double>(i + 1) * q / static_cast<double>(m)) cutoff = i + 1;
  }
  std::vector<std::size_t> rejected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cutoff));
  std::sort(rejected.begin(), rejected.end());
  return rejected;
}

// Average ranks (1-based), ties share their mean rank.
[[nodiscard]] inline std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

[[nodiscard]] inline double spearman_rho(std::span<const double> a, std::span<const double> b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  return pearson_r(ra, rb);
}

// Table-style summary for one region and window.
struct SkillReport {
  double pearson_r = 0.0;
  bool degenerate = false;
  std::size_t dof = 1;
  double p_value = 1.0;
  double heidke = 0.0;
  std::size_t n_pairs = 0;
  double box_ljung_q = 0.0;
  double box_ljung_p = 1.0;
};

}  // namespace lpchaos::metrics
