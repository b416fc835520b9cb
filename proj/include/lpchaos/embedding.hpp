#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpchaos/error.hpp"
#include "lpchaos/panel.hpp"
#include "lpchaos/util.hpp"

namespace lpchaos {

struct DelayCoord {
  int variable = 0;
  int site = 0;
  int lag = 0;  // seasons before the predicted season

  auto operator<=>(const DelayCoord&) const = default;
};

// A random embedding: n lagged (variable, site) coordinates used as regression predictors.
struct DelayMap {
  std::vector<DelayCoord> coords;  // canonical (sorted) order
  int lead = 3;

  [[nodiscard]] std::size_t dim() const noexcept { return coords.size(); }
  [[nodiscard]] int max_lag() const noexcept {
    int m = 0;
    for (const auto& c : coords) m = std::max(m, c.lag);
    return m;
  }
  bool operator==(const DelayMap&) const = default;
};

// Throws unless every lag lies in [lead + 1, lag_max] and coordinates are distinct.
inline void validate_delay_map(const DelayMap& map, int lag_max) {
  if (map.coords.empty()) throw ValidationError("delay map has no coordinates");
  if (map.lead < 0) throw ValidationError("lead must be non-negative");
  std::set<DelayCoord> seen;
  for (const auto& c : map.coords) {
    if (c.lag < map.lead + 1) {
      throw ValidationError("delay lag " + std::to_string(c.lag) + " would leak the target (lead " +
                            std::to_string(map.lead) + ")");
    }
    if (c.lag > lag_max) throw ValidationError("delay lag " + std::to_string(c.lag) + " exceeds maximum");
    if (!seen.insert(c).second) throw ValidationError("delay map coordinates must be distinct");
  }
}

namespace detail {

// min(C(n, k), cap) without overflow.
[[nodiscard]] inline std::uint64_t capped_binomial(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double acc = 1.0L;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (acc >= static_cast<long double>(cap)) return cap;
  }
  return static_cast<std::uint64_t>(std::llround(acc));
}

}  // namespace detail

struct SamplingSpec {
  std::size_t n_maps = 1000;
  std::size_t dim = 8;
  int lag_min = 4;
  int lag_max = 11;
  int lead = 3;
};

// Draws distinct random delay maps uniformly from catalog x {lag_min..lag_max}.
// Each map index has its own RNG stream; identical maps are redrawn, and the
// result is capped at the number of distinct maps that exist.
[[nodiscard]] inline std::vector<DelayMap> sample_delay_maps(std::span<const SeriesId> catalog, const SamplingSpec& spec,
                                                             std::uint64_t seed) {
  if (spec.n_maps < 1) throw ValidationError("n_maps must be at least 1");
  if (spec.dim < 1) throw ValidationError("embedding dimension must be at least 1");
  if (spec.lag_min < spec.lead + 1) {
    throw ValidationError("lag_min must be at least lead + 1 to avoid target leakage");
  }
  if (spec.lag_max < spec.lag_min) throw ValidationError("lag_max below lag_min");
  const std::size_t n_lags = static_cast<std::size_t>(spec.lag_max - spec.lag_min + 1);
  const std::size_t space = catalog.size() * n_lags;
  if (space < spec.dim) {
    throw ValidationError("coordinate space (" + std::to_string(space) + ") smaller than embedding dimension");
  }
  const std::uint64_t possible = detail::capped_binomial(space, spec.dim, spec.n_maps);
  const std::size_t target = static_cast<std::size_t>(std::min<std::uint64_t>(possible, spec.n_maps));

  std::set<std::vector<DelayCoord>> seen;
  std::vector<DelayMap> maps;
  maps.reserve(target);
  std::vector<std::size_t> pool(space);
  for (std::uint64_t index = 0; maps.size() < target; ++index) {
    std::mt19937_64 rng(derive_seed(seed, index));
    for (std::size_t i = 0; i < space; ++i) pool[i] = i;
    // partial Fisher-Yates: first `dim` entries are a uniform draw without replacement
    for (std::size_t i = 0; i < spec.dim; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, space - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<DelayCoord> coords;
    coords.reserve(spec.dim);
    for (std::size_t i = 0; i < spec.dim; ++i) {
      const SeriesId id = catalog[pool[i] / n_lags];
      coords.push_back({id.variable, id.site, spec.lag_min + static_cast<int>(pool[i] % n_lags)});
    }
    std::sort(coords.begin(), coords.end());
    if (!seen.insert(coords).second) continue;
    maps.push_back({std::move(coords), spec.lead});
  }
  return maps;
}

struct DesignMatrix {
  Eigen::MatrixXd predictors;
  Eigen::VectorXd response;
  std::vector<int> seasons;  // response season of each row
  std::vector<int> dropped;  // seasons skipped because of missing values
};

// Row t: predictors panel[coord, t - lag], response panel[target, t], for t in `seasons`.
// Never reads the panel at or after the response season.
[[nodiscard]] inline DesignMatrix build_design_matrix(const Panel& panel, const DelayMap& map, SeriesId target,
                                                      SeasonRange seasons) {
  for (const auto& c : map.coords) {
    if (c.lag < 1) throw ValidationError("delay lag must be positive");
  }
  const std::size_t p = map.coords.size();
  std::vector<double> buffer;
  buffer.reserve(static_cast<std::size_t>(seasons.size()) * p);
  std::vector<double> response;
  DesignMatrix out;
  std::vector<double> row(p);
  for (int t = seasons.begin; t < seasons.end; ++t) {
    const double y = panel.at(target, t);
    bool ok = std::isfinite(y);
    for (std::size_t j = 0; ok && j < p; ++j) {
      const auto& c = map.coords[j];
      row[j] = panel.at({c.variable, c.site}, t - c.lag);
      ok = std::isfinite(row[j]);
    }
    if (!ok) {
      out.dropped.push_back(t);
      continue;
    }
    buffer.insert(buffer.end(), row.begin(), row.end());
    response.push_back(y);
    out.seasons.push_back(t);
  }
  if (out.seasons.empty()) throw ValidationError("design matrix has no usable rows");
  const auto n = static_cast<Eigen::Index>(out.seasons.size());
  out.predictors = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      buffer.data(), n, static_cast<Eigen::Index>(p));
  out.response = Eigen::Map<const Eigen::VectorXd>(response.data(), n);
  return out;
}

// Train/rank, select, retain and predict windows, contiguous and in that order.
struct WindowSchedule {
  SeasonRange rank;
  SeasonRange select;
  SeasonRange retain;
  SeasonRange predict;

  bool operator==(const WindowSchedule&) const = default;
};

struct WindowLengths {
  int rank = 28;
  int select = 8;
  int retain = 8;
  int predict = 5;
};

inline void validate_schedule(const WindowSchedule& w) {
  const std::array<SeasonRange, 4> all{w.rank, w.select, w.retain, w.predict};
  for (const auto& r : all) {
    if (r.empty()) throw ValidationError("schedule windows must be non-empty");
  }
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i].begin < all[i - 1].end) throw ValidationError("schedule windows overlap or are out of order");
  }
}

[[nodiscard]] inline WindowSchedule split_windows(int first_season, const WindowLengths& len = {}) {
  if (len.rank < 1 || len.select < 1 || len.retain < 1 || len.predict < 1) {
    throw ValidationError("window lengths must be at least 1");
  }
  WindowSchedule w;
  w.rank = {first_season, first_season + len.rank};
  w.select = {w.rank.end, w.rank.end + len.select};
  w.retain = {w.select.end, w.select.end + len.retain};
  w.predict = {w.retain.end, w.retain.end + len.predict};
  return w;
}

}  // namespace lpchaos
