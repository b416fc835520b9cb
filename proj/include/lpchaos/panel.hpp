#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "lpchaos/error.hpp"
#include "lpchaos/util.hpp"

namespace lpchaos {

// Variable ids used by the surrogate generator. Ingested station data uses kSiteValue.
enum Variable : int {
  kSiteValue = 0,    // precipitation analog: season mean of the site state
  kLocalEnergy = 1,  // temperature analog: season mean of half the squared site state
  kIndex = 2,        // teleconnection-style index; site id is the index number
  kStation = 3,      // ground-only station record; site id is the station number
};

inline constexpr int kSeasonsPerYear = 4;

struct SeriesId {
  int variable = 0;
  int site = 0;

  auto operator<=>(const SeriesId&) const = default;
};

[[nodiscard]] inline std::string to_string(SeriesId id) {
  return "(variable " + std::to_string(id.variable) + ", site " + std::to_string(id.site) + ")";
}

[[nodiscard]] constexpr int season_of_year(int season) noexcept {
  return ((season % kSeasonsPerYear) + kSeasonsPerYear) % kSeasonsPerYear;
}

// Half-open interval of season indices.
struct SeasonRange {
  int begin = 0;
  int end = 0;

  [[nodiscard]] constexpr int size() const noexcept { return end > begin ? end - begin : 0; }
  [[nodiscard]] constexpr bool empty() const noexcept { return end <= begin; }
  [[nodiscard]] constexpr bool contains(int s) const noexcept { return s >= begin && s < end; }
  bool operator==(const SeasonRange&) const = default;
};

// Seasonal values indexed by (variable, site, season). Missing cells are NaN.
class Panel {
 public:
  Panel() = default;
  Panel(int first_season, int n_seasons) : first_(first_season), n_(n_seasons) {}

  [[nodiscard]] int first_season() const noexcept { return first_; }
  [[nodiscard]] int n_seasons() const noexcept { return n_; }
  [[nodiscard]] SeasonRange seasons() const noexcept { return {first_, first_ + n_}; }

  [[nodiscard]] bool has(SeriesId id) const { return series_.contains(id); }

  [[nodiscard]] double at(SeriesId id, int season) const {
    const auto it = series_.find(id);
    if (it == series_.end() || season < first_ || season >= first_ + n_) return kNaN;
    return it->second[static_cast<std::size_t>(season - first_)];
  }

  void set(SeriesId id, int season, double value) {
    if (season < first_ || season >= first_ + n_) {
      throw ValidationError("season " + std::to_string(season) + " outside panel range");
    }
    auto& s = series_.try_emplace(id, static_cast<std::size_t>(n_), kNaN).first->second;
    s[static_cast<std::size_t>(season - first_)] = value;
  }

  void set_series(SeriesId id, std::vector<double> values) {
    if (static_cast<int>(values.size()) != n_) throw ValidationError("series length mismatch for " + to_string(id));
    series_[id] = std::move(values);
  }

  [[nodiscard]] const std::vector<double>& series(SeriesId id) const {
    const auto it = series_.find(id);
    if (it == series_.end()) throw ValidationError("panel has no series " + to_string(id));
    return it->second;
  }

  [[nodiscard]] std::vector<SeriesId> ids() const {
    std::vector<SeriesId> out;
    out.reserve(series_.size());
    for (const auto& [id, _] : series_) out.push_back(id);
    return out;
  }

  [[nodiscard]] std::vector<int> sites(int variable) const {
    std::vector<int> out;
    for (const auto& [id, _] : series_) {
      if (id.variable == variable) out.push_back(id.site);
    }
    return out;
  }

  // Copy restricted to seasons in [begin, end) intersected with the panel range.
  [[nodiscard]] Panel slice(int begin, int end) const {
    begin = std::max(begin, first_);
    end = std::min(end, first_ + n_);
    Panel out(begin, std::max(0, end - begin));
    for (const auto& [id, values] : series_) {
      out.series_[id] = std::vector<double>(values.begin() + (begin - first_), values.begin() + (begin - first_) + out.n_);
    }
    return out;
  }

  bool operator==(const Panel& other) const {
    if (first_ != other.first_ || n_ != other.n_ || series_.size() != other.series_.size()) return false;
    for (const auto& [id, values] : series_) {
      const auto it = other.series_.find(id);
      if (it == other.series_.end()) return false;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double a = values[i];
        const double b = it->second[i];
        if (!(a == b || (std::isnan(a) && std::isnan(b)))) return false;
      }
    }
    return true;
  }

 private:
  int first_ = 0;
  int n_ = 0;
  std::map<SeriesId, std::vector<double>> series_;
};

struct AnomalyFactor {
  double mean = 0.0;
  double sd = 1.0;
};

// Per-series, per-season-of-year standardization factors.
using AnomalyFactors = std::map<SeriesId, std::array<AnomalyFactor, kSeasonsPerYear>>;

struct StandardizedPanel {
  Panel values;
  AnomalyFactors factors;
  SeasonRange reference;
};

// (value - mean) / sd per series and season-of-year, with factors from `reference` only.
[[nodiscard]] inline StandardizedPanel standardize(const Panel& raw, SeasonRange reference) {
  StandardizedPanel out{Panel(raw.first_season(), raw.n_seasons()), {}, reference};
  for (const SeriesId id : raw.ids()) {
    std::array<AnomalyFactor, kSeasonsPerYear> f{};
    for (int soy = 0; soy < kSeasonsPerYear; ++soy) {
      std::vector<double> ref;
      for (int s = reference.begin; s < reference.end; ++s) {
        const double v = raw.at(id, s);
        if (season_of_year(s) == soy && std::isfinite(v)) ref.push_back(v);
      }
      if (ref.size() < 3) {
        throw ValidationError("fewer than 3 reference values for " + to_string(id) + " season-of-year " +
                              std::to_string(soy));
      }
      const double m = detail::mean(ref);
      const double sd = detail::sample_sd(ref);
      if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) {
        throw ValidationError("zero standard deviation for " + to_string(id) + " season-of-year " +
                              std::to_string(soy));
      }
      f[static_cast<std::size_t>(soy)] = {m, sd};
    }
    std::vector<double> z(static_cast<std::size_t>(raw.n_seasons()));
    const auto& values = raw.series(id);
    for (int i = 0; i < raw.n_seasons(); ++i) {
      const auto& fs = f[static_cast<std::size_t>(season_of_year(raw.first_season() + i))];
      z[static_cast<std::size_t>(i)] = (values[static_cast<std::size_t>(i)] - fs.mean) / fs.sd;
    }
    out.values.set_series(id, std::move(z));
    out.factors[id] = f;
  }
  return out;
}

[[nodiscard]] inline Panel destandardize(const StandardizedPanel& z) {
  Panel out(z.values.first_season(), z.values.n_seasons());
  for (const SeriesId id : z.values.ids()) {
    const auto& f = z.factors.at(id);
    std::vector<double> raw(static_cast<std::size_t>(z.values.n_seasons()));
    const auto& values = z.values.series(id);
    for (int i = 0; i < z.values.n_seasons(); ++i) {
      const auto& fs = f[static_cast<std::size_t>(season_of_year(z.values.first_season() + i))];
      raw[static_cast<std::size_t>(i)] = values[static_cast<std::size_t>(i)] * fs.sd + fs.mean;
    }
    out.set_series(id, std::move(raw));
  }
  return out;
}

}  // namespace lpchaos
