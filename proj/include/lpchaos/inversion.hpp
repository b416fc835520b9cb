#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lpchaos/error.hpp"
#include "lpchaos/metrics.hpp"

// Estimating the tuning parameter from how many keys of each attractor are
// significant on a target period.
namespace lpchaos::inversion {

// One key's predictions and observations over the target period.
struct KeyEvaluation {
  std::vector<double> predicted;
  std::vector<double> observed;
  std::size_t n_fitted_means = 0;  // regional seasonal means estimated from the same data
};

// Per attractor: number of keys rejected by Benjamini-Hochberg at level q, using
// one-sided correlation p-values with adjusted degrees of freedom.
[[nodiscard]] inline std::vector<std::size_t> key_significance_counts(
    const std::vector<std::vector<KeyEvaluation>>& keys_per_attractor, double q = 0.01) {
  std::vector<std::size_t> counts;
  counts.reserve(keys_per_attractor.size());
  for (const auto& keys : keys_per_attractor) {
    if (keys.empty()) throw ValidationError("key_significance_counts: attractor without keys");
    std::vector<double> pvalues;
    pvalues.reserve(keys.size());
    for (const auto& k : keys) {
      const auto c = metrics::pearson(k.predicted, k.observed);
      const auto dof = metrics::adjusted_dof(k.predicted.size(), k.n_fitted_means);
      pvalues.push_back(metrics::correlation_pvalue(c.r, static_cast<double>(dof)));
    }
    counts.push_back(metrics::benjamini_hochberg(pvalues, q).size());
  }
  return counts;
}

// Triangular-kernel moving average along the sorted parameter axis; bandwidth is in
// grid steps, and weights are renormalized where the kernel runs off either end.
[[nodiscard]] inline std::vector<double> smooth_counts(const std::vector<double>& counts, double bandwidth = 1.0) {
  if (counts.size() < 3) throw ValidationError("smooth_counts: need at least 3 attractors");
  if (!(bandwidth >= 0.0)) throw ValidationError("smooth_counts: bandwidth must be non-negative");
  if (bandwidth == 0.0) return counts;
  const auto n = static_cast<std::ptrdiff_t>(counts.size());
  const auto reach = static_cast<std::ptrdiff_t>(std::floor(bandwidth));
  std::vector<double> out(counts.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double num = 0.0;
    double den = 0.0;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - reach); j <= std::min(n - 1, i + reach); ++j) {
      const double w = 1.0 - static_cast<double>(std::abs(i - j)) / (bandwidth + 1.0);
      num += w * counts[static_cast<std::size_t>(j)];
      den += w;
    }
    out[static_cast<std::size_t>(i)] = num / den;
  }
  return out;
}

struct InversionResult {
  std::vector<std::string> ids;
  std::vector<double> parameters;
  std::vector<double> summaries;
  std::vector<double> raw_counts;
  std::vector<double> smoothed;
  std::vector<std::size_t> chosen;  // indices into the attractor list
  double estimate = 0.0;            // count-weighted parameter
  double estimated_summary = 0.0;   // count-weighted summary statistic
  double q = 0.01;
  double fraction = 0.9;
};

/// Chooses attractors whose smoothed count is within `fraction` of the maximum and
/// averages their parameters (and summary statistics) weighted by smoothed count.
[[nodiscard]] inline InversionResult estimate_parameter(std::vector<std::string> ids, std::vector<double> parameters,
                                                        std::vector<double> summaries, std::vector<double> raw_counts,
                                                        std::vector<double> smoothed, double fraction = 0.9) {
  const std::size_t n = parameters.size();
  if (ids.size() != n || summaries.size() != n || raw_counts.size() != n || smoothed.size() != n) {
    throw ValidationError("estimate_parameter: inconsistent attractor arrays");
  }
  if (!std::is_sorted(parameters.begin(), parameters.end())) {
    throw ValidationError("estimate_parameter: attractors must be sorted by parameter");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("estimate_parameter: fraction must lie in (0, 1]");
  InversionResult out;
  out.fraction = fraction;
  const double peak = n == 0 ? 0.0 : *std::max_element(smoothed.begin(), smoothed.end());
  if (!(peak > 0.0)) throw ValidationError("estimate_parameter: no attractor has significant keys");
  double w = 0.0;
  double pw = 0.0;
  double sw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (smoothed[i] >= fraction * peak) {
      out.chosen.push_back(i);
      w += smoothed[i];
      pw += smoothed[i] * parameters[i];
      sw += smoothed[i] * summaries[i];
    }
  }
  out.estimate = pw / w;
  out.estimated_summary = sw / w;
  out.ids = std::move(ids);
  out.parameters = std::move(parameters);
  out.summaries = std::move(summaries);
  out.raw_counts = std::move(raw_counts);
  out.smoothed = std::move(smoothed);
  return out;
}

}  // namespace lpchaos::inversion
