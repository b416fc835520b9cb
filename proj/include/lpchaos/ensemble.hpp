#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lpchaos/error.hpp"
#include "lpchaos/metrics.hpp"
#include "lpchaos/util.hpp"

// Combining many small models: ranking, top-X% extraction, mean and vote
// combiners, the mean-vs-vote decision and median pooling.
namespace lpchaos::ensemble {

struct RankedModel {
  std::size_t index = 0;
  double correlation = 0.0;
  bool degenerate = false;
  std::size_t size = 0;  // number of fitted columns
};

// Orders models by correlation of their predictions with `observed`, descending.
// Ties go to the smaller model, then the earlier index. Degenerate (constant)
// predictions score 0.
[[nodiscard]] inline std::vector<RankedModel> rank_models(const std::vector<std::vector<double>>& predictions,
                                                          std::span<const double> observed,
                                                          std::span<const std::size_t> model_sizes = {}) {
  if (!model_sizes.empty() && model_sizes.size() != predictions.size()) {
    throw ValidationError("rank_models: model size count mismatch");
  }
  std::vector<RankedModel> ranked;
  ranked.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto c = metrics::pearson(predictions[i], observed);
    ranked.push_back({i, c.r, c.degenerate, model_sizes.empty() ? 0 : model_sizes[i]});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedModel& a, const RankedModel& b) {
    if (a.correlation != b.correlation) return a.correlation > b.correlation;
    return a.size < b.size;
  });
  return ranked;
}

[[nodiscard]] constexpr bool valid_top_percent(int x) noexcept { return x == 10 || x == 30 || x == 100; }

// ceil(X% of the ranked list), from the top.
[[nodiscard]] inline std::vector<RankedModel> take_top_percent(std::span<const RankedModel> ranked, int percent) {
  if (!valid_top_percent(percent)) throw ValidationError("top percent must be 10, 30 or 100");
  if (ranked.empty()) throw ValidationError("take_top_percent: empty input");
  const std::size_t count = (static_cast<std::size_t>(percent) * ranked.size() + 99) / 100;
  return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(count)};
}

[[nodiscard]] inline double combine_mean(std::span<const double> predictions) {
  if (predictions.empty()) throw ValidationError("combine_mean: no predictions");
  return std::accumulate(predictions.begin(), predictions.end(), 0.0) / static_cast<double>(predictions.size());
}

// Exact optimal partition of sorted 1-D data into k contiguous groups minimizing
// within-group sum of squares. Returns the group end offsets (last == n).
// Among equal-cost partitions the earliest cut wins.
[[nodiscard]] inline std::vector<std::size_t> optimal_partition(std::span<const double> sorted, std::size_t k) {
  const std::size_t n = sorted.size();
  if (n == 0) throw ValidationError("optimal_partition: empty input");
  k = std::clamp<std::size_t>(k, 1, n);
  const double center = sorted[n / 2];
  std::vector<double> s1(n + 1, 0.0);
  std::vector<double> s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = sorted[i] - center;
    s1[i + 1] = s1[i] + v;
    s2[i + 1] = s2[i] + v * v;
  }
  auto sse = [&](std::size_t a, std::size_t b) {  // [a, b)
    const double m = static_cast<double>(b - a);
    const double s = s1[b] - s1[a];
    return std::max(0.0, (s2[b] - s2[a]) - s * s / m);
  };
  if (k == 1) return {n};
  if (k == 2) {
    std::size_t cut = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c < n; ++c) {
      const double cost = sse(0, c) + sse(c, n);
      if (cost < best) {
        best = cost;
        cut = c;
      }
    }
    return {cut, n};
  }
  // cost[j][i]: best cost of the first i points in j + 1 groups
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cost(k, std::vector<double>(n + 1, inf));
  std::vector<std::vector<std::size_t>> arg(k, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t i = 1; i <= n; ++i) cost[0][i] = sse(0, i);
  for (std::size_t j = 1; j < k; ++j) {
    for (std::size_t i = j + 1; i <= n; ++i) {
      for (std::size_t c = j; c < i; ++c) {
        const double v = cost[j - 1][c] + sse(c, i);
        if (v < cost[j][i]) {
          cost[j][i] = v;
          arg[j][i] = c;
        }
      }
    }
  }
  std::vector<std::size_t> ends(k);
  std::size_t end = n;
  for (std::size_t j = k; j-- > 0;) {
    ends[j] = end;
    end = j == 0 ? 0 : arg[j][end];
  }
  return ends;
}

enum class VoteMode {
  kLargestCluster,     // mean of the most populous cluster
  kAverageTwoLargest,  // average of the two most populous cluster means
};

/// Majority vote: cluster the predictions into k groups by optimal 1-D
/// splitting and return the mean of the most populous group. Population ties
/// go to the group whose mean is nearer the overall mean, then the lower mean.
[[nodiscard]] inline double combine_vote(std::span<const double> predictions, std::size_t k = 2,
                                         VoteMode mode = VoteMode::kLargestCluster) {
  if (predictions.empty()) throw ValidationError("combine_vote: no predictions");
  if (k <= 1) return combine_mean(predictions);
  std::vector<double> sorted(predictions.begin(), predictions.end());
  std::sort(sorted.begin(), sorted.end());
  const auto ends = optimal_partition(sorted, k);
  const double overall = combine_mean(predictions);

  struct Group {
    std::size_t size;
    double mean;
  };
  std::vector<Group> groups;
  std::size_t begin = 0;
  for (std::size_t end : ends) {
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += sorted[i];
    groups.push_back({end - begin, sum / static_cast<double>(end - begin)});
    begin = end;
  }
  // distances within rounding count as equal; two equal groups are always equidistant
  const double tol = 1e-12 * (std::abs(overall) + (sorted.back() - sorted.front()));
  std::stable_sort(groups.begin(), groups.end(), [&](const Group& a, const Group& b) {
    if (a.size != b.size) return a.size > b.size;
    const double da = std::abs(a.mean - overall);
    const double db = std::abs(b.mean - overall);
    if (std::abs(da - db) > tol) return da < db;
    return a.mean < b.mean;
  });
  if (mode == VoteMode::kAverageTwoLargest && groups.size() >= 2) return 0.5 * (groups[0].mean + groups[1].mean);
  return groups.front().mean;
}

enum class Combiner { kMean, kVote };

[[nodiscard]] inline std::string to_string(Combiner c) { return c == Combiner::kMean ? "mean" : "vote"; }

[[nodiscard]] inline Combiner combiner_from_string(const std::string& s) {
  if (s == "mean") return Combiner::kMean;
  if (s == "vote") return Combiner::kVote;
  throw ValidationError("unknown combiner '" + s + "'");
}

struct CombinerChoice {
  Combiner combiner = Combiner::kMean;
  double r_mean = 0.0;
  double r_vote = 0.0;
  bool both_degenerate = false;
};

/// Picks the combiner whose series correlates better with the observations over
/// the holdout window just before the forecast. Ties go to the mean.
[[nodiscard]] inline CombinerChoice choose_combiner(std::span<const double> mean_series,
                                                    std::span<const double> vote_series,
                                                    std::span<const double> observed) {
  if (observed.empty()) throw ValidationError("choose_combiner: empty holdout window");
  const auto cm = metrics::pearson(mean_series, observed);
  const auto cv = metrics::pearson(vote_series, observed);
  CombinerChoice out;
  out.r_mean = cm.r;
  out.r_vote = cv.r;
  out.both_degenerate = cm.degenerate && cv.degenerate;
  out.combiner = (!out.both_degenerate && cv.r > cm.r) ? Combiner::kVote : Combiner::kMean;
  return out;
}

// Median; an even count averages the middle two.
[[nodiscard]] inline double median_combine(std::span<const double> predictions) {
  if (predictions.empty()) throw ValidationError("median_combine: no predictions");
  std::vector<double> v(predictions.begin(), predictions.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace lpchaos::ensemble
