#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lpchaos/embedding.hpp"
#include "lpchaos/ensemble.hpp"
#include "lpchaos/error.hpp"
#include "lpchaos/metrics.hpp"
#include "lpchaos/panel.hpp"
#include "lpchaos/regression.hpp"
#include "lpchaos/shrinkage.hpp"

// Keys: self-contained records of a group of delay-map regressions together with
// how they are ranked, extracted and combined.
namespace lpchaos::ensemble {

struct Station {
  std::string id;
  SeriesId target;    // series the models are fitted to in the attractor panels
  SeriesId observed;  // the station's series in the ground panel

  bool operator==(const Station&) const = default;
};

// One delay map with a fitted subset model per station.
struct KeyMember {
  DelayMap map;
  std::vector<SubsetModel> models;  // aligned with the station list

  bool operator==(const KeyMember& o) const {
    if (!(map == o.map) || models.size() != o.models.size()) return false;
    for (std::size_t i = 0; i < models.size(); ++i) {
      const auto& a = models[i];
      const auto& b = o.models[i];
      if (a.columns != b.columns || a.coefficients != b.coefficients || a.intercept != b.intercept) return false;
    }
    return true;
  }
};

struct CombineSettings {
  double shrink_factor = 1.0;
  shrinkage::SteinMode stein_mode = shrinkage::SteinMode::kExact;
  VoteMode vote_mode = VoteMode::kLargestCluster;
  std::size_t vote_clusters = 2;
  bool unit_scale = true;  // divide each model's predictions by its in-sample fitted sd before shrinking
};

struct PredictorKey {
  std::string attractor_id;
  double attractor_parameter = 0.0;
  int lead = 3;
  int top_percent = 100;
  Combiner combiner = Combiner::kMean;
  std::vector<Station> stations;
  std::vector<KeyMember> members;
  std::vector<std::vector<std::size_t>> selection;  // per station: member indices, best first
  CombineSettings settings;
  SeasonRange rank_window;
  SeasonRange select_window;
  double correlation = 0.0;  // pooled correlation over select_window, used to rank keys
  std::optional<SeasonRange> retain_window;
  std::optional<double> retain_correlation;
};

// Per station, per season raw model predictions from `panel`; NaN where inputs are missing.
[[nodiscard]] inline std::vector<std::vector<double>> member_predictions(const KeyMember& member, const Panel& panel,
                                                                         SeasonRange seasons) {
  std::vector<std::vector<double>> out(member.models.size(),
                                       std::vector<double>(static_cast<std::size_t>(seasons.size()), kNaN));
  std::vector<double> row(member.map.coords.size());
  for (int t = seasons.begin; t < seasons.end; ++t) {
    bool ok = true;
    for (std::size_t j = 0; j < row.size() && ok; ++j) {
      const auto& c = member.map.coords[j];
      row[j] = panel.at({c.variable, c.site}, t - c.lag);
      ok = std::isfinite(row[j]);
    }
    if (!ok) continue;
    for (std::size_t s = 0; s < member.models.size(); ++s) {
      out[s][static_cast<std::size_t>(t - seasons.begin)] = member.models[s].predict(row);
    }
  }
  return out;
}

// Stein-shrunk predictions, tensor [member][station][season]. Seasons where any
// station prediction is missing stay NaN for every station.
[[nodiscard]] inline std::vector<std::vector<std::vector<double>>> shrunk_predictions(
    std::span<const KeyMember> members, const Panel& panel, SeasonRange seasons, const CombineSettings& settings) {
  std::vector<std::vector<std::vector<double>>> out;
  out.reserve(members.size());
  for (const auto& m : members) {
    auto raw = member_predictions(m, panel, seasons);
    const std::size_t n_st = raw.size();
    if (settings.unit_scale) {
      for (std::size_t s = 0; s < n_st; ++s) {
        const double sd = m.models[s].fitted_sd;
        if (sd > 0.0) {
          for (double& v : raw[s]) v /= sd;
        }
      }
    }
    std::vector<double> column(n_st);
    for (std::size_t t = 0; t < static_cast<std::size_t>(seasons.size()); ++t) {
      bool ok = true;
      for (std::size_t s = 0; s < n_st; ++s) {
        column[s] = raw[s][t];
        ok = ok && std::isfinite(column[s]);
      }
      if (!ok) {
        for (std::size_t s = 0; s < n_st; ++s) raw[s][t] = kNaN;
        continue;
      }
      const auto js = shrinkage::stein_shrink(column, settings.shrink_factor, settings.stein_mode);
      for (std::size_t s = 0; s < n_st; ++s) raw[s][t] = js.values[s];
    }
    out.push_back(std::move(raw));
  }
  return out;
}

// Per station, combines the selected members' series season by season.
// Selection entries index the first dimension of `shrunk`.
[[nodiscard]] inline std::vector<std::vector<double>> combine_series(
    const std::vector<std::vector<std::vector<double>>>& shrunk, const std::vector<std::vector<std::size_t>>& selection,
    Combiner combiner, const CombineSettings& settings, std::size_t n_seasons) {
  std::vector<std::vector<double>> out(selection.size(), std::vector<double>(n_seasons, kNaN));
  std::vector<double> values;
  for (std::size_t s = 0; s < selection.size(); ++s) {
    for (std::size_t t = 0; t < n_seasons; ++t) {
      values.clear();
      for (std::size_t m : selection[s]) {
        const double v = shrunk[m][s][t];
        if (std::isfinite(v)) values.push_back(v);
      }
      if (values.empty()) continue;
      out[s][t] = combiner == Combiner::kMean ? combine_mean(values)
                                              : combine_vote(values, settings.vote_clusters, settings.vote_mode);
    }
  }
  return out;
}

// Replays a key on a panel: per station, per season predictions over `seasons`.
[[nodiscard]] inline std::vector<std::vector<double>> key_series(const PredictorKey& key, const Panel& panel,
                                                                 SeasonRange seasons) {
  const auto shrunk = shrunk_predictions(key.members, panel, seasons, key.settings);
  return combine_series(shrunk, key.selection, key.combiner, key.settings, static_cast<std::size_t>(seasons.size()));
}

struct PooledPairs {
  std::vector<double> predicted;
  std::vector<double> observed;
};

// Finite (prediction, observation) pairs over stations x window; series start at `offset`.
[[nodiscard]] inline PooledPairs pool_pairs(const std::vector<std::vector<double>>& series, int offset,
                                            std::span<const Station> stations, const Panel& ground,
                                            SeasonRange window) {
  PooledPairs out;
  for (std::size_t s = 0; s < stations.size(); ++s) {
    for (int t = window.begin; t < window.end; ++t) {
      const int i = t - offset;
      if (i < 0 || i >= static_cast<int>(series[s].size())) continue;
      const double p = series[s][static_cast<std::size_t>(i)];
      const double o = ground.at(stations[s].observed, t);
      if (std::isfinite(p) && std::isfinite(o)) {
        out.predicted.push_back(p);
        out.observed.push_back(o);
      }
    }
  }
  return out;
}

[[nodiscard]] inline double pooled_correlation(const std::vector<std::vector<double>>& series, int offset,
                                               std::span<const Station> stations, const Panel& ground,
                                               SeasonRange window) {
  const auto pairs = pool_pairs(series, offset, stations, ground, window);
  if (pairs.predicted.size() < 3) return 0.0;
  return metrics::pearson_r(pairs.predicted, pairs.observed);
}

// Correlation of a key's replayed predictions with the ground panel over `window`.
[[nodiscard]] inline double key_correlation(const PredictorKey& key, const Panel& ground, SeasonRange window) {
  return pooled_correlation(key_series(key, ground, window), window.begin, key.stations, ground, window);
}

struct KeyFormationInput {
  std::string attractor_id;
  double attractor_parameter = 0.0;
  std::vector<Station> stations;
  std::vector<KeyMember> members;  // every fitted map of the attractor
  std::vector<int> top_percents{10, 30, 100};
  std::vector<Combiner> combiners{Combiner::kMean, Combiner::kVote};
  CombineSettings settings;
  SeasonRange rank_window;
  SeasonRange select_window;
};

struct KeyFormation {
  std::vector<PredictorKey> keys;
  // per station: ranked members over the rank window
  std::vector<std::vector<RankedModel>> rankings;
};

/// Ranks every member per station by correlation of its Stein-shrunk predictions
/// with the ground over the rank window, then forms one key per (X, combiner)
/// scored on the select window.
[[nodiscard]] inline KeyFormation form_keys(const KeyFormationInput& in, const Panel& ground) {
  if (in.members.empty()) throw ValidationError("form_keys: no fitted models");
  if (in.select_window.begin < in.rank_window.end) throw ValidationError("form_keys: select window must follow rank window");
  const SeasonRange span{in.rank_window.begin, in.select_window.end};
  const auto shrunk = shrunk_predictions(in.members, ground, span, in.settings);
  const std::size_t n_st = in.stations.size();

  KeyFormation out;
  out.rankings.resize(n_st);
  std::vector<std::size_t> sizes;
  for (const auto& m : in.members) sizes.push_back(m.models.front().columns.size());
  for (std::size_t s = 0; s < n_st; ++s) {
    // rank on seasons where the observation and every model prediction exist
    std::vector<int> usable;
    for (int t = in.rank_window.begin; t < in.rank_window.end; ++t) {
      if (!std::isfinite(ground.at(in.stations[s].observed, t))) continue;
      bool ok = true;
      for (const auto& m : shrunk) ok = ok && std::isfinite(m[s][static_cast<std::size_t>(t - span.begin)]);
      if (ok) usable.push_back(t);
    }
    if (usable.size() < 3) throw ValidationError("form_keys: fewer than 3 usable rank-window seasons");
    std::vector<double> obs;
    for (int t : usable) obs.push_back(ground.at(in.stations[s].observed, t));
    std::vector<std::vector<double>> preds(shrunk.size());
    for (std::size_t m = 0; m < shrunk.size(); ++m) {
      for (int t : usable) preds[m].push_back(shrunk[m][s][static_cast<std::size_t>(t - span.begin)]);
    }
    out.rankings[s] = rank_models(preds, obs, sizes);
  }

  for (int x : in.top_percents) {
    // per station top members, and the union of members used by any station
    std::vector<std::vector<std::size_t>> chosen(n_st);
    std::set<std::size_t> used;
    for (std::size_t s = 0; s < n_st; ++s) {
      for (const auto& r : take_top_percent(out.rankings[s], x)) {
        chosen[s].push_back(r.index);
        used.insert(r.index);
      }
    }
    std::vector<KeyMember> members;
    std::map<std::size_t, std::size_t> remap;
    for (std::size_t idx : used) {
      remap[idx] = members.size();
      members.push_back(in.members[idx]);
    }
    std::vector<std::vector<std::size_t>> selection(n_st);
    for (std::size_t s = 0; s < n_st; ++s) {
      for (std::size_t idx : chosen[s]) selection[s].push_back(remap[idx]);
    }
    for (Combiner c : in.combiners) {
      // shrunk rows are per member and independent, so the full tensor indexed by
      // the original member ids gives the same numbers a replay would produce
      std::vector<std::vector<std::vector<double>>> key_shrunk;
      key_shrunk.reserve(members.size());
      for (std::size_t idx : used) key_shrunk.push_back(shrunk[idx]);
      const auto series = combine_series(key_shrunk, selection, c, in.settings, static_cast<std::size_t>(span.size()));
      // restrict to the select window the same way key_correlation does
      std::vector<std::vector<double>> window_series(n_st);
      for (std::size_t s = 0; s < n_st; ++s) {
        window_series[s].assign(series[s].begin() + (in.select_window.begin - span.begin), series[s].end());
      }
      PredictorKey key;
      key.attractor_id = in.attractor_id;
      key.attractor_parameter = in.attractor_parameter;
      key.lead = members.front().map.lead;
      key.top_percent = x;
      key.combiner = c;
      key.stations = in.stations;
      key.members = members;
      key.selection = selection;
      key.settings = in.settings;
      key.rank_window = in.rank_window;
      key.select_window = in.select_window;
      key.correlation = pooled_correlation(window_series, in.select_window.begin, in.stations, ground, in.select_window);
      out.keys.push_back(std::move(key));
    }
  }
  return out;
}

struct Retention {
  std::vector<PredictorKey> retained;
  bool no_forecast = false;
};

/// Per attractor, takes the top_k keys by select-window correlation, replays them
/// on the retain window and keeps those strictly above the threshold.
[[nodiscard]] inline Retention retain_predictors(const std::vector<PredictorKey>& keys, const Panel& ground,
                                                 SeasonRange retain_window, double threshold = 0.5,
                                                 std::size_t top_k = 10) {
  for (const auto& k : keys) {
    if (retain_window.begin < k.select_window.end || retain_window.begin < k.rank_window.end) {
      throw ValidationError("retain window must follow the rank and select windows");
    }
  }
  std::map<std::string, std::vector<std::size_t>> by_attractor;
  for (std::size_t i = 0; i < keys.size(); ++i) by_attractor[keys[i].attractor_id].push_back(i);

  Retention out;
  for (auto& [id, idx] : by_attractor) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return keys[a].correlation > keys[b].correlation; });
    if (idx.size() > top_k) idx.resize(top_k);
    for (std::size_t i : idx) {
      PredictorKey kept = keys[i];
      kept.retain_window = retain_window;
      kept.retain_correlation = key_correlation(kept, ground, retain_window);
      if (*kept.retain_correlation > threshold) out.retained.push_back(std::move(kept));
    }
  }
  out.no_forecast = out.retained.empty();
  return out;
}

struct SwitchDecision {
  std::string attractor_id;
  int top_percent = 0;
  CombinerChoice choice;
};

/// Combiner switching per key group: where both the mean and the vote key of one
/// (attractor, X) group survived retention, only the one that wins the
/// retain-window comparison is kept.
[[nodiscard]] inline std::vector<SwitchDecision> resolve_switching(std::vector<PredictorKey>& retained,
                                                                   const Panel& ground) {
  std::vector<SwitchDecision> decisions;
  std::vector<bool> drop(retained.size(), false);
  for (std::size_t i = 0; i < retained.size(); ++i) {
    if (retained[i].combiner != Combiner::kMean) continue;
    for (std::size_t j = 0; j < retained.size(); ++j) {
      if (retained[j].combiner != Combiner::kVote || retained[j].attractor_id != retained[i].attractor_id ||
          retained[j].top_percent != retained[i].top_percent) {
        continue;
      }
      const SeasonRange w = *retained[i].retain_window;
      const auto mp = pool_pairs(key_series(retained[i], ground, w), w.begin, retained[i].stations, ground, w);
      const auto vp = pool_pairs(key_series(retained[j], ground, w), w.begin, retained[j].stations, ground, w);
      if (mp.predicted.size() < 3 || mp.predicted.size() != vp.predicted.size()) continue;
      const auto choice = choose_combiner(mp.predicted, vp.predicted, mp.observed);
      decisions.push_back({retained[i].attractor_id, retained[i].top_percent, choice});
      drop[choice.combiner == Combiner::kMean ? j : i] = true;
    }
  }
  std::vector<PredictorKey> kept;
  for (std::size_t i = 0; i < retained.size(); ++i) {
    if (!drop[i]) kept.push_back(std::move(retained[i]));
  }
  retained = std::move(kept);
  return decisions;
}

}  // namespace lpchaos::ensemble
