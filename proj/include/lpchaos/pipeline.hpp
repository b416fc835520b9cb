#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "lpchaos/config.hpp"
#include "lpchaos/embedding.hpp"
#include "lpchaos/ensemble.hpp"
#include "lpchaos/error.hpp"
#include "lpchaos/inversion.hpp"
#include "lpchaos/keys.hpp"
#include "lpchaos/metrics.hpp"
#include "lpchaos/panel.hpp"
#include "lpchaos/regression.hpp"
#include "lpchaos/shrinkage.hpp"
#include "lpchaos/surrogate.hpp"

namespace lpchaos {

using Logger = std::function<void(const std::string&)>;

// Runs fn(0..n-1) on up to `threads` workers. Each index writes only its own
// output slot, so results do not depend on the schedule. The error of the
// lowest failing index is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr error;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Ground observations. Season index 0 is winter of `first_year`.
struct Ground {
  Panel raw;
  int first_year = 0;
  std::vector<ensemble::Station> stations;
  std::vector<std::pair<std::string, int>> missing;  // (station, season) cells without a value
};

[[nodiscard]] inline std::vector<ensemble::Station> resolve_stations(const PipelineConfig& cfg) {
  std::vector<ensemble::Station> out;
  for (std::size_t i = 0; i < cfg.stations.size(); ++i) {
    out.push_back({cfg.stations[i].id, {kSiteValue, cfg.stations[i].site}, {kStation, static_cast<int>(i)}});
  }
  return out;
}

// Seasons of ground data the run needs, starting at season 0.
[[nodiscard]] inline int ground_length(const PipelineConfig& cfg) {
  const auto w = resolve_schedule(cfg);
  int n = w.predict.end;
  if (cfg.inversion.enabled) n = std::max(n, w.select.end + cfg.inversion.target_length);
  return n;
}

// Independent surrogate run at the configured ground forcing, trimmed to the last
// `n_seasons` steady seasons and re-indexed from 0. Every series, and every
// station record (its site's value), gets independent Gaussian observation noise
// with variance sd^2 / snr.
[[nodiscard]] inline Ground surrogate_ground(const PipelineConfig& cfg, int n_seasons) {
  surrogate::SurrogateConfig sc = cfg.surrogate;
  sc.seed = derive_seed(cfg.seed, "ground");
  sc.estimate_dimension = false;
  sc.total_seasons = std::max(sc.total_seasons, n_seasons + 2 * sc.stationarity_window + sc.min_steady_seasons);
  sc.min_steady_seasons = std::max(sc.min_steady_seasons, n_seasons);
  const auto run = surrogate::build_attractor({cfg.ground.forcing, "ground"}, sc);
  const int offset = run.panel.n_seasons() - n_seasons;

  Ground g;
  g.first_year = cfg.ground.first_year;
  g.stations = resolve_stations(cfg);
  g.raw = Panel(0, n_seasons);
  const std::uint64_t noise_seed = derive_seed(sc.seed, "noise");
  auto observe = [&](SeriesId truth, SeriesId as) {
    const auto& full = run.panel.series(truth);
    std::vector<double> v(full.begin() + offset, full.end());
    const double sd = detail::sample_sd(v);
    std::mt19937_64 rng(derive_seed(noise_seed, to_string(as)));
    std::normal_distribution<double> noise(0.0, sd / std::sqrt(cfg.ground.snr));
    for (double& x : v) x += noise(rng);
    g.raw.set_series(as, std::move(v));
  };
  for (const auto id : run.panel.ids()) observe(id, id);
  for (const auto& st : g.stations) observe(st.target, st.observed);
  return g;
}

[[nodiscard]] inline SeasonRange reference_window(const WindowSchedule& w) { return {0, w.predict.begin}; }

// Catalog series: configured variables at sites within `neighborhood` ring steps of
// some station, plus indices, restricted to series present in the ground panel.
[[nodiscard]] inline std::vector<SeriesId> build_catalog(const PipelineConfig& cfg, const Panel& attractor,
                                                         const Panel& ground) {
  const int k = static_cast<int>(cfg.surrogate.sites);
  auto near_station = [&](int site) {
    for (const auto& s : cfg.stations) {
      const int d = std::abs(site - s.site) % k;
      if (std::min(d, k - d) <= cfg.neighborhood) return true;
    }
    return false;
  };
  std::vector<SeriesId> out;
  for (const auto id : attractor.ids()) {
    if (!ground.has(id)) continue;
    const bool wanted =
        id.variable == kIndex
            ? cfg.catalog_indices
            : std::find(cfg.catalog_variables.begin(), cfg.catalog_variables.end(), id.variable) !=
                      cfg.catalog_variables.end() &&
                  near_station(id.site);
    if (wanted) out.push_back(id);
  }
  if (out.empty()) throw ValidationError("delay-map catalog is empty");
  return out;
}

struct FittedAttractor {
  std::string id;
  double parameter = 0.0;
  double summary = 0.0;
  std::vector<ensemble::KeyMember> members;
  std::size_t n_maps = 0;
  std::size_t n_degenerate = 0;  // maps skipped because some station fit failed
};

// Best-subset Cp model per (delay map, station) on the standardized attractor panel.
[[nodiscard]] inline FittedAttractor fit_attractor(const surrogate::AttractorEstimate& att,
                                                   const std::vector<DelayMap>& maps,
                                                   const std::vector<ensemble::Station>& stations,
                                                   std::size_t max_subset_size, int threads = 1) {
  const auto z = standardize(att.panel, att.panel.seasons());
  int lag_max = 0;
  for (const auto& m : maps) lag_max = std::max(lag_max, m.max_lag());
  const SeasonRange rows{z.values.first_season() + lag_max, z.values.seasons().end};

  std::vector<std::optional<ensemble::KeyMember>> slots(maps.size());
  parallel_for(maps.size(), threads, [&](std::size_t i) {
    try {
      const auto dm = build_design_matrix(z.values, maps[i], stations.front().target, rows);
      ensemble::KeyMember member{maps[i], {}};
      for (std::size_t si = 0; si < stations.size(); ++si) {
        const auto& st = stations[si];
        const auto same = std::find_if(stations.begin(), stations.begin() + static_cast<std::ptrdiff_t>(si),
                                       [&](const ensemble::Station& o) { return o.target == st.target; });
        if (same != stations.begin() + static_cast<std::ptrdiff_t>(si)) {
          member.models.push_back(member.models[static_cast<std::size_t>(same - stations.begin())]);
          continue;
        }
        Eigen::VectorXd y(static_cast<Eigen::Index>(dm.seasons.size()));
        bool ok = true;
        for (std::size_t r = 0; r < dm.seasons.size(); ++r) {
          y[static_cast<Eigen::Index>(r)] = z.values.at(st.target, dm.seasons[r]);
          ok = ok && std::isfinite(y[static_cast<Eigen::Index>(r)]);
        }
        if (ok) {
          member.models.push_back(select_model(dm.predictors, y, max_subset_size).model);
        } else {
          const auto own = build_design_matrix(z.values, maps[i], st.target, rows);
          member.models.push_back(select_model(own.predictors, own.response, max_subset_size).model);
        }
      }
      slots[i] = std::move(member);
    } catch (const ValidationError&) {
      // degenerate design (constant or too few rows): the map is skipped
    }
  });

  FittedAttractor out;
  out.id = att.parameter.label;
  out.parameter = att.parameter.value;
  out.summary = att.summary;
  out.n_maps = maps.size();
  for (auto& s : slots) {
    if (s) {
      out.members.push_back(std::move(*s));
    } else {
      ++out.n_degenerate;
    }
  }
  if (out.members.empty()) throw ValidationError("attractor " + out.id + ": no delay map could be fitted");
  return out;
}

// Everything that depends only on the configuration and the catalog, not on ground values.
struct PreparedLibrary {
  std::vector<surrogate::AttractorEstimate> library;
  std::vector<SeriesId> catalog;
  std::vector<DelayMap> maps;
  std::vector<FittedAttractor> fitted;
  shrinkage::ShrinkageReport shrinkage;
};

[[nodiscard]] inline std::vector<surrogate::TuningParameter> library_parameters(const PipelineConfig& cfg) {
  std::vector<surrogate::TuningParameter> params;
  for (double f : cfg.forcings) {
    char label[32];
    std::snprintf(label, sizeof label, "F%g", f);
    params.push_back({f, label});
  }
  return params;
}

[[nodiscard]] inline std::vector<surrogate::AttractorEstimate> generate_library(const PipelineConfig& cfg) {
  surrogate::SurrogateConfig sc = cfg.surrogate;
  sc.seed = derive_seed(cfg.seed, "library");
  return surrogate::build_attractor_library(library_parameters(cfg), sc);
}

inline void log_line(const Logger& log, const std::string& line) {
  if (log) log(line);
}

[[nodiscard]] inline std::vector<DelayMap> embed(const PipelineConfig& cfg, const std::vector<SeriesId>& catalog) {
  return sample_delay_maps(catalog, cfg.embedding, derive_seed(cfg.seed, "maps"));
}

[[nodiscard]] inline PreparedLibrary prepare_library(const PipelineConfig& cfg, const Panel& ground,
                                                     const Logger& log = {}) {
  PreparedLibrary out;
  const auto stations = resolve_stations(cfg);
  try {
    out.library = generate_library(cfg);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("surrogate-dynamics", e.what());
  }
  log_line(log, "generate-library: " + std::to_string(out.library.size()) + " attractor estimates");
  try {
    out.catalog = build_catalog(cfg, out.library.front().panel, ground);
    out.maps = embed(cfg, out.catalog);
  } catch (const Error& e) {
    throw StageError("embedding", e.what());
  }
  log_line(log, "embed: catalog " + std::to_string(out.catalog.size()) + " series, " + std::to_string(out.maps.size()) +
                    " delay maps");
  try {
    for (const auto& att : out.library) {
      out.fitted.push_back(fit_attractor(att, out.maps, stations, cfg.max_subset_size, cfg.threads));
      log_line(log, "fit: " + out.fitted.back().id + " " + std::to_string(out.fitted.back().members.size()) +
                        " maps fitted, " + std::to_string(out.fitted.back().n_degenerate) + " degenerate");
    }
  } catch (const Error& e) {
    throw StageError("subset-regression", e.what());
  }
  try {
    shrinkage::BootstrapSpec spec;
    spec.n_stations = stations.size();
    spec.n_reps = cfg.bootstrap_reps;
    out.shrinkage = shrinkage::bootstrap_shrinkage(spec, derive_seed(cfg.seed, "bootstrap"));
  } catch (const Error& e) {
    throw StageError("shrinkage-calibration", e.what());
  }
  log_line(log, "shrinkage: factor " + std::to_string(out.shrinkage.shrinkage_factor));
  return out;
}

[[nodiscard]] inline ensemble::CombineSettings combine_settings(const PipelineConfig& cfg, double shrink_factor) {
  return {shrink_factor, cfg.stein_mode, cfg.vote_mode, cfg.vote_clusters};
}

struct Selection {
  std::vector<ensemble::PredictorKey> keys;  // every formed key, grouped by attractor
  std::vector<ensemble::PredictorKey> retained;
  std::vector<ensemble::SwitchDecision> switching;
  bool no_forecast = false;
};

[[nodiscard]] inline Selection select_keys(const PipelineConfig& cfg, const PreparedLibrary& lib, const Panel& ground,
                                           const WindowSchedule& w) {
  const auto stations = resolve_stations(cfg);
  std::vector<ensemble::Combiner> combiners{ensemble::Combiner::kMean, ensemble::Combiner::kVote};
  std::vector<std::vector<ensemble::PredictorKey>> per(lib.fitted.size());
  parallel_for(lib.fitted.size(), cfg.threads, [&](std::size_t a) {
    ensemble::KeyFormationInput in;
    in.attractor_id = lib.fitted[a].id;
    in.attractor_parameter = lib.fitted[a].parameter;
    in.stations = stations;
    in.members = lib.fitted[a].members;
    in.top_percents = cfg.top_percents;
    in.combiners = combiners;
    in.settings = combine_settings(cfg, lib.shrinkage.shrinkage_factor);
    in.rank_window = w.rank;
    in.select_window = w.select;
    per[a] = ensemble::form_keys(in, ground).keys;
  });
  Selection out;
  for (auto& keys : per) {
    for (auto& k : keys) out.keys.push_back(std::move(k));
  }
  auto retention = ensemble::retain_predictors(out.keys, ground, w.retain, cfg.retain_threshold, cfg.top_k);
  out.switching = ensemble::resolve_switching(retention.retained, ground);
  out.retained = std::move(retention.retained);
  out.no_forecast = out.retained.empty();
  return out;
}

struct EnsembleForecast {
  std::vector<ensemble::Station> stations;
  SeasonRange window;              // predict window
  SeasonRange span;                // hindcast start through the end of the predict window
  SeasonRange calibration_window;
  std::vector<std::vector<double>> median;     // [station][season - span.begin], uncalibrated
  std::vector<std::vector<double>> predicted;  // calibrated, same layout
  shrinkage::Calibration calibration;
  std::vector<std::string> contributing;       // key labels
  std::vector<std::string> season_combiners;   // per season of span, e.g. "mean+vote"

  [[nodiscard]] double at(std::size_t station, int season) const {
    return predicted[station][static_cast<std::size_t>(season - span.begin)];
  }
};

[[nodiscard]] inline std::string key_label(const ensemble::PredictorKey& k) {
  return k.attractor_id + "/X" + std::to_string(k.top_percent) + "/" + ensemble::to_string(k.combiner);
}

// Median of the retained keys per station and season, calibrated by regressing the
// observations on the median over the seasons just before the predict window.
[[nodiscard]] inline EnsembleForecast make_forecast(const PipelineConfig& cfg,
                                                    const std::vector<ensemble::PredictorKey>& retained,
                                                    const Panel& ground, const WindowSchedule& w) {
  if (retained.empty()) throw ValidationError("make_forecast: no retained predictors");
  EnsembleForecast f;
  f.stations = retained.front().stations;
  f.window = w.predict;
  f.calibration_window = {w.predict.begin - cfg.calibration_length, w.predict.begin};
  f.span = {std::min(w.select.begin, f.calibration_window.begin), w.predict.end};
  const auto n_st = f.stations.size();
  const auto len = static_cast<std::size_t>(f.span.size());

  std::vector<std::vector<std::vector<double>>> series;  // [key][station][season]
  for (const auto& k : retained) {
    series.push_back(ensemble::key_series(k, ground, f.span));
    f.contributing.push_back(key_label(k));
  }
  f.median.assign(n_st, std::vector<double>(len, kNaN));
  f.season_combiners.assign(len, "");
  std::vector<double> values;
  for (std::size_t t = 0; t < len; ++t) {
    std::set<std::string> used;
    for (std::size_t s = 0; s < n_st; ++s) {
      values.clear();
      for (std::size_t k = 0; k < series.size(); ++k) {
        const double v = series[k][s][t];
        if (std::isfinite(v)) {
          values.push_back(v);
          used.insert(ensemble::to_string(retained[k].combiner));
        }
      }
      if (!values.empty()) f.median[s][t] = ensemble::median_combine(values);
    }
    for (const auto& c : used) f.season_combiners[t] += (f.season_combiners[t].empty() ? "" : "+") + c;
  }

  std::vector<double> p;
  std::vector<double> o;
  for (std::size_t s = 0; s < n_st; ++s) {
    for (int t = f.calibration_window.begin; t < f.calibration_window.end; ++t) {
      p.push_back(f.median[s][static_cast<std::size_t>(t - f.span.begin)]);
      o.push_back(ground.at(f.stations[s].observed, t));
    }
  }
  f.calibration = shrinkage::calibrate(p, o, cfg.calibration_direction);
  f.predicted = f.median;
  for (auto& row : f.predicted) {
    for (double& v : row) {
      if (std::isfinite(v)) v = f.calibration.apply(v);
    }
  }
  return f;
}

struct SkillRow {
  std::string region;  // "all" for the pooled row, else the station id
  metrics::SkillReport report;
};

struct Scores {
  std::vector<SkillRow> rows;  // pooled first, then one row per station
  std::vector<metrics::RunningPoint> running;
  metrics::TercileBounds obs_bounds;
  metrics::TercileBounds pred_bounds;
};

namespace detail {

inline metrics::BoxLjung safe_box_ljung(const std::vector<double>& series) {
  std::vector<double> v;
  for (double x : series) {
    if (std::isfinite(x)) v.push_back(x);
  }
  const std::size_t h = std::max<std::size_t>(1, std::min<std::size_t>(10, v.size() / 5));
  if (v.size() <= h + 1) return {};
  try {
    return metrics::box_ljung(v, h);
  } catch (const ValidationError&) {
    return {};
  }
}

}  // namespace detail

// Pooled and per-station skill on the predict window. Observation terciles come from
// the reference window, prediction terciles from the calibrated hindcast before it.
[[nodiscard]] inline Scores score_forecast(const EnsembleForecast& f, const Panel& ground, const WindowSchedule& w,
                                           int running_window) {
  Scores out;
  const auto ref = reference_window(w);
  const auto n_st = f.stations.size();
  std::vector<double> ref_obs;
  std::vector<double> regional(static_cast<std::size_t>(ref.size()), 0.0);
  for (int t = ref.begin; t < ref.end; ++t) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& st : f.stations) {
      const double v = ground.at(st.observed, t);
      if (std::isfinite(v)) {
        ref_obs.push_back(v);
        sum += v;
        ++n;
      }
    }
    regional[static_cast<std::size_t>(t - ref.begin)] = n > 0 ? sum / static_cast<double>(n) : kNaN;
  }
  out.obs_bounds = metrics::tercile_bounds(ref_obs);
  std::vector<double> hind;
  for (std::size_t s = 0; s < n_st; ++s) {
    for (int t = f.span.begin; t < w.predict.begin; ++t) {
      const double v = f.at(s, t);
      if (std::isfinite(v)) hind.push_back(v);
    }
  }
  out.pred_bounds = hind.size() >= 3 ? metrics::tercile_bounds(hind) : out.obs_bounds;

  auto report = [&](const std::vector<std::size_t>& which, std::size_t fitted_means, const std::vector<double>& bl) {
    std::vector<double> p;
    std::vector<double> o;
    for (std::size_t s : which) {
      for (int t = w.predict.begin; t < w.predict.end; ++t) {
        const double pv = f.at(s, t);
        const double ov = ground.at(f.stations[s].observed, t);
        if (std::isfinite(pv) && std::isfinite(ov)) {
          p.push_back(pv);
          o.push_back(ov);
        }
      }
    }
    metrics::SkillReport r;
    r.n_pairs = p.size();
    if (p.size() < 3 || p.size() <= fitted_means + 2) throw ValidationError("too few forecast pairs to score");
    const auto c = metrics::pearson(p, o);
    r.pearson_r = c.r;
    r.degenerate = c.degenerate;
    r.dof = metrics::adjusted_dof(p.size(), fitted_means);
    r.p_value = metrics::correlation_pvalue(c.r, static_cast<double>(r.dof));
    r.heidke = metrics::heidke_skill(p, o, out.obs_bounds, out.pred_bounds);
    const auto lb = detail::safe_box_ljung(bl);
    r.box_ljung_q = lb.q;
    r.box_ljung_p = lb.p;
    return r;
  };

  std::vector<std::size_t> all(n_st);
  for (std::size_t s = 0; s < n_st; ++s) all[s] = s;
  out.rows.push_back({"all", report(all, static_cast<std::size_t>(w.predict.size()), regional)});
  for (std::size_t s = 0; s < n_st; ++s) {
    std::vector<double> obs;
    for (int t = ref.begin; t < ref.end; ++t) obs.push_back(ground.at(f.stations[s].observed, t));
    try {
      out.rows.push_back({f.stations[s].id, report({s}, 0, obs)});
    } catch (const ValidationError&) {
      // a station with fewer than 3 forecast pairs gets no row
    }
  }

  std::vector<std::vector<double>> obs(n_st);
  for (std::size_t s = 0; s < n_st; ++s) {
    for (int t = f.span.begin; t < f.span.end; ++t) obs[s].push_back(ground.at(f.stations[s].observed, t));
  }
  out.running = metrics::running_skill(f.predicted, obs, running_window, out.obs_bounds, out.pred_bounds);
  return out;
}

// Per attractor, the one-sided significance of every fitted model's Stein-shrunk
// predictions pooled over stations on the target period, counted by
// Benjamini-Hochberg; then smoothing and the count-weighted estimate.
[[nodiscard]] inline inversion::InversionResult invert(const PipelineConfig& cfg, const PreparedLibrary& lib,
                                                       const Panel& ground, SeasonRange target) {
  const auto stations = resolve_stations(cfg);
  const auto settings = combine_settings(cfg, lib.shrinkage.shrinkage_factor);
  std::vector<std::vector<inversion::KeyEvaluation>> evals(lib.fitted.size());
  parallel_for(lib.fitted.size(), cfg.threads, [&](std::size_t a) {
    const auto shrunk = ensemble::shrunk_predictions(lib.fitted[a].members, ground, target, settings);
    for (const auto& m : shrunk) {
      inversion::KeyEvaluation e;
      for (std::size_t s = 0; s < stations.size(); ++s) {
        for (int t = target.begin; t < target.end; ++t) {
          const double p = m[s][static_cast<std::size_t>(t - target.begin)];
          const double o = ground.at(stations[s].observed, t);
          if (std::isfinite(p) && std::isfinite(o)) {
            e.predicted.push_back(p);
            e.observed.push_back(o);
          }
        }
      }
      e.n_fitted_means = static_cast<std::size_t>(target.size());
      if (e.predicted.size() > e.n_fitted_means + 2) evals[a].push_back(std::move(e));
    }
    if (evals[a].empty()) throw ValidationError("attractor " + lib.fitted[a].id + ": no scorable model on the target");
  });
  const auto raw = inversion::key_significance_counts(evals, cfg.inversion.q);
  std::vector<std::string> ids;
  std::vector<double> params;
  std::vector<double> summaries;
  std::vector<double> counts;
  for (std::size_t a = 0; a < lib.fitted.size(); ++a) {
    ids.push_back(lib.fitted[a].id);
    params.push_back(lib.fitted[a].parameter);
    summaries.push_back(lib.fitted[a].summary);
    counts.push_back(static_cast<double>(raw[a]));
  }
  auto smoothed = lib.fitted.size() >= 3 ? inversion::smooth_counts(counts, cfg.inversion.bandwidth) : counts;
  auto result = inversion::estimate_parameter(std::move(ids), std::move(params), std::move(summaries), std::move(counts),
                                              std::move(smoothed), cfg.inversion.fraction);
  result.q = cfg.inversion.q;
  return result;
}

[[nodiscard]] inline SeasonRange inversion_target(const PipelineConfig& cfg, const WindowSchedule& w) {
  return {w.select.end, w.select.end + cfg.inversion.target_length};
}

struct PipelineResult {
  std::string config_hash;
  std::uint64_t seed = 0;
  WindowSchedule schedule;
  Ground ground;
  StandardizedPanel ground_z;
  PreparedLibrary prepared;
  Selection selection;
  std::optional<EnsembleForecast> forecast;
  std::optional<Scores> scores;
  std::optional<inversion::InversionResult> inversion;
  std::optional<std::string> inversion_error;  // no attractor had a significant model

  [[nodiscard]] bool no_forecast() const noexcept { return selection.no_forecast; }
};

// Ground panel: loaded by the caller or generated from the surrogate.
[[nodiscard]] inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::optional<Ground> ground = std::nullopt,
                                                 const Logger& log = {}) {
  validate(cfg);
  PipelineResult out;
  out.config_hash = config_hash(cfg);
  out.seed = cfg.seed;
  out.schedule = resolve_schedule(cfg);
  const auto& w = out.schedule;
  if (ground) {
    out.ground = std::move(*ground);
  } else {
    try {
      out.ground = surrogate_ground(cfg, ground_length(cfg));
    } catch (const Error& e) {
      throw StageError("surrogate-dynamics", std::string("ground: ") + e.what());
    }
  }
  if (out.ground.raw.first_season() > 0 || out.ground.raw.seasons().end < ground_length(cfg)) {
    throw ValidationError("ground panel does not cover seasons 0.." + std::to_string(ground_length(cfg) - 1));
  }
  try {
    out.ground_z = standardize(out.ground.raw, reference_window(w));
  } catch (const Error& e) {
    throw StageError("cli-harness", std::string("standardize: ") + e.what());
  }
  const Panel& g = out.ground_z.values;

  out.prepared = prepare_library(cfg, g, log);
  try {
    out.selection = select_keys(cfg, out.prepared, g, w);
  } catch (const Error& e) {
    throw StageError("ensemble-selection", e.what());
  }
  log_line(log, "select: " + std::to_string(out.selection.keys.size()) + " keys formed, " +
                    std::to_string(out.selection.retained.size()) + " retained");
  if (!out.selection.no_forecast) {
    try {
      out.forecast = make_forecast(cfg, out.selection.retained, g, w);
    } catch (const Error& e) {
      throw StageError("shrinkage-calibration", e.what());
    }
    log_line(log, "forecast: " + std::to_string(out.forecast->contributing.size()) + " keys in the median");
    try {
      out.scores = score_forecast(*out.forecast, g, w, cfg.running_window);
    } catch (const Error& e) {
      throw StageError("metrics", e.what());
    }
    log_line(log, "score: r " + std::to_string(out.scores->rows.front().report.pearson_r) + ", p " +
                      std::to_string(out.scores->rows.front().report.p_value));
  } else {
    log_line(log, "select: no predictor passed retention; no forecast");
  }
  if (cfg.inversion.enabled) {
    try {
      out.inversion = invert(cfg, out.prepared, g, inversion_target(cfg, w));
      log_line(log, "invert: estimate " + std::to_string(out.inversion->estimate));
    } catch (const ValidationError& e) {
      out.inversion_error = e.what();
      log_line(log, std::string("invert: ") + e.what());
    }
  }
  return out;
}

struct SweepTrial {
  double truth = 0.0;
  std::optional<inversion::InversionResult> result;  // empty: no attractor had a significant model
};

// Inverts surrogate grounds generated at each of `truths`, reusing one library
// prepared against a ground at the configured forcing.
[[nodiscard]] inline std::vector<SweepTrial> inversion_sweep(const PipelineConfig& cfg, const std::vector<double>& truths,
                                                             const Logger& log = {}) {
  validate(cfg);
  const auto w = resolve_schedule(cfg);
  const int n = ground_length(cfg);
  const auto base = surrogate_ground(cfg, n);
  const auto lib = prepare_library(cfg, standardize(base.raw, reference_window(w)).values, log);
  std::vector<SweepTrial> out;
  for (double truth : truths) {
    PipelineConfig c = cfg;
    c.ground.forcing = truth;
    const auto g = surrogate_ground(c, n);
    const auto z = standardize(g.raw, reference_window(w));
    SweepTrial trial{truth, std::nullopt};
    try {
      trial.result = invert(c, lib, z.values, inversion_target(c, w));
      log_line(log, "invert: truth " + std::to_string(truth) + " estimate " + std::to_string(trial.result->estimate));
    } catch (const ValidationError& e) {
      log_line(log, "invert: truth " + std::to_string(truth) + ": " + e.what());
    }
    out.push_back(std::move(trial));
  }
  return out;
}

}  // namespace lpchaos
