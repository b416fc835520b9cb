#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lpchaos/embedding.hpp"
#include "lpchaos/ensemble.hpp"
#include "lpchaos/error.hpp"
#include "lpchaos/shrinkage.hpp"
#include "lpchaos/surrogate.hpp"
#include "lpchaos/util.hpp"

namespace lpchaos {

struct StationSpec {
  std::string id;
  int site = 0;
};

struct GroundSpec {
  std::string path;       // station,year,season,value file; empty: generate from the surrogate
  int first_year = 2000;  // year of season index 0 for generated ground
  double forcing = 8.0;   // surrogate ground truth parameter
  double snr = 2.0;       // signal-to-noise variance ratio of the observation noise
};

struct InversionSpec {
  bool enabled = false;
  double q = 0.01;
  double bandwidth = 1.0;
  double fraction = 0.9;
  int target_length = 13;  // seasons after the select window used as the target period
};

// Every tunable constant of a run.
struct PipelineConfig {
  std::uint64_t seed = 20111;
  int threads = 1;
  surrogate::SurrogateConfig surrogate;
  std::vector<double> forcings{5, 6, 7, 8, 9, 10};
  std::vector<StationSpec> stations;
  std::vector<int> catalog_variables{kSiteValue, kLocalEnergy};
  int neighborhood = 2;  // catalog sites within this ring distance of a station
  bool catalog_indices = true;
  SamplingSpec embedding;
  std::size_t max_subset_size = 8;
  WindowLengths windows;
  std::optional<WindowSchedule> schedule;  // explicit windows override `windows`
  std::vector<int> top_percents{10, 30, 100};
  double retain_threshold = 0.5;
  std::size_t top_k = 10;
  ensemble::VoteMode vote_mode = ensemble::VoteMode::kLargestCluster;
  std::size_t vote_clusters = 2;
  std::size_t bootstrap_reps = 1000;
  shrinkage::SteinMode stein_mode = shrinkage::SteinMode::kExact;
  int calibration_length = 8;
  shrinkage::CalibrationDirection calibration_direction = shrinkage::CalibrationDirection::kObservationsOnPredictions;
  int running_window = 4;
  GroundSpec ground;
  InversionSpec inversion;
  std::string output_dir = "out";
};

// Eight adjacent sites forming one region, the way a forecast region groups nearby stations.
[[nodiscard]] inline std::vector<StationSpec> default_stations(std::size_t sites) {
  std::vector<StationSpec> out;
  for (int i = 0; i < 8 && i < static_cast<int>(sites); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "S%02d", i);
    out.push_back({id, i});
  }
  return out;
}

// Resolved window schedule; season 0 is reserved for lag history.
[[nodiscard]] inline WindowSchedule resolve_schedule(const PipelineConfig& cfg) {
  if (cfg.schedule) return *cfg.schedule;
  return split_windows(cfg.embedding.lag_max, cfg.windows);
}

inline void validate(const PipelineConfig& cfg) {
  if (cfg.threads < 1) throw ValidationError("threads must be at least 1");
  if (cfg.forcings.empty()) throw ValidationError("forcing grid is empty");
  if (cfg.stations.empty()) throw ValidationError("no stations configured");
  for (const auto& s : cfg.stations) {
    if (s.site < 0 || static_cast<std::size_t>(s.site) >= cfg.surrogate.sites) {
      throw ValidationError("station " + s.id + " maps to a site outside the surrogate grid");
    }
  }
  if (cfg.embedding.lag_min < cfg.embedding.lead + 1) throw ValidationError("lag_min must exceed lead");
  if (cfg.embedding.dim < 1 || cfg.embedding.n_maps < 1) throw ValidationError("bad embedding settings");
  for (int x : cfg.top_percents) {
    if (!ensemble::valid_top_percent(x)) throw ValidationError("top percents must be drawn from {10, 30, 100}");
  }
  if (cfg.calibration_length != 8 && cfg.calibration_length != 12) {
    throw ValidationError("calibration length must be 8 or 12 seasons");
  }
  if (!(cfg.inversion.q > 0.0 && cfg.inversion.q < 1.0)) throw ValidationError("FDR q must lie in (0, 1)");
  if (!(cfg.ground.snr > 0.0)) throw ValidationError("ground snr must be positive");
  const auto w = resolve_schedule(cfg);
  validate_schedule(w);
  if (w.rank.begin < cfg.embedding.lag_max) throw ValidationError("rank window starts before the lag history");
  if (w.predict.begin - cfg.calibration_length < w.select.begin) {
    throw ValidationError("calibration window reaches into the rank window");
  }
}

namespace detail {

inline nlohmann::json range_json(SeasonRange r) { return nlohmann::json::array({r.begin, r.end}); }

inline SeasonRange range_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("window must be a [begin, end) pair");
  return {j[0].get<int>(), j[1].get<int>()};
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json to_json(const PipelineConfig& c) {
  using nlohmann::json;
  json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  json indices = json::array();
  for (const auto& d : c.surrogate.indices) indices.push_back({{"region_a", d.region_a}, {"region_b", d.region_b}});
  j["surrogate"] = {{"sites", c.surrogate.sites},
                    {"dt", c.surrogate.dt},
                    {"season_length", c.surrogate.season_length},
                    {"total_seasons", c.surrogate.total_seasons},
                    {"stationarity_window", c.surrogate.stationarity_window},
                    {"slope_tol", c.surrogate.slope_tol},
                    {"min_steady_seasons", c.surrogate.min_steady_seasons},
                    {"trailing_seasons", c.surrogate.trailing_seasons},
                    {"perturbation", c.surrogate.perturbation},
                    {"estimate_dimension", c.surrogate.estimate_dimension},
                    {"dimension_sample", c.surrogate.dimension_sample},
                    {"indices", indices}};
  j["library"] = {{"forcings", c.forcings}};
  json stations = json::array();
  for (const auto& s : c.stations) stations.push_back({{"id", s.id}, {"site", s.site}});
  j["stations"] = stations;
  j["catalog"] = {{"variables", c.catalog_variables}, {"neighborhood", c.neighborhood}, {"indices", c.catalog_indices}};
  j["embedding"] = {{"n_maps", c.embedding.n_maps}, {"dim", c.embedding.dim},        {"lag_min", c.embedding.lag_min},
                    {"lag_max", c.embedding.lag_max}, {"lead", c.embedding.lead}, {"max_subset_size", c.max_subset_size}};
  j["windows"] = {{"rank", c.windows.rank}, {"select", c.windows.select}, {"retain", c.windows.retain},
                  {"predict", c.windows.predict}};
  if (c.schedule) {
    j["schedule"] = {{"rank", detail::range_json(c.schedule->rank)},
                     {"select", detail::range_json(c.schedule->select)},
                     {"retain", detail::range_json(c.schedule->retain)},
                     {"predict", detail::range_json(c.schedule->predict)}};
  }
  j["selection"] = {{"top_percents", c.top_percents},
                    {"threshold", c.retain_threshold},
                    {"top_k", c.top_k},
                    {"vote_mode", c.vote_mode == ensemble::VoteMode::kLargestCluster ? "largest" : "two_largest"},
                    {"vote_clusters", c.vote_clusters}};
  j["shrinkage"] = {{"bootstrap_reps", c.bootstrap_reps},
                    {"stein", c.stein_mode == shrinkage::SteinMode::kExact ? "exact" : "positive_part"}};
  j["calibration"] = {{"length", c.calibration_length},
                      {"direction", c.calibration_direction == shrinkage::CalibrationDirection::kObservationsOnPredictions
                                        ? "observations_on_predictions"
                                        : "predictions_on_observations"}};
  j["skill"] = {{"running_window", c.running_window}};
  j["ground"] = {{"path", c.ground.path},
                 {"first_year", c.ground.first_year},
                 {"forcing", c.ground.forcing},
                 {"snr", c.ground.snr}};
  j["inversion"] = {{"enabled", c.inversion.enabled},
                    {"q", c.inversion.q},
                    {"bandwidth", c.inversion.bandwidth},
                    {"fraction", c.inversion.fraction},
                    {"target_length", c.inversion.target_length}};
  j["output_dir"] = c.output_dir;
  return j;
}

// Missing keys keep their defaults; unknown keys are ignored.
[[nodiscard]] inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    if (!j.contains("seed")) throw ValidationError("config must set a seed");
    c.seed = j.at("seed").get<std::uint64_t>();
    detail::read(j, "threads", c.threads);
    detail::read(j, "output_dir", c.output_dir);
    if (j.contains("surrogate")) {
      const auto& s = j["surrogate"];
      detail::read(s, "sites", c.surrogate.sites);
      detail::read(s, "dt", c.surrogate.dt);
      detail::read(s, "season_length", c.surrogate.season_length);
      detail::read(s, "total_seasons", c.surrogate.total_seasons);
      detail::read(s, "stationarity_window", c.surrogate.stationarity_window);
      detail::read(s, "slope_tol", c.surrogate.slope_tol);
      detail::read(s, "min_steady_seasons", c.surrogate.min_steady_seasons);
      detail::read(s, "trailing_seasons", c.surrogate.trailing_seasons);
      detail::read(s, "perturbation", c.surrogate.perturbation);
      detail::read(s, "estimate_dimension", c.surrogate.estimate_dimension);
      detail::read(s, "dimension_sample", c.surrogate.dimension_sample);
      if (s.contains("indices")) {
        for (const auto& d : s["indices"]) {
          c.surrogate.indices.push_back(
              {d.at("region_a").get<std::vector<int>>(), d.at("region_b").get<std::vector<int>>()});
        }
      }
    }
    if (j.contains("library")) detail::read(j["library"], "forcings", c.forcings);
    if (j.contains("stations")) {
      for (const auto& s : j["stations"]) c.stations.push_back({s.at("id").get<std::string>(), s.at("site").get<int>()});
    }
    if (j.contains("catalog")) {
      const auto& s = j["catalog"];
      detail::read(s, "variables", c.catalog_variables);
      detail::read(s, "neighborhood", c.neighborhood);
      detail::read(s, "indices", c.catalog_indices);
    }
    if (j.contains("embedding")) {
      const auto& s = j["embedding"];
      detail::read(s, "n_maps", c.embedding.n_maps);
      detail::read(s, "dim", c.embedding.dim);
      detail::read(s, "lag_min", c.embedding.lag_min);
      detail::read(s, "lag_max", c.embedding.lag_max);
      detail::read(s, "lead", c.embedding.lead);
      detail::read(s, "max_subset_size", c.max_subset_size);
    }
    if (j.contains("windows")) {
      const auto& s = j["windows"];
      detail::read(s, "rank", c.windows.rank);
      detail::read(s, "select", c.windows.select);
      detail::read(s, "retain", c.windows.retain);
      detail::read(s, "predict", c.windows.predict);
    }
    if (j.contains("schedule")) {
      const auto& s = j["schedule"];
      c.schedule = WindowSchedule{detail::range_from(s.at("rank")), detail::range_from(s.at("select")),
                                  detail::range_from(s.at("retain")), detail::range_from(s.at("predict"))};
    }
    if (j.contains("selection")) {
      const auto& s = j["selection"];
      detail::read(s, "top_percents", c.top_percents);
      detail::read(s, "threshold", c.retain_threshold);
      detail::read(s, "top_k", c.top_k);
      detail::read(s, "vote_clusters", c.vote_clusters);
      if (s.contains("vote_mode")) {
        const auto m = s["vote_mode"].get<std::string>();
        if (m == "largest") {
          c.vote_mode = ensemble::VoteMode::kLargestCluster;
        } else if (m == "two_largest") {
          c.vote_mode = ensemble::VoteMode::kAverageTwoLargest;
        } else {
          throw ValidationError("unknown vote_mode '" + m + "'");
        }
      }
    }
    if (j.contains("shrinkage")) {
      const auto& s = j["shrinkage"];
      detail::read(s, "bootstrap_reps", c.bootstrap_reps);
      if (s.contains("stein")) {
        const auto m = s["stein"].get<std::string>();
        if (m == "exact") {
          c.stein_mode = shrinkage::SteinMode::kExact;
        } else if (m == "positive_part") {
          c.stein_mode = shrinkage::SteinMode::kPositivePart;
        } else {
          throw ValidationError("unknown stein mode '" + m + "'");
        }
      }
    }
    if (j.contains("calibration")) {
      const auto& s = j["calibration"];
      detail::read(s, "length", c.calibration_length);
      if (s.contains("direction")) {
        const auto d = s["direction"].get<std::string>();
        if (d == "observations_on_predictions") {
          c.calibration_direction = shrinkage::CalibrationDirection::kObservationsOnPredictions;
        } else if (d == "predictions_on_observations") {
          c.calibration_direction = shrinkage::CalibrationDirection::kPredictionsOnObservations;
        } else {
          throw ValidationError("unknown calibration direction '" + d + "'");
        }
      }
    }
    if (j.contains("skill")) detail::read(j["skill"], "running_window", c.running_window);
    if (j.contains("ground")) {
      const auto& s = j["ground"];
      detail::read(s, "path", c.ground.path);
      detail::read(s, "first_year", c.ground.first_year);
      detail::read(s, "forcing", c.ground.forcing);
      detail::read(s, "snr", c.ground.snr);
    }
    if (j.contains("inversion")) {
      const auto& s = j["inversion"];
      detail::read(s, "enabled", c.inversion.enabled);
      detail::read(s, "q", c.inversion.q);
      detail::read(s, "bandwidth", c.inversion.bandwidth);
      detail::read(s, "fraction", c.inversion.fraction);
      detail::read(s, "target_length", c.inversion.target_length);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (c.stations.empty()) c.stations = default_stations(c.surrogate.sites);
  return c;
}

// Stable 64-bit hash of the canonical JSON form, as 16 hex digits. Thread count
// and output directory do not change results and are left out.
[[nodiscard]] inline std::string config_hash(const PipelineConfig& c) {
  auto j = to_json(c);
  j.erase("threads");
  j.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

}  // namespace lpchaos
