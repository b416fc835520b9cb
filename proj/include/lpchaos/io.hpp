#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lpchaos/config.hpp"
#include "lpchaos/error.hpp"
#include "lpchaos/inversion.hpp"
#include "lpchaos/keys.hpp"
#include "lpchaos/metrics.hpp"
#include "lpchaos/panel.hpp"
#include "lpchaos/pipeline.hpp"
#include "lpchaos/shrinkage.hpp"
#include "lpchaos/surrogate.hpp"

// Reading and writing run artifacts. Delimited files start with a
// "# config_hash=... seed=..." line; JSON files carry the same two fields.
namespace lpchaos::io {

inline constexpr int kKeyFormatVersion = 1;

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

[[nodiscard]] inline std::string header_line(const Provenance& p) {
  return "# config_hash=" + p.config_hash + " seed=" + std::to_string(p.seed) + "\n";
}

// Shortest text that reads back to the same double.
[[nodiscard]] inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

[[nodiscard]] inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[nodiscard]] inline nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

[[nodiscard]] inline PipelineConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json(path));
}

// ---- attractor library ----------------------------------------------------

inline void write_attractor(const std::filesystem::path& dir, const surrogate::AttractorEstimate& a,
                            const Provenance& p) {
  std::string csv = header_line(p) + "variable_id,site_id,season_index,value\n";
  for (const auto id : a.panel.ids()) {
    const auto& v = a.panel.series(id);
    for (int t = 0; t < a.panel.n_seasons(); ++t) {
      csv += std::to_string(id.variable) + "," + std::to_string(id.site) + "," +
             std::to_string(a.panel.first_season() + t) + "," + fmt(v[static_cast<std::size_t>(t)]) + "\n";
    }
  }
  write_text(dir / (a.parameter.label + ".csv"), csv);
  nlohmann::json meta = {{"label", a.parameter.label},
                         {"parameter", a.parameter.value},
                         {"steady_start", a.steady_start},
                         {"n_seasons", a.panel.n_seasons()},
                         {"summary", a.summary},
                         {"seed", a.seed},
                         {"config_hash", p.config_hash},
                         {"master_seed", p.seed}};
  meta["dimension_estimate"] = a.dimension_estimate ? nlohmann::json(*a.dimension_estimate) : nlohmann::json(nullptr);
  write_json(dir / (a.parameter.label + ".meta.json"), meta);
}

namespace detail {

[[nodiscard]] inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

[[nodiscard]] inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

[[nodiscard]] inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(where + ": cannot parse number '" + s + "'");
  }
}

[[nodiscard]] inline int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(where + ": cannot parse integer '" + s + "'");
  }
}

}  // namespace detail

[[nodiscard]] inline surrogate::AttractorEstimate read_attractor(const std::filesystem::path& dir,
                                                                 const std::string& label) {
  const auto meta = read_json(dir / (label + ".meta.json"));
  surrogate::AttractorEstimate a;
  a.parameter = {meta.at("parameter").get<double>(), meta.at("label").get<std::string>()};
  a.steady_start = meta.at("steady_start").get<int>();
  a.summary = meta.at("summary").get<double>();
  a.seed = meta.at("seed").get<std::uint64_t>();
  if (!meta.at("dimension_estimate").is_null()) a.dimension_estimate = meta["dimension_estimate"].get<double>();
  a.panel = Panel(a.steady_start, meta.at("n_seasons").get<int>());
  std::istringstream in(read_text(dir / (label + ".csv")));
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const std::string where = label + ".csv:" + std::to_string(lineno);
    if (!header) {
      if (line != "variable_id,site_id,season_index,value") throw ValidationError(where + ": unexpected header");
      header = true;
      continue;
    }
    const auto f = detail::split(line);
    if (f.size() != 4) throw ValidationError(where + ": expected 4 fields");
    a.panel.set({detail::parse_int(f[0], where), detail::parse_int(f[1], where)}, detail::parse_int(f[2], where),
                detail::parse_double(f[3], where));
  }
  return a;
}

// ---- station panels -------------------------------------------------------

inline constexpr const char* kSeasonNames[kSeasonsPerYear] = {"winter", "spring", "summer", "fall"};

struct StationRecords {
  int first_year = 0;
  int n_seasons = 0;
  std::map<std::string, std::vector<double>> values;   // by station, season index from winter of first_year
  std::vector<std::pair<std::string, int>> missing;     // cells with an empty value or no row
};

// Parses "station,year,season,value" text. Empty values are missing cells;
// duplicate (station, year, season) rows are an error.
[[nodiscard]] inline StationRecords parse_station_panel(const std::string& text, const std::string& name = "panel") {
  struct Row {
    std::string station;
    int season;
    double value;
  };
  std::vector<Row> rows;
  std::map<std::pair<std::string, int>, int> seen;  // -> line number
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  int min_year = 0;
  bool any = false;
  std::vector<std::pair<std::string, std::pair<int, int>>> raw;  // station, (year, season)
  std::vector<double> raw_values;
  std::vector<int> raw_lines;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty() || line[0] == '#') continue;
    const std::string where = name + ":" + std::to_string(lineno);
    if (!header) {
      if (detail::trim(line) != "station,year,season,value") {
        throw ValidationError(where + ": header must be station,year,season,value");
      }
      header = true;
      continue;
    }
    const auto f = detail::split(line);
    if (f.size() != 4) throw ValidationError(where + ": expected 4 fields, got " + std::to_string(f.size()));
    const std::string station = detail::trim(f[0]);
    if (station.empty()) throw ValidationError(where + ": empty station id");
    const int year = detail::parse_int(detail::trim(f[1]), where);
    std::string season = detail::trim(f[2]);
    std::transform(season.begin(), season.end(), season.begin(), [](unsigned char c) { return std::tolower(c); });
    const auto it = std::find(std::begin(kSeasonNames), std::end(kSeasonNames), season);
    if (it == std::end(kSeasonNames)) throw ValidationError(where + ": unknown season '" + f[2] + "'");
    const int s = static_cast<int>(it - std::begin(kSeasonNames));
    const std::string value = detail::trim(f[3]);
    const double v = value.empty() ? kNaN : detail::parse_double(value, where);
    const auto [pos, fresh] = seen.try_emplace({station, year * kSeasonsPerYear + s}, lineno);
    if (!fresh) {
      throw ValidationError(where + ": duplicate row for station " + station + " " + season + " " +
                            std::to_string(year) + " (first seen on line " + std::to_string(pos->second) + ")");
    }
    raw.push_back({station, {year, s}});
    raw_values.push_back(v);
    raw_lines.push_back(lineno);
    min_year = any ? std::min(min_year, year) : year;
    any = true;
  }
  if (!header) throw ValidationError(name + ": missing header");
  if (!any) throw ValidationError(name + ": no data rows");

  StationRecords out;
  out.first_year = min_year;
  int last = 0;
  for (const auto& r : raw) last = std::max(last, (r.second.first - min_year) * kSeasonsPerYear + r.second.second);
  out.n_seasons = last + 1;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto& series = out.values.try_emplace(raw[i].first, static_cast<std::size_t>(out.n_seasons), kNaN).first->second;
    series[static_cast<std::size_t>((raw[i].second.first - min_year) * kSeasonsPerYear + raw[i].second.second)] =
        raw_values[i];
  }
  for (const auto& [station, series] : out.values) {
    for (int t = 0; t < out.n_seasons; ++t) {
      if (!std::isfinite(series[static_cast<std::size_t>(t)])) out.missing.push_back({station, t});
    }
  }
  return out;
}

[[nodiscard]] inline StationRecords load_station_panel(const std::filesystem::path& path) {
  return parse_station_panel(read_text(path), path.string());
}

// Ground panel from station records: each configured station becomes a station
// series, and each station site gets the mean of its stations as its site value.
[[nodiscard]] inline Ground ground_from_records(const StationRecords& rec, const PipelineConfig& cfg) {
  Ground g;
  g.first_year = rec.first_year;
  g.stations = resolve_stations(cfg);
  g.raw = Panel(0, rec.n_seasons);
  std::map<int, std::vector<const std::vector<double>*>> by_site;
  for (const auto& st : g.stations) {
    const auto it = rec.values.find(st.id);
    if (it == rec.values.end()) throw ValidationError("station " + st.id + " has no rows in the ground panel");
    g.raw.set_series(st.observed, it->second);
    by_site[st.target.site].push_back(&it->second);
  }
  for (const auto& [site, list] : by_site) {
    std::vector<double> mean(static_cast<std::size_t>(rec.n_seasons), kNaN);
    for (std::size_t t = 0; t < mean.size(); ++t) {
      double sum = 0.0;
      int n = 0;
      for (const auto* s : list) {
        if (std::isfinite((*s)[t])) {
          sum += (*s)[t];
          ++n;
        }
      }
      if (n > 0) mean[t] = sum / n;
    }
    g.raw.set_series({kSiteValue, site}, std::move(mean));
  }
  for (const auto& cell : rec.missing) {
    if (std::any_of(g.stations.begin(), g.stations.end(), [&](const auto& s) { return s.id == cell.first; })) {
      g.missing.push_back(cell);
    }
  }
  return g;
}

// Station records of a ground panel in the input format.
[[nodiscard]] inline std::string format_station_panel(const Ground& g) {
  std::string out = "station,year,season,value\n";
  for (const auto& st : g.stations) {
    for (int t = g.raw.first_season(); t < g.raw.seasons().end; ++t) {
      const double v = g.raw.at(st.observed, t);
      out += st.id + "," + std::to_string(g.first_year + t / kSeasonsPerYear) + "," +
             kSeasonNames[season_of_year(t)] + "," + (std::isfinite(v) ? fmt(v) : "") + "\n";
    }
  }
  return out;
}

// ---- delay maps and keys --------------------------------------------------

[[nodiscard]] inline nlohmann::json to_json(const DelayMap& m) {
  nlohmann::json coords = nlohmann::json::array();
  for (const auto& c : m.coords) coords.push_back({c.variable, c.site, c.lag});
  return {{"coords", coords}, {"lead", m.lead}};
}

[[nodiscard]] inline DelayMap delay_map_from_json(const nlohmann::json& j) {
  DelayMap m;
  m.lead = j.at("lead").get<int>();
  for (const auto& c : j.at("coords")) m.coords.push_back({c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()});
  return m;
}

[[nodiscard]] inline nlohmann::json to_json(const SubsetModel& m) {
  return {{"columns", m.columns}, {"coefficients", m.coefficients}, {"intercept", m.intercept}, {"rss", m.rss},
          {"cp", m.cp},           {"n_rows", m.n_rows},             {"fitted_sd", m.fitted_sd}};
}

[[nodiscard]] inline SubsetModel subset_model_from_json(const nlohmann::json& j) {
  SubsetModel m;
  m.columns = j.at("columns").get<std::vector<int>>();
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  m.intercept = j.at("intercept").get<double>();
  m.rss = j.at("rss").get<double>();
  m.cp = j.at("cp").get<double>();
  m.n_rows = j.at("n_rows").get<std::size_t>();
  m.fitted_sd = j.at("fitted_sd").get<double>();
  if (m.columns.size() != m.coefficients.size()) throw ValidationError("model columns and coefficients differ in length");
  return m;
}

[[nodiscard]] inline nlohmann::json to_json(const ensemble::KeyMember& m) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& s : m.models) models.push_back(to_json(s));
  return {{"map", to_json(m.map)}, {"models", models}};
}

[[nodiscard]] inline ensemble::KeyMember key_member_from_json(const nlohmann::json& j) {
  ensemble::KeyMember m;
  m.map = delay_map_from_json(j.at("map"));
  for (const auto& s : j.at("models")) m.models.push_back(subset_model_from_json(s));
  return m;
}

[[nodiscard]] inline nlohmann::json range_json(SeasonRange r) { return nlohmann::json::array({r.begin, r.end}); }

[[nodiscard]] inline SeasonRange range_from_json(const nlohmann::json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

[[nodiscard]] inline nlohmann::json to_json(const ensemble::PredictorKey& k) {
  nlohmann::json stations = nlohmann::json::array();
  for (const auto& s : k.stations) {
    stations.push_back({{"id", s.id},
                        {"target", {s.target.variable, s.target.site}},
                        {"observed", {s.observed.variable, s.observed.site}}});
  }
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : k.members) members.push_back(to_json(m));
  nlohmann::json j = {
      {"attractor_id", k.attractor_id},
      {"attractor_parameter", k.attractor_parameter},
      {"lead", k.lead},
      {"top_percent", k.top_percent},
      {"combiner", ensemble::to_string(k.combiner)},
      {"stations", stations},
      {"settings",
       {{"shrink_factor", k.settings.shrink_factor},
        {"stein", k.settings.stein_mode == shrinkage::SteinMode::kExact ? "exact" : "positive_part"},
        {"vote_mode", k.settings.vote_mode == ensemble::VoteMode::kLargestCluster ? "largest" : "two_largest"},
        {"vote_clusters", k.settings.vote_clusters},
        {"unit_scale", k.settings.unit_scale}}},
      {"rank_window", range_json(k.rank_window)},
      {"select_window", range_json(k.select_window)},
      {"correlation", k.correlation},
      {"selection", k.selection},
      {"members", members}};
  j["retain_window"] = k.retain_window ? range_json(*k.retain_window) : nlohmann::json(nullptr);
  j["retain_correlation"] = k.retain_correlation ? nlohmann::json(*k.retain_correlation) : nlohmann::json(nullptr);
  return j;
}

[[nodiscard]] inline ensemble::PredictorKey predictor_key_from_json(const nlohmann::json& j) {
  ensemble::PredictorKey k;
  k.attractor_id = j.at("attractor_id").get<std::string>();
  k.attractor_parameter = j.at("attractor_parameter").get<double>();
  k.lead = j.at("lead").get<int>();
  k.top_percent = j.at("top_percent").get<int>();
  if (!ensemble::valid_top_percent(k.top_percent)) throw ValidationError("key has an invalid top percent");
  k.combiner = ensemble::combiner_from_string(j.at("combiner").get<std::string>());
  for (const auto& s : j.at("stations")) {
    k.stations.push_back({s.at("id").get<std::string>(),
                          {s.at("target").at(0).get<int>(), s.at("target").at(1).get<int>()},
                          {s.at("observed").at(0).get<int>(), s.at("observed").at(1).get<int>()}});
  }
  const auto& st = j.at("settings");
  k.settings.shrink_factor = st.at("shrink_factor").get<double>();
  k.settings.stein_mode =
      st.at("stein").get<std::string>() == "exact" ? shrinkage::SteinMode::kExact : shrinkage::SteinMode::kPositivePart;
  k.settings.vote_mode = st.at("vote_mode").get<std::string>() == "largest" ? ensemble::VoteMode::kLargestCluster
                                                                           : ensemble::VoteMode::kAverageTwoLargest;
  k.settings.vote_clusters = st.at("vote_clusters").get<std::size_t>();
  k.settings.unit_scale = st.at("unit_scale").get<bool>();
  k.rank_window = range_from_json(j.at("rank_window"));
  k.select_window = range_from_json(j.at("select_window"));
  k.correlation = j.at("correlation").get<double>();
  k.selection = j.at("selection").get<std::vector<std::vector<std::size_t>>>();
  for (const auto& m : j.at("members")) k.members.push_back(key_member_from_json(m));
  if (!j.at("retain_window").is_null()) k.retain_window = range_from_json(j["retain_window"]);
  if (!j.at("retain_correlation").is_null()) k.retain_correlation = j["retain_correlation"].get<double>();
  for (const auto& sel : k.selection) {
    for (std::size_t i : sel) {
      if (i >= k.members.size()) throw ValidationError("key selection refers to a missing member");
    }
  }
  if (k.selection.size() != k.stations.size()) throw ValidationError("key selection does not match its stations");
  return k;
}

[[nodiscard]] inline nlohmann::json keys_document(const std::vector<ensemble::PredictorKey>& keys, const Provenance& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& k : keys) arr.push_back(to_json(k));
  return {{"format_version", kKeyFormatVersion}, {"config_hash", p.config_hash}, {"seed", p.seed}, {"keys", arr}};
}

[[nodiscard]] inline std::vector<ensemble::PredictorKey> keys_from_document(const nlohmann::json& doc) {
  if (!doc.contains("format_version") || doc["format_version"].get<int>() != kKeyFormatVersion) {
    throw ValidationError("unsupported key file format version");
  }
  std::vector<ensemble::PredictorKey> keys;
  try {
    for (const auto& k : doc.at("keys")) keys.push_back(predictor_key_from_json(k));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed key file: ") + e.what());
  }
  return keys;
}

[[nodiscard]] inline std::vector<ensemble::PredictorKey> load_keys(const std::filesystem::path& path) {
  return keys_from_document(read_json(path));
}

[[nodiscard]] inline nlohmann::json to_json(const std::vector<ensemble::SwitchDecision>& decisions) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : decisions) {
    arr.push_back({{"attractor_id", d.attractor_id},
                   {"top_percent", d.top_percent},
                   {"chosen", ensemble::to_string(d.choice.combiner)},
                   {"r_mean", d.choice.r_mean},
                   {"r_vote", d.choice.r_vote},
                   {"both_degenerate", d.choice.both_degenerate}});
  }
  return arr;
}

// Ground panel named by the config, if any.
[[nodiscard]] inline std::optional<Ground> load_ground(const PipelineConfig& cfg) {
  if (cfg.ground.path.empty()) return std::nullopt;
  return ground_from_records(load_station_panel(cfg.ground.path), cfg);
}

// ---- reports --------------------------------------------------------------

[[nodiscard]] inline nlohmann::json to_json(const shrinkage::ShrinkageReport& r, const Provenance& p) {
  return {{"shrinkage_factor", r.shrinkage_factor},
          {"n_replicates", r.n_replicates},
          {"n_stations", r.n_stations},
          {"sd_observed", r.sd_observed},
          {"sd_predicted", r.sd_predicted},
          {"signal_noise_ratio", r.signal_noise_ratio},
          {"mean_correlation", r.mean_correlation},
          {"mean_slope", r.mean_slope},
          {"bootstrap_seed", r.seed},
          {"config_hash", p.config_hash},
          {"seed", p.seed}};
}

// One row per region: correlation, p value, degrees of freedom, Heidke skill, residual checks.
[[nodiscard]] inline std::string format_skill(const std::vector<SkillRow>& rows, const Provenance& p) {
  std::string out = header_line(p) + "region,pearson_r,p_value,dof,heidke,n_pairs,box_ljung_q,box_ljung_p\n";
  for (const auto& r : rows) {
    const auto& s = r.report;
    out += r.region + "," + fmt(s.pearson_r) + "," + fmt(s.p_value) + "," + std::to_string(s.dof) + "," +
           fmt(s.heidke) + "," + std::to_string(s.n_pairs) + "," + fmt(s.box_ljung_q) + "," + fmt(s.box_ljung_p) + "\n";
  }
  return out;
}

[[nodiscard]] inline nlohmann::json to_json(const inversion::InversionResult& r, const Provenance& p) {
  nlohmann::json chosen = nlohmann::json::array();
  for (std::size_t i : r.chosen) chosen.push_back(r.ids[i]);
  return {{"ids", r.ids},
          {"parameters", r.parameters},
          {"summaries", r.summaries},
          {"raw_counts", r.raw_counts},
          {"smoothed_counts", r.smoothed},
          {"chosen", chosen},
          {"estimate", r.estimate},
          {"estimated_summary", r.estimated_summary},
          {"q", r.q},
          {"fraction", r.fraction},
          {"config_hash", p.config_hash},
          {"seed", p.seed}};
}

[[nodiscard]] inline nlohmann::json to_json(const EnsembleForecast& f, const Provenance& p) {
  nlohmann::json stations = nlohmann::json::array();
  for (std::size_t s = 0; s < f.stations.size(); ++s) {
    nlohmann::json seasons = nlohmann::json::array();
    for (int t = f.window.begin; t < f.window.end; ++t) {
      const double v = f.at(s, t);
      seasons.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    }
    stations.push_back({{"id", f.stations[s].id}, {"predicted", seasons}});
  }
  nlohmann::json combiners = nlohmann::json::array();
  for (int t = f.window.begin; t < f.window.end; ++t) {
    combiners.push_back(f.season_combiners[static_cast<std::size_t>(t - f.span.begin)]);
  }
  return {{"no_forecast", false},
          {"predict_window", range_json(f.window)},
          {"calibration_window", range_json(f.calibration_window)},
          {"calibration", {{"slope", f.calibration.slope}, {"intercept", f.calibration.intercept},
                           {"degenerate", f.calibration.degenerate}}},
          {"contributing_keys", f.contributing},
          {"season_combiners", combiners},
          {"stations", stations},
          {"config_hash", p.config_hash},
          {"seed", p.seed}};
}

[[nodiscard]] inline std::string season_label(int first_year, int t) {
  return std::to_string(first_year + t / kSeasonsPerYear) + "," + kSeasonNames[season_of_year(t)];
}

// Predicted vs observed: one row per (station, season) of `window`.
[[nodiscard]] inline std::string format_fig2(const EnsembleForecast& f, const Panel& ground, int first_year,
                                             SeasonRange window, const Provenance& p) {
  std::string out = header_line(p) + "station,season_index,year,season,predicted,observed\n";
  for (std::size_t s = 0; s < f.stations.size(); ++s) {
    for (int t = window.begin; t < window.end; ++t) {
      out += f.stations[s].id + "," + std::to_string(t) + "," + season_label(first_year, t) + "," + fmt(f.at(s, t)) +
             "," + fmt(ground.at(f.stations[s].observed, t)) + "\n";
    }
  }
  return out;
}

// Running skill: one row per running window.
[[nodiscard]] inline std::string format_running(const std::vector<metrics::RunningPoint>& pts, int span_begin,
                                                const Provenance& p) {
  std::string out = header_line(p) + "start_season,n_pairs,pearson_r,heidke,gap\n";
  for (const auto& pt : pts) {
    out += std::to_string(span_begin + pt.start) + "," + std::to_string(pt.n_pairs) + "," + fmt(pt.r) + "," +
           fmt(pt.hss) + "," + (pt.gap ? "1" : "0") + "\n";
  }
  return out;
}

// Per-attractor significance counts.
[[nodiscard]] inline std::string format_counts(const inversion::InversionResult& r, const Provenance& p) {
  std::string out = header_line(p) + "attractor,parameter,summary,raw_count,smoothed_count,chosen\n";
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    const bool chosen = std::find(r.chosen.begin(), r.chosen.end(), i) != r.chosen.end();
    out += r.ids[i] + "," + fmt(r.parameters[i]) + "," + fmt(r.summaries[i]) + "," + fmt(r.raw_counts[i]) + "," +
           fmt(r.smoothed[i]) + "," + (chosen ? "1" : "0") + "\n";
  }
  return out;
}

struct SweepPoint {
  double truth = 0.0;
  double estimate = kNaN;  // NaN when no attractor had a significant model
  double estimated_summary = kNaN;
  std::uint64_t trial_seed = 0;
};

// Inversion sweep: (true, estimated) parameter pairs.
[[nodiscard]] inline std::string format_fig3(const std::vector<SweepPoint>& pts, const Provenance& p) {
  std::string out = header_line(p) + "true_parameter,estimated_parameter,estimated_summary,trial_seed\n";
  for (const auto& pt : pts) {
    out += fmt(pt.truth) + "," + fmt(pt.estimate) + "," + fmt(pt.estimated_summary) + "," +
           std::to_string(pt.trial_seed) + "\n";
  }
  return out;
}

}  // namespace lpchaos::io
