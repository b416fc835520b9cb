#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>

#include "lpchaos.hpp"

namespace fs = std::filesystem;
using namespace lpchaos;

namespace {

// Small enough to run the whole pipeline in a few seconds.
nlohmann::json tiny_config() {
  return {
      {"seed", 7},
      {"threads", 1},
      {"surrogate",
       {{"sites", 12}, {"season_length", 1}, {"total_seasons", 300}, {"min_steady_seasons", 60},
        {"trailing_seasons", 60}}},
      {"library", {{"forcings", {6.0, 7.0, 8.0}}}},
      {"stations", {{{"id", "A"}, {"site", 0}}, {{"id", "B"}, {"site", 1}}, {{"id", "C"}, {"site", 2}},
                    {{"id", "D"}, {"site", 3}}}},
      {"embedding", {{"n_maps", 30}}},
      {"shrinkage", {{"bootstrap_reps", 100}}},
      {"selection", {{"threshold", -1.0}}},
      {"ground", {{"forcing", 7.0}}},
  };
}

PipelineConfig tiny() { return config_from_json(tiny_config()); }

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lpchaos_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LPCHAOS_CLI) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const nlohmann::json& j, const std::string& name) {
  const auto path = scratch_dir("configs_" + name) / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = io::read_text(e.path());
  }
  return out;
}

const char* kTwoStations =
    "station,year,season,value\n"
    "A,2000,winter,1.0\nA,2000,spring,2.0\nA,2000,summer,3.0\nA,2000,fall,4.0\n"
    "A,2001,winter,1.5\nA,2001,spring,2.5\nA,2001,summer,3.5\nA,2001,fall,4.5\n"
    "B,2000,winter,0.1\nB,2000,spring,0.2\nB,2000,summer,0.3\nB,2000,fall,0.4\n"
    "B,2001,winter,0.5\nB,2001,spring,0.6\nB,2001,summer,0.7\nB,2001,fall,0.8\n";

}  // namespace

TEST(LoadPanel, WellFormedFile) {
  const auto rec = io::parse_station_panel(kTwoStations);
  EXPECT_EQ(rec.first_year, 2000);
  EXPECT_EQ(rec.n_seasons, 8);
  ASSERT_EQ(rec.values.size(), 2u);
  std::size_t cells = 0;
  for (const auto& [id, v] : rec.values) cells += v.size();
  EXPECT_EQ(cells, 16u);
  EXPECT_TRUE(rec.missing.empty());
  EXPECT_EQ(rec.values.at("A")[5], 2.5);
}

TEST(LoadPanel, DuplicateRowNamesTheLine) {
  const std::string text = std::string(kTwoStations) + "A,2001,Spring,9.0\n";
  try {
    (void)io::parse_station_panel(text, "dup.csv");
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("dup.csv:18"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 7"), std::string::npos) << msg;
  }
}

TEST(LoadPanel, MalformedRowsReportLineNumbers) {
  EXPECT_THROW((void)io::parse_station_panel("station,year,value\n"), ValidationError);
  try {
    (void)io::parse_station_panel("station,year,season,value\nA,2000,monsoon,1\n", "x.csv");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("x.csv:2"), std::string::npos);
  }
  EXPECT_THROW((void)io::parse_station_panel("station,year,season,value\nA,2000,winter,abc\n"), ValidationError);
  EXPECT_THROW((void)io::parse_station_panel("station,year,season,value\n"), ValidationError);
}

TEST(LoadPanel, MissingCellsAreFlaggedAndDropRows) {
  std::string text = kTwoStations;
  text.replace(text.find("B,2000,fall,0.4"), 15, "B,2000,fall,");
  const auto rec = io::parse_station_panel(text);
  ASSERT_EQ(rec.missing.size(), 1u);
  EXPECT_EQ(rec.missing[0], (std::pair<std::string, int>{"B", 3}));

  auto cfg = tiny();
  cfg.stations = {{"A", 0}, {"B", 1}};
  const auto g = io::ground_from_records(rec, cfg);
  EXPECT_TRUE(std::isnan(g.raw.at({kStation, 1}, 3)));
  EXPECT_EQ(g.raw.at({kSiteValue, 0}, 3), 4.0);
  // a delay map reading the gap loses exactly the rows that touch it
  const DelayMap m{{{kStation, 1, 1}}, 0};
  const auto d = build_design_matrix(g.raw, m, {kStation, 0}, {1, 8});
  EXPECT_EQ(d.dropped, (std::vector<int>{4}));
  cfg.stations.push_back({"Z", 2});
  EXPECT_THROW((void)io::ground_from_records(rec, cfg), ValidationError);
}

TEST(LoadPanel, FormatRoundTrips) {
  auto cfg = tiny();
  cfg.stations = {{"A", 0}, {"B", 1}};
  const auto g = io::ground_from_records(io::parse_station_panel(kTwoStations), cfg);
  const auto again = io::ground_from_records(io::parse_station_panel(io::format_station_panel(g)), cfg);
  EXPECT_EQ(again.raw, g.raw);
}

TEST(Standardize, ConstantSeasonIsAnError) {
  Panel p(0, 16);
  std::vector<double> v(16);
  for (int t = 0; t < 16; ++t) v[static_cast<std::size_t>(t)] = season_of_year(t);
  p.set_series({kStation, 2}, v);
  try {
    (void)standardize(p, {0, 16});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("site 2"), std::string::npos) << e.what();
  }
}

TEST(Standardize, ReferenceMomentsAndRoundTrip) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(5.0, 3.0);
  Panel p(0, 60);
  for (int s = 0; s < 3; ++s) {
    std::vector<double> v(60);
    for (double& x : v) x = d(rng);
    p.set_series({kStation, s}, v);
  }
  const SeasonRange ref{0, 40};
  const auto z = standardize(p, ref);
  for (const auto id : p.ids()) {
    for (int soy = 0; soy < 4; ++soy) {
      std::vector<double> vals;
      for (int t = ref.begin; t < ref.end; ++t) {
        if (season_of_year(t) == soy) vals.push_back(z.values.at(id, t));
      }
      EXPECT_NEAR(detail::mean(vals), 0.0, 1e-12);
      EXPECT_NEAR(detail::sample_sd(vals), 1.0, 1e-12);
    }
  }
  const auto back = destandardize(z);
  for (const auto id : p.ids()) {
    for (int t = 0; t < 60; ++t) EXPECT_NEAR(back.at(id, t), p.at(id, t), 1e-10);
  }
  // values after the reference window do not move the factors
  Panel q = p;
  for (int t = 40; t < 60; ++t) q.set({kStation, 1}, t, 1e6);
  const auto zq = standardize(q, ref);
  for (const auto id : p.ids()) {
    for (int soy = 0; soy < 4; ++soy) {
      EXPECT_EQ(zq.factors.at(id)[static_cast<std::size_t>(soy)].mean, z.factors.at(id)[static_cast<std::size_t>(soy)].mean);
      EXPECT_EQ(zq.factors.at(id)[static_cast<std::size_t>(soy)].sd, z.factors.at(id)[static_cast<std::size_t>(soy)].sd);
    }
  }
}

TEST(Config, Validation) {
  EXPECT_NO_THROW(validate(tiny()));
  auto j = tiny_config();
  j.erase("seed");
  EXPECT_THROW((void)config_from_json(j), ValidationError);
  j = tiny_config();
  j["calibration"] = {{"direction", "sideways"}};
  EXPECT_THROW((void)config_from_json(j), ValidationError);
  j["calibration"] = {{"direction", "predictions_on_observations"}};
  EXPECT_EQ(config_from_json(j).calibration_direction, shrinkage::CalibrationDirection::kPredictionsOnObservations);

  auto cfg = tiny();
  cfg.schedule = WindowSchedule{{11, 39}, {39, 47}, {47, 55}, {53, 58}};
  EXPECT_THROW(validate(cfg), ValidationError);
  cfg = tiny();
  cfg.calibration_length = 9;
  EXPECT_THROW(validate(cfg), ValidationError);
  cfg = tiny();
  cfg.embedding.lag_min = 3;
  EXPECT_THROW(validate(cfg), ValidationError);
  cfg = tiny();
  cfg.top_percents = {50};
  EXPECT_THROW(validate(cfg), ValidationError);
  cfg = tiny();
  cfg.stations.push_back({"far", 40});
  EXPECT_THROW(validate(cfg), ValidationError);
}

TEST(Config, JsonRoundTripAndHash) {
  const auto cfg = tiny();
  const auto again = config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(again), to_json(cfg));
  auto other = cfg;
  other.threads = 4;
  other.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(other), config_hash(cfg));
  other.seed = 8;
  EXPECT_NE(config_hash(other), config_hash(cfg));
  EXPECT_EQ(config_hash(cfg).size(), 16u);
}

TEST(Pipeline, DeterministicAcrossRunsAndThreadCounts) {
  auto cfg = tiny();
  const auto a = run_pipeline(cfg);
  cfg.threads = 3;
  const auto b = run_pipeline(cfg);
  ASSERT_FALSE(a.no_forecast());
  const io::Provenance p{a.config_hash, a.seed};
  EXPECT_EQ(io::keys_document(a.selection.keys, p).dump(), io::keys_document(b.selection.keys, p).dump());
  EXPECT_EQ(io::to_json(*a.forecast, p).dump(), io::to_json(*b.forecast, p).dump());
  EXPECT_EQ(io::format_skill(a.scores->rows, p), io::format_skill(b.scores->rows, p));
}

TEST(Pipeline, SmokeRunProducesForecastAndSkill) {
  const auto r = run_pipeline(tiny());
  ASSERT_TRUE(r.forecast.has_value());
  ASSERT_TRUE(r.scores.has_value());
  EXPECT_EQ(r.scores->rows.size(), 5u);  // pooled + 4 stations
  EXPECT_EQ(r.scores->rows.front().region, "all");
  for (const auto& k : r.selection.retained) {
    EXPECT_LE(k.rank_window.end, r.schedule.predict.begin);
    EXPECT_LE(k.select_window.end, r.schedule.predict.begin);
    EXPECT_LE(k.retain_window->end, r.schedule.predict.begin);
  }
  EXPECT_EQ(r.forecast->calibration_window.end, r.schedule.predict.begin);
}

TEST(Pipeline, PredictWindowCanaryChangesNoKeyOrCalibration) {
  const auto cfg = tiny();
  const auto base = run_pipeline(cfg);
  ASSERT_FALSE(base.no_forecast());
  Ground g = surrogate_ground(cfg, ground_length(cfg));
  for (const auto id : g.raw.ids()) {
    for (int t = base.schedule.predict.begin; t < base.schedule.predict.end; ++t) g.raw.set(id, t, 1234.5);
  }
  const auto canary = run_pipeline(cfg, g);
  const io::Provenance p{base.config_hash, base.seed};
  EXPECT_EQ(io::keys_document(canary.selection.retained, p).dump(), io::keys_document(base.selection.retained, p).dump());
  EXPECT_EQ(canary.forecast->calibration.slope, base.forecast->calibration.slope);
  EXPECT_EQ(canary.forecast->calibration.intercept, base.forecast->calibration.intercept);
}

TEST(Pipeline, NothingRetainedIsANoForecastOutcome) {
  auto cfg = tiny();
  cfg.retain_threshold = 1.0;
  const auto r = run_pipeline(cfg);
  EXPECT_TRUE(r.no_forecast());
  EXPECT_FALSE(r.forecast.has_value());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("run-all --config /nonexistent/config.json"), 1);
  EXPECT_EQ(run_cli("no-such-verb"), 1);
  auto bad = tiny_config();
  bad["calibration"] = {{"length", 9}};
  EXPECT_EQ(run_cli("run-all --quiet --config " + write_config(bad, "bad").string()), 1);
  auto missing_ground = tiny_config();
  missing_ground["ground"]["path"] = "/nonexistent/ground.csv";
  EXPECT_EQ(run_cli("run-all --quiet --config " + write_config(missing_ground, "noground").string()), 1);
}

TEST(Cli, RunAllWritesStampedArtifactsDeterministically) {
  const auto cfg_path = write_config(tiny_config(), "good");
  const auto out1 = scratch_dir("run1");
  const auto out2 = scratch_dir("run2");
  ASSERT_EQ(run_cli("run-all --quiet --config " + cfg_path.string() + " --out " + out1.string()), 0);
  ASSERT_EQ(run_cli("run-all --quiet --threads 2 --config " + cfg_path.string() + " --out " + out2.string()), 0);
  const auto a = snapshot(out1);
  const auto b = snapshot(out2);
  EXPECT_EQ(a, b);
  const std::string hash = config_hash(tiny());
  for (const char* f : {"forecast.json", "fig2.csv", "skill.csv", "s4.csv", "retained.json", "shrinkage.json",
                        "maps.json", "ground.csv", "config.json", "run.json"}) {
    ASSERT_TRUE(a.contains(f)) << f;
  }
  for (const auto& [name, text] : a) {
    if (name == "config.json") continue;
    EXPECT_NE(text.find(hash), std::string::npos) << name;
    if (name.ends_with(".csv")) {
      EXPECT_EQ(text.rfind("# config_hash=" + hash + " seed=7\n", 0), 0u) << name;
    }
  }

  // fig2: one row per (station, predict season); s4: one row per running window
  const auto r = run_pipeline(tiny());
  const auto rows = [](const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n - 2;  // stamp and column header
  };
  EXPECT_EQ(rows(a.at("fig2.csv")), 5u * 4u);
  EXPECT_EQ(rows(a.at("s4.csv")), r.scores->running.size());
}

TEST(Cli, VerbsReplayRunAll) {
  const auto cfg_path = write_config(tiny_config(), "verbs");
  const auto all = scratch_dir("all");
  const auto sel = scratch_dir("select");
  const auto fc = scratch_dir("forecast");
  ASSERT_EQ(run_cli("run-all --quiet --config " + cfg_path.string() + " --out " + all.string()), 0);
  ASSERT_EQ(run_cli("select --quiet --config " + cfg_path.string() + " --out " + sel.string()), 0);
  EXPECT_EQ(io::read_text(sel / "retained.json"), io::read_text(all / "retained.json"));
  ASSERT_EQ(run_cli("score --quiet --config " + cfg_path.string() + " --out " + fc.string() + " --keys " +
                    (all / "retained.json").string()),
            0);
  EXPECT_EQ(io::read_text(fc / "forecast.json"), io::read_text(all / "forecast.json"));
  EXPECT_EQ(io::read_text(fc / "skill.csv"), io::read_text(all / "skill.csv"));
}

TEST(Cli, NoForecastExitsCleanly) {
  auto j = tiny_config();
  j["selection"]["threshold"] = 1.0;
  const auto out = scratch_dir("noforecast");
  ASSERT_EQ(run_cli("run-all --quiet --config " + write_config(j, "nf").string() + " --out " + out.string()), 0);
  const auto doc = io::read_json(out / "forecast.json");
  EXPECT_TRUE(doc.at("no_forecast").get<bool>());
  EXPECT_FALSE(fs::exists(out / "fig2.csv"));
}
