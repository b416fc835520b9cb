// Command-line driver. Each verb recomputes whatever it depends on from the
// config, so any verb can run on its own and gives the same bytes as run-all.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lpchaos.hpp"

namespace fs = std::filesystem;
using namespace lpchaos;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string ground;
  std::string keys;
  int threads = 0;
  std::vector<double> sweep;
  bool quiet = false;
};

void log_stderr(const std::string& line) { std::cerr << "[lpchaos] " << line << "\n"; }

PipelineConfig load(const Options& o) {
  PipelineConfig cfg = io::load_config(o.config);
  if (o.threads > 0) cfg.threads = o.threads;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.ground.empty()) cfg.ground.path = o.ground;
  validate(cfg);
  return cfg;
}

Logger logger(const Options& o) { return o.quiet ? Logger{} : Logger{log_stderr}; }

io::Provenance provenance(const PipelineConfig& cfg) { return {config_hash(cfg), cfg.seed}; }

void write_library(const PipelineConfig& cfg, const std::vector<surrogate::AttractorEstimate>& lib) {
  const auto p = provenance(cfg);
  for (const auto& a : lib) io::write_attractor(fs::path(cfg.output_dir) / "library", a, p);
}

void write_maps(const PipelineConfig& cfg, const std::vector<SeriesId>& catalog, const std::vector<DelayMap>& maps) {
  const auto p = provenance(cfg);
  nlohmann::json cat = nlohmann::json::array();
  for (const auto id : catalog) cat.push_back({id.variable, id.site});
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : maps) arr.push_back(io::to_json(m));
  io::write_json(fs::path(cfg.output_dir) / "maps.json",
                 {{"catalog", cat}, {"maps", arr}, {"config_hash", p.config_hash}, {"seed", p.seed}});
}

void write_fitted(const PipelineConfig& cfg, const PreparedLibrary& lib) {
  const auto p = provenance(cfg);
  for (const auto& f : lib.fitted) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : f.members) members.push_back(io::to_json(m));
    io::write_json(fs::path(cfg.output_dir) / "models" / (f.id + ".json"),
                   {{"attractor_id", f.id},
                    {"parameter", f.parameter},
                    {"summary", f.summary},
                    {"n_maps", f.n_maps},
                    {"n_degenerate", f.n_degenerate},
                    {"members", members},
                    {"config_hash", p.config_hash},
                    {"seed", p.seed}});
  }
  io::write_json(fs::path(cfg.output_dir) / "shrinkage.json", io::to_json(lib.shrinkage, p));
}

void write_selection(const PipelineConfig& cfg, const Selection& sel) {
  const auto p = provenance(cfg);
  std::map<std::string, std::vector<ensemble::PredictorKey>> by_attractor;
  for (const auto& k : sel.keys) by_attractor[k.attractor_id].push_back(k);
  for (const auto& [id, keys] : by_attractor) {
    io::write_json(fs::path(cfg.output_dir) / "keys" / (id + ".json"), io::keys_document(keys, p));
  }
  auto doc = io::keys_document(sel.retained, p);
  doc["switching"] = io::to_json(sel.switching);
  doc["no_forecast"] = sel.no_forecast;
  io::write_json(fs::path(cfg.output_dir) / "retained.json", doc);
}

void write_no_forecast(const PipelineConfig& cfg) {
  const auto p = provenance(cfg);
  io::write_json(fs::path(cfg.output_dir) / "forecast.json",
                 {{"no_forecast", true}, {"config_hash", p.config_hash}, {"seed", p.seed}});
}

void write_forecast(const PipelineConfig& cfg, const EnsembleForecast& f, const Ground& ground, const Panel& gz,
                    const WindowSchedule& w) {
  const auto p = provenance(cfg);
  const fs::path dir = cfg.output_dir;
  io::write_json(dir / "forecast.json", io::to_json(f, p));
  io::write_text(dir / "fig2.csv", io::format_fig2(f, gz, ground.first_year, w.predict, p));
  io::write_text(dir / "fig2_hindcast.csv",
                 io::format_fig2(f, gz, ground.first_year, {f.span.begin, w.predict.begin}, p));
}

void write_scores(const PipelineConfig& cfg, const Scores& s, const EnsembleForecast& f) {
  const auto p = provenance(cfg);
  const fs::path dir = cfg.output_dir;
  io::write_text(dir / "skill.csv", io::format_skill(s.rows, p));
  io::write_text(dir / "s4.csv", io::format_running(s.running, f.span.begin, p));
}

void write_inversion(const PipelineConfig& cfg, const PipelineResult& r) {
  const auto p = provenance(cfg);
  const fs::path dir = cfg.output_dir;
  if (r.inversion) {
    io::write_json(dir / "inversion.json", io::to_json(*r.inversion, p));
    io::write_text(dir / "figS2.csv", io::format_counts(*r.inversion, p));
  } else {
    io::write_json(dir / "inversion.json",
                   {{"error", r.inversion_error.value_or("inversion disabled")},
                    {"config_hash", p.config_hash},
                    {"seed", p.seed}});
  }
}

void write_sweep(const PipelineConfig& cfg, const std::vector<double>& truths, const Logger& log) {
  std::vector<io::SweepPoint> pts;
  for (const auto& t : inversion_sweep(cfg, truths, log)) {
    io::SweepPoint pt;
    pt.truth = t.truth;
    pt.trial_seed = cfg.seed;
    if (t.result) {
      pt.estimate = t.result->estimate;
      pt.estimated_summary = t.result->estimated_summary;
    }
    pts.push_back(pt);
  }
  io::write_text(fs::path(cfg.output_dir) / "fig3.csv", io::format_fig3(pts, provenance(cfg)));
}

void write_ground(const PipelineConfig& cfg, const Ground& g) {
  io::write_text(fs::path(cfg.output_dir) / "ground.csv", io::header_line(provenance(cfg)) + io::format_station_panel(g));
}


int verb_generate_library(const Options& o) {
  const auto cfg = load(o);
  auto lib = generate_library(cfg);
  write_library(cfg, lib);
  log_line(logger(o), "generate-library: wrote " + std::to_string(lib.size()) + " attractors");
  return 0;
}

Ground ground_for(const PipelineConfig& cfg) {
  if (auto g = io::load_ground(cfg)) return std::move(*g);
  return surrogate_ground(cfg, ground_length(cfg));
}

// Ground and provenance always follow the full config, so a verb that skips
// inversion still sees the same ground as run-all.
PipelineResult run(const PipelineConfig& cfg, const Options& o, bool with_inversion) {
  PipelineConfig c = cfg;
  c.inversion.enabled = c.inversion.enabled && with_inversion;
  return run_pipeline(c, ground_for(cfg), logger(o));
}

int verb_embed(const Options& o) {
  const auto cfg = load(o);
  const auto w = resolve_schedule(cfg);
  const auto g = ground_for(cfg);
  const auto gz = standardize(g.raw, reference_window(w));
  const auto lib = generate_library(cfg);
  const auto catalog = build_catalog(cfg, lib.front().panel, gz.values);
  const auto maps = embed(cfg, catalog);
  write_maps(cfg, catalog, maps);
  log_line(logger(o), "embed: " + std::to_string(maps.size()) + " maps over " + std::to_string(catalog.size()) + " series");
  return 0;
}

int verb_fit(const Options& o) {
  const auto cfg = load(o);
  const auto w = resolve_schedule(cfg);
  const auto g = ground_for(cfg);
  const auto lib = prepare_library(cfg, standardize(g.raw, reference_window(w)).values, logger(o));
  write_library(cfg, lib.library);
  write_maps(cfg, lib.catalog, lib.maps);
  write_fitted(cfg, lib);
  return 0;
}

int verb_select(const Options& o) {
  const auto cfg = load(o);
  const auto r = run(cfg, o, false);
  write_selection(cfg, r.selection);
  return 0;
}

// Replays saved keys against the configured ground.
int verb_forecast_from_keys(const Options& o, bool score) {
  const auto cfg = load(o);
  const auto w = resolve_schedule(cfg);
  const auto g = ground_for(cfg);
  const auto gz = standardize(g.raw, reference_window(w));
  const auto keys = io::load_keys(o.keys);
  if (keys.empty()) {
    write_no_forecast(cfg);
    log_line(logger(o), "forecast: key file has no retained keys; no forecast");
    return 0;
  }
  const auto f = make_forecast(cfg, keys, gz.values, w);
  write_forecast(cfg, f, g, gz.values, w);
  if (score) write_scores(cfg, score_forecast(f, gz.values, w, cfg.running_window), f);
  return 0;
}

int verb_forecast(const Options& o, bool score) {
  if (!o.keys.empty()) return verb_forecast_from_keys(o, score);
  const auto cfg = load(o);
  const auto r = run(cfg, o, false);
  if (r.no_forecast()) {
    write_no_forecast(cfg);
    return 0;
  }
  write_forecast(cfg, *r.forecast, r.ground, r.ground_z.values, r.schedule);
  if (score) write_scores(cfg, *r.scores, *r.forecast);
  return 0;
}

int verb_invert(const Options& o) {
  auto cfg = load(o);
  cfg.inversion.enabled = true;
  const auto r = run(cfg, o, true);
  write_inversion(cfg, r);
  if (!o.sweep.empty()) write_sweep(cfg, o.sweep, logger(o));
  return 0;
}

int verb_emit_plots(const Options& o) {
  const auto cfg = load(o);
  const auto r = run(cfg, o, true);
  if (r.forecast) {
    const auto p = provenance(cfg);
    const fs::path dir = cfg.output_dir;
    io::write_text(dir / "fig2.csv", io::format_fig2(*r.forecast, r.ground_z.values, r.ground.first_year,
                                                     r.schedule.predict, p));
    io::write_text(dir / "s4.csv", io::format_running(r.scores->running, r.forecast->span.begin, p));
  }
  if (r.inversion) io::write_text(fs::path(cfg.output_dir) / "figS2.csv", io::format_counts(*r.inversion, provenance(cfg)));
  if (!o.sweep.empty()) write_sweep(cfg, o.sweep, logger(o));
  return 0;
}

int verb_run_all(const Options& o) {
  const auto cfg = load(o);
  const auto r = run(cfg, o, true);
  const auto p = provenance(cfg);
  const fs::path dir = cfg.output_dir;
  // the hashed form: thread count and output directory do not affect results
  auto canonical = to_json(cfg);
  canonical.erase("threads");
  canonical.erase("output_dir");
  io::write_json(dir / "config.json", canonical);
  write_ground(cfg, r.ground);
  write_library(cfg, r.prepared.library);
  write_maps(cfg, r.prepared.catalog, r.prepared.maps);
  write_fitted(cfg, r.prepared);
  write_selection(cfg, r.selection);
  if (r.no_forecast()) {
    write_no_forecast(cfg);
  } else {
    write_forecast(cfg, *r.forecast, r.ground, r.ground_z.values, r.schedule);
    write_scores(cfg, *r.scores, *r.forecast);
  }
  if (cfg.inversion.enabled) write_inversion(cfg, r);
  io::write_json(dir / "run.json", {{"config_hash", p.config_hash},
                                    {"seed", p.seed},
                                    {"no_forecast", r.no_forecast()},
                                    {"retained_keys", r.selection.retained.size()},
                                    {"schedule",
                                     {{"rank", io::range_json(r.schedule.rank)},
                                      {"select", io::range_json(r.schedule.select)},
                                      {"retain", io::range_json(r.schedule.retain)},
                                      {"predict", io::range_json(r.schedule.predict)}}}});
  log_line(logger(o), r.no_forecast() ? "run-all: no forecast" : "run-all: done");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Library-of-attractors seasonal forecasting"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--threads", o.threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory (overrides the config)");
    sub->add_option("--ground", o.ground, "station panel CSV (overrides the config)");
    sub->add_flag("--quiet", o.quiet, "no per-stage log lines");
  };

  struct Verb {
    const char* name;
    const char* help;
  };
  std::map<std::string, CLI::App*> subs;
  for (const Verb v : {Verb{"generate-library", "integrate the surrogate at every library parameter"},
                       Verb{"embed", "build the catalog and sample delay maps"},
                       Verb{"fit", "fit best-subset models for every attractor and map"},
                       Verb{"select", "form, rank and retain predictor keys"},
                       Verb{"forecast", "ensemble forecast for the predict window"},
                       Verb{"score", "forecast and skill statistics"},
                       Verb{"invert", "estimate the tuning parameter from key significance counts"},
                       Verb{"run-all", "every stage, all artifacts"},
                       Verb{"emit-plots", "plot data files"}}) {
    subs[v.name] = app.add_subcommand(v.name, v.help);
    common(subs[v.name]);
  }
  for (const char* v : {"forecast", "score"}) {
    subs[v]->add_option("--keys", o.keys, "replay a saved key file instead of selecting")->check(CLI::ExistingFile);
  }
  for (const char* v : {"invert", "emit-plots"}) {
    subs[v]->add_option("--sweep", o.sweep, "true parameters for a (true, estimated) sweep")->delimiter(',');
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (subs["generate-library"]->parsed()) return verb_generate_library(o);
    if (subs["embed"]->parsed()) return verb_embed(o);
    if (subs["fit"]->parsed()) return verb_fit(o);
    if (subs["select"]->parsed()) return verb_select(o);
    if (subs["forecast"]->parsed()) return verb_forecast(o, false);
    if (subs["score"]->parsed()) return verb_forecast(o, true);
    if (subs["invert"]->parsed()) return verb_invert(o);
    if (subs["emit-plots"]->parsed()) return verb_emit_plots(o);
    if (subs["run-all"]->parsed()) return verb_run_all(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
