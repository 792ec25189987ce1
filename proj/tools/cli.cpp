#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "geosafety/bootstrap.hpp"
#include "geosafety/csv.hpp"
#include "geosafety/error.hpp"
#include "geosafety/lmm.hpp"
#include "geosafety/model_io.hpp"
#include "geosafety/osm.hpp"
#include "geosafety/parallel.hpp"
#include "geosafety/report.hpp"
#include "geosafety/simulate.hpp"
#include "geosafety/spatial.hpp"
#include "geosafety/survey.hpp"

namespace geosafety::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Effective settings: defaults, then the config file, then flags.

struct PanelLabels {
  std::string name;
  std::string axis_label;
};

struct Settings {
  std::map<std::string, fs::path> inputs;  // osm, locations, participants, ...
  FeatureRadii radii;
  ModelSpec model;
  BootstrapConfig bootstrap;
  bool have_seed = false;
  Scenario scenario;
  std::size_t quintiles = 5;
  std::optional<std::vector<std::string>> demographic_columns;
  std::size_t mean_replications = 1000;
  PanelLabels left{"Predicted safety score", "Predicted safety (1-10)"};
  PanelLabels right{"Demographic baseline", "Baseline predicted rate"};
  fs::path output_dir = ".";
  unsigned threads = default_thread_count();
  // simulate
  std::size_t sim_participants = 35;
  std::size_t sim_locations = 12;
  std::size_t sim_schools = 23;
  double sim_male_fraction = 15.0 / 35.0;
  double sim_sigma_u = 1.0;
  double sim_sigma_e = 1.0;
  double sim_width_m = 2000.0;
  double sim_height_m = 2000.0;
};

const std::vector<std::string> kInputNames = {"osm",       "locations", "participants", "responses",
                                              "schools",   "features",  "model",        "tag_mapping"};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

void check_keys(const json& obj, const std::vector<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) config_error("'" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      config_error("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_value(const json& obj, const char* key, T& target, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_error("'" + where + "." + key + "' has the wrong type");
  }
}

void apply_config_file(const fs::path& path, Settings& s) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    config_error(path.string() + ": " + e.what());
  }
  check_keys(doc, {"inputs", "radii", "model", "bootstrap", "scenario", "report", "simulate", "output_dir", "threads"},
             "config");
  const fs::path base = path.parent_path();
  const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  if (doc.contains("inputs")) {
    const auto& inputs = doc["inputs"];
    check_keys(inputs, kInputNames, "inputs");
    for (const auto& [key, value] : inputs.items()) {
      if (!value.is_string()) config_error("'inputs." + key + "' must be a path string");
      s.inputs[key] = resolve(value.get<std::string>());
    }
  }
  if (doc.contains("radii")) {
    const auto& r = doc["radii"];
    check_keys(r, {"lights", "bars", "bus_stops", "water_sources", "religious", "river"}, "radii");
    read_value(r, "lights", s.radii.lights, "radii");
    read_value(r, "bars", s.radii.bars, "radii");
    read_value(r, "bus_stops", s.radii.bus_stops, "radii");
    read_value(r, "water_sources", s.radii.water_sources, "radii");
    read_value(r, "religious", s.radii.religious, "radii");
    read_value(r, "river", s.radii.river, "radii");
  }
  if (doc.contains("model")) {
    const auto& m = doc["model"];
    check_keys(m, {"interactions", "method", "standardize"}, "model");
    read_value(m, "interactions", s.model.include_interactions, "model");
    read_value(m, "standardize", s.model.standardize_features, "model");
    if (m.contains("method")) {
      std::string method;
      read_value(m, "method", method, "model");
      s.model.method = parse_fit_method(method);
    }
  }
  if (doc.contains("bootstrap")) {
    const auto& b = doc["bootstrap"];
    check_keys(b, {"replications", "level", "seed", "max_redraws"}, "bootstrap");
    read_value(b, "replications", s.bootstrap.replications, "bootstrap");
    read_value(b, "level", s.bootstrap.level, "bootstrap");
    read_value(b, "max_redraws", s.bootstrap.max_redraws_per_replication, "bootstrap");
    if (b.contains("seed")) {
      read_value(b, "seed", s.bootstrap.seed, "bootstrap");
      s.have_seed = true;
    }
  }
  if (doc.contains("scenario")) {
    const auto& sc = doc["scenario"];
    check_keys(sc, {"male", "alone", "night"}, "scenario");
    read_value(sc, "male", s.scenario.male, "scenario");
    read_value(sc, "alone", s.scenario.alone, "scenario");
    read_value(sc, "night", s.scenario.night, "scenario");
  }
  if (doc.contains("report")) {
    const auto& r = doc["report"];
    check_keys(r, {"quintiles", "demographic_columns", "mean_replications", "left_panel", "right_panel"}, "report");
    read_value(r, "quintiles", s.quintiles, "report");
    read_value(r, "mean_replications", s.mean_replications, "report");
    if (r.contains("demographic_columns")) {
      std::vector<std::string> cols;
      read_value(r, "demographic_columns", cols, "report");
      s.demographic_columns = std::move(cols);
    }
    for (auto [key, target] : {std::pair{"left_panel", &s.left}, std::pair{"right_panel", &s.right}}) {
      if (!r.contains(key)) continue;
      const std::string where = std::string("report.") + key;
      check_keys(r[key], {"name", "axis_label"}, where);
      read_value(r[key], "name", target->name, where);
      read_value(r[key], "axis_label", target->axis_label, where);
    }
  }
  if (doc.contains("simulate")) {
    const auto& m = doc["simulate"];
    check_keys(m, {"participants", "locations", "schools", "male_fraction", "sigma_u", "sigma_e", "width_m", "height_m"},
               "simulate");
    read_value(m, "participants", s.sim_participants, "simulate");
    read_value(m, "locations", s.sim_locations, "simulate");
    read_value(m, "schools", s.sim_schools, "simulate");
    read_value(m, "male_fraction", s.sim_male_fraction, "simulate");
    read_value(m, "sigma_u", s.sim_sigma_u, "simulate");
    read_value(m, "sigma_e", s.sim_sigma_e, "simulate");
    read_value(m, "width_m", s.sim_width_m, "simulate");
    read_value(m, "height_m", s.sim_height_m, "simulate");
  }
  if (doc.contains("output_dir")) {
    std::string dir;
    read_value(doc, "output_dir", dir, "config");
    s.output_dir = resolve(dir);
  }
  read_value(doc, "threads", s.threads, "config");
}

// ---------------------------------------------------------------------------
// Flags. Each flag is bound once per subcommand; it overrides the config only
// when given on the command line.

class Flags {
 public:
  template <typename T>
  void add(CLI::App* app, const std::string& name, const std::string& help, std::function<void(Settings&, const T&)> apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    bindings_.push_back({opt, [value, apply](Settings& s) { apply(s, *value); }});
  }

  void add_flag(CLI::App* app, const std::string& name, const std::string& help, std::function<void(Settings&, bool)> apply) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(name, *value, help);
    bindings_.push_back({opt, [value, apply](Settings& s) { apply(s, *value); }});
  }

  void apply(Settings& s) const {
    for (const auto& [opt, fn] : bindings_) {
      if (opt->count() > 0) fn(s);
    }
  }

 private:
  std::vector<std::pair<CLI::Option*, std::function<void(Settings&)>>> bindings_;
};

void add_common(CLI::App* app, Flags& flags, std::string& config) {
  app->add_option("--config", config, "JSON pipeline configuration (flags override it)");
  flags.add<unsigned>(app, "--threads", "worker threads (default: hardware parallelism)",
                      [](Settings& s, const unsigned& v) { s.threads = v; });
  flags.add<std::string>(app, "-o,--out-dir", "output directory",
                         [](Settings& s, const std::string& v) { s.output_dir = v; });
}

void add_input(CLI::App* app, Flags& flags, const std::string& key, const std::string& help) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  flags.add<std::string>(app, flag, help, [key](Settings& s, const std::string& v) { s.inputs[key] = v; });
}

void add_extraction(CLI::App* app, Flags& flags) {
  add_input(app, flags, "osm", "OpenStreetMap XML snapshot");
  add_input(app, flags, "tag_mapping", "tag mapping file (default: built-in mapping)");
  const auto radius = [&](const char* name, double FeatureRadii::*field) {
    flags.add<double>(app, std::string("--radius-") + name, std::string("radius in metres for ") + name,
                      [field](Settings& s, const double& v) { s.radii.*field = v; });
  };
  radius("lights", &FeatureRadii::lights);
  radius("bars", &FeatureRadii::bars);
  radius("bus-stops", &FeatureRadii::bus_stops);
  radius("water", &FeatureRadii::water_sources);
  radius("religious", &FeatureRadii::religious);
  radius("river", &FeatureRadii::river);
}

void add_model(CLI::App* app, Flags& flags) {
  add_input(app, flags, "features", "features.csv (alternative to --osm with --locations)");
  add_input(app, flags, "locations", "locations.csv (with --osm)");
  add_input(app, flags, "participants", "participants.csv");
  add_input(app, flags, "responses", "responses.csv");
  add_extraction(app, flags);
  flags.add_flag(app, "--interactions{true}", "include male x feature interactions",
                 [](Settings& s, bool v) { s.model.include_interactions = v; });
  flags.add_flag(app, "--standardize{true}", "center and scale count features",
                 [](Settings& s, bool v) { s.model.standardize_features = v; });
  flags.add<std::string>(app, "--method", "REML or ML",
                         [](Settings& s, const std::string& v) { s.model.method = parse_fit_method(v); });
}

void add_seed(CLI::App* app, Flags& flags) {
  flags.add<std::uint64_t>(app, "--seed", "random seed", [](Settings& s, const std::uint64_t& v) {
    s.bootstrap.seed = v;
    s.have_seed = true;
  });
}

void add_scenario(CLI::App* app, Flags& flags) {
  flags.add<int>(app, "--male", "scenario male indicator (0/1)", [](Settings& s, const int& v) { s.scenario.male = v; });
  flags.add<int>(app, "--alone", "scenario alone indicator (0/1)", [](Settings& s, const int& v) { s.scenario.alone = v; });
  flags.add<int>(app, "--night", "scenario night indicator (0/1)", [](Settings& s, const int& v) { s.scenario.night = v; });
}

// ---------------------------------------------------------------------------
// Helpers

std::string path_text(const fs::path& p) { return p.generic_string(); }

const fs::path& require_input(const Settings& s, const std::string& key) {
  const auto it = s.inputs.find(key);
  if (it == s.inputs.end()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    config_error("missing input '" + key + "' (" + flag + " or inputs." + key + " in the config)");
  }
  if (!fs::is_regular_file(it->second)) {
    throw Error(ErrorKind::IoError, "input file not found: " + path_text(it->second));
  }
  return it->second;
}

bool has_input(const Settings& s, const std::string& key) { return s.inputs.count(key) > 0; }

json radii_json(const FeatureRadii& r) {
  return json{{"lights", r.lights},       {"bars", r.bars},           {"bus_stops", r.bus_stops},
              {"water_sources", r.water_sources}, {"religious", r.religious}, {"river", r.river}};
}

json model_json(const ModelSpec& m) {
  return json{{"interactions", m.include_interactions},
              {"method", std::string(to_string(m.method))},
              {"standardize", m.standardize_features}};
}

json inputs_json(const Settings& s, const std::vector<std::string>& keys) {
  json out = json::object();
  for (const auto& k : keys) {
    if (has_input(s, k)) out[k] = path_text(s.inputs.at(k));
  }
  return out;
}

/// One comment line per provenance item; output paths and thread counts are
/// deliberately absent so outputs are byte-identical across machines.
std::string provenance_text(const std::string& command, const json& config) {
  return "# " + std::string(kToolName) + " " + std::string(kToolVersion) + " " + command + "\n# config: " +
         config.dump() + "\n";
}

void warn(std::ostream& err, const std::string& message) { err << "warning: " << message << "\n"; }

struct OutputFile {
  std::string name;
  std::string content;
};

/// All validation and computation happen before this is called, so a failed
/// command never leaves partial artifacts behind.
void write_outputs(const Settings& s, const std::vector<OutputFile>& files, std::ostream& out) {
  std::error_code ec;
  fs::create_directories(s.output_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create output directory " + path_text(s.output_dir) + ": " + ec.message());
  for (const auto& f : files) {
    const auto path = s.output_dir / f.name;
    write_text_file(path, f.content);
    out << "wrote " << path_text(path) << "\n";
  }
}

FeatureEntities load_entities(const Settings& s, std::ostream& err) {
  const auto& osm_path = require_input(s, "osm");
  const TagMapping mapping = has_input(s, "tag_mapping") ? TagMapping::load(require_input(s, "tag_mapping"))
                                                         : TagMapping::defaults();
  const auto snapshot = parse_osm_file(osm_path);
  for (const auto& w : snapshot.warnings()) warn(err, w);
  auto classified = classify_entities(snapshot, mapping);
  for (const auto& issue : classified.issues) warn(err, issue.message);
  return std::move(classified.entities);
}

std::vector<LocationFeatures> extract_points(const Settings& s, std::span<const GeoPoint> points, std::ostream& err) {
  s.radii.validate();
  const auto entities = load_entities(s, err);
  const FeatureExtractor extractor(entities, s.radii);
  return extractor.extract_all(points, s.threads);
}

std::vector<LocatedFeatures> load_location_features(const Settings& s, std::ostream& err) {
  if (has_input(s, "features")) return load_features(read_csv_file(require_input(s, "features")));
  if (!has_input(s, "osm") || !has_input(s, "locations")) {
    config_error("need --features, or --osm together with --locations");
  }
  const auto locations = load_locations(read_csv_file(require_input(s, "locations")));
  std::vector<GeoPoint> points;
  for (const auto& l : locations) points.push_back(l.point);
  const auto features = extract_points(s, points, err);
  std::vector<LocatedFeatures> out;
  for (std::size_t i = 0; i < locations.size(); ++i) out.emplace_back(locations[i].id, features[i]);
  return out;
}

std::vector<std::string> model_input_keys(const Settings& s) {
  if (has_input(s, "features")) return {"features", "participants", "responses"};
  return {"osm", "tag_mapping", "locations", "participants", "responses"};
}

AnalysisTable load_analysis_table(const Settings& s, std::ostream& err) {
  const auto& participants = require_input(s, "participants");
  const auto& responses = require_input(s, "responses");
  const auto features = load_location_features(s, err);
  std::vector<std::string> ids;
  for (const auto& f : features) ids.push_back(f.first);
  const auto survey = load_survey(responses, participants, std::span<const std::string>(ids));
  auto table = build_analysis_table(survey, features);
  for (const auto& w : table.warnings) warn(err, w);
  return table;
}

json model_config(const Settings& s) {
  json cfg;
  cfg["inputs"] = inputs_json(s, model_input_keys(s));
  if (!has_input(s, "features")) cfg["radii"] = radii_json(s.radii);
  cfg["model"] = model_json(s.model);
  return cfg;
}

std::vector<Location> load_school_locations(const SchoolTable& schools) {
  std::vector<Location> out;
  for (const auto& school : schools.schools) out.push_back({school.id, school.point});
  return out;
}

struct SchoolPredictions {
  SchoolTable schools;
  std::vector<double> predicted;
};

SchoolPredictions predict_for_schools(const Settings& s, std::ostream& err) {
  s.scenario.validate();
  // Without an explicit model, use the one `fit` wrote to the output directory.
  Settings resolved = s;
  if (!has_input(resolved, "model")) resolved.inputs["model"] = resolved.output_dir / "model.json";
  const auto fit = load_model(require_input(resolved, "model"));
  auto schools = read_schools(read_csv_file(require_input(s, "schools")), s.demographic_columns);
  std::vector<GeoPoint> points;
  for (const auto& school : schools.schools) points.push_back(school.point);
  const auto features = extract_points(s, points, err);
  auto predicted = predict_schools(fit, features, s.scenario);
  return {std::move(schools), std::move(predicted)};
}

json prediction_config(const Settings& s) {
  json cfg;
  cfg["inputs"] = inputs_json(s, {"schools", "osm", "tag_mapping"});
  cfg["inputs"]["model"] = has_input(s, "model") ? path_text(s.inputs.at("model")) : "<output_dir>/model.json";
  cfg["radii"] = radii_json(s.radii);
  cfg["scenario"] = json{{"male", s.scenario.male}, {"alone", s.scenario.alone}, {"night", s.scenario.night}};
  return cfg;
}

void require_seed(const Settings& s, const std::string& command) {
  if (!s.have_seed) config_error(command + " requires a seed (--seed, or bootstrap.seed in the config)");
}

// ---------------------------------------------------------------------------
// Commands

void cmd_extract(const Settings& s, std::ostream& out, std::ostream& err) {
  const auto locations = load_locations(read_csv_file(require_input(s, "locations")));
  std::vector<GeoPoint> points;
  for (const auto& l : locations) points.push_back(l.point);
  const auto features = extract_points(s, points, err);
  json cfg;
  cfg["inputs"] = inputs_json(s, {"osm", "tag_mapping", "locations"});
  cfg["radii"] = radii_json(s.radii);
  std::string text = provenance_text("extract", cfg) + features_csv_header() + "\n";
  for (std::size_t i = 0; i < locations.size(); ++i) text += features_csv_row(locations[i].id, features[i]) + "\n";
  write_outputs(s, {{"features.csv", text}}, out);
}

void cmd_fit(const Settings& s, std::ostream& out, std::ostream& err) {
  const auto table = load_analysis_table(s, err);
  const auto design = build_design(table, s.model);
  const auto fit = fit_lmm(design, s.model.method);
  for (const auto& w : fit.warnings) warn(err, w);
  const auto cfg = model_config(s);
  const std::string text = dump_model(fit, cfg);
  std::ostringstream summary;
  summary << "fit: " << fit.n_obs << " observations, " << fit.n_groups << " participants, "
          << (fit.converged ? "converged" : "NOT converged") << "\n";
  for (std::size_t j = 0; j < fit.names.size(); ++j) summary << "  " << fit.names[j] << " " << format_double(fit.beta[j]) << "\n";
  summary << "  sigma_u2 " << format_double(fit.sigma_u2) << "\n  sigma_e2 " << format_double(fit.sigma_e2) << "\n";
  write_outputs(s, {{"model.json", text}}, out);
  out << summary.str();
}

void cmd_bootstrap(const Settings& s, std::ostream& out, std::ostream& err) {
  require_seed(s, "bootstrap");
  s.bootstrap.validate();
  const auto table = load_analysis_table(s, err);
  const auto result = bootstrap_lmm(table, s.model, s.bootstrap, s.threads);
  auto cfg = model_config(s);
  cfg["bootstrap"] = json{{"replications", s.bootstrap.replications},
                          {"level", s.bootstrap.level},
                          {"seed", s.bootstrap.seed},
                          {"max_redraws", s.bootstrap.max_redraws_per_replication}};
  const auto text = bootstrap_csv(result, provenance_text("bootstrap", cfg));
  write_outputs(s, {{"bootstrap.csv", text}}, out);
  out << "bootstrap: " << s.bootstrap.replications << " replications, " << result.redraws << " redraws, "
      << result.nonconverged << " non-converged, " << result.pseudo_inverse << " pseudo-inverse fits\n";
}

void cmd_predict(const Settings& s, std::ostream& out, std::ostream& err) {
  const auto pred = predict_for_schools(s, err);
  std::string text = provenance_text("predict", prediction_config(s)) + "school_id,observed_rate,predicted_safety\n";
  for (std::size_t i = 0; i < pred.predicted.size(); ++i) {
    const auto& school = pred.schools.schools[i];
    text += csv_escape(school.id) + "," + format_double(school.observed_rate) + "," + format_double(pred.predicted[i]) + "\n";
  }
  write_outputs(s, {{"predictions.csv", text}}, out);
}

void cmd_report(const Settings& s, std::ostream& out, std::ostream& err) {
  if (s.quintiles == 0) config_error("report.quintiles must be >= 1");
  const auto pred = predict_for_schools(s, err);
  const auto& schools = pred.schools;
  std::vector<double> rates;
  std::vector<std::string> ids;
  for (const auto& school : schools.schools) {
    rates.push_back(school.observed_rate);
    ids.push_back(school.id);
  }
  const auto groups = quintile_groups(rates, ids, s.quintiles);

  const auto n = static_cast<Eigen::Index>(schools.schools.size());
  const auto p = static_cast<Eigen::Index>(schools.demographic_columns.size());
  Eigen::MatrixXd demographics(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& school = schools.schools[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j) demographics(i, j) = school.demographics[static_cast<std::size_t>(j)];
    y(i) = school.observed_rate;
  }
  const auto baseline = ols_baseline(demographics, y);
  const std::vector<double> fitted(baseline.fitted.data(), baseline.fitted.data() + baseline.fitted.size());

  const std::vector<ReportPanel> panels{summarize_panel(s.left.name, s.left.axis_label, groups, pred.predicted),
                                        summarize_panel(s.right.name, s.right.axis_label, groups, fitted)};

  auto cfg = prediction_config(s);
  cfg["report"] = json{{"quintiles", s.quintiles},
                       {"demographic_columns", schools.demographic_columns},
                       {"left_panel", json{{"name", s.left.name}, {"axis_label", s.left.axis_label}}},
                       {"right_panel", json{{"name", s.right.name}, {"axis_label", s.right.axis_label}}}};
  std::vector<std::string> comment{std::string(kToolName) + " " + std::string(kToolVersion) + " report",
                                   "config: " + cfg.dump(), "scenario: " + s.scenario.describe()};
  if (s.have_seed) {
    const auto mean = bootstrap_mean(rates, s.mean_replications, 0.95, s.bootstrap.seed);
    std::ostringstream line;
    line << "mean observed rate: " << format_double(mean.mean) << " (95% bootstrap CI " << format_double(mean.ci_low)
         << ", " << format_double(mean.ci_high) << "; " << s.mean_replications << " replications, seed "
         << s.bootstrap.seed << ")";
    comment.push_back(line.str());
  }
  std::string header;
  for (const auto& c : comment) header += "# " + c + "\n";
  write_outputs(s, {{"report.csv", report_csv(panels, header)}, {"report.svg", report_svg(panels, comment)}}, out);
}

void cmd_simulate(const Settings& s, std::ostream& out, std::ostream&) {
  require_seed(s, "simulate");
  const std::uint64_t seed = s.bootstrap.seed;
  if (s.sim_participants == 0 || s.sim_locations == 0) config_error("simulate needs at least one participant and location");
  if (!(s.sim_male_fraction >= 0.0 && s.sim_male_fraction <= 1.0)) config_error("male_fraction must lie in [0, 1]");

  SettlementSpec settlement;
  settlement.width_m = s.sim_width_m;
  settlement.height_m = s.sim_height_m;
  settlement.n_locations = s.sim_locations;
  settlement.seed = seed;
  const auto world = simulate_settlement(settlement);

  std::vector<GeoPoint> points;
  for (const auto& l : world.locations) points.push_back(l.point);
  const auto features = FeatureExtractor(world.entities).extract_all(points, s.threads);
  std::vector<LocatedFeatures> located;
  for (std::size_t i = 0; i < features.size(); ++i) located.emplace_back(world.locations[i].id, features[i]);

  ResponseModel model;
  model.sigma_u = s.sim_sigma_u;
  model.sigma_e = s.sim_sigma_e;
  model.likert = true;
  const auto participants = simulate_participants(s.sim_participants, s.sim_male_fraction);
  const auto table = simulate_responses(participants, located, model, seed);
  const auto records = to_response_records(table);

  SchoolSimulation school_spec;
  school_spec.n_schools = s.sim_schools;
  school_spec.seed = seed;
  const auto schools = simulate_schools(settlement, world.entities, school_spec);

  json cfg;
  cfg["seed"] = seed;
  cfg["simulate"] = json{{"participants", s.sim_participants}, {"locations", s.sim_locations},
                         {"schools", s.sim_schools},           {"male_fraction", s.sim_male_fraction},
                         {"sigma_u", s.sim_sigma_u},           {"sigma_e", s.sim_sigma_e},
                         {"width_m", s.sim_width_m},           {"height_m", s.sim_height_m}};
  const auto header = provenance_text("simulate", cfg);

  std::ostringstream osm;
  write_osm(osm, world.entities, TagMapping::defaults());
  std::string osm_text = osm.str();
  std::string cfg_text = cfg.dump();
  for (std::size_t pos = 0; (pos = cfg_text.find("--", pos)) != std::string::npos;) cfg_text.replace(pos, 2, "- -");
  osm_text.insert(osm_text.find('\n') + 1, "<!-- " + std::string(kToolName) + " " + std::string(kToolVersion) +
                                               " simulate; config: " + cfg_text + " -->\n");

  json truth = cfg;
  json beta = json::object();
  const auto names = design_column_names(false);
  for (std::size_t j = 0; j < names.size(); ++j) beta[names[j]] = model.beta[j];
  truth["beta"] = beta;
  truth["school_rate"] = json{{"intercept", school_spec.rate_intercept},
                              {"slope", school_spec.rate_slope},
                              {"noise_sd", school_spec.rate_noise_sd}};

  write_outputs(s,
                {{"settlement.osm", osm_text},
                 {"locations.csv", header + locations_csv(world.locations)},
                 {"participants.csv", header + participants_csv(participants)},
                 {"responses.csv", header + responses_csv(records)},
                 {"schools.csv", header + schools_csv(schools)},
                 {"truth.json", truth.dump(2) + "\n"}},
                out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geospatial safety analysis: map features, mixed models, bootstrap, school reports", "geosafety"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  Flags flags;
  std::string config;

  auto* extract = app.add_subcommand("extract", "count map features around survey locations -> features.csv");
  add_common(extract, flags, config);
  add_input(extract, flags, "locations", "locations.csv");
  add_extraction(extract, flags);

  auto* fit = app.add_subcommand("fit", "fit the random-intercept mixed model -> model.json");
  add_common(fit, flags, config);
  add_model(fit, flags);

  auto* boot = app.add_subcommand("bootstrap", "two-way participant x location bootstrap -> bootstrap.csv");
  add_common(boot, flags, config);
  add_model(boot, flags);
  add_seed(boot, flags);
  flags.add<std::size_t>(boot, "--replications", "bootstrap replications (default 1000)",
                         [](Settings& s, const std::size_t& v) { s.bootstrap.replications = v; });
  flags.add<double>(boot, "--level", "confidence level (default 0.95)",
                    [](Settings& s, const double& v) { s.bootstrap.level = v; });
  flags.add<std::size_t>(boot, "--max-redraws", "redraw budget per replication (default 100)",
                         [](Settings& s, const std::size_t& v) { s.bootstrap.max_redraws_per_replication = v; });

  auto* predict = app.add_subcommand("predict", "predict school safety -> predictions.csv");
  add_common(predict, flags, config);
  add_input(predict, flags, "model", "model.json");
  add_input(predict, flags, "schools", "schools.csv");
  add_extraction(predict, flags);
  add_scenario(predict, flags);

  auto* report = app.add_subcommand("report", "quintile boxplot report -> report.csv, report.svg");
  add_common(report, flags, config);
  add_input(report, flags, "model", "model.json");
  add_input(report, flags, "schools", "schools.csv");
  add_extraction(report, flags);
  add_scenario(report, flags);
  add_seed(report, flags);
  flags.add<std::size_t>(report, "--quintiles", "number of groups (default 5)",
                         [](Settings& s, const std::size_t& v) { s.quintiles = v; });
  flags.add<std::vector<std::string>>(report, "--demographics", "demographic columns of schools.csv (comma-separated)",
                                      [](Settings& s, const std::vector<std::string>& v) { s.demographic_columns = v; });
  report->get_option("--demographics")->delimiter(',');
  flags.add<std::size_t>(report, "--mean-replications", "replications for the mean-rate CI (with --seed)",
                         [](Settings& s, const std::size_t& v) { s.mean_replications = v; });

  auto* simulate = app.add_subcommand("simulate", "synthetic settlement, survey and schools");
  add_common(simulate, flags, config);
  add_seed(simulate, flags);
  flags.add<std::size_t>(simulate, "--n-participants", "participants (default 35)",
                         [](Settings& s, const std::size_t& v) { s.sim_participants = v; });
  flags.add<std::size_t>(simulate, "--n-locations", "survey locations (default 12)",
                         [](Settings& s, const std::size_t& v) { s.sim_locations = v; });
  flags.add<std::size_t>(simulate, "--n-schools", "schools (default 23)",
                         [](Settings& s, const std::size_t& v) { s.sim_schools = v; });
  flags.add<double>(simulate, "--male-fraction", "fraction of male participants",
                    [](Settings& s, const double& v) { s.sim_male_fraction = v; });
  flags.add<double>(simulate, "--sigma-u", "participant random-intercept SD",
                    [](Settings& s, const double& v) { s.sim_sigma_u = v; });
  flags.add<double>(simulate, "--sigma-e", "residual SD", [](Settings& s, const double& v) { s.sim_sigma_e = v; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    Settings settings;
    if (!config.empty()) apply_config_file(config, settings);
    flags.apply(settings);
    if (settings.threads == 0) config_error("--threads must be >= 1");

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "extract") cmd_extract(settings, out, err);
    else if (name == "fit") cmd_fit(settings, out, err);
    else if (name == "bootstrap") cmd_bootstrap(settings, out, err);
    else if (name == "predict") cmd_predict(settings, out, err);
    else if (name == "report") cmd_report(settings, out, err);
    else cmd_simulate(settings, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_input_error(e.kind()) ? kExitInput : kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace geosafety::cli
