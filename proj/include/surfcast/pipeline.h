#ifndef SURFCAST_PIPELINE_H
#define SURFCAST_PIPELINE_H

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "surfcast/errors.h"
#include "surfcast/eval.h"
#include "surfcast/fem.h"
#include "surfcast/forecast.h"
#include "surfcast/fpca.h"
#include "surfcast/io.h"
#include "surfcast/synth.h"

namespace surfcast {

enum class GcvPooling { Mean, PerDay };

struct SmoothSettings {
  bool lambda_auto = true;
  double lambda_value = 0.0;  // used when lambda_auto is false
  double grid_min = 1e-4;
  double grid_max = 1e2;
  int grid_count = 25;
  GcvPooling pooling = GcvPooling::Mean;
};

struct EvaluateSettings {
  int training_length = 0;
  int origin_count = 0;
  std::vector<std::string> methods = {"dffm-var", "dffm-knn", "far", "mean",
                                      "naive"};
  ErrorMetric metric = ErrorMetric::DataNodes;
  bool has_threshold = false;
  double threshold = 0.0;
};

struct PipelineConfig {
  std::string stations;
  std::string measurements;
  std::string domain;  // optional polygon file
  std::string input_dir = ".";
  std::string output_dir = ".";

  MissingPolicy missing_policy = MissingPolicy::DropStation;
  std::vector<int> exclude_triangles;

  SmoothSettings smoothing;

  bool factors_auto = true;
  int factors = 0;  // used when factors_auto is false

  std::string method = "var";
  IcVariant ic_variant = IcVariant::Anh;
  bool var_auto = true;
  int var_p = 1;
  KnnOptions knn;
  int knn_p = 1;  // fixed lag depth when knn auto is off
  int knn_l = 1;  // fixed factor count when knn auto is off
  bool knn_order_auto = true;
  int far_truncation = 2;

  EvaluateSettings evaluate;
  SynthConfig synth;
  std::uint64_t seed = 1;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown config key '" + where + it.key() + "'");
  }
}

inline IcVariant parse_ic_variant(const std::string& name) {
  if (name == "ANH") return IcVariant::Anh;
  if (name == "OS-BIC") return IcVariant::OsBic;
  if (name == "OS-HQ") return IcVariant::OsHq;
  throw ConfigError("ic_variant must be ANH, OS-BIC or OS-HQ, got '" + name + "'");
}

inline KnnWeighting parse_weighting(const std::string& name) {
  if (name == "equal") return KnnWeighting::Equal;
  if (name == "inverse-distance") return KnnWeighting::InverseDistance;
  throw ConfigError("knn.weighting must be equal or inverse-distance, got '" +
                    name + "'");
}

inline int config_int(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + " must be an integer");
  return j.get<int>();
}

inline double config_number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + " must be a number");
  return j.get<double>();
}

inline std::string config_string(const nlohmann::json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + " must be a string");
  return j.get<std::string>();
}

}  // namespace detail

/// Accepts a positive number or the word "auto".
inline void set_lambda_setting(SmoothSettings& settings, const std::string& text) {
  if (text == "auto") {
    settings.lambda_auto = true;
    return;
  }
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != text.size() || !(value > 0.0)) {
    throw ConfigError("lambda must be a positive number or 'auto', got '" +
                      text + "'");
  }
  settings.lambda_auto = false;
  settings.lambda_value = value;
}

/// Accepts "min,max,count" as used by --lambda-grid.
inline void set_lambda_grid(SmoothSettings& settings, const std::string& text) {
  double lo = 0.0, hi = 0.0;
  int count = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf,%d%c", &lo, &hi, &count, &tail) != 3 ||
      !(lo > 0.0) || !(hi > lo) || count < 2) {
    throw ConfigError("lambda grid must be 'min,max,count' with 0 < min < max "
                      "and count >= 2, got '" + text + "'");
  }
  settings.grid_min = lo;
  settings.grid_max = hi;
  settings.grid_count = count;
}

inline GcvPooling parse_gcv_pooling(const std::string& name) {
  if (name == "mean") return GcvPooling::Mean;
  if (name == "per-day") return GcvPooling::PerDay;
  throw ConfigError("gcv pooling must be mean or per-day, got '" + name + "'");
}

inline MissingPolicy parse_missing_policy(const std::string& name) {
  if (name == "drop-station") return MissingPolicy::DropStation;
  if (name == "interpolate") return MissingPolicy::Interpolate;
  throw ConfigError("missing policy must be drop-station or interpolate, got '" +
                    name + "'");
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream stream(path);
  if (!stream) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    stream >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(path) + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");

  PipelineConfig config;
  detail::check_keys(j, "",
                     {"stations", "measurements", "domain", "input_dir",
                      "output_dir", "missing_policy", "exclude_triangles",
                      "lambda", "lambda_grid", "gcv_pooling", "factors",
                      "method", "ic_variant", "var", "knn", "far", "evaluate",
                      "synth", "seed"});

  if (j.contains("stations")) config.stations = detail::config_string(j["stations"], "stations");
  if (j.contains("measurements")) {
    config.measurements = detail::config_string(j["measurements"], "measurements");
  }
  if (j.contains("domain")) config.domain = detail::config_string(j["domain"], "domain");
  if (j.contains("input_dir")) config.input_dir = detail::config_string(j["input_dir"], "input_dir");
  if (j.contains("output_dir")) config.output_dir = detail::config_string(j["output_dir"], "output_dir");
  if (j.contains("missing_policy")) {
    config.missing_policy =
        parse_missing_policy(detail::config_string(j["missing_policy"], "missing_policy"));
  }
  if (j.contains("exclude_triangles")) {
    if (!j["exclude_triangles"].is_array()) {
      throw ConfigError("exclude_triangles must be an array of triangle indices");
    }
    for (const auto& entry : j["exclude_triangles"]) {
      config.exclude_triangles.push_back(detail::config_int(entry, "exclude_triangles[]"));
    }
  }

  if (j.contains("lambda")) {
    if (j["lambda"].is_number()) {
      set_lambda_setting(config.smoothing,
                         detail::format_value(j["lambda"].get<double>()));
    } else {
      set_lambda_setting(config.smoothing, detail::config_string(j["lambda"], "lambda"));
    }
  }
  if (j.contains("lambda_grid")) {
    const auto& grid = j["lambda_grid"];
    if (!grid.is_array() || grid.size() != 3) {
      throw ConfigError("lambda_grid must be [min, max, count]");
    }
    config.smoothing.grid_min = detail::config_number(grid[0], "lambda_grid[0]");
    config.smoothing.grid_max = detail::config_number(grid[1], "lambda_grid[1]");
    config.smoothing.grid_count = detail::config_int(grid[2], "lambda_grid[2]");
    if (!(config.smoothing.grid_min > 0.0) ||
        !(config.smoothing.grid_max > config.smoothing.grid_min) ||
        config.smoothing.grid_count < 2) {
      throw ConfigError("lambda_grid needs 0 < min < max and count >= 2");
    }
  }
  if (j.contains("gcv_pooling")) {
    config.smoothing.pooling =
        parse_gcv_pooling(detail::config_string(j["gcv_pooling"], "gcv_pooling"));
  }

  if (j.contains("factors")) {
    if (j["factors"].is_string()) {
      if (j["factors"].get<std::string>() != "auto") {
        throw ConfigError("factors must be an integer or 'auto'");
      }
      config.factors_auto = true;
    } else {
      config.factors = detail::config_int(j["factors"], "factors");
      config.factors_auto = false;
      if (config.factors < 1) throw ConfigError("factors must be at least 1");
    }
  }

  if (j.contains("method")) {
    config.method = detail::config_string(j["method"], "method");
    static const std::vector<std::string> known = {"var", "knn", "far", "mean",
                                                   "naive"};
    if (std::find(known.begin(), known.end(), config.method) == known.end()) {
      throw ConfigError("method must be var, knn, far, mean or naive, got '" +
                        config.method + "'");
    }
  }
  if (j.contains("ic_variant")) {
    config.ic_variant =
        detail::parse_ic_variant(detail::config_string(j["ic_variant"], "ic_variant"));
  }
  if (j.contains("var")) {
    const auto& v = j["var"];
    detail::check_keys(v, "var.", {"p", "auto"});
    if (v.contains("auto")) {
      if (!v["auto"].is_boolean()) throw ConfigError("var.auto must be a boolean");
      config.var_auto = v["auto"].get<bool>();
    }
    if (v.contains("p")) {
      config.var_p = detail::config_int(v["p"], "var.p");
      if (config.var_p < 1) throw ConfigError("var.p must be at least 1");
      if (!v.contains("auto")) config.var_auto = false;
    }
  }
  if (j.contains("knn")) {
    const auto& k = j["knn"];
    detail::check_keys(k, "knn.", {"k", "p", "l", "q", "weighting", "auto"});
    if (k.contains("auto")) {
      if (!k["auto"].is_boolean()) throw ConfigError("knn.auto must be a boolean");
      config.knn.auto_neighbours = k["auto"].get<bool>();
      config.knn_order_auto = k["auto"].get<bool>();
    }
    if (k.contains("k")) {
      config.knn.neighbours = detail::config_int(k["k"], "knn.k");
      if (config.knn.neighbours < 1) throw ConfigError("knn.k must be at least 1");
      if (!k.contains("auto")) config.knn.auto_neighbours = false;
    }
    if (k.contains("p")) {
      config.knn_p = detail::config_int(k["p"], "knn.p");
      if (config.knn_p < 1) throw ConfigError("knn.p must be at least 1");
      if (!k.contains("auto")) config.knn_order_auto = false;
    }
    if (k.contains("l")) {
      config.knn_l = detail::config_int(k["l"], "knn.l");
      if (config.knn_l < 1) throw ConfigError("knn.l must be at least 1");
      if (!k.contains("auto")) config.knn_order_auto = false;
    }
    if (k.contains("q")) {
      config.knn.distance_exponent = detail::config_number(k["q"], "knn.q");
      if (!(config.knn.distance_exponent >= 1.0)) {
        throw ConfigError("knn.q must be at least 1");
      }
    }
    if (k.contains("weighting")) {
      config.knn.weighting =
          detail::parse_weighting(detail::config_string(k["weighting"], "knn.weighting"));
    }
  }
  if (j.contains("far")) {
    const auto& f = j["far"];
    detail::check_keys(f, "far.", {"truncation"});
    if (f.contains("truncation")) {
      config.far_truncation = detail::config_int(f["truncation"], "far.truncation");
      if (config.far_truncation < 1) {
        throw ConfigError("far.truncation must be at least 1");
      }
    }
  }

  if (j.contains("evaluate")) {
    const auto& e = j["evaluate"];
    detail::check_keys(e, "evaluate.",
                       {"training_length", "origins", "methods", "metric",
                        "threshold"});
    if (e.contains("training_length")) {
      config.evaluate.training_length =
          detail::config_int(e["training_length"], "evaluate.training_length");
    }
    if (e.contains("origins")) {
      config.evaluate.origin_count = detail::config_int(e["origins"], "evaluate.origins");
    }
    if (e.contains("methods")) {
      if (!e["methods"].is_array() || e["methods"].empty()) {
        throw ConfigError("evaluate.methods must be a non-empty array");
      }
      config.evaluate.methods.clear();
      for (const auto& entry : e["methods"]) {
        config.evaluate.methods.push_back(
            detail::config_string(entry, "evaluate.methods[]"));
      }
    }
    if (e.contains("metric")) {
      const std::string metric = detail::config_string(e["metric"], "evaluate.metric");
      if (metric == "data-nodes") {
        config.evaluate.metric = ErrorMetric::DataNodes;
      } else if (metric == "integrated") {
        config.evaluate.metric = ErrorMetric::Integrated;
      } else {
        throw ConfigError("evaluate.metric must be data-nodes or integrated");
      }
    }
    if (e.contains("threshold")) {
      config.evaluate.threshold =
          detail::config_number(e["threshold"], "evaluate.threshold");
      config.evaluate.has_threshold = true;
    }
  }

  if (j.contains("synth")) {
    const auto& s = j["synth"];
    detail::check_keys(s, "synth.",
                       {"grid_size", "length", "factors", "ar", "variances",
                        "noise_sd", "mean_level", "orthogonalize_scores",
                        "start_date"});
    if (s.contains("grid_size")) {
      config.synth.grid_size = detail::config_int(s["grid_size"], "synth.grid_size");
    }
    if (s.contains("length")) {
      config.synth.length = detail::config_int(s["length"], "synth.length");
    }
    if (s.contains("factors")) {
      config.synth.factors = detail::config_int(s["factors"], "synth.factors");
    }
    if (s.contains("ar")) {
      const auto& ar = s["ar"];
      if (!ar.is_array() || ar.empty() || ar.size() > 3) {
        throw ConfigError("synth.ar must hold 1 to 3 coefficients");
      }
      for (std::size_t l = 0; l < ar.size(); ++l) {
        config.synth.ar[l] = detail::config_number(ar[l], "synth.ar[]");
      }
    }
    if (s.contains("variances")) {
      const auto& var = s["variances"];
      if (!var.is_array() || var.empty() || var.size() > 3) {
        throw ConfigError("synth.variances must hold 1 to 3 values");
      }
      for (std::size_t l = 0; l < var.size(); ++l) {
        config.synth.variances[l] = detail::config_number(var[l], "synth.variances[]");
      }
    }
    if (s.contains("noise_sd")) {
      config.synth.noise_sd = detail::config_number(s["noise_sd"], "synth.noise_sd");
    }
    if (s.contains("mean_level")) {
      config.synth.mean_level = detail::config_number(s["mean_level"], "synth.mean_level");
    }
    if (s.contains("orthogonalize_scores")) {
      if (!s["orthogonalize_scores"].is_boolean()) {
        throw ConfigError("synth.orthogonalize_scores must be a boolean");
      }
      config.synth.orthogonalize_scores = s["orthogonalize_scores"].get<bool>();
    }
    if (s.contains("start_date")) {
      config.synth.start_date = detail::config_string(s["start_date"], "synth.start_date");
      parse_iso_date(config.synth.start_date);
    }
  }

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
      throw ConfigError("seed must be a nonnegative integer");
    }
    config.seed = j["seed"].get<std::uint64_t>();
  }
  config.synth.seed = config.seed;
  return config;
}

// ---------------------------------------------------------------------------
// Artifact plumbing between subcommands
// ---------------------------------------------------------------------------

namespace detail {

inline std::string artifact(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

struct IngestedArtifacts {
  std::shared_ptr<const NodeSet> nodes;
  std::vector<std::string> station_ids;
  std::vector<std::string> dates;
  Eigen::MatrixXd panel;  // days x stations
};

inline IngestedArtifacts load_ingested(const std::string& dir) {
  IngestedArtifacts art;
  const TriangleMesh mesh = read_mesh_json(artifact(dir, "mesh.json"));
  const std::vector<StationRecord> stations =
      read_stations_csv(artifact(dir, "stations_used.csv"));
  std::vector<Point2> points;
  for (const auto& s : stations) {
    art.station_ids.push_back(s.id);
    points.push_back(s.location);
  }
  art.nodes = std::make_shared<NodeSet>(build_nodal_points(mesh, points));

  CsvReader reader(artifact(dir, "panel.csv"));
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw SchemaError("panel.csv is empty");
  if (fields.size() != art.station_ids.size() + 1 || fields[0] != "date") {
    throw SchemaError("panel.csv header does not match stations_used.csv");
  }
  for (std::size_t s = 0; s < art.station_ids.size(); ++s) {
    if (fields[s + 1] != art.station_ids[s]) {
      throw SchemaError("panel.csv header does not match stations_used.csv");
    }
  }
  std::vector<std::vector<double>> rows;
  while (reader.next(fields)) {
    if (fields.size() != art.station_ids.size() + 1) {
      throw SchemaError(reader.context() + ": wrong field count");
    }
    parse_iso_date(fields[0]);
    art.dates.push_back(fields[0]);
    std::vector<double> row(fields.size() - 1);
    for (std::size_t s = 1; s < fields.size(); ++s) {
      row[s - 1] = parse_number(fields[s], reader.context());
    }
    rows.push_back(std::move(row));
  }
  art.panel.resize(static_cast<int>(rows.size()),
                   static_cast<int>(art.station_ids.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t s = 0; s < rows[t].size(); ++s) {
      art.panel(static_cast<int>(t), static_cast<int>(s)) = rows[t][s];
    }
  }
  return art;
}

struct SeriesArtifacts {
  std::shared_ptr<const NodeSet> nodes;
  std::vector<std::string> station_ids;
  SurfaceSeries series;
};

inline SeriesArtifacts load_series(const std::string& dir) {
  SeriesArtifacts art;
  const TriangleMesh mesh = read_mesh_json(artifact(dir, "mesh.json"));
  const std::vector<StationRecord> stations =
      read_stations_csv(artifact(dir, "stations_used.csv"));
  std::vector<Point2> points;
  for (const auto& s : stations) {
    art.station_ids.push_back(s.id);
    points.push_back(s.location);
  }
  art.nodes = std::make_shared<NodeSet>(build_nodal_points(mesh, points));

  SeriesFile file = read_series_csv(artifact(dir, "series.csv"));
  if (static_cast<int>(file.ids.size()) != art.nodes->node_count()) {
    throw SchemaError("series.csv has " + std::to_string(file.ids.size()) +
                      " columns but the mesh carries " +
                      std::to_string(art.nodes->node_count()) + " nodes");
  }
  art.series.nodes = art.nodes;
  art.series.coefficients = std::move(file.coefficients);
  art.series.time_labels = read_dates_csv(artifact(dir, "dates.csv"));
  if (static_cast<int>(art.series.time_labels.size()) != art.series.length()) {
    throw SchemaError("dates.csv length does not match series.csv");
  }
  return art;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct IngestResult {
  int stations_kept = 0;
  int days = 0;
  int vertices = 0;
  int triangles = 0;
  std::vector<std::string> warnings;
};

/// stations.csv + measurements.csv (+ optional domain polygon) to
/// mesh.json, stations_used.csv, panel.csv and dates.csv in output_dir.
inline IngestResult run_ingest(const PipelineConfig& config) {
  if (config.stations.empty() || config.measurements.empty()) {
    throw ConfigError("ingest needs 'stations' and 'measurements' paths");
  }
  IngestResult result;
  ObservationPanel panel = ingest(config.stations, config.measurements,
                                  config.missing_policy, &result.warnings);

  TriangleMesh mesh = delaunay_triangulate(panel.station_points);
  if (!config.domain.empty() || !config.exclude_triangles.empty()) {
    DomainPolygon domain;
    if (!config.domain.empty()) {
      domain = read_domain_json(config.domain);
    } else {
      // exclusions only: keep every centroid by using the hull of the points
      double lo_x = panel.station_points[0].x, hi_x = lo_x;
      double lo_y = panel.station_points[0].y, hi_y = lo_y;
      for (const Point2 p : panel.station_points) {
        lo_x = std::min(lo_x, p.x);
        hi_x = std::max(hi_x, p.x);
        lo_y = std::min(lo_y, p.y);
        hi_y = std::max(hi_y, p.y);
      }
      const double pad = 1.0 + std::max(hi_x - lo_x, hi_y - lo_y);
      domain.outer = {{lo_x - pad, lo_y - pad},
                      {hi_x + pad, lo_y - pad},
                      {hi_x + pad, hi_y + pad},
                      {lo_x - pad, hi_y + pad}};
    }
    mesh = clip_to_domain(mesh, domain, config.exclude_triangles);

    // Stations whose vertex was clipped away leave the panel too.
    std::vector<int> kept;
    for (std::size_t s = 0; s < panel.station_points.size(); ++s) {
      bool found = false;
      for (const Point2 v : mesh.vertices) {
        if (std::abs(v.x - panel.station_points[s].x) <= 1e-9 &&
            std::abs(v.y - panel.station_points[s].y) <= 1e-9) {
          found = true;
          break;
        }
      }
      if (found) {
        kept.push_back(static_cast<int>(s));
      } else {
        result.warnings.push_back("station " + panel.station_ids[s] +
                                  " lies outside the domain; dropped");
      }
    }
    if (kept.empty()) throw NoCompleteStations("no station remains inside the domain");
    if (kept.size() != panel.station_ids.size()) {
      ObservationPanel reduced;
      reduced.dates = panel.dates;
      reduced.values.resize(panel.values.rows(), static_cast<int>(kept.size()));
      for (std::size_t j = 0; j < kept.size(); ++j) {
        reduced.station_ids.push_back(panel.station_ids[kept[j]]);
        reduced.station_points.push_back(panel.station_points[kept[j]]);
        reduced.values.col(static_cast<int>(j)) = panel.values.col(kept[j]);
      }
      panel = std::move(reduced);
    }
  }

  // Validates that every station sits on a mesh vertex before anything is
  // written.
  build_nodal_points(mesh, panel.station_points);

  std::filesystem::create_directories(config.output_dir);
  write_mesh_json(detail::artifact(config.output_dir, "mesh.json"), mesh);
  write_stations_csv(detail::artifact(config.output_dir, "stations_used.csv"),
                     panel.station_ids, panel.station_points);
  write_panel_csv(detail::artifact(config.output_dir, "panel.csv"), panel);
  write_dates_csv(detail::artifact(config.output_dir, "dates.csv"), panel.dates);

  result.stations_kept = static_cast<int>(panel.station_ids.size());
  result.days = static_cast<int>(panel.dates.size());
  result.vertices = static_cast<int>(mesh.vertices.size());
  result.triangles = static_cast<int>(mesh.triangles.size());
  return result;
}

struct GcvScan {
  std::vector<double> grid;
  std::vector<double> pooled_scores;  // mean over days; NaN where degenerate
  Eigen::MatrixXd day_scores;         // days x grid
};

namespace detail {

inline GcvScan scan_gcv(const Eigen::MatrixXd& panel, const FemMatrices& matrices,
                        const SmoothSettings& settings) {
  GcvScan scan;
  scan.grid = log_lambda_grid(settings.grid_min, settings.grid_max,
                              settings.grid_count);
  const int T = static_cast<int>(panel.rows());
  const int G = static_cast<int>(scan.grid.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  scan.day_scores = Eigen::MatrixXd::Constant(T, G, nan);
  scan.pooled_scores.assign(G, nan);
  for (int g = 0; g < G; ++g) {
    try {
      const GcvEvaluator evaluator(matrices, scan.grid[g]);
      double sum = 0.0;
      for (int t = 0; t < T; ++t) {
        const double score = evaluator.score(panel.row(t).transpose());
        scan.day_scores(t, g) = score;
        sum += score;
      }
      scan.pooled_scores[g] = sum / T;
    } catch (const Error&) {
      // degenerate at this lambda; the NaN column marks it skipped
    }
  }
  return scan;
}

inline int argmin_finite(const std::vector<double>& values) {
  int best = -1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) continue;
    if (best < 0 || values[i] < values[best]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace detail

struct SmoothResult {
  std::vector<double> day_lambdas;
  bool scanned = false;
  GcvScan scan;
};

/// panel.csv to series.csv (+ dates.csv, lambdas.csv and, when lambda is
/// selected automatically, gcv.csv) in output_dir.
inline SmoothResult run_smooth(const PipelineConfig& config) {
  const detail::IngestedArtifacts art = detail::load_ingested(config.input_dir);
  const FemMatrices matrices = assemble_matrices(art.nodes);
  const int T = static_cast<int>(art.panel.rows());
  if (T == 0) throw SchemaError("panel.csv holds no days");

  SmoothResult result;
  result.day_lambdas.assign(T, config.smoothing.lambda_value);
  if (config.smoothing.lambda_auto) {
    result.scanned = true;
    result.scan = detail::scan_gcv(art.panel, matrices, config.smoothing);
    if (config.smoothing.pooling == GcvPooling::Mean) {
      const int best = detail::argmin_finite(result.scan.pooled_scores);
      if (best < 0) throw AllPointsDegenerate("every grid lambda is degenerate");
      result.day_lambdas.assign(T, result.scan.grid[best]);
    } else {
      for (int t = 0; t < T; ++t) {
        std::vector<double> row(result.scan.day_scores.cols());
        for (int g = 0; g < result.scan.day_scores.cols(); ++g) {
          row[g] = result.scan.day_scores(t, g);
        }
        const int best = detail::argmin_finite(row);
        if (best < 0) {
          throw AllPointsDegenerate("every grid lambda is degenerate on day " +
                                    art.dates[t]);
        }
        result.day_lambdas[t] = result.scan.grid[best];
      }
    }
  }

  Eigen::MatrixXd coefficients(T, art.nodes->node_count());
  double active_lambda = -1.0;
  std::unique_ptr<SmoothingSystem> system;
  for (int t = 0; t < T; ++t) {
    if (result.day_lambdas[t] != active_lambda) {
      active_lambda = result.day_lambdas[t];
      system = std::make_unique<SmoothingSystem>(matrices, active_lambda);
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * art.nodes->node_count());
    rhs.head(art.panel.cols()) = -art.panel.row(t).transpose();
    coefficients.row(t) = system->solve(rhs).head(art.nodes->node_count());
  }

  std::filesystem::create_directories(config.output_dir);
  write_series_csv(detail::artifact(config.output_dir, "series.csv"), coefficients,
                   node_ids(*art.nodes, art.station_ids));
  write_dates_csv(detail::artifact(config.output_dir, "dates.csv"), art.dates);
  {
    detail::FileWriter out(detail::artifact(config.output_dir, "lambdas.csv"));
    out << "date,lambda\n";
    for (int t = 0; t < T; ++t) {
      out << art.dates[t] << "," << detail::format_value(result.day_lambdas[t])
          << "\n";
    }
    out.close();
  }
  if (result.scanned) {
    write_gcv_csv(detail::artifact(config.output_dir, "gcv.csv"), result.scan.grid,
                  result.scan.pooled_scores);
  }
  if (config.output_dir != config.input_dir) {
    std::filesystem::copy_file(
        detail::artifact(config.input_dir, "mesh.json"),
        detail::artifact(config.output_dir, "mesh.json"),
        std::filesystem::copy_options::overwrite_existing);
    std::filesystem::copy_file(
        detail::artifact(config.input_dir, "stations_used.csv"),
        detail::artifact(config.output_dir, "stations_used.csv"),
        std::filesystem::copy_options::overwrite_existing);
  }
  return result;
}

/// Writes the lambda scan (pooled mean score per grid point) to gcv.csv.
inline GcvScan run_gcv(const PipelineConfig& config) {
  const detail::IngestedArtifacts art = detail::load_ingested(config.input_dir);
  const FemMatrices matrices = assemble_matrices(art.nodes);
  GcvScan scan = detail::scan_gcv(art.panel, matrices, config.smoothing);
  std::filesystem::create_directories(config.output_dir);
  write_gcv_csv(detail::artifact(config.output_dir, "gcv.csv"), scan.grid,
                scan.pooled_scores);
  return scan;
}

struct DecomposeResult {
  int factors = 0;
  double explained = 0.0;
};

/// series.csv to the factor bundle (mean.csv, loadings.csv, scores.csv,
/// eigenvalues.csv) in output_dir.
inline DecomposeResult run_decompose(const PipelineConfig& config) {
  const detail::SeriesArtifacts art = detail::load_series(config.input_dir);
  const FemMatrices matrices = assemble_matrices(art.nodes);

  int count = config.factors;
  if (config.factors_auto) {
    const Surface mean = sample_mean(art.series);
    const Eigen::MatrixXd m = covariance_operator(art.series, mean);
    const Eigen::VectorXd spectrum = operator_eigenvalues(m, matrices);
    const double scale = spectrum.size() ? spectrum.cwiseAbs().maxCoeff() : 0.0;
    const int rank_cap = std::min(art.series.length(),
                                  static_cast<int>(art.series.coefficients.cols()));
    count = 0;
    while (count < rank_cap && count < spectrum.size() &&
           spectrum[count] > 1e-12 * scale) {
      ++count;
    }
    count = std::max(count, 1);
  }

  const FactorModel model = fit_factor_model(art.series, matrices, count);
  std::filesystem::create_directories(config.output_dir);
  write_factor_bundle(config.output_dir, model);
  return DecomposeResult{count, explained_variance(model, count)};
}

struct ForecastRunResult {
  std::string method;
  int factors = 0;
  int lags = 0;
  int neighbours = 0;
};

/// series.csv to a one-step-ahead forecast.csv in output_dir.
inline ForecastRunResult run_forecast(const PipelineConfig& config) {
  const detail::SeriesArtifacts art = detail::load_series(config.input_dir);
  const FemMatrices matrices = assemble_matrices(art.nodes);

  ForecastRunResult result;
  result.method = config.method;
  Surface forecast;
  if (config.method == "var" || config.method == "knn") {
    OrderSelection selection = OrderSelection::ic(config.ic_variant);
    if (config.method == "var" && !config.var_auto) {
      if (config.factors_auto) {
        throw ConfigError("fixed VAR order needs an explicit 'factors' count");
      }
      selection = OrderSelection::fixed(config.factors, config.var_p);
    }
    if (config.method == "knn" && !config.knn_order_auto) {
      selection = OrderSelection::fixed(config.knn_l, config.knn_p);
    }
    const DffmForecast dffm = dffm_forecast(
        art.series, matrices,
        config.method == "var" ? DffmMethod::Var : DffmMethod::Knn, selection,
        config.knn);
    forecast = dffm.surface;
    result.factors = dffm.factors;
    result.lags = dffm.lags;
    result.neighbours = dffm.neighbours;
  } else if (config.method == "far") {
    const FarModel far = fit_far(art.series, matrices, config.far_truncation);
    forecast = far_forecast(far, art.series.at(art.series.length() - 1),
                            sample_mean(art.series), matrices);
    result.factors = config.far_truncation;
  } else if (config.method == "mean") {
    forecast = mean_forecast(art.series);
  } else {
    forecast = naive_forecast(art.series);
  }

  std::filesystem::create_directories(config.output_dir);
  write_forecast_csv(detail::artifact(config.output_dir, "forecast.csv"), forecast,
                     node_ids(*art.nodes, art.station_ids));
  return result;
}

namespace detail {

inline MethodConfig method_from_label(const std::string& label,
                                      const PipelineConfig& config) {
  MethodConfig method;
  method.label = label;
  method.knn = config.knn;
  method.far_truncation = config.far_truncation;
  std::string base = label;
  IcVariant variant = config.ic_variant;
  const std::size_t colon = label.find(':');
  if (colon != std::string::npos) {
    base = label.substr(0, colon);
    variant = parse_ic_variant(label.substr(colon + 1));
  }
  method.selection = OrderSelection::ic(variant);
  if (base == "dffm-var") {
    method.kind = ForecastMethod::DffmVar;
  } else if (base == "dffm-knn") {
    method.kind = ForecastMethod::DffmKnn;
  } else if (base == "far") {
    method.kind = ForecastMethod::Far;
  } else if (base == "mean") {
    method.kind = ForecastMethod::Mean;
  } else if (base == "naive") {
    method.kind = ForecastMethod::Naive;
  } else {
    throw ConfigError("unknown evaluation method '" + label + "'");
  }
  return method;
}

}  // namespace detail

struct EvaluateRunResult {
  ForecastReport report;
  int events = 0;
};

/// series.csv to mse_long.csv and mse_summary.csv (and events.csv when a
/// threshold is configured) in output_dir.
inline EvaluateRunResult run_evaluate(const PipelineConfig& config) {
  const detail::SeriesArtifacts art = detail::load_series(config.input_dir);

  EvaluationPlan plan;
  plan.training_length = config.evaluate.training_length;
  plan.origin_count = config.evaluate.origin_count;
  plan.metric = config.evaluate.metric;
  if (plan.training_length < 2) {
    throw ConfigError("evaluate.training_length must be at least 2");
  }
  if (plan.origin_count < 1) {
    throw ConfigError("evaluate.origins must be at least 1");
  }
  for (const auto& label : config.evaluate.methods) {
    plan.methods.push_back(detail::method_from_label(label, config));
  }

  EvaluateRunResult result;
  result.report = rolling_evaluate(art.series, plan);

  std::filesystem::create_directories(config.output_dir);
  write_mse_long_csv(detail::artifact(config.output_dir, "mse_long.csv"),
                     result.report);
  write_mse_summary_csv(detail::artifact(config.output_dir, "mse_summary.csv"),
                        result.report);
  if (config.evaluate.has_threshold) {
    const auto events = exceedance_events(art.series, config.evaluate.threshold);
    write_events_csv(detail::artifact(config.output_dir, "events.csv"), events);
    result.events = static_cast<int>(events.size());
  }
  return result;
}

struct SynthRunResult {
  int stations = 0;
  int days = 0;
};

/// Writes a synthetic stations.csv + measurements.csv pair (plus the latent
/// truth for diagnostics) into output_dir.
inline SynthRunResult run_synth(const PipelineConfig& config) {
  SynthConfig synth = config.synth;
  synth.seed = config.seed;
  const SynthData data = generate_synthetic(synth);
  const int N = data.nodes->data_node_count;

  std::filesystem::create_directories(config.output_dir);
  std::vector<Point2> points(data.nodes->nodes.begin(),
                             data.nodes->nodes.begin() + N);
  write_stations_csv(detail::artifact(config.output_dir, "stations.csv"),
                     data.station_ids, points);
  write_measurements_csv(detail::artifact(config.output_dir, "measurements.csv"),
                         data.dates, data.station_ids,
                         data.series.coefficients.leftCols(N));
  {
    detail::FileWriter out(detail::artifact(config.output_dir, "true_scores.csv"));
    std::string header;
    for (int l = 0; l < data.true_scores.cols(); ++l) {
      if (l) header += ",";
      header += "x" + std::to_string(l + 1);
    }
    out << header << "\n";
    for (int t = 0; t < data.true_scores.rows(); ++t) {
      std::string line;
      for (int l = 0; l < data.true_scores.cols(); ++l) {
        if (l) line += ",";
        line += detail::format_value(data.true_scores(t, l));
      }
      out << line << "\n";
    }
    out.close();
  }
  {
    detail::FileWriter out(detail::artifact(config.output_dir, "true_loadings.csv"));
    std::string header;
    for (std::size_t l = 0; l < data.true_loadings.size(); ++l) {
      if (l) header += ",";
      header += "psi" + std::to_string(l + 1);
    }
    out << header << "\n";
    for (int k = 0; k < data.nodes->node_count(); ++k) {
      std::string line;
      for (std::size_t l = 0; l < data.true_loadings.size(); ++l) {
        if (l) line += ",";
        line += detail::format_value(data.true_loadings[l].coefficients[k]);
      }
      out << line << "\n";
    }
    out.close();
  }
  {
    detail::FileWriter out(detail::artifact(config.output_dir, "true_mean.csv"));
    out << "value\n";
    for (int k = 0; k < data.true_mean.coefficients.size(); ++k) {
      out << detail::format_value(data.true_mean.coefficients[k]) << "\n";
    }
    out.close();
  }
  return SynthRunResult{N, static_cast<int>(data.dates.size())};
}

}  // namespace surfcast

#endif  // SURFCAST_PIPELINE_H
