#ifndef SURFCAST_IO_H
#define SURFCAST_IO_H

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "surfcast/dates.h"
#include "surfcast/errors.h"
#include "surfcast/eval.h"
#include "surfcast/fpca.h"

namespace surfcast {

namespace detail {

// %.17g round-trips doubles exactly, which the byte-identical rerun
// guarantee depends on.
inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline double parse_number(const std::string& text, const std::string& where) {
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &consumed);
  } catch (const std::exception&) {
    throw SchemaError(where + ": '" + text + "' is not a number");
  }
  if (consumed != text.size() || !std::isfinite(value)) {
    throw SchemaError(where + ": '" + text + "' is not a finite number");
  }
  return value;
}

class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), stream_(path) {
    if (!stream_) throw Error("cannot open '" + path + "'");
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(stream_, line)) {
      ++line_number_;
      line = strip_cr(line);
      if (line.empty()) continue;
      fields = split_csv_line(line);
      return true;
    }
    return false;
  }

  void expect_header(const std::string& expected) {
    std::vector<std::string> fields;
    if (!next(fields)) throw SchemaError(path_ + " is empty");
    std::string joined;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) joined += ',';
      joined += fields[i];
    }
    if (joined != expected) {
      throw SchemaError(path_ + ": expected header '" + expected + "', got '" +
                        joined + "'");
    }
  }

  std::string context() const {
    return path_ + ":" + std::to_string(line_number_);
  }

 private:
  std::string path_;
  std::ifstream stream_;
  int line_number_ = 0;
};

class FileWriter {
 public:
  explicit FileWriter(const std::string& path) : path_(path), stream_(path) {
    if (!stream_) throw Error("cannot write '" + path + "'");
  }

  FileWriter& operator<<(const std::string& text) {
    stream_ << text;
    return *this;
  }

  void close() {
    stream_.close();
    if (!stream_) throw Error("write to '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ofstream stream_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Station and measurement files
// ---------------------------------------------------------------------------

struct StationRecord {
  std::string id;
  Point2 location;
};

inline std::vector<StationRecord> read_stations_csv(const std::string& path) {
  detail::CsvReader reader(path);
  reader.expect_header("station_id,x,y");
  std::vector<StationRecord> stations;
  std::set<std::string> seen;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() != 3) {
      throw SchemaError(reader.context() + ": expected 3 fields");
    }
    if (fields[0].empty()) throw SchemaError(reader.context() + ": empty station id");
    if (!seen.insert(fields[0]).second) {
      throw DuplicateRecord("station id '" + fields[0] + "' appears twice");
    }
    stations.push_back({fields[0],
                        {detail::parse_number(fields[1], reader.context()),
                         detail::parse_number(fields[2], reader.context())}});
  }
  if (stations.empty()) throw SchemaError(path + " lists no stations");
  return stations;
}

inline void write_stations_csv(const std::string& path,
                               const std::vector<std::string>& ids,
                               const std::vector<Point2>& points) {
  detail::FileWriter out(path);
  out << "station_id,x,y\n";
  for (std::size_t s = 0; s < ids.size(); ++s) {
    out << ids[s] << "," << detail::format_value(points[s].x) << ","
        << detail::format_value(points[s].y) << "\n";
  }
  out.close();
}

struct MeasurementRecord {
  std::string date;
  std::string station_id;
  double value = 0.0;
};

inline std::vector<MeasurementRecord> read_measurements_csv(const std::string& path) {
  detail::CsvReader reader(path);
  reader.expect_header("date,station_id,value");
  std::vector<MeasurementRecord> records;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() != 3) {
      throw SchemaError(reader.context() + ": expected 3 fields");
    }
    parse_iso_date(fields[0]);  // validates the format
    if (fields[1].empty()) throw SchemaError(reader.context() + ": empty station id");
    records.push_back({fields[0], fields[1],
                       detail::parse_number(fields[2], reader.context())});
  }
  return records;
}

inline void write_measurements_csv(const std::string& path,
                                   const std::vector<std::string>& dates,
                                   const std::vector<std::string>& station_ids,
                                   const Eigen::MatrixXd& values) {
  detail::FileWriter out(path);
  out << "date,station_id,value\n";
  for (int t = 0; t < values.rows(); ++t) {
    for (int s = 0; s < values.cols(); ++s) {
      out << dates[t] << "," << station_ids[s] << ","
          << detail::format_value(values(t, s)) << "\n";
    }
  }
  out.close();
}

// ---------------------------------------------------------------------------
// Panel assembly
// ---------------------------------------------------------------------------

struct ObservationPanel {
  std::vector<std::string> station_ids;
  std::vector<Point2> station_points;
  std::vector<std::string> dates;
  Eigen::MatrixXd values;  // T x N, NaN marks a missing observation
};

enum class MissingPolicy { DropStation, Interpolate };

/// Joins the station list with the measurement long table into a dense panel.
/// Dates are sorted ascending; stations keep their file order. Stations with
/// no measurements at all are dropped with a warning, then the missing-data
/// policy is applied: drop incomplete stations, or interpolate linearly over
/// the date index (endpoints extend the nearest value).
inline ObservationPanel ingest(const std::string& stations_path,
                               const std::string& measurements_path,
                               MissingPolicy policy,
                               std::vector<std::string>* warnings = nullptr) {
  const auto warn = [&](const std::string& message) {
    if (warnings) warnings->push_back(message);
  };
  const std::vector<StationRecord> stations = read_stations_csv(stations_path);
  const std::vector<MeasurementRecord> records =
      read_measurements_csv(measurements_path);
  if (records.empty()) throw NoCompleteStations("no measurements to ingest");

  std::map<std::string, int> station_index;
  for (std::size_t s = 0; s < stations.size(); ++s) {
    station_index.emplace(stations[s].id, static_cast<int>(s));
  }
  std::set<std::string> date_set;
  for (const auto& record : records) {
    if (!station_index.count(record.station_id)) {
      throw SchemaError("measurement references unknown station '" +
                        record.station_id + "'");
    }
    date_set.insert(record.date);
  }
  std::vector<std::string> dates(date_set.begin(), date_set.end());
  std::map<std::string, int> date_index;
  for (std::size_t t = 0; t < dates.size(); ++t) {
    date_index.emplace(dates[t], static_cast<int>(t));
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd raw = Eigen::MatrixXd::Constant(
      static_cast<int>(dates.size()), static_cast<int>(stations.size()), nan);
  for (const auto& record : records) {
    const int t = date_index.at(record.date);
    const int s = station_index.at(record.station_id);
    if (!std::isnan(raw(t, s))) {
      throw DuplicateRecord("duplicate measurement for (" + record.date + ", " +
                            record.station_id + ")");
    }
    raw(t, s) = record.value;
  }

  std::vector<int> kept;
  for (std::size_t s = 0; s < stations.size(); ++s) {
    const int col = static_cast<int>(s);
    const int observed =
        static_cast<int>((raw.col(col).array() == raw.col(col).array()).count());
    if (observed == 0) {
      warn("station " + stations[s].id + " has no measurements; dropped");
      continue;
    }
    if (observed < raw.rows() && policy == MissingPolicy::DropStation) {
      warn("station " + stations[s].id + " is missing " +
           std::to_string(raw.rows() - observed) + " of " +
           std::to_string(raw.rows()) + " days; dropped");
      continue;
    }
    kept.push_back(col);
  }
  if (kept.empty()) {
    throw NoCompleteStations("no station has a complete record");
  }

  ObservationPanel panel;
  panel.dates = std::move(dates);
  panel.values.resize(raw.rows(), static_cast<int>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    panel.station_ids.push_back(stations[kept[j]].id);
    panel.station_points.push_back(stations[kept[j]].location);
    panel.values.col(static_cast<int>(j)) = raw.col(kept[j]);
  }

  if (policy == MissingPolicy::Interpolate) {
    int filled = 0;
    for (int s = 0; s < panel.values.cols(); ++s) {
      auto column = panel.values.col(s);
      int prev = -1;
      for (int t = 0; t < column.size(); ++t) {
        if (std::isnan(column[t])) continue;
        if (prev < 0 && t > 0) {
          for (int u = 0; u < t; ++u, ++filled) column[u] = column[t];
        } else if (prev >= 0 && t > prev + 1) {
          for (int u = prev + 1; u < t; ++u, ++filled) {
            const double w = static_cast<double>(u - prev) / (t - prev);
            column[u] = (1.0 - w) * column[prev] + w * column[t];
          }
        }
        prev = t;
      }
      if (prev >= 0 && prev + 1 < column.size()) {
        for (int u = prev + 1; u < column.size(); ++u, ++filled) {
          column[u] = column[prev];
        }
      }
    }
    if (filled > 0) {
      warn("interpolated " + std::to_string(filled) + " missing values");
    }
  }
  return panel;
}

inline void write_panel_csv(const std::string& path, const ObservationPanel& panel) {
  detail::FileWriter out(path);
  std::string header = "date";
  for (const auto& id : panel.station_ids) header += "," + id;
  out << header << "\n";
  for (int t = 0; t < panel.values.rows(); ++t) {
    out << panel.dates[t];
    for (int s = 0; s < panel.values.cols(); ++s) {
      out << "," << detail::format_value(panel.values(t, s));
    }
    out << "\n";
  }
  out.close();
}

// ---------------------------------------------------------------------------
// Mesh and domain files
// ---------------------------------------------------------------------------

namespace detail {

// Chains the oriented boundary edges into closed walks for plotting; each
// loop is emitted with its first vertex repeated at the end.
inline std::vector<std::vector<int>> boundary_loops(const TriangleMesh& mesh) {
  std::multimap<int, int> outgoing;
  for (const auto& e : mesh.boundary_edges) outgoing.emplace(e[0], e[1]);
  std::vector<std::vector<int>> loops;
  while (!outgoing.empty()) {
    const auto first = outgoing.begin();
    std::vector<int> loop{first->first, first->second};
    outgoing.erase(first);
    while (true) {
      const auto it = outgoing.find(loop.back());
      if (it == outgoing.end()) break;
      loop.push_back(it->second);
      outgoing.erase(it);
      if (loop.back() == loop.front()) break;
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

}  // namespace detail

inline void write_mesh_json(const std::string& path, const TriangleMesh& mesh) {
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (const Point2 v : mesh.vertices) j["vertices"].push_back({v.x, v.y});
  j["triangles"] = nlohmann::json::array();
  for (const auto& t : mesh.triangles) j["triangles"].push_back({t[0], t[1], t[2]});
  j["boundary"] = nlohmann::json::array();
  for (const auto& loop : detail::boundary_loops(mesh)) {
    for (const int v : loop) {
      j["boundary"].push_back({mesh.vertices[v].x, mesh.vertices[v].y});
    }
  }
  detail::FileWriter out(path);
  out << j.dump(2) << "\n";
  out.close();
}

inline TriangleMesh read_mesh_json(const std::string& path) {
  std::ifstream stream(path);
  if (!stream) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    stream >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  TriangleMesh mesh;
  try {
    for (const auto& v : j.at("vertices")) {
      mesh.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    }
    for (const auto& t : j.at("triangles")) {
      mesh.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(),
                                t.at(2).get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  const int v_count = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (const int v : t) {
      if (v < 0 || v >= v_count) {
        throw SchemaError(path + ": triangle references vertex " +
                          std::to_string(v));
      }
    }
  }
  mesh.boundary_edges = detail::boundary_edges_of(mesh.triangles);
  return mesh;
}

inline DomainPolygon read_domain_json(const std::string& path) {
  std::ifstream stream(path);
  if (!stream) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    stream >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  DomainPolygon domain;
  try {
    for (const auto& v : j.at("outer")) {
      domain.outer.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    }
    if (j.contains("holes")) {
      for (const auto& ring : j.at("holes")) {
        std::vector<Point2> hole;
        for (const auto& v : ring) {
          hole.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        }
        domain.holes.push_back(std::move(hole));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  if (domain.outer.size() < 3) {
    throw SchemaError(path + ": outer ring needs at least 3 vertices");
  }
  return domain;
}

// ---------------------------------------------------------------------------
// Surface series files
// ---------------------------------------------------------------------------

/// Node ids: the first N nodes carry their station ids, the rest are named
/// n<k> by global node index.
inline std::vector<std::string> node_ids(const NodeSet& nodes,
                                         const std::vector<std::string>& station_ids) {
  std::vector<std::string> ids;
  ids.reserve(nodes.node_count());
  for (int k = 0; k < nodes.node_count(); ++k) {
    if (k < nodes.data_node_count) {
      ids.push_back(station_ids[k]);
    } else {
      ids.push_back("n" + std::to_string(k));
    }
  }
  return ids;
}

inline void write_series_csv(const std::string& path,
                             const Eigen::MatrixXd& coefficients,
                             const std::vector<std::string>& ids) {
  detail::FileWriter out(path);
  std::string header;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (k) header += ",";
    header += ids[k];
  }
  out << header << "\n";
  for (int t = 0; t < coefficients.rows(); ++t) {
    std::string line;
    for (int k = 0; k < coefficients.cols(); ++k) {
      if (k) line += ",";
      line += detail::format_value(coefficients(t, k));
    }
    out << line << "\n";
  }
  out.close();
}

struct SeriesFile {
  std::vector<std::string> ids;
  Eigen::MatrixXd coefficients;
};

inline SeriesFile read_series_csv(const std::string& path) {
  detail::CsvReader reader(path);
  SeriesFile file;
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw SchemaError(path + " is empty");
  file.ids = fields;
  std::vector<std::vector<double>> rows;
  while (reader.next(fields)) {
    if (fields.size() != file.ids.size()) {
      throw SchemaError(reader.context() + ": expected " +
                        std::to_string(file.ids.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k) {
      row[k] = detail::parse_number(fields[k], reader.context());
    }
    rows.push_back(std::move(row));
  }
  file.coefficients.resize(static_cast<int>(rows.size()),
                           static_cast<int>(file.ids.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t k = 0; k < rows[t].size(); ++k) {
      file.coefficients(static_cast<int>(t), static_cast<int>(k)) = rows[t][k];
    }
  }
  return file;
}

inline void write_dates_csv(const std::string& path,
                            const std::vector<std::string>& dates) {
  detail::FileWriter out(path);
  out << "date\n";
  for (const auto& d : dates) out << d << "\n";
  out.close();
}

inline std::vector<std::string> read_dates_csv(const std::string& path) {
  detail::CsvReader reader(path);
  reader.expect_header("date");
  std::vector<std::string> dates;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() != 1) throw SchemaError(reader.context() + ": expected 1 field");
    parse_iso_date(fields[0]);
    dates.push_back(fields[0]);
  }
  return dates;
}

// ---------------------------------------------------------------------------
// Model and report exports
// ---------------------------------------------------------------------------

inline void write_factor_bundle(const std::string& directory,
                                const FactorModel& model) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  {
    detail::FileWriter out((fs::path(directory) / "mean.csv").string());
    out << "value\n";
    for (int k = 0; k < model.mean.coefficients.size(); ++k) {
      out << detail::format_value(model.mean.coefficients[k]) << "\n";
    }
    out.close();
  }
  {
    detail::FileWriter out((fs::path(directory) / "loadings.csv").string());
    std::string header;
    for (std::size_t l = 0; l < model.loadings.size(); ++l) {
      if (l) header += ",";
      header += "psi" + std::to_string(l + 1);
    }
    out << header << "\n";
    const int K = static_cast<int>(model.mean.coefficients.size());
    for (int k = 0; k < K; ++k) {
      std::string line;
      for (std::size_t l = 0; l < model.loadings.size(); ++l) {
        if (l) line += ",";
        line += detail::format_value(model.loadings[l].coefficients[k]);
      }
      out << line << "\n";
    }
    out.close();
  }
  {
    detail::FileWriter out((fs::path(directory) / "scores.csv").string());
    std::string header;
    for (int l = 0; l < model.scores.cols(); ++l) {
      if (l) header += ",";
      header += "x" + std::to_string(l + 1);
    }
    out << header << "\n";
    for (int t = 0; t < model.scores.rows(); ++t) {
      std::string line;
      for (int l = 0; l < model.scores.cols(); ++l) {
        if (l) line += ",";
        line += detail::format_value(model.scores(t, l));
      }
      out << line << "\n";
    }
    out.close();
  }
  {
    detail::FileWriter out((fs::path(directory) / "eigenvalues.csv").string());
    out << "eigenvalue\n";
    for (int l = 0; l < model.eigenvalues.size(); ++l) {
      out << detail::format_value(model.eigenvalues[l]) << "\n";
    }
    out.close();
  }
}

inline void write_forecast_csv(const std::string& path, const Surface& surface,
                               const std::vector<std::string>& ids) {
  detail::FileWriter out(path);
  out << "node_id,x,y,value\n";
  const NodeSet& nodes = *surface.nodes;
  for (int k = 0; k < nodes.node_count(); ++k) {
    out << ids[k] << "," << detail::format_value(nodes.nodes[k].x) << ","
        << detail::format_value(nodes.nodes[k].y) << ","
        << detail::format_value(surface.coefficients[k]) << "\n";
  }
  out.close();
}

inline void write_mse_long_csv(const std::string& path, const ForecastReport& report) {
  detail::FileWriter out(path);
  out << "origin,method,mse\n";
  for (int j = 0; j < report.errors.rows(); ++j) {
    for (int m = 0; m < report.errors.cols(); ++m) {
      out << std::to_string(report.target_rows[j]) << "," << report.labels[m]
          << "," << detail::format_value(report.errors(j, m)) << "\n";
    }
  }
  out.close();
}

inline void write_mse_summary_csv(const std::string& path,
                                  const ForecastReport& report) {
  detail::FileWriter out(path);
  out << "method,mean,q1,median,q3,min,max\n";
  for (const MethodSummary& s : report.summary) {
    out << s.label << "," << detail::format_value(s.mean) << ","
        << detail::format_value(s.q1) << "," << detail::format_value(s.median)
        << "," << detail::format_value(s.q3) << "," << detail::format_value(s.min)
        << "," << detail::format_value(s.max) << "\n";
  }
  out.close();
}

inline void write_events_csv(const std::string& path,
                             const std::vector<ExceedanceEvent>& events) {
  detail::FileWriter out(path);
  out << "date,node,value\n";
  for (const ExceedanceEvent& e : events) {
    out << e.time_label << "," << std::to_string(e.node) << ","
        << detail::format_value(e.value) << "\n";
  }
  out.close();
}

inline void write_gcv_csv(const std::string& path, const std::vector<double>& grid,
                          const std::vector<double>& scores) {
  detail::FileWriter out(path);
  out << "lambda,score\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << detail::format_value(grid[i]) << "," << detail::format_value(scores[i])
        << "\n";
  }
  out.close();
}

}  // namespace surfcast

#endif  // SURFCAST_IO_H
