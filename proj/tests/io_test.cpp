#include "surfcast/io.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "surfcast/fpca.h"
#include "surfcast/geometry.h"
#include "surfcast/random.h"
#include "test_support.h"

namespace fs = std::filesystem;

using surfcast::MissingPolicy;
using surfcast::ObservationPanel;
using surfcast::Point2;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("surfcast_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

TEST(ValueFormat, SeventeenDigitsRoundTripExactly) {
  for (const double v : {1.0 / 3.0, 0.1, -2.5e-17, 1.23456789012345e300,
                         2.2250738585072014e-308, 0.0, -7.0}) {
    const std::string text = surfcast::detail::format_value(v);
    EXPECT_EQ(std::stod(text), v) << text;
  }
  EXPECT_EQ(surfcast::detail::format_value(10.0), "10");
}

TEST(ValueFormat, ParserRejectsPartialAndNonFiniteInput) {
  EXPECT_DOUBLE_EQ(surfcast::detail::parse_number("1e5", "ctx"), 1e5);
  EXPECT_DOUBLE_EQ(surfcast::detail::parse_number("-0.25", "ctx"), -0.25);
  EXPECT_THROW(surfcast::detail::parse_number("abc", "ctx"),
               surfcast::SchemaError);
  EXPECT_THROW(surfcast::detail::parse_number("1.5x", "ctx"),
               surfcast::SchemaError);
  EXPECT_THROW(surfcast::detail::parse_number("", "ctx"), surfcast::SchemaError);
  EXPECT_THROW(surfcast::detail::parse_number("inf", "ctx"),
               surfcast::SchemaError);
}

TEST(CsvLines, SplittingKeepsEmptyFields) {
  const auto fields = surfcast::detail::split_csv_line("a,,b,");
  ASSERT_EQ(fields.size(), 4u);
  EXPECT_EQ(fields[0], "a");
  EXPECT_EQ(fields[1], "");
  EXPECT_EQ(fields[2], "b");
  EXPECT_EQ(fields[3], "");
}

TEST(Dates, ParsingAndRangesFollowTheCalendar) {
  EXPECT_NO_THROW(surfcast::parse_iso_date("2020-02-29"));
  EXPECT_THROW(surfcast::parse_iso_date("2021-02-29"), surfcast::SchemaError);
  EXPECT_THROW(surfcast::parse_iso_date("20200101"), surfcast::SchemaError);
  EXPECT_THROW(surfcast::parse_iso_date("2020-01-01x"), surfcast::SchemaError);
  const auto range = surfcast::date_range("2020-02-27", 4);
  const std::vector<std::string> expected = {"2020-02-27", "2020-02-28",
                                             "2020-02-29", "2020-03-01"};
  EXPECT_EQ(range, expected);
}

TEST(StationsCsv, WritesAndReadsBackTheSameRecords) {
  const fs::path dir = fresh_dir("stations_roundtrip");
  const std::vector<std::string> ids = {"a1", "b2", "c3"};
  const std::vector<Point2> points = {{0.0, 0.5}, {1.0 / 3.0, -2.0}, {5.0, 5.0}};
  const std::string path = (dir / "stations.csv").string();
  surfcast::write_stations_csv(path, ids, points);

  const auto records = surfcast::read_stations_csv(path);
  ASSERT_EQ(records.size(), 3u);
  for (std::size_t s = 0; s < records.size(); ++s) {
    EXPECT_EQ(records[s].id, ids[s]);
    EXPECT_EQ(records[s].location.x, points[s].x);
    EXPECT_EQ(records[s].location.y, points[s].y);
  }
}

TEST(StationsCsv, RejectsMalformedFiles) {
  const fs::path dir = fresh_dir("stations_bad");
  const auto path = [&](const std::string& name) { return (dir / name).string(); };

  write_text(dir / "dup.csv", "station_id,x,y\ns1,0,0\ns1,1,1\n");
  EXPECT_THROW(surfcast::read_stations_csv(path("dup.csv")),
               surfcast::DuplicateRecord);

  write_text(dir / "header.csv", "id,x,y\ns1,0,0\n");
  EXPECT_THROW(surfcast::read_stations_csv(path("header.csv")),
               surfcast::SchemaError);

  write_text(dir / "short.csv", "station_id,x,y\ns1,0\n");
  EXPECT_THROW(surfcast::read_stations_csv(path("short.csv")),
               surfcast::SchemaError);

  write_text(dir / "value.csv", "station_id,x,y\ns1,zero,0\n");
  EXPECT_THROW(surfcast::read_stations_csv(path("value.csv")),
               surfcast::SchemaError);

  write_text(dir / "empty.csv", "station_id,x,y\n");
  EXPECT_THROW(surfcast::read_stations_csv(path("empty.csv")),
               surfcast::SchemaError);

  EXPECT_THROW(surfcast::read_stations_csv(path("missing.csv")), surfcast::Error);
}

TEST(MeasurementsCsv, RoundTripsAndValidatesDates) {
  const fs::path dir = fresh_dir("measurements");
  const std::string path = (dir / "m.csv").string();
  Eigen::MatrixXd values(2, 2);
  values << 1.5, -2.25, 0.125, 1e-3;
  surfcast::write_measurements_csv(path, {"2021-06-01", "2021-06-02"},
                                   {"s1", "s2"}, values);
  const auto records = surfcast::read_measurements_csv(path);
  ASSERT_EQ(records.size(), 4u);
  EXPECT_EQ(records[0].date, "2021-06-01");
  EXPECT_EQ(records[0].station_id, "s1");
  EXPECT_EQ(records[0].value, 1.5);
  EXPECT_EQ(records[3].value, 1e-3);

  write_text(dir / "bad_date.csv", "date,station_id,value\nJune 1,s1,2\n");
  EXPECT_THROW(surfcast::read_measurements_csv((dir / "bad_date.csv").string()),
               surfcast::SchemaError);
}

TEST(Ingest, BuildsASortedCompletePanel) {
  const fs::path dir = fresh_dir("ingest_basic");
  write_text(dir / "stations.csv", "station_id,x,y\nb,1,0\na,0,0\nc,2,0\n");
  // Dates arrive shuffled; the panel must sort them ascending.
  write_text(dir / "m.csv",
             "date,station_id,value\n"
             "2020-01-02,a,4\n2020-01-01,a,1\n"
             "2020-01-02,b,5\n2020-01-01,b,2\n"
             "2020-01-01,c,3\n2020-01-02,c,6\n");
  std::vector<std::string> warnings;
  const ObservationPanel panel =
      surfcast::ingest((dir / "stations.csv").string(), (dir / "m.csv").string(),
                       MissingPolicy::DropStation, &warnings);
  EXPECT_TRUE(warnings.empty());
  EXPECT_EQ(panel.station_ids, (std::vector<std::string>{"b", "a", "c"}));
  EXPECT_EQ(panel.dates, (std::vector<std::string>{"2020-01-01", "2020-01-02"}));
  ASSERT_EQ(panel.values.rows(), 2);
  ASSERT_EQ(panel.values.cols(), 3);
  Eigen::MatrixXd expected(2, 3);
  expected << 2, 1, 3, 5, 4, 6;  // station-file order b, a, c
  EXPECT_EQ(panel.values, expected);
  EXPECT_EQ(panel.station_points[0].x, 1.0);
}

TEST(Ingest, UnknownStationsAndDuplicatesAreErrors) {
  const fs::path dir = fresh_dir("ingest_errors");
  write_text(dir / "stations.csv", "station_id,x,y\na,0,0\n");
  write_text(dir / "unknown.csv", "date,station_id,value\n2020-01-01,ghost,1\n");
  EXPECT_THROW(surfcast::ingest((dir / "stations.csv").string(),
                                (dir / "unknown.csv").string(),
                                MissingPolicy::DropStation),
               surfcast::SchemaError);

  write_text(dir / "dup.csv",
             "date,station_id,value\n2020-01-01,a,1\n2020-01-01,a,2\n");
  try {
    surfcast::ingest((dir / "stations.csv").string(), (dir / "dup.csv").string(),
                     MissingPolicy::DropStation);
    FAIL() << "expected DuplicateRecord";
  } catch (const surfcast::DuplicateRecord& e) {
    const std::string message = e.what();
    EXPECT_NE(message.find("2020-01-01"), std::string::npos);
    EXPECT_NE(message.find("a"), std::string::npos);
  }

  write_text(dir / "none.csv", "date,station_id,value\n");
  EXPECT_THROW(surfcast::ingest((dir / "stations.csv").string(),
                                (dir / "none.csv").string(),
                                MissingPolicy::DropStation),
               surfcast::NoCompleteStations);
}

TEST(Ingest, DropPolicyRemovesIncompleteStationsWithAWarning) {
  const fs::path dir = fresh_dir("ingest_drop");
  write_text(dir / "stations.csv", "station_id,x,y\na,0,0\nb,1,0\nc,2,0\n");
  // b misses a day, c never reports.
  write_text(dir / "m.csv",
             "date,station_id,value\n"
             "2020-01-01,a,1\n2020-01-02,a,2\n2020-01-01,b,5\n");
  std::vector<std::string> warnings;
  const ObservationPanel panel =
      surfcast::ingest((dir / "stations.csv").string(), (dir / "m.csv").string(),
                       MissingPolicy::DropStation, &warnings);
  EXPECT_EQ(panel.station_ids, std::vector<std::string>{"a"});
  ASSERT_EQ(warnings.size(), 2u);
  EXPECT_NE(warnings[0].find("b"), std::string::npos);
  EXPECT_NE(warnings[0].find("1 of 2"), std::string::npos);
  EXPECT_NE(warnings[1].find("c"), std::string::npos);

  // With every reporting station incomplete nothing survives.
  write_text(dir / "all_gaps.csv",
             "date,station_id,value\n"
             "2020-01-01,a,1\n2020-01-02,b,5\n");
  EXPECT_THROW(surfcast::ingest((dir / "stations.csv").string(),
                                (dir / "all_gaps.csv").string(),
                                MissingPolicy::DropStation),
               surfcast::NoCompleteStations);
}

TEST(Ingest, InterpolationFillsGapsLinearlyAndExtendsEndpoints) {
  const fs::path dir = fresh_dir("ingest_interp");
  write_text(dir / "stations.csv", "station_id,x,y\na,0,0\nb,1,0\nc,2,0\n");
  // Five days defined by station b; a has an interior gap, c a single value.
  std::string rows = "date,station_id,value\n";
  const char* days[] = {"2020-01-01", "2020-01-02", "2020-01-03", "2020-01-04",
                        "2020-01-05"};
  for (const char* day : days) {
    rows += std::string(day) + ",b,1\n";
  }
  rows += "2020-01-01,a,10\n2020-01-04,a,4\n";
  rows += "2020-01-03,c,7\n";
  write_text(dir / "m.csv", rows);

  std::vector<std::string> warnings;
  const ObservationPanel panel =
      surfcast::ingest((dir / "stations.csv").string(), (dir / "m.csv").string(),
                       MissingPolicy::Interpolate, &warnings);
  ASSERT_EQ(panel.values.rows(), 5);
  ASSERT_EQ(panel.values.cols(), 3);
  const int a = 0, c = 2;
  EXPECT_DOUBLE_EQ(panel.values(0, a), 10.0);
  EXPECT_DOUBLE_EQ(panel.values(1, a), 8.0);
  EXPECT_DOUBLE_EQ(panel.values(2, a), 6.0);
  EXPECT_DOUBLE_EQ(panel.values(3, a), 4.0);
  EXPECT_DOUBLE_EQ(panel.values(4, a), 4.0);  // trailing extension
  for (int t = 0; t < 5; ++t) {
    EXPECT_DOUBLE_EQ(panel.values(t, c), 7.0);  // both endpoints extended
  }
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("interpolated 7"), std::string::npos);
}

TEST(PanelCsv, HeaderCarriesTheStationIds) {
  const fs::path dir = fresh_dir("panel");
  ObservationPanel panel;
  panel.station_ids = {"s1", "s2"};
  panel.dates = {"2020-01-01", "2020-01-02"};
  panel.values.resize(2, 2);
  panel.values << 1.0, 0.5, 2.0, 0.25;
  const std::string path = (dir / "panel.csv").string();
  surfcast::write_panel_csv(path, panel);
  EXPECT_EQ(read_text(path),
            "date,s1,s2\n2020-01-01,1,0.5\n2020-01-02,2,0.25\n");
}

TEST(MeshJson, RoundTripsVerticesTrianglesAndBoundary) {
  const auto points = testsupport::random_points(15, 901);
  const surfcast::TriangleMesh mesh = surfcast::delaunay_triangulate(points);
  const fs::path dir = fresh_dir("mesh");
  const std::string path = (dir / "mesh.json").string();
  surfcast::write_mesh_json(path, mesh);
  const surfcast::TriangleMesh loaded = surfcast::read_mesh_json(path);

  ASSERT_EQ(loaded.vertices.size(), mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    EXPECT_EQ(loaded.vertices[v].x, mesh.vertices[v].x);
    EXPECT_EQ(loaded.vertices[v].y, mesh.vertices[v].y);
  }
  EXPECT_EQ(loaded.triangles, mesh.triangles);
  EXPECT_EQ(loaded.boundary_edges, mesh.boundary_edges);
}

TEST(MeshJson, RejectsBrokenFiles) {
  const fs::path dir = fresh_dir("mesh_bad");
  write_text(dir / "syntax.json", "{\"vertices\": [");
  EXPECT_THROW(surfcast::read_mesh_json((dir / "syntax.json").string()),
               surfcast::SchemaError);
  write_text(dir / "index.json",
             R"({"vertices": [[0,0],[1,0],[0,1]], "triangles": [[0,1,7]]})");
  EXPECT_THROW(surfcast::read_mesh_json((dir / "index.json").string()),
               surfcast::SchemaError);
  write_text(dir / "fields.json", R"({"triangles": []})");
  EXPECT_THROW(surfcast::read_mesh_json((dir / "fields.json").string()),
               surfcast::SchemaError);
}

TEST(DomainJson, ReadsOuterRingAndHoles) {
  const fs::path dir = fresh_dir("domain");
  write_text(dir / "domain.json",
             R"({"outer": [[0,0],[10,0],[10,10],[0,10]],
                 "holes": [[[4,4],[6,4],[6,6],[4,6]]]})");
  const surfcast::DomainPolygon domain =
      surfcast::read_domain_json((dir / "domain.json").string());
  ASSERT_EQ(domain.outer.size(), 4u);
  EXPECT_EQ(domain.outer[1].x, 10.0);
  ASSERT_EQ(domain.holes.size(), 1u);
  ASSERT_EQ(domain.holes[0].size(), 4u);
  EXPECT_EQ(domain.holes[0][2].y, 6.0);

  write_text(dir / "thin.json", R"({"outer": [[0,0],[1,0]]})");
  EXPECT_THROW(surfcast::read_domain_json((dir / "thin.json").string()),
               surfcast::SchemaError);
}

TEST(NodeIds, StationsKeepTheirNamesAndInteriorNodesAreNumbered) {
  const auto nodes = testsupport::single_triangle_nodes();
  const auto ids = surfcast::node_ids(*nodes, {"alpha", "beta", "gamma"});
  ASSERT_EQ(ids.size(), 6u);
  EXPECT_EQ(ids[0], "alpha");
  EXPECT_EQ(ids[2], "gamma");
  EXPECT_EQ(ids[3], "n3");
  EXPECT_EQ(ids[5], "n5");
}

TEST(SeriesCsv, CoefficientsRoundTripBitForBit) {
  const fs::path dir = fresh_dir("series");
  surfcast::Rng rng(42);
  Eigen::MatrixXd coefficients(4, 3);
  for (int t = 0; t < 4; ++t) {
    for (int k = 0; k < 3; ++k) coefficients(t, k) = rng.normal();
  }
  const std::string path = (dir / "series.csv").string();
  surfcast::write_series_csv(path, coefficients, {"s1", "s2", "n2"});
  const surfcast::SeriesFile file = surfcast::read_series_csv(path);
  EXPECT_EQ(file.ids, (std::vector<std::string>{"s1", "s2", "n2"}));
  ASSERT_EQ(file.coefficients.rows(), 4);
  ASSERT_EQ(file.coefficients.cols(), 3);
  EXPECT_EQ(file.coefficients, coefficients);

  write_text(dir / "ragged.csv", "a,b\n1,2\n3\n");
  EXPECT_THROW(surfcast::read_series_csv((dir / "ragged.csv").string()),
               surfcast::SchemaError);
}

TEST(DatesCsv, RoundTripsAndValidates) {
  const fs::path dir = fresh_dir("dates");
  const std::vector<std::string> dates = {"2020-01-01", "2020-01-02"};
  const std::string path = (dir / "dates.csv").string();
  surfcast::write_dates_csv(path, dates);
  EXPECT_EQ(surfcast::read_dates_csv(path), dates);
  write_text(dir / "bad.csv", "date\nnot-a-date\n");
  EXPECT_THROW(surfcast::read_dates_csv((dir / "bad.csv").string()),
               surfcast::SchemaError);
}

TEST(FactorBundle, FourFilesCaptureTheModelExactly) {
  const auto nodes = testsupport::random_nodes(8, 902);
  const auto matrices = surfcast::assemble_matrices(nodes);
  surfcast::Rng rng(43);
  surfcast::SurfaceSeries series;
  series.nodes = nodes;
  series.coefficients.resize(12, nodes->node_count());
  for (int t = 0; t < 12; ++t) {
    for (int k = 0; k < nodes->node_count(); ++k) {
      series.coefficients(t, k) = rng.normal();
    }
  }
  const auto model = surfcast::fit_factor_model(series, matrices, 2);

  const fs::path dir = fresh_dir("bundle");
  surfcast::write_factor_bundle(dir.string(), model);

  const auto mean = surfcast::read_series_csv((dir / "mean.csv").string());
  EXPECT_EQ(mean.ids, std::vector<std::string>{"value"});
  EXPECT_EQ(mean.coefficients.col(0), model.mean.coefficients);

  const auto loadings = surfcast::read_series_csv((dir / "loadings.csv").string());
  EXPECT_EQ(loadings.ids, (std::vector<std::string>{"psi1", "psi2"}));
  ASSERT_EQ(loadings.coefficients.rows(), nodes->node_count());
  for (int l = 0; l < 2; ++l) {
    EXPECT_EQ(loadings.coefficients.col(l), model.loadings[l].coefficients);
  }

  const auto scores = surfcast::read_series_csv((dir / "scores.csv").string());
  EXPECT_EQ(scores.ids, (std::vector<std::string>{"x1", "x2"}));
  EXPECT_EQ(scores.coefficients, model.scores);

  const auto eigenvalues =
      surfcast::read_series_csv((dir / "eigenvalues.csv").string());
  EXPECT_EQ(eigenvalues.ids, std::vector<std::string>{"eigenvalue"});
  EXPECT_EQ(eigenvalues.coefficients.col(0), model.eigenvalues);
}

TEST(ReportCsv, ForecastLongAndSummaryFilesFollowTheirSchemas) {
  const fs::path dir = fresh_dir("reports");
  const auto nodes = testsupport::single_triangle_nodes();
  Eigen::VectorXd coeff(6);
  coeff << 1, 2, 3, 4, 5, 6;
  surfcast::write_forecast_csv((dir / "forecast.csv").string(), {nodes, coeff},
                               surfcast::node_ids(*nodes, {"a", "b", "c"}));
  const std::string forecast = read_text(dir / "forecast.csv");
  EXPECT_NE(forecast.find("node_id,x,y,value\n"), std::string::npos);
  EXPECT_NE(forecast.find("a,0,0,1\n"), std::string::npos);
  EXPECT_NE(forecast.find("n3,"), std::string::npos);

  surfcast::ForecastReport report;
  report.labels = {"mean", "naive"};
  report.target_rows = {5, 6};
  report.errors.resize(2, 2);
  report.errors << 0.5, 1.5, std::nan(""), 2.5;
  report.summary.resize(2);
  report.summary[0].label = "mean";
  report.summary[0].mean = 0.5;
  report.summary[0].q1 = report.summary[0].median = report.summary[0].q3 = 0.5;
  report.summary[0].min = report.summary[0].max = 0.5;
  report.summary[1].label = "naive";
  report.summary[1].mean = 2.0;

  surfcast::write_mse_long_csv((dir / "long.csv").string(), report);
  const std::string long_text = read_text(dir / "long.csv");
  EXPECT_EQ(long_text,
            "origin,method,mse\n"
            "5,mean,0.5\n5,naive,1.5\n"
            "6,mean,nan\n6,naive,2.5\n");

  surfcast::write_mse_summary_csv((dir / "summary.csv").string(), report);
  const std::string summary_text = read_text(dir / "summary.csv");
  EXPECT_NE(summary_text.find("method,mean,q1,median,q3,min,max\n"),
            std::string::npos);
  EXPECT_NE(summary_text.find("mean,0.5,0.5,0.5,0.5,0.5,0.5\n"),
            std::string::npos);

  surfcast::ExceedanceEvent event;
  event.time_label = "2020-01-05";
  event.node = 2;
  event.value = 51.25;
  surfcast::write_events_csv((dir / "events.csv").string(), {event});
  EXPECT_EQ(read_text(dir / "events.csv"),
            "date,node,value\n2020-01-05,2,51.25\n");

  surfcast::write_gcv_csv((dir / "gcv.csv").string(), {0.5, 1.0}, {3.5, 2.25});
  EXPECT_EQ(read_text(dir / "gcv.csv"),
            "lambda,score\n0.5,3.5\n1,2.25\n");
}

TEST(CsvReader, WindowsLineEndingsAndBlankLinesAreTolerated) {
  const fs::path dir = fresh_dir("crlf");
  write_text(dir / "stations.csv",
             "station_id,x,y\r\n\r\ns1,1,2\r\n\ns2,3,4\r\n");
  const auto records =
      surfcast::read_stations_csv((dir / "stations.csv").string());
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].id, "s1");
  EXPECT_EQ(records[1].location.y, 4.0);
}
