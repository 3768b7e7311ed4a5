// Command-line front end: each subcommand reads the artifacts of the
// previous stage from --input-dir and writes its own into --output-dir, so a
// full run chains ingest -> smooth -> decompose -> forecast/evaluate.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "surfcast/surfcast.h"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string input_dir;
  std::string output_dir;
  bool has_seed = false;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON configuration file");
  cmd->add_option("--input-dir", flags.input_dir,
                  "directory holding upstream artifacts");
  cmd->add_option("--output-dir", flags.output_dir, "directory to write into");
  cmd->add_option("--seed", flags.seed, "seed for stochastic steps")
      ->each([&flags](const std::string&) { flags.has_seed = true; });
}

surfcast::PipelineConfig resolve(const CommonFlags& flags) {
  surfcast::PipelineConfig config;
  if (!flags.config_path.empty()) {
    config = surfcast::load_pipeline_config(flags.config_path);
  }
  if (!flags.input_dir.empty()) config.input_dir = flags.input_dir;
  if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
  if (flags.has_seed) {
    config.seed = flags.seed;
    config.synth.seed = flags.seed;
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surface reconstruction and forecasting for station panels"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* ingest = app.add_subcommand("ingest",
                                    "build mesh and observation panel from "
                                    "stations.csv and measurements.csv");
  add_common(ingest, flags);
  std::string stations_path, measurements_path, domain_path, missing_policy;
  ingest->add_option("--stations", stations_path, "stations.csv path");
  ingest->add_option("--measurements", measurements_path, "measurements.csv path");
  ingest->add_option("--domain", domain_path, "domain polygon JSON path");
  ingest->add_option("--missing-policy", missing_policy,
                     "drop-station (default) or interpolate");

  auto* smooth = app.add_subcommand("smooth",
                                    "reconstruct one surface per day from the "
                                    "ingested panel");
  add_common(smooth, flags);
  std::string lambda_text, lambda_grid_text, pooling_text;
  smooth->add_option("--lambda", lambda_text, "positive value or 'auto'");
  smooth->add_option("--lambda-grid", lambda_grid_text,
                     "search grid as min,max,count");
  smooth->add_option("--gcv-pooling", pooling_text, "mean (default) or per-day");

  auto* gcv = app.add_subcommand("gcv", "scan the lambda grid and write scores");
  add_common(gcv, flags);
  gcv->add_option("--lambda-grid", lambda_grid_text,
                  "search grid as min,max,count");

  auto* decompose = app.add_subcommand("decompose",
                                       "estimate mean, loadings, eigenvalues "
                                       "and scores from the surface series");
  add_common(decompose, flags);
  std::string factors_text;
  decompose->add_option("--factors", factors_text,
                        "component count or 'auto'");

  auto* forecast = app.add_subcommand("forecast",
                                      "one-step-ahead surface forecast");
  add_common(forecast, flags);
  std::string method_text, ic_text;
  forecast->add_option("--method", method_text, "var, knn, far, mean or naive");
  forecast->add_option("--ic-variant", ic_text, "ANH, OS-BIC or OS-HQ");

  auto* evaluate = app.add_subcommand("evaluate",
                                      "rolling-origin backtest over the "
                                      "configured methods");
  add_common(evaluate, flags);
  double threshold = 0.0;
  auto* threshold_opt =
      evaluate->add_option("--threshold", threshold,
                           "also report exceedance events above this value");

  auto* synth = app.add_subcommand("synth",
                                   "generate a synthetic station dataset");
  add_common(synth, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    surfcast::PipelineConfig config = resolve(flags);

    if (ingest->parsed()) {
      if (!stations_path.empty()) config.stations = stations_path;
      if (!measurements_path.empty()) config.measurements = measurements_path;
      if (!domain_path.empty()) config.domain = domain_path;
      if (!missing_policy.empty()) {
        config.missing_policy = surfcast::parse_missing_policy(missing_policy);
      }
      const surfcast::IngestResult result = surfcast::run_ingest(config);
      for (const auto& warning : result.warnings) {
        std::cerr << "warning: " << warning << "\n";
      }
      std::cout << "ingested " << result.stations_kept << " stations x "
                << result.days << " days; mesh has " << result.vertices
                << " vertices, " << result.triangles << " triangles\n";
    } else if (smooth->parsed()) {
      if (!lambda_text.empty()) {
        surfcast::set_lambda_setting(config.smoothing, lambda_text);
      }
      if (!lambda_grid_text.empty()) {
        surfcast::set_lambda_grid(config.smoothing, lambda_grid_text);
      }
      if (!pooling_text.empty()) {
        config.smoothing.pooling = surfcast::parse_gcv_pooling(pooling_text);
      }
      const surfcast::SmoothResult result = surfcast::run_smooth(config);
      if (result.scanned && config.smoothing.pooling == surfcast::GcvPooling::Mean) {
        std::cout << "selected lambda = " << result.day_lambdas.front() << "\n";
      } else if (result.scanned) {
        std::cout << "selected per-day lambdas (see lambdas.csv)\n";
      } else {
        std::cout << "smoothed with lambda = " << result.day_lambdas.front()
                  << "\n";
      }
    } else if (gcv->parsed()) {
      if (!lambda_grid_text.empty()) {
        surfcast::set_lambda_grid(config.smoothing, lambda_grid_text);
      }
      const surfcast::GcvScan scan = surfcast::run_gcv(config);
      const int best = surfcast::detail::argmin_finite(scan.pooled_scores);
      if (best >= 0) {
        std::cout << "minimum mean score " << scan.pooled_scores[best]
                  << " at lambda = " << scan.grid[best] << "\n";
      } else {
        std::cout << "no grid point produced a finite score\n";
      }
    } else if (decompose->parsed()) {
      if (!factors_text.empty()) {
        if (factors_text == "auto") {
          config.factors_auto = true;
        } else {
          config.factors_auto = false;
          config.factors = std::stoi(factors_text);
        }
      }
      const surfcast::DecomposeResult result = surfcast::run_decompose(config);
      std::cout << "kept " << result.factors << " components explaining "
                << 100.0 * result.explained << "% of the variance\n";
    } else if (forecast->parsed()) {
      if (!method_text.empty()) config.method = method_text;
      if (!ic_text.empty()) {
        config.ic_variant = surfcast::detail::parse_ic_variant(ic_text);
      }
      const surfcast::ForecastRunResult result = surfcast::run_forecast(config);
      std::cout << "forecast written (method " << result.method;
      if (result.factors > 0) std::cout << ", L = " << result.factors;
      if (result.lags > 0) std::cout << ", p = " << result.lags;
      if (result.neighbours > 0) std::cout << ", K = " << result.neighbours;
      std::cout << ")\n";
    } else if (evaluate->parsed()) {
      if (threshold_opt->count() > 0) {
        config.evaluate.threshold = threshold;
        config.evaluate.has_threshold = true;
      }
      const surfcast::EvaluateRunResult result = surfcast::run_evaluate(config);
      for (const auto& summary : result.report.summary) {
        std::cout << summary.label << ": mean MSE "
                  << surfcast::detail::format_value(summary.mean);
        if (summary.failures > 0) {
          std::cout << " (" << summary.failures << " failed origins)";
        }
        std::cout << "\n";
      }
      if (config.evaluate.has_threshold) {
        std::cout << result.events << " exceedance events above "
                  << config.evaluate.threshold << "\n";
      }
    } else if (synth->parsed()) {
      const surfcast::SynthRunResult result = surfcast::run_synth(config);
      std::cout << "generated " << result.stations << " stations x "
                << result.days << " days\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
