#ifndef SURFCAST_EVAL_H
#define SURFCAST_EVAL_H

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "surfcast/errors.h"
#include "surfcast/forecast.h"

namespace surfcast {

/// Mean squared difference at the data nodes; with Lagrange elements these
/// are the first N coefficients.
inline double surface_mse(const Surface& actual, const Surface& predicted) {
  if (!same_mesh(actual.nodes, predicted.nodes)) {
    throw MeshMismatch("surfaces live on different meshes");
  }
  const int n = actual.nodes->data_node_count;
  if (n < 1) throw DegenerateInput("mesh has no data nodes");
  return (actual.coefficients.head(n) - predicted.coefficients.head(n))
             .squaredNorm() /
         n;
}

/// Alternative error metric: the squared FEM norm of the difference, i.e.
/// the integral of (actual - predicted)^2 over the whole domain.
inline double integrated_squared_error(const Surface& actual,
                                       const Surface& predicted,
                                       const FemMatrices& matrices) {
  if (!same_mesh(actual.nodes, predicted.nodes) ||
      !same_mesh(actual.nodes, matrices.nodes)) {
    throw MeshMismatch("surfaces and matrices do not share one mesh");
  }
  const Eigen::VectorXd d = actual.coefficients - predicted.coefficients;
  return d.dot(matrices.mass * d);
}

enum class ErrorMetric { DataNodes, Integrated };

enum class ForecastMethod { DffmVar, DffmKnn, Far, Mean, Naive };

struct MethodConfig {
  std::string label;
  ForecastMethod kind = ForecastMethod::Naive;
  OrderSelection selection = OrderSelection::ic(IcVariant::OsBic);
  KnnOptions knn;
  DffmLimits limits;
  int far_truncation = 2;
};

struct EvaluationPlan {
  int training_length = 0;  // surfaces available to the first fit
  int origin_count = 0;     // number of one-step forecasts
  std::vector<MethodConfig> methods;
  ErrorMetric metric = ErrorMetric::DataNodes;
  bool retain_forecasts = false;
};

struct MethodSummary {
  std::string label;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  int failures = 0;
};

struct ForecastReport {
  std::vector<std::string> labels;
  std::vector<int> target_rows;
  Eigen::MatrixXd errors;  // origins x methods; NaN marks a failed fit
  std::vector<MethodSummary> summary;
  // forecasts[m][j] is method m's surface for origin j (when retained).
  std::vector<std::vector<Surface>> forecasts;
};

namespace detail {

// Linear-interpolation quantile on a sorted sample (the common "type 7").
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - lo;
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline MethodSummary summarize(const std::string& label,
                               const Eigen::VectorXd& column) {
  MethodSummary s;
  s.label = label;
  std::vector<double> values;
  values.reserve(column.size());
  for (int i = 0; i < column.size(); ++i) {
    if (std::isnan(column[i])) {
      ++s.failures;
    } else {
      values.push_back(column[i]);
    }
  }
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  s.min = values.front();
  s.max = values.back();
  s.q1 = sorted_quantile(values, 0.25);
  s.median = sorted_quantile(values, 0.5);
  s.q3 = sorted_quantile(values, 0.75);
  return s;
}

inline Surface forecast_with(const MethodConfig& method,
                             const SurfaceSeries& training,
                             const FemMatrices& matrices) {
  switch (method.kind) {
    case ForecastMethod::DffmVar:
      return dffm_forecast(training, matrices, DffmMethod::Var,
                           method.selection, method.knn, method.limits)
          .surface;
    case ForecastMethod::DffmKnn:
      return dffm_forecast(training, matrices, DffmMethod::Knn,
                           method.selection, method.knn, method.limits)
          .surface;
    case ForecastMethod::Far: {
      const FarModel far = fit_far(training, matrices, method.far_truncation);
      return far_forecast(far, training.at(training.length() - 1),
                          sample_mean(training), matrices);
    }
    case ForecastMethod::Mean:
      return mean_forecast(training);
    case ForecastMethod::Naive:
      return naive_forecast(training);
  }
  throw DegenerateInput("unknown forecast method");
}

}  // namespace detail

/// Expanding-window backtest: origin j trains every method on the first
/// training_length + j surfaces and forecasts the next one. A method failing
/// at one origin leaves a NaN cell and the remaining cells intact.
inline ForecastReport rolling_evaluate(const SurfaceSeries& series,
                                       const EvaluationPlan& plan) {
  const int T = series.length();
  const int T0 = plan.training_length;
  const int H = plan.origin_count;
  if (plan.methods.empty()) throw DegenerateInput("no methods to evaluate");
  if (T0 < 2 || H < 1 || T0 + H > T) {
    throw DegenerateInput("plan needs 2 <= T0 and T0 + H <= T");
  }

  const auto nodes = series.nodes;
  const FemMatrices matrices = assemble_matrices(nodes);
  const int M = static_cast<int>(plan.methods.size());

  ForecastReport report;
  report.labels.reserve(M);
  for (const auto& method : plan.methods) report.labels.push_back(method.label);
  report.target_rows.resize(H);
  report.errors = Eigen::MatrixXd::Constant(H, M,
                                            std::numeric_limits<double>::quiet_NaN());
  if (plan.retain_forecasts) {
    report.forecasts.assign(M, std::vector<Surface>(H));
  }

  for (int j = 0; j < H; ++j) {
    const int target = T0 + j;
    report.target_rows[j] = target;
    SurfaceSeries training;
    training.nodes = nodes;
    training.coefficients = series.coefficients.topRows(target);
    if (!series.time_labels.empty()) {
      training.time_labels.assign(series.time_labels.begin(),
                                  series.time_labels.begin() + target);
    }
    const Surface actual = series.at(target);

    for (int m = 0; m < M; ++m) {
      try {
        Surface predicted = detail::forecast_with(plan.methods[m], training, matrices);
        report.errors(j, m) = plan.metric == ErrorMetric::DataNodes
                                  ? surface_mse(actual, predicted)
                                  : integrated_squared_error(actual, predicted,
                                                             matrices);
        if (plan.retain_forecasts) {
          report.forecasts[m][j] = std::move(predicted);
        }
      } catch (const Error&) {
        // flagged by the NaN already in place
      }
    }
  }

  report.summary.reserve(M);
  for (int m = 0; m < M; ++m) {
    report.summary.push_back(detail::summarize(report.labels[m], report.errors.col(m)));
  }
  return report;
}

struct ExceedanceEvent {
  int time_index = -1;
  std::string time_label;
  int node = -1;       // data node attaining the maximum
  double value = 0.0;  // that maximum
  std::vector<int> nodes_above;
};

/// One event per time step whose maximum over the data nodes exceeds the
/// threshold.
inline std::vector<ExceedanceEvent> exceedance_events(const SurfaceSeries& series,
                                                      double threshold) {
  if (!std::isfinite(threshold)) throw DegenerateInput("threshold must be finite");
  const int n = series.nodes ? series.nodes->data_node_count
                             : static_cast<int>(series.coefficients.cols());
  std::vector<ExceedanceEvent> events;
  for (int t = 0; t < series.length(); ++t) {
    ExceedanceEvent event;
    event.time_index = t;
    event.time_label = series.label(t);
    for (int i = 0; i < n; ++i) {
      const double v = series.coefficients(t, i);
      if (v > threshold) {
        event.nodes_above.push_back(i);
        if (event.node < 0 || v > event.value) {
          event.node = i;
          event.value = v;
        }
      }
    }
    if (event.node >= 0) events.push_back(std::move(event));
  }
  return events;
}

}  // namespace surfcast

#endif  // SURFCAST_EVAL_H
