#ifndef SURFCAST_FORECAST_H
#define SURFCAST_FORECAST_H

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "surfcast/errors.h"
#include "surfcast/fpca.h"

namespace surfcast {

// ---------------------------------------------------------------------------
// Linear factor dynamics
// ---------------------------------------------------------------------------

struct VarModel {
  int order = 0;
  std::vector<Eigen::MatrixXd> coefficients;  // A_1 .. A_p, each L x L
  Eigen::VectorXd intercept;
  Eigen::MatrixXd residual_covariance;
};

/// Least squares fit of x_t on (x_{t-1}, ..., x_{t-p}) plus an intercept.
/// The residual covariance uses the unbiased-style divisor T - p - Lp - 1,
/// floored at 1.
inline VarModel fit_var(const Eigen::MatrixXd& scores, int p) {
  const int T = static_cast<int>(scores.rows());
  const int L = static_cast<int>(scores.cols());
  if (p < 1) throw DegenerateInput("VAR order must be at least 1");
  if (L < 1) throw DegenerateInput("scores matrix has no columns");
  if (T <= L * p + 1) {
    throw InsufficientHistory("need more than L*p + 1 = " +
                              std::to_string(L * p + 1) + " rows, got " +
                              std::to_string(T));
  }

  const int rows = T - p;
  const int cols = L * p + 1;
  Eigen::MatrixXd x(rows, cols);
  Eigen::MatrixXd y(rows, L);
  for (int r = 0; r < rows; ++r) {
    const int t = p + r;
    x(r, 0) = 1.0;
    for (int lag = 1; lag <= p; ++lag) {
      x.block(r, 1 + (lag - 1) * L, 1, L) = scores.row(t - lag);
    }
    y.row(r) = scores.row(t);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < cols) {
    throw RankDeficientRegressors("lagged regressor matrix has rank " +
                                  std::to_string(qr.rank()) + " < " +
                                  std::to_string(cols));
  }
  const Eigen::MatrixXd beta = qr.solve(y);

  VarModel model;
  model.order = p;
  model.intercept = beta.row(0).transpose();
  model.coefficients.reserve(p);
  for (int lag = 1; lag <= p; ++lag) {
    model.coefficients.push_back(
        beta.block(1 + (lag - 1) * L, 0, L, L).transpose());
  }
  const Eigen::MatrixXd resid = y - x * beta;
  const double divisor = std::max(T - p - L * p - 1, 1);
  Eigen::MatrixXd cov = (resid.transpose() * resid) / divisor;
  model.residual_covariance = 0.5 * (cov + cov.transpose());
  return model;
}

/// One-step forecast A_1 x_T + ... + A_p x_{T-p+1} + intercept, where the
/// last row of `recent` is x_T.
inline Eigen::VectorXd var_forecast(const VarModel& model,
                                    const Eigen::MatrixXd& recent) {
  const int p = model.order;
  const int L = static_cast<int>(model.intercept.size());
  if (recent.rows() < p) {
    throw InsufficientHistory("forecast needs the last " + std::to_string(p) +
                              " score rows");
  }
  if (recent.cols() != L) throw DegenerateInput("score width disagrees with the model");
  Eigen::VectorXd out = model.intercept;
  const int last = static_cast<int>(recent.rows()) - 1;
  for (int lag = 1; lag <= p; ++lag) {
    out += model.coefficients[lag - 1] * recent.row(last - lag + 1).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nearest-neighbour factor dynamics
// ---------------------------------------------------------------------------

enum class KnnWeighting { Equal, InverseDistance };

struct KnnConfig {
  int neighbours = 1;
  int lag_depth = 1;
  int factor_count = 1;
  double distance_exponent = 2.0;  // Minkowski q; +infinity gives Chebyshev
  KnnWeighting weighting = KnnWeighting::Equal;
};

inline int knn_neighbour_cap(int T) {
  // floor(T^{4/5}), with a nudge so exact powers are not lost to rounding.
  return static_cast<int>(std::floor(std::pow(static_cast<double>(T), 0.8) + 1e-9));
}

namespace detail {

inline double minkowski_distance(const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, double q) {
  if (std::isinf(q)) return (a - b).cwiseAbs().maxCoeff();
  return std::pow((a - b).cwiseAbs().array().pow(q).sum(), 1.0 / q);
}

}  // namespace detail

/// Pattern forecast: stack the last p score rows into a feature vector, find
/// the K most similar historical windows, and average their successors.
/// Ties in distance resolve toward the earlier window; inverse-distance
/// weights are clipped at 1e-12 before normalization.
inline Eigen::VectorXd knn_forecast(const Eigen::MatrixXd& scores,
                                    const KnnConfig& config) {
  const int T = static_cast<int>(scores.rows());
  const int L = config.factor_count;
  const int p = config.lag_depth;
  if (L < 1 || L > scores.cols()) throw DegenerateInput("factor count out of range");
  if (p < 1) throw DegenerateInput("lag depth must be at least 1");
  if (config.neighbours < 1) throw DegenerateInput("neighbour count must be at least 1");
  if (!(config.distance_exponent >= 1.0)) {
    throw DegenerateInput("Minkowski exponent must be at least 1");
  }
  const int candidates = T - p;  // windows ending at t = p-1 .. T-2 (0-based)
  if (candidates < 1 || config.neighbours > candidates) {
    throw InsufficientHistory("need at least p + K = " +
                              std::to_string(p + config.neighbours) +
                              " rows, got " + std::to_string(T));
  }

  const auto window = [&](int t) {
    Eigen::VectorXd z(L * p);
    for (int lag = 0; lag < p; ++lag) {
      z.segment(lag * L, L) = scores.row(t - lag).head(L);
    }
    return z;
  };
  const Eigen::VectorXd query = window(T - 1);

  std::vector<std::pair<double, int>> distances;
  distances.reserve(candidates);
  for (int t = p - 1; t <= T - 2; ++t) {
    distances.emplace_back(
        detail::minkowski_distance(query, window(t), config.distance_exponent), t);
  }
  std::stable_sort(distances.begin(), distances.end(),
                   [](const auto& a, const auto& b) {
                     if (a.first != b.first) return a.first < b.first;
                     return a.second < b.second;
                   });

  const int k = config.neighbours;
  Eigen::VectorXd weights(k);
  if (config.weighting == KnnWeighting::Equal) {
    weights.setConstant(1.0 / k);
  } else {
    for (int i = 0; i < k; ++i) {
      weights[i] = 1.0 / std::max(distances[i].first, 1e-12);
    }
    weights /= weights.sum();
  }

  Eigen::VectorXd forecast = Eigen::VectorXd::Zero(L);
  for (int i = 0; i < k; ++i) {
    forecast += weights[i] * scores.row(distances[i].second + 1).head(L).transpose();
  }
  return forecast;
}

struct KnnSelection {
  KnnConfig config;
  double cv_error = std::numeric_limits<double>::infinity();
};

/// Rolling-origin cross-validation over (K, p, L) grids on the last
/// ceil(holdout * T) rows. The error for a candidate (K, p, L) is measured on
/// the full score vector, with components beyond L forecast as zero, so
/// candidates with different L compete on one scale. K candidates above
/// floor(T^{4/5}) are dropped. Ties resolve toward smaller (K, p, L).
inline KnnSelection select_knn_params(const Eigen::MatrixXd& scores,
                                      std::vector<int> k_grid,
                                      std::vector<int> p_grid,
                                      std::vector<int> l_grid,
                                      double holdout_fraction,
                                      double distance_exponent = 2.0,
                                      KnnWeighting weighting = KnnWeighting::Equal) {
  const int T = static_cast<int>(scores.rows());
  const int width = static_cast<int>(scores.cols());
  if (k_grid.empty() || p_grid.empty() || l_grid.empty()) {
    throw DegenerateInput("candidate grids must be non-empty");
  }
  if (!(holdout_fraction > 0.0) || holdout_fraction >= 1.0) {
    throw DegenerateInput("holdout fraction must lie in (0, 1)");
  }
  const int holdout = static_cast<int>(std::ceil(holdout_fraction * T));
  const int first_target = T - holdout;
  if (first_target < 2) throw InsufficientHistory("holdout leaves too little history");

  std::sort(k_grid.begin(), k_grid.end());
  std::sort(p_grid.begin(), p_grid.end());
  std::sort(l_grid.begin(), l_grid.end());
  const int cap = knn_neighbour_cap(T);

  KnnSelection best;
  bool found = false;
  for (const int k : k_grid) {
    if (k < 1 || k > cap) continue;
    for (const int p : p_grid) {
      if (p < 1 || first_target < p + k) continue;  // shortest history must fit
      for (const int l : l_grid) {
        if (l < 1 || l > width) continue;
        KnnConfig config{k, p, l, distance_exponent, weighting};
        double sum = 0.0;
        for (int target = first_target; target < T; ++target) {
          const Eigen::VectorXd prediction =
              knn_forecast(scores.topRows(target), config);
          Eigen::VectorXd full = Eigen::VectorXd::Zero(width);
          full.head(l) = prediction;
          sum += (scores.row(target).transpose() - full).squaredNorm();
        }
        const double error = sum / holdout;
        if (!found || error < best.cv_error) {
          best = KnnSelection{config, error};
          found = true;
        }
      }
    }
  }
  if (!found) {
    throw InsufficientHistory("no (K, p, L) candidate is feasible for this series");
  }
  return best;
}

// ---------------------------------------------------------------------------
// Order selection
// ---------------------------------------------------------------------------

enum class IcVariant { Anh, OsBic, OsHq };

inline std::string to_string(IcVariant v) {
  switch (v) {
    case IcVariant::Anh: return "ANH";
    case IcVariant::OsBic: return "OS-BIC";
    case IcVariant::OsHq: return "OS-HQ";
  }
  return "?";
}

struct IcCell {
  int factors = 0;
  int lags = 0;
  double score = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
};

struct IcResult {
  int factor_count = 0;
  int lag_order = 0;
  IcVariant variant = IcVariant::Anh;
  std::vector<IcCell> table;
};

/// Joint (L, p) selection. For each grid point a VAR(p) is fitted on the
/// first L score columns; with E = tr of the residual covariance and
/// tail(L) = sum of the operator eigenvalues beyond L, the scores are
///   ANH:    ((T + pL) / (T - pL)) * E + tail(L)
///   OS-BIC: ln(E + tail(L)) + p L^2 ln(T) / T
///   OS-HQ:  ln(E + tail(L)) + p L^2 2 ln(ln(T)) / T
/// Unfittable grid points are skipped; ties break toward smaller (L, p).
inline IcResult information_criterion(const Eigen::VectorXd& eigenvalues,
                                      const Eigen::MatrixXd& scores,
                                      std::vector<int> factor_grid,
                                      std::vector<int> lag_grid,
                                      IcVariant variant) {
  const int T = static_cast<int>(scores.rows());
  if (factor_grid.empty() || lag_grid.empty()) {
    throw DegenerateInput("selection grids must be non-empty");
  }
  std::sort(factor_grid.begin(), factor_grid.end());
  std::sort(lag_grid.begin(), lag_grid.end());

  IcResult result;
  result.variant = variant;
  bool found = false;
  double best = std::numeric_limits<double>::infinity();
  for (const int L : factor_grid) {
    for (const int p : lag_grid) {
      IcCell cell;
      cell.factors = L;
      cell.lags = p;
      result.table.push_back(cell);
      IcCell& slot = result.table.back();
      if (L < 1 || L > scores.cols() || L > eigenvalues.size() || p < 1) continue;
      // A grid point is only fittable if the residual covariance keeps at
      // least one degree of freedom; a saturated VAR has zero residuals and
      // would win every criterion vacuously.
      if (T - p - L * p - 1 < 1) continue;
      double resid_trace;
      try {
        resid_trace = fit_var(scores.leftCols(L), p).residual_covariance.trace();
      } catch (const Error&) {
        continue;
      }
      // Tiny negative eigenvalues are numerical noise in the spectrum tail.
      const double tail =
          std::max(0.0, eigenvalues.tail(eigenvalues.size() - L).sum());
      double score;
      switch (variant) {
        case IcVariant::Anh: {
          const double denom = static_cast<double>(T - p * L);
          if (denom <= 0.0) continue;
          score = ((T + p * L) / denom) * resid_trace + tail;
          break;
        }
        case IcVariant::OsBic:
          score = std::log(resid_trace + tail) +
                  p * L * L * std::log(static_cast<double>(T)) / T;
          break;
        case IcVariant::OsHq:
          score = std::log(resid_trace + tail) +
                  p * L * L * 2.0 * std::log(std::log(static_cast<double>(T))) / T;
          break;
        default:
          continue;
      }
      slot.score = score;
      slot.valid = true;
      // Grids are iterated in ascending (L, p); strict improvement keeps the
      // lexicographically smallest minimizer.
      if (!found || score < best) {
        best = score;
        result.factor_count = L;
        result.lag_order = p;
        found = true;
      }
    }
  }
  if (!found) {
    throw GridInfeasible("no (L, p) grid point could be fitted");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Surface-level forecasters
// ---------------------------------------------------------------------------

enum class DffmMethod { Var, Knn };

struct OrderSelection {
  enum class Mode { Ic, Fixed };
  Mode mode = Mode::Ic;
  IcVariant variant = IcVariant::OsBic;
  int factors = 1;  // used when mode == Fixed
  int lags = 1;

  static OrderSelection ic(IcVariant v) { return {Mode::Ic, v, 0, 0}; }
  static OrderSelection fixed(int factors, int lags) {
    return {Mode::Fixed, IcVariant::OsBic, factors, lags};
  }
};

struct KnnOptions {
  bool auto_neighbours = true;
  int neighbours = 1;  // used when auto_neighbours is false
  std::vector<int> k_grid = {1, 2, 3, 4, 6, 8, 12, 16, 24, 32};
  double distance_exponent = 2.0;
  KnnWeighting weighting = KnnWeighting::Equal;
  double holdout_fraction = 0.2;
};

struct DffmForecast {
  Surface surface;
  int factors = 0;
  int lags = 0;
  int neighbours = 0;  // 0 for the VAR path
};

struct DffmLimits {
  int max_factors = 10;
  int max_lag = 6;
};

/// Fits the factor model, picks (L, p) (and K for the KNN path), forecasts
/// the scores one step ahead and reassembles mean + sum of score * loading.
/// A series with no usable variation short-circuits to the mean surface.
inline DffmForecast dffm_forecast(const SurfaceSeries& series,
                                  const FemMatrices& matrices, DffmMethod method,
                                  const OrderSelection& selection,
                                  const KnnOptions& knn = {},
                                  const DffmLimits& limits = {}) {
  if (!same_mesh(series.nodes, matrices.nodes)) {
    throw MeshMismatch("series and matrices do not share one mesh");
  }
  const int T = series.length();
  const int K = static_cast<int>(series.coefficients.cols());
  if (T < 3) throw InsufficientHistory("forecasting needs at least 3 surfaces");

  const Surface mean = sample_mean(series);
  const Eigen::MatrixXd m = covariance_operator(series, mean);
  const Eigen::VectorXd spectrum = operator_eigenvalues(m, matrices);
  const double scale = std::max(spectrum.cwiseAbs().maxCoeff(), 0.0);
  if (scale <= 1e-14) {
    return DffmForecast{mean, 0, 0, 0};
  }

  // Only components carrying real variance can enter the model; anything at
  // the numerical noise floor would make the VAR regressors collinear.
  int usable = 0;
  while (usable < spectrum.size() && spectrum[usable] > 1e-12 * scale) ++usable;
  const int l_max = std::min({limits.max_factors, usable, std::min(T, K)});

  int L, p;
  if (selection.mode == OrderSelection::Mode::Fixed) {
    L = selection.factors;
    p = selection.lags;
    if (L < 1 || L > l_max) {
      throw TooManyComponents("fixed factor count " + std::to_string(L) +
                              " exceeds the usable components (" +
                              std::to_string(l_max) + ")");
    }
  } else {
    EigenPairs pairs = eigendecompose(m, matrices, l_max);
    const Eigen::MatrixXd probe_scores =
        factor_scores(series, mean, pairs.loadings, matrices);
    std::vector<int> factor_grid(l_max);
    std::iota(factor_grid.begin(), factor_grid.end(), 1);
    std::vector<int> lag_grid(std::max(1, limits.max_lag));
    std::iota(lag_grid.begin(), lag_grid.end(), 1);
    const IcResult ic = information_criterion(spectrum, probe_scores,
                                              factor_grid, lag_grid,
                                              selection.variant);
    L = ic.factor_count;
    p = ic.lag_order;
  }

  EigenPairs pairs = eigendecompose(m, matrices, L);
  const Eigen::MatrixXd scores =
      factor_scores(series, mean, pairs.loadings, matrices);

  Eigen::VectorXd next;
  int chosen_k = 0;
  if (method == DffmMethod::Var) {
    const VarModel var = fit_var(scores, p);
    next = var_forecast(var, scores.bottomRows(p));
  } else {
    KnnConfig config{knn.neighbours, p, L, knn.distance_exponent, knn.weighting};
    if (knn.auto_neighbours) {
      config = select_knn_params(scores, knn.k_grid, {p}, {L},
                                 knn.holdout_fraction, knn.distance_exponent,
                                 knn.weighting)
                   .config;
    } else if (config.neighbours > knn_neighbour_cap(T)) {
      throw GridInfeasible("neighbour count exceeds the T^(4/5) cap");
    }
    next = knn_forecast(scores, config);
    chosen_k = config.neighbours;
  }

  Eigen::VectorXd coeff = mean.coefficients;
  for (int l = 0; l < L; ++l) {
    coeff += next[l] * pairs.loadings[l].coefficients;
  }
  return DffmForecast{Surface{series.nodes, std::move(coeff)}, L, p, chosen_k};
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

struct FarModel {
  int truncation = 0;
  Eigen::VectorXd eigenvalues;
  std::vector<Surface> eigenfunctions;
  Eigen::MatrixXd operator_matrix;  // R: next-step scores = R * current scores
};

/// Functional AR(1) on the leading L eigenfunctions of the sample covariance.
/// R[k][l] = (1 / (T-1)) * (1 / xi_l) * sum_t <X_t, phi_l> <X_{t+1}, phi_k>
/// on the centered series. Eigenvalues near zero relative to xi_1 make the
/// inverse ill-posed and raise TruncationTooLarge.
inline FarModel fit_far(const SurfaceSeries& series, const FemMatrices& matrices,
                        int truncation) {
  const int T = series.length();
  if (T < 2) throw InsufficientHistory("FAR needs at least 2 surfaces");
  if (truncation < 1) throw DegenerateInput("truncation must be at least 1");

  const Surface mean = sample_mean(series);
  const Eigen::MatrixXd m = covariance_operator(series, mean);
  EigenPairs pairs = eigendecompose(m, matrices, truncation);
  if (pairs.eigenvalues[0] <= 0.0 ||
      pairs.eigenvalues[truncation - 1] <= 1e-10 * pairs.eigenvalues[0]) {
    throw TruncationTooLarge("eigenvalue " + std::to_string(truncation) +
                             " is too small to invert");
  }
  const Eigen::MatrixXd scores =
      factor_scores(series, mean, pairs.loadings, matrices);

  FarModel model;
  model.truncation = truncation;
  model.eigenvalues = pairs.eigenvalues;
  model.eigenfunctions = std::move(pairs.loadings);
  Eigen::MatrixXd cross = scores.bottomRows(T - 1).transpose() *
                          scores.topRows(T - 1) / static_cast<double>(T - 1);
  model.operator_matrix =
      cross * model.eigenvalues.cwiseInverse().asDiagonal();
  return model;
}

inline Surface far_forecast(const FarModel& model, const Surface& last,
                            const Surface& mean, const FemMatrices& matrices) {
  if (!same_mesh(last.nodes, mean.nodes) ||
      !same_mesh(last.nodes, matrices.nodes)) {
    throw MeshMismatch("surfaces and matrices do not share one mesh");
  }
  const int L = model.truncation;
  Eigen::VectorXd projections(L);
  const Eigen::VectorXd centered = last.coefficients - mean.coefficients;
  for (int l = 0; l < L; ++l) {
    if (!same_mesh(model.eigenfunctions[l].nodes, last.nodes)) {
      throw MeshMismatch("model eigenfunctions live on a different mesh");
    }
    projections[l] =
        centered.dot(matrices.mass * model.eigenfunctions[l].coefficients);
  }
  const Eigen::VectorXd advanced = model.operator_matrix * projections;
  Eigen::VectorXd coeff = mean.coefficients;
  for (int k = 0; k < L; ++k) {
    coeff += advanced[k] * model.eigenfunctions[k].coefficients;
  }
  return Surface{last.nodes, std::move(coeff)};
}

inline Surface mean_forecast(const SurfaceSeries& series) {
  return sample_mean(series);
}

inline Surface naive_forecast(const SurfaceSeries& series) {
  if (series.length() < 1) throw DegenerateInput("series is empty");
  return series.at(series.length() - 1);
}

}  // namespace surfcast

#endif  // SURFCAST_FORECAST_H
