#ifndef SURFCAST_SYNTH_H
#define SURFCAST_SYNTH_H

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "surfcast/dates.h"
#include "surfcast/errors.h"
#include "surfcast/fpca.h"
#include "surfcast/random.h"

namespace surfcast {

/// Rank-L factor model generator on a jittered station grid over [0, 10]^2:
/// stationary AR(1) scores with variances `variances` and coefficients `ar`
/// ride on smooth orthonormal loading fields, plus iid node noise. With
/// orthogonalize_scores the centered score columns are rotated so their
/// sample covariance is exactly diagonal, which makes the planted loadings
/// the exact eigenfunctions of the sample covariance.
struct SynthConfig {
  int grid_size = 5;
  int length = 300;
  int factors = 2;  // at most 3
  std::array<double, 3> ar = {0.65, 0.60, 0.50};
  std::array<double, 3> variances = {9.0, 4.0, 1.0};
  double noise_sd = 1.0;
  double mean_level = 40.0;
  bool orthogonalize_scores = false;
  std::uint64_t seed = 1;
  std::string start_date = "2011-01-01";
};

struct SynthData {
  std::vector<std::string> station_ids;
  std::vector<std::string> dates;
  std::shared_ptr<const NodeSet> nodes;
  FemMatrices matrices;
  SurfaceSeries series;        // latent factors + node noise
  Eigen::MatrixXd true_scores; // T x L, as planted
  std::vector<Surface> true_loadings;
  Surface true_mean;
};

/// grid_size x grid_size stations over [0, 10]^2, each jittered by up to a
/// quarter of the spacing so the triangulation has no forced cocircular ties.
inline std::vector<Point2> make_station_grid(int grid_size, Rng& rng) {
  if (grid_size < 2) throw DegenerateInput("station grid needs at least 2x2 points");
  const double spacing = 10.0 / (grid_size - 1);
  std::vector<Point2> stations;
  stations.reserve(grid_size * grid_size);
  for (int i = 0; i < grid_size; ++i) {
    for (int j = 0; j < grid_size; ++j) {
      stations.push_back({i * spacing + rng.uniform(-0.25, 0.25) * spacing,
                          j * spacing + rng.uniform(-0.25, 0.25) * spacing});
    }
  }
  return stations;
}

/// Smooth trigonometric fields at the mesh nodes, Gram-Schmidt
/// orthonormalized under the mass metric.
inline std::vector<Surface> orthonormal_fields(const FemMatrices& matrices,
                                               int count) {
  if (count < 1 || count > 3) throw DegenerateInput("between 1 and 3 fields supported");
  const NodeSet& set = *matrices.nodes;
  const int K = set.node_count();
  Eigen::MatrixXd raw(K, count);
  for (int k = 0; k < K; ++k) {
    const double x = set.nodes[k].x, y = set.nodes[k].y;
    raw(k, 0) = std::sin(M_PI * x / 10.0) * std::sin(M_PI * y / 10.0);
    if (count > 1) raw(k, 1) = std::sin(2.0 * M_PI * x / 10.0) * std::sin(M_PI * y / 10.0);
    if (count > 2) raw(k, 2) = std::sin(M_PI * x / 10.0) * std::sin(2.0 * M_PI * y / 10.0);
  }
  std::vector<Surface> fields;
  fields.reserve(count);
  for (int l = 0; l < count; ++l) {
    Eigen::VectorXd v = raw.col(l);
    for (const Surface& prev : fields) {
      v -= prev.coefficients.dot(matrices.mass * v) * prev.coefficients;
    }
    const double norm = std::sqrt(v.dot(matrices.mass * v));
    if (norm <= 1e-12) throw DegenerateInput("loading fields are linearly dependent");
    fields.push_back(Surface{matrices.nodes, v / norm});
  }
  return fields;
}

inline SynthData generate_synthetic(const SynthConfig& config) {
  if (config.factors < 1 || config.factors > 3) {
    throw DegenerateInput("generator supports 1 to 3 factors");
  }
  if (config.length < 2) throw DegenerateInput("series length must be at least 2");
  for (int l = 0; l < config.factors; ++l) {
    if (std::abs(config.ar[l]) >= 1.0 || config.variances[l] <= 0.0) {
      throw DegenerateInput("factor dynamics must be stationary with positive variance");
    }
  }

  Rng rng(config.seed);
  SynthData data;
  const std::vector<Point2> stations = make_station_grid(config.grid_size, rng);
  const TriangleMesh mesh = delaunay_triangulate(stations);
  data.nodes = std::make_shared<NodeSet>(build_nodal_points(mesh, stations));
  data.matrices = assemble_matrices(data.nodes);
  const int K = data.nodes->node_count();
  const int T = config.length;
  const int L = config.factors;

  data.station_ids.reserve(stations.size());
  for (std::size_t s = 0; s < stations.size(); ++s) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%03zu", s);
    data.station_ids.push_back(buf);
  }
  data.dates = date_range(config.start_date, T);

  data.true_loadings = orthonormal_fields(data.matrices, L);

  // Mean field: a level plus one gentle bump.
  Eigen::VectorXd mean_coeff(K);
  for (int k = 0; k < K; ++k) {
    const double x = data.nodes->nodes[k].x, y = data.nodes->nodes[k].y;
    mean_coeff[k] = config.mean_level +
                    1.5 * std::sin(M_PI * x / 10.0) * std::cos(M_PI * y / 20.0);
  }
  data.true_mean = Surface{data.nodes, std::move(mean_coeff)};

  // Stationary AR(1) scores, 100 burn-in steps.
  data.true_scores.resize(T, L);
  for (int l = 0; l < L; ++l) {
    const double rho = config.ar[l];
    const double innovation_sd =
        std::sqrt(config.variances[l] * (1.0 - rho * rho));
    double x = rng.normal(0.0, std::sqrt(config.variances[l]));
    for (int i = 0; i < 100; ++i) x = rho * x + rng.normal(0.0, innovation_sd);
    for (int t = 0; t < T; ++t) {
      x = rho * x + rng.normal(0.0, innovation_sd);
      data.true_scores(t, l) = x;
    }
  }

  if (config.orthogonalize_scores) {
    // Center, then map onto an orthonormal frame scaled so the sample
    // covariance (divisor T) is exactly diag(variances), descending.
    Eigen::MatrixXd centered =
        data.true_scores.rowwise() - data.true_scores.colwise().mean();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(centered);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(T, L);
    // Keep each rotated column aligned with the factor it replaces.
    for (int l = 0; l < L; ++l) {
      if (q.col(l).dot(centered.col(l)) < 0.0) q.col(l) = -q.col(l);
    }
    for (int l = 0; l < L; ++l) {
      data.true_scores.col(l) =
          q.col(l) * std::sqrt(config.variances[l] * T);
    }
  }

  data.series.nodes = data.nodes;
  data.series.time_labels = data.dates;
  data.series.coefficients.resize(T, K);
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd row = data.true_mean.coefficients;
    for (int l = 0; l < L; ++l) {
      row += data.true_scores(t, l) * data.true_loadings[l].coefficients;
    }
    data.series.coefficients.row(t) = row;
  }
  if (config.noise_sd > 0.0) {
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        data.series.coefficients(t, k) += rng.normal(0.0, config.noise_sd);
      }
    }
  }
  return data;
}

}  // namespace surfcast

#endif  // SURFCAST_SYNTH_H
