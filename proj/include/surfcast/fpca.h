#ifndef SURFCAST_FPCA_H
#define SURFCAST_FPCA_H

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "surfcast/errors.h"
#include "surfcast/fem.h"

namespace surfcast {

/// T surfaces on one mesh, stored as a T x K coefficient matrix. Time labels
/// are optional; when empty, consumers fall back to row indices.
struct SurfaceSeries {
  std::shared_ptr<const NodeSet> nodes;
  Eigen::MatrixXd coefficients;
  std::vector<std::string> time_labels;

  int length() const { return static_cast<int>(coefficients.rows()); }

  Surface at(int t) const {
    return Surface{nodes, coefficients.row(t).transpose()};
  }

  std::string label(int t) const {
    if (t >= 0 && t < static_cast<int>(time_labels.size())) return time_labels[t];
    return "t" + std::to_string(t);
  }
};

struct FactorModel {
  Surface mean;
  std::vector<Surface> loadings;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd scores;
  double total_variance = 0.0;
};

inline Surface sample_mean(const SurfaceSeries& series) {
  if (series.length() < 1) throw DegenerateInput("series is empty");
  return Surface{series.nodes,
                 series.coefficients.colwise().mean().transpose()};
}

/// Coefficient-space covariance M with divisor T; the covariance kernel is
/// c(s, r) = phi(s)' M phi(r).
inline Eigen::MatrixXd covariance_operator(const SurfaceSeries& series,
                                           const Surface& mean) {
  const int T = series.length();
  if (T < 2) throw DegenerateInput("covariance needs at least 2 surfaces");
  if (!same_mesh(series.nodes, mean.nodes)) {
    throw MeshMismatch("series and mean live on different meshes");
  }
  const Eigen::MatrixXd centered =
      series.coefficients.rowwise() - mean.coefficients.transpose();
  Eigen::MatrixXd m = (centered.transpose() * centered) / static_cast<double>(T);
  return 0.5 * (m + m.transpose());
}

namespace detail {

struct MassRoots {
  Eigen::MatrixXd half;      // A^{1/2}
  Eigen::MatrixXd inv_half;  // A^{-1/2}
};

inline MassRoots mass_roots(const FemMatrices& matrices) {
  const Eigen::MatrixXd dense(matrices.mass);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
  if (eig.info() != Eigen::Success) {
    throw NotPositiveDefinite("mass matrix eigendecomposition failed");
  }
  const Eigen::VectorXd& d = eig.eigenvalues();
  if (d.minCoeff() <= 0.0) {
    throw NotPositiveDefinite("mass matrix is not positive definite");
  }
  MassRoots roots;
  const Eigen::MatrixXd& v = eig.eigenvectors();
  roots.half = v * d.cwiseSqrt().asDiagonal() * v.transpose();
  roots.inv_half = v * d.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  return roots;
}

// Orient v so that <v, 1> under the mass metric is nonnegative; for loadings
// orthogonal to constants, make the largest-magnitude coefficient positive
// (first such index on ties).
inline void fix_sign(Eigen::VectorXd& v, const FemMatrices& matrices,
                     double area) {
  const double against_one = (matrices.mass * v).sum();
  const double tol = 1e-12 * std::sqrt(std::max(area, 1e-300));
  if (std::abs(against_one) > tol) {
    if (against_one < 0.0) v = -v;
    return;
  }
  int arg = 0;
  double best = -1.0;
  for (int k = 0; k < v.size(); ++k) {
    if (std::abs(v[k]) > best) {
      best = std::abs(v[k]);
      arg = k;
    }
  }
  if (v[arg] < 0.0) v = -v;
}

}  // namespace detail

struct EigenPairs {
  Eigen::VectorXd eigenvalues;
  std::vector<Surface> loadings;
};

/// Top eigenpairs of the covariance operator v -> M A v, normalized to
/// v' A v = 1, computed through the symmetric problem
/// (A^{1/2} M A^{1/2}) u = lambda u with v = A^{-1/2} u.
inline EigenPairs eigendecompose(const Eigen::MatrixXd& m,
                                 const FemMatrices& matrices, int count) {
  const int K = static_cast<int>(m.rows());
  if (m.cols() != K || matrices.mass.rows() != K) {
    throw MeshMismatch("operator and mass matrix sizes disagree");
  }
  if (count < 1 || count > K) {
    throw TooManyComponents("component count must lie in [1, " +
                            std::to_string(K) + "]");
  }
  const detail::MassRoots roots = detail::mass_roots(matrices);
  Eigen::MatrixXd symmetric = roots.half * m * roots.half;
  symmetric = 0.5 * (symmetric + symmetric.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric);
  if (eig.info() != Eigen::Success) {
    throw SingularSystem("eigendecomposition of the covariance operator failed");
  }

  const double area = mesh_area(matrices.nodes->mesh);
  EigenPairs out;
  out.eigenvalues.resize(count);
  out.loadings.reserve(count);
  for (int l = 0; l < count; ++l) {
    const int src = K - 1 - l;  // solver sorts ascending
    out.eigenvalues[l] = eig.eigenvalues()[src];
    Eigen::VectorXd v = roots.inv_half * eig.eigenvectors().col(src);
    detail::fix_sign(v, matrices, area);
    out.loadings.push_back(Surface{matrices.nodes, std::move(v)});
  }
  return out;
}

/// All eigenvalues of the covariance operator, descending. The tail sums
/// needed by order-selection criteria come from this full spectrum.
inline Eigen::VectorXd operator_eigenvalues(const Eigen::MatrixXd& m,
                                            const FemMatrices& matrices) {
  const detail::MassRoots roots = detail::mass_roots(matrices);
  Eigen::MatrixXd symmetric = roots.half * m * roots.half;
  symmetric = 0.5 * (symmetric + symmetric.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric);
  if (eig.info() != Eigen::Success) {
    throw SingularSystem("eigendecomposition of the covariance operator failed");
  }
  return eig.eigenvalues().reverse();
}

inline Eigen::MatrixXd factor_scores(const SurfaceSeries& series,
                                     const Surface& mean,
                                     const std::vector<Surface>& loadings,
                                     const FemMatrices& matrices) {
  if (!same_mesh(series.nodes, mean.nodes) ||
      !same_mesh(series.nodes, matrices.nodes)) {
    throw MeshMismatch("series, mean and matrices do not share one mesh");
  }
  const int L = static_cast<int>(loadings.size());
  Eigen::MatrixXd basis(series.coefficients.cols(), L);
  for (int l = 0; l < L; ++l) {
    if (!same_mesh(loadings[l].nodes, series.nodes)) {
      throw MeshMismatch("loading " + std::to_string(l) +
                         " lives on a different mesh");
    }
    basis.col(l) = loadings[l].coefficients;
  }
  const Eigen::MatrixXd centered =
      series.coefficients.rowwise() - mean.coefficients.transpose();
  return centered * (matrices.mass * basis);
}

/// tr(M A): the total variance of the series under the FEM inner product,
/// i.e. the sum of all operator eigenvalues.
inline double total_operator_variance(const Eigen::MatrixXd& m,
                                      const FemMatrices& matrices) {
  double trace = 0.0;
  for (int c = 0; c < matrices.mass.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrices.mass, c); it;
         ++it) {
      trace += m(it.col(), it.row()) * it.value();
    }
  }
  return trace;
}

inline FactorModel fit_factor_model(const SurfaceSeries& series,
                                    const FemMatrices& matrices, int count) {
  const int T = series.length();
  const int K = static_cast<int>(series.coefficients.cols());
  if (count < 1 || count > std::min(T, K)) {
    throw TooManyComponents("factor count must lie in [1, min(T, K)]");
  }
  FactorModel model;
  model.mean = sample_mean(series);
  const Eigen::MatrixXd m = covariance_operator(series, model.mean);
  EigenPairs pairs = eigendecompose(m, matrices, count);
  model.eigenvalues = std::move(pairs.eigenvalues);
  model.loadings = std::move(pairs.loadings);
  model.scores = factor_scores(series, model.mean, model.loadings, matrices);
  model.total_variance = total_operator_variance(m, matrices);
  return model;
}

/// Share of total variance carried by the leading l components.
inline double explained_variance(const FactorModel& model, int l) {
  if (l < 1 || l > model.eigenvalues.size()) {
    throw TooManyComponents("component index out of range");
  }
  if (model.total_variance <= 0.0) return 1.0;
  return model.eigenvalues.head(l).sum() / model.total_variance;
}

}  // namespace surfcast

#endif  // SURFCAST_FPCA_H
