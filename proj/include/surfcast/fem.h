#ifndef SURFCAST_FEM_H
#define SURFCAST_FEM_H

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "surfcast/errors.h"
#include "surfcast/geometry.h"

namespace surfcast {

/// Discrete operators of the P2 space on one mesh: the L2 Gram matrix of the
/// nodal basis (mass), the Gram matrix of its gradients (stiffness), and the
/// 0/1 diagonal that marks the observation nodes.
struct FemMatrices {
  std::shared_ptr<const NodeSet> nodes;
  Eigen::SparseMatrix<double> mass;
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd data_indicator;
};

/// A function on the domain, represented by its K nodal coefficients. With
/// Lagrange elements the coefficient at node k is the function value there.
struct Surface {
  std::shared_ptr<const NodeSet> nodes;
  Eigen::VectorXd coefficients;
};

struct SmootherSolution {
  Surface surface;
  Eigen::VectorXd auxiliary;
  double lambda = 0.0;
};

inline bool same_mesh(const std::shared_ptr<const NodeSet>& a,
                      const std::shared_ptr<const NodeSet>& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->nodes.size() != b->nodes.size() ||
      a->data_node_count != b->data_node_count ||
      a->mesh.triangles.size() != b->mesh.triangles.size()) {
    return false;
  }
  for (std::size_t k = 0; k < a->nodes.size(); ++k) {
    if (a->nodes[k].x != b->nodes[k].x || a->nodes[k].y != b->nodes[k].y) {
      return false;
    }
  }
  return a->triangle_to_local_nodes == b->triangle_to_local_nodes;
}

namespace detail {

// Seven-point symmetric triangle rule, exact through degree 5. Products of
// two quadratic shape functions are quartic, so mass entries integrate
// exactly; gradient products are quadratic and are covered with room to
// spare.
struct QuadraturePoint {
  std::array<double, 3> bary;
  double weight;
};

inline const std::array<QuadraturePoint, 7>& triangle_quadrature() {
  static const std::array<QuadraturePoint, 7> rule = [] {
    const double s = std::sqrt(15.0);
    const double a1 = (6.0 - s) / 21.0, b1 = (9.0 + 2.0 * s) / 21.0;
    const double a2 = (6.0 + s) / 21.0, b2 = (9.0 - 2.0 * s) / 21.0;
    const double w1 = (155.0 - s) / 1200.0;
    const double w2 = (155.0 + s) / 1200.0;
    return std::array<QuadraturePoint, 7>{{
        {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 9.0 / 40.0},
        {{b1, a1, a1}, w1},
        {{a1, b1, a1}, w1},
        {{a1, a1, b1}, w1},
        {{b2, a2, a2}, w2},
        {{a2, b2, a2}, w2},
        {{a2, a2, b2}, w2},
    }};
  }();
  return rule;
}

}  // namespace detail

/// Assembles mass and stiffness triangle by triangle. Gradients on a physical
/// triangle come from the barycentric gradients via the inverse Jacobian of
/// the affine map (l1, l2) -> x.
inline FemMatrices assemble_matrices(std::shared_ptr<const NodeSet> nodes) {
  if (!nodes) throw DegenerateInput("node set is null");
  const NodeSet& set = *nodes;
  const int K = set.node_count();
  if (K == 0 || set.mesh.triangles.empty()) throw EmptyMesh("mesh has no triangles");

  std::vector<Eigen::Triplet<double>> mass_entries;
  std::vector<Eigen::Triplet<double>> stiff_entries;
  mass_entries.reserve(36 * set.mesh.triangles.size());
  stiff_entries.reserve(36 * set.mesh.triangles.size());

  for (std::size_t t = 0; t < set.mesh.triangles.size(); ++t) {
    const auto& tr = set.mesh.triangles[t];
    const Point2 p1 = set.mesh.vertices[tr[0]];
    const Point2 p2 = set.mesh.vertices[tr[1]];
    const Point2 p3 = set.mesh.vertices[tr[2]];
    const double det = signed_area2(p1, p2, p3);
    if (det <= 0.0) {
      throw DegenerateInput("triangle " + std::to_string(t) +
                            " is degenerate or clockwise");
    }
    const double area = 0.5 * det;
    // Rows of the inverse-transpose Jacobian: gradients of l1 and l2 in x.
    const double g1x = (p2.y - p3.y) / det, g1y = (p3.x - p2.x) / det;
    const double g2x = (p3.y - p1.y) / det, g2y = (p1.x - p3.x) / det;

    Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 6> s = Eigen::Matrix<double, 6, 6>::Zero();
    for (const auto& q : detail::triangle_quadrature()) {
      const ShapeFunctions shape = reference_shape(q.bary);
      std::array<double, 6> gx, gy;
      for (int a = 0; a < 6; ++a) {
        gx[a] = shape.gradient[a][0] * g1x + shape.gradient[a][1] * g2x;
        gy[a] = shape.gradient[a][0] * g1y + shape.gradient[a][1] * g2y;
      }
      const double w = q.weight * area;
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          m(a, b) += w * shape.value[a] * shape.value[b];
          s(a, b) += w * (gx[a] * gx[b] + gy[a] * gy[b]);
        }
      }
    }

    const auto& local = set.triangle_to_local_nodes[t];
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        mass_entries.emplace_back(local[a], local[b], m(a, b));
        stiff_entries.emplace_back(local[a], local[b], s(a, b));
      }
    }
  }

  FemMatrices out;
  out.nodes = std::move(nodes);
  out.mass.resize(K, K);
  out.mass.setFromTriplets(mass_entries.begin(), mass_entries.end());
  out.stiffness.resize(K, K);
  out.stiffness.setFromTriplets(stiff_entries.begin(), stiff_entries.end());
  out.data_indicator = Eigen::VectorXd::Zero(K);
  out.data_indicator.head(set.data_node_count).setOnes();
  return out;
}

/// Factorization of the 2K x 2K block system
///   [ -D   lB ] [ f ]   [ -x* ]
///   [ lB   lA ] [ z ] = [  0  ]
/// shared by the smoother and by GCV. The system is symmetric indefinite;
/// small systems use a dense full-pivot LU, larger ones sparse LU.
class SmoothingSystem {
 public:
  SmoothingSystem(const FemMatrices& matrices, double lambda)
      : K_(static_cast<int>(matrices.data_indicator.size())),
        N_(matrices.nodes ? matrices.nodes->data_node_count : 0) {
    if (lambda <= 0.0 || !std::isfinite(lambda)) {
      throw DegenerateInput("smoothing parameter must be positive and finite");
    }
    if (matrices.mass.rows() != K_ || matrices.stiffness.rows() != K_) {
      throw MeshMismatch("matrix dimensions disagree with the node count");
    }

    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(2 * matrices.mass.nonZeros() +
                    2 * matrices.stiffness.nonZeros() + K_);
    for (int k = 0; k < K_; ++k) {
      if (matrices.data_indicator[k] != 0.0) {
        entries.emplace_back(k, k, -matrices.data_indicator[k]);
      }
    }
    for (int c = 0; c < matrices.stiffness.outerSize(); ++c) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(matrices.stiffness, c);
           it; ++it) {
        entries.emplace_back(it.row(), K_ + it.col(), lambda * it.value());
        entries.emplace_back(K_ + it.row(), it.col(), lambda * it.value());
      }
    }
    for (int c = 0; c < matrices.mass.outerSize(); ++c) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(matrices.mass, c);
           it; ++it) {
        entries.emplace_back(K_ + it.row(), K_ + it.col(), lambda * it.value());
      }
    }
    Eigen::SparseMatrix<double> block(2 * K_, 2 * K_);
    block.setFromTriplets(entries.begin(), entries.end());

    if (K_ <= 200) {
      dense_.emplace(Eigen::MatrixXd(block));
      if (!dense_->isInvertible()) {
        throw SingularSystem("block smoothing system is singular");
      }
    } else {
      sparse_.emplace();
      sparse_->compute(block);
      if (sparse_->info() != Eigen::Success) {
        throw SingularSystem("sparse factorization of the block system failed");
      }
    }
  }

  int node_count() const { return K_; }
  int data_count() const { return N_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (rhs.size() != 2 * K_) throw DegenerateInput("right-hand side has wrong length");
    if (dense_) return dense_->solve(rhs);
    Eigen::VectorXd x = sparse_->solve(rhs);
    if (sparse_->info() != Eigen::Success) {
      throw SingularSystem("sparse solve of the block system failed");
    }
    return x;
  }

 private:
  int K_;
  int N_;
  std::optional<Eigen::FullPivLU<Eigen::MatrixXd>> dense_;
  std::optional<Eigen::SparseLU<Eigen::SparseMatrix<double>>> sparse_;
};

/// Penalized least-squares smoothing of one day of observations. The first
/// solution block holds the fitted nodal values, the second the auxiliary
/// multiplier of the mixed formulation.
inline SmootherSolution smooth(const Eigen::VectorXd& observations,
                               const FemMatrices& matrices, double lambda) {
  const int N = matrices.nodes->data_node_count;
  const int K = matrices.nodes->node_count();
  if (observations.size() != N) {
    throw DegenerateInput("expected " + std::to_string(N) + " observations, got " +
                          std::to_string(observations.size()));
  }
  if (!observations.allFinite()) throw DegenerateInput("observations contain NaN or Inf");

  const SmoothingSystem system(matrices, lambda);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * K);
  rhs.head(N) = -observations;
  const Eigen::VectorXd solution = system.solve(rhs);

  SmootherSolution out;
  out.surface = Surface{matrices.nodes, solution.head(K)};
  out.auxiliary = solution.tail(K);
  out.lambda = lambda;
  return out;
}

/// One factorization of the block system, reusable across days: the smoother
/// trace tr(S_N) needs N solves against unit data vectors, after which each
/// day's score costs a single solve.
class GcvEvaluator {
 public:
  GcvEvaluator(const FemMatrices& matrices, double lambda)
      : system_(matrices, lambda) {
    const int K = system_.node_count();
    const int N = system_.data_count();
    trace_ = 0.0;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * K);
    for (int i = 0; i < N; ++i) {
      rhs[i] = -1.0;
      trace_ += system_.solve(rhs)[i];
      rhs[i] = 0.0;
    }
  }

  double trace() const { return trace_; }

  double score(const Eigen::VectorXd& observations) const {
    const int K = system_.node_count();
    const int N = system_.data_count();
    if (observations.size() != N) {
      throw DegenerateInput("expected " + std::to_string(N) + " observations");
    }
    const double denom = 1.0 - trace_ / static_cast<double>(N);
    if (denom <= 1e-12) {
      throw DegenerateGcv("effective degrees of freedom exhaust the data");
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * K);
    rhs.head(N) = -observations;
    const Eigen::VectorXd fitted = system_.solve(rhs).head(N);
    const double rss = (observations - fitted).squaredNorm();
    return rss / (static_cast<double>(N) * denom * denom);
  }

 private:
  SmoothingSystem system_;
  double trace_ = 0.0;
};

inline double gcv_score(const Eigen::VectorXd& observations,
                        const FemMatrices& matrices, double lambda) {
  return GcvEvaluator(matrices, lambda).score(observations);
}

struct LambdaSelection {
  double lambda = 0.0;
  // Aligned with the input grid; NaN marks grid points skipped as degenerate.
  std::vector<double> scores;
};

inline LambdaSelection select_lambda(const Eigen::VectorXd& observations,
                                     const FemMatrices& matrices,
                                     const std::vector<double>& grid) {
  if (grid.empty()) throw DegenerateInput("lambda grid is empty");
  LambdaSelection out;
  out.scores.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  double best = std::numeric_limits<double>::infinity();
  double best_lambda = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      out.scores[i] = gcv_score(observations, matrices, grid[i]);
    } catch (const DegenerateGcv&) {
      continue;
    }
    if (out.scores[i] < best ||
        (out.scores[i] == best && grid[i] < best_lambda)) {
      best = out.scores[i];
      best_lambda = grid[i];
    }
  }
  if (!std::isfinite(best)) {
    throw AllPointsDegenerate("every lambda in the grid was degenerate");
  }
  out.lambda = best_lambda;
  return out;
}

inline std::vector<double> log_lambda_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) {
    throw DegenerateInput("lambda grid needs 0 < min < max and count >= 2");
  }
  std::vector<double> grid(count);
  const double step = (std::log(hi) - std::log(lo)) / (count - 1);
  for (int i = 0; i < count; ++i) grid[i] = std::exp(std::log(lo) + i * step);
  return grid;
}

inline double evaluate_surface(const Surface& surface, Point2 point) {
  if (!surface.nodes) throw DegenerateInput("surface has no mesh");
  const auto location = locate_point(*surface.nodes, point);
  if (!location) {
    throw PointOutsideDomain("point (" + std::to_string(point.x) + ", " +
                             std::to_string(point.y) + ") lies outside the mesh");
  }
  const ShapeFunctions shape = reference_shape(location->barycentric);
  const auto& local = surface.nodes->triangle_to_local_nodes[location->triangle];
  double value = 0.0;
  for (int a = 0; a < 6; ++a) value += shape.value[a] * surface.coefficients[local[a]];
  return value;
}

/// L2 inner product of two surfaces through the mass matrix of their shared
/// mesh.
inline double inner_product(const Surface& f, const Surface& g,
                            const FemMatrices& matrices) {
  if (!same_mesh(f.nodes, g.nodes) || !same_mesh(f.nodes, matrices.nodes)) {
    throw MeshMismatch("surfaces and matrices do not share one mesh");
  }
  return f.coefficients.dot(matrices.mass * g.coefficients);
}

}  // namespace surfcast

#endif  // SURFCAST_FEM_H
