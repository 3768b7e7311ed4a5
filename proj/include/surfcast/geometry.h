#ifndef SURFCAST_GEOMETRY_H
#define SURFCAST_GEOMETRY_H

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "surfcast/errors.h"

namespace surfcast {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

inline double squared_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Twice the signed area of (a, b, c); positive for counter-clockwise order.
inline double signed_area2(Point2 a, Point2 b, Point2 c) {
  return cross(b - a, c - a);
}

inline double triangle_area(Point2 a, Point2 b, Point2 c) {
  return 0.5 * std::abs(signed_area2(a, b, c));
}

/// Triangulated planar region. Triangle corners are vertex indices in
/// counter-clockwise order. boundary_edges holds the edges that belong to
/// exactly one triangle, oriented so the mesh lies to their left, sorted
/// lexicographically for reproducible exports.
struct TriangleMesh {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<int, 2>> boundary_edges;
};

/// Region of interest given as one outer ring plus optional hole rings.
/// Membership uses even-odd crossing counts over all rings together, so the
/// stored ring orientations do not affect queries.
struct DomainPolygon {
  std::vector<Point2> outer;
  std::vector<std::vector<Point2>> holes;

  bool contains(Point2 p) const;
};

enum class NodeKind : std::uint8_t { Vertex, EdgeMidpoint };

/// Nodal points of the quadratic (P2) finite element space on a mesh: every
/// vertex plus every edge midpoint. The first data_node_count nodes are the
/// station vertices, in station order; the remaining vertices follow in mesh
/// order and the midpoints come last, ordered by their sorted edge pairs.
struct NodeSet {
  TriangleMesh mesh;
  std::vector<Point2> nodes;
  int data_node_count = 0;
  std::vector<NodeKind> node_kind;
  // Per triangle: corner nodes 0..2 in corner order, then the midpoint nodes
  // of the edges opposite corners 0, 1 and 2.
  std::vector<std::array<int, 6>> triangle_to_local_nodes;

  int node_count() const { return static_cast<int>(nodes.size()); }
};

namespace detail {

// > 0 when d lies strictly inside the circumcircle of the counter-clockwise
// triangle (a, b, c); computed on coordinates translated by d.
inline double in_circle_determinant(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad2 = adx * adx + ady * ady;
  const double bd2 = bdx * bdx + bdy * bdy;
  const double cd2 = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd2 - bd2 * cdy) - ady * (bdx * cd2 - bd2 * cdx) +
         ad2 * (bdx * cdy - bdy * cdx);
}

// Determinant comparisons use an absolute slack scaled like the determinant
// itself, i.e. by the fourth power of the largest coordinate magnitude
// involved. Near-cocircular configurations then count as "outside", which
// leaves the diagonal chosen by insertion order in place.
inline double in_circle_tolerance(Point2 a, Point2 b, Point2 c, Point2 d) {
  double m = 1.0;
  for (const Point2 p : {a, b, c, d}) {
    m = std::max({m, std::abs(p.x), std::abs(p.y)});
  }
  return 1e-9 * m * m * m * m;
}

inline bool strictly_in_circumcircle(Point2 a, Point2 b, Point2 c, Point2 d) {
  return in_circle_determinant(a, b, c, d) > in_circle_tolerance(a, b, c, d);
}

// Even-odd crossing test for one closed ring.
inline bool ray_crosses_ring(const std::vector<Point2>& ring, Point2 p) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = ring[i];
    const Point2 b = ring[j];
    const bool straddles = (a.y > p.y) != (b.y > p.y);
    if (straddles &&
        p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

inline std::vector<std::array<int, 2>> boundary_edges_of(
    const std::vector<std::array<int, 3>>& triangles) {
  // Unordered edge -> (multiplicity, orientation in its first owner).
  std::map<std::pair<int, int>, std::pair<int, std::array<int, 2>>> edges;
  for (const auto& t : triangles) {
    for (int e = 0; e < 3; ++e) {
      const int u = t[e];
      const int v = t[(e + 1) % 3];
      const auto key = std::minmax(u, v);
      auto [it, fresh] = edges.try_emplace(key, 0, std::array<int, 2>{u, v});
      it->second.first += 1;
      (void)fresh;
    }
  }
  std::vector<std::array<int, 2>> boundary;
  for (const auto& [key, entry] : edges) {
    if (entry.first == 1) boundary.push_back(entry.second);
  }
  std::sort(boundary.begin(), boundary.end());
  return boundary;
}

}  // namespace detail

inline bool DomainPolygon::contains(Point2 p) const {
  if (outer.size() < 3) throw DegenerateInput("domain outer ring needs at least 3 vertices");
  bool inside = detail::ray_crosses_ring(outer, p);
  for (const auto& hole : holes) {
    if (hole.size() < 3) throw DegenerateInput("domain hole ring needs at least 3 vertices");
    if (detail::ray_crosses_ring(hole, p)) inside = !inside;
  }
  return inside;
}

/// Delaunay triangulation by incremental insertion (Bowyer-Watson) with a
/// far-away enclosing triangle that is stripped at the end. Points must be
/// pairwise distinct and not all collinear.
inline TriangleMesh delaunay_triangulate(const std::vector<Point2>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw DegenerateInput("triangulation needs at least 3 points");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(points[i].x) || !std::isfinite(points[i].y)) {
      throw DegenerateInput("point " + std::to_string(i) + " has non-finite coordinates");
    }
    for (int j = i + 1; j < n; ++j) {
      if (points[i].x == points[j].x && points[i].y == points[j].y) {
        throw DegenerateInput("points " + std::to_string(i) + " and " +
                              std::to_string(j) + " coincide");
      }
    }
  }

  double lo_x = points[0].x, hi_x = points[0].x;
  double lo_y = points[0].y, hi_y = points[0].y;
  for (const Point2 p : points) {
    lo_x = std::min(lo_x, p.x); hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y); hi_y = std::max(hi_y, p.y);
  }
  const double cx = 0.5 * (lo_x + hi_x);
  const double cy = 0.5 * (lo_y + hi_y);
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1.0});
  const double r = 1e3 * span;

  std::vector<Point2> verts(points);
  verts.push_back({cx - 2.0 * r, cy - r});
  verts.push_back({cx + 2.0 * r, cy - r});
  verts.push_back({cx, cy + 2.0 * r});

  std::vector<std::array<int, 3>> tris;
  tris.push_back({n, n + 1, n + 2});

  // The cocircular slack only matters between data points, where it keeps the
  // diagonal chosen by insertion order. Triangles touching the far-away
  // enclosing vertices get the exact sign test; their coordinates would blow
  // the quartic tolerance up past any realistic determinant.
  const auto circumcircle_covers = [&](const std::array<int, 3>& tr, Point2 p) {
    const double det = detail::in_circle_determinant(verts[tr[0]], verts[tr[1]],
                                                     verts[tr[2]], p);
    if (tr[0] < n && tr[1] < n && tr[2] < n) {
      return det > detail::in_circle_tolerance(verts[tr[0]], verts[tr[1]],
                                               verts[tr[2]], p);
    }
    return det > 0.0;
  };

  std::vector<char> bad;
  for (int ip = 0; ip < n; ++ip) {
    const Point2 p = verts[ip];

    // Every point lies inside the enclosing triangle, so some triangle
    // contains it; on a shared edge either owner serves as the seed.
    std::size_t seed = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < tris.size(); ++t) {
      const auto& tr = tris[t];
      const double m = std::min({signed_area2(p, verts[tr[1]], verts[tr[2]]),
                                 signed_area2(verts[tr[0]], p, verts[tr[2]]),
                                 signed_area2(verts[tr[0]], verts[tr[1]], p)});
      if (m > best) {
        best = m;
        seed = t;
      }
    }

    std::map<std::pair<int, int>, std::vector<std::size_t>> owners;
    for (std::size_t t = 0; t < tris.size(); ++t) {
      for (int e = 0; e < 3; ++e) {
        const auto key = std::minmax(tris[t][e], tris[t][(e + 1) % 3]);
        owners[key].push_back(t);
      }
    }

    // Grow the cavity from the containing triangle across shared edges. This
    // keeps it connected and star-shaped around p even when the in-circle
    // test is borderline for some remote triangle.
    bad.assign(tris.size(), 0);
    bad[seed] = 1;
    std::vector<std::size_t> stack = {seed};
    while (!stack.empty()) {
      const std::size_t t = stack.back();
      stack.pop_back();
      for (int e = 0; e < 3; ++e) {
        const auto key = std::minmax(tris[t][e], tris[t][(e + 1) % 3]);
        for (const std::size_t other : owners[key]) {
          if (!bad[other] && circumcircle_covers(tris[other], p)) {
            bad[other] = 1;
            stack.push_back(other);
          }
        }
      }
    }

    // The cavity boundary consists of the directed edges of removed triangles
    // whose reversal is not itself an edge of a removed triangle.
    std::map<std::pair<int, int>, int> directed;
    for (std::size_t t = 0; t < tris.size(); ++t) {
      if (!bad[t]) continue;
      const auto& tr = tris[t];
      for (int e = 0; e < 3; ++e) {
        directed[{tr[e], tr[(e + 1) % 3]}] += 1;
      }
    }
    std::vector<std::array<int, 3>> next;
    next.reserve(tris.size() + 2);
    for (std::size_t t = 0; t < tris.size(); ++t) {
      if (!bad[t]) next.push_back(tris[t]);
    }
    for (const auto& [edge, count] : directed) {
      (void)count;
      if (directed.count({edge.second, edge.first})) continue;
      std::array<int, 3> tri{edge.first, edge.second, ip};
      if (signed_area2(verts[tri[0]], verts[tri[1]], verts[tri[2]]) < 0.0) {
        std::swap(tri[1], tri[2]);
      }
      next.push_back(tri);
    }
    tris = std::move(next);
  }

  TriangleMesh mesh;
  mesh.vertices = points;
  for (const auto& t : tris) {
    if (t[0] >= n || t[1] >= n || t[2] >= n) continue;
    mesh.triangles.push_back(t);
  }
  if (mesh.triangles.empty()) {
    throw DegenerateInput("points are collinear, no triangulation exists");
  }

  std::vector<char> used(n, 0);
  for (const auto& t : mesh.triangles) {
    used[t[0]] = used[t[1]] = used[t[2]] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (!used[i]) {
      throw DegenerateInput("point " + std::to_string(i) +
                            " is not connected to the triangulation");
    }
  }
  mesh.boundary_edges = detail::boundary_edges_of(mesh.triangles);
  return mesh;
}

/// Drops every triangle whose centroid falls outside the domain, plus any
/// triangle listed in manual_exclusions (indices into mesh.triangles), then
/// compacts the vertex array. Relative triangle order is preserved.
inline TriangleMesh clip_to_domain(const TriangleMesh& mesh,
                                   const DomainPolygon& domain,
                                   const std::vector<int>& manual_exclusions = {}) {
  std::vector<char> excluded(mesh.triangles.size(), 0);
  for (const int t : manual_exclusions) {
    if (t < 0 || t >= static_cast<int>(mesh.triangles.size())) {
      throw ConfigError("triangle exclusion index " + std::to_string(t) +
                        " is out of range");
    }
    excluded[t] = 1;
  }

  TriangleMesh out;
  std::vector<int> vertex_map(mesh.vertices.size(), -1);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (excluded[t]) continue;
    const auto& tr = mesh.triangles[t];
    const Point2 centroid = (1.0 / 3.0) * (mesh.vertices[tr[0]] +
                                           mesh.vertices[tr[1]] +
                                           mesh.vertices[tr[2]]);
    if (!domain.contains(centroid)) continue;
    std::array<int, 3> mapped;
    for (int e = 0; e < 3; ++e) {
      int& slot = vertex_map[tr[e]];
      if (slot < 0) {
        slot = static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[tr[e]]);
      }
      mapped[e] = slot;
    }
    out.triangles.push_back(mapped);
  }
  if (out.triangles.empty()) {
    throw EmptyMesh("no triangle centroid lies inside the domain");
  }
  out.boundary_edges = detail::boundary_edges_of(out.triangles);
  return out;
}

/// Builds the P2 nodal points for a mesh and ties the observation stations to
/// their vertices. Every station must coincide with a mesh vertex to within
/// 1e-9 in both coordinates; those vertices become the leading data nodes.
inline NodeSet build_nodal_points(const TriangleMesh& mesh,
                                  const std::vector<Point2>& stations) {
  const int v_count = static_cast<int>(mesh.vertices.size());
  const int n_stations = static_cast<int>(stations.size());
  if (mesh.triangles.empty()) throw EmptyMesh("mesh has no triangles");
  if (n_stations == 0) throw DegenerateInput("station list is empty");

  constexpr double kMatchTol = 1e-9;
  std::vector<int> vertex_to_node(v_count, -1);
  std::vector<int> station_vertex(n_stations, -1);
  for (int s = 0; s < n_stations; ++s) {
    int match = -1;
    for (int v = 0; v < v_count; ++v) {
      if (std::abs(mesh.vertices[v].x - stations[s].x) <= kMatchTol &&
          std::abs(mesh.vertices[v].y - stations[s].y) <= kMatchTol) {
        if (match >= 0) {
          throw DegenerateInput("station " + std::to_string(s) +
                                " matches more than one mesh vertex");
        }
        match = v;
      }
    }
    if (match < 0) {
      throw StationNotOnMesh("station " + std::to_string(s) + " at (" +
                             std::to_string(stations[s].x) + ", " +
                             std::to_string(stations[s].y) +
                             ") does not coincide with any mesh vertex");
    }
    if (vertex_to_node[match] >= 0) {
      throw DegenerateInput("stations " + std::to_string(vertex_to_node[match]) +
                            " and " + std::to_string(s) +
                            " map to the same mesh vertex");
    }
    vertex_to_node[match] = s;
    station_vertex[s] = match;
  }

  NodeSet set;
  set.mesh = mesh;
  set.data_node_count = n_stations;
  set.nodes.resize(v_count);
  set.node_kind.assign(v_count, NodeKind::Vertex);
  int next = n_stations;
  for (int v = 0; v < v_count; ++v) {
    if (vertex_to_node[v] < 0) vertex_to_node[v] = next++;
    set.nodes[vertex_to_node[v]] = mesh.vertices[v];
  }

  std::map<std::pair<int, int>, int> edge_node;
  for (const auto& tr : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      edge_node.try_emplace(std::minmax(tr[e], tr[(e + 1) % 3]), -1);
    }
  }
  for (auto& [edge, node] : edge_node) {
    node = next++;
    set.nodes.push_back(0.5 * (mesh.vertices[edge.first] + mesh.vertices[edge.second]));
    set.node_kind.push_back(NodeKind::EdgeMidpoint);
  }

  set.triangle_to_local_nodes.reserve(mesh.triangles.size());
  for (const auto& tr : mesh.triangles) {
    const auto midpoint = [&](int a, int b) {
      return edge_node.at(std::minmax(a, b));
    };
    set.triangle_to_local_nodes.push_back(
        {vertex_to_node[tr[0]], vertex_to_node[tr[1]], vertex_to_node[tr[2]],
         midpoint(tr[1], tr[2]), midpoint(tr[2], tr[0]), midpoint(tr[0], tr[1])});
  }
  return set;
}

/// Values and barycentric gradients of the six quadratic shape functions on
/// the reference triangle. Locals 0..2 are the corner functions
/// l_i (2 l_i - 1); locals 3..5 are the midpoint bubbles 4 l_j l_k on the
/// edge opposite corner i. Gradients are taken with respect to (l1, l2),
/// treating l3 = 1 - l1 - l2 as dependent.
struct ShapeFunctions {
  std::array<double, 6> value;
  std::array<std::array<double, 2>, 6> gradient;
};

inline ShapeFunctions reference_shape(const std::array<double, 3>& bary) {
  const double l1 = bary[0], l2 = bary[1], l3 = bary[2];
  if (std::abs(l1 + l2 + l3 - 1.0) > 1e-9) {
    throw DegenerateInput("barycentric coordinates must sum to 1");
  }
  ShapeFunctions s;
  s.value = {l1 * (2.0 * l1 - 1.0), l2 * (2.0 * l2 - 1.0),
             l3 * (2.0 * l3 - 1.0), 4.0 * l2 * l3, 4.0 * l3 * l1,
             4.0 * l1 * l2};
  s.gradient = {{{4.0 * l1 - 1.0, 0.0},
                 {0.0, 4.0 * l2 - 1.0},
                 {1.0 - 4.0 * l3, 1.0 - 4.0 * l3},
                 {-4.0 * l2, 4.0 * (l3 - l2)},
                 {4.0 * (l3 - l1), -4.0 * l1},
                 {4.0 * l2, 4.0 * l1}}};
  return s;
}

inline double mesh_area(const TriangleMesh& mesh) {
  double area = 0.0;
  for (const auto& tr : mesh.triangles) {
    area += triangle_area(mesh.vertices[tr[0]], mesh.vertices[tr[1]],
                          mesh.vertices[tr[2]]);
  }
  return area;
}

struct PointLocation {
  int triangle = -1;
  std::array<double, 3> barycentric{};
};

/// Finds a triangle containing p, allowing a 1e-9 barycentric slack so points
/// on shared edges resolve to the first owner in triangle order.
inline std::optional<PointLocation> locate_point(const NodeSet& set, Point2 p) {
  constexpr double kSlack = 1e-9;
  for (std::size_t t = 0; t < set.mesh.triangles.size(); ++t) {
    const auto& tr = set.mesh.triangles[t];
    const Point2 a = set.mesh.vertices[tr[0]];
    const Point2 b = set.mesh.vertices[tr[1]];
    const Point2 c = set.mesh.vertices[tr[2]];
    const double area2 = signed_area2(a, b, c);
    if (area2 <= 0.0) continue;
    const double l1 = signed_area2(p, b, c) / area2;
    const double l2 = signed_area2(a, p, c) / area2;
    const double l3 = 1.0 - l1 - l2;
    if (l1 >= -kSlack && l2 >= -kSlack && l3 >= -kSlack) {
      return PointLocation{static_cast<int>(t), {l1, l2, l3}};
    }
  }
  return std::nullopt;
}

}  // namespace surfcast

#endif  // SURFCAST_GEOMETRY_H
