#pragma once

#include <memory>
#include <tuple>
#include <vector>

#include "changraph/geometry.hpp"

namespace changraph {

/// One edge of the identification graph: the interval [a, b] carrying the
/// width function l(x) = h_hi(x) - h_lo(x) of its strip.
struct GraphEdge {
  int id = -1;
  double a = 0.0;
  double b = 0.0;
  HFunction width;  // exact derivatives via the closed function family
  int vertex_left = -1;
  int vertex_right = -1;

  double length() const { return b - a; }
};

struct GraphVertex {
  int id = -1;
  double x = 0.0;
  bool interior = false;
  std::vector<std::pair<int, End>> incident;  // (edge id, which end attaches here)
};

/// The identification graph Gamma of a strip complex: one edge per strip,
/// one vertex per merge group or exterior cap. Immutable after build.
class GraphSkeleton {
public:
  static GraphSkeleton build(const StripComplex& sc);

  const std::vector<GraphEdge>& edges() const { return edges_; }
  const std::vector<GraphVertex>& vertices() const { return vertices_; }
  const GraphEdge& edge(int id) const { return edges_.at(static_cast<std::size_t>(id)); }
  const GraphVertex& vertex(int id) const { return vertices_.at(static_cast<std::size_t>(id)); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }

  /// Shortest-path distance on Gamma: |x1 - x2| on a common edge, otherwise
  /// the minimum over vertex paths.
  double distance(const GraphPoint& p1, const GraphPoint& p2) const;

  /// nu-measure of an interval [x_lo, x_hi] of one edge: integral of the
  /// width (adaptive Simpson, relative tolerance 1e-10).
  double measure_nu(int edge, double x_lo, double x_hi) const;

  /// nu-measure of a union of edge intervals (edge, x_lo, x_hi).
  double measure_nu(const std::vector<std::tuple<int, double, double>>& region) const;

  /// nu(Gamma): the total width-weighted length, equal to the area of G.
  double measure_nu_total() const;

private:
  std::vector<GraphEdge> edges_;
  std::vector<GraphVertex> vertices_;
  std::vector<std::vector<double>> vertex_dist_;  // all-pairs, via Floyd-Warshall
};

/// Adaptive Simpson integral of an HFunction (relative tolerance ~1e-10,
/// floor 1e-14 absolute). Used for nu-measures and mass normalizations.
double integrate(const HFunction& f, double a, double b, double rel_tol = 1e-10);

}  // namespace changraph
