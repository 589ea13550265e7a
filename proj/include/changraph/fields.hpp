#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

#include "changraph/graph.hpp"

namespace changraph {

/// 16-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre16 {
  static const std::array<double, 16>& nodes();
  static const std::array<double, 16>& weights();
};

/// Shared quadrature grid: per edge, cells+1 uniform x-nodes with composite
/// Simpson weights; per x-node, the cross-section carries the 16-point
/// Gauss-Legendre rule. All L2 pairings of channel and graph functions are
/// evaluated with these common weights, so the averaging/lifting algebra
/// holds at quadrature level, not merely up to discretization error.
class WorkGrid {
public:
  WorkGrid(std::shared_ptr<const StripComplex> sc, std::shared_ptr<const GraphSkeleton> g,
           int cells_per_edge);

  const StripComplex& complex() const { return *sc_; }
  const GraphSkeleton& graph() const { return *g_; }
  std::shared_ptr<const GraphSkeleton> graph_ptr() const { return g_; }
  int cells(int edge) const { return cells_[static_cast<std::size_t>(edge)]; }
  int nodes(int edge) const { return cells_[static_cast<std::size_t>(edge)] + 1; }
  int num_edges() const { return static_cast<int>(cells_.size()); }

  double x_node(int edge, int j) const;
  const Eigen::VectorXd& x_weights(int edge) const { return wx_[static_cast<std::size_t>(edge)]; }
  const Eigen::VectorXd& widths(int edge) const { return width_[static_cast<std::size_t>(edge)]; }
  const Eigen::VectorXd& y_lo(int edge) const { return ylo_[static_cast<std::size_t>(edge)]; }

  /// y-coordinate of Gauss node i on the section of edge `edge` at x-node j.
  double y_node(int edge, int j, int i) const;

private:
  std::shared_ptr<const StripComplex> sc_;
  std::shared_ptr<const GraphSkeleton> g_;
  std::vector<int> cells_;
  std::vector<Eigen::VectorXd> wx_;     // Simpson weights per edge
  std::vector<Eigen::VectorXd> width_;  // l(x_j)
  std::vector<Eigen::VectorXd> ylo_;    // h_lo(x_j)
};

/// Function on the graph: node values per edge. Endpoint entries hold the
/// one-sided limits, which may differ across the edges meeting at an
/// interior vertex (cross-section averages need not be continuous there).
struct GraphFunction {
  std::vector<Eigen::VectorXd> edge;

  GraphFunction() = default;
  explicit GraphFunction(const WorkGrid& grid);
};

/// Function on the channel sampled at the quadrature points: per edge a
/// (nodes x 16) matrix of values u(x_j, y_i).
struct QuadField {
  std::vector<Eigen::MatrixXd> edge;

  QuadField() = default;
  explicit QuadField(const WorkGrid& grid);
};

GraphFunction sample_graph(const WorkGrid& grid, const std::function<double(int, double)>& f);
QuadField sample_channel(const WorkGrid& grid, const std::function<double(double, double)>& u);

/// Cross-section average u -> u^ (graph function of the section means).
GraphFunction wedge(const WorkGrid& grid, const QuadField& u);
/// Lift f -> f_vee, constant on every cross-section component.
QuadField vee(const WorkGrid& grid, const GraphFunction& f);

double dot_bar(const WorkGrid& grid, const GraphFunction& f, const GraphFunction& g);
double dot_chan(const WorkGrid& grid, const QuadField& u, const QuadField& v);
double norm_bar(const WorkGrid& grid, const GraphFunction& f);
double norm_chan(const WorkGrid& grid, const QuadField& u);

QuadField operator-(const QuadField& a, const QuadField& b);
GraphFunction operator-(const GraphFunction& a, const GraphFunction& b);

/// Splits u = u1 + u2 with u1 = (u^)_vee and wedge(u2) = 0.
std::pair<QuadField, QuadField> split_K1_K2(const WorkGrid& grid, const QuadField& u);

/// Multiplication operator by a graph function, the sampled model of a
/// diagonal operator A on the graph space; lift() is its channel counterpart
/// A_vee u = (A u^)_vee.
struct DiagonalGraphOperator {
  GraphFunction symbol;

  GraphFunction apply(const WorkGrid& grid, const GraphFunction& f) const;
  QuadField lift_apply(const WorkGrid& grid, const QuadField& u) const;
};

/// Channel field on the rescaled domain G_eps, stored in reference
/// coordinates: values(x, eta) represent f(x, eps*eta). The H_eps inner
/// product is eps times the reference one.
struct ScaledField {
  double eps = 1.0;
  QuadField values;
};

/// J_{eps2,eps1} f(x,y) = sqrt(eps1/eps2) f(x, eps1/eps2 * y): in reference
/// coordinates a pure scaling, norm-preserving with J^{-1} = J_{eps1,eps2}.
ScaledField rescale_J(const ScaledField& u, double eps2);
double norm_scaled(const WorkGrid& grid, const ScaledField& u);
double dot_scaled(const WorkGrid& grid, const ScaledField& u, const ScaledField& v);

}  // namespace changraph
