#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <functional>
#include <memory>
#include <vector>

#include "changraph/graph.hpp"
#include "changraph/noise.hpp"

namespace changraph {

/// Staircase finite-volume grid on the channel: a Cartesian lattice whose
/// cell is active iff its center lies in G. Zero co-normal flux is encoded
/// by simply omitting boundary faces, which keeps the discrete Lebesgue
/// measure (total mass) exactly invariant.
class ChannelGrid {
public:
  struct Column {
    int edge = -1;
    int ix = 0;          // lattice column
    int local = 0;       // cell index along the edge, 0-based
    double x = 0.0;      // column center
    double width_hat = 0.0;  // staircase width: active cells * hy
    std::vector<int> cells;
  };

  static ChannelGrid build(std::shared_ptr<const StripComplex> sc,
                           std::shared_ptr<const GraphSkeleton> g, double hx, double hy);

  const StripComplex& complex() const { return *sc_; }
  const GraphSkeleton& graph() const { return *g_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double cell_area() const { return hx_ * hy_; }
  int num_cells() const { return static_cast<int>(centers_.size()); }
  const std::vector<Vec2>& centers() const { return centers_; }
  const std::vector<std::pair<int, int>>& faces_x() const { return faces_x_; }
  const std::vector<std::pair<int, int>>& faces_y() const { return faces_y_; }
  const std::vector<Column>& columns() const { return columns_; }
  int column_of_cell(int cell) const { return cell_column_[static_cast<std::size_t>(cell)]; }

  double active_area() const { return num_cells() * cell_area(); }
  /// |active area - nu(Gamma)| / nu(Gamma), the staircase geometry error.
  double area_error() const;

  Eigen::VectorXd sample(const std::function<double(double, double)>& u) const;
  double mass(const Eigen::VectorXd& u) const { return cell_area() * u.sum(); }
  double dot_area(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    return cell_area() * u.dot(v);
  }
  double norm_area(const Eigen::VectorXd& u) const { return std::sqrt(dot_area(u, u)); }

private:
  std::shared_ptr<const StripComplex> sc_;
  std::shared_ptr<const GraphSkeleton> g_;
  double hx_ = 0.0, hy_ = 0.0, x0_ = 0.0, y0_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<Vec2> centers_;
  std::vector<std::pair<int, int>> faces_x_, faces_y_;
  std::vector<Column> columns_;
  std::vector<int> cell_column_;
};

/// The operator (1/2) div(sigma_eps grad u) on the staircase grid:
/// x-faces carry weight 1/2, y-faces 1/(2 eps^2); L = K / cell_area.
class ChannelOperator {
public:
  static ChannelOperator assemble(std::shared_ptr<const ChannelGrid> grid, double eps);

  const ChannelGrid& grid() const { return *grid_; }
  std::shared_ptr<const ChannelGrid> grid_ptr() const { return grid_; }
  double eps() const { return eps_; }
  const Eigen::SparseMatrix<double>& flux() const { return flux_; }
  const Eigen::SparseMatrix<double>& generator() const { return gen_; }

private:
  std::shared_ptr<const ChannelGrid> grid_;
  double eps_ = 0.0;
  Eigen::SparseMatrix<double> flux_;
  Eigen::SparseMatrix<double> gen_;
};

struct ChannelTrajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
};

/// Crank-Nicolson for du/dt = L_eps u + h(t, x, y).
ChannelTrajectory solve_channel_pde(const ChannelOperator& op, const Eigen::VectorXd& u0,
                                    const std::function<double(double, double, double)>& forcing,
                                    double T, double dt, int store_stride = 1);

/// Semi-implicit Euler-Maruyama (I - dt L) u_{n+1} = u_n + dt b(u_n) + noise
/// increment, the noise lifted from the graph model and read from the shared
/// Brownian log. Each solve is verified to 1e-10 relative residual.
ChannelTrajectory solve_channel_spde(const ChannelOperator& op, const Eigen::VectorXd& u0,
                                     const std::function<double(double)>& b, const NoiseModel& noise,
                                     const BrownianLog& log, double T, double dt,
                                     int store_stride = 1);

/// Column averages of a cell field: the cross-section mean over the
/// staircase sections, one value per (edge, column).
Eigen::VectorXd wedge_field(const ChannelGrid& grid, const Eigen::VectorXd& u);

/// Lift of per-column values back to cells (constant on each column).
Eigen::VectorXd lift_columns(const ChannelGrid& grid, const Eigen::VectorXd& column_values);

/// Discrete Gamma-side inner product over columns, weighted by the
/// staircase column areas (width_hat * hx).
double dot_columns(const ChannelGrid& grid, const Eigen::VectorXd& f, const Eigen::VectorXd& g);

}  // namespace changraph
