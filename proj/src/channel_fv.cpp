#include "changraph/channel_fv.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace changraph {

ChannelGrid ChannelGrid::build(std::shared_ptr<const StripComplex> sc,
                               std::shared_ptr<const GraphSkeleton> g, double hx, double hy) {
  if (!(hx > 0.0) || !(hy > 0.0)) throw std::invalid_argument("ChannelGrid: cell sizes must be positive");
  ChannelGrid grid;
  grid.sc_ = std::move(sc);
  grid.g_ = std::move(g);
  grid.hx_ = hx;
  grid.hy_ = hy;

  // Resolution gate: every strip at least 4 cells wide at its narrowest
  // interior point and 4 columns long.
  for (const auto& s : grid.sc_->strips()) {
    double wmin = std::numeric_limits<double>::infinity();
    for (int k = 1; k < 400; ++k)
      wmin = std::min(wmin, s.width(s.x_lo + (s.x_hi - s.x_lo) * k / 400.0));
    if (wmin < 4.0 * hy)
      throw std::invalid_argument("ChannelGrid: strip " + std::to_string(s.id) +
                                  " is under-resolved (narrowest interior width " +
                                  std::to_string(wmin) + " < 4 hy)");
    if (s.length() < 4.0 * hx)
      throw std::invalid_argument("ChannelGrid: strip " + std::to_string(s.id) +
                                  " spans fewer than 4 columns");
  }

  const auto [xlo, xhi] = grid.sc_->x_range();
  double ylo = std::numeric_limits<double>::infinity();
  double yhi = -std::numeric_limits<double>::infinity();
  for (const auto& s : grid.sc_->strips()) {
    for (int k = 0; k <= 400; ++k) {
      const double x = s.x_lo + (s.x_hi - s.x_lo) * k / 400.0;
      ylo = std::min(ylo, s.h_lo(x));
      yhi = std::max(yhi, s.h_hi(x));
    }
  }
  grid.x0_ = xlo;
  grid.y0_ = ylo;
  grid.nx_ = static_cast<int>(std::ceil((xhi - xlo) / hx - 1e-12));
  grid.ny_ = static_cast<int>(std::ceil((yhi - ylo) / hy - 1e-12));

  std::vector<std::vector<int>> index(static_cast<std::size_t>(grid.nx_),
                                      std::vector<int>(static_cast<std::size_t>(grid.ny_), -1));
  std::map<std::pair<int, int>, Column> columns;  // (ix, edge) -> column
  for (int ix = 0; ix < grid.nx_; ++ix) {
    for (int iy = 0; iy < grid.ny_; ++iy) {
      const Vec2 c{grid.x0_ + (ix + 0.5) * hx, grid.y0_ + (iy + 0.5) * hy};
      if (!grid.sc_->contains(c)) continue;
      const int id = static_cast<int>(grid.centers_.size());
      index[static_cast<std::size_t>(ix)][static_cast<std::size_t>(iy)] = id;
      grid.centers_.push_back(c);
      const GraphPoint gp = grid.sc_->project_to_graph(c);
      auto& col = columns[{ix, gp.edge}];
      col.edge = gp.edge;
      col.ix = ix;
      col.x = c.x();
      col.cells.push_back(id);
    }
  }
  if (grid.centers_.empty()) throw std::invalid_argument("ChannelGrid: no active cells");

  for (int ix = 0; ix < grid.nx_; ++ix)
    for (int iy = 0; iy < grid.ny_; ++iy) {
      const int a = index[static_cast<std::size_t>(ix)][static_cast<std::size_t>(iy)];
      if (a < 0) continue;
      if (ix + 1 < grid.nx_) {
        const int b = index[static_cast<std::size_t>(ix + 1)][static_cast<std::size_t>(iy)];
        if (b >= 0) grid.faces_x_.emplace_back(a, b);
      }
      if (iy + 1 < grid.ny_) {
        const int b = index[static_cast<std::size_t>(ix)][static_cast<std::size_t>(iy + 1)];
        if (b >= 0) grid.faces_y_.emplace_back(a, b);
      }
    }

  grid.cell_column_.assign(grid.centers_.size(), -1);
  for (auto& [key, col] : columns) {
    col.width_hat = static_cast<double>(col.cells.size()) * hy;
    col.local = static_cast<int>(std::llround((col.x - grid.g_->edge(col.edge).a) / hx - 0.5));
    const int cid = static_cast<int>(grid.columns_.size());
    for (int cell : col.cells) grid.cell_column_[static_cast<std::size_t>(cell)] = cid;
    grid.columns_.push_back(col);
  }
  return grid;
}

double ChannelGrid::area_error() const {
  const double exact = g_->measure_nu_total();
  return std::abs(active_area() - exact) / exact;
}

Eigen::VectorXd ChannelGrid::sample(const std::function<double(double, double)>& u) const {
  Eigen::VectorXd v(num_cells());
  for (int i = 0; i < num_cells(); ++i) v[i] = u(centers_[static_cast<std::size_t>(i)].x(),
                                                centers_[static_cast<std::size_t>(i)].y());
  return v;
}

ChannelOperator ChannelOperator::assemble(std::shared_ptr<const ChannelGrid> grid, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("assemble_Leps: eps must be positive");
  ChannelOperator op;
  op.grid_ = std::move(grid);
  op.eps_ = eps;
  const ChannelGrid& gr = *op.grid_;
  const int n = gr.num_cells();
  const double inv_eps2 = (1.0 / eps) * (1.0 / eps);
  const double wx = 0.5 * gr.hy() / gr.hx();
  const double wy = 0.5 * inv_eps2 * gr.hx() / gr.hy();

  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
  const auto add = [&](const std::pair<int, int>& f, double w) {
    trip.emplace_back(f.first, f.second, w);
    trip.emplace_back(f.second, f.first, w);
    diag[static_cast<std::size_t>(f.first)] -= w;
    diag[static_cast<std::size_t>(f.second)] -= w;
  };
  for (const auto& f : gr.faces_x()) add(f, wx);
  for (const auto& f : gr.faces_y()) add(f, wy);
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, diag[static_cast<std::size_t>(i)]);

  op.flux_.resize(n, n);
  op.flux_.setFromTriplets(trip.begin(), trip.end());
  op.flux_.makeCompressed();
  op.gen_ = op.flux_ * (1.0 / gr.cell_area());
  return op;
}

ChannelTrajectory solve_channel_pde(const ChannelOperator& op, const Eigen::VectorXd& u0,
                                    const std::function<double(double, double, double)>& forcing,
                                    double T, double dt, int store_stride) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_channel_pde: dt must be positive");
  const ChannelGrid& gr = op.grid();
  const int n = gr.num_cells();
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
  const Eigen::SparseMatrix<double> id =
      Eigen::SparseMatrix<double>(Eigen::VectorXd::Ones(n).asDiagonal());
  Eigen::SparseMatrix<double> lhs = id - 0.5 * dt * op.generator();
  Eigen::SparseMatrix<double> rhs = id + 0.5 * dt * op.generator();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(lhs);
  if (lu.info() != Eigen::Success) throw std::runtime_error("solve_channel_pde: factorization failed");

  const auto sample_forcing = [&](double t) {
    Eigen::VectorXd h(n);
    for (int i = 0; i < n; ++i)
      h[i] = forcing(t, gr.centers()[static_cast<std::size_t>(i)].x(),
                     gr.centers()[static_cast<std::size_t>(i)].y());
    return h;
  };

  ChannelTrajectory traj;
  Eigen::VectorXd u = u0;
  traj.times.push_back(0.0);
  traj.states.push_back(u);
  Eigen::VectorXd h_prev = forcing ? sample_forcing(0.0) : Eigen::VectorXd::Zero(n);
  for (int k = 0; k < steps; ++k) {
    const double t1 = (k + 1) * dt;
    Eigen::VectorXd h_next = forcing ? sample_forcing(t1) : Eigen::VectorXd::Zero(n);
    u = lu.solve(rhs * u + 0.5 * dt * (h_prev + h_next));
    h_prev = std::move(h_next);
    if ((k + 1) % std::max(1, store_stride) == 0 || k + 1 == steps) {
      traj.times.push_back(t1);
      traj.states.push_back(u);
    }
  }
  return traj;
}

ChannelTrajectory solve_channel_spde(const ChannelOperator& op, const Eigen::VectorXd& u0,
                                     const std::function<double(double)>& b, const NoiseModel& noise,
                                     const BrownianLog& log, double T, double dt, int store_stride) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_channel_spde: dt must be positive");
  if (std::abs(log.dt - dt) > 1e-12 * std::max(1.0, dt))
    throw std::invalid_argument("solve_channel_spde: increment log dt mismatch");
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
  if (log.num_steps() < steps)
    throw std::invalid_argument("solve_channel_spde: increment log too short");

  const ChannelGrid& gr = op.grid();
  const int n = gr.num_cells();
  const Eigen::SparseMatrix<double> id =
      Eigen::SparseMatrix<double>(Eigen::VectorXd::Ones(n).asDiagonal());
  Eigen::SparseMatrix<double> lhs = id - dt * op.generator();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(lhs);
  if (lu.info() != Eigen::Success) throw std::runtime_error("solve_channel_spde: factorization failed");

  // Mode values per column; the lifted noise is constant on cross-sections.
  std::vector<std::pair<int, double>> pts;
  pts.reserve(gr.columns().size());
  for (const auto& col : gr.columns()) pts.emplace_back(col.edge, col.x);

  ChannelTrajectory traj;
  Eigen::VectorXd u = u0;
  traj.times.push_back(0.0);
  traj.states.push_back(u);
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd rhs = u;
    if (b)
      for (int i = 0; i < n; ++i) rhs[i] += dt * b(u[i]);
    const Eigen::VectorXd prof = noise.profile(pts, log.steps[static_cast<std::size_t>(k)]);
    for (int i = 0; i < n; ++i) rhs[i] += prof[gr.column_of_cell(i)];
    u = lu.solve(rhs);
    const double res = (lhs * u - rhs).norm();
    if (res > 1e-10 * std::max(1.0, rhs.norm()))
      throw std::runtime_error("solve_channel_spde: linear solve residual above tolerance");
    if ((k + 1) % std::max(1, store_stride) == 0 || k + 1 == steps) {
      traj.times.push_back((k + 1) * dt);
      traj.states.push_back(u);
    }
  }
  return traj;
}

Eigen::VectorXd wedge_field(const ChannelGrid& grid, const Eigen::VectorXd& u) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(grid.columns().size()));
  for (std::size_t c = 0; c < grid.columns().size(); ++c) {
    const auto& col = grid.columns()[c];
    double acc = 0.0;
    for (int cell : col.cells) acc += u[cell];
    out[static_cast<Eigen::Index>(c)] = acc / static_cast<double>(col.cells.size());
  }
  return out;
}

Eigen::VectorXd lift_columns(const ChannelGrid& grid, const Eigen::VectorXd& column_values) {
  Eigen::VectorXd out(grid.num_cells());
  for (int i = 0; i < grid.num_cells(); ++i) out[i] = column_values[grid.column_of_cell(i)];
  return out;
}

double dot_columns(const ChannelGrid& grid, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  double acc = 0.0;
  for (std::size_t c = 0; c < grid.columns().size(); ++c)
    acc += grid.columns()[c].width_hat * grid.hx() * f[static_cast<Eigen::Index>(c)] *
           g[static_cast<Eigen::Index>(c)];
  return acc;
}

}  // namespace changraph
