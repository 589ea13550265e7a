#include "changraph/graph_spde.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "changraph/parallel.hpp"

namespace changraph {

GraphTrajectory solve_graph_spde(const DiscreteGraphOperator& op, const NoiseModel& noise,
                                 const Eigen::VectorXd& u0, const std::function<double(double)>& b,
                                 const BrownianLog& log, double T, double dt, int store_stride) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_graph_spde: dt must be positive");
  if (std::abs(log.dt - dt) > 1e-12 * std::max(1.0, dt))
    throw std::invalid_argument("solve_graph_spde: increment log dt mismatch");
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
  if (log.num_steps() < steps) throw std::invalid_argument("solve_graph_spde: increment log too short");

  const int n = op.size();
  const Eigen::SparseMatrix<double> id =
      Eigen::SparseMatrix<double>(Eigen::VectorXd::Ones(n).asDiagonal());
  Eigen::SparseMatrix<double> lhs = id - dt * op.generator();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(lhs);
  if (lu.info() != Eigen::Success) throw std::runtime_error("solve_graph_spde: factorization failed");

  GraphTrajectory traj;
  Eigen::VectorXd u = u0;
  traj.times.push_back(0.0);
  traj.states.push_back(u);
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd rhs = u;
    if (b)
      for (int i = 0; i < n; ++i) rhs[i] += dt * b(u[i]);
    rhs += noise.node_shapes() * noise.lambda().cwiseProduct(log.steps[static_cast<std::size_t>(k)]);
    u = lu.solve(rhs);
    if ((k + 1) % std::max(1, store_stride) == 0 || k + 1 == steps) {
      traj.times.push_back((k + 1) * dt);
      traj.states.push_back(u);
    }
  }
  return traj;
}

Eigen::MatrixXd stochastic_convolution_cov(const DiscreteGraphOperator& op, const Spectrum& spec,
                                           const NoiseModel& noise, double t) {
  const int n = op.size();
  if (t < 0.0) throw std::invalid_argument("stochastic_convolution_cov: negative time");
  if (t == 0.0) return Eigen::MatrixXd::Zero(n, n);
  // a_j = V^T W f_j: spectral coefficients of the modes.
  const Eigen::MatrixXd a = spec.vectors.transpose() * op.mass().asDiagonal() * noise.node_shapes();
  const Eigen::MatrixXd s = a * noise.lambda().array().square().matrix().asDiagonal() * a.transpose();
  Eigen::MatrixXd g(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      const double rate = spec.mu[p] + spec.mu[q];
      g(p, q) = std::abs(rate) < 1e-14 ? t : (std::exp(rate * t) - 1.0) / rate;
    }
  return spec.vectors * s.cwiseProduct(g) * spec.vectors.transpose();
}

bool CompareResult::decreasing() const {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].value < rows[i - 1].value)) return false;
  return true;
}

namespace {

// ubar on the node grid -> values at the channel columns of each edge.
Eigen::VectorXd graph_state_at_columns(const DiscreteGraphOperator& op, const ChannelGrid& grid,
                                       const Eigen::VectorXd& u) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(grid.columns().size()));
  for (std::size_t c = 0; c < grid.columns().size(); ++c) {
    const auto& col = grid.columns()[c];
    const int j = col.local;
    if (j < 0 || j >= op.cells(col.edge))
      throw std::runtime_error("graph/channel column alignment failed");
    out[static_cast<Eigen::Index>(c)] =
        0.5 * (u[op.unknown_of_node(col.edge, j)] + u[op.unknown_of_node(col.edge, j + 1)]);
  }
  return out;
}

double grid_hx(const DiscreteGraphOperator& op, const CompareConfig& cfg) {
  if (cfg.hx > 0.0) return cfg.hx;
  // Align channel columns with the graph cells of edge 0 (uniform graphs).
  return op.dx(0);
}

// Initial graph state: exact wedge sampled on the nodes when provided,
// otherwise the staircase column wedge averaged onto the nodes.
Eigen::VectorXd initial_graph_state(const DiscreteGraphOperator& op, const ChannelGrid& grid,
                                    const Eigen::VectorXd& u0_cells, const CompareConfig& cfg) {
  if (cfg.u0_wedge) {
    GraphFunction gf;
    gf.edge.resize(static_cast<std::size_t>(op.graph().num_edges()));
    for (int e = 0; e < op.graph().num_edges(); ++e) {
      Eigen::VectorXd v(op.cells(e) + 1);
      for (int j = 0; j <= op.cells(e); ++j) v[j] = cfg.u0_wedge(e, op.x_of_node(e, j));
      gf.edge[static_cast<std::size_t>(e)] = std::move(v);
    }
    return op.project(gf);
  }
  const Eigen::VectorXd cols = wedge_field(grid, u0_cells);
  Eigen::VectorXd num = Eigen::VectorXd::Zero(op.size());
  Eigen::VectorXd den = Eigen::VectorXd::Zero(op.size());
  for (std::size_t c = 0; c < grid.columns().size(); ++c) {
    const auto& col = grid.columns()[c];
    num[op.unknown_of_node(col.edge, col.local)] += cols[static_cast<Eigen::Index>(c)];
    num[op.unknown_of_node(col.edge, col.local + 1)] += cols[static_cast<Eigen::Index>(c)];
    den[op.unknown_of_node(col.edge, col.local)] += 1.0;
    den[op.unknown_of_node(col.edge, col.local + 1)] += 1.0;
  }
  for (int i = 0; i < op.size(); ++i) num[i] = den[i] > 0.0 ? num[i] / den[i] : 0.0;
  return num;
}

}  // namespace

std::vector<CompareRow> compare_semigroups(std::shared_ptr<const StripComplex> sc,
                                           std::shared_ptr<const GraphSkeleton> g,
                                           const DiscreteGraphOperator& op, const CompareConfig& cfg) {
  const auto grid = std::make_shared<const ChannelGrid>(
      ChannelGrid::build(sc, g, grid_hx(op, cfg), cfg.hy));
  const Eigen::VectorXd u0 = grid->sample(cfg.u0);
  const Eigen::VectorXd ubar0 = initial_graph_state(op, *grid, u0, cfg);
  const GraphTrajectory bar = solve_graph_pde(op, ubar0, nullptr, cfg.T, cfg.dt, cfg.snapshot_stride);

  std::vector<CompareRow> rows;
  for (const double eps : cfg.eps_ladder) {
    const auto ch_op = ChannelOperator::assemble(grid, eps);
    const ChannelTrajectory ch =
        solve_channel_pde(ch_op, u0, nullptr, cfg.T, cfg.dt, cfg.snapshot_stride);
    double sup = 0.0;
    for (std::size_t k = 0; k < ch.times.size() && k < bar.times.size(); ++k) {
      if (ch.times[k] < cfg.tau_fraction * cfg.T - 1e-12) continue;
      const Eigen::VectorXd w = wedge_field(*grid, ch.states[k]);
      const Eigen::VectorXd gb = graph_state_at_columns(op, *grid, bar.states[k]);
      const Eigen::VectorXd diff = w - gb;
      sup = std::max(sup, std::sqrt(dot_columns(*grid, diff, diff)));
    }
    rows.push_back({eps, sup, 0.0, 1});
  }
  return rows;
}

CompareResult compare_channel_graph(std::shared_ptr<const StripComplex> sc,
                                    std::shared_ptr<const GraphSkeleton> g,
                                    const DiscreteGraphOperator& op, const NoiseModel& noise,
                                    const CompareConfig& cfg) {
  const auto grid = std::make_shared<const ChannelGrid>(
      ChannelGrid::build(sc, g, grid_hx(op, cfg), cfg.hy));
  const Eigen::VectorXd u0 = grid->sample(cfg.u0);
  const Eigen::VectorXd ubar0 = initial_graph_state(op, *grid, u0, cfg);

  const int steps = std::max(1, static_cast<int>(std::llround(cfg.T / cfg.dt)));
  std::vector<ChannelOperator> ch_ops;
  for (const double eps : cfg.eps_ladder) ch_ops.push_back(ChannelOperator::assemble(grid, eps));

  const std::size_t ne = cfg.eps_ladder.size();
  std::vector<std::vector<double>> sup_err(
      ne, std::vector<double>(static_cast<std::size_t>(cfg.realizations), 0.0));

  parallel_for(cfg.realizations, [&](int r) {
    const BrownianLog log =
        BrownianLog::generate(noise.modes(), steps, cfg.dt, cfg.seed,
                              derive_stream(0x43504c44u /*"CPLD"*/, static_cast<std::uint64_t>(r)));
    const GraphTrajectory bar =
        solve_graph_spde(op, noise, ubar0, cfg.b, log, cfg.T, cfg.dt, cfg.snapshot_stride);
    for (std::size_t e = 0; e < ne; ++e) {
      const ChannelTrajectory ch =
          solve_channel_spde(ch_ops[e], u0, cfg.b, noise, log, cfg.T, cfg.dt, cfg.snapshot_stride);
      double sup = 0.0;
      for (std::size_t k = 0; k < ch.times.size() && k < bar.times.size(); ++k) {
        if (ch.times[k] < cfg.tau_fraction * cfg.T - 1e-12) continue;
        const Eigen::VectorXd w = wedge_field(*grid, ch.states[k]);
        const Eigen::VectorXd gb = graph_state_at_columns(op, *grid, bar.states[k]);
        const Eigen::VectorXd diff = w - gb;
        sup = std::max(sup, dot_columns(*grid, diff, diff));
      }
      sup_err[e][static_cast<std::size_t>(r)] = sup;
    }
  });

  CompareResult result;
  for (std::size_t e = 0; e < ne; ++e) {
    double mean = 0.0, m2 = 0.0;
    int n = 0;
    for (const double v : sup_err[e]) {
      ++n;
      const double d = v - mean;
      mean += d / n;
      m2 += d * (v - mean);
    }
    CompareRow row;
    row.eps = cfg.eps_ladder[e];
    row.value = mean;
    row.stderr_ = n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0;
    row.realizations = n;
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace changraph
