#include "changraph/graph_operator.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include <json.hpp>

namespace changraph {

DiscreteGraphOperator DiscreteGraphOperator::assemble(std::shared_ptr<const GraphSkeleton> g,
                                                      int cells_per_edge) {
  const std::size_t ne = g ? static_cast<std::size_t>(g->num_edges()) : 0;
  return assemble(std::move(g), std::vector<int>(ne, cells_per_edge));
}

DiscreteGraphOperator DiscreteGraphOperator::assemble(std::shared_ptr<const GraphSkeleton> g,
                                                      std::vector<int> cells_per_edge) {
  if (!g) throw std::invalid_argument("assemble: null graph");
  if (static_cast<int>(cells_per_edge.size()) != g->num_edges())
    throw std::invalid_argument("assemble: cells_per_edge size mismatch");
  for (int n : cells_per_edge)
    if (n < 4) throw std::invalid_argument("assemble: need at least 4 cells per edge");

  DiscreteGraphOperator op;
  op.g_ = std::move(g);
  op.cells_ = std::move(cells_per_edge);

  const int nv = op.g_->num_vertices();
  op.offset_.resize(op.cells_.size());
  int next = nv;
  for (std::size_t e = 0; e < op.cells_.size(); ++e) {
    op.offset_[e] = next;
    next += op.cells_[e] - 1;
  }
  const int n = next;

  op.mass_ = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> diag(static_cast<std::size_t>(n), 0.0);

  for (int e = 0; e < op.g_->num_edges(); ++e) {
    const GraphEdge& ed = op.g_->edge(e);
    const int nc = op.cells_[static_cast<std::size_t>(e)];
    const double dx = ed.length() / nc;
    for (int j = 1; j < nc; ++j)
      op.mass_[op.unknown_of_node(e, j)] = ed.width(ed.a + j * dx) * dx;
    // Half-cell masses, width taken at the face center (stays positive even
    // when the width vanishes at the endpoint itself).
    op.mass_[ed.vertex_left] += ed.width(ed.a + 0.5 * dx) * 0.5 * dx;
    op.mass_[ed.vertex_right] += ed.width(ed.b - 0.5 * dx) * 0.5 * dx;

    for (int j = 0; j < nc; ++j) {
      const double face = ed.width(ed.a + (j + 0.5) * dx) / (2.0 * dx);
      if (!(face > 0.0))
        throw std::invalid_argument("assemble: non-positive face weight on edge " + std::to_string(e));
      const int p = op.unknown_of_node(e, j);
      const int q = op.unknown_of_node(e, j + 1);
      trip.emplace_back(p, q, face);
      trip.emplace_back(q, p, face);
      diag[static_cast<std::size_t>(p)] -= face;
      diag[static_cast<std::size_t>(q)] -= face;
    }
  }
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, diag[static_cast<std::size_t>(i)]);

  op.flux_.resize(n, n);
  op.flux_.setFromTriplets(trip.begin(), trip.end());
  op.flux_.makeCompressed();

  op.gen_ = op.flux_;
  for (int col = 0; col < op.gen_.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.gen_, col); it; ++it)
      it.valueRef() /= op.mass_[it.row()];
  return op;
}

double DiscreteGraphOperator::dx(int edge) const {
  return g_->edge(edge).length() / cells_[static_cast<std::size_t>(edge)];
}

double DiscreteGraphOperator::min_dx() const {
  double m = std::numeric_limits<double>::infinity();
  for (int e = 0; e < g_->num_edges(); ++e) m = std::min(m, dx(e));
  return m;
}

int DiscreteGraphOperator::unknown_of_node(int edge, int j) const {
  const GraphEdge& ed = g_->edge(edge);
  const int nc = cells_[static_cast<std::size_t>(edge)];
  if (j == 0) return ed.vertex_left;
  if (j == nc) return ed.vertex_right;
  return offset_[static_cast<std::size_t>(edge)] + j - 1;
}

double DiscreteGraphOperator::x_of_node(int edge, int j) const {
  const GraphEdge& ed = g_->edge(edge);
  return ed.a + j * dx(edge);
}

double DiscreteGraphOperator::dot_w(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  return (mass_.array() * u.array() * v.array()).sum();
}

double DiscreteGraphOperator::norm_w(const Eigen::VectorXd& u) const { return std::sqrt(dot_w(u, u)); }

Eigen::VectorXd DiscreteGraphOperator::project(const GraphFunction& f) const {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(size());
  Eigen::VectorXd vnum = Eigen::VectorXd::Zero(g_->num_vertices());
  Eigen::VectorXd vden = Eigen::VectorXd::Zero(g_->num_vertices());
  for (int e = 0; e < g_->num_edges(); ++e) {
    const GraphEdge& ed = g_->edge(e);
    const int nc = cells_[static_cast<std::size_t>(e)];
    const auto& vals = f.edge[static_cast<std::size_t>(e)];
    if (vals.size() != nc + 1) throw std::invalid_argument("project: grid mismatch");
    for (int j = 1; j < nc; ++j) u[unknown_of_node(e, j)] = vals[j];
    const double h = dx(e);
    const double ml = ed.width(ed.a + 0.5 * h) * 0.5 * h;
    const double mr = ed.width(ed.b - 0.5 * h) * 0.5 * h;
    vnum[ed.vertex_left] += ml * vals[0];
    vden[ed.vertex_left] += ml;
    vnum[ed.vertex_right] += mr * vals[nc];
    vden[ed.vertex_right] += mr;
  }
  for (int v = 0; v < g_->num_vertices(); ++v) u[v] = vnum[v] / vden[v];
  return u;
}

GraphFunction DiscreteGraphOperator::to_function(const Eigen::VectorXd& u, const WorkGrid& grid) const {
  GraphFunction f(grid);
  for (int e = 0; e < g_->num_edges(); ++e) {
    const int nc = cells_[static_cast<std::size_t>(e)];
    if (grid.cells(e) != nc) throw std::invalid_argument("to_function: grid mismatch");
    for (int j = 0; j <= nc; ++j) f.edge[static_cast<std::size_t>(e)][j] = u[unknown_of_node(e, j)];
  }
  return f;
}

Eigen::VectorXd DiscreteGraphOperator::edge_midpoint_values(const Eigen::VectorXd& u, int edge) const {
  const int nc = cells_[static_cast<std::size_t>(edge)];
  Eigen::VectorXd out(nc);
  for (int j = 0; j < nc; ++j)
    out[j] = 0.5 * (u[unknown_of_node(edge, j)] + u[unknown_of_node(edge, j + 1)]);
  return out;
}

double DiscreteGraphOperator::stationary_residual(const Eigen::SparseMatrix<double>& flux,
                                                  const Eigen::VectorXd& mass) {
  // nu^T L = nu^T W^{-1} K = 1^T K: the column sums of the flux matrix.
  // Off-diagonals first, diagonal last: the diagonal was accumulated over the
  // same partner values in the same order, so the cancellation is exact.
  double worst = 0.0;
  for (int col = 0; col < flux.outerSize(); ++col) {
    double off = 0.0, diag = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(flux, col); it; ++it) {
      if (it.row() == col)
        diag = it.value();
      else
        off += it.value();
    }
    worst = std::max(worst, std::abs(off + diag));
  }
  return worst / mass.cwiseAbs().maxCoeff();
}

double DiscreteGraphOperator::stationary_residual() const { return stationary_residual(flux_, mass_); }

double DiscreteGraphOperator::kirchhoff_residual(const Eigen::VectorXd& f, int vertex) const {
  // (K f)_v = 1/2 sum_incident l(face) (f_neighbor - f_v)/dx, so twice that
  // is the discrete gluing sum  sum +- l f'.
  double acc = 0.0;
  for (Eigen::SparseMatrix<double>::InnerIterator it(flux_, vertex); it; ++it)
    acc += it.value() * f[it.row()];  // column view equals row view by symmetry
  return 2.0 * acc;
}

std::string DiscreteGraphOperator::dump_json() const {
  nlohmann::json j;
  j["size"] = size();
  j["num_vertices"] = g_->num_vertices();
  j["cells_per_edge"] = cells_;
  j["mass"] = std::vector<double>(mass_.data(), mass_.data() + mass_.size());
  nlohmann::json kt = nlohmann::json::array(), lt = nlohmann::json::array();
  for (int col = 0; col < flux_.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(flux_, col); it; ++it)
      kt.push_back({it.row(), it.col(), it.value()});
  for (int col = 0; col < gen_.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(gen_, col); it; ++it)
      lt.push_back({it.row(), it.col(), it.value()});
  j["flux_triplets"] = kt;
  j["generator_triplets"] = lt;
  return j.dump();
}

Spectrum eigen_decompose(const DiscreteGraphOperator& op) {
  const int n = op.size();
  if (n > 5000) throw std::invalid_argument("eigen_decompose: problem too large (> 5000 unknowns)");
  const Eigen::VectorXd sqrt_m = op.mass().cwiseSqrt();
  Eigen::MatrixXd b = Eigen::MatrixXd(op.flux());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) /= sqrt_m[i] * sqrt_m[j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigen_decompose: solver failed");
  Spectrum spec;
  spec.mu = es.eigenvalues().reverse();
  spec.vectors = es.eigenvectors().rowwise().reverse();
  for (int i = 0; i < n; ++i) spec.vectors.row(i) /= sqrt_m[i];
  return spec;
}

Eigen::VectorXd apply_semigroup_spectral(const DiscreteGraphOperator& op, const Spectrum& spec,
                                         const Eigen::VectorXd& f0, double t) {
  const Eigen::VectorXd coeff = spec.vectors.transpose() * op.mass().cwiseProduct(f0);
  return spec.vectors * (spec.mu.array() * t).exp().matrix().cwiseProduct(coeff);
}

Eigen::VectorXd apply_semigroup(const DiscreteGraphOperator& op, const Eigen::VectorXd& f0, double t,
                                SemigroupMethod method) {
  if (t < 0.0) throw std::invalid_argument("apply_semigroup: negative time");
  if (t == 0.0) return f0;
  if (method == SemigroupMethod::DenseExp) {
    if (op.size() > 2000)
      throw std::invalid_argument("apply_semigroup: dense exponential limited to 2000 unknowns");
    const Eigen::MatrixXd lt = Eigen::MatrixXd(op.generator()) * t;
    return lt.exp() * f0;
  }
  const double dx = op.min_dx();
  const double dt_max = 0.5 * dx * dx;
  const int steps = std::max(1, static_cast<int>(std::ceil(t / dt_max)));
  const double dt = t / steps;
  const Eigen::SparseMatrix<double> id =
      Eigen::SparseMatrix<double>(Eigen::VectorXd::Ones(op.size()).asDiagonal());
  Eigen::SparseMatrix<double> lhs = id - 0.5 * dt * op.generator();
  Eigen::SparseMatrix<double> rhs = id + 0.5 * dt * op.generator();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(lhs);
  if (lu.info() != Eigen::Success) throw std::runtime_error("apply_semigroup: factorization failed");
  Eigen::VectorXd u = f0;
  for (int k = 0; k < steps; ++k) u = lu.solve(rhs * u);
  return u;
}

GraphTrajectory solve_graph_pde(const DiscreteGraphOperator& op, const Eigen::VectorXd& u0,
                                const std::function<Eigen::VectorXd(double)>& forcing, double T,
                                double dt, int store_stride) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_graph_pde: dt must be positive");
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
  const Eigen::SparseMatrix<double> id =
      Eigen::SparseMatrix<double>(Eigen::VectorXd::Ones(op.size()).asDiagonal());
  Eigen::SparseMatrix<double> lhs = id - 0.5 * dt * op.generator();
  Eigen::SparseMatrix<double> rhs = id + 0.5 * dt * op.generator();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(lhs);
  if (lu.info() != Eigen::Success) throw std::runtime_error("solve_graph_pde: factorization failed");

  GraphTrajectory traj;
  Eigen::VectorXd u = u0;
  traj.times.push_back(0.0);
  traj.states.push_back(u);
  Eigen::VectorXd h_prev = forcing ? forcing(0.0) : Eigen::VectorXd::Zero(op.size());
  for (int k = 0; k < steps; ++k) {
    const double t1 = (k + 1) * dt;
    Eigen::VectorXd h_next = forcing ? forcing(t1) : Eigen::VectorXd::Zero(op.size());
    u = lu.solve(rhs * u + 0.5 * dt * (h_prev + h_next));
    h_prev = std::move(h_next);
    if ((k + 1) % store_stride == 0 || k + 1 == steps) {
      traj.times.push_back(t1);
      traj.states.push_back(u);
    }
  }
  return traj;
}

int sample_ctmc(const DiscreteGraphOperator& op, int start_unknown, double t, Philox& rng) {
  const auto& gen = op.generator();
  int state = start_unknown;
  double clock = 0.0;
  while (true) {
    double rate = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(gen, state); it; ++it)
      if (it.row() == state) rate = -it.value();  // column view; diagonal entry
    if (!(rate > 0.0)) return state;
    const double u = rng.next_double();
    clock += -std::log1p(-u) / rate;
    if (clock >= t) return state;
    // jump: off-diagonal rates of the row; by symmetry of K the column of
    // gen holds K(.,state)/m(.), so reread through flux for the row.
    double target = rng.next_double() * rate;
    int next_state = state;
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.flux(), state); it; ++it) {
      if (it.row() == state) continue;
      const double r = it.value() / op.mass()[state];  // K symmetric: row rate
      target -= r;
      if (target <= 0.0) {
        next_state = static_cast<int>(it.row());
        break;
      }
    }
    state = next_state;
  }
}

int nearest_unknown(const DiscreteGraphOperator& op, const GraphPoint& p) {
  if (p.vertex >= 0) return op.unknown_of_vertex(p.vertex);
  const GraphEdge& ed = op.graph().edge(p.edge);
  const double h = op.dx(p.edge);
  const int j = std::clamp(static_cast<int>(std::llround((p.x - ed.a) / h)), 0,
                           op.cells(p.edge));
  return op.unknown_of_node(p.edge, j);
}

GraphPoint unknown_location(const DiscreteGraphOperator& op, int unknown) {
  const GraphSkeleton& g = op.graph();
  GraphPoint gp;
  if (unknown < g.num_vertices()) {
    const GraphVertex& v = g.vertex(unknown);
    gp.vertex = v.id;
    gp.edge = v.incident.front().first;
    gp.x = v.x;
    return gp;
  }
  for (int e = 0; e < g.num_edges(); ++e) {
    const int nc = op.cells(e);
    const int off = op.unknown_of_node(e, 1);
    if (unknown >= off && unknown < off + nc - 1) {
      gp.edge = e;
      gp.x = op.x_of_node(e, unknown - off + 1);
      return gp;
    }
  }
  throw std::out_of_range("unknown_location: bad index");
}

GraphPoint sample_graph_diffusion(const DiscreteGraphOperator& op, const GraphPoint& start, double t,
                                  Philox& rng) {
  return unknown_location(op, sample_ctmc(op, nearest_unknown(op, start), t, rng));
}

}  // namespace changraph
