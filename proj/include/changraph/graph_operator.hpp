#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <memory>
#include <vector>

#include "changraph/fields.hpp"
#include "changraph/graph.hpp"
#include "changraph/rng.hpp"

namespace changraph {

/// Finite-volume discretization of the graph operator
///   (L f)(x) = 1/(2 l(x)) d/dx ( l(x) f'(x) )
/// with flux balance at the vertices. Unknowns sit at the interior grid
/// nodes of each edge plus one shared unknown per vertex, whose dual cell is
/// the union of the incident half-cells. The operator is stored as the pair
/// (K, W): K symmetric with zero row sums and non-negative off-diagonal
/// entries (face weight l(face)/(2 dx)), W the diagonal cell masses, and the
/// generator is L = W^{-1} K. This factorization makes W-symmetry, the
/// Markov-generator sign structure, and the invariance of the width measure
/// (nu^T L = 1^T K = 0) exact by construction.
class DiscreteGraphOperator {
public:
  static DiscreteGraphOperator assemble(std::shared_ptr<const GraphSkeleton> g,
                                        std::vector<int> cells_per_edge);
  static DiscreteGraphOperator assemble(std::shared_ptr<const GraphSkeleton> g, int cells_per_edge);

  const GraphSkeleton& graph() const { return *g_; }
  std::shared_ptr<const GraphSkeleton> graph_ptr() const { return g_; }
  int size() const { return static_cast<int>(mass_.size()); }
  int cells(int edge) const { return cells_[static_cast<std::size_t>(edge)]; }
  double dx(int edge) const;
  double min_dx() const;

  const Eigen::SparseMatrix<double>& flux() const { return flux_; }
  const Eigen::SparseMatrix<double>& generator() const { return gen_; }
  const Eigen::VectorXd& mass() const { return mass_; }

  int unknown_of_vertex(int vertex) const { return vertex; }
  /// Node j = 0..cells(edge); the end nodes resolve to the vertex unknowns.
  int unknown_of_node(int edge, int j) const;
  double x_of_node(int edge, int j) const;

  /// Weighted inner product <u, v>_W (the discrete L2(Gamma, nu) pairing).
  double dot_w(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  double norm_w(const Eigen::VectorXd& u) const;

  /// State vector from per-edge node values: interior nodes copy through,
  /// each vertex takes the half-cell-mass weighted mean of the one-sided
  /// endpoint values (the discrete L2 projection).
  Eigen::VectorXd project(const GraphFunction& f) const;
  /// Node representation of a state; endpoint entries repeat the vertex value.
  GraphFunction to_function(const Eigen::VectorXd& u, const WorkGrid& grid) const;
  /// Values at edge cell midpoints (size cells(edge)), averaging the nodes.
  Eigen::VectorXd edge_midpoint_values(const Eigen::VectorXd& u, int edge) const;

  /// ||nu^T L||_inf / ||nu||_inf, evaluated through nu^T W^{-1} K = 1^T K.
  double stationary_residual() const;
  static double stationary_residual(const Eigen::SparseMatrix<double>& flux,
                                    const Eigen::VectorXd& mass);

  /// Discrete flux balance sum_k +- l df/dx at a vertex, for a state f.
  double kirchhoff_residual(const Eigen::VectorXd& f, int vertex) const;

  /// Serializes {masses, triplets of K and L, layout} as JSON.
  std::string dump_json() const;

private:
  std::shared_ptr<const GraphSkeleton> g_;
  std::vector<int> cells_;
  std::vector<int> offset_;  // first interior unknown per edge
  Eigen::VectorXd mass_;
  Eigen::SparseMatrix<double> flux_;
  Eigen::SparseMatrix<double> gen_;
};

struct Spectrum {
  Eigen::VectorXd mu;       // descending, mu[0] = 0
  Eigen::MatrixXd vectors;  // columns, W-orthonormal
};

/// Full W-symmetric eigendecomposition via W^{1/2} L W^{-1/2} (dense;
/// guarded to <= 5000 unknowns).
Spectrum eigen_decompose(const DiscreteGraphOperator& op);

enum class SemigroupMethod { DenseExp, CrankNicolson };

/// e^{tL} f0. DenseExp uses a Pade matrix exponential (<= 2000 unknowns,
/// the oracle path); Crank-Nicolson steps with dt <= dx^2/2. Both preserve
/// constants exactly.
Eigen::VectorXd apply_semigroup(const DiscreteGraphOperator& op, const Eigen::VectorXd& f0, double t,
                                SemigroupMethod method);

/// e^{tL} f0 evaluated through a precomputed spectrum.
Eigen::VectorXd apply_semigroup_spectral(const DiscreteGraphOperator& op, const Spectrum& spec,
                                         const Eigen::VectorXd& f0, double t);

struct GraphTrajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
};

/// Crank-Nicolson with trapezoidal forcing for du/dt = L u + h(t).
GraphTrajectory solve_graph_pde(const DiscreteGraphOperator& op, const Eigen::VectorXd& u0,
                                const std::function<Eigen::VectorXd(double)>& forcing, double T,
                                double dt, int store_stride = 1);

/// Continuous-time Markov chain with generator L: exponential holding times,
/// jump probabilities proportional to the off-diagonal rates. Returns the
/// unknown index occupied at time t.
int sample_ctmc(const DiscreteGraphOperator& op, int start_unknown, double t, Philox& rng);

/// CTMC sample reported as a graph point; `start` is snapped to the nearest
/// unknown of its edge.
GraphPoint sample_graph_diffusion(const DiscreteGraphOperator& op, const GraphPoint& start, double t,
                                  Philox& rng);

int nearest_unknown(const DiscreteGraphOperator& op, const GraphPoint& p);
GraphPoint unknown_location(const DiscreteGraphOperator& op, int unknown);

}  // namespace changraph
