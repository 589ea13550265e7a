#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "changraph/graph_operator.hpp"
#include "changraph/rng.hpp"

namespace changraph {

/// Trace-class covariance model on the graph space: eigenpairs (lambda_j,
/// f_j) with {f_j} orthonormal in the discrete L2(Gamma, nu) inner product
/// of the working grid, |lambda| non-increasing, sum lambda^2 bounded. The
/// channel counterpart acts as lambda_j on the lifted modes f_j_vee and as 0
/// on the zero-mean complement, so both sides of a coupled experiment can
/// consume the same Brownian increments.
class NoiseModel {
public:
  /// Per-edge cosine profiles, Gram-Schmidt orthonormalized in the operator's
  /// W inner product. Mode j gets lambda(j) with j counted from 1.
  static NoiseModel cosine(const DiscreteGraphOperator& op, int modes,
                           const std::function<double(int)>& lambda, double trace_bound = 1e6);

  /// Modes taken from a W-orthonormal spectrum (skipping nothing: mode j is
  /// eigenvector j-1). Evaluation off the grid uses linear interpolation.
  static NoiseModel eigenmodes(const DiscreteGraphOperator& op, const Spectrum& spec, int modes,
                               const std::function<double(int)>& lambda, double trace_bound = 1e6);

  /// Single spatially constant mode f = nu(Gamma)^{-1/2}.
  static NoiseModel constant_mode(const DiscreteGraphOperator& op, double lambda1);

  /// One mode only: the given (0-based) eigenvector of the spectrum.
  static NoiseModel single_eigenmode(const DiscreteGraphOperator& op, const Spectrum& spec,
                                     int index, double lambda1);

  /// Explicit edge-wise analytic modes; orthonormality is validated, not fixed.
  static NoiseModel explicit_modes(const DiscreteGraphOperator& op,
                                   std::vector<std::vector<HFunction>> per_edge_shapes,
                                   std::vector<double> lambdas, double trace_bound = 1e6);

  int modes() const { return static_cast<int>(lambda_.size()); }
  const Eigen::VectorXd& lambda() const { return lambda_; }
  /// Mode values on the operator unknowns (N x J).
  const Eigen::MatrixXd& node_shapes() const { return node_shapes_; }
  /// Mode j evaluated at an arbitrary point of the graph.
  double eval(int j, int edge, double x) const;
  /// Hilbert-Schmidt norm sqrt(sum lambda_j^2), equal on both sides of the lift.
  double hs_norm() const { return lambda_.norm(); }
  /// Worst-case Gram deviation max |<f_i, f_j>_W - delta_ij| on the grid.
  double orthonormality_defect(const DiscreteGraphOperator& op) const;

  /// Noise profile sum_j lambda_j f_j(x) dbeta_j at the given graph points;
  /// both solvers assemble increments through this one routine, so matching
  /// point sets receive bit-identical values.
  Eigen::VectorXd profile(const std::vector<std::pair<int, double>>& points,
                          const Eigen::VectorXd& dbeta) const;

private:
  NoiseModel() = default;
  void validate(const DiscreteGraphOperator& op, double trace_bound) const;

  Eigen::VectorXd lambda_;
  Eigen::MatrixXd node_shapes_;
  std::vector<std::function<double(int, double)>> eval_;
};

/// Log of Brownian increments shared by the coupled solvers: increment n is
/// a vector of J independent N(0, dt) draws. Generated once per realization
/// from the counter RNG; single writer, any number of readers.
struct BrownianLog {
  double dt = 0.0;
  std::vector<Eigen::VectorXd> steps;

  int num_steps() const { return static_cast<int>(steps.size()); }
  static BrownianLog generate(int modes, int steps, double dt, std::uint64_t seed,
                              std::uint64_t stream);
};

}  // namespace changraph
