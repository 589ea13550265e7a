#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "changraph/channel_fv.hpp"
#include "changraph/graph_operator.hpp"
#include "changraph/noise.hpp"

namespace changraph {

/// Semi-implicit Euler-Maruyama for the graph SPDE
///   (I - dt L) u_{n+1} = u_n + dt b(u_n) + sum_j lambda_j f_j dbeta_j^n,
/// reading the Brownian increments from the shared log (so a channel run on
/// the same log is the coupled pair).
GraphTrajectory solve_graph_spde(const DiscreteGraphOperator& op, const NoiseModel& noise,
                                 const Eigen::VectorXd& u0, const std::function<double(double)>& b,
                                 const BrownianLog& log, double T, double dt, int store_stride = 1);

/// Covariance of the stochastic convolution w_L(t) = int_0^t e^{(t-s)L} dW,
/// evaluated spectrally: with a_j the W-coefficients of f_j,
///   C = V [ (A diag(lambda^2) A^T) o G ] V^T,
///   G_pq = (e^{(mu_p+mu_q) t} - 1)/(mu_p + mu_q)  (t when the rate is ~0).
Eigen::MatrixXd stochastic_convolution_cov(const DiscreteGraphOperator& op, const Spectrum& spec,
                                           const NoiseModel& noise, double t);

struct CompareConfig {
  std::vector<double> eps_ladder;
  double hx = 0.0;  // 0: edge length / cells (aligned columns)
  double hy = 0.05;
  double dt = 2e-3;
  double T = 1.0;
  double tau_fraction = 0.25;  // sup over t >= tau_fraction * T
  int realizations = 100;
  int snapshot_stride = 10;
  std::uint64_t seed = 1;
  std::function<double(double)> b;
  std::function<double(double, double)> u0;    // channel initial datum
  std::function<double(int, double)> u0_wedge;  // exact wedge of u0 (optional;
                                                // staircase wedge otherwise)
};

struct CompareRow {
  double eps = 0.0;
  /// E sup_{t in [tau,T]} ||wedge(u_eps) - ubar||^2 for the stochastic
  /// comparison; sup_t ||...|| for the deterministic one.
  double value = 0.0;
  double stderr_ = 0.0;
  int realizations = 0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  bool decreasing() const;
};

/// The coupled channel-vs-graph experiment: for each epsilon the channel
/// SPDE and the graph SPDE consume the identical increment log realization
/// by realization, and the table reports E sup_t of the squared wedge gap.
CompareResult compare_channel_graph(std::shared_ptr<const StripComplex> sc,
                                    std::shared_ptr<const GraphSkeleton> g,
                                    const DiscreteGraphOperator& op, const NoiseModel& noise,
                                    const CompareConfig& cfg);

/// Deterministic reduction of the comparison (lambda = 0, no noise): the
/// semigroup gap sup_{t in [tau,T]} ||wedge S_eps(t) u0 - Sbar(t) u0_wedge||
/// per epsilon, normalized by the initial graph norm on request.
std::vector<CompareRow> compare_semigroups(std::shared_ptr<const StripComplex> sc,
                                           std::shared_ptr<const GraphSkeleton> g,
                                           const DiscreteGraphOperator& op, const CompareConfig& cfg);

}  // namespace changraph
