#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "changraph/geometry.hpp"
#include "changraph/rng.hpp"

namespace changraph {

/// One trajectory sample of the reflected diffusion: position in the closed
/// domain, accumulated boundary local time, and the clock.
struct ReflectedState {
  Vec2 position{0.0, 0.0};
  double phi = 0.0;
  double time = 0.0;
};

struct SimConfig {
  double eps = 0.1;
  double dt = 0.0;  // 0 selects the default eps^2/20
  double T = 1.0;
  std::uint64_t seed = 0;
  int n_paths = 1;

  static double default_dt(double eps) { return eps * eps / 20.0; }

  /// Enforces dt <= eps^2/10 (the fast scale must be resolved) and basic
  /// positivity. Returns the validated copy with dt filled in.
  SimConfig validated() const;
};

/// One Euler-Skorokhod step with externally supplied standard normals.
/// Returns nothing when the boundary correction fails (step too large).
std::optional<ReflectedState> try_step_reflected(const StripComplex& sc, const ReflectedState& s,
                                                 double dt, double eps, double xi1, double xi2);

/// Steps the scheme z* = z + (sqrt(dt) xi1, sqrt(dt) xi2 / eps), pushing
/// exits back along sigma_eps * nu and accumulating the local time. On a
/// failed correction the step is re-done as substeps with dt halved, at most
/// 4 times; beyond that a runtime_error propagates.
ReflectedState step_reflected(const StripComplex& sc, const ReflectedState& s, const SimConfig& cfg,
                              Philox& rng);

/// Path on [0, T]; states stored every `stride` steps (and at T).
std::vector<ReflectedState> simulate_path(const StripComplex& sc, const Vec2& z0, const SimConfig& cfg,
                                          Philox& rng, int stride = 1);

struct McResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};

/// Monte Carlo estimate of E_z phi(Z(t)) over cfg.n_paths independent paths
/// (stream k of cfg.seed drives path k; the reduction order is fixed, so
/// results do not depend on the thread schedule).
McResult mc_expectation(const StripComplex& sc, const Vec2& z0, const SimConfig& cfg, double t,
                        const std::function<double(const Vec2&)>& phi_fn);

/// Coupled pair (Z, Zhat): the frozen-slow process re-reads Z at every
/// window start, keeps x frozen inside the window, and reflects its y in the
/// frozen cross-section using the same Brownian increments (the first
/// component is discarded by sigma_hat). Single-strip domains only.
struct CoupledFrozenPath {
  std::vector<double> times;
  std::vector<Vec2> z;
  std::vector<Vec2> zhat;
  std::vector<double> phi;
  std::vector<double> phihat;
};

CoupledFrozenPath simulate_frozen_pair(const StripComplex& sc, const Vec2& z0, const SimConfig& cfg,
                                       double gamma, Philox& rng, int stride = 1);

/// gamma_eps = eps^2 * log(eps^-kappa1).
double gamma_eps(double eps, double kappa1);

struct MomentResult {
  double value = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};

/// Sample p-th moment of phi(t) - phi(r) over a set of stored trajectories.
MomentResult local_time_moments(const std::vector<std::vector<ReflectedState>>& paths, double r,
                                double t, int p);

/// Spectral solution of the frozen-x fast motion on the section C_k(x):
/// coefficients of f in the Neumann cosine basis, damped by
/// exp(-(s/(2 eps^2)) (j pi / l)^2), the semigroup of the fast generator
/// (1/2) d^2/dy^2. Modes below 1e-14 damping are dropped.
struct SectionRelaxation {
  double y_lo = 0.0;
  double width = 0.0;
  std::vector<double> coeff;  // c_j = <f, e_j>, already damped for j >= 1
  double operator()(double y) const;
  double mean() const;  // the j = 0 term, i.e. the wedge value of f
};

SectionRelaxation cross_section_relaxation(const StripComplex& sc, double x, int edge, double eps,
                                           double s, const std::function<double(double)>& f);

/// CDF of the reflected Brownian y-motion on [0, l] at fast time tau,
/// started at y0 (relative coordinates): the KS-test oracle.
double relaxation_cdf(double l, double y0, double tau, double y);

/// Two-sided Kolmogorov-Smirnov statistic of samples against a CDF.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Pearson chi-square p-value (upper tail), via the regularized gamma function.
double chi2_pvalue(double statistic, int dof);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

}  // namespace changraph
