#include "changraph/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "changraph/channel_fv.hpp"
#include "changraph/fields.hpp"
#include "changraph/graph_operator.hpp"
#include "changraph/graph_spde.hpp"
#include "changraph/noise.hpp"
#include "changraph/parallel.hpp"
#include "changraph/reflected.hpp"

namespace changraph {

namespace {

constexpr double kPi = 3.14159265358979323846;

CheckLine check_le(std::string name, double value, double bound, std::string note = "") {
  CheckLine c;
  c.name = std::move(name);
  c.value = value;
  c.bound = bound;
  c.cmp = "<=";
  c.pass = value <= bound;
  c.note = std::move(note);
  return c;
}

CheckLine check_bool(std::string name, bool ok, std::string note = "") {
  CheckLine c;
  c.name = std::move(name);
  c.value = ok ? 1.0 : 0.0;
  c.bound = 1.0;
  c.cmp = "bool";
  c.pass = ok;
  c.note = std::move(note);
  return c;
}

CheckLine check_range(std::string name, double value, double lo, double hi, std::string note = "") {
  CheckLine c;
  c.name = std::move(name);
  c.value = value;
  c.bound = hi;
  c.cmp = "in [" + format_csv_number(lo) + ", " + format_csv_number(hi) + "]";
  c.pass = value >= lo && value <= hi;
  c.note = std::move(note);
  return c;
}

double get_num(const nlohmann::json& p, const std::string& key, double dflt) {
  return p.contains(key) ? p.at(key).get<double>() : dflt;
}

int get_int(const nlohmann::json& p, const std::string& key, int dflt) {
  return p.contains(key) ? p.at(key).get<int>() : dflt;
}

void require_eps(double eps) {
  if (!(eps > 0.0) || eps > 1.0)
    throw std::invalid_argument("params: eps must lie in (0, 1], got " + std::to_string(eps));
}

// ---------------------------------------------------------------------------
// Random smooth test functions for the randomized algebra battery.
// ---------------------------------------------------------------------------

GraphFunction random_graph_function(const WorkGrid& grid, Philox& rng) {
  struct Term {
    double amp, phase;
  };
  GraphFunction f(grid);
  for (int e = 0; e < grid.num_edges(); ++e) {
    std::vector<Term> terms;
    for (int m = 0; m <= 5; ++m)
      terms.push_back({rng.next_normal() / (1.0 + m * m), 2.0 * kPi * rng.next_double()});
    const GraphEdge& ed = grid.graph().edge(e);
    for (int j = 0; j < grid.nodes(e); ++j) {
      const double s = (grid.x_node(e, j) - ed.a) / ed.length();
      double v = 0.0;
      for (int m = 0; m <= 5; ++m)
        v += terms[static_cast<std::size_t>(m)].amp *
             std::cos(m * kPi * s + terms[static_cast<std::size_t>(m)].phase);
      f.edge[static_cast<std::size_t>(e)][j] = v;
    }
  }
  return f;
}

std::function<double(double, double)> random_channel_fn(const StripComplex& sc, Philox& rng) {
  const auto [x0, x1] = sc.x_range();
  double y0 = 1e300, y1 = -1e300;
  for (const auto& s : sc.strips())
    for (int k = 0; k <= 64; ++k) {
      const double x = s.x_lo + (s.x_hi - s.x_lo) * k / 64.0;
      y0 = std::min(y0, s.h_lo(x));
      y1 = std::max(y1, s.h_hi(x));
    }
  struct Term {
    double amp, px, py, fx, fy;
  };
  std::vector<Term> terms;
  for (int p = 0; p <= 3; ++p)
    for (int q = 0; q <= 3; ++q)
      terms.push_back({rng.next_normal() / (1.0 + p + q), 2.0 * kPi * rng.next_double(),
                       2.0 * kPi * rng.next_double(), static_cast<double>(p), static_cast<double>(q)});
  const double lx = x1 - x0, ly = y1 - y0;
  return [terms, x0 = x0, y0, lx, ly](double x, double y) {
    double v = 0.0;
    for (const auto& t : terms)
      v += t.amp * std::cos(t.fx * kPi * (x - x0) / lx + t.px) *
           std::cos(t.fy * kPi * (y - y0) / ly + t.py);
    return v;
  };
}

double max_abs(const GraphFunction& f) {
  double m = 0.0;
  for (const auto& v : f.edge) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

// ---------------------------------------------------------------------------
// operator-selfchecks
// ---------------------------------------------------------------------------

KindReport run_operator_selfchecks(std::shared_ptr<const StripComplex> sc,
                                   std::shared_ptr<const GraphSkeleton> g,
                                   const nlohmann::json& params, std::uint64_t seed) {
  KindReport rep;
  rep.kind = "operator-selfchecks";
  const int cases = get_int(params, "algebra_cases", 100);
  const double tol = get_num(params, "algebra_tol", 1e-8);
  const int grid_cells = get_int(params, "quadrature_cells", 64);
  const int cells = get_int(params, "cells", 400);
  const int spectrum_cells = get_int(params, "spectrum_cells", 400);
  const double spectrum_tol = get_num(params, "spectrum_tol", 1e-6);
  rep.resolved_params = {{"algebra_cases", cases},   {"algebra_tol", tol},
                         {"quadrature_cells", grid_cells}, {"cells", cells},
                         {"spectrum_cells", spectrum_cells}, {"spectrum_tol", spectrum_tol}};

  const WorkGrid grid(sc, g, grid_cells);

  // -- averaging/lifting algebra, randomized -------------------------------
  double d_roundtrip = 0.0, d_isometry = 0.0, d_contraction = -1e300, d_adjoint = 0.0, d_split = 0.0;
  Philox rng(seed, derive_stream(0x414c4742u /*"ALGB"*/, 0));
  for (int c = 0; c < cases; ++c) {
    const GraphFunction f = random_graph_function(grid, rng);
    const QuadField u = sample_channel(grid, random_channel_fn(*sc, rng));
    const QuadField fv = vee(grid, f);
    d_roundtrip = std::max(d_roundtrip, max_abs(wedge(grid, fv) - f));
    d_isometry = std::max(d_isometry, std::abs(norm_chan(grid, fv) - norm_bar(grid, f)));
    const GraphFunction uw = wedge(grid, u);
    d_contraction = std::max(d_contraction, norm_bar(grid, uw) - norm_chan(grid, u));
    d_adjoint = std::max(d_adjoint, std::abs(dot_bar(grid, uw, f) - dot_chan(grid, u, fv)));
    const auto [u1, u2] = split_K1_K2(grid, u);
    d_split = std::max(d_split, std::abs(dot_chan(grid, u1, u2)));
    if (c == 0) {  // wedge of the split tail vanishes
      const double tail = max_abs(wedge(grid, u2));
      rep.checks.push_back(check_le("algebra.split_tail_wedge", tail, tol));
    }
  }
  rep.checks.push_back(check_le("algebra.wedge_vee_roundtrip", d_roundtrip, tol));
  rep.checks.push_back(check_le("algebra.vee_isometry", d_isometry, tol));
  rep.checks.push_back(check_le("algebra.wedge_contraction_excess", d_contraction, tol));
  rep.checks.push_back(check_le("algebra.adjointness", d_adjoint, tol));
  rep.checks.push_back(check_le("algebra.split_orthogonality", d_split, 1e-9));

  // diagonal operator round trip (A_vee)^wedge = A
  {
    Philox rng2(seed, derive_stream(0x414c4742u, 1));
    double dev = 0.0;
    DiagonalGraphOperator a{random_graph_function(grid, rng2)};
    for (int c = 0; c < 5; ++c) {
      const GraphFunction f = random_graph_function(grid, rng2);
      const GraphFunction lhs = wedge(grid, a.lift_apply(grid, vee(grid, f)));
      dev = std::max(dev, max_abs(lhs - a.apply(grid, f)));
    }
    rep.checks.push_back(check_le("algebra.diag_operator_roundtrip", dev, 1e-10));
  }

  // orthonormal transport + Hilbert-Schmidt equality across the lift
  {
    Philox rng2(seed, derive_stream(0x414c4742u, 2));
    const int J = 6;
    std::vector<GraphFunction> modes;
    for (int j = 0; j < J; ++j) {
      GraphFunction f = random_graph_function(grid, rng2);
      for (int k = 0; k < static_cast<int>(modes.size()); ++k) {
        const double proj = dot_bar(grid, modes[static_cast<std::size_t>(k)], f);
        f = f - [&] {
          GraphFunction s = modes[static_cast<std::size_t>(k)];
          for (auto& v : s.edge) v *= proj;
          return s;
        }();
      }
      const double nrm = norm_bar(grid, f);
      for (auto& v : f.edge) v /= nrm;
      modes.push_back(std::move(f));
    }
    double gram_dev = 0.0, hs_dev = 0.0;
    double hs_bar = 0.0, hs_chan = 0.0;
    for (int i = 0; i < J; ++i) {
      const double li = std::pow(2.0, -(i + 1));
      hs_bar += li * li * dot_bar(grid, modes[static_cast<std::size_t>(i)], modes[static_cast<std::size_t>(i)]);
      const QuadField vi = vee(grid, modes[static_cast<std::size_t>(i)]);
      hs_chan += li * li * dot_chan(grid, vi, vi);
      for (int j = 0; j < J; ++j) {
        const double gij = dot_chan(grid, vi, vee(grid, modes[static_cast<std::size_t>(j)]));
        gram_dev = std::max(gram_dev, std::abs(gij - (i == j ? 1.0 : 0.0)));
      }
    }
    hs_dev = std::abs(std::sqrt(hs_bar) - std::sqrt(hs_chan));
    rep.checks.push_back(check_le("algebra.orthonormal_transport_gram", gram_dev, 1e-9));
    rep.checks.push_back(check_le("algebra.hilbert_schmidt_match", hs_dev, 1e-8));
  }

  // rescaling maps
  {
    Philox rng2(seed, derive_stream(0x414c4742u, 3));
    const QuadField u = sample_channel(grid, random_channel_fn(*sc, rng2));
    ScaledField f1{0.35, u};
    const ScaledField f2 = rescale_J(f1, 0.07);
    const double iso = std::abs(norm_scaled(grid, f2) - norm_scaled(grid, f1));
    rep.checks.push_back(check_le("rescale.isometry", iso, 1e-10));
    const ScaledField back = rescale_J(f2, 0.35);
    double rt = 0.0;
    for (std::size_t e = 0; e < back.values.edge.size(); ++e)
      rt = std::max(rt, (back.values.edge[e] - f1.values.edge[e]).cwiseAbs().maxCoeff());
    rep.checks.push_back(check_le("rescale.roundtrip_pointwise", rt, 1e-13));
    const ScaledField id = rescale_J(f1, 0.35);
    double idev = 0.0;
    for (std::size_t e = 0; e < id.values.edge.size(); ++e)
      idev = std::max(idev, (id.values.edge[e] - f1.values.edge[e]).cwiseAbs().maxCoeff());
    rep.checks.push_back(check_le("rescale.identity_exact", idev, 0.0));
    // composition J_{e3,e2} J_{e2,e1} = J_{e3,e1}
    const ScaledField c1 = rescale_J(rescale_J(f1, 0.2), 0.05);
    const ScaledField c2 = rescale_J(f1, 0.05);
    double cdev = 0.0;
    for (std::size_t e = 0; e < c1.values.edge.size(); ++e)
      cdev = std::max(cdev, (c1.values.edge[e] - c2.values.edge[e]).cwiseAbs().maxCoeff());
    rep.checks.push_back(check_le("rescale.composition", cdev, 1e-13));
  }

  // -- discrete generator ----------------------------------------------------
  const auto op = DiscreteGraphOperator::assemble(g, cells);
  {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(op.size());
    const double row_sum = (op.generator() * ones).cwiseAbs().maxCoeff();
    const double norm_inf = [&] {
      double m = 0.0;
      for (int c = 0; c < op.generator().outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.generator(), c); it; ++it)
          m = std::max(m, std::abs(it.value()));
      return m;
    }();
    rep.checks.push_back(check_le("generator.row_sums_rel", row_sum / norm_inf, 1e-12));
    rep.checks.push_back(check_le("generator.nu_invariance_rel", op.stationary_residual(), 1e-12));

    // W-symmetry on the materialized generator
    const Eigen::SparseMatrix<double> wl = op.mass().asDiagonal() * op.generator();
    const Eigen::SparseMatrix<double> diff = wl - Eigen::SparseMatrix<double>(wl.transpose());
    double dmax = 0.0, wmax = 0.0;
    for (int c = 0; c < diff.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(diff, c); it; ++it)
        dmax = std::max(dmax, std::abs(it.value()));
    for (int c = 0; c < wl.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(wl, c); it; ++it)
        wmax = std::max(wmax, std::abs(it.value()));
    rep.checks.push_back(check_le("generator.w_symmetry_rel", dmax / wmax, 1e-12));

    double min_offdiag = 0.0;
    for (int c = 0; c < op.generator().outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(op.generator(), c); it; ++it)
        if (it.row() != it.col()) min_offdiag = std::min(min_offdiag, it.value());
    rep.checks.push_back(check_le("generator.negative_offdiag", -min_offdiag, 0.0));

    // negative control: corrupting one flux entry must be visible
    Eigen::SparseMatrix<double> bad = op.flux();
    bad.coeffRef(0, std::min(1, op.size() - 1)) += 1e-3;
    const double corrupted = DiscreteGraphOperator::stationary_residual(bad, op.mass());
    rep.checks.push_back(check_bool("generator.corruption_detected", corrupted >= 1e-4));
  }

  // Neumann spectrum of a reference flat single edge [0, 2] x [0, 1].
  {
    DomainSpec ref;
    Strip s;
    s.id = 0;
    s.x_lo = 0.0;
    s.x_hi = 2.0;
    s.h_lo = HFunction::constant(0.0);
    s.h_hi = HFunction::constant(1.0);
    ref.strips.push_back(s);
    auto ref_sc = std::make_shared<const StripComplex>(StripComplex::build(ref, 200));
    auto ref_g = std::make_shared<const GraphSkeleton>(GraphSkeleton::build(*ref_sc));
    const auto ref_op = DiscreteGraphOperator::assemble(ref_g, spectrum_cells);
    const Spectrum spec = eigen_decompose(ref_op);
    double worst = 0.0;
    for (int j = 1; j <= 5; ++j) {
      const double exact = -0.5 * (j * kPi / 2.0) * (j * kPi / 2.0);
      worst = std::max(worst, std::abs(spec.mu[j] - exact) / std::abs(exact));
    }
    rep.checks.push_back(check_le("generator.neumann_spectrum_rel", worst, spectrum_tol,
                                  "second-order flux stencil: expected level (j pi/(2n))^2/3"));
    rep.checks.push_back(
        check_le("generator.spectrum_mu0", std::abs(spec.mu[0]), 1e-10, "constant mode"));
  }

  // dense exponential vs spectral semigroup on the actual domain
  {
    const auto op_small = DiscreteGraphOperator::assemble(g, std::min(120, cells));
    const Spectrum spec = eigen_decompose(op_small);
    Philox rng2(seed, derive_stream(0x414c4742u, 4));
    Eigen::VectorXd f(op_small.size());
    for (int i = 0; i < f.size(); ++i) f[i] = rng2.next_normal();
    const Eigen::VectorXd a = apply_semigroup(op_small, f, 0.3, SemigroupMethod::DenseExp);
    const Eigen::VectorXd b = apply_semigroup_spectral(op_small, spec, f, 0.3);
    rep.checks.push_back(check_le("generator.expm_vs_spectral", (a - b).cwiseAbs().maxCoeff(), 1e-8));
  }

  // -- Kirchhoff flux balance rate at an interior vertex --------------------
  {
    int vertex = -1;
    for (const auto& v : g->vertices())
      if (v.interior) vertex = v.id;
    if (vertex < 0) {
      rep.checks.push_back(check_bool("kirchhoff.rate", true, "skipped: no interior vertex"));
    } else {
      const GraphVertex& v = g->vertex(vertex);
      std::vector<double> residuals;
      std::ostringstream csv;
      csv << "cells,flux_residual\n";
      for (const int n : {cells / 4, cells / 2, cells}) {
        const auto opn = DiscreteGraphOperator::assemble(g, n);
        Eigen::VectorXd f = Eigen::VectorXd::Zero(opn.size());
        // piecewise-linear field satisfying the continuum gluing condition
        double carry = 0.0;
        std::vector<std::pair<int, double>> slopes;
        for (std::size_t i = 1; i < v.incident.size(); ++i) {
          const auto [e, end] = v.incident[i];
          const double sign = end == End::Left ? 1.0 : -1.0;
          const double l = g->edge(e).width(v.x);
          slopes.emplace_back(e, 1.0);
          carry += sign * l;
        }
        {
          const auto [e0, end0] = v.incident.front();
          const double sign0 = end0 == End::Left ? 1.0 : -1.0;
          const double l0 = g->edge(e0).width(v.x);
          slopes.emplace_back(e0, -carry / (sign0 * l0));
        }
        for (const auto& [e, slope] : slopes)
          for (int j = 0; j <= opn.cells(e); ++j)
            f[opn.unknown_of_node(e, j)] = 1.0 + slope * (opn.x_of_node(e, j) - v.x);
        residuals.push_back(std::abs(opn.kirchhoff_residual(f, vertex)));
        csv << n << "," << format_csv_number(residuals.back()) << "\n";
      }
      rep.tables.emplace_back("kirchhoff_rate.csv", csv.str());
      const double r1 = residuals[0] / residuals[1];
      const double r2 = residuals[1] / residuals[2];
      rep.checks.push_back(check_range("kirchhoff.rate_ratio_coarse", r1, 1.7, 2.3));
      rep.checks.push_back(check_range("kirchhoff.rate_ratio_fine", r2, 1.7, 2.3));
    }
  }

  // -- channel operator ------------------------------------------------------
  {
    const double hy = get_num(params, "hy", 0.1);
    const double hx = get_num(params, "hx", hy);
    auto grid_ch = std::make_shared<const ChannelGrid>(ChannelGrid::build(sc, g, hx, hy));
    const auto ch = ChannelOperator::assemble(grid_ch, 0.5);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(grid_ch->num_cells());
    double norm_inf = 0.0;
    for (int c = 0; c < ch.generator().outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(ch.generator(), c); it; ++it)
        norm_inf = std::max(norm_inf, std::abs(it.value()));
    rep.checks.push_back(check_le("channel.row_sums_rel",
                                  (ch.generator() * ones).cwiseAbs().maxCoeff() / norm_inf, 1e-12));
    const Eigen::SparseMatrix<double> diff =
        ch.flux() - Eigen::SparseMatrix<double>(ch.flux().transpose());
    double dmax = 0.0;
    for (int c = 0; c < diff.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(diff, c); it; ++it)
        dmax = std::max(dmax, std::abs(it.value()));
    rep.checks.push_back(check_le("channel.area_symmetry", dmax, 0.0));

    // halving eps exactly quadruples every vertical face weight
    const auto ch2 = ChannelOperator::assemble(grid_ch, 0.25);
    double ratio_dev = 0.0;
    for (const auto& f : grid_ch->faces_y()) {
      const double w1 = ch.flux().coeff(f.first, f.second);
      const double w2 = ch2.flux().coeff(f.first, f.second);
      ratio_dev = std::max(ratio_dev, std::abs(w2 / w1 - 4.0));
    }
    rep.checks.push_back(check_le("channel.anisotropy_quadruples", ratio_dev, 0.0));
    rep.checks.push_back(check_le("channel.area_error", grid_ch->area_error(), 0.05));

    // mass conservation across Crank-Nicolson steps
    Philox rng2(seed, derive_stream(0x414c4742u, 5));
    Eigen::VectorXd u0(grid_ch->num_cells());
    for (int i = 0; i < u0.size(); ++i) u0[i] = 1.0 + 0.3 * rng2.next_normal();
    const auto traj = solve_channel_pde(ch, u0, nullptr, 0.05, 0.005, 10);
    const double drift = std::abs(grid_ch->mass(traj.states.back()) - grid_ch->mass(u0)) /
                         std::abs(grid_ch->mass(u0));
    rep.checks.push_back(check_le("channel.mass_conservation_rel", drift, 1e-12));
  }

  // -- noise lift coupling ----------------------------------------------------
  {
    const auto op_small = DiscreteGraphOperator::assemble(g, 40);
    const NoiseModel noise =
        NoiseModel::cosine(op_small, 4, [](int j) { return std::pow(2.0, -j); });
    rep.checks.push_back(
        check_le("noise.orthonormality_defect", noise.orthonormality_defect(op_small), 1e-10));
    const BrownianLog log = BrownianLog::generate(4, 3, 1e-3, seed, derive_stream(7, 7));
    // the channel and graph assemblers are one routine: identical points give
    // bit-identical increments
    std::vector<std::pair<int, double>> pts;
    for (int e = 0; e < g->num_edges(); ++e)
      for (int k = 0; k < 5; ++k) {
        const GraphEdge& ed = g->edge(e);
        pts.emplace_back(e, ed.a + (k + 0.37) * ed.length() / 5.0);
      }
    double dev = 0.0;
    for (const auto& step : log.steps) {
      const Eigen::VectorXd a = noise.profile(pts, step);
      const Eigen::VectorXd b = noise.profile(pts, step);
      dev = std::max(dev, (a - b).cwiseAbs().maxCoeff());
    }
    rep.checks.push_back(check_le("noise.shared_log_bit_exact", dev, 0.0));
    rep.checks.push_back(
        check_le("noise.hs_norm", std::abs(noise.hs_norm() - std::sqrt(0.33203125)), 1e-12,
                 "sqrt(sum 4^{-j}), j=1..4"));
  }

  return rep;
}

}  // namespace

// Implemented in experiment_kinds.cpp:
KindReport run_semigroup_convergence(std::shared_ptr<const StripComplex> sc,
                                     std::shared_ptr<const GraphSkeleton> g,
                                     const nlohmann::json& params, std::uint64_t seed);
KindReport run_spde_convergence(std::shared_ptr<const StripComplex> sc,
                                std::shared_ptr<const GraphSkeleton> g,
                                const nlohmann::json& params, std::uint64_t seed);
KindReport run_frozen_slow(std::shared_ptr<const StripComplex> sc,
                           std::shared_ptr<const GraphSkeleton> g, const nlohmann::json& params,
                           std::uint64_t seed);
KindReport run_local_time(std::shared_ptr<const StripComplex> sc,
                          std::shared_ptr<const GraphSkeleton> g, const nlohmann::json& params,
                          std::uint64_t seed);
KindReport run_equilibration(std::shared_ptr<const StripComplex> sc,
                             std::shared_ptr<const GraphSkeleton> g, const nlohmann::json& params,
                             std::uint64_t seed);

bool KindReport::pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string format_csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::function<double(const Vec2&)> parse_observable(const std::string& name) {
  if (name == "one") return [](const Vec2&) { return 1.0; };
  if (name == "x") return [](const Vec2& p) { return p.x(); };
  if (name == "y") return [](const Vec2& p) { return p.y(); };
  if (name == "cosx_1py") return [](const Vec2& p) { return std::cos(p.x()) * (1.0 + p.y()); };
  if (name == "left_half") return [](const Vec2& p) { return p.x() < kPi ? 1.0 : 0.0; };
  throw std::invalid_argument("unknown observable '" + name +
                              "' (one|x|y|cosx_1py|left_half)");
}

std::function<double(double)> parse_reaction(const nlohmann::json& spec) {
  if (spec.is_null() || (spec.is_string() && spec.get<std::string>() == "none")) return nullptr;
  const std::string kind = spec.is_string() ? spec.get<std::string>() : spec.at("kind").get<std::string>();
  const double c = spec.is_object() ? get_num(spec, "scale", 1.0) : 1.0;
  if (kind == "linear") return [c](double u) { return c * u; };
  if (kind == "tanh") return [c](double u) { return c * std::tanh(u); };
  if (kind == "sin") return [c](double u) { return c * std::sin(u); };
  throw std::invalid_argument("unknown reaction kind '" + kind + "' (none|linear|tanh|sin)");
}

std::function<double(double, double)> parse_field(const nlohmann::json& spec,
                                                  std::shared_ptr<const StripComplex> sc) {
  const std::string kind = spec.is_string() ? spec.get<std::string>() : spec.at("kind").get<std::string>();
  if (kind == "one") return [](double, double) { return 1.0; };
  if (kind == "cosx") return [](double x, double) { return std::cos(x); };
  if (kind == "cosx_1py") return [](double x, double y) { return std::cos(x) * (1.0 + y); };
  if (kind == "ydev") {
    // zero cross-section mean: y minus the local section midpoint
    return [sc](double x, double y) {
      const auto comps = sc->cross_section(x);
      for (const auto& c : comps)
        if (y >= c.y_lo - 1e-12 && y <= c.y_hi + 1e-12) return y - 0.5 * (c.y_lo + c.y_hi);
      return 0.0;
    };
  }
  throw std::invalid_argument("unknown field kind '" + kind + "' (one|cosx|cosx_1py|ydev)");
}

std::function<double(int, double)> exact_wedge_fn(std::shared_ptr<const StripComplex> sc,
                                                  std::function<double(double, double)> u) {
  return [sc, u = std::move(u)](int edge, double x) {
    const Strip& s = sc->strip(edge);
    const double xc = std::clamp(x, s.x_lo, s.x_hi);
    const double lo = s.h_lo(xc), hi = s.h_hi(xc);
    const auto& gn = GaussLegendre16::nodes();
    const auto& gw = GaussLegendre16::weights();
    double acc = 0.0;
    for (int i = 0; i < 16; ++i) {
      const double y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gn[static_cast<std::size_t>(i)];
      acc += 0.5 * gw[static_cast<std::size_t>(i)] * u(xc, y);
    }
    return acc;  // already the mean: weights sum to 2 and the half cancels l
  };
}

KindReport run_kind(const std::string& kind, std::shared_ptr<const StripComplex> sc,
                    std::shared_ptr<const GraphSkeleton> g, const nlohmann::json& params,
                    std::uint64_t seed) {
  if (kind == "operator-selfchecks") return run_operator_selfchecks(sc, g, params, seed);
  if (kind == "semigroup-convergence") return run_semigroup_convergence(sc, g, params, seed);
  if (kind == "spde-convergence") return run_spde_convergence(sc, g, params, seed);
  if (kind == "frozen-slow") return run_frozen_slow(sc, g, params, seed);
  if (kind == "local-time") return run_local_time(sc, g, params, seed);
  if (kind == "equilibration") return run_equilibration(sc, g, params, seed);
  throw std::invalid_argument(
      "unknown experiment kind '" + kind +
      "' (operator-selfchecks|semigroup-convergence|spde-convergence|frozen-slow|local-time|"
      "equilibration)");
}

ExperimentConfig ExperimentConfig::parse(const nlohmann::json& j, const std::string& base_dir) {
  ExperimentConfig cfg;
  cfg.kind = j.at("kind").get<std::string>();
  cfg.domain_file = j.at("domain").get<std::string>();
  if (!cfg.domain_file.empty() && cfg.domain_file.front() != '/' && !base_dir.empty())
    cfg.domain_file = base_dir + "/" + cfg.domain_file;
  cfg.params = j.contains("params") ? j.at("params") : nlohmann::json::object();
  cfg.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : 0;
  cfg.output_dir = j.contains("output_dir") ? j.at("output_dir").get<std::string>() : ".";
  if (!std::filesystem::exists(cfg.domain_file))
    throw std::invalid_argument("config: domain file does not exist: " + cfg.domain_file);
  for (const std::string key : {"eps", "dt"}) {
    if (cfg.params.contains(key)) {
      const double eps = cfg.params.contains("eps") ? cfg.params.at("eps").get<double>() : 1.0;
      if (key == "eps") require_eps(eps);
      if (key == "dt" && cfg.params.at("dt").get<double>() > eps * eps / 10.0 + 1e-15)
        throw std::invalid_argument("config: dt must not exceed eps^2/10");
    }
  }
  if (cfg.params.contains("eps_ladder"))
    for (const double e : cfg.params.at("eps_ladder").get<std::vector<double>>()) require_eps(e);
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config parse error in " + path + ": " + e.what());
  }
  return parse(j, std::filesystem::path(path).parent_path().string());
}

void validate_experiment_config(const std::string& path) {
  const ExperimentConfig cfg = ExperimentConfig::load(path);
  static const char* kinds[] = {"operator-selfchecks", "semigroup-convergence", "spde-convergence",
                                "frozen-slow", "local-time", "equilibration"};
  bool known = false;
  for (const char* k : kinds) known = known || cfg.kind == k;
  if (!known) throw std::invalid_argument("config: unknown experiment kind '" + cfg.kind + "'");
  const DomainSpec spec = load_domain_spec(cfg.domain_file);
  StripComplex::build(spec);  // full geometric validation
}

namespace {

std::string best_effort_git_hash() {
  std::FILE* pipe = ::popen("git rev-parse HEAD 2>/dev/null", "r");
  if (!pipe) return "unknown";
  char buf[64] = {0};
  std::string out;
  if (std::fgets(buf, sizeof(buf), pipe)) out = buf;
  ::pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

}  // namespace

KindReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const DomainSpec spec = load_domain_spec(cfg.domain_file);
  auto sc = std::make_shared<const StripComplex>(StripComplex::build(spec));
  auto g = std::make_shared<const GraphSkeleton>(GraphSkeleton::build(*sc));
  KindReport rep = run_kind(cfg.kind, sc, g, cfg.params, cfg.seed);

  std::filesystem::create_directories(cfg.output_dir);
  for (const auto& [name, text] : rep.tables) {
    std::ofstream out(cfg.output_dir + "/" + name, std::ios::binary);
    out << text;
  }
  nlohmann::json meta;
  meta["kind"] = rep.kind;
  meta["domain"] = cfg.domain_file;
  meta["seed"] = cfg.seed;
  meta["params"] = cfg.params;
  meta["resolved_params"] = rep.resolved_params;
  meta["git_hash"] = best_effort_git_hash();
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : rep.checks)
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"bound", c.bound},
                      {"cmp", c.cmp},
                      {"pass", c.pass},
                      {"note", c.note}});
  meta["checks"] = checks;
  meta["pass"] = rep.pass();
  meta["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream out(cfg.output_dir + "/metadata.json", std::ios::binary);
  out << meta.dump(2) << "\n";
  return rep;
}

}  // namespace changraph
