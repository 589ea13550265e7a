#include <doctest.h>

#include <cmath>

#include "changraph/channel_fv.hpp"
#include "changraph/graph_operator.hpp"
#include "changraph/reflected.hpp"
#include "test_domains.hpp"

using namespace changraph;
using namespace changraph::testing;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct World {
  std::shared_ptr<const StripComplex> sc;
  std::shared_ptr<const GraphSkeleton> g;
  explicit World(const DomainSpec& spec) : sc(build_complex(spec)), g(build_graph_of(*sc)) {}
};

}  // namespace

TEST_CASE("unit square at h = 0.1 has exactly 100 active cells") {
  const World w(flat_strip_spec(1.0, 1.0));
  const auto grid = ChannelGrid::build(w.sc, w.g, 0.1, 0.1);
  CHECK(grid.num_cells() == 100);
  CHECK(grid.active_area() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grid.columns().size() == 10);
}

TEST_CASE("sine strip staircase area converges to nu(Gamma)") {
  const World w(sine_strip_spec());
  const auto grid = ChannelGrid::build(w.sc, w.g, 0.05, 0.05);
  CHECK(grid.area_error() < 0.02);
  const auto finer = ChannelGrid::build(w.sc, w.g, 0.0125, 0.0125);
  CHECK(finer.area_error() < 0.005);
}

TEST_CASE("fork notch cells stay inactive") {
  const World w(fork_spec());
  const auto grid = ChannelGrid::build(w.sc, w.g, 0.05, 0.05);
  for (const auto& c : grid.centers()) {
    const bool in_notch = c.x() > 1.0 && c.y() > 0.405 && c.y() < 0.595;
    CHECK_FALSE(in_notch);
  }
}

TEST_CASE("under-resolved strips are rejected") {
  const World w(fork_spec());  // width 0.4 branches
  CHECK_THROWS_AS((void)ChannelGrid::build(w.sc, w.g, 0.05, 0.2), std::invalid_argument);
}

TEST_CASE("assembled operator: constants, smooth fields, exact symmetries") {
  const World w(flat_strip_spec(1.0, 1.0));
  const auto grid = std::make_shared<const ChannelGrid>(ChannelGrid::build(w.sc, w.g, 0.01, 0.01));
  const auto op = ChannelOperator::assemble(grid, 0.37);

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(grid->num_cells());
  CHECK((op.generator() * ones).cwiseAbs().maxCoeff() <= 1e-9);  // row sums ~ 1/h^2 scale

  // u = cos(pi x): L u ~ -pi^2/2 cos(pi x) regardless of eps
  const Eigen::VectorXd u = grid->sample([](double x, double) { return std::cos(kPi * x); });
  const Eigen::VectorXd lu = op.generator() * u;
  double worst = 0.0;
  for (int i = 0; i < grid->num_cells(); ++i) {
    const double x = grid->centers()[static_cast<std::size_t>(i)].x();
    worst = std::max(worst, std::abs(lu[i] + 0.5 * kPi * kPi * std::cos(kPi * x)));
  }
  CHECK(worst <= 0.02 * 0.5 * kPi * kPi);

  // flux matrix is symmetric by construction (area weights are uniform)
  const Eigen::SparseMatrix<double> asym =
      op.flux() - Eigen::SparseMatrix<double>(op.flux().transpose());
  double dev = 0.0;
  for (int c = 0; c < asym.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(asym, c); it; ++it)
      dev = std::max(dev, std::abs(it.value()));
  CHECK(dev == 0.0);

  // halving eps quadruples the vertical face weights bit-exactly
  const auto op2 = ChannelOperator::assemble(grid, 0.37 / 2.0);
  const auto& f = grid->faces_y().front();
  CHECK(op2.flux().coeff(f.first, f.second) / op.flux().coeff(f.first, f.second) == 4.0);
}

TEST_CASE("deterministic solver conserves mass and fixes constants") {
  const World w(sine_strip_spec());
  const auto grid = std::make_shared<const ChannelGrid>(ChannelGrid::build(w.sc, w.g, 0.1, 0.1));
  const auto op = ChannelOperator::assemble(grid, 0.5);

  const Eigen::VectorXd u0 = Eigen::VectorXd::Ones(grid->num_cells());
  auto traj = solve_channel_pde(op, u0, nullptr, 0.3, 0.01, 10);
  CHECK((traj.states.back() - u0).cwiseAbs().maxCoeff() <= 1e-12);

  const Eigen::VectorXd v0 = grid->sample([](double x, double y) { return std::sin(x) + y; });
  traj = solve_channel_pde(op, v0, nullptr, 0.3, 0.01, 10);
  CHECK(std::abs(grid->mass(traj.states.back()) - grid->mass(v0)) <=
        1e-12 * std::abs(grid->mass(v0)));
}

TEST_CASE("finite-volume value matches the Monte Carlo semigroup") {
  const World w(sine_strip_spec());
  const double eps = 0.25, t = 0.5;
  const auto grid = std::make_shared<const ChannelGrid>(ChannelGrid::build(w.sc, w.g, 0.05, 0.05));
  const auto op = ChannelOperator::assemble(grid, eps);
  const auto phi = [](double x, double y) { return std::cos(x) * (1.0 + y); };
  const auto traj = solve_channel_pde(op, grid->sample(phi), nullptr, t, 2e-3, 1000000);

  const Vec2 z0{kPi, 1.0};
  int cell = -1;
  double best = 1e300;
  for (int i = 0; i < grid->num_cells(); ++i) {
    const double d = (grid->centers()[static_cast<std::size_t>(i)] - z0).squaredNorm();
    if (d < best) {
      best = d;
      cell = i;
    }
  }
  SimConfig cfg;
  cfg.eps = eps;
  cfg.T = t;
  cfg.seed = 31;
  cfg.n_paths = 4000;
  const McResult mc =
      mc_expectation(*w.sc, z0, cfg, t, [&](const Vec2& p) { return phi(p.x(), p.y()); });
  CHECK(std::abs(mc.mean - traj.states.back()[cell]) <= 3.0 * mc.stderr_ + 0.02);
}

TEST_CASE("spde reduces to the deterministic solver as dt -> 0 when lambda = 0") {
  const World w(sine_strip_spec());
  const auto grid = std::make_shared<const ChannelGrid>(ChannelGrid::build(w.sc, w.g, 0.1, 0.1));
  const auto ch_op = ChannelOperator::assemble(grid, 0.5);
  const auto gop = DiscreteGraphOperator::assemble(w.g, 40);
  const NoiseModel zero = NoiseModel::cosine(gop, 2, [](int) { return 0.0; });
  const Eigen::VectorXd u0 = grid->sample([](double x, double y) { return std::cos(x) + 0.2 * y; });
  const double T = 0.1;

  double errs[2];
  int idx = 0;
  for (const double dt : {2e-3, 1e-3}) {
    const int steps = static_cast<int>(T / dt);
    const BrownianLog log = BrownianLog::generate(2, steps, dt, 5, 5);
    const auto spde = solve_channel_spde(ch_op, u0, nullptr, zero, log, T, dt, steps);
    const auto pde = solve_channel_pde(ch_op, u0, nullptr, T, dt, steps);
    errs[idx++] = (spde.states.back() - pde.states.back()).cwiseAbs().maxCoeff();
  }
  CHECK(errs[1] <= 0.7 * errs[0]);  // first-order gap between the two integrators
  CHECK(errs[0] <= 1e-3);
}

TEST_CASE("constant-mode noise drives the spatial mean as Brownian motion") {
  const World w(sine_strip_spec());
  const auto grid = std::make_shared<const ChannelGrid>(ChannelGrid::build(w.sc, w.g, 0.1, 0.1));
  const auto ch_op = ChannelOperator::assemble(grid, 0.5);
  const auto gop = DiscreteGraphOperator::assemble(w.g, 40);
  const double lambda = 0.7, T = 0.25, dt = 2.5e-3;
  const NoiseModel noise = NoiseModel::constant_mode(gop, lambda);
  const double c = noise.node_shapes()(0, 0);  // 1/sqrt(nu(Gamma)) discretely
  const int steps = static_cast<int>(T / dt);

  const int n_real = 400;
  double var = 0.0;
  std::vector<double> devs(n_real);
  for (int r = 0; r < n_real; ++r) {
    const BrownianLog log =
        BrownianLog::generate(1, steps, dt, 91, derive_stream(8, static_cast<std::uint64_t>(r)));
    const auto traj = solve_channel_spde(ch_op, Eigen::VectorXd::Zero(grid->num_cells()), nullptr,
                                         noise, log, T, dt, steps);
    const double m = grid->mass(traj.states.back()) / grid->active_area();
    devs[static_cast<std::size_t>(r)] = m;
    var += m * m;
  }
  var /= n_real;
  const double exact = lambda * lambda * c * c * T;  // exact for the discrete recursion
  CHECK(std::abs(var - exact) <= 4.0 * exact * std::sqrt(2.0 / n_real));
}

TEST_CASE("mean of noisy runs equals the noise-free run") {
  const World w(sine_strip_spec());
  const auto grid = std::make_shared<const ChannelGrid>(ChannelGrid::build(w.sc, w.g, 0.15, 0.15));
  const auto ch_op = ChannelOperator::assemble(grid, 0.5);
  const auto gop = DiscreteGraphOperator::assemble(w.g, 40);
  const NoiseModel noise = NoiseModel::cosine(gop, 3, [](int j) { return 0.3 * std::pow(2.0, -j); });
  const Eigen::VectorXd u0 = grid->sample([](double x, double) { return std::cos(x); });
  const double T = 0.2, dt = 5e-3;
  const int steps = static_cast<int>(T / dt);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(grid->num_cells());
  const int n_real = 200;
  for (int r = 0; r < n_real; ++r) {
    const BrownianLog log =
        BrownianLog::generate(3, steps, dt, 92, derive_stream(9, static_cast<std::uint64_t>(r)));
    mean += solve_channel_spde(ch_op, u0, nullptr, noise, log, T, dt, steps).states.back();
  }
  mean /= n_real;
  const BrownianLog zero_log = [&] {
    BrownianLog l;
    l.dt = dt;
    for (int k = 0; k < steps; ++k) l.steps.push_back(Eigen::VectorXd::Zero(3));
    return l;
  }();
  const auto det = solve_channel_spde(ch_op, u0, nullptr, noise, zero_log, T, dt, steps);
  const double se_scale = noise.hs_norm() * std::sqrt(T / n_real);
  CHECK((mean - det.states.back()).cwiseAbs().maxCoeff() <= 4.0 * se_scale);
}

TEST_CASE("column wedge and its adjoint pairing") {
  const World w(sine_strip_spec());
  const auto grid = ChannelGrid::build(w.sc, w.g, 0.08, 0.08);

  const Eigen::VectorXd c = Eigen::VectorXd::Constant(grid.num_cells(), 1.7);
  const Eigen::VectorXd wc = wedge_field(grid, c);
  CHECK((wc.array() - 1.7).abs().maxCoeff() <= 1e-14);

  const Eigen::VectorXd uy = grid.sample([](double, double y) { return y; });
  const Eigen::VectorXd wy = wedge_field(grid, uy);
  for (std::size_t k = 0; k < grid.columns().size(); ++k) {
    const double l = w.sc->strips().front().width(grid.columns()[k].x);
    CHECK(std::abs(wy[static_cast<Eigen::Index>(k)] - l / 2.0) <= 0.09);
  }

  Philox rng(13, 13);
  Eigen::VectorXd u(grid.num_cells());
  for (int i = 0; i < grid.num_cells(); ++i) u[i] = rng.next_normal();
  Eigen::VectorXd f(static_cast<Eigen::Index>(grid.columns().size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = rng.next_normal();
  const double lhs = dot_columns(grid, wedge_field(grid, u), f);
  const double rhs = grid.dot_area(u, lift_columns(grid, f));
  CHECK(std::abs(lhs - rhs) <= 1e-8 * (std::abs(lhs) + 1.0));
}
