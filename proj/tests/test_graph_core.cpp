#include <doctest.h>

#include <cmath>

#include "changraph/fields.hpp"
#include "changraph/graph.hpp"
#include "changraph/rng.hpp"
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

GraphFunction random_f(const WorkGrid& grid, Philox& rng) {
  GraphFunction f(grid);
  for (int e = 0; e < grid.num_edges(); ++e) {
    const GraphEdge& ed = grid.graph().edge(e);
    double a0 = rng.next_normal(), a1 = rng.next_normal(), a2 = rng.next_normal();
    for (int j = 0; j < grid.nodes(e); ++j) {
      const double s = (grid.x_node(e, j) - ed.a) / ed.length();
      f.edge[static_cast<std::size_t>(e)][j] =
          a0 + a1 * std::cos(kPi * s) + a2 * std::cos(2 * kPi * s);
    }
  }
  return f;
}

}  // namespace

TEST_CASE("graph build: edges and vertex kinds") {
  const World sine(sine_strip_spec());
  CHECK(sine.g->num_edges() == 1);
  CHECK(sine.g->num_vertices() == 2);

  const World fork(fork_spec());
  CHECK(fork.g->num_edges() == 3);
  int interior = 0;
  for (const auto& v : fork.g->vertices()) interior += v.interior ? 1 : 0;
  CHECK(interior == 1);
  CHECK(fork.g->num_vertices() == 4);
}

TEST_CASE("graph distance") {
  const World sine(sine_strip_spec());
  CHECK(sine.g->distance({0, 0.2, -1}, {0, 0.7, -1}) == doctest::Approx(0.5));
  CHECK(sine.g->distance({0, 0.7, -1}, {0, 0.7, -1}) == 0.0);

  const World fork(fork_spec());
  CHECK(fork.g->distance({0, 0.5, -1}, {1, 1.5, -1}) == doctest::Approx(1.0));
  CHECK(fork.g->distance({1, 1.5, -1}, {2, 1.25, -1}) == doctest::Approx(0.75));
}

TEST_CASE("nu measure equals the area of the domain") {
  const World sine(sine_strip_spec());
  CHECK(sine.g->measure_nu_total() == doctest::Approx(4.0 * kPi).epsilon(1e-10));
  CHECK(sine.g->measure_nu(0, 1.0, 1.0) == 0.0);

  // independent 2-d lattice quadrature of the indicator
  const auto [x0, x1] = sine.sc->x_range();
  const double h = 0.004;
  long inside = 0, total = 0;
  for (double x = x0 + h / 2; x < x1; x += h)
    for (double y = -0.1 + h / 2; y < 3.1; y += h) {
      ++total;
      if (sine.sc->contains({x, y})) ++inside;
    }
  const double area2d = static_cast<double>(inside) * h * h;
  CHECK(std::abs(area2d - sine.g->measure_nu_total()) < 0.01 * sine.g->measure_nu_total());
  (void)total;

  const World fork(fork_spec());
  CHECK(fork.g->measure_nu_total() == doctest::Approx(1.0 + 0.4 + 0.4).epsilon(1e-12));
  CHECK(fork.g->measure_nu({{0, 0.0, 0.5}, {1, 1.0, 2.0}}) ==
        doctest::Approx(0.5 + 0.4).epsilon(1e-12));
}

TEST_CASE("cross-section lengths are Lipschitz on sampled grids") {
  const World sine(sine_strip_spec());
  // |l'| = |cos x| <= 1 for l = 2 + sin x
  const double lip = 1.0;
  double prev = sine.sc->cross_section(0.0).front().length;
  const int n = 2000;
  for (int k = 1; k <= n; ++k) {
    const double x = 2.0 * kPi * k / n;
    const double cur = sine.sc->cross_section(x).front().length;
    CHECK(std::abs(cur - prev) <= lip * (2.0 * kPi / n) * (1.0 + 1e-9));
    prev = cur;
  }
}

TEST_CASE("wedge of simple fields") {
  const World sine(sine_strip_spec());
  const WorkGrid grid(sine.sc, sine.g, 64);

  const QuadField c = sample_channel(grid, [](double, double) { return 3.25; });
  const GraphFunction wc = wedge(grid, c);
  for (int j = 0; j < grid.nodes(0); ++j) CHECK(wc.edge[0][j] == doctest::Approx(3.25).epsilon(1e-14));

  // flat-bottom strip: the average of y over [0, l] is l/2
  const QuadField uy = sample_channel(grid, [](double, double y) { return y; });
  const GraphFunction wy = wedge(grid, uy);
  for (int j = 0; j < grid.nodes(0); ++j) {
    const double l = grid.widths(0)[j];
    CHECK(wy.edge[0][j] == doctest::Approx(l / 2.0).epsilon(1e-12));
  }

  const World fork(fork_spec());
  const WorkGrid fgrid(fork.sc, fork.g, 32);
  const QuadField ind = sample_channel(fgrid, [](double, double y) { return y > 0.5 ? 1.0 : 0.0; });
  const GraphFunction wi = wedge(fgrid, ind);
  for (int j = 1; j < fgrid.nodes(1) - 1; ++j) CHECK(wi.edge[1][j] == 0.0);  // edge B lies below 0.5
}

TEST_CASE("vee is an isometry and wedge its left inverse") {
  const World sine(sine_strip_spec());
  const WorkGrid grid(sine.sc, sine.g, 64);
  Philox rng(11, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const GraphFunction f = random_f(grid, rng);
    const QuadField fv = vee(grid, f);
    const GraphFunction back = wedge(grid, fv);
    for (int j = 0; j < grid.nodes(0); ++j)
      CHECK(std::abs(back.edge[0][j] - f.edge[0][j]) <= 1e-12 * (1.0 + std::abs(f.edge[0][j])));
    CHECK(std::abs(norm_chan(grid, fv) - norm_bar(grid, f)) <= 1e-10);
  }
  const GraphFunction one = sample_graph(grid, [](int, double) { return 1.0; });
  const QuadField lifted = vee(grid, one);
  CHECK(std::abs(norm_chan(grid, lifted) * norm_chan(grid, lifted) - sine.g->measure_nu_total()) <
        1e-6);
}

TEST_CASE("adjointness and contraction of the averaging pair") {
  const World fork(fork_spec());
  const WorkGrid grid(fork.sc, fork.g, 32);
  Philox rng(12, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const GraphFunction f = random_f(grid, rng);
    const QuadField u = sample_channel(grid, [&](double x, double y) {
      return std::cos(x + 0.1 * rep) * (0.5 + std::sin(y * (1.0 + 0.01 * rep)));
    });
    const GraphFunction uw = wedge(grid, u);
    CHECK(std::abs(dot_bar(grid, uw, f) - dot_chan(grid, u, vee(grid, f))) <= 1e-9);
    CHECK(norm_bar(grid, uw) <= norm_chan(grid, u) + 1e-12);
  }
}

TEST_CASE("K1/K2 splitting") {
  const World sine(sine_strip_spec());
  const WorkGrid grid(sine.sc, sine.g, 64);

  const QuadField c = sample_channel(grid, [](double, double) { return 2.0; });
  const auto [c1, c2] = split_K1_K2(grid, c);
  CHECK(norm_chan(grid, c2) <= 1e-12);

  // y - (section midpoint) has zero cross-section mean on the flat-bottom strip
  const QuadField dev = sample_channel(grid, [&](double x, double y) {
    const auto cs = sine.sc->cross_section(x);
    return y - 0.5 * (cs[0].y_lo + cs[0].y_hi);
  });
  const auto [d1, d2] = split_K1_K2(grid, dev);
  CHECK(norm_chan(grid, d1) <= 1e-10);
  CHECK(std::abs(norm_chan(grid, d2) - norm_chan(grid, dev)) <= 1e-10);

  Philox rng(13, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const QuadField u = sample_channel(grid, [&](double x, double y) {
      return std::sin(x + rep) * y + std::cos(y * rep * 0.3);
    });
    const auto [u1, u2] = split_K1_K2(grid, u);
    CHECK(std::abs(dot_chan(grid, u1, u2)) <= 1e-9);
    CHECK(norm_bar(grid, wedge(grid, u2)) <= 1e-10);
  }
}

TEST_CASE("orthonormal systems transport through the lift") {
  const World fork(fork_spec());
  const WorkGrid grid(fork.sc, fork.g, 32);
  Philox rng(14, 0);
  std::vector<GraphFunction> modes;
  for (int j = 0; j < 5; ++j) {
    GraphFunction f = random_f(grid, rng);
    for (const auto& m : modes) {
      const double proj = dot_bar(grid, m, f);
      for (std::size_t e = 0; e < f.edge.size(); ++e) f.edge[e] -= proj * m.edge[e];
    }
    const double nrm = norm_bar(grid, f);
    for (auto& v : f.edge) v /= nrm;
    modes.push_back(std::move(f));
  }
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t j = 0; j < modes.size(); ++j) {
      const double gij = dot_chan(grid, vee(grid, modes[i]), vee(grid, modes[j]));
      CHECK(std::abs(gij - (i == j ? 1.0 : 0.0)) <= 1e-9);
    }
}

TEST_CASE("diagonal operators commute with the lift as (A_vee)^wedge = A") {
  const World sine(sine_strip_spec());
  const WorkGrid grid(sine.sc, sine.g, 64);
  Philox rng(15, 0);
  const DiagonalGraphOperator a{random_f(grid, rng)};
  for (int rep = 0; rep < 5; ++rep) {
    const GraphFunction f = random_f(grid, rng);
    const GraphFunction lhs = wedge(grid, a.lift_apply(grid, vee(grid, f)));
    const GraphFunction rhs = a.apply(grid, f);
    for (int j = 0; j < grid.nodes(0); ++j) CHECK(std::abs(lhs.edge[0][j] - rhs.edge[0][j]) <= 1e-10);
  }
}

TEST_CASE("rescaling maps are isometries with exact composition") {
  const World sine(sine_strip_spec());
  const WorkGrid grid(sine.sc, sine.g, 64);
  const QuadField u = sample_channel(grid, [](double x, double y) { return std::sin(x) + y * y; });
  ScaledField f1{0.4, u};

  const ScaledField f2 = rescale_J(f1, 0.1);
  CHECK(std::abs(norm_scaled(grid, f2) - norm_scaled(grid, f1)) <= 1e-10);

  const ScaledField same = rescale_J(f1, 0.4);
  for (std::size_t e = 0; e < same.values.edge.size(); ++e)
    CHECK((same.values.edge[e] - f1.values.edge[e]).cwiseAbs().maxCoeff() == 0.0);

  const ScaledField back = rescale_J(f2, 0.4);
  double dev = 0.0;
  for (std::size_t e = 0; e < back.values.edge.size(); ++e)
    dev = std::max(dev, (back.values.edge[e] - f1.values.edge[e]).cwiseAbs().maxCoeff());
  CHECK(dev <= 1e-13);

  const ScaledField c1 = rescale_J(rescale_J(f1, 0.2), 0.05);
  const ScaledField c2 = rescale_J(f1, 0.05);
  dev = 0.0;
  for (std::size_t e = 0; e < c1.values.edge.size(); ++e)
    dev = std::max(dev, (c1.values.edge[e] - c2.values.edge[e]).cwiseAbs().maxCoeff());
  CHECK(dev <= 1e-13);
}
