#include "changraph/fields.hpp"

#include <cmath>
#include <stdexcept>

namespace changraph {

namespace {

// Abscissae/weights of the 16-point Gauss-Legendre rule (positive half).
constexpr double kGlNodes[8] = {
    0.0950125098376374401853193, 0.2816035507792589132304605,
    0.4580167776572273863424194, 0.6178762444026437484466718,
    0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
constexpr double kGlWeights[8] = {
    0.1894506104550684962853967, 0.1826034150449235888667637,
    0.1691565193950025381893121, 0.1495959888165767320815017,
    0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

std::array<double, 16> make_nodes() {
  std::array<double, 16> n{};
  for (int i = 0; i < 8; ++i) {
    n[static_cast<std::size_t>(2 * i)] = -kGlNodes[i];
    n[static_cast<std::size_t>(2 * i + 1)] = kGlNodes[i];
  }
  return n;
}

std::array<double, 16> make_weights() {
  std::array<double, 16> w{};
  for (int i = 0; i < 8; ++i) {
    w[static_cast<std::size_t>(2 * i)] = kGlWeights[i];
    w[static_cast<std::size_t>(2 * i + 1)] = kGlWeights[i];
  }
  return w;
}

}  // namespace

const std::array<double, 16>& GaussLegendre16::nodes() {
  static const std::array<double, 16> n = make_nodes();
  return n;
}

const std::array<double, 16>& GaussLegendre16::weights() {
  static const std::array<double, 16> w = make_weights();
  return w;
}

WorkGrid::WorkGrid(std::shared_ptr<const StripComplex> sc, std::shared_ptr<const GraphSkeleton> g,
                   int cells_per_edge)
    : sc_(std::move(sc)), g_(std::move(g)) {
  if (cells_per_edge < 2 || cells_per_edge % 2 != 0)
    throw std::invalid_argument("WorkGrid: cells_per_edge must be even and >= 2 (composite Simpson)");
  const int ne = g_->num_edges();
  cells_.assign(static_cast<std::size_t>(ne), cells_per_edge);
  wx_.resize(static_cast<std::size_t>(ne));
  width_.resize(static_cast<std::size_t>(ne));
  ylo_.resize(static_cast<std::size_t>(ne));
  for (int e = 0; e < ne; ++e) {
    const GraphEdge& ed = g_->edge(e);
    const int n = cells_per_edge;
    const double dx = ed.length() / n;
    Eigen::VectorXd w(n + 1), l(n + 1), lo(n + 1);
    for (int j = 0; j <= n; ++j) {
      const double x = ed.a + j * dx;
      const double simpson = (j == 0 || j == n) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
      w[j] = simpson * dx / 3.0;
      l[j] = ed.width(x);
      lo[j] = sc_->strip(e).h_lo(x);
    }
    wx_[static_cast<std::size_t>(e)] = std::move(w);
    width_[static_cast<std::size_t>(e)] = std::move(l);
    ylo_[static_cast<std::size_t>(e)] = std::move(lo);
  }
}

double WorkGrid::x_node(int edge, int j) const {
  const GraphEdge& ed = g_->edge(edge);
  return ed.a + j * (ed.length() / cells_[static_cast<std::size_t>(edge)]);
}

double WorkGrid::y_node(int edge, int j, int i) const {
  const double lo = ylo_[static_cast<std::size_t>(edge)][j];
  const double w = width_[static_cast<std::size_t>(edge)][j];
  return lo + 0.5 * w * (1.0 + GaussLegendre16::nodes()[static_cast<std::size_t>(i)]);
}

GraphFunction::GraphFunction(const WorkGrid& grid) {
  edge.resize(static_cast<std::size_t>(grid.num_edges()));
  for (int e = 0; e < grid.num_edges(); ++e)
    edge[static_cast<std::size_t>(e)] = Eigen::VectorXd::Zero(grid.nodes(e));
}

QuadField::QuadField(const WorkGrid& grid) {
  edge.resize(static_cast<std::size_t>(grid.num_edges()));
  for (int e = 0; e < grid.num_edges(); ++e)
    edge[static_cast<std::size_t>(e)] = Eigen::MatrixXd::Zero(grid.nodes(e), 16);
}

GraphFunction sample_graph(const WorkGrid& grid, const std::function<double(int, double)>& f) {
  GraphFunction out(grid);
  for (int e = 0; e < grid.num_edges(); ++e)
    for (int j = 0; j < grid.nodes(e); ++j) out.edge[static_cast<std::size_t>(e)][j] = f(e, grid.x_node(e, j));
  return out;
}

QuadField sample_channel(const WorkGrid& grid, const std::function<double(double, double)>& u) {
  QuadField out(grid);
  for (int e = 0; e < grid.num_edges(); ++e)
    for (int j = 0; j < grid.nodes(e); ++j) {
      const double x = grid.x_node(e, j);
      for (int i = 0; i < 16; ++i) out.edge[static_cast<std::size_t>(e)](j, i) = u(x, grid.y_node(e, j, i));
    }
  return out;
}

GraphFunction wedge(const WorkGrid& grid, const QuadField& u) {
  GraphFunction out(grid);
  const auto& gw = GaussLegendre16::weights();
  for (int e = 0; e < grid.num_edges(); ++e) {
    const auto& m = u.edge[static_cast<std::size_t>(e)];
    auto& v = out.edge[static_cast<std::size_t>(e)];
    for (int j = 0; j < grid.nodes(e); ++j) {
      double acc = 0.0;
      for (int i = 0; i < 16; ++i) acc += 0.5 * gw[static_cast<std::size_t>(i)] * m(j, i);
      v[j] = acc;  // (1/l) * int_{C(x)} u dy, the l cancels against the rule
    }
  }
  return out;
}

QuadField vee(const WorkGrid& grid, const GraphFunction& f) {
  QuadField out(grid);
  for (int e = 0; e < grid.num_edges(); ++e)
    for (int j = 0; j < grid.nodes(e); ++j)
      out.edge[static_cast<std::size_t>(e)].row(j).setConstant(f.edge[static_cast<std::size_t>(e)][j]);
  return out;
}

double dot_bar(const WorkGrid& grid, const GraphFunction& f, const GraphFunction& g) {
  double acc = 0.0;
  for (int e = 0; e < grid.num_edges(); ++e) {
    const auto& wx = grid.x_weights(e);
    const auto& l = grid.widths(e);
    const auto& a = f.edge[static_cast<std::size_t>(e)];
    const auto& b = g.edge[static_cast<std::size_t>(e)];
    for (int j = 0; j < grid.nodes(e); ++j) acc += wx[j] * l[j] * a[j] * b[j];
  }
  return acc;
}

double dot_chan(const WorkGrid& grid, const QuadField& u, const QuadField& v) {
  double acc = 0.0;
  const auto& gw = GaussLegendre16::weights();
  for (int e = 0; e < grid.num_edges(); ++e) {
    const auto& wx = grid.x_weights(e);
    const auto& l = grid.widths(e);
    const auto& a = u.edge[static_cast<std::size_t>(e)];
    const auto& b = v.edge[static_cast<std::size_t>(e)];
    for (int j = 0; j < grid.nodes(e); ++j) {
      double sec = 0.0;
      for (int i = 0; i < 16; ++i) sec += 0.5 * gw[static_cast<std::size_t>(i)] * a(j, i) * b(j, i);
      acc += wx[j] * l[j] * sec;
    }
  }
  return acc;
}

double norm_bar(const WorkGrid& grid, const GraphFunction& f) { return std::sqrt(dot_bar(grid, f, f)); }
double norm_chan(const WorkGrid& grid, const QuadField& u) { return std::sqrt(dot_chan(grid, u, u)); }

QuadField operator-(const QuadField& a, const QuadField& b) {
  QuadField out = a;
  for (std::size_t e = 0; e < out.edge.size(); ++e) out.edge[e] -= b.edge[e];
  return out;
}

GraphFunction operator-(const GraphFunction& a, const GraphFunction& b) {
  GraphFunction out = a;
  for (std::size_t e = 0; e < out.edge.size(); ++e) out.edge[e] -= b.edge[e];
  return out;
}

std::pair<QuadField, QuadField> split_K1_K2(const WorkGrid& grid, const QuadField& u) {
  QuadField u1 = vee(grid, wedge(grid, u));
  QuadField u2 = u - u1;
  return {std::move(u1), std::move(u2)};
}

GraphFunction DiagonalGraphOperator::apply(const WorkGrid& grid, const GraphFunction& f) const {
  GraphFunction out(grid);
  for (int e = 0; e < grid.num_edges(); ++e)
    out.edge[static_cast<std::size_t>(e)] =
        symbol.edge[static_cast<std::size_t>(e)].cwiseProduct(f.edge[static_cast<std::size_t>(e)]);
  return out;
}

QuadField DiagonalGraphOperator::lift_apply(const WorkGrid& grid, const QuadField& u) const {
  return vee(grid, apply(grid, wedge(grid, u)));
}

ScaledField rescale_J(const ScaledField& u, double eps2) {
  if (!(eps2 > 0.0) || !(u.eps > 0.0)) throw std::invalid_argument("rescale_J: eps must be positive");
  ScaledField out;
  out.eps = eps2;
  out.values = u.values;
  if (eps2 != u.eps) {
    const double factor = std::sqrt(u.eps / eps2);
    for (auto& m : out.values.edge) m *= factor;
  }
  return out;
}

double dot_scaled(const WorkGrid& grid, const ScaledField& u, const ScaledField& v) {
  if (u.eps != v.eps) throw std::invalid_argument("dot_scaled: fields live on different channels");
  return u.eps * dot_chan(grid, u.values, v.values);
}

double norm_scaled(const WorkGrid& grid, const ScaledField& u) {
  return std::sqrt(dot_scaled(grid, u, u));
}

}  // namespace changraph
