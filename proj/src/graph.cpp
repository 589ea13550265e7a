#include "changraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace changraph {

namespace {

double adaptive_simpson(const HFunction& f, double a, double m, double b, double fa, double fm,
                        double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate(const HFunction& f, double a, double b, double rel_tol) {
  if (b <= a) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = std::max(std::abs(whole) * rel_tol, 1e-14);
  return adaptive_simpson(f, a, m, b, fa, fm, fb, whole, tol, 40);
}

GraphSkeleton GraphSkeleton::build(const StripComplex& sc) {
  GraphSkeleton g;
  for (const auto& s : sc.strips()) {
    GraphEdge e;
    e.id = s.id;
    e.a = s.x_lo;
    e.b = s.x_hi;
    e.width = s.h_hi - s.h_lo;
    e.vertex_left = sc.vertex_at(s.id, End::Left);
    e.vertex_right = sc.vertex_at(s.id, End::Right);
    g.edges_.push_back(std::move(e));
  }
  for (const auto& v : sc.vertices()) {
    GraphVertex gv;
    gv.id = v.id;
    gv.x = v.x;
    gv.interior = v.interior;
    for (const auto& er : v.ends) gv.incident.emplace_back(er.strip, er.end);
    g.vertices_.push_back(std::move(gv));
  }

  const int nv = g.num_vertices();
  const double inf = std::numeric_limits<double>::infinity();
  g.vertex_dist_.assign(static_cast<std::size_t>(nv), std::vector<double>(static_cast<std::size_t>(nv), inf));
  for (int i = 0; i < nv; ++i) g.vertex_dist_[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0.0;
  for (const auto& e : g.edges_) {
    auto& d = g.vertex_dist_;
    const auto l = static_cast<std::size_t>(e.vertex_left);
    const auto r = static_cast<std::size_t>(e.vertex_right);
    d[l][r] = std::min(d[l][r], e.length());
    d[r][l] = d[l][r];
  }
  for (int k = 0; k < nv; ++k)
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j) {
        auto& d = g.vertex_dist_;
        const double via = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] +
                           d[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        if (via < d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
          d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = via;
      }
  return g;
}

double GraphSkeleton::distance(const GraphPoint& p1, const GraphPoint& p2) const {
  if (p1.edge == p2.edge) return std::abs(p1.x - p2.x);
  const GraphEdge& e1 = edge(p1.edge);
  const GraphEdge& e2 = edge(p2.edge);
  const double to_left1 = p1.x - e1.a, to_right1 = e1.b - p1.x;
  const double to_left2 = p2.x - e2.a, to_right2 = e2.b - p2.x;
  double best = std::numeric_limits<double>::infinity();
  const std::pair<double, int> ends1[2] = {{to_left1, e1.vertex_left}, {to_right1, e1.vertex_right}};
  const std::pair<double, int> ends2[2] = {{to_left2, e2.vertex_left}, {to_right2, e2.vertex_right}};
  for (const auto& [d1, v1] : ends1)
    for (const auto& [d2, v2] : ends2)
      best = std::min(best, d1 + vertex_dist_[static_cast<std::size_t>(v1)][static_cast<std::size_t>(v2)] + d2);
  return best;
}

double GraphSkeleton::measure_nu(int e, double x_lo, double x_hi) const {
  const GraphEdge& ed = edge(e);
  if (x_lo < ed.a - 1e-9 || x_hi > ed.b + 1e-9)
    throw std::domain_error("measure_nu: interval outside the edge");
  return integrate(ed.width, std::max(x_lo, ed.a), std::min(x_hi, ed.b));
}

double GraphSkeleton::measure_nu(const std::vector<std::tuple<int, double, double>>& region) const {
  double total = 0.0;
  for (const auto& [e, lo, hi] : region) total += measure_nu(e, lo, hi);
  return total;
}

double GraphSkeleton::measure_nu_total() const {
  double total = 0.0;
  for (const auto& e : edges_) total += integrate(e.width, e.a, e.b);
  return total;
}

}  // namespace changraph
