#include "changraph/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace changraph {
namespace {

constexpr double kSnapTol = 1e-9;  // matching strip ends to vertex x-values

struct Interval {
  double lo, hi;
};

std::vector<Interval> merge_intervals(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& it : v) {
    if (!out.empty() && it.lo <= out.back().hi + kSnapTol)
      out.back().hi = std::max(out.back().hi, it.hi);
    else
      out.push_back(it);
  }
  return out;
}

// Parts of a not covered by b.
std::vector<Interval> subtract_intervals(const std::vector<Interval>& a,
                                         const std::vector<Interval>& b) {
  std::vector<Interval> out;
  for (const auto& ai : a) {
    double cur = ai.lo;
    for (const auto& bi : b) {
      if (bi.hi <= cur || bi.lo >= ai.hi) continue;
      if (bi.lo > cur) out.push_back({cur, bi.lo});
      cur = std::max(cur, bi.hi);
    }
    if (cur < ai.hi) out.push_back({cur, ai.hi});
  }
  std::vector<Interval> filtered;
  for (const auto& it : out)
    if (it.hi - it.lo > kSnapTol) filtered.push_back(it);
  return filtered;
}

double end_x(const Strip& s, End e) { return e == End::Left ? s.x_lo : s.x_hi; }

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("strip complex: " + msg); }

}  // namespace

StripComplex StripComplex::build(const DomainSpec& spec, int samples_per_strip) {
  if (spec.strips.empty()) fail("no strips");
  StripComplex sc;
  sc.strips_ = spec.strips;
  const int ns = static_cast<int>(sc.strips_.size());

  for (int i = 0; i < ns; ++i) {
    const Strip& s = sc.strips_[static_cast<std::size_t>(i)];
    if (s.id != i) fail("strip ids must be consecutive 0..n-1 in order");
    if (!(s.x_hi > s.x_lo)) fail("strip " + std::to_string(i) + " has empty x-range");
    for (int k = 0; k <= samples_per_strip; ++k) {
      const double t = static_cast<double>(k) / samples_per_strip;
      const double x = s.x_lo + t * (s.x_hi - s.x_lo);
      const double w = s.width(x);
      if (!std::isfinite(w) || !std::isfinite(s.h_lo.d(x)) || !std::isfinite(s.h_hi.d(x)) ||
          !std::isfinite(s.h_lo.dd(x)) || !std::isfinite(s.h_hi.dd(x)))
        fail("strip " + std::to_string(i) + " has non-finite h data");
      const bool interior = k > 0 && k < samples_per_strip;
      if (interior && w <= 0.0) fail("strip " + std::to_string(i) + " has non-positive width in its interior");
      if (!interior && w < -kSnapTol) fail("strip " + std::to_string(i) + " has negative width at an endpoint");
    }
  }

  // Pairwise overlap: distinct strips may share only vertical segments at
  // common end x-values.
  for (int i = 0; i < ns; ++i) {
    for (int j = i + 1; j < ns; ++j) {
      const Strip& a = sc.strips_[static_cast<std::size_t>(i)];
      const Strip& b = sc.strips_[static_cast<std::size_t>(j)];
      const double lo = std::max(a.x_lo, b.x_lo);
      const double hi = std::min(a.x_hi, b.x_hi);
      if (hi - lo <= kSnapTol) continue;
      for (int k = 1; k < samples_per_strip; ++k) {
        const double x = lo + (hi - lo) * static_cast<double>(k) / samples_per_strip;
        const bool disjoint = a.h_hi(x) < b.h_lo(x) || b.h_hi(x) < a.h_lo(x);
        if (!disjoint)
          fail("strips " + std::to_string(i) + " and " + std::to_string(j) + " overlap near x=" +
               std::to_string(x));
      }
    }
  }

  // Resolve declared vertices.
  std::vector<std::array<int, 2>> end_vertex(static_cast<std::size_t>(ns), {-1, -1});
  std::vector<std::array<bool, 2>> end_pinched(static_cast<std::size_t>(ns), {false, false});
  for (int i = 0; i < ns; ++i) {
    const Strip& s = sc.strips_[static_cast<std::size_t>(i)];
    end_pinched[static_cast<std::size_t>(i)][0] = s.width(s.x_lo) <= kSnapTol;
    end_pinched[static_cast<std::size_t>(i)][1] = s.width(s.x_hi) <= kSnapTol;
  }

  for (const auto& vs : spec.vertices) {
    if (vs.ends.empty()) fail("vertex with no incident strip ends");
    Vertex v;
    v.id = static_cast<int>(sc.vertices_.size());
    v.x = vs.x;
    v.ends = vs.ends;
    for (const auto& e : vs.ends) {
      if (e.strip < 0 || e.strip >= ns) fail("vertex references unknown strip");
      const Strip& s = sc.strips_[static_cast<std::size_t>(e.strip)];
      if (std::abs(end_x(s, e.end) - vs.x) > kSnapTol)
        fail("vertex x does not match the referenced strip end");
      auto& slot = end_vertex[static_cast<std::size_t>(e.strip)][e.end == End::Left ? 0 : 1];
      if (slot != -1) fail("strip end referenced by more than one vertex");
      slot = v.id;
      if (vs.ends.size() >= 2 && end_pinched[static_cast<std::size_t>(e.strip)][e.end == End::Left ? 0 : 1])
        fail("degenerate (zero-width) strip end cannot join an interior vertex");
    }
    v.interior = v.ends.size() >= 2;
    sc.vertices_.push_back(std::move(v));
  }

  // Unreferenced ends become exterior cap vertices.
  for (int i = 0; i < ns; ++i) {
    for (int e = 0; e < 2; ++e) {
      if (end_vertex[static_cast<std::size_t>(i)][e] != -1) continue;
      Vertex v;
      v.id = static_cast<int>(sc.vertices_.size());
      v.x = end_x(sc.strips_[static_cast<std::size_t>(i)], e == 0 ? End::Left : End::Right);
      v.ends = {{i, e == 0 ? End::Left : End::Right}};
      v.interior = false;
      end_vertex[static_cast<std::size_t>(i)][e] = v.id;
      sc.vertices_.push_back(std::move(v));
    }
  }
  sc.end_vertex_ = end_vertex;
  sc.end_pinched_ = end_pinched;

  // Ends meeting at a common x in different vertices must have disjoint
  // sections, otherwise the identification is inconsistent.
  for (int i = 0; i < ns; ++i) {
    for (int ei = 0; ei < 2; ++ei) {
      for (int j = 0; j < ns; ++j) {
        for (int ej = 0; ej < 2; ++ej) {
          if (i == j && ei == ej) continue;
          const int vi = end_vertex[static_cast<std::size_t>(i)][ei];
          const int vj = end_vertex[static_cast<std::size_t>(j)][ej];
          if (vi == vj) continue;
          const Strip& a = sc.strips_[static_cast<std::size_t>(i)];
          const Strip& b = sc.strips_[static_cast<std::size_t>(j)];
          const double xa = ei == 0 ? a.x_lo : a.x_hi;
          const double xb = ej == 0 ? b.x_lo : b.x_hi;
          if (std::abs(xa - xb) > kSnapTol) continue;
          const double lo = std::max(a.h_lo(xa), b.h_lo(xb));
          const double hi = std::min(a.h_hi(xa), b.h_hi(xb));
          if (hi - lo > kSnapTol)
            fail("strip ends share a cross-section at x=" + std::to_string(xa) +
                 " but belong to different vertices");
        }
      }
    }
  }

  // Wall segments and the single-sign condition at each vertex.
  for (const auto& v : sc.vertices_) {
    std::vector<Interval> from_left, from_right;
    for (const auto& e : v.ends) {
      const Strip& s = sc.strips_[static_cast<std::size_t>(e.strip)];
      const double x = end_x(s, e.end);
      Interval sec{s.h_lo(x), s.h_hi(x)};
      if (sec.hi - sec.lo <= kSnapTol) continue;  // pinched cap, no wall
      (e.end == End::Right ? from_left : from_right).push_back(sec);
    }
    from_left = merge_intervals(from_left);
    from_right = merge_intervals(from_right);
    const auto wall_minus = subtract_intervals(from_left, from_right);  // domain on the left
    const auto wall_plus = subtract_intervals(from_right, from_left);   // domain on the right
    if (!wall_minus.empty() && !wall_plus.empty())
      fail("vertex at x=" + std::to_string(v.x) +
           " has boundary walls facing both directions (single-sign condition fails)");
    for (const auto& w : wall_minus) sc.walls_.push_back({v.x, w.lo, w.hi, -1, v.id});
    for (const auto& w : wall_plus) sc.walls_.push_back({v.x, w.lo, w.hi, +1, v.id});
  }

  // Connectivity through interior vertices.
  UnionFind uf(ns);
  for (const auto& v : sc.vertices_)
    for (std::size_t k = 1; k < v.ends.size(); ++k) uf.unite(v.ends[0].strip, v.ends[k].strip);
  for (int i = 1; i < ns; ++i)
    if (uf.find(i) != uf.find(0)) fail("strip complex is disconnected");

  for (const auto& v : sc.vertices_) sc.vertex_xs_.push_back(v.x);
  std::sort(sc.vertex_xs_.begin(), sc.vertex_xs_.end());
  sc.vertex_xs_.erase(std::unique(sc.vertex_xs_.begin(), sc.vertex_xs_.end(),
                                  [](double a, double b) { return std::abs(a - b) <= kSnapTol; }),
                      sc.vertex_xs_.end());

  sc.x_min_ = std::numeric_limits<double>::infinity();
  sc.x_max_ = -std::numeric_limits<double>::infinity();
  for (const auto& s : sc.strips_) {
    sc.x_min_ = std::min(sc.x_min_, s.x_lo);
    sc.x_max_ = std::max(sc.x_max_, s.x_hi);
  }

  // Inwardness spot-check of the normal formula against containment.
  for (const auto& s : sc.strips_) {
    for (int k = 1; k < 40; ++k) {
      const double x = s.x_lo + (s.x_hi - s.x_lo) * k / 40.0;
      if (s.width(x) < 1e-6) continue;
      for (Side side : {Side::Lower, Side::Upper}) {
        const BoundaryPoint bp = sc.boundary_normal(s.id, side, x);
        const Vec2 probe = bp.position + 1e-7 * bp.normal;
        if (!sc.contains(probe))
          fail("inward normal check failed on strip " + std::to_string(s.id));
      }
    }
  }

  return sc;
}

int StripComplex::vertex_at(int strip_id, End end) const {
  return end_vertex_.at(static_cast<std::size_t>(strip_id))[end == End::Left ? 0 : 1];
}

bool StripComplex::pinched_end(int strip_id, End end) const {
  return end_pinched_.at(static_cast<std::size_t>(strip_id))[end == End::Left ? 0 : 1];
}

bool StripComplex::contains(const Vec2& p) const {
  for (const auto& s : strips_) {
    if (p.x() < s.x_lo - kBoundaryTol || p.x() > s.x_hi + kBoundaryTol) continue;
    const double xc = std::clamp(p.x(), s.x_lo, s.x_hi);
    if (p.y() >= s.h_lo(xc) - kBoundaryTol && p.y() <= s.h_hi(xc) + kBoundaryTol) return true;
  }
  return false;
}

std::vector<SectionComponent> StripComplex::cross_section(double x) const {
  std::vector<SectionComponent> out;
  for (const auto& s : strips_) {
    if (x < s.x_lo - kBoundaryTol || x > s.x_hi + kBoundaryTol) continue;
    const double xc = std::clamp(x, s.x_lo, s.x_hi);
    const double lo = s.h_lo(xc), hi = s.h_hi(xc);
    if (hi - lo > kBoundaryTol) out.push_back({s.id, lo, hi, hi - lo});
  }
  std::sort(out.begin(), out.end(),
            [](const SectionComponent& a, const SectionComponent& b) { return a.y_lo < b.y_lo; });
  return out;
}

BoundaryPoint StripComplex::boundary_normal(int strip_id, Side side, double x) const {
  const Strip& s = strip(strip_id);
  if (x < s.x_lo - kSnapTol || x > s.x_hi + kSnapTol)
    throw std::domain_error("boundary_normal: x outside the strip range");
  const double xc = std::clamp(x, s.x_lo, s.x_hi);

  // At an end shared with an interior vertex, the curve point may be buried
  // strictly inside the neighboring cross-section; it is then an interface,
  // not boundary.
  for (int e = 0; e < 2; ++e) {
    const double xe = e == 0 ? s.x_lo : s.x_hi;
    if (std::abs(xc - xe) > kSnapTol) continue;
    const int vid = end_vertex_[static_cast<std::size_t>(strip_id)][e];
    const Vertex& v = vertices_[static_cast<std::size_t>(vid)];
    if (!v.interior) continue;
    const double y = (side == Side::Lower ? s.h_lo : s.h_hi)(xc);
    for (const auto& er : v.ends) {
      if (er.strip == strip_id) continue;
      const Strip& o = strips_[static_cast<std::size_t>(er.strip)];
      const double xo = end_x(o, er.end);
      if (y > o.h_lo(xo) + kSnapTol && y < o.h_hi(xo) - kSnapTol)
        throw std::domain_error("boundary_normal: requested face is an interior interface");
    }
  }

  BoundaryPoint bp;
  bp.strip_id = strip_id;
  bp.side = side;
  bp.x = xc;
  if (side == Side::Lower) {
    const double hp = s.h_lo.d(xc);
    const double c = 1.0 / std::sqrt(1.0 + hp * hp);
    bp.position = {xc, s.h_lo(xc)};
    bp.normal = {-c * hp, c};
  } else {
    const double hp = s.h_hi.d(xc);
    const double c = 1.0 / std::sqrt(1.0 + hp * hp);
    bp.position = {xc, s.h_hi(xc)};
    bp.normal = {c * hp, -c};
  }
  return bp;
}

GraphPoint StripComplex::project_to_graph(const Vec2& p) const {
  for (const auto& s : strips_) {
    if (p.x() < s.x_lo - kBoundaryTol || p.x() > s.x_hi + kBoundaryTol) continue;
    const double xc = std::clamp(p.x(), s.x_lo, s.x_hi);
    if (p.y() < s.h_lo(xc) - kBoundaryTol || p.y() > s.h_hi(xc) + kBoundaryTol) continue;
    GraphPoint gp;
    gp.edge = s.id;
    gp.x = xc;
    if (std::abs(xc - s.x_lo) <= kBoundaryTol)
      gp.vertex = vertex_at(s.id, End::Left);
    else if (std::abs(xc - s.x_hi) <= kBoundaryTol)
      gp.vertex = vertex_at(s.id, End::Right);
    return gp;
  }
  throw std::domain_error("project_to_graph: point is outside the closed domain");
}

StripComplex::FaceFix StripComplex::fix_against_curve(const Vec2& p, int strip_id, Side side,
                                                      double eps) const {
  FaceFix fix;
  const Strip& s = strips_[static_cast<std::size_t>(strip_id)];
  const double xc = std::clamp(p.x(), s.x_lo, s.x_hi);
  const HFunction& h = (side == Side::Lower) ? s.h_lo : s.h_hi;
  const double viol = (side == Side::Lower) ? h(xc) - p.y() : p.y() - h(xc);
  if (viol <= kBoundaryTol) return fix;

  const BoundaryPoint bp = [&] {
    BoundaryPoint b;
    b.strip_id = strip_id;
    b.side = side;
    b.x = xc;
    const double hp = h.d(xc);
    const double c = 1.0 / std::sqrt(1.0 + hp * hp);
    b.position = {xc, h(xc)};
    b.normal = (side == Side::Lower) ? Vec2{-c * hp, c} : Vec2{c * hp, -c};
    return b;
  }();
  const double inv_eps2 = (1.0 / eps) * (1.0 / eps);
  const Vec2 dir{bp.normal.x(), inv_eps2 * bp.normal.y()};

  // g(t) = signed violation after pushing by t along sigma*nu; g(0) < 0,
  // g is increasing in t for the violated side.
  const auto g = [&](double t) {
    const double x = std::clamp(p.x() + dir.x() * t, s.x_lo, s.x_hi);
    const double y = p.y() + dir.y() * t;
    return (side == Side::Lower) ? y - h(x) : h(x) - y;
  };

  double t = viol / std::abs(dir.y());  // exact for a flat face
  if (!(h.sins().empty() && h.poly().size() <= 1)) {
    // Newton from the flat-face estimate, with a bisection fallback.
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
      const double gv = g(t);
      if (std::abs(gv) <= 1e-13 * (1.0 + std::abs(p.y()))) {
        converged = true;
        break;
      }
      const double x = std::clamp(p.x() + dir.x() * t, s.x_lo, s.x_hi);
      const double slope = (side == Side::Lower) ? dir.y() - h.d(x) * dir.x()
                                                 : h.d(x) * dir.x() - dir.y();
      if (slope <= 0.0) break;
      const double tn = t - gv / slope;
      if (!(tn > 0.0) || !std::isfinite(tn)) break;
      t = tn;
    }
    if (!converged) {
      double lo = 0.0, hi = viol / std::abs(dir.y());
      int guard = 0;
      while (g(hi) < 0.0 && guard++ < 64) hi *= 2.0;
      if (g(hi) < 0.0) return fix;
      for (int it = 0; it < 120; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
      }
      t = hi;
    }
  }
  if (!(t > 0.0) || !std::isfinite(t)) return fix;
  fix.p = p + t * dir;
  fix.bp = bp;
  fix.dphi = t;
  fix.dist2 = (fix.p - p).squaredNorm();
  fix.valid = true;
  return fix;
}

StripComplex::FaceFix StripComplex::fix_against_wall(const Vec2& p, const WallSegment& w) const {
  FaceFix fix;
  const double viol = (w.nu1 > 0) ? w.x - p.x() : p.x() - w.x;
  if (viol <= kBoundaryTol) return fix;
  if (p.y() < w.y_lo - kBoundaryTol || p.y() > w.y_hi + kBoundaryTol) return fix;
  fix.p = {w.x, p.y()};
  fix.bp.strip_id = -1;
  fix.bp.x = w.x;
  fix.bp.position = fix.p;
  fix.bp.normal = {static_cast<double>(w.nu1), 0.0};
  fix.dphi = viol;  // |sigma*nu| = 1 along a wall
  fix.dist2 = viol * viol;
  fix.valid = true;
  return fix;
}

std::optional<ReflectResult> StripComplex::reflect_into_domain(const Vec2& p_out, double eps) const {
  ReflectResult res;
  Vec2 p = p_out;
  for (int iter = 0; iter <= kMaxReflectIterations; ++iter) {
    if (contains(p)) {
      res.p_in = p;
      res.iterations = iter;
      return res;
    }
    FaceFix best;
    best.dist2 = std::numeric_limits<double>::infinity();
    for (const auto& s : strips_) {
      if (p.x() < s.x_lo - 1.0 || p.x() > s.x_hi + 1.0) continue;
      for (Side side : {Side::Lower, Side::Upper}) {
        FaceFix f = fix_against_curve(p, s.id, side, eps);
        if (f.valid && f.dist2 < best.dist2) best = f;
      }
    }
    for (const auto& w : walls_) {
      FaceFix f = fix_against_wall(p, w);
      if (f.valid && f.dist2 < best.dist2) best = f;
    }
    if (!best.valid) {
      // Corner fallback: snap x toward the nearest vertex plane and retry.
      double bestdx = std::numeric_limits<double>::infinity();
      double target = 0.0;
      for (double xv : vertex_xs_) {
        const double dx = std::abs(p.x() - xv);
        if (dx < bestdx) {
          bestdx = dx;
          target = xv;
        }
      }
      if (!std::isfinite(bestdx) || bestdx <= kBoundaryTol) return std::nullopt;
      res.dphi += bestdx;
      p.x() = target;
      continue;
    }
    p = best.p;
    res.dphi += best.dphi;
    res.bp = best.bp;
  }
  if (contains(p)) {
    res.p_in = p;
    res.iterations = kMaxReflectIterations;
    return res;
  }
  return std::nullopt;
}

// --------------------------------------------------------------------------
// JSON schema (documented in the README):
// {
//   "strips": [ {"id":0, "x_lo":..., "x_hi":...,
//                "h_lo": {"poly":[...], "sin":[{"a":..,"b":..,"c":..}, ...]},
//                "h_hi": {...}} ],
//   "vertices": [ {"x":..., "ends":[{"strip":0,"end":"right"}, ...]} ]
// }
// "sin" and "vertices" may be omitted. Doubles round-trip bit-exactly.
// --------------------------------------------------------------------------

namespace {

using nlohmann::json;

HFunction hfunction_from_json(const json& j) {
  std::vector<double> poly;
  if (j.contains("poly")) poly = j.at("poly").get<std::vector<double>>();
  std::vector<SinTerm> sins;
  if (j.contains("sin"))
    for (const auto& t : j.at("sin"))
      sins.push_back({t.at("a").get<double>(), t.at("b").get<double>(), t.at("c").get<double>()});
  return HFunction(std::move(poly), std::move(sins));
}

json hfunction_to_json(const HFunction& h) {
  json j;
  j["poly"] = h.poly();
  if (!h.sins().empty()) {
    json terms = json::array();
    for (const auto& t : h.sins()) terms.push_back({{"a", t.a}, {"b", t.b}, {"c", t.c}});
    j["sin"] = terms;
  }
  return j;
}

}  // namespace

DomainSpec parse_domain_spec_json(const std::string& text) {
  const json j = json::parse(text);
  DomainSpec spec;
  for (const auto& js : j.at("strips")) {
    Strip s;
    s.id = js.at("id").get<int>();
    s.x_lo = js.at("x_lo").get<double>();
    s.x_hi = js.at("x_hi").get<double>();
    s.h_lo = hfunction_from_json(js.at("h_lo"));
    s.h_hi = hfunction_from_json(js.at("h_hi"));
    spec.strips.push_back(std::move(s));
  }
  if (j.contains("vertices")) {
    for (const auto& jv : j.at("vertices")) {
      VertexSpec v;
      v.x = jv.at("x").get<double>();
      for (const auto& je : jv.at("ends")) {
        EndRef e;
        e.strip = je.at("strip").get<int>();
        const std::string end = je.at("end").get<std::string>();
        if (end == "left")
          e.end = End::Left;
        else if (end == "right")
          e.end = End::Right;
        else
          throw std::invalid_argument("domain spec: end must be 'left' or 'right'");
        v.ends.push_back(e);
      }
      spec.vertices.push_back(std::move(v));
    }
  }
  return spec;
}

std::string domain_spec_to_json(const DomainSpec& spec) {
  json j;
  j["strips"] = json::array();
  for (const auto& s : spec.strips) {
    json js;
    js["id"] = s.id;
    js["x_lo"] = s.x_lo;
    js["x_hi"] = s.x_hi;
    js["h_lo"] = hfunction_to_json(s.h_lo);
    js["h_hi"] = hfunction_to_json(s.h_hi);
    j["strips"].push_back(js);
  }
  if (!spec.vertices.empty()) {
    j["vertices"] = json::array();
    for (const auto& v : spec.vertices) {
      json jv;
      jv["x"] = v.x;
      jv["ends"] = json::array();
      for (const auto& e : v.ends)
        jv["ends"].push_back({{"strip", e.strip}, {"end", e.end == End::Left ? "left" : "right"}});
      j["vertices"].push_back(jv);
    }
  }
  return j.dump(2);
}

DomainSpec load_domain_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open domain spec file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_domain_spec_json(ss.str());
}

void save_domain_spec(const DomainSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write domain spec file: " + path);
  out << domain_spec_to_json(spec) << "\n";
}

}  // namespace changraph
