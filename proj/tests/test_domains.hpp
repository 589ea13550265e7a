#pragma once

#include <memory>

#include "changraph/geometry.hpp"
#include "changraph/graph.hpp"

namespace changraph::testing {

/// Single strip [0, 2 pi] with h_lo = 0, h_hi = 2 + sin x.
inline DomainSpec sine_strip_spec() {
  DomainSpec spec;
  Strip s;
  s.id = 0;
  s.x_lo = 0.0;
  s.x_hi = 2.0 * 3.14159265358979323846;
  s.h_lo = HFunction::constant(0.0);
  s.h_hi = HFunction({2.0}, {{1.0, 1.0, 0.0}});
  spec.strips.push_back(s);
  return spec;
}

/// Flat strip [0, w] x [0, h].
inline DomainSpec flat_strip_spec(double w = 1.0, double h = 1.0) {
  DomainSpec spec;
  Strip s;
  s.id = 0;
  s.x_lo = 0.0;
  s.x_hi = w;
  s.h_lo = HFunction::constant(0.0);
  s.h_hi = HFunction::constant(h);
  spec.strips.push_back(s);
  return spec;
}

/// Fork with constant widths: A = [0,1]x[0,1] splitting into B = [1,2]x[0,0.4]
/// and C = [1,2]x[0.6,1] at the vertex x = 1.
inline DomainSpec fork_spec() {
  DomainSpec spec;
  Strip a;
  a.id = 0;
  a.x_lo = 0.0;
  a.x_hi = 1.0;
  a.h_lo = HFunction::constant(0.0);
  a.h_hi = HFunction::constant(1.0);
  Strip b;
  b.id = 1;
  b.x_lo = 1.0;
  b.x_hi = 2.0;
  b.h_lo = HFunction::constant(0.0);
  b.h_hi = HFunction::constant(0.4);
  Strip c;
  c.id = 2;
  c.x_lo = 1.0;
  c.x_hi = 2.0;
  c.h_lo = HFunction::constant(0.6);
  c.h_hi = HFunction::constant(1.0);
  spec.strips = {a, b, c};
  VertexSpec v;
  v.x = 1.0;
  v.ends = {{0, End::Right}, {1, End::Left}, {2, End::Left}};
  spec.vertices.push_back(v);
  return spec;
}

/// Fork with curved widths (nonzero width slopes at the vertex), used for the
/// flux-balance convergence rate.
inline DomainSpec curved_fork_spec() {
  const double pi = 3.14159265358979323846;
  DomainSpec spec;
  Strip a;
  a.id = 0;
  a.x_lo = 0.0;
  a.x_hi = 1.0;
  a.h_lo = HFunction::constant(0.0);
  a.h_hi = HFunction({1.0}, {{0.15, pi, 0.0}});  // 1 + 0.15 sin(pi x)
  Strip b;
  b.id = 1;
  b.x_lo = 1.0;
  b.x_hi = 2.0;
  b.h_lo = HFunction::constant(0.0);
  b.h_hi = HFunction({0.4}, {{0.05, pi, -pi}});  // 0.4 + 0.05 sin(pi (x-1))
  Strip c;
  c.id = 2;
  c.x_lo = 1.0;
  c.x_hi = 2.0;
  c.h_lo = HFunction({0.6}, {{-0.05, pi, -pi}});  // 0.6 - 0.05 sin(pi (x-1))
  c.h_hi = HFunction::constant(1.0);
  spec.strips = {a, b, c};
  VertexSpec v;
  v.x = 1.0;
  v.ends = {{0, End::Right}, {1, End::Left}, {2, End::Left}};
  spec.vertices.push_back(v);
  return spec;
}

inline std::shared_ptr<const StripComplex> build_complex(const DomainSpec& spec) {
  return std::make_shared<const StripComplex>(StripComplex::build(spec));
}

inline std::shared_ptr<const GraphSkeleton> build_graph_of(const StripComplex& sc) {
  return std::make_shared<const GraphSkeleton>(GraphSkeleton::build(sc));
}

}  // namespace changraph::testing
