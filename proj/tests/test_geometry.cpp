#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "changraph/geometry.hpp"
#include "test_domains.hpp"

using namespace changraph;
using namespace changraph::testing;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("h-function family evaluates with exact derivatives") {
  const HFunction h({1.0, 2.0, 3.0}, {{0.5, 2.0, 0.3}});  // 1 + 2x + 3x^2 + 0.5 sin(2x+0.3)
  const double x = 0.7;
  CHECK(h(x) == doctest::Approx(1.0 + 2 * x + 3 * x * x + 0.5 * std::sin(2 * x + 0.3)).epsilon(1e-15));
  CHECK(h.d(x) == doctest::Approx(2 + 6 * x + std::cos(2 * x + 0.3)).epsilon(1e-14));
  CHECK(h.dd(x) == doctest::Approx(6 - 2.0 * std::sin(2 * x + 0.3)).epsilon(1e-14));
  const HFunction diff = h - HFunction({0.0, 2.0}, {{0.5, 2.0, 0.3}});
  CHECK(diff(x) == doctest::Approx(1.0 + 3 * x * x).epsilon(1e-14));
}

TEST_CASE("single sine strip builds with two exterior vertices") {
  const auto sc = build_complex(sine_strip_spec());
  CHECK(sc->strips().size() == 1);
  CHECK(sc->vertices().size() == 2);
  for (const auto& v : sc->vertices()) CHECK_FALSE(v.interior);
  CHECK(sc->walls().size() == 2);  // vertical caps carry positive width
}

TEST_CASE("fork builds with one interior vertex of degree 3") {
  const auto sc = build_complex(fork_spec());
  CHECK(sc->strips().size() == 3);
  int interior = 0, exterior = 0;
  for (const auto& v : sc->vertices()) (v.interior ? interior : exterior)++;
  CHECK(interior == 1);
  CHECK(exterior == 3);
  for (const auto& v : sc->vertices())
    if (v.interior) CHECK(v.ends.size() == 3);
  // the notch wall between B and C
  bool has_notch = false;
  for (const auto& w : sc->walls())
    if (std::abs(w.x - 1.0) < 1e-12 && w.nu1 == -1 && std::abs(w.y_lo - 0.4) < 1e-9 &&
        std::abs(w.y_hi - 0.6) < 1e-9)
      has_notch = true;
  CHECK(has_notch);
}

TEST_CASE("zero-width strips are rejected") {
  DomainSpec spec = flat_strip_spec();
  spec.strips[0].h_hi = HFunction::constant(0.0);  // h_hi == h_lo
  CHECK_THROWS_AS((void)StripComplex::build(spec), std::invalid_argument);
}

TEST_CASE("overlapping strips are rejected") {
  DomainSpec spec = flat_strip_spec();
  Strip other;
  other.id = 1;
  other.x_lo = 0.5;
  other.x_hi = 1.5;
  other.h_lo = HFunction::constant(0.5);
  other.h_hi = HFunction::constant(1.5);
  spec.strips.push_back(other);
  CHECK_THROWS_AS((void)StripComplex::build(spec), std::invalid_argument);
}

TEST_CASE("disconnected complexes are rejected at build") {
  DomainSpec spec = flat_strip_spec();
  Strip other;
  other.id = 1;
  other.x_lo = 3.0;
  other.x_hi = 4.0;
  other.h_lo = HFunction::constant(0.0);
  other.h_hi = HFunction::constant(1.0);
  spec.strips.push_back(other);
  CHECK_THROWS_AS((void)StripComplex::build(spec), std::invalid_argument);
}

TEST_CASE("cross sections report per-edge components") {
  const auto sine = build_complex(sine_strip_spec());
  auto cs = sine->cross_section(kPi / 2.0);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].y_lo == doctest::Approx(0.0));
  CHECK(cs[0].y_hi == doctest::Approx(3.0));
  CHECK(cs[0].length == doctest::Approx(3.0).epsilon(1e-12));

  const auto fork = build_complex(fork_spec());
  cs = fork->cross_section(1.5);
  REQUIRE(cs.size() == 2);
  CHECK(cs[0].length == doctest::Approx(0.4));
  CHECK(cs[1].length == doctest::Approx(0.4));
  cs = fork->cross_section(0.5);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].length == doctest::Approx(1.0));
  CHECK(fork->cross_section(5.0).empty());
}

TEST_CASE("containment with boundary tolerance") {
  const auto sine = build_complex(sine_strip_spec());
  CHECK(sine->contains({kPi / 2.0, 1.5}));
  CHECK_FALSE(sine->contains({kPi / 2.0, 3.1}));
  CHECK(sine->contains({kPi / 2.0, 3.0}));  // exactly on the boundary
  const auto fork = build_complex(fork_spec());
  CHECK_FALSE(fork->contains({1.5, 0.5}));  // the notch
  CHECK(fork->contains({1.0, 0.5}));        // the vertex wall belongs to the closure
}

TEST_CASE("boundary normals follow the curve formula and point inward") {
  const auto flat = build_complex(flat_strip_spec(4.0, 1.0));
  const BoundaryPoint lower = flat->boundary_normal(0, Side::Lower, 1.7);
  CHECK(lower.normal.x() == doctest::Approx(0.0));
  CHECK(lower.normal.y() == doctest::Approx(1.0));

  const auto sine = build_complex(sine_strip_spec());
  const BoundaryPoint up = sine->boundary_normal(0, Side::Upper, 0.0);
  CHECK(up.normal.x() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(up.normal.y() == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));

  // lower side with slope -1: nu = (1, 1)/sqrt(2), verified inward
  DomainSpec spec;
  Strip s;
  s.id = 0;
  s.x_lo = 0.0;
  s.x_hi = 1.0;
  s.h_lo = HFunction({0.0, -1.0});  // -x
  s.h_hi = HFunction::constant(2.0);
  spec.strips.push_back(s);
  const auto sloped = build_complex(spec);
  const BoundaryPoint bp = sloped->boundary_normal(0, Side::Lower, 0.5);
  CHECK(bp.normal.x() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(bp.normal.y() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  for (double t : {1e-7, 1e-6}) CHECK(sloped->contains(bp.position + t * bp.normal));
}

TEST_CASE("normals at interior interfaces are refused") {
  // A = [0,1] x [0,1] continues into the wider B = [1,2] x [-1,2]; the end
  // points of A's curves at x = 1 are interfaces, not boundary.
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
  b.h_lo = HFunction::constant(-1.0);
  b.h_hi = HFunction::constant(2.0);
  spec.strips = {a, b};
  VertexSpec v;
  v.x = 1.0;
  v.ends = {{0, End::Right}, {1, End::Left}};
  spec.vertices.push_back(v);
  const auto sc = build_complex(spec);
  CHECK_THROWS_AS((void)sc->boundary_normal(0, Side::Upper, 1.0), std::domain_error);
  CHECK_NOTHROW((void)sc->boundary_normal(0, Side::Upper, 0.5));
  CHECK_NOTHROW((void)sc->boundary_normal(1, Side::Lower, 1.0));
}

TEST_CASE("projection to the graph") {
  const auto sine = build_complex(sine_strip_spec());
  GraphPoint gp = sine->project_to_graph({1.0, 0.7});
  CHECK(gp.edge == 0);
  CHECK(gp.x == doctest::Approx(1.0));
  CHECK(gp.vertex == -1);

  const auto fork = build_complex(fork_spec());
  gp = fork->project_to_graph({1.5, 0.2});
  CHECK(gp.edge == 1);
  gp = fork->project_to_graph({1.0, 0.5});
  CHECK(gp.vertex == 0);  // the declared vertex comes first
  CHECK_THROWS_AS((void)fork->project_to_graph({1.5, 0.5}), std::domain_error);
}

TEST_CASE("projection is constant in y on a section") {
  const auto sine = build_complex(sine_strip_spec());
  const double x = 2.2;
  const auto cs = sine->cross_section(x);
  REQUIRE(cs.size() == 1);
  for (int k = 0; k <= 10; ++k) {
    const double y = cs[0].y_lo + (cs[0].y_hi - cs[0].y_lo) * k / 10.0;
    const GraphPoint gp = sine->project_to_graph({x, y});
    CHECK(gp.edge == 0);
    CHECK(gp.x == doctest::Approx(x));
  }
}

TEST_CASE("reflection against a flat face reads off the local time") {
  const auto flat = build_complex(flat_strip_spec());
  auto fix = flat->reflect_into_domain({0.5, -0.01}, 1.0);
  REQUIRE(fix.has_value());
  CHECK(fix->p_in.x() == doctest::Approx(0.5));
  CHECK(fix->p_in.y() == doctest::Approx(0.0));
  CHECK(fix->bp.side == Side::Lower);
  CHECK(fix->dphi == doctest::Approx(0.01).epsilon(1e-12));

  // sigma nu scales the push: dphi = eps^2 * violation on a flat face
  fix = flat->reflect_into_domain({0.5, -0.01}, 0.1);
  REQUIRE(fix.has_value());
  CHECK(fix->dphi == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(fix->p_in.y() == doctest::Approx(0.0));
}

TEST_CASE("reflection against a sloped face solves the face equation") {
  // upper boundary y = x with slope 1 near the exit point
  DomainSpec spec;
  Strip s;
  s.id = 0;
  s.x_lo = 0.5;
  s.x_hi = 2.0;
  s.h_lo = HFunction::constant(0.0);
  s.h_hi = HFunction({0.0, 1.0});  // y = x
  spec.strips.push_back(s);
  const auto sc = build_complex(spec);

  const Vec2 p_out{1.0, 1.05};
  const double eps = 1.0;
  auto fix = sc->reflect_into_domain(p_out, eps);
  REQUIRE(fix.has_value());

  // independent brute-force 1-d root-find on the face equation along sigma*nu
  const Vec2 nu = sc->boundary_normal(0, Side::Upper, 1.0).normal;
  const Vec2 dir{nu.x(), nu.y() / (eps * eps)};
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const Vec2 q = p_out + mid * dir;
    (q.y() - q.x() > 0.0 ? lo : hi) = mid;
  }
  CHECK(fix->dphi == doctest::Approx(hi).epsilon(1e-9));
  CHECK(sc->contains(fix->p_in));
  const Vec2 recon = p_out + fix->dphi * Vec2{fix->bp.normal.x(), fix->bp.normal.y() / (eps * eps)};
  CHECK((fix->p_in - recon).norm() <= 1e-10);
}

TEST_CASE("reflection at a vertical wall cap") {
  const auto sine = build_complex(sine_strip_spec());
  auto fix = sine->reflect_into_domain({-0.01, 1.0}, 0.2);
  REQUIRE(fix.has_value());
  CHECK(fix->p_in.x() == doctest::Approx(0.0));
  CHECK(fix->p_in.y() == doctest::Approx(1.0));
  CHECK(fix->dphi == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(fix->bp.normal.x() == doctest::Approx(1.0));
}

TEST_CASE("pinched caps build without walls") {
  DomainSpec spec;
  Strip s;
  s.id = 0;
  s.x_lo = 0.0;
  s.x_hi = 1.0;
  s.h_lo = HFunction::constant(0.0);
  s.h_hi = HFunction({1.0, -1.0});  // 1 - x, pinches at x = 1
  spec.strips.push_back(s);
  const auto sc = build_complex(spec);
  CHECK(sc->pinched_end(0, End::Right));
  CHECK_FALSE(sc->pinched_end(0, End::Left));
  CHECK(sc->walls().size() == 1);  // only the left cap
  CHECK(sc->cross_section(1.0).empty());
}

TEST_CASE("domain spec JSON round-trips bit-exactly") {
  const DomainSpec spec = sine_strip_spec();
  const std::string path =
      (std::filesystem::temp_directory_path() / "changraph_domain_rt.json").string();
  save_domain_spec(spec, path);
  const DomainSpec back = load_domain_spec(path);
  REQUIRE(back.strips.size() == spec.strips.size());
  CHECK(back.strips[0].x_hi == spec.strips[0].x_hi);  // bitwise
  REQUIRE(back.strips[0].h_hi.sins().size() == 1);
  CHECK(back.strips[0].h_hi.sins()[0].a == spec.strips[0].h_hi.sins()[0].a);
  CHECK(back.strips[0].h_hi.poly()[0] == spec.strips[0].h_hi.poly()[0]);
  const std::string again = domain_spec_to_json(back);
  CHECK(again == domain_spec_to_json(spec));
  std::filesystem::remove(path);
  CHECK_NOTHROW((void)StripComplex::build(back));
}

TEST_CASE("fork domain JSON round-trip rebuilds the same complex") {
  const DomainSpec spec = curved_fork_spec();
  const std::string text = domain_spec_to_json(spec);
  const DomainSpec back = parse_domain_spec_json(text);
  const auto sc = build_complex(back);
  CHECK(sc->vertices().size() == 4);
  CHECK(domain_spec_to_json(back) == text);
}
