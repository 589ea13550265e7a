#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "changraph/hfunction.hpp"

namespace changraph {

using Vec2 = Eigen::Vector2d;

/// Which end of a strip's x-range.
enum class End { Left, Right };

/// Which boundary curve of a strip.
enum class Side { Lower, Upper };

struct Strip {
  int id = 0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  HFunction h_lo;
  HFunction h_hi;

  double width(double x) const { return h_hi(x) - h_lo(x); }
  double length() const { return x_hi - x_lo; }
};

/// Reference to one end of one strip, used in vertex merge groups.
struct EndRef {
  int strip = 0;
  End end = End::Left;
  bool operator==(const EndRef&) const = default;
};

/// A vertex of the domain description: the x-value where the referenced strip
/// ends meet, merged into a single point of the graph.
struct VertexSpec {
  double x = 0.0;
  std::vector<EndRef> ends;
};

/// User-supplied strip decomposition of the domain.
struct DomainSpec {
  std::vector<Strip> strips;
  std::vector<VertexSpec> vertices;
};

struct BoundaryPoint {
  int strip_id = -1;
  Side side = Side::Lower;
  double x = 0.0;
  Vec2 position{0.0, 0.0};
  Vec2 normal{0.0, 0.0};  // unit, pointing into the domain
};

/// Point on the identification graph: edge id and x-coordinate. `vertex` is
/// the vertex id when the point coincides with a vertex, otherwise -1 (at a
/// vertex the edge id is one of the incident edges).
struct GraphPoint {
  int edge = -1;
  double x = 0.0;
  int vertex = -1;
};

/// Vertical boundary segment {x} x [y_lo, y_hi]; nu1 = +-1 is the first
/// component of the inward normal (the second vanishes on such segments).
struct WallSegment {
  double x = 0.0;
  double y_lo = 0.0;
  double y_hi = 0.0;
  int nu1 = 0;
  int vertex = -1;
};

/// Resolved vertex after validation.
struct Vertex {
  int id = -1;
  double x = 0.0;
  bool interior = false;  // degree >= 2
  std::vector<EndRef> ends;
};

struct SectionComponent {
  int edge = -1;  // edge ids coincide with strip ids
  double y_lo = 0.0;
  double y_hi = 0.0;
  double length = 0.0;
};

struct ReflectResult {
  Vec2 p_in{0.0, 0.0};
  BoundaryPoint bp;
  double dphi = 0.0;
  int iterations = 0;
};

/// Immutable validated strip complex: the domain G as a union of smooth
/// strips plus the vertex identifications. All queries are pure and the
/// object is safe to share across threads.
class StripComplex {
public:
  /// Containment tolerance at the boundary.
  static constexpr double kBoundaryTol = 1e-12;
  static constexpr int kMaxReflectIterations = 8;

  /// Validates the description on a sample grid (default 1000 points per
  /// strip) and builds the complex. Throws std::invalid_argument when widths
  /// are non-positive in a strip interior, strips overlap, the complex is
  /// disconnected, or the single-sign condition fails at a vertex.
  static StripComplex build(const DomainSpec& spec, int samples_per_strip = 1000);

  const std::vector<Strip>& strips() const { return strips_; }
  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<double>& vertex_xs() const { return vertex_xs_; }
  const std::vector<WallSegment>& walls() const { return walls_; }

  const Strip& strip(int id) const { return strips_.at(static_cast<std::size_t>(id)); }

  /// Vertex id attached to the given strip end.
  int vertex_at(int strip_id, End end) const;

  /// True when the strip end is a cap where the width vanishes (no wall).
  bool pinched_end(int strip_id, End end) const;

  bool contains(const Vec2& p) const;

  /// All connected components of the cross-section C(x), one per live strip.
  std::vector<SectionComponent> cross_section(double x) const;

  /// Inward unit normal on a genuine boundary curve,
  ///   nu(x, h_i(x)) = (1+h_i'(x)^2)^{-1/2} ((-1)^i h_i'(x), (-1)^{i+1}),
  /// with i = 1 the lower and i = 2 the upper curve.
  BoundaryPoint boundary_normal(int strip_id, Side side, double x) const;

  /// The identification map Pi. Throws if p is outside the closed domain.
  GraphPoint project_to_graph(const Vec2& p) const;

  /// Pushes an exterior point back into the closed domain along sigma*nu with
  /// sigma = diag(1, 1/eps^2), locating the violated face, solving the 1-d
  /// push-back along the fixed direction, and iterating (at most 8 times)
  /// when the corrected point still violates another face. dphi is the total
  /// multiplier of sigma*nu, i.e. the local-time increment. Empty when no
  /// correction is found within the budget (the step was too large).
  std::optional<ReflectResult> reflect_into_domain(const Vec2& p_out, double eps) const;

  /// Total x-extent [min x_lo, max x_hi].
  std::pair<double, double> x_range() const { return {x_min_, x_max_}; }

private:
  StripComplex() = default;

  struct FaceFix {
    Vec2 p{0.0, 0.0};
    BoundaryPoint bp;
    double dphi = 0.0;
    double dist2 = 0.0;
    bool valid = false;
  };

  FaceFix fix_against_curve(const Vec2& p, int strip_id, Side side, double eps) const;
  FaceFix fix_against_wall(const Vec2& p, const WallSegment& w) const;

  std::vector<Strip> strips_;
  std::vector<Vertex> vertices_;
  std::vector<double> vertex_xs_;
  std::vector<WallSegment> walls_;
  // per strip: vertex id at [Left, Right] end
  std::vector<std::array<int, 2>> end_vertex_;
  std::vector<std::array<bool, 2>> end_pinched_;
  double x_min_ = 0.0;
  double x_max_ = 0.0;
};

/// Reads/writes the documented JSON schema for domain descriptions.
DomainSpec load_domain_spec(const std::string& path);
void save_domain_spec(const DomainSpec& spec, const std::string& path);
DomainSpec parse_domain_spec_json(const std::string& text);
std::string domain_spec_to_json(const DomainSpec& spec);

}  // namespace changraph
