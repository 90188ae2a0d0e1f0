#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmc {

using Vec2 = Eigen::Vector2d;

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Rotate by +90 degrees.
inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

enum class SurfaceClass : std::uint8_t { Mountain, Sky, Side, Detector };

const char* to_string(SurfaceClass cls);

enum class Profile { Flat, Cos3 };

Profile parse_profile(const std::string& name);

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned extent of the scene. The floor height only matters for the
/// flat profile; the cos3 mountain sits on y = 1 - cos^3(x).
struct DomainBox {
  double x_min = -3.14159265358979323846;
  double x_max = 3.14159265358979323846;
  double y_floor = 2.0;
  double y_top = 4.0;
};

/// Detector interval placed on the right wall.
struct DetectorPlacement {
  double center = 3.1;
  double half_width = 0.1;
};

/// One piece of the closed boundary, traversed counterclockwise.
/// A `Line` arc runs straight from `a` to `b`; a `Graph` arc follows
/// y = height(x) from a.x() to b.x().
struct Arc {
  enum class Kind { Line, Graph };
  Kind kind = Kind::Line;
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  std::function<double(double)> height;
  SurfaceClass cls = SurfaceClass::Side;

  Vec2 point(double s) const;  // s in [0,1]
  double length(int samples = 4096) const;
};

struct BoundaryCurve {
  std::vector<Arc> arcs;

  // Throws GeometryError when consecutive arcs do not join.
  void check_closed(double tol = 1e-12) const;
};

double cos3_height(double x);

BoundaryCurve build_boundary(Profile profile, const DomainBox& box = {},
                             const DetectorPlacement& detector = {});

struct Segment {
  Vec2 a;
  Vec2 b;
  Vec2 center;
  Vec2 normal;  // outward unit normal
  double length;
  SurfaceClass cls;
  int arc;
};

struct RayHit {
  Vec2 point;
  int segment = -1;
  double t = 0.0;
  SurfaceClass cls = SurfaceClass::Side;
};

inline constexpr double kGrazeTol = 1e-12;
inline constexpr double kMinT = 1e-10;

/// Polyline discretization of a BoundaryCurve with a uniform grid for ray
/// queries. The polyline, not the smooth curve, is the simulated geometry.
class BoundaryMesh {
 public:
  /// `breakpoints_x` forces vertices at the given x coordinates on every arc
  /// that is not vertical.
  BoundaryMesh(const BoundaryCurve& curve, double h, std::vector<double> breakpoints_x = {});

  double h() const { return h_; }
  int size() const { return static_cast<int>(segments_.size()); }
  const Segment& segment(int i) const { return segments_[static_cast<std::size_t>(i)]; }
  const std::vector<Segment>& segments() const { return segments_; }

  double total_length() const;
  /// Largest distance between two mesh vertices.
  double diameter() const;
  Eigen::AlignedBox2d bounds() const { return bounds_; }

  /// Nearest boundary crossing along origin + t*dir with t > kMinT, skipping
  /// segment `exclude` (the launch segment). Throws GeometryError when the
  /// ray leaves the domain without a hit.
  RayHit ray_cast(const Vec2& origin, const Vec2& dir, int exclude = -1) const;
  std::optional<RayHit> try_ray_cast(const Vec2& origin, const Vec2& dir, int exclude = -1) const;

  /// Point on segment i at parameter s in [0,1].
  Vec2 point_on(int i, double s) const;

  void write_csv(std::ostream& out) const;

 private:
  void build_grid();
  bool intersect(int seg, const Vec2& o, const Vec2& d, double& t, double& s) const;

  double h_;
  std::vector<Segment> segments_;
  Eigen::AlignedBox2d bounds_;

  // uniform grid
  double x0_ = 0, y0_ = 0, cell_w_ = 1, cell_h_ = 1;
  int nx_ = 1, ny_ = 1;
  std::vector<int> cell_start_;
  std::vector<int> cell_items_;
};

/// max(0, nu.(r'-r)) / |r'-r|^2, the two-dimensional double-layer kernel.
/// Throws GeometryError for coincident points.
double double_layer_kernel(const Vec2& r, const Vec2& nu, const Vec2& r_prime);

/// True iff the open chord between the centers of segments i and j meets no
/// other boundary segment. Symmetric in (i, j).
bool visible(const BoundaryMesh& mesh, int i, int j);

}  // namespace hmc
