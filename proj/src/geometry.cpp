#include "hybridmc/geometry.hpp"

#include "hybridmc/csv.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

namespace hmc {

const char* to_string(SurfaceClass cls) {
  switch (cls) {
    case SurfaceClass::Mountain: return "mountain";
    case SurfaceClass::Sky: return "sky";
    case SurfaceClass::Side: return "side";
    case SurfaceClass::Detector: return "detector";
  }
  return "unknown";
}

Profile parse_profile(const std::string& name) {
  if (name == "flat") return Profile::Flat;
  if (name == "cos3") return Profile::Cos3;
  throw std::invalid_argument("unknown profile '" + name + "' (expected flat or cos3)");
}

Vec2 Arc::point(double s) const {
  if (kind == Kind::Line) return a + s * (b - a);
  const double x = a.x() + s * (b.x() - a.x());
  return {x, height(x)};
}

double Arc::length(int samples) const {
  if (kind == Kind::Line) return (b - a).norm();
  double len = 0.0;
  Vec2 prev = point(0.0);
  for (int k = 1; k <= samples; ++k) {
    const Vec2 p = point(static_cast<double>(k) / samples);
    len += (p - prev).norm();
    prev = p;
  }
  return len;
}

void BoundaryCurve::check_closed(double tol) const {
  if (arcs.size() < 2) throw GeometryError("boundary needs at least two arcs");
  for (std::size_t k = 0; k < arcs.size(); ++k) {
    const Arc& cur = arcs[k];
    const Arc& next = arcs[(k + 1) % arcs.size()];
    if ((cur.point(1.0) - next.point(0.0)).norm() > tol)
      throw GeometryError("boundary arcs " + std::to_string(k) + " and " +
                          std::to_string((k + 1) % arcs.size()) + " do not join");
  }
}

double cos3_height(double x) {
  const double c = std::cos(x);
  return 1.0 - c * c * c;
}

BoundaryCurve build_boundary(Profile profile, const DomainBox& box, const DetectorPlacement& det) {
  if (!(box.x_max > box.x_min) || !(box.y_top > box.y_floor))
    throw GeometryError("degenerate domain box");

  BoundaryCurve curve;
  auto line = [](Vec2 a, Vec2 b, SurfaceClass cls) {
    Arc arc;
    arc.kind = Arc::Kind::Line;
    arc.a = a;
    arc.b = b;
    arc.cls = cls;
    return arc;
  };

  double y_left = box.y_floor;
  double y_right = box.y_floor;
  if (profile == Profile::Flat) {
    curve.arcs.push_back(line({box.x_min, box.y_floor}, {box.x_max, box.y_floor}, SurfaceClass::Mountain));
  } else {
    Arc mountain;
    mountain.kind = Arc::Kind::Graph;
    mountain.height = cos3_height;
    mountain.a = {box.x_min, cos3_height(box.x_min)};
    mountain.b = {box.x_max, cos3_height(box.x_max)};
    mountain.cls = SurfaceClass::Mountain;
    y_left = mountain.a.y();
    y_right = mountain.b.y();
    curve.arcs.push_back(mountain);
  }

  const double lo = det.center - det.half_width;
  const double hi = det.center + det.half_width;
  if (!(det.half_width > 0.0) || lo <= y_right || hi >= box.y_top)
    throw GeometryError("detector interval must lie strictly inside the right wall");

  curve.arcs.push_back(line({box.x_max, y_right}, {box.x_max, lo}, SurfaceClass::Side));
  curve.arcs.push_back(line({box.x_max, lo}, {box.x_max, hi}, SurfaceClass::Detector));
  curve.arcs.push_back(line({box.x_max, hi}, {box.x_max, box.y_top}, SurfaceClass::Side));
  curve.arcs.push_back(line({box.x_max, box.y_top}, {box.x_min, box.y_top}, SurfaceClass::Sky));
  curve.arcs.push_back(line({box.x_min, box.y_top}, {box.x_min, y_left}, SurfaceClass::Side));
  curve.check_closed(1e-12);
  return curve;
}

namespace {

Segment make_segment(const Vec2& a, const Vec2& b, SurfaceClass cls, int arc) {
  Segment s;
  s.a = a;
  s.b = b;
  s.center = 0.5 * (a + b);
  s.length = (b - a).norm();
  const Vec2 e = (b - a) / s.length;
  s.normal = Vec2(e.y(), -e.x());
  s.cls = cls;
  s.arc = arc;
  return s;
}

// Vertices for one graph piece over [xa, xb] with every chord <= h.
std::vector<Vec2> graph_vertices(const Arc& arc, double xa, double xb, double h) {
  auto at = [&](double x) { return Vec2(x, arc.height(x)); };
  double arclen = 0.0;
  {
    const int samples = 2048;
    Vec2 prev = at(xa);
    for (int k = 1; k <= samples; ++k) {
      const Vec2 p = at(xa + (xb - xa) * k / samples);
      arclen += (p - prev).norm();
      prev = p;
    }
  }
  int n = std::max(1, static_cast<int>(std::ceil(arclen / h - 1e-9)));
  for (;;) {
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(n) + 1);
    double worst = 0.0;
    for (int k = 0; k <= n; ++k) {
      pts.push_back(at(k == n ? xb : xa + (xb - xa) * k / n));
      if (k > 0) worst = std::max(worst, (pts[static_cast<std::size_t>(k)] - pts[static_cast<std::size_t>(k - 1)]).norm());
    }
    if (worst <= h) return pts;
    n += std::max(1, n / 20);
  }
}

}  // namespace

BoundaryMesh::BoundaryMesh(const BoundaryCurve& curve, double h, std::vector<double> breakpoints_x)
    : h_(h) {
  if (!(h > 0.0)) throw GeometryError("mesh size h must be positive");
  curve.check_closed(1e-9);
  std::sort(breakpoints_x.begin(), breakpoints_x.end());

  for (std::size_t ai = 0; ai < curve.arcs.size(); ++ai) {
    const Arc& arc = curve.arcs[ai];
    const int arc_id = static_cast<int>(ai);
    std::vector<double> cuts{arc.a.x()};
    const double xlo = std::min(arc.a.x(), arc.b.x());
    const double xhi = std::max(arc.a.x(), arc.b.x());
    std::vector<double> inner;
    for (double x : breakpoints_x)
      if (x > xlo + 1e-12 && x < xhi - 1e-12) inner.push_back(x);
    if (arc.b.x() < arc.a.x()) std::reverse(inner.begin(), inner.end());
    cuts.insert(cuts.end(), inner.begin(), inner.end());
    cuts.push_back(arc.b.x());

    if (arc.kind == Arc::Kind::Line) {
      // pieces between breakpoints, each split evenly
      std::vector<double> params{0.0};
      for (std::size_t c = 1; c + 1 < cuts.size(); ++c)
        params.push_back((cuts[c] - arc.a.x()) / (arc.b.x() - arc.a.x()));
      params.push_back(1.0);
      for (std::size_t c = 0; c + 1 < params.size(); ++c) {
        const Vec2 pa = c == 0 ? arc.a : arc.point(params[c]);
        const Vec2 pb = c + 2 == params.size() ? arc.b : arc.point(params[c + 1]);
        const int n = std::max(1, static_cast<int>(std::ceil((pb - pa).norm() / h - 1e-9)));
        for (int k = 0; k < n; ++k) {
          const Vec2 qa = k == 0 ? pa : Vec2(pa + (pb - pa) * (static_cast<double>(k) / n));
          const Vec2 qb = k == n - 1 ? pb : Vec2(pa + (pb - pa) * (static_cast<double>(k + 1) / n));
          segments_.push_back(make_segment(qa, qb, arc.cls, arc_id));
        }
      }
      continue;
    }
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      std::vector<Vec2> pts = graph_vertices(arc, cuts[c], cuts[c + 1], h);
      if (c == 0) pts.front() = arc.a;
      if (c + 2 == cuts.size()) pts.back() = arc.b;
      for (std::size_t k = 0; k + 1 < pts.size(); ++k)
        segments_.push_back(make_segment(pts[k], pts[k + 1], arc.cls, arc_id));
    }
  }

  bounds_.setEmpty();
  for (const Segment& s : segments_) {
    bounds_.extend(s.a);
    bounds_.extend(s.b);
  }
  build_grid();
}

double BoundaryMesh::total_length() const {
  double len = 0.0;
  for (const Segment& s : segments_) len += s.length;
  return len;
}

double BoundaryMesh::diameter() const {
  double best = 0.0;
  for (std::size_t i = 0; i < segments_.size(); ++i)
    for (std::size_t j = i + 1; j < segments_.size(); ++j)
      best = std::max(best, (segments_[i].a - segments_[j].a).norm());
  return best;
}

Vec2 BoundaryMesh::point_on(int i, double s) const {
  const Segment& seg = segment(i);
  return seg.a + s * (seg.b - seg.a);
}

void BoundaryMesh::build_grid() {
  const Vec2 ext = bounds_.sizes();
  const double pad = 1e-9 * std::max(1.0, ext.maxCoeff());
  x0_ = bounds_.min().x() - pad;
  y0_ = bounds_.min().y() - pad;
  const double w = ext.x() + 2 * pad;
  const double hgt = ext.y() + 2 * pad;
  const double target = std::max(2.0 * h_, std::max(w, hgt) / 512.0);
  nx_ = std::max(1, static_cast<int>(std::ceil(w / target)));
  ny_ = std::max(1, static_cast<int>(std::ceil(hgt / target)));
  cell_w_ = w / nx_;
  cell_h_ = hgt / ny_;

  std::vector<std::vector<int>> cells(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_));
  const double eps = 1e-9 * target;
  for (int si = 0; si < size(); ++si) {
    const Segment& s = segments_[static_cast<std::size_t>(si)];
    const double minx = std::min(s.a.x(), s.b.x()) - eps, maxx = std::max(s.a.x(), s.b.x()) + eps;
    const double miny = std::min(s.a.y(), s.b.y()) - eps, maxy = std::max(s.a.y(), s.b.y()) + eps;
    const int ix0 = std::clamp(static_cast<int>(std::floor((minx - x0_) / cell_w_)), 0, nx_ - 1);
    const int ix1 = std::clamp(static_cast<int>(std::floor((maxx - x0_) / cell_w_)), 0, nx_ - 1);
    const int iy0 = std::clamp(static_cast<int>(std::floor((miny - y0_) / cell_h_)), 0, ny_ - 1);
    const int iy1 = std::clamp(static_cast<int>(std::floor((maxy - y0_) / cell_h_)), 0, ny_ - 1);
    const Vec2 e = s.b - s.a;
    for (int iy = iy0; iy <= iy1; ++iy) {
      for (int ix = ix0; ix <= ix1; ++ix) {
        // keep the cell unless all four (padded) corners lie strictly on one side
        const double cx0 = x0_ + ix * cell_w_ - eps, cx1 = cx0 + cell_w_ + 2 * eps;
        const double cy0 = y0_ + iy * cell_h_ - eps, cy1 = cy0 + cell_h_ + 2 * eps;
        int pos = 0, neg = 0;
        for (const Vec2& c : {Vec2(cx0, cy0), Vec2(cx1, cy0), Vec2(cx0, cy1), Vec2(cx1, cy1)}) {
          const double side = cross(e, c - s.a);
          if (side > 0) ++pos;
          else if (side < 0) ++neg;
          else { ++pos; ++neg; }
        }
        if (pos > 0 && neg > 0) cells[static_cast<std::size_t>(iy) * nx_ + ix].push_back(si);
      }
    }
  }
  cell_start_.assign(cells.size() + 1, 0);
  for (std::size_t c = 0; c < cells.size(); ++c)
    cell_start_[c + 1] = cell_start_[c] + static_cast<int>(cells[c].size());
  cell_items_.clear();
  cell_items_.reserve(static_cast<std::size_t>(cell_start_.back()));
  for (const auto& c : cells) cell_items_.insert(cell_items_.end(), c.begin(), c.end());
}

bool BoundaryMesh::intersect(int seg, const Vec2& o, const Vec2& d, double& t, double& s) const {
  const Segment& sg = segments_[static_cast<std::size_t>(seg)];
  const Vec2 e = sg.b - sg.a;
  const double denom = cross(d, e);
  if (std::abs(denom) <= kGrazeTol * sg.length) return false;
  const Vec2 w = sg.a - o;
  t = cross(w, e) / denom;
  s = cross(w, d) / denom;
  return t > kMinT && s >= -1e-12 && s <= 1.0 + 1e-12;
}

std::optional<RayHit> BoundaryMesh::try_ray_cast(const Vec2& origin, const Vec2& dir, int exclude) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  int ix = std::clamp(static_cast<int>(std::floor((origin.x() - x0_) / cell_w_)), 0, nx_ - 1);
  int iy = std::clamp(static_cast<int>(std::floor((origin.y() - y0_) / cell_h_)), 0, ny_ - 1);
  const int step_x = dir.x() > 0 ? 1 : (dir.x() < 0 ? -1 : 0);
  const int step_y = dir.y() > 0 ? 1 : (dir.y() < 0 ? -1 : 0);
  double t_max_x = step_x == 0 ? inf : (x0_ + (ix + (step_x > 0 ? 1 : 0)) * cell_w_ - origin.x()) / dir.x();
  double t_max_y = step_y == 0 ? inf : (y0_ + (iy + (step_y > 0 ? 1 : 0)) * cell_h_ - origin.y()) / dir.y();
  const double dt_x = step_x == 0 ? inf : cell_w_ / std::abs(dir.x());
  const double dt_y = step_y == 0 ? inf : cell_h_ / std::abs(dir.y());

  double best_t = inf, best_s = 0.0;
  int best_seg = -1;
  for (;;) {
    const std::size_t c = static_cast<std::size_t>(iy) * nx_ + ix;
    for (int k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
      const int seg = cell_items_[static_cast<std::size_t>(k)];
      if (seg == exclude) continue;
      double t, s;
      if (intersect(seg, origin, dir, t, s) && (t < best_t || (t == best_t && seg < best_seg))) {
        best_t = t;
        best_s = s;
        best_seg = seg;
      }
    }
    const double t_exit = std::min(t_max_x, t_max_y);
    if (best_seg >= 0 && best_t <= t_exit) break;
    if (t_max_x < t_max_y) {
      ix += step_x;
      t_max_x += dt_x;
    } else {
      iy += step_y;
      t_max_y += dt_y;
    }
    if (ix < 0 || ix >= nx_ || iy < 0 || iy >= ny_) break;
  }
  if (best_seg < 0) return std::nullopt;
  RayHit hit;
  hit.segment = best_seg;
  hit.point = point_on(best_seg, std::clamp(best_s, 0.0, 1.0));
  hit.t = best_t;
  hit.cls = segments_[static_cast<std::size_t>(best_seg)].cls;
  return hit;
}

RayHit BoundaryMesh::ray_cast(const Vec2& origin, const Vec2& dir, int exclude) const {
  auto hit = try_ray_cast(origin, dir, exclude);
  if (!hit) {
    throw GeometryError("ray left the domain without a boundary hit (origin " +
                        std::to_string(origin.x()) + ", " + std::to_string(origin.y()) + "; dir " +
                        std::to_string(dir.x()) + ", " + std::to_string(dir.y()) + ")");
  }
  return *hit;
}

void BoundaryMesh::write_csv(std::ostream& out) const {
  out << "segment,center_x,center_y,length,normal_x,normal_y,class\n";
  for (int i = 0; i < size(); ++i) {
    const Segment& s = segment(i);
    out << i << ',' << fmt(s.center.x()) << ',' << fmt(s.center.y()) << ',' << fmt(s.length) << ','
        << fmt(s.normal.x()) << ',' << fmt(s.normal.y()) << ',' << to_string(s.cls) << '\n';
  }
}

double double_layer_kernel(const Vec2& r, const Vec2& nu, const Vec2& r_prime) {
  const Vec2 delta = r_prime - r;
  const double d2 = delta.squaredNorm();
  if (d2 == 0.0) throw GeometryError("double-layer kernel evaluated at coincident points");
  return std::max(0.0, nu.dot(delta)) / d2;
}

bool visible(const BoundaryMesh& mesh, int i, int j) {
  if (i == j) throw GeometryError("visibility of a segment with itself is undefined");
  const int lo = std::min(i, j), hi = std::max(i, j);
  const Vec2 from = mesh.segment(lo).center;
  const Vec2 delta = mesh.segment(hi).center - from;
  const double dist = delta.norm();
  const auto hit = mesh.try_ray_cast(from, delta / dist, lo);
  if (!hit) return true;
  return hit->segment == hi || hit->t >= dist * (1.0 - 1e-9);
}

}  // namespace hmc
