#include "support.hpp"

#include "hybridmc/geometry.hpp"

#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

using namespace hmc;
using hmc::testing::kPi;

namespace {

int nearest_segment(const BoundaryMesh& mesh, const Vec2& p) {
  int best = -1;
  double d = 1e300;
  for (int i = 0; i < mesh.size(); ++i) {
    const double di = (mesh.segment(i).center - p).norm();
    if (di < d) {
      d = di;
      best = i;
    }
  }
  return best;
}

// Range of the vertical clearance of the chord p-q above the smooth mountain,
// away from the endpoints. A chord that changes sign crosses the boundary.
std::pair<double, double> chord_clearance(const Vec2& p, const Vec2& q) {
  double lo = 1e300, hi = -1e300;
  for (int k = 50; k <= 1950; ++k) {
    const Vec2 x = p + (q - p) * (k / 2000.0);
    const double c = x.y() - cos3_height(x.x());
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("flat box and cos3 profile") {
  const BoundaryMesh flat(build_boundary(Profile::Flat), 0.05);
  CHECK(flat.bounds().min().x() == doctest::Approx(-kPi).epsilon(1e-14));
  CHECK(flat.bounds().max().x() == doctest::Approx(kPi).epsilon(1e-14));
  CHECK(flat.bounds().min().y() == 2.0);
  CHECK(flat.bounds().max().y() == 4.0);

  CHECK(cos3_height(0.0) == 0.0);
  CHECK(cos3_height(kPi) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(cos3_height(-kPi) == doctest::Approx(2.0).epsilon(1e-15));

  CHECK_NOTHROW(build_boundary(Profile::Cos3).check_closed());
  CHECK_THROWS_AS(build_boundary(Profile::Cos3, DomainBox{}, DetectorPlacement{1.5, 0.1}), GeometryError);
  CHECK_THROWS_AS(build_boundary(Profile::Flat, DomainBox{1, 1, 2, 4}), GeometryError);
}

TEST_CASE("open curve is rejected") {
  BoundaryCurve c;
  c.arcs = {testing::line({0, 0}, {1, 0}, SurfaceClass::Mountain),
            testing::line({1, 0}, {1, 1}, SurfaceClass::Side),
            testing::line({1, 1.1}, {0, 0}, SurfaceClass::Sky)};
  CHECK_THROWS_AS(c.check_closed(), GeometryError);
}

TEST_CASE("mesh segments respect h and cover the boundary") {
  for (double h : {0.2, 0.05, 0.01}) {
    const BoundaryMesh mesh(build_boundary(Profile::Cos3), h, {-2.5, 1.0, 2.5});
    for (int i = 0; i < mesh.size(); ++i) {
      const Segment& s = mesh.segment(i);
      CHECK(s.length <= h * (1 + 1e-12));
      CHECK(s.normal.norm() == doctest::Approx(1.0).epsilon(1e-14));
      const Segment& next = mesh.segment((i + 1) % mesh.size());
      CHECK((s.b - next.a).norm() < 1e-12);
    }
  }
}

TEST_CASE("mountain normals follow the curve") {
  const BoundaryMesh mesh(build_boundary(Profile::Cos3), 0.01);
  for (const Segment& s : mesh.segments()) {
    if (s.cls != SurfaceClass::Mountain) continue;
    const double x = s.center.x();
    const double slope = 3.0 * std::cos(x) * std::cos(x) * std::sin(x);
    const Vec2 nu = Vec2(slope, -1.0).normalized();
    CHECK((s.normal - nu).norm() < 0.05);
  }
}

TEST_CASE("refinement doubles the segment count and keeps the flat length") {
  const BoundaryCurve flat = build_boundary(Profile::Flat);
  const BoundaryMesh a(flat, 0.1), b(flat, 0.05);
  CHECK(b.size() >= 2 * a.size());
  CHECK(std::abs(a.total_length() - b.total_length()) < 1e-12);
  CHECK(a.total_length() == doctest::Approx(4 * kPi + 4).epsilon(1e-13));

  const BoundaryCurve cos3 = build_boundary(Profile::Cos3);
  const BoundaryMesh c(cos3, 0.1), d(cos3, 0.05), e(cos3, 0.025);
  CHECK(d.size() >= 2 * c.size());
  const double d1 = d.total_length() - c.total_length();
  const double d2 = e.total_length() - d.total_length();
  CHECK(d1 >= 0.0);
  CHECK(d2 >= 0.0);
  CHECK(d2 < 0.5 * d1);
}

TEST_CASE("ray cast examples") {
  const BoundaryMesh flat(build_boundary(Profile::Flat), 0.05);
  const RayHit down = flat.ray_cast({0, 4}, {0, -1});
  CHECK(down.point.x() == doctest::Approx(0.0));
  CHECK(down.point.y() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(down.t == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(down.cls == SurfaceClass::Mountain);

  const BoundaryMesh cos3(build_boundary(Profile::Cos3), 0.02, {0.0});
  const RayHit up = cos3.ray_cast({0, 0}, {0, 1});
  CHECK(up.point.y() == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(up.t == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(up.cls == SurfaceClass::Sky);
}

TEST_CASE("oblique cast matches bisection on the smooth mountain") {
  const BoundaryMesh mesh(build_boundary(Profile::Cos3), 0.002);
  const Vec2 o(1, 3);
  const double a = 200.0 * kPi / 180.0;
  const Vec2 v(std::cos(a), std::sin(a));
  auto f = [&](double t) {
    const Vec2 p = o + t * v;
    return p.y() - cos3_height(p.x());
  };
  double lo = 0.0, hi = 0.0;
  for (double t = 0.0;; t += 1e-3) {
    if (f(t) < 0.0) {
      hi = t;
      lo = t - 1e-3;
      break;
    }
  }
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  const RayHit hit = mesh.ray_cast(o, v);
  CHECK(hit.cls == SurfaceClass::Mountain);
  CHECK(hit.t == doctest::Approx(lo).epsilon(1e-5));
  CHECK((hit.point - (o + hit.t * v)).norm() < 1e-12);
}

TEST_CASE("random interior rays always hit and reverse casts return") {
  const BoundaryMesh mesh(build_boundary(Profile::Cos3), 0.02);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(-3.1, 3.1), uu(0.0, 1.0);
  int misses = 0, checked = 0;
  double worst = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double x = ux(rng);
    const double y = cos3_height(x) + 0.01 + uu(rng) * (3.98 - cos3_height(x));
    const double th = 2 * kPi * uu(rng);
    const Vec2 v(std::cos(th), std::sin(th));
    const auto hit = mesh.try_ray_cast({x, y}, v);
    if (!hit) {
      ++misses;
      continue;
    }
    if (k % 10) continue;
    // chord from the back hit through the interior point to the forward hit
    const auto back = mesh.try_ray_cast(hit->point, -v, hit->segment);
    if (!back) continue;
    const auto again = mesh.try_ray_cast(back->point, v, back->segment);
    if (!again) continue;
    ++checked;
    worst = std::max(worst, (again->point - hit->point).norm());
  }
  CHECK(misses == 0);
  CHECK(checked > 9000);
  CHECK(worst < 1e-9);
}

TEST_CASE("double layer kernel values") {
  CHECK(double_layer_kernel({0, 2}, {0, 1}, {1, 3}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(double_layer_kernel({0, 2}, {0, 1}, {1, 2}) == 0.0);
  CHECK(double_layer_kernel({0, 2}, {0, 1}, {1, 1}) == 0.0);
  CHECK_THROWS_AS(double_layer_kernel({0, 2}, {0, 1}, {0, 2}), GeometryError);

  // bounded by 1/d on the flat box: nu.delta <= |delta|
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(-kPi, kPi);
  for (int k = 0; k < 1000; ++k) {
    const Vec2 r(ux(rng), 2.0), rp(ux(rng), 4.0);
    const double p = double_layer_kernel(r, {0, 1}, rp);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0 / (rp - r).norm() + 1e-15);
  }
}

TEST_CASE("kernel integrates to the inward half circle") {
  // With the normal taken at the integration point, the kernel is the angle
  // subtended at r per unit boundary length; over the closed box it totals pi.
  const double x0 = -kPi, x1 = kPi, y0 = 2.0, y1 = 4.0;
  struct Side {
    Vec2 a, b, inward;
  };
  const Side sides[] = {{{x0, y0}, {x1, y0}, {0, 1}},
                        {{x1, y0}, {x1, y1}, {-1, 0}},
                        {{x1, y1}, {x0, y1}, {0, -1}},
                        {{x0, y1}, {x0, y0}, {1, 0}}};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uu(0.05, 0.95);
  for (int k = 0; k < 10; ++k) {
    const Side& home = sides[k % 4];
    const Vec2 r = home.a + uu(rng) * (home.b - home.a);
    double total = 0.0;
    for (const Side& s : sides) {
      if (&s == &home) continue;
      const double len = (s.b - s.a).norm();
      auto integrand = [&](double t) {
        const Vec2 rp = s.a + (t / len) * (s.b - s.a);
        return double_layer_kernel(rp, s.inward, r);
      };
      total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, len, 15, 1e-13);
    }
    CHECK(total == doctest::Approx(kPi).epsilon(1e-4));
  }
}

TEST_CASE("visibility") {
  SUBCASE("flat box is convex") {
    const BoundaryMesh mesh(build_boundary(Profile::Flat), 0.1);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pick(0, mesh.size() - 1);
    for (int k = 0; k < 500; ++k) {
      const int i = pick(rng), j = pick(rng);
      if (i == j) continue;
      CHECK(visible(mesh, i, j));
    }
  }
  SUBCASE("shelf shadows the low valley") {
    const BoundaryMesh mesh(build_boundary(Profile::Cos3), 0.02);
    const int i = nearest_segment(mesh, {-0.5, cos3_height(-0.5)});
    const int j = nearest_segment(mesh, {2.0, cos3_height(2.0)});
    CHECK_FALSE(visible(mesh, i, j));
    CHECK_FALSE(visible(mesh, j, i));
    const int det = nearest_segment(mesh, {kPi, 3.1});
    CHECK(mesh.segment(det).cls == SurfaceClass::Detector);
    CHECK(visible(mesh, nearest_segment(mesh, {0.0, 0.0}), det));
  }
  SUBCASE("symmetric and consistent with the smooth profile") {
    const BoundaryMesh mesh(build_boundary(Profile::Cos3), 0.02);
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> pick(0, mesh.size() - 1);
    int compared = 0;
    for (int k = 0; k < 5000; ++k) {
      const int i = pick(rng), j = pick(rng);
      if (i == j) continue;
      CHECK(visible(mesh, i, j) == visible(mesh, j, i));
      const Segment& si = mesh.segment(i);
      const Segment& sj = mesh.segment(j);
      if (si.cls != SurfaceClass::Mountain || sj.cls != SurfaceClass::Mountain) continue;
      const Vec2 d = (sj.center - si.center).normalized();
      if (-si.normal.dot(d) < 0.05 || sj.normal.dot(d) < 0.05) continue;  // facing pairs only
      const auto [lo, hi] = chord_clearance(si.center, sj.center);
      bool expect;
      if (lo > 5e-4) expect = true;
      else if (lo < -5e-4) expect = false;
      else continue;
      ++compared;
      CHECK(visible(mesh, i, j) == expect);
    }
    CHECK(compared > 300);
  }
}
