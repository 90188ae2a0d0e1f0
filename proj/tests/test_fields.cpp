#include "support.hpp"

#include "hybridmc/fields.hpp"

#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

using namespace hmc;
using hmc::testing::kPi;

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

BoundaryMesh big_box() {
  BoundaryCurve c;
  c.arcs = {testing::line({-100, -100}, {100, -100}, SurfaceClass::Mountain),
            testing::line({100, -100}, {100, 100}, SurfaceClass::Side),
            testing::line({100, 100}, {-100, 100}, SurfaceClass::Sky),
            testing::line({-100, 100}, {-100, -100}, SurfaceClass::Side)};
  return BoundaryMesh(c, 50.0);
}

}  // namespace

TEST_CASE("constant fields") {
  const auto zero = CoefficientField::constant(0, 0);
  CHECK(zero.optical_depth({0, 0}, {3, 4}, Channel::Total) == 0.0);
  CHECK(zero.transmittance({0, 0}, {3, 4}, Channel::Total) == 1.0);

  const auto two = CoefficientField::constant(0.5, 1.5);
  CHECK(two.optical_depth({0, 0}, {0, 1}, Channel::Total) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(two.transmittance({0, 0}, {1, 0}, Channel::Total) == doctest::Approx(0.1353352832366127).epsilon(1e-14));
  CHECK(two.optical_depth({0, 0}, {0, 1}, Channel::Absorption) == doctest::Approx(0.5));

  const auto mfp = CoefficientField::from_mfp(3.0);
  CHECK(mfp.total({1, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(mfp.scattering({1, 2}) / mfp.total({1, 2}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(CoefficientField::from_mfp(std::numeric_limits<double>::infinity()).is_vacuum());
}

TEST_CASE("modulated optical depth against Simpson") {
  // sigma = 1 + 0.5 sin(2 pi y / 0.5)
  const auto f = CoefficientField::modulated(1.0 / 3.0, 2.0 / 3.0, 0.5, 0.5, Axis::Y);
  auto sigma = [](double y) { return 1.0 + 0.5 * std::sin(2 * kPi * y / 0.5); };
  for (double y0 : {0.0, 0.13, 2.71}) {
    const double oracle = simpson(sigma, y0, y0 + 1.0, 20000);
    CHECK(f.optical_depth({0.4, y0}, {0.4, y0 + 1.0}, Channel::Total) == doctest::Approx(oracle).epsilon(1e-8));
  }
  // oblique segment: the integrand depends on y only, scaled by the path length
  const Vec2 a(0.1, 0.2), b(1.3, 0.9);
  const double len = (b - a).norm();
  const double oracle = simpson([&](double t) { return sigma(a.y() + t * (b.y() - a.y()) / len); }, 0.0, len, 20000);
  CHECK(f.optical_depth(a, b, Channel::Total) == doctest::Approx(oracle).epsilon(1e-8));
  CHECK(f.optical_depth(a, b, Channel::Scattering) == doctest::Approx(2.0 / 3.0 * oracle).epsilon(1e-8));
}

TEST_CASE("transmittance is multiplicative and monotone") {
  const auto f = CoefficientField::modulated(0.2, 0.4, 0.7, 0.3, Axis::X);
  const Vec2 a(0, 0), v = Vec2(3, 1).normalized();
  double prev = 1.0;
  for (double t = 0.25; t < 5.0; t += 0.25) {
    const Vec2 b = a + t * v, c = a + (t + 0.4) * v;
    const double lhs = f.transmittance(a, c, Channel::Total);
    const double rhs = f.transmittance(a, b, Channel::Total) * f.transmittance(b, c, Channel::Total);
    CHECK(std::abs(lhs - rhs) < 1e-12);
    const double e = f.transmittance(a, b, Channel::Total);
    CHECK(e <= prev);
    prev = e;
  }
}

TEST_CASE("depth inversion round trip") {
  const auto f = CoefficientField::modulated(0.2, 0.4, 0.9, 0.37, Axis::Y);
  const Vec2 r(0.3, -0.2), v = Vec2(-1, 2).normalized();
  for (double depth : {1e-6, 0.01, 0.5, 2.0, 7.5}) {
    const double t = f.invert_depth(r, v, depth, 1e3, Channel::Scattering);
    CHECK(f.depth_along(r, v, t, Channel::Scattering) == doctest::Approx(depth).epsilon(1e-10));
  }
  CHECK(std::isinf(f.invert_depth(r, v, 100.0, 1.0, Channel::Scattering)));
}

TEST_CASE("free path examples") {
  const BoundaryMesh box = big_box();
  const auto one = CoefficientField::constant(0.0, 1.0);
  const FreePath fp = sample_free_path(one, box, {0, 0}, {1, 0}, std::exp(-1.0), Channel::Scattering);
  REQUIRE(std::holds_alternative<Collision>(fp));
  CHECK(std::get<Collision>(fp).t == doctest::Approx(1.0).epsilon(1e-14));

  const auto zero = CoefficientField::constant(0, 0);
  for (double u : {1e-300, 0.5, 1.0 - 1e-16}) {
    const FreePath hit = sample_free_path(zero, box, {0, 0}, {0, -1}, u, Channel::Total);
    REQUIRE(std::holds_alternative<RayHit>(hit));
    CHECK(std::get<RayHit>(hit).t == doctest::Approx(100.0));
  }
  // absorption only: the scattering channel never collides
  const auto absorb = CoefficientField::constant(5.0, 0.0);
  CHECK(std::holds_alternative<RayHit>(sample_free_path(absorb, box, {0, 0}, {1, 0}, 0.5, Channel::Scattering)));
}

TEST_CASE("free path distances are exponential") {
  const BoundaryMesh box = big_box();
  const auto field = CoefficientField::constant(0.3, 0.9);
  Rng rng(42);
  std::vector<double> ts;
  for (int k = 0; k < 200000; ++k) {
    const FreePath fp = sample_free_path(field, box, {0, 0}, {0.6, 0.8}, uniform_open(rng), Channel::Total);
    REQUIRE(std::holds_alternative<Collision>(fp));
    ts.push_back(std::get<Collision>(fp).t);
  }
  CHECK(testing::ks_pvalue(ts, [](double t) { return 1.0 - std::exp(-1.2 * t); }) > 0.001);
}

TEST_CASE("volume phase") {
  const VolumePhase p;
  const Vec2 v(1, 0);
  CHECK(p.eval(v, {0, 1}) == doctest::Approx(1.0 / (3 * kPi)).epsilon(1e-15));
  CHECK(p.eval(v, v) == doctest::Approx(2.0 / (3 * kPi)).epsilon(1e-15));
  CHECK(p.eval(v, -v) == doctest::Approx(2.0 / (3 * kPi)).epsilon(1e-15));
  CHECK(p.max_value() == doctest::Approx(2.0 / (3 * kPi)).epsilon(1e-15));
  const double norm = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double th) { return p.eval(v, {std::cos(th), std::sin(th)}); }, 0.0, 2 * kPi, 10, 1e-14);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-8));
  const Vec2 a = Vec2(0.3, -1).normalized(), b = Vec2(2, 0.5).normalized();
  CHECK(p.eval(a, b) == p.eval(b, a));
  CHECK(p.eval(rotate(a, 0.7), rotate(b, 0.7)) == doctest::Approx(p.eval(a, b)).epsilon(1e-14));
}

TEST_CASE("volume phase samples match the analytic cdf") {
  const VolumePhase p;
  Rng rng(5);
  const Vec2 v = Vec2(1, 2).normalized();
  std::vector<double> th;
  for (int k = 0; k < 200000; ++k) {
    const Vec2 w = p.sample(v, rng);
    CHECK(std::abs(w.norm() - 1.0) < 1e-12);
    double a = std::atan2(cross(v, w), v.dot(w));
    if (a < 0) a += 2 * kPi;
    th.push_back(a);
  }
  auto cdf = [](double t) { return (1.5 * t + 0.25 * std::sin(2 * t)) / (3 * kPi); };
  CHECK(testing::ks_pvalue(th, cdf) > 0.001);
}

TEST_CASE("lambertian reflection") {
  const LambertianReflection refl;
  const Vec2 nu(0, -1);
  CHECK(refl.eval(nu, {0, 1}) == 0.5);
  CHECK(refl.eval(nu, {1, 0}) == 0.0);
  CHECK(refl.eval(nu, {0, -1}) == 0.0);
  const double norm = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double th) { return refl.eval(nu, {std::cos(th), std::sin(th)}); }, 0.0, kPi, 10, 1e-14);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(refl.sample(nu, 0.5).y() == doctest::Approx(1.0));

  Rng rng(17);
  const Vec2 n2 = Vec2(0.4, -0.9).normalized();
  std::vector<double> observed(64, 0.0), expected(64);
  for (int b = 0; b < 64; ++b) {
    const double a0 = -kPi / 2 + kPi * b / 64, a1 = a0 + kPi / 64;
    expected[b] = 0.5 * (std::sin(a1) - std::sin(a0));
  }
  for (int k = 0; k < 200000; ++k) {
    const Vec2 w = refl.sample(n2, rng);
    CHECK(n2.dot(w) < 0.0);
    const double a = std::atan2(cross(-n2, w), -n2.dot(w));
    const int b = std::clamp(static_cast<int>((a + kPi / 2) / kPi * 64), 0, 63);
    observed[b] += 1.0;
  }
  CHECK(testing::chi2_pvalue(observed, expected) > 0.001);
}

TEST_CASE("albedo field") {
  const AlbedoField osc(AlbedoVariant::Oscillating);
  CHECK(osc({3.0, 2.0}, SurfaceClass::Mountain) == 0.0);
  CHECK(osc({-3.0, 2.0}, SurfaceClass::Mountain) == 0.0);
  CHECK(osc({1.0125, 1.0}, SurfaceClass::Mountain) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(osc({0.0, 0.0}, SurfaceClass::Mountain) == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(osc({-1.0125, 1.0}, SurfaceClass::Mountain) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(osc({0.0, 4.0}, SurfaceClass::Sky) == 0.0);
  CHECK(osc({3.14, 3.0}, SurfaceClass::Detector) == 0.0);
  CHECK(osc.breakpoints() == std::vector<double>{-2.5, 1.0, 2.5});

  const AlbedoField flat(AlbedoVariant::Constant);
  CHECK(flat({2.4, 2.0}, SurfaceClass::Mountain) == 1.0);
  CHECK(flat({2.6, 2.0}, SurfaceClass::Mountain) == 0.0);
  CHECK(flat({0.0, 2.0}, SurfaceClass::Side) == 0.0);

  const AlbedoField uni(AlbedoVariant::Uniform, 0.3);
  CHECK(uni({100.0, 0.0}, SurfaceClass::Mountain) == 0.3);
  CHECK(uni.breakpoints().empty());

  for (double x = -3.14; x < 3.14; x += 0.001) {
    const double a = osc({x, 0.0}, SurfaceClass::Mountain);
    CHECK((a >= 0.0 && a <= 1.0));
  }
}

TEST_CASE("boundary source") {
  const BoundarySource flat(SourceVariant::Flat);
  CHECK(flat.density(Vec2(0, 4), Vec2(0, -1)) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(flat.density(Vec2(0, 4), Vec2(1, 0)) == 0.0);
  CHECK(flat.density(2.6) == 0.0);

  const BoundarySource osc(SourceVariant::Oscillating);
  // primitive of 1 + 0.25 sin(2 pi x / 0.07)
  auto prim = [](double x) { return x - 0.25 * 0.07 / (2 * kPi) * std::cos(2 * kPi * x / 0.07); };
  const double Z = prim(2.5) - prim(-2.5);
  for (double x : {-2.3, -0.01, 0.0, 0.5, 1.77}) {
    CHECK(osc.density(x) == doctest::Approx((1 + 0.25 * std::sin(2 * kPi * x / 0.07)) / Z).epsilon(1e-13));
  }
  CHECK(osc.mass(-2.5, 2.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(osc.mass(-0.3, 0.8) == doctest::Approx((prim(0.8) - prim(-0.3)) / Z).epsilon(1e-12));
  double total = 0.0;
  for (int k = 0; k < 500; ++k) {
    const double a = -2.5 + 0.01 * k;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double x) { return osc.density(x); }, a, a + 0.01);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

  Rng rng(99);
  std::vector<double> xs;
  for (int k = 0; k < 200000; ++k) {
    const Vec2 r = osc.sample(rng);
    CHECK(r.y() == 4.0);
    xs.push_back(r.x());
  }
  CHECK(testing::ks_pvalue(xs, [&](double x) { return (prim(x) - prim(-2.5)) / Z; }) > 0.001);

  // restricted draws stay in their bin
  for (int k = 0; k < 1000; ++k) {
    const double x = osc.sample_x(0.31, 0.32, rng);
    CHECK((x >= 0.31 && x <= 0.32));
  }
}

TEST_CASE("detector response") {
  const Detector det{{kPi, 3.0}, {kPi, 3.2}};
  CHECK(det.g0() * det.length() * kPi == doctest::Approx(1.0).epsilon(1e-15));
  RayHit hit;
  hit.cls = SurfaceClass::Detector;
  CHECK(detector_hit(hit));
  hit.cls = SurfaceClass::Mountain;
  CHECK_FALSE(detector_hit(hit));
}
