#include "hybridmc/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hmc {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

CoefficientField CoefficientField::constant(double sigma_a, double sigma_s) {
  if (!(sigma_a >= 0.0) || !(sigma_s >= 0.0))
    throw std::invalid_argument("coefficients must be nonnegative");
  CoefficientField f;
  f.sigma_a_ = sigma_a;
  f.sigma_s_ = sigma_s;
  return f;
}

CoefficientField CoefficientField::modulated(double sigma_a, double sigma_s, double amplitude,
                                             double period, Axis axis) {
  if (!(amplitude >= 0.0 && amplitude <= 1.0))
    throw std::invalid_argument("modulation amplitude must lie in [0, 1]");
  if (!(period > 0.0)) throw std::invalid_argument("modulation period must be positive");
  CoefficientField f = constant(sigma_a, sigma_s);
  f.amplitude_ = amplitude;
  f.period_ = period;
  f.axis_ = axis;
  return f;
}

CoefficientField CoefficientField::from_mfp(double mfp) {
  if (!(mfp > 0.0)) throw std::invalid_argument("mean free path must be positive");
  if (std::isinf(mfp)) return constant(0.0, 0.0);
  const double sigma = 1.0 / mfp;
  return constant(sigma / 3.0, 2.0 * sigma / 3.0);
}

double CoefficientField::base(Channel which) const {
  switch (which) {
    case Channel::Total: return sigma_a_ + sigma_s_;
    case Channel::Scattering: return sigma_s_;
    case Channel::Absorption: return sigma_a_;
  }
  return 0.0;
}

double CoefficientField::value(const Vec2& r, Channel which) const {
  const double b = base(which);
  if (amplitude_ == 0.0) return b;
  const double c = axis_ == Axis::X ? r.x() : r.y();
  return b * (1.0 + amplitude_ * std::sin(kTwoPi * c / period_));
}

double CoefficientField::depth_along(const Vec2& r, const Vec2& v, double t, Channel which) const {
  const double b = base(which);
  if (b == 0.0 || t <= 0.0) return 0.0;
  if (amplitude_ == 0.0) return b * t;
  const double c0 = axis_ == Axis::X ? r.x() : r.y();
  const double dc = axis_ == Axis::X ? v.x() : v.y();
  const double k = kTwoPi / period_;
  double osc;
  if (std::abs(dc) < 1e-14) {
    osc = std::sin(k * c0) * t;
  } else {
    osc = (std::cos(k * c0) - std::cos(k * (c0 + t * dc))) / (k * dc);
  }
  return b * (t + amplitude_ * osc);
}

double CoefficientField::invert_depth(const Vec2& r, const Vec2& v, double depth, double t_max,
                                      Channel which) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double b = base(which);
  if (b == 0.0) return inf;
  if (amplitude_ == 0.0) {
    const double t = depth / b;
    return t <= t_max ? t : inf;
  }
  if (depth_along(r, v, t_max, which) < depth) return inf;
  // safeguarded Newton on the monotone depth
  double lo = 0.0, hi = t_max;
  double t = std::min(depth / b, t_max);
  for (int it = 0; it < 200; ++it) {
    const double f = depth_along(r, v, t, which) - depth;
    if (std::abs(f) <= 1e-15 * std::max(1.0, depth)) break;
    if (f > 0) hi = t;
    else lo = t;
    const double slope = value(r + t * v, which);
    double next = slope > 0 ? t - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * std::max(1.0, t)) {
      t = next;
      break;
    }
    t = next;
  }
  return t;
}

double CoefficientField::optical_depth(const Vec2& r, const Vec2& r_prime, Channel which) const {
  const Vec2 d = r_prime - r;
  const double len = d.norm();
  if (len == 0.0) return 0.0;
  return depth_along(r, d / len, len, which);
}

double CoefficientField::transmittance(const Vec2& r, const Vec2& r_prime, Channel which) const {
  return std::exp(-optical_depth(r, r_prime, which));
}

FreePath sample_free_path(const CoefficientField& field, const BoundaryMesh& mesh, const Vec2& r,
                          const Vec2& v, double u, Channel which, int exclude) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("free-path variate must lie in (0, 1)");
  const RayHit hit = mesh.ray_cast(r, v, exclude);
  const double t = field.invert_depth(r, v, -std::log(u), hit.t, which);
  if (t < hit.t) return Collision{r + t * v, t};
  return hit;
}

Vec2 VolumePhase::sample(const Vec2& v, Rng& rng) const {
  for (;;) {
    const double theta = kTwoPi * uniform01(rng);
    const double c = std::cos(theta);
    if (2.0 * uniform01(rng) < 1.0 + c * c) return rotate(v, theta);
  }
}

Vec2 LambertianReflection::sample(const Vec2& nu, double u) const {
  const double theta = std::asin(std::clamp(2.0 * u - 1.0, -1.0, 1.0));
  const Vec2 m = -nu;
  return std::cos(theta) * m + std::sin(theta) * perp(m);
}

Vec2 LambertianReflection::sample(const Vec2& nu, Rng& rng) const { return sample(nu, uniform01(rng)); }

AlbedoVariant parse_albedo_variant(const std::string& name) {
  if (name == "constant") return AlbedoVariant::Constant;
  if (name == "oscillating") return AlbedoVariant::Oscillating;
  if (name == "uniform") return AlbedoVariant::Uniform;
  throw std::invalid_argument("unknown albedo_variant '" + name + "'");
}

double AlbedoField::operator()(const Vec2& r, SurfaceClass cls) const {
  if (cls != SurfaceClass::Mountain) return 0.0;
  const double x = r.x();
  switch (variant_) {
    case AlbedoVariant::Uniform: return value_;
    case AlbedoVariant::Constant: return std::abs(x) < cutoff_ ? value_ : 0.0;
    case AlbedoVariant::Oscillating: {
      if (std::abs(x) >= cutoff_) return 0.0;
      const double wave = 0.25 * std::sin(kTwoPi * x / 0.05);
      return (x > 1.0 ? 0.75 : 0.35) + wave;
    }
  }
  return 0.0;
}

std::vector<double> AlbedoField::breakpoints() const {
  switch (variant_) {
    case AlbedoVariant::Uniform: return {};
    case AlbedoVariant::Constant: return {-cutoff_, cutoff_};
    case AlbedoVariant::Oscillating: return {-cutoff_, 1.0, cutoff_};
  }
  return {};
}

SourceVariant parse_source_variant(const std::string& name) {
  if (name == "flat") return SourceVariant::Flat;
  if (name == "oscillating") return SourceVariant::Oscillating;
  throw std::invalid_argument("unknown source_variant '" + name + "'");
}

namespace {
constexpr double kSourcePeriod = 0.07;
}

BoundarySource::BoundarySource(SourceVariant variant, double y_top, double x_lo, double x_hi)
    : variant_(variant), y_top_(y_top), x_lo_(x_lo), x_hi_(x_hi) {
  if (!(x_hi > x_lo)) throw std::invalid_argument("source support must be a nonempty interval");
  norm_ = primitive(x_hi_) - primitive(x_lo_);
}

double BoundarySource::profile(double x) const {
  if (variant_ == SourceVariant::Flat) return 1.0;
  return 1.0 + 0.25 * std::sin(kTwoPi * x / kSourcePeriod);
}

double BoundarySource::primitive(double x) const {
  if (variant_ == SourceVariant::Flat) return x;
  return x - 0.25 * kSourcePeriod / kTwoPi * std::cos(kTwoPi * x / kSourcePeriod);
}

double BoundarySource::envelope() const { return variant_ == SourceVariant::Flat ? 1.0 : 1.25; }

double BoundarySource::density(double x) const {
  if (x <= x_lo_ || x >= x_hi_) return 0.0;
  return profile(x) / norm_;
}

double BoundarySource::density(const Vec2& r, const Vec2& v) const {
  if (std::abs(r.y() - y_top_) > 1e-9) return 0.0;
  if (std::abs(v.x()) > 1e-12 || v.y() > -1.0 + 1e-12) return 0.0;
  return density(r.x());
}

double BoundarySource::mass(double a, double b) const {
  a = std::max(a, x_lo_);
  b = std::min(b, x_hi_);
  if (b <= a) return 0.0;
  return (primitive(b) - primitive(a)) / norm_;
}

double BoundarySource::sample_x(double a, double b, Rng& rng) const {
  if (variant_ == SourceVariant::Flat) return a + (b - a) * uniform01(rng);
  for (;;) {
    const double x = a + (b - a) * uniform01(rng);
    if (envelope() * uniform01(rng) < profile(x)) return x;
  }
}

Vec2 BoundarySource::sample(Rng& rng) const { return {sample_x(x_lo_, x_hi_, rng), y_top_}; }

bool detector_hit(const RayHit& hit) { return hit.cls == SurfaceClass::Detector; }

}  // namespace hmc
