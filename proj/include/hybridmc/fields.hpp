#pragma once

#include "hybridmc/geometry.hpp"
#include "hybridmc/rng.hpp"

#include <numbers>
#include <string>
#include <variant>

namespace hmc {

enum class Channel { Total, Scattering, Absorption };

enum class Axis { X, Y };

/// Atmospheric coefficients sigma_a, sigma_s (inverse scene length).
/// Either constant, or both scaled by 1 + amplitude*sin(2 pi coord / period).
class CoefficientField {
 public:
  static CoefficientField constant(double sigma_a, double sigma_s);
  static CoefficientField modulated(double sigma_a, double sigma_s, double amplitude, double period,
                                    Axis axis);
  /// sigma = 1/mfp split as sigma_s = 2 sigma_a. An infinite mfp gives the empty atmosphere.
  static CoefficientField from_mfp(double mfp);

  bool is_constant() const { return amplitude_ == 0.0; }
  bool is_vacuum() const { return sigma_a_ == 0.0 && sigma_s_ == 0.0; }

  double value(const Vec2& r, Channel which) const;
  double absorption(const Vec2& r) const { return value(r, Channel::Absorption); }
  double scattering(const Vec2& r) const { return value(r, Channel::Scattering); }
  double total(const Vec2& r) const { return value(r, Channel::Total); }

  /// Integral of sigma_which along the straight segment from r to r_prime.
  double optical_depth(const Vec2& r, const Vec2& r_prime, Channel which) const;
  double transmittance(const Vec2& r, const Vec2& r_prime, Channel which) const;

  /// Optical depth accumulated from r over distance t along unit direction v.
  double depth_along(const Vec2& r, const Vec2& v, double t, Channel which) const;
  /// Distance t with depth_along(r, v, t) == depth; +inf if never reached.
  double invert_depth(const Vec2& r, const Vec2& v, double depth, double t_max, Channel which) const;

 private:
  double base(Channel which) const;

  double sigma_a_ = 0.0;
  double sigma_s_ = 0.0;
  double amplitude_ = 0.0;
  double period_ = 1.0;
  Axis axis_ = Axis::Y;
};

struct Collision {
  Vec2 position;
  double t;
};

using FreePath = std::variant<Collision, RayHit>;

/// Casts from r along v and returns the first point where the transmittance
/// for `which` drops below u, or the boundary hit if it never does.
/// u must lie in the open interval (0, 1).
FreePath sample_free_path(const CoefficientField& field, const BoundaryMesh& mesh, const Vec2& r,
                          const Vec2& v, double u, Channel which, int exclude = -1);

/// Rotation of unit vector v by angle theta (counterclockwise).
inline Vec2 rotate(const Vec2& v, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

/// Molecular-like phase function on the unit circle, (1 + cos^2)/(3 pi).
struct VolumePhase {
  static constexpr double kNorm = 1.0 / (3.0 * std::numbers::pi);
  static constexpr double kMax = 2.0 / (3.0 * std::numbers::pi);

  double eval(const Vec2& v, const Vec2& v_prime) const {
    const double c = v.dot(v_prime);
    return (1.0 + c * c) * kNorm;
  }
  double max_value() const { return kMax; }
  /// Rejection against the uniform envelope; acceptance rate 2/3.
  Vec2 sample(const Vec2& v, Rng& rng) const;
};

/// Lambertian reflection: density |nu.v'|/2 over directions with nu.v' < 0.
struct LambertianReflection {
  double eval(const Vec2& nu, const Vec2& v_prime) const { return std::max(0.0, -nu.dot(v_prime)) * 0.5; }
  Vec2 sample(const Vec2& nu, Rng& rng) const;
  /// Inverse cdf: angle asin(2u - 1) from the inward normal.
  Vec2 sample(const Vec2& nu, double u) const;
};

enum class AlbedoVariant { Constant, Oscillating, Uniform };

AlbedoVariant parse_albedo_variant(const std::string& name);

/// Surface albedo on mountain-class segments; zero on every other class.
class AlbedoField {
 public:
  /// Constant: `value` for |x| < cutoff. Oscillating: the piecewise sinusoidal
  /// texture. Uniform: `value` on every mountain point.
  explicit AlbedoField(AlbedoVariant variant = AlbedoVariant::Oscillating, double value = 1.0,
                       double cutoff = 2.5)
      : variant_(variant), value_(value), cutoff_(cutoff) {}

  double operator()(const Vec2& r, SurfaceClass cls) const;
  AlbedoVariant variant() const { return variant_; }
  /// x positions where the field is discontinuous.
  std::vector<double> breakpoints() const;

 private:
  AlbedoVariant variant_;
  double value_;
  double cutoff_;
};

enum class SourceVariant { Flat, Oscillating };

SourceVariant parse_source_variant(const std::string& name);

/// Mono-directional boundary source on the line y = y_top, pointing along -y,
/// with density q(x)/Z on x_lo < x < x_hi.
class BoundarySource {
 public:
  BoundarySource(SourceVariant variant = SourceVariant::Oscillating, double y_top = 4.0,
                 double x_lo = -2.5, double x_hi = 2.5);

  SourceVariant variant() const { return variant_; }
  double y() const { return y_top_; }
  double x_lo() const { return x_lo_; }
  double x_hi() const { return x_hi_; }
  Vec2 direction() const { return {0.0, -1.0}; }

  /// Normalized density in x (zero off the support).
  double density(double x) const;
  /// Q(r, v): density(x) when r lies on the source line and v is the source direction.
  double density(const Vec2& r, const Vec2& v) const;
  /// Integral of the normalized density over [a, b].
  double mass(double a, double b) const;
  double envelope() const;  // max of the unnormalized profile

  Vec2 sample(Rng& rng) const;
  /// Sample x on [a, b] (inside the support) with density proportional to q.
  double sample_x(double a, double b, Rng& rng) const;

 private:
  double profile(double x) const;
  double primitive(double x) const;

  SourceVariant variant_;
  double y_top_, x_lo_, x_hi_;
  double norm_;
};

/// Detector interval with response g0 for outgoing directions; g0 * length * pi = 1.
struct Detector {
  Vec2 a;
  Vec2 b;

  Vec2 midpoint() const { return 0.5 * (a + b); }
  double length() const { return (b - a).norm(); }
  double g0() const { return 1.0 / (length() * std::numbers::pi); }
};

bool detector_hit(const RayHit& hit);

}  // namespace hmc
