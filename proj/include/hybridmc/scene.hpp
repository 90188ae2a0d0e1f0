#pragma once

#include "hybridmc/fields.hpp"
#include "hybridmc/geometry.hpp"

#include <limits>
#include <memory>

namespace hmc {

/// Parameters of the mountain/valley scene family.
struct SceneSpec {
  Profile profile = Profile::Cos3;
  double h = 0.02;
  /// Mean free path in units of the domain diameter; +inf switches the atmosphere off.
  double mfp_over_diam = 4.0;
  AlbedoVariant albedo = AlbedoVariant::Oscillating;
  double albedo_value = 1.0;  // used by the constant and uniform variants
  SourceVariant source = SourceVariant::Oscillating;
  DetectorPlacement detector;
  DomainBox box;
  // optional sinusoidal modulation of both coefficients
  double modulation_amplitude = 0.0;
  double modulation_period = 1.0;
  Axis modulation_axis = Axis::Y;
};

/// Immutable composite of geometry, optical fields, source and detector.
struct Scene {
  std::shared_ptr<const BoundaryMesh> mesh;
  CoefficientField field;
  VolumePhase phase;
  LambertianReflection reflection;
  AlbedoField albedo;
  BoundarySource source;
  Detector detector;
  double diameter = 0.0;
  double mfp = std::numeric_limits<double>::infinity();

  double albedo_at(const Vec2& r, int segment) const {
    return albedo(r, mesh->segment(segment).cls);
  }
  double albedo_of_segment(int segment) const {
    const Segment& s = mesh->segment(segment);
    return albedo(s.center, s.cls);
  }
};

Scene build_scene(const SceneSpec& spec);

/// Scene over an arbitrary closed boundary (toy cavities, custom layouts).
Scene build_scene(const BoundaryCurve& curve, double h, CoefficientField field, AlbedoField albedo,
                  BoundarySource source, Detector detector);

}  // namespace hmc
