#include "hybridmc/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace hmc {

Scene build_scene(const SceneSpec& spec) {
  if (!(spec.mfp_over_diam > 0.0)) throw std::invalid_argument("mfp must be positive");
  const BoundaryCurve curve = build_boundary(spec.profile, spec.box, spec.detector);
  AlbedoField albedo(spec.albedo, spec.albedo_value);

  std::vector<double> cuts = albedo.breakpoints();
  if (spec.profile == Profile::Cos3) cuts.push_back(0.0);  // vertex at the valley bottom

  Scene scene;
  scene.mesh = std::make_shared<const BoundaryMesh>(curve, spec.h, cuts);
  scene.diameter = scene.mesh->diameter();
  scene.mfp = spec.mfp_over_diam * scene.diameter;
  scene.field = CoefficientField::from_mfp(scene.mfp);
  if (spec.modulation_amplitude > 0.0 && !std::isinf(scene.mfp)) {
    const double sigma = 1.0 / scene.mfp;
    scene.field = CoefficientField::modulated(sigma / 3.0, 2.0 * sigma / 3.0, spec.modulation_amplitude,
                                              spec.modulation_period, spec.modulation_axis);
  }
  scene.albedo = albedo;
  scene.source = BoundarySource(spec.source, spec.box.y_top, -2.5, 2.5);
  scene.detector = Detector{{spec.box.x_max, spec.detector.center - spec.detector.half_width},
                            {spec.box.x_max, spec.detector.center + spec.detector.half_width}};
  return scene;
}

Scene build_scene(const BoundaryCurve& curve, double h, CoefficientField field, AlbedoField albedo,
                  BoundarySource source, Detector detector) {
  Scene scene;
  scene.mesh = std::make_shared<const BoundaryMesh>(curve, h, albedo.breakpoints());
  scene.diameter = scene.mesh->diameter();
  scene.field = field;
  const double sigma = field.total(Vec2::Zero());
  scene.mfp = sigma > 0.0 ? 1.0 / sigma : std::numeric_limits<double>::infinity();
  scene.albedo = albedo;
  scene.source = source;
  scene.detector = detector;
  return scene;
}

}  // namespace hmc
