#include "hybridmc/transport.hpp"

#include "hybridmc/csv.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace hmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

bool has_direction(const PathVertex& v) { return v.direction.squaredNorm() > 0.0; }

}  // namespace

ChainKind parse_chain(const std::string& name) {
  if (name == "analog") return ChainKind::Analog;
  if (name == "sb") return ChainKind::SurvivalBiased;
  if (name == "sai") return ChainKind::PureSai;
  if (name == "heuristic") return ChainKind::Heuristic;
  if (name == "regularized") return ChainKind::Regularized;
  throw std::invalid_argument("unknown chain '" + name + "'");
}

const char* to_string(ChainKind chain) {
  switch (chain) {
    case ChainKind::Analog: return "analog";
    case ChainKind::SurvivalBiased: return "sb";
    case ChainKind::PureSai: return "sai";
    case ChainKind::Heuristic: return "heuristic";
    case ChainKind::Regularized: return "regularized";
  }
  return "?";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Detector: return "detector";
    case Termination::Absorbed: return "absorbed";
    case Termination::Escaped: return "escaped";
    case Termination::WeightCutoff: return "weight_cutoff";
    case Termination::LengthCap: return "length_cap";
    case Termination::DeadRow: return "dead_row";
  }
  return "?";
}

void ChainParams::validate() const {
  if (!(q_s >= 0.0 && q_s <= 1.0)) throw std::invalid_argument("q_s must lie in [0, 1]");
  if (!(q_v >= 0.0 && q_v <= 1.0)) throw std::invalid_argument("q_v must lie in [0, 1]");
  if (!(weight_cutoff > 0.0)) throw std::invalid_argument("weight_cutoff must be positive");
  if (max_path_length < 2) throw std::invalid_argument("max_path_length must be at least 2");
}

int Path::volume_vertices() const {
  return static_cast<int>(std::count_if(vertices.begin(), vertices.end(),
                                        [](const PathVertex& v) { return v.kind == VertexKind::Volume; }));
}

void Path::clear() {
  vertices.clear();
  weight = 0.0;
  status = Termination::Absorbed;
  sai_branch = false;
  log_density = 0.0;
  lost_weight = 0.0;
}

Transport::Transport(const Scene& scene, const AdjointTable* adjoint, ChainParams params)
    : scene_(scene), adjoint_(adjoint), params_(params) {
  params_.validate();
  if (needs_adjoint(params_.chain) && adjoint_ == nullptr)
    throw std::invalid_argument(std::string("chain ") + to_string(params_.chain) + " needs an adjoint table");
  if (adjoint_ != nullptr && adjoint_->mesh_ptr() != scene_.mesh &&
      (adjoint_->h() != scene_.mesh->h() || adjoint_->size() != scene_.mesh->size()))
    throw std::invalid_argument("adjoint table was solved on a different mesh");
  if (needs_adjoint(params_.chain)) adjoint_->sai_source();
}

bool Transport::Cone::contains(const Vec2& v) const {
  if (!open) return false;
  const double psi = std::atan2(cross(base, v), base.dot(v));
  return span > 0.0 ? (psi >= 0.0 && psi <= span) : (psi <= 0.0 && psi >= span);
}

Transport::Cone Transport::detector_cone(const Vec2& r) const {
  const Detector& det = scene_.detector;
  const Vec2 e = det.b - det.a;
  Cone cone;
  for (const Vec2& target : {Vec2(det.a + 0.01 * e), Vec2(det.b - 0.01 * e)}) {
    const auto hit = scene_.mesh->try_ray_cast(r, (target - r).normalized());
    if (hit && hit->cls == SurfaceClass::Detector) {
      cone.open = true;
      break;
    }
  }
  if (!cone.open) return cone;
  cone.base = (det.a - r).normalized();
  const Vec2 db = (det.b - r).normalized();
  cone.span = std::atan2(cross(cone.base, db), cone.base.dot(db));
  if (cone.span == 0.0) cone.open = false;
  return cone;
}

double Transport::q_heu(const Vec2& r, const Vec2& v_in, const Cone& cone) const {
  if (params_.q_v >= 1.0 || !cone.open) return 1.0;
  const Vec2 w = (scene_.detector.midpoint() - r).normalized();
  const double q = 1.0 - (1.0 - params_.q_v) * scene_.phase.eval(v_in, w) / scene_.phase.max_value();
  if (!(q >= 0.0 && q <= 1.0)) throw std::logic_error("heuristic mixture probability outside [0, 1]");
  return q;
}

namespace {

double mix_density(double p, double q, const Transport::Cone& cone, const Vec2& v_out) {
  const double f = cone.contains(v_out) ? cone.density() : 0.0;
  return (1.0 - q) * f + q * p;
}

}  // namespace

double Transport::k_heu(const Vec2& r, const Vec2& v_in, const Vec2& v_out) const {
  const double p = scene_.phase.eval(v_in, v_out);
  if (params_.q_v >= 1.0) return p;
  const Cone cone = detector_cone(r);
  if (!cone.open) return p;
  return mix_density(p, q_heu(r, v_in, cone), cone, v_out);
}

void Transport::begin(Path& path, ChainKind chain) const {
  path.clear();
  path.chain = chain;
  path.weight = 1.0;
}

bool Transport::capped(Path& path) const {
  if (static_cast<int>(path.vertices.size()) < params_.max_path_length) return false;
  path.status = Termination::LengthCap;
  path.lost_weight = path.weight;
  path.weight = 0.0;
  return true;
}

void Transport::run(Rng& rng, Path& path) {
  switch (params_.chain) {
    case ChainKind::Analog: return run_analog(rng, path);
    case ChainKind::SurvivalBiased: return run_survival_biased(rng, path);
    case ChainKind::PureSai: return run_pure_sai(rng, path);
    case ChainKind::Heuristic: return run_heuristic(rng, path);
    case ChainKind::Regularized: return run_regularized(rng, path);
  }
}

void Transport::run_analog(Rng& rng, Path& path) {
  begin(path, ChainKind::Analog);
  const BoundaryMesh& mesh = *scene_.mesh;
  Vec2 r = scene_.source.sample(rng);
  Vec2 v = scene_.source.direction();
  path.log_density = std::log(scene_.source.density(r.x()));
  path.vertices.push_back({r, -1, VertexKind::Source, v});
  int exclude = -1;
  for (;;) {
    if (capped(path)) return;
    const double u = uniform_open(rng);
    const FreePath fp = sample_free_path(scene_.field, mesh, r, v, u, Channel::Total, exclude);
    if (const auto* c = std::get_if<Collision>(&fp)) {
      const double sig = scene_.field.total(c->position);
      const double ss = scene_.field.scattering(c->position);
      path.vertices.push_back({c->position, -1, VertexKind::Volume, Vec2::Zero()});
      path.log_density += std::log(sig) + std::log(u);
      if (!(uniform01(rng) * sig < ss)) {
        path.status = Termination::Absorbed;
        path.weight = 0.0;
        return;
      }
      const Vec2 next = scene_.phase.sample(v, rng);
      path.log_density += std::log(ss / sig) + std::log(scene_.phase.eval(v, next));
      path.vertices.back().direction = next;
      r = c->position;
      v = next;
      exclude = -1;
      continue;
    }
    const RayHit& hit = std::get<RayHit>(fp);
    path.log_density -= scene_.field.depth_along(r, v, hit.t, Channel::Total);
    path.vertices.push_back({hit.point, hit.segment, VertexKind::Boundary, Vec2::Zero()});
    if (hit.cls == SurfaceClass::Detector) {
      path.status = Termination::Detector;
      return;
    }
    const double alpha = scene_.albedo_at(hit.point, hit.segment);
    if (!(alpha > 0.0)) {
      path.status = Termination::Escaped;
      path.weight = 0.0;
      return;
    }
    if (!(uniform01(rng) < alpha)) {
      path.status = Termination::Absorbed;
      path.weight = 0.0;
      return;
    }
    const Vec2& nu = mesh.segment(hit.segment).normal;
    const Vec2 next = scene_.reflection.sample(nu, rng);
    path.log_density += std::log(alpha) + std::log(scene_.reflection.eval(nu, next));
    path.vertices.back().direction = next;
    r = hit.point;
    v = next;
    exclude = hit.segment;
  }
}

void Transport::run_survival_biased(Rng& rng, Path& path) {
  scatter_chain(rng, path, false);
}

void Transport::run_heuristic(Rng& rng, Path& path) { scatter_chain(rng, path, true); }

void Transport::scatter_chain(Rng& rng, Path& path, bool heuristic) {
  begin(path, heuristic ? ChainKind::Heuristic : ChainKind::SurvivalBiased);
  const BoundaryMesh& mesh = *scene_.mesh;
  const bool mixing = heuristic && params_.q_v < 1.0;
  Vec2 r = scene_.source.sample(rng);
  Vec2 v = scene_.source.direction();
  path.log_density = std::log(scene_.source.density(r.x()));
  path.vertices.push_back({r, -1, VertexKind::Source, v});
  int exclude = -1;
  for (;;) {
    if (capped(path)) return;
    const double u = uniform_open(rng);
    const FreePath fp = sample_free_path(scene_.field, mesh, r, v, u, Channel::Scattering, exclude);
    if (const auto* c = std::get_if<Collision>(&fp)) {
      path.weight *= scene_.field.transmittance(r, c->position, Channel::Absorption);
      path.vertices.push_back({c->position, -1, VertexKind::Volume, Vec2::Zero()});
      path.log_density += std::log(scene_.field.scattering(c->position)) + std::log(u);
      Vec2 next;
      double k;
      Cone cone;
      if (mixing) cone = detector_cone(c->position);
      if (cone.open) {
        const double q = q_heu(c->position, v, cone);
        if (uniform01(rng) < q) next = scene_.phase.sample(v, rng);
        else next = rotate(cone.base, uniform01(rng) * cone.span);
        const double p = scene_.phase.eval(v, next);
        k = mix_density(p, q, cone, next);
        path.weight *= p / k;
      } else {
        next = scene_.phase.sample(v, rng);
        k = scene_.phase.eval(v, next);
      }
      path.log_density += std::log(k);
      path.vertices.back().direction = next;
      r = c->position;
      v = next;
      exclude = -1;
    } else {
      const RayHit& hit = std::get<RayHit>(fp);
      path.weight *= scene_.field.transmittance(r, hit.point, Channel::Absorption);
      path.log_density -= scene_.field.depth_along(r, v, hit.t, Channel::Scattering);
      path.vertices.push_back({hit.point, hit.segment, VertexKind::Boundary, Vec2::Zero()});
      if (hit.cls == SurfaceClass::Detector) {
        path.status = Termination::Detector;
        return;
      }
      const double alpha = scene_.albedo_at(hit.point, hit.segment);
      if (!(alpha > 0.0)) {
        path.status = Termination::Escaped;
        path.weight = 0.0;
        return;
      }
      path.weight *= alpha;
      const Vec2& nu = mesh.segment(hit.segment).normal;
      const Vec2 next = scene_.reflection.sample(nu, rng);
      path.log_density += std::log(scene_.reflection.eval(nu, next));
      path.vertices.back().direction = next;
      r = hit.point;
      v = next;
      exclude = hit.segment;
    }
    if (path.weight < params_.weight_cutoff) {
      path.status = Termination::WeightCutoff;
      path.lost_weight = path.weight;
      path.weight = 0.0;
      return;
    }
  }
}

void Transport::run_pure_sai(Rng& rng, Path& path) { sai_chain(rng, path); }

void Transport::sai_chain(Rng& rng, Path& path) {
  begin(path, ChainKind::PureSai);
  const BoundaryMesh& mesh = *scene_.mesh;
  const SaiSource& src = adjoint_->sai_source();
  double x;
  const int bin = sample_sai_source(src, scene_.source, rng, x);
  const double phi_b = src.phi[static_cast<std::size_t>(bin)];
  Vec2 r(x, scene_.source.y());
  Vec2 v = scene_.source.direction();
  path.weight = src.signal / phi_b;
  path.log_density = std::log(scene_.source.density(x)) + std::log(phi_b) - std::log(src.signal);
  path.vertices.push_back({r, -1, VertexKind::Source, v});
  int exclude = -1;
  auto dead = [&path] {
    path.status = Termination::DeadRow;
    path.weight = 0.0;
  };
  for (;;) {
    if (capped(path)) return;
    const auto hit = mesh.try_ray_cast(r, v, exclude);
    if (!hit) {
      path.status = Termination::Escaped;
      path.weight = 0.0;
      return;
    }
    path.weight *= scene_.field.transmittance(r, hit->point, Channel::Total);
    path.vertices.push_back({hit->point, hit->segment, VertexKind::Boundary, Vec2::Zero()});
    if (hit->cls == SurfaceClass::Detector) {
      path.status = Termination::Detector;
      return;
    }
    const double alpha = scene_.albedo_at(hit->point, hit->segment);
    if (!(alpha > 0.0)) return dead();
    adjoint_->launch_row(hit->segment, hit->point, row_);
    if (row_.dead()) return dead();
    const Vec2 next = row_.sample(rng);
    const double imp = row_.importance(next);
    if (!(imp > 0.0)) return dead();
    path.weight *= alpha * row_.W / imp;
    path.log_density += std::log(row_.density(next));
    path.vertices.back().direction = next;
    if (path.weight < params_.weight_cutoff) {
      path.status = Termination::WeightCutoff;
      path.lost_weight = path.weight;
      path.weight = 0.0;
      return;
    }
    r = hit->point;
    v = next;
    exclude = hit->segment;
  }
}

void Transport::run_regularized(Rng& rng, Path& path) {
  const double q_s = params_.q_s;
  bool heuristic;
  if (q_s >= 1.0) heuristic = true;
  else if (q_s <= 0.0) heuristic = false;
  else heuristic = uniform01(rng) < q_s;
  if (heuristic) scatter_chain(rng, path, true);
  else sai_chain(rng, path);
  path.chain = ChainKind::Regularized;
  path.sai_branch = !heuristic;
  if (!path.detected()) return;
  const double la = log_density_analog(path);
  const double ls = q_s < 1.0 ? std::log1p(-q_s) + log_density_sai(path) : kNegInf;
  const double lh = q_s > 0.0 ? std::log(q_s) + log_density_heu(path) : kNegInf;
  const double lm = log_sum_exp(ls, lh);
  if (!(lm > kNegInf)) throw std::logic_error("mixture density vanishes on a generated path");
  path.weight = std::exp(la - lm);
}

double Transport::log_density_analog(const Path& path) const {
  const auto& vs = path.vertices;
  if (vs.empty()) return kNegInf;
  double ld = std::log(scene_.source.density(vs.front().position.x()));
  for (std::size_t k = 1; k < vs.size(); ++k) {
    const PathVertex& prev = vs[k - 1];
    const PathVertex& cur = vs[k];
    ld -= scene_.field.optical_depth(prev.position, cur.position, Channel::Total);
    if (!has_direction(cur)) break;
    if (cur.kind == VertexKind::Volume) {
      ld += std::log(scene_.field.scattering(cur.position)) +
            std::log(scene_.phase.eval(prev.direction, cur.direction));
    } else {
      const double alpha = scene_.albedo_at(cur.position, cur.segment);
      ld += std::log(alpha) +
            std::log(scene_.reflection.eval(scene_.mesh->segment(cur.segment).normal, cur.direction));
    }
  }
  return ld;
}

double Transport::log_density_heu(const Path& path) const {
  const auto& vs = path.vertices;
  if (vs.empty()) return kNegInf;
  double ld = std::log(scene_.source.density(vs.front().position.x()));
  for (std::size_t k = 1; k < vs.size(); ++k) {
    const PathVertex& prev = vs[k - 1];
    const PathVertex& cur = vs[k];
    ld -= scene_.field.optical_depth(prev.position, cur.position, Channel::Scattering);
    if (!has_direction(cur)) break;
    if (cur.kind == VertexKind::Volume) {
      ld += std::log(scene_.field.scattering(cur.position)) +
            std::log(k_heu(cur.position, prev.direction, cur.direction));
    } else {
      ld += std::log(scene_.reflection.eval(scene_.mesh->segment(cur.segment).normal, cur.direction));
    }
  }
  return ld;
}

double Transport::log_density_sai(const Path& path) const {
  if (adjoint_ == nullptr) throw std::invalid_argument("sai density needs an adjoint table");
  const auto& vs = path.vertices;
  if (vs.empty() || path.volume_vertices() > 0) return kNegInf;
  const SaiSource& src = adjoint_->sai_source();
  const double x0 = vs.front().position.x();
  const int bin = src.bin_of(x0);
  if (bin < 0) return kNegInf;
  const double phi_b = src.phi[static_cast<std::size_t>(bin)];
  if (!(phi_b > 0.0)) return kNegInf;
  double ld = std::log(scene_.source.density(x0)) + std::log(phi_b) - std::log(src.signal);
  for (std::size_t k = 1; k < vs.size(); ++k) {
    const PathVertex& cur = vs[k];
    if (!has_direction(cur)) break;
    if (!(scene_.albedo_at(cur.position, cur.segment) > 0.0)) return kNegInf;
    adjoint_->launch_row(cur.segment, cur.position, row_);
    ld += std::log(row_.density(cur.direction));
  }
  return ld;
}

Path run_analog(const Scene& scene, Rng& rng) {
  Path p;
  Transport(scene, nullptr, {ChainKind::Analog}).run_analog(rng, p);
  return p;
}

Path run_survival_biased(const Scene& scene, Rng& rng) {
  Path p;
  Transport(scene, nullptr, {ChainKind::SurvivalBiased}).run_survival_biased(rng, p);
  return p;
}

Path run_pure_sai(const Scene& scene, const AdjointTable& adjoint, Rng& rng) {
  Path p;
  Transport(scene, &adjoint, {ChainKind::PureSai}).run_pure_sai(rng, p);
  return p;
}

Path run_heuristic(const Scene& scene, double q_v, Rng& rng) {
  ChainParams params{ChainKind::Heuristic};
  params.q_v = q_v;
  Path p;
  Transport(scene, nullptr, params).run_heuristic(rng, p);
  return p;
}

Path run_regularized_sai(const Scene& scene, const AdjointTable& adjoint, const ChainParams& params,
                         Rng& rng) {
  ChainParams pr = params;
  pr.chain = ChainKind::Regularized;
  Path p;
  Transport(scene, &adjoint, pr).run_regularized(rng, p);
  return p;
}

double density_analog(const Scene& scene, const Path& path) {
  return std::exp(Transport(scene, nullptr, {ChainKind::Analog}).log_density_analog(path));
}

double density_heu(const Scene& scene, double q_v, const Path& path) {
  ChainParams params{ChainKind::Heuristic};
  params.q_v = q_v;
  return std::exp(Transport(scene, nullptr, params).log_density_heu(path));
}

double density_sai(const Scene& scene, const AdjointTable& adjoint, const Path& path) {
  return std::exp(Transport(scene, &adjoint, {ChainKind::PureSai}).log_density_sai(path));
}

void write_trace_header(std::ostream& out) { out << "path,vertex,x,y,kind,segment,weight,status\n"; }

void write_trace(std::ostream& out, std::size_t index, const Path& path) {
  static constexpr const char* kinds[] = {"source", "volume", "boundary"};
  for (std::size_t k = 0; k < path.vertices.size(); ++k) {
    const PathVertex& v = path.vertices[k];
    out << index << ',' << k << ',' << fmt(v.position.x()) << ',' << fmt(v.position.y()) << ','
        << kinds[static_cast<int>(v.kind)] << ',' << v.segment << ',' << fmt(path.weight) << ','
        << to_string(path.status) << '\n';
  }
}

}  // namespace hmc
