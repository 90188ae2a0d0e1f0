#include "hybridmc/adjoint.hpp"

#include "hybridmc/csv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace hmc {

namespace {

constexpr double kFacingTol = 1e-12;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Assembly assemble(const Scene& scene) {
  const BoundaryMesh& mesh = *scene.mesh;
  const int n = mesh.size();
  Assembly out;
  out.A = Eigen::MatrixXd::Zero(n, n);
  out.rg = Eigen::VectorXd::Zero(n);
  out.view.assign(static_cast<std::size_t>(n), {});
  out.alpha.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.alpha[static_cast<std::size_t>(i)] = scene.albedo_of_segment(i);
    if (mesh.segment(i).cls == SurfaceClass::Detector) out.rg[i] = 1.0;
  }

  for (int i = 0; i < n; ++i) {
    const Segment& si = mesh.segment(i);
    const double ai = out.alpha[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < n; ++j) {
      const double aj = out.alpha[static_cast<std::size_t>(j)];
      if (ai <= 0.0 && aj <= 0.0) continue;
      const Segment& sj = mesh.segment(j);
      const Vec2 delta = sj.center - si.center;
      const double d = delta.norm();
      const double cos_i = -si.normal.dot(delta) / d;
      const double cos_j = sj.normal.dot(delta) / d;
      if (cos_i <= kFacingTol || cos_j <= kFacingTol) continue;
      if (!visible(mesh, i, j)) continue;
      out.view[static_cast<std::size_t>(i)].push_back(j);
      out.view[static_cast<std::size_t>(j)].push_back(i);
      const double g = cos_i * cos_j / (2.0 * d);
      out.A(i, j) = ai * sj.length * g;
      out.A(j, i) = aj * si.length * g;
    }
  }
  for (auto& v : out.view) std::sort(v.begin(), v.end());
  return out;
}

SolveResult solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& rg, double tol, int max_iter) {
  SolveResult res;
  Eigen::VectorXd phi = rg;
  Eigen::VectorXd next(rg.size());
  double prev_step = 0.0, ratio = 0.0;
  for (int k = 1; k <= max_iter; ++k) {
    next.noalias() = A * phi;
    next += rg;
    const double step = (next - phi).lpNorm<Eigen::Infinity>();
    phi.swap(next);
    if (prev_step > 0.0) ratio = step / prev_step;
    prev_step = step;
    if (!std::isfinite(step)) break;
    if (step < tol) {
      res.phi = phi;
      res.iterations = k;
      res.residual = (phi - A * phi - rg).lpNorm<Eigen::Infinity>();
      return res;
    }
  }
  std::ostringstream msg;
  msg << "adjoint iteration did not converge in " << max_iter
      << " steps; spectral radius estimate " << ratio;
  throw NonConvergence(msg.str(), ratio);
}

int SaiSource::bin_of(double x) const {
  if (edges.size() < 2 || x < edges.front() || x > edges.back()) return -1;
  auto it = std::upper_bound(edges.begin(), edges.end(), x);
  const int k = static_cast<int>(it - edges.begin()) - 1;
  return std::clamp(k, 0, static_cast<int>(edges.size()) - 2);
}

SaiSource build_sai_source(const BoundaryMesh& mesh, const Eigen::VectorXd& phi,
                           const BoundarySource& source) {
  SaiSource t;
  const double lo = source.x_lo(), hi = source.x_hi();
  std::vector<double> xs{lo, hi};
  for (const Segment& s : mesh.segments())
    for (const Vec2& p : {s.a, s.b})
      if (p.x() > lo && p.x() < hi) xs.push_back(p.x());
  std::sort(xs.begin(), xs.end());
  for (double x : xs)
    if (t.edges.empty() || x - t.edges.back() > 1e-12) t.edges.push_back(x);
  if (t.edges.back() < hi) t.edges.back() = hi;

  const std::size_t nb = t.edges.size() - 1;
  t.hit.resize(nb);
  t.phi.resize(nb);
  t.mass.resize(nb);
  t.pdf.resize(nb);
  t.cdf.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const double a = t.edges[k], b = t.edges[k + 1];
    const Vec2 origin(0.5 * (a + b), source.y());
    const auto hit = mesh.try_ray_cast(origin, source.direction());
    t.hit[k] = hit ? hit->segment : -1;
    t.phi[k] = hit ? phi[hit->segment] : 0.0;
    t.mass[k] = source.mass(a, b);
    t.signal += t.mass[k] * t.phi[k];
  }
  if (!(t.signal > 0.0)) throw AllZero("no source ray reaches a segment with positive importance");
  double acc = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    t.pdf[k] = t.mass[k] * t.phi[k] / t.signal;
    acc += t.pdf[k];
    t.cdf[k] = acc;
  }
  for (std::size_t k = nb; k-- > 0;) {
    if (t.pdf[k] > 0.0) {
      for (std::size_t m = k; m < nb; ++m) t.cdf[m] = 1.0;
      break;
    }
  }
  return t;
}

int sample_sai_source(const SaiSource& table, const BoundarySource& source, Rng& rng, double& x) {
  const double u = uniform01(rng);
  auto it = std::upper_bound(table.cdf.begin(), table.cdf.end(), u);
  int k = static_cast<int>(it - table.cdf.begin());
  k = std::min(k, static_cast<int>(table.cdf.size()) - 1);
  x = source.sample_x(table.edges[static_cast<std::size_t>(k)],
                      table.edges[static_cast<std::size_t>(k) + 1], rng);
  return k;
}

double LaunchRow::importance(const Vec2& v) const {
  if (m.dot(v) <= 0.0) return 0.0;
  const double s = cross(m, v);
  double acc = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k)
    if (s >= s_lo[k] && s <= s_hi[k]) acc += phi[k];
  return acc;
}

double LaunchRow::density(const Vec2& v) const {
  if (dead()) return 0.0;
  const double c = m.dot(v);
  if (c <= 0.0) return 0.0;
  return 0.5 * c * importance(v) / W;
}

Vec2 LaunchRow::sample(Rng& rng) const {
  const double pick = uniform01(rng) * W;
  double acc = 0.0;
  std::size_t k = 0;
  std::size_t last = 0;
  for (; k < target.size(); ++k) {
    const double w = 0.5 * phi[k] * (s_hi[k] - s_lo[k]);
    if (w <= 0.0) continue;
    last = k;
    acc += w;
    if (pick < acc) break;
  }
  if (k == target.size()) k = last;
  const double s = s_lo[k] + uniform01(rng) * (s_hi[k] - s_lo[k]);
  const double c = std::sqrt(std::max(0.0, 1.0 - s * s));
  return (c * m + s * perp(m)).normalized();
}

AdjointTable::AdjointTable(std::shared_ptr<const BoundaryMesh> mesh, Assembly assembly,
                           SolveResult solution, const BoundarySource& source)
    : mesh_(std::move(mesh)), assembly_(std::move(assembly)), solution_(std::move(solution)) {
  try {
    source_ = build_sai_source(*mesh_, solution_.phi, source);
  } catch (const AllZero&) {
    source_.reset();
  }
  c_sai_.assign(static_cast<std::size_t>(mesh_->size()), 0.0);
  LaunchRow row;
  for (int i = 0; i < mesh_->size(); ++i) {
    if (!(alpha(i) > 0.0) || !(phi(i) > 0.0)) continue;
    launch_row(i, mesh_->segment(i).center, row);
    if (!row.dead()) c_sai_[static_cast<std::size_t>(i)] = phi(i) / row.W;
  }
}

const SaiSource& AdjointTable::sai_source() const {
  if (!source_) throw AllZero("no source ray reaches a segment with positive importance");
  return *source_;
}

void AdjointTable::launch_row(int seg, const Vec2& r, LaunchRow& row) const {
  row.m = -mesh_->segment(seg).normal;
  row.target.clear();
  row.s_lo.clear();
  row.s_hi.clear();
  row.phi.clear();
  row.W = 0.0;
  const Vec2 m = row.m;
  for (int j : view(seg)) {
    const double pj = phi(j);
    if (!(pj > 0.0)) continue;
    const Segment& sj = mesh_->segment(j);
    const Vec2 d0 = sj.a - r, d1 = sj.b - r;
    const double c0 = m.dot(d0), c1 = m.dot(d1);
    double lo, hi;
    if (c0 >= 0.0 && c1 >= 0.0) {
      const double s0 = cross(m, d0) / d0.norm(), s1 = cross(m, d1) / d1.norm();
      lo = std::min(s0, s1);
      hi = std::max(s0, s1);
    } else if (c0 <= 0.0 && c1 <= 0.0) {
      continue;
    } else {
      const Vec2& df = c0 > 0.0 ? d0 : d1;
      const Vec2& db = c0 > 0.0 ? d1 : d0;
      const double cf = m.dot(df), cb = m.dot(db);
      const Vec2 cut = df + (cf / (cf - cb)) * (db - df);
      const double sf = cross(m, df) / df.norm();
      if (cross(m, cut) > 0.0) {
        lo = sf;
        hi = 1.0;
      } else {
        lo = -1.0;
        hi = sf;
      }
    }
    if (!(hi > lo)) continue;
    row.target.push_back(j);
    row.s_lo.push_back(lo);
    row.s_hi.push_back(hi);
    row.phi.push_back(pj);
    row.W += 0.5 * pj * (hi - lo);
  }
}

std::vector<std::pair<int, double>> AdjointTable::k_sai_row(int i) const {
  std::vector<std::pair<int, double>> out;
  if (!usable(i)) return out;
  LaunchRow row;
  launch_row(i, mesh_->segment(i).center, row);
  double total = 0.0;
  for (std::size_t k = 0; k < row.target.size(); ++k) {
    const double w = 0.5 * row.phi[k] * (row.s_hi[k] - row.s_lo[k]);
    out.emplace_back(row.target[k], w);
    total += w;
  }
  for (auto& [j, p] : out) p /= total;
  return out;
}

void AdjointTable::write_csv(std::ostream& out) const {
  out << "segment,center_x,center_y,phi,c_sai,alpha\n";
  for (int i = 0; i < size(); ++i) {
    const Segment& s = mesh_->segment(i);
    out << i << ',' << fmt(s.center.x()) << ',' << fmt(s.center.y()) << ',' << fmt(phi(i)) << ','
        << fmt(c_sai(i)) << ',' << fmt(alpha(i)) << '\n';
  }
}

AdjointTable build_adjoint(const Scene& scene, const AdjointOptions& options) {
  auto t0 = std::chrono::steady_clock::now();
  Assembly assembly = assemble(scene);
  const double t_asm = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  SolveResult sol = solve(assembly.A, assembly.rg, options.tol, options.max_iter);
  const double t_solve = seconds_since(t0);
  AdjointTable table(scene.mesh, std::move(assembly), std::move(sol), scene.source);
  table.assemble_sec = t_asm;
  table.solve_sec = t_solve;
  return table;
}

}  // namespace hmc
