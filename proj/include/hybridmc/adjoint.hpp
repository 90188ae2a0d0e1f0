#pragma once

#include "hybridmc/scene.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace hmc {

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double spectral_radius)
      : std::runtime_error(what), spectral_radius_(spectral_radius) {}
  double spectral_radius() const { return spectral_radius_; }

 private:
  double spectral_radius_;
};

/// Every source ray lands where the importance vanishes.
class AllZero : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Assembly {
  Eigen::MatrixXd A;
  Eigen::VectorXd rg;
  /// view[i]: segments j that face i and are visible from it (symmetric).
  std::vector<std::vector<int>> view;
  std::vector<double> alpha;  // albedo at segment centers
};

/// A_ij = alpha_i |seg_j| (cos_i / 2)(cos_j / |r_j - r_i|) visible(i,j), Rg = 1 on
/// detector segments. Pairs are ray-cast only when at least one side reflects.
Assembly assemble(const Scene& scene);

struct SolveResult {
  Eigen::VectorXd phi;
  int iterations = 0;
  double residual = 0.0;  // |phi - A phi - rg|_inf
};

/// Neumann iteration phi <- A phi + rg from phi = rg. Throws NonConvergence.
SolveResult solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& rg, double tol = 1e-12,
                  int max_iter = 100000);

/// Piecewise-constant source bins for the SAI start: the source support is cut at
/// every mesh vertex abscissa so that each bin's vertical ray lands on one segment.
struct SaiSource {
  std::vector<double> edges;     // bin boundaries in x
  std::vector<int> hit;          // segment hit by the bin's vertical ray
  std::vector<double> phi;       // importance of that segment
  std::vector<double> mass;      // source probability of the bin
  std::vector<double> pdf;       // mass * phi / S
  std::vector<double> cdf;
  double signal = 0.0;           // S = <Psi, Q>

  int bin_of(double x) const;  // -1 off the support
};

/// Directions leaving a boundary point toward the important part of the boundary.
/// Each support segment j contributes the interval of sin(theta) it subtends,
/// theta measured from the inward normal m and clipped to the front half plane.
struct LaunchRow {
  Vec2 m = Vec2::Zero();
  std::vector<int> target;
  std::vector<double> s_lo, s_hi, phi;
  double W = 0.0;  // sum of phi_j times Lambertian mass of the interval

  bool dead() const { return !(W > 0.0); }
  /// Sum of phi_j over intervals containing direction v.
  double importance(const Vec2& v) const;
  /// Angular density of v under the row (zero outside every interval).
  double density(const Vec2& v) const;
  Vec2 sample(Rng& rng) const;
};

class AdjointTable {
 public:
  AdjointTable(std::shared_ptr<const BoundaryMesh> mesh, Assembly assembly, SolveResult solution,
               const BoundarySource& source);

  const BoundaryMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const BoundaryMesh> mesh_ptr() const { return mesh_; }
  double h() const { return mesh_->h(); }
  int size() const { return mesh_->size(); }

  const Eigen::MatrixXd& A() const { return assembly_.A; }
  const Eigen::VectorXd& rg() const { return assembly_.rg; }
  const Eigen::VectorXd& phi() const { return solution_.phi; }
  double phi(int i) const { return solution_.phi[i]; }
  double residual() const { return solution_.residual; }
  int iterations() const { return solution_.iterations; }
  const std::vector<int>& view(int i) const { return assembly_.view[static_cast<std::size_t>(i)]; }
  double alpha(int i) const { return assembly_.alpha[static_cast<std::size_t>(i)]; }

  /// Throws AllZero when no source ray reaches positive importance.
  const SaiSource& sai_source() const;
  double ballistic_signal() const { return source_ ? source_->signal : 0.0; }

  /// phi_i / W(r_i); zero on rows without importance.
  double c_sai(int i) const { return c_sai_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& c_sai() const { return c_sai_; }
  bool usable(int i) const { return c_sai_[static_cast<std::size_t>(i)] > 0.0; }

  /// Discrete target pdf of the SAI direction row at the segment center.
  std::vector<std::pair<int, double>> k_sai_row(int i) const;

  /// Builds the launch row at point r on segment seg into `row`.
  void launch_row(int seg, const Vec2& r, LaunchRow& row) const;

  double assemble_sec = 0.0;
  double solve_sec = 0.0;
  double t0() const { return assemble_sec + solve_sec; }

  /// CSV: segment,center_x,center_y,phi,c_sai,alpha
  void write_csv(std::ostream& out) const;

 private:
  std::shared_ptr<const BoundaryMesh> mesh_;
  Assembly assembly_;
  SolveResult solution_;
  std::optional<SaiSource> source_;
  std::vector<double> c_sai_;
};

SaiSource build_sai_source(const BoundaryMesh& mesh, const Eigen::VectorXd& phi,
                           const BoundarySource& source);

/// Samples a start point from the SAI source; returns the bin index.
int sample_sai_source(const SaiSource& table, const BoundarySource& source, Rng& rng, double& x);

/// <Psi, Q> for a solved table.
inline double ballistic_signal(const AdjointTable& table) { return table.ballistic_signal(); }

struct AdjointOptions {
  double tol = 1e-12;
  int max_iter = 100000;
};

/// Assemble, solve and tabulate. Timings are stored on the table.
AdjointTable build_adjoint(const Scene& scene, const AdjointOptions& options = {});

}  // namespace hmc
