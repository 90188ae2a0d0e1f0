#pragma once

// Shared oracles for the test binaries. Nothing here calls into the solver
// code paths it is used to check.

#include "hybridmc/adjoint.hpp"
#include "hybridmc/scene.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace hmc::testing {

inline constexpr double kPi = std::numbers::pi;

// Kolmogorov asymptotic tail with the usual small-sample correction.
inline double ks_pvalue(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

// Pearson test; bins with expected count below 5 are pooled with their neighbour.
inline double chi2_pvalue(const std::vector<double>& observed, const std::vector<double>& expected_prob) {
  double n = 0.0;
  for (double o : observed) n += o;
  std::vector<double> obs, exp;
  double o_acc = 0.0, e_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o_acc += observed[i];
    e_acc += expected_prob[i] * n;
    if (e_acc >= 5.0) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (e_acc > 0.0 || o_acc > 0.0) {
    if (exp.empty()) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
    } else {
      obs.back() += o_acc;
      exp.back() += e_acc;
    }
  }
  if (exp.size() < 2) return 1.0;
  double stat = 0.0;
  for (std::size_t i = 0; i < exp.size(); ++i) stat += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  boost::math::chi_squared dist(static_cast<double>(exp.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

inline Arc line(Vec2 a, Vec2 b, SurfaceClass cls) {
  Arc arc;
  arc.kind = Arc::Kind::Line;
  arc.a = a;
  arc.b = b;
  arc.cls = cls;
  return arc;
}

// Unit-height box: single reflecting floor, every other side a detector, source
// on the lid shining down. Every reflected photon is detected, so P[D] = albedo.
inline Scene zero_variance_box(double albedo) {
  BoundaryCurve c;
  c.arcs = {line({-1, 0}, {1, 0}, SurfaceClass::Mountain), line({1, 0}, {1, 1}, SurfaceClass::Detector),
            line({1, 1}, {-1, 1}, SurfaceClass::Detector), line({-1, 1}, {-1, 0}, SurfaceClass::Detector)};
  return build_scene(c, 2.0, CoefficientField::constant(0, 0), AlbedoField(AlbedoVariant::Uniform, albedo),
                     BoundarySource(SourceVariant::Flat, 1.0, -0.5, 0.5), Detector{{1, 0}, {1, 1}});
}

// V-shaped cavity: two reflecting slopes, lid split into sky and a detector on x in [0.3, 1].
inline Scene v_cavity(double albedo, double h, CoefficientField field = CoefficientField::constant(0, 0)) {
  BoundaryCurve c;
  c.arcs = {line({-1, 1}, {0, 0}, SurfaceClass::Mountain), line({0, 0}, {1, 1}, SurfaceClass::Mountain),
            line({1, 1}, {0.3, 1}, SurfaceClass::Detector), line({0.3, 1}, {-1, 1}, SurfaceClass::Sky)};
  return build_scene(c, h, field, AlbedoField(AlbedoVariant::Uniform, albedo),
                     BoundarySource(SourceVariant::Flat, 1.0, -0.9, 0.9), Detector{{1, 1}, {0.3, 1}});
}

// Lambertian mass (sin b - sin a)/2 of the directions from p toward the chord [q0, q1],
// measured about the inward normal m; assumes the chord lies in front of p.
inline double lambert_mass(const Vec2& p, const Vec2& m, const Vec2& q0, const Vec2& q1) {
  auto s = [&](const Vec2& q) {
    const Vec2 d = (q - p).normalized();
    return m.x() * d.y() - m.y() * d.x();
  };
  return 0.5 * std::abs(s(q1) - s(q0));
}

// Nystrom solution of the continuous V-cavity importance with Gauss-Legendre
// panels graded geometrically toward the apex. Returns P[D] for the flat source.
inline double v_cavity_oracle(double albedo) {
  constexpr int kPanels = 24;
  constexpr double kGrade = 0.6;
  const double L = std::sqrt(2.0);
  // nodes along one slope by distance from the apex
  std::vector<double> s, w;
  double hi = L;
  for (int p = 0; p < kPanels; ++p) {
    const double lo = p + 1 == kPanels ? 0.0 : hi * kGrade;
    const auto& abs = boost::math::quadrature::gauss<double, 20>::abscissa();
    const auto& wts = boost::math::quadrature::gauss<double, 20>::weights();
    auto push = [&](double x, double wt) {
      s.push_back(0.5 * (lo + hi) + 0.5 * (hi - lo) * x);
      w.push_back(0.5 * (hi - lo) * wt);
    };
    for (std::size_t k = 0; k < abs.size(); ++k) {
      push(abs[k], wts[k]);
      if (abs[k] != 0.0) push(-abs[k], wts[k]);
    }
    hi = lo;
  }
  const int n = static_cast<int>(s.size());
  const Vec2 uL = Vec2(-1, 1).normalized(), uR = Vec2(1, 1).normalized();
  const Vec2 mL = Vec2(1, 1).normalized(), mR = Vec2(-1, 1).normalized();  // inward normals
  auto point = [&](int side, double t) { return side == 0 ? Vec2(t * uL) : Vec2(t * uR); };
  auto inward = [&](int side) { return side == 0 ? mL : mR; };
  auto direct = [&](int side, double t) {
    return albedo * lambert_mass(point(side, t), inward(side), {0.3, 1.0}, {1.0, 1.0});
  };
  auto kernel = [&](int side, double t, double t2) {
    const Vec2 p = point(side, t), q = point(1 - side, t2);
    const Vec2 d = q - p;
    const double r = d.norm();
    const double ci = inward(side).dot(d) / r, cj = inward(1 - side).dot(-d) / r;
    return albedo * ci * cj / (2.0 * r);
  };
  // unknowns: left slope nodes then right slope nodes
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  Eigen::VectorXd g(2 * n);
  for (int side = 0; side < 2; ++side)
    for (int i = 0; i < n; ++i) {
      g[side * n + i] = direct(side, s[i]);
      for (int j = 0; j < n; ++j) M(side * n + i, (1 - side) * n + j) -= w[j] * kernel(side, s[i], s[j]);
    }
  const Eigen::VectorXd psi = M.partialPivLu().solve(g);
  auto psi_at = [&](int side, double t) {
    double v = direct(side, t);
    for (int j = 0; j < n; ++j) v += w[j] * kernel(side, t, s[j]) * psi[(1 - side) * n + j];
    return v;
  };
  // source integral over x in (-0.9, 0.9), density 1/1.8; the ray lands at (x, |x|)
  double total = 0.0;
  const auto& abs = boost::math::quadrature::gauss<double, 30>::abscissa();
  const auto& wts = boost::math::quadrature::gauss<double, 30>::weights();
  for (int side = 0; side < 2; ++side) {
    for (int p = 0; p < 40; ++p) {
      const double a = 0.9 * p / 40.0, b = 0.9 * (p + 1) / 40.0;
      for (std::size_t k = 0; k < abs.size(); ++k) {
        for (double sign : {1.0, -1.0}) {
          if (abs[k] == 0.0 && sign < 0) continue;
          const double x = 0.5 * (a + b) + sign * 0.5 * (b - a) * abs[k];
          total += 0.5 * (b - a) * wts[k] * psi_at(side, x * std::sqrt(2.0)) / 1.8;
        }
      }
    }
  }
  return total;
}

}  // namespace hmc::testing
