#include "hybridmc/estimators.hpp"

#include "hybridmc/csv.hpp"

#include "hybridmc/transport.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace hmc {

void Tally::add(double w) {
  ++n;
  sum_w += w;
  sum_w2 += w * w;
  const double delta = w - mean;
  mean += delta / static_cast<double>(n);
  m2 += delta * (w - mean);
}

void Tally::add(const Path& path) {
  add(path.weight);
  switch (path.status) {
    case Termination::Detector: ++hits; break;
    case Termination::WeightCutoff: ++cutoff; break;
    case Termination::LengthCap: ++capped; break;
    case Termination::DeadRow: ++dead; break;
    default: break;
  }
  lost_weight += path.lost_weight;
}

Tally merge(const Tally& a, const Tally& b) {
  if (a.n == 0) return b;
  if (b.n == 0) return a;
  Tally t;
  t.n = a.n + b.n;
  t.hits = a.hits + b.hits;
  t.cutoff = a.cutoff + b.cutoff;
  t.capped = a.capped + b.capped;
  t.dead = a.dead + b.dead;
  t.sum_w = a.sum_w + b.sum_w;
  t.sum_w2 = a.sum_w2 + b.sum_w2;
  t.lost_weight = a.lost_weight + b.lost_weight;
  const double na = static_cast<double>(a.n), nb = static_cast<double>(b.n), n = na + nb;
  const double delta = b.mean - a.mean;
  t.mean = (na * a.mean + nb * b.mean) / n;
  t.m2 = a.m2 + b.m2 + delta * delta * (na * nb / n);
  return t;
}

Estimate estimate(const Tally& t) {
  if (t.n < 2) throw std::domain_error("variance needs at least two draws");
  Estimate e;
  const double n = static_cast<double>(t.n);
  e.mean = t.sum_w / n;
  e.variance = std::max(0.0, t.m2 / (n - 1.0));
  e.rms = std::sqrt(e.variance / n);
  return e;
}

void write_fom_header(std::ostream& out) {
  out << "chain,h,mfp_over_diam,q_s,q_v,N,mean,variance,rms,tau_sec,T0_sec,m,speedup\n";
}

void write_fom_row(std::ostream& out, const FomReport& r) {
  out << r.chain << ',' << fmt(r.h) << ',' << fmt(r.mfp_over_diam) << ',' << fmt(r.q_s) << ','
      << fmt(r.q_v) << ',' << r.N << ',' << fmt(r.mean) << ',' << fmt(r.variance) << ',' << fmt(r.rms)
      << ',' << fmt(r.tau_sec) << ',' << fmt(r.T0_sec) << ',' << fmt(r.m) << ',' << fmt(r.speedup) << '\n';
}

double speedup(const FomReport& sb, const FomReport& q, double eps, double m, double C) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (std::isinf(m)) {
    const double den = q.tau_sec * q.variance;
    return den > 0.0 ? sb.tau_sec * sb.variance / den : inf;
  }
  const double ratio = eps / q.h;
  const double den = ratio * ratio * C + m * q.tau_sec * q.variance;
  return den > 0.0 ? m * sb.tau_sec * sb.variance / den : inf;
}

double deterministic_error(double mc_estimate, double ballistic) {
  if (mc_estimate == 0.0) throw std::domain_error("deterministic error undefined for a zero estimate");
  return std::abs(mc_estimate - ballistic) / mc_estimate;
}

double fit_cost_constant(const double* h, const double* t0, int count) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < count; ++i) {
    const double x = 1.0 / (h[i] * h[i]);
    num += x * t0[i];
    den += x * x;
  }
  if (!(den > 0.0)) throw std::domain_error("cost fit needs at least one sample");
  return num / den;
}

}  // namespace hmc
