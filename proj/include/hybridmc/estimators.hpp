#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>

namespace hmc {

struct Path;

/// Weighted tally. Alongside the raw power sums it keeps a running mean and
/// second central moment, which stay accurate when the weights barely vary.
struct Tally {
  std::uint64_t n = 0;
  std::uint64_t hits = 0;
  std::uint64_t cutoff = 0;
  std::uint64_t capped = 0;
  std::uint64_t dead = 0;
  double sum_w = 0.0;
  double sum_w2 = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  double lost_weight = 0.0;

  void add(double w);
  void add(const Path& path);
};

/// Componentwise merge; the moments combine by the pairwise update.
Tally merge(const Tally& a, const Tally& b);

struct Estimate {
  double mean = 0.0;
  double variance = 0.0;
  double rms = 0.0;
};

/// Throws std::domain_error for fewer than two draws.
Estimate estimate(const Tally& t);

inline constexpr double kInfiniteM = std::numeric_limits<double>::infinity();

struct FomReport {
  std::string chain;
  double h = 0.0;
  double mfp_over_diam = 0.0;
  double q_s = 1.0;
  double q_v = 1.0;
  std::uint64_t N = 0;
  double mean = 0.0;
  double variance = 0.0;
  double rms = 0.0;
  double tau_sec = 0.0;
  double T0_sec = 0.0;
  double m = kInfiniteM;
  double speedup = std::numeric_limits<double>::quiet_NaN();
};

void write_fom_header(std::ostream& out);
void write_fom_row(std::ostream& out, const FomReport& r);

/// m tau_sb Var_sb / ((eps/h)^2 C + m tau_q Var_q); an infinite m drops the
/// deterministic term. A vanishing denominator gives +inf.
double speedup(const FomReport& sb, const FomReport& q, double eps, double m, double C);

/// |mc - ballistic| / mc. Throws std::domain_error for mc == 0.
double deterministic_error(double mc_estimate, double ballistic);

/// Least-squares C in T0 = C h^-2 over the given samples.
double fit_cost_constant(const double* h, const double* t0, int count);

}  // namespace hmc
