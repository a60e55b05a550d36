#pragma once

// Smooth dyadic cutoffs and the single-scale convolution kernels built from
// them.
//
// The base cutoff chi is an exponential blend: with g(t) = exp(-1/t) for
// t > 0 and 0 otherwise,
//
//     chi(s) = 1                                   for |s| <= 1,
//     chi(s) = g(2-|s|) / (g(2-|s|) + g(|s|-1))    for 1 < |s| < 2,
//     chi(s) = 0                                   for |s| >= 2.
//
// phi(s) = chi(s) - chi(2s) is supported in 1/2 <= |s| <= 2 and the dilates
// phi(2^-p s) tile: sum over p of phi(2^-p s) = 1 for s != 0, exactly
// (telescoping), which partition_check verifies numerically.
//
// psi(p, s) = phi(2^-p s) / s is the scale-p kernel piece: odd, smooth,
// supported in 2^(p-1) <= |s| <= 2^(p+1), and scales exactly as
// psi(p, s) = 2^-p psi(0, 2^-p s) because dyadic rescaling is exact in
// binary floating point.  psi2 is the tensor product of two such pieces.

#include <cmath>

namespace oscint {

inline double gexp(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

inline double chi_cut(double s) {
  double a = std::fabs(s);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  double up = gexp(2.0 - a);
  return up / (up + gexp(a - 1.0));
}

inline double phi_cut(double s) { return chi_cut(s) - chi_cut(2.0 * s); }

inline double psi(int p, double s) {
  if (s == 0.0) return 0.0;
  return phi_cut(std::ldexp(s, -p)) / s;
}

inline double psi2(int p, int q, double y1, double y2) {
  return psi(p, y1) * psi(q, y2);
}

// Smooth plateau bump: 1 for |t| <= r_flat, 0 for |t| >= r_supp, blended in
// between with the same exponential construction as chi_cut.
inline double smooth_bump(double t, double r_flat, double r_supp) {
  double a = std::fabs(t);
  if (a <= r_flat) return 1.0;
  if (a >= r_supp) return 0.0;
  double u = (a - r_flat) / (r_supp - r_flat);
  double up = gexp(1.0 - u);
  return up / (up + gexp(u));
}

// Max deviation of sum over |p| <= p_max of phi(2^-p s) from 1, sampled at
// sample_n log-uniform points s in [2^(1-p_max), 2^(p_max-1)] (both signs).
// Deterministic; the sample grid is fixed.
double partition_check(int p_max, int sample_n);

}  // namespace oscint
