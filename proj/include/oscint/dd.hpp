#pragma once

// Minimal double-double arithmetic for accurate evaluation of polynomial
// phases.  A phase value near 1e11 carries ~1e-5 of absolute rounding error
// in plain double, which is fatal when it is fed to sin/cos: the computed
// oscillatory integrand would be off by more than the integral itself.
// Evaluating the phase as an (hi, lo) pair and reducing mod 2*pi before
// taking sin/cos keeps the reduced angle accurate to ~1e-20 over the whole
// parameter range this project touches.
//
// Only the handful of operations needed for Horner evaluation and angle
// reduction are provided.

#include <cmath>

namespace oscint {

struct DD {
  double hi = 0.0;
  double lo = 0.0;
};

// Error-free sum of two doubles (Knuth two-sum).
inline DD two_sum(double a, double b) {
  double s = a + b;
  double bb = s - a;
  double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}

// Error-free product via FMA.
inline DD two_prod(double a, double b) {
  double p = a * b;
  double err = std::fma(a, b, -p);
  return {p, err};
}

inline DD dd_add(DD a, double b) {
  DD s = two_sum(a.hi, b);
  s.lo += a.lo;
  DD r = two_sum(s.hi, s.lo);
  return r;
}

inline DD dd_add(DD a, DD b) {
  DD s = two_sum(a.hi, b.hi);
  s.lo += a.lo + b.lo;
  DD r = two_sum(s.hi, s.lo);
  return r;
}

inline DD dd_mul(DD a, double b) {
  DD p = two_prod(a.hi, b);
  p.lo += a.lo * b;
  DD r = two_sum(p.hi, p.lo);
  return r;
}

inline DD dd_mul(DD a, DD b) {
  DD p = two_prod(a.hi, b.hi);
  p.lo += a.hi * b.lo + a.lo * b.hi;
  DD r = two_sum(p.hi, p.lo);
  return r;
}

inline double dd_value(DD a) { return a.hi + a.lo; }

// 2*pi split into high and low parts (exactly representable doubles).
inline constexpr double kTwoPiHi = 6.283185307179586;
inline constexpr double kTwoPiLo = 2.4492935982947064e-16;

// Reduces a double-double angle mod 2*pi into roughly [-pi, pi].  The
// quotient is computed in double, which is exact enough: angles here stay
// below ~1e13, so the rounded quotient is off by at most a few ulps and the
// correction loop below repairs it.
inline double dd_mod_2pi(DD a) {
  double q = std::floor(dd_value(a) / kTwoPiHi + 0.5);
  DD r = dd_add(a, dd_mul(DD{-kTwoPiHi, -kTwoPiLo}, q));
  double v = dd_value(r);
  while (v > kTwoPiHi / 2) {
    r = dd_add(r, DD{-kTwoPiHi, -kTwoPiLo});
    v = dd_value(r);
  }
  while (v < -kTwoPiHi / 2) {
    r = dd_add(r, DD{kTwoPiHi, kTwoPiLo});
    v = dd_value(r);
  }
  return v;
}

}  // namespace oscint
