#pragma once

// Test functions ("atoms") fed to the operators: supported on a centered
// rectangle, mean zero along every coordinate line, L2 norm at most
// |rect|^(-1/2).  All three kinds used here are tensor products of
// one-dimensional factors, which keeps the cancellation checks and the
// nested quadrature oracles one-dimensional.
//
//   * signed_square: b(y1) b(y2) on the unit square, where b is the odd
//     unit step (+1 on [0, 1/2], -1 on [-1/2, 0)).
//   * chirp_1d:      e^{-i s^2} b_I(s) on [-len/2, len/2]; the modulation
//     carries the oscillation, the cancellation sits in the odd step b_I.
//   * random_tensor: u(y1) v(y2) with u, v seeded combinations of
//     Legendre modes P_1..P_modes rescaled to [-1/2, 1/2].  Each mode has
//     exact mean zero, and orthogonality gives an exact unit L2
//     normalization.

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

namespace oscint {

struct AtomFactor {
  double half = 0.5;  // support [-half, half]
  std::function<std::complex<double>(double)> eval;
  std::vector<double> jumps;  // interior discontinuity points
};

struct Atom {
  enum class Kind { signed_square, chirp_1d, random_tensor };

  Kind kind = Kind::signed_square;
  int dim = 2;
  AtomFactor f1, f2;  // f2 unused when dim == 1

  std::complex<double> operator()(double y1, double y2) const {
    return f1.eval(y1) * f2.eval(y2);
  }
  std::complex<double> operator()(double s) const { return f1.eval(s); }
};

// Odd unit step on [-1/2, 1/2], +1 on the right half.
double signed_step(double u);

Atom atom_signed_square();

// One-dimensional chirp atom e^{-i s^2} b_I(s) on [-len/2, len/2].
// Throws std::invalid_argument unless 0 < len <= 1.
Atom atom_chirp(double len);

// Tensor product of seeded mean-zero Legendre combinations, unit L2 norm.
// Throws std::invalid_argument unless modes >= 1.
Atom atom_random_tensor(std::uint64_t seed, int modes);

// Legendre polynomial P_n on [-1, 1] (three-term recurrence).
double legendre(int n, double t);

}  // namespace oscint
