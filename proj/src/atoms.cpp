#include "oscint/atoms.hpp"

#include <cmath>
#include <stdexcept>

#include "oscint/rng.hpp"

namespace oscint {

double signed_step(double u) {
  if (u < -0.5 || u > 0.5) return 0.0;
  return u >= 0.0 ? 1.0 : -1.0;
}

double legendre(int n, double t) {
  if (n == 0) return 1.0;
  double pm = 1.0, pc = t;
  for (int k = 1; k < n; ++k) {
    double pn = ((2.0 * k + 1.0) * t * pc - k * pm) / (k + 1.0);
    pm = pc;
    pc = pn;
  }
  return pc;
}

namespace {

AtomFactor step_factor() {
  AtomFactor f;
  f.half = 0.5;
  f.eval = [](double u) { return std::complex<double>(signed_step(u), 0.0); };
  f.jumps = {0.0};
  return f;
}

}  // namespace

Atom atom_signed_square() {
  Atom a;
  a.kind = Atom::Kind::signed_square;
  a.dim = 2;
  a.f1 = step_factor();
  a.f2 = step_factor();
  return a;
}

Atom atom_chirp(double len) {
  if (!(len > 0.0) || len > 1.0)
    throw std::invalid_argument("atom_chirp: interval length must lie in (0, 1]");
  Atom a;
  a.kind = Atom::Kind::chirp_1d;
  a.dim = 1;
  a.f1.half = 0.5 * len;
  double half = a.f1.half;
  a.f1.eval = [half](double s) -> std::complex<double> {
    if (s < -half || s > half) return {0.0, 0.0};
    double sign = s >= 0.0 ? 1.0 : -1.0;
    return sign * std::complex<double>(std::cos(s * s), -std::sin(s * s));
  };
  a.f1.jumps = {0.0};
  return a;
}

namespace {

// Mean-zero combination of Legendre modes P_1..P_modes rescaled to
// [-1/2, 1/2].  Orthogonality gives ||P_n(2.)||_2^2 = 1/(2n+1) exactly, so
// the normalization below is exact rather than numerical.
AtomFactor legendre_factor(Rng& rng, int modes) {
  std::vector<double> c(static_cast<std::size_t>(modes));
  double norm2 = 0.0;
  for (int n = 1; n <= modes; ++n) {
    double cn = rng.next_normal();
    c[static_cast<std::size_t>(n - 1)] = cn;
    norm2 += cn * cn / (2.0 * n + 1.0);
  }
  double scale = 1.0 / std::sqrt(norm2);
  for (double& cn : c) cn *= scale;

  AtomFactor f;
  f.half = 0.5;
  f.eval = [c](double y) -> std::complex<double> {
    if (y < -0.5 || y > 0.5) return {0.0, 0.0};
    double v = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      v += c[i] * legendre(static_cast<int>(i) + 1, 2.0 * y);
    return {v, 0.0};
  };
  return f;
}

}  // namespace

Atom atom_random_tensor(std::uint64_t seed, int modes) {
  if (modes < 1)
    throw std::invalid_argument("atom_random_tensor: need at least one mode");
  Rng rng(seed);
  Atom a;
  a.kind = Atom::Kind::random_tensor;
  a.dim = 2;
  a.f1 = legendre_factor(rng, modes);
  a.f2 = legendre_factor(rng, modes);
  return a;
}

}  // namespace oscint
