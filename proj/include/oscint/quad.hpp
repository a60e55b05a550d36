#pragma once

// Adaptive quadrature for oscillatory integrals with polynomial phases,
//
//     I = integral of amp(s) * exp(i*Phi(s)) ds
//
// in one and two dimensions.  Phases are polynomials with real coefficients;
// amplitudes are arbitrary (piecewise-)smooth callables whose kink locations
// the caller passes in as breakpoints so panels can align with them.
//
// Strategy.  The domain is split at breakpoints and at the real roots of
// Phi' and Phi'' so that Phi' is single-signed and monotone on every
// segment.  On a segment whose total phase variation is moderate, panels of
// at most a quarter oscillation each are integrated by Gauss-Legendre rules
// and refined worst-first until the summed two-level differences meet the
// tolerance.  When the variation is too large for that to ever fit in the
// panel budget (phases here reach ~1e11), panels switch to a Levin
// collocation rule: solve u' + i*Phi'*u = amp by Chebyshev collocation and
// evaluate u*exp(i*Phi) at the panel ends, which costs the same regardless
// of how fast the phase spins.  Panels whose derivative lower bound already
// certifies a contribution below the tolerance share are dropped with the
// bound charged to the error estimate.  All exp(i*Phi) evaluations reduce
// the phase mod 2*pi in double-double arithmetic first; without that, a
// phase of 1e11 would carry ~1e-5 of rounding noise into the integrand.
//
// The two-dimensional integrator runs the same scheme on rectangles with
// per-axis oscillation counts, tensor Gauss-Legendre rules on resolved
// cells, and a two-unknown Levin collocation (divergence form) on
// unresolved cells, whose boundary term reduces to four one-dimensional
// oscillatory edge integrals.
//
// Results always carry an error estimate and a converged flag; callers are
// expected to refuse to use flagged values.

#include <complex>
#include <functional>
#include <vector>

#include "oscint/poly.hpp"

namespace oscint {

struct QuadSpec {
  double rel_tol = 1e-6;
  double abs_tol = 1e-10;
  long max_panels = 1l << 20;
  int nodes_per_panel = 16;
};

struct QuadResult {
  std::complex<double> value{0.0, 0.0};
  double err = 0.0;
  bool converged = true;
  long panels = 0;
};

struct Rect {
  double x1lo = 0, x1hi = 0, x2lo = 0, x2hi = 0;
  double w1() const { return x1hi - x1lo; }
  double w2() const { return x2hi - x2lo; }
};

using Amp1 = std::function<std::complex<double>(double)>;
using Amp2 = std::function<std::complex<double>(double, double)>;

// Phase polynomial in one variable, ascending coefficients:
// c[0] + c[1] s + c[2] s^2 + ...
using Poly1 = std::vector<double>;

double poly1_eval(const Poly1& c, double s);
Poly1 poly1_derive(const Poly1& c);
// Real roots in [a, b], ascending, clustered roots merged.
std::vector<double> poly1_real_roots(const Poly1& c, double a, double b);

QuadResult integrate_osc_1d(const Amp1& amp, const Poly1& phase, double a,
                            double b, const QuadSpec& spec,
                            const std::vector<double>& breakpoints = {});

QuadResult integrate_osc_2d(const Amp2& amp, const Poly2& phase,
                            const Rect& box, const QuadSpec& spec,
                            const std::vector<double>& breaks1 = {},
                            const std::vector<double>& breaks2 = {});

// Restriction of a bivariate phase to a line x_axis = value (axis 0 fixes
// x1, axis 1 fixes x2), as a univariate phase in the free variable.
Poly1 poly2_restrict(const Poly2& p, int fixed_axis, double value);

// Stationary-phase decay probe.  Checks on a grid that |partial(Q, alpha)|
// >= lambda on the box (throws std::domain_error otherwise), then returns
// the measured |integral of amp * exp(iQ)| together with the bound
// lambda^(-delta) * (max|amp| + l1 norm of grad amp), where
// delta = min(1/2, max over a in delta_set of 1/|a|).
struct VdcProbe {
  double integral_mag = 0;
  double envelope = 0;
  double delta = 0;
  bool converged = true;
};
VdcProbe vdc_probe(const Poly2& q, const SupportSet& delta_set,
                   const Amp2& amp, const Rect& box, double lambda,
                   MultiIndex alpha, const QuadSpec& spec);

// Sum over p in scales of the scale-p kernel integral of exp(i*phase):
// each term integrates psi(p, s) * exp(i*phase(s)) over both components of
// its dyadic support, panels aligned to the radii.  Terms accumulate with
// compensated summation; converged only if every term converged.
QuadResult ul2_sum(const Poly1& phase, const std::vector<int>& scales,
                   const QuadSpec& spec);

}  // namespace oscint
