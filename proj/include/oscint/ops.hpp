#pragma once

// The dyadic operator pieces and their norm estimators.
//
//   T_p a(x)  = integral of psi_p(y1) psi_q(y2) e^{iP(y)} a(x - y) dy
//   T_F a(x)  = sum over (p,q) in F of T_p a(x)
//
// plus the one-parameter chirp operator T f(x) = int e^{i(x-y)^2} f(y)/(x-y)
// dy that the single-scale decay experiment measures, and the T*T machinery
// (kernel L, Schur bound, power iteration) behind the L2 decay sweeps.
//
// Everything here reduces to oscillatory quadrature over explicitly
// intersected support rectangles.  Support arithmetic is done first and
// exactly: when the dyadic annulus product misses the (shifted) atom
// support, the result is zero with no quadrature performed, which is what
// makes the outer L1 integrals over large regions affordable.
//
// The norm estimators exploit that T_p is a convolution sandwiched between
// smooth cutoffs: both the T*T kernel L(x,u) = phi(x) phi(u) M(u - x) and
// the discretized operator matrix depend on grid points only through their
// difference, so an estimator on an n^2 grid needs O(n^2) oscillatory
// integrals, not O(n^4).

#include <complex>
#include <cstdint>
#include <vector>

#include "oscint/atoms.hpp"
#include "oscint/poly.hpp"
#include "oscint/quad.hpp"

namespace oscint {

struct ScalePair {
  int p = 0;
  int q = 0;
  auto operator<=>(const ScalePair&) const = default;
};

// Finite truncation set F; ordered means p <= q for every pair.
using TruncationSet = std::vector<ScalePair>;

bool truncation_ordered(const TruncationSet& f);

// Smooth spatial cutoff: 1 on the unit square [-1/2,1/2]^2, supported in
// [-3,3]^2, tensor product of exponential-blend bumps.
double phi_cutoff(double x1, double x2);

// Largest |x|_inf that T_F a can reach: max over F of 2^{q+1} (ordered
// pairs put the larger scale second) plus the atom half-width.
double tf_support_radius(const TruncationSet& f, const Atom& a);

// T_p a at x.  The atom must be two-dimensional.  Returns 0 without any
// quadrature when the support intersection is empty.  When info is given it
// receives the summed error estimate / panel count / converged flag.
std::complex<double> apply_Tp(const Poly2& p_phase, int p, int q,
                              const Atom& a, double x1, double x2,
                              const QuadSpec& spec, QuadResult* info = nullptr);

std::complex<double> apply_TF(const Poly2& p_phase, const TruncationSet& f,
                              const Atom& a, double x1, double x2,
                              const QuadSpec& spec, QuadResult* info = nullptr);

struct OutsideL1 {
  double value = 0.0;
  double err = 0.0;        // outer refinement estimate plus inner estimates
  bool converged = true;   // outer met tolerance and every inner flag clean
  long outer_cells = 0;    // outer panels actually integrated
  long evals = 0;          // T_F evaluations performed
};

// integral of |T_F a(x)| over gamma <= |x|_inf <= domain_radius.  The
// support union of the pieces (minus the gamma cube) is decomposed into
// disjoint support-aligned rectangles, then refined worst-first with
// two-level tensor Gauss rules; the exact-zero complement is never
// evaluated.  spec drives both the outer target and the inner oscillatory
// integrals.  Requires gamma >= 2 and domain_radius > gamma.
OutsideL1 l1_outside(const Poly2& p_phase, const TruncationSet& f,
                     const Atom& a, double gamma, double domain_radius,
                     const QuadSpec& spec);

// Chirp operator applied to a 1D atom, via the algebraic identity
// T a_I(x) = e^{ix^2} int e^{-2ixs} b_I(s) / (x - s) ds (linear phase).
// Throws std::domain_error when |x| <= 2 * half-width (kernel singularity
// too close to the support).
std::complex<double> apply_chirp_T(const Atom& a, double x,
                                   const QuadSpec& spec,
                                   QuadResult* info = nullptr);

// Same value computed without the identity: phase (x-y)^2, the chirp kept
// in the amplitude.  Used as a cross-check route.
std::complex<double> apply_chirp_T_direct(const Atom& a, double x,
                                          const QuadSpec& spec,
                                          QuadResult* info = nullptr);

// Modulus bound ||a||_1 / (|x| - half) for points beyond the support.
double chirp_T_tail_bound(const Atom& a, double x);

// T*T kernel
//   L(x,u) = phi(x) phi(u) int e^{i[P(y-x) - P(y-u)]} psi_p(y-x) psi_p(y-u) dy
// evaluated by direct quadrature over the intersected annulus products.
std::complex<double> kernel_L(const Poly2& p_phase, int p, int q, double x1,
                              double x2, double u1, double u2,
                              const QuadSpec& spec, QuadResult* info = nullptr);

// Schur estimate of ||T~_p||: sup-row and sup-column integrals of |L| on a
// grid_n^2 grid of [-3,3]^2, returned as sqrt of the geometric mean of the
// two sups.  Requires grid_n >= 16.
double schur_l2_bound(const Poly2& p_phase, int p, int q, int grid_n,
                      const QuadSpec& spec);

// Cell-averaged convolution table for the discretized operator: entry
// (k1, k2), k in [-(n-1), n-1]^2, is the integral of psi_p psi_q e^{-iP}
// over the grid cell centered at (h k1, h k2), h = 6/grid_n.  Row-major
// with side 2*grid_n - 1.  Shared by power_iteration_l2 and the dense
// oracle in the tests.
std::vector<std::complex<double>> conv_cell_table(const Poly2& p_phase, int p,
                                                  int q, int grid_n,
                                                  const QuadSpec& spec,
                                                  bool* all_converged = nullptr);

struct PowerResult {
  double norm = 0.0;    // sqrt of dominant eigenvalue of the normal matrix
  double ratio = 0.0;   // last relative change of the eigenvalue estimate
  bool converged = true;
};

// Discretizes T~_p (cutoff times convolution) on a grid_n^2 grid of
// [-3,3]^2 with cell-integrated kernel entries and runs power iteration on
// the normal operator.  Cell integration matters: point sampling of a
// kernel that oscillates many times per cell aliases to noise and produces
// a false norm floor.  Requires grid_n >= 32 and iters >= 10; flags
// non-convergence when the estimate still moves by more than 1%.
PowerResult power_iteration_l2(const Poly2& p_phase, int p, int q, int grid_n,
                               int iters, const QuadSpec& spec,
                               std::uint64_t seed = 0x9d2c5680u);

}  // namespace oscint
