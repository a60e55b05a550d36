#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "oscint/atoms.hpp"
#include "oscint/dyadic.hpp"
#include "oscint/ops.hpp"
#include "oscint/poly.hpp"
#include "oscint/quad.hpp"

using namespace oscint;
using doctest::Approx;
using cplx = std::complex<double>;

namespace {

// Dense composite-Simpson tensor quadrature, the brute-force oracle for
// apply_Tp on non-oscillatory configurations.  n per axis must be even.
// Boundary samples are nudged inward so that pieces split exactly at a jump
// line read the one-sided limit of their own side.
cplx simpson2(const std::function<cplx(double, double)>& f, double a1,
              double b1, double a2, double b2, int n) {
  auto w1 = [n](int i) {
    if (i == 0 || i == n) return 1.0;
    return (i % 2 == 1) ? 4.0 : 2.0;
  };
  double h1 = (b1 - a1) / n, h2 = (b2 - a2) / n;
  double d1 = 1e-11 * (b1 - a1), d2 = 1e-11 * (b2 - a2);
  auto node = [](double lo, double hi, double h, double d, int i, int n_) {
    if (i == 0) return lo + d;
    if (i == n_) return hi - d;
    return lo + i * h;
  };
  cplx s{0.0, 0.0};
  for (int i = 0; i <= n; ++i) {
    cplx row{0.0, 0.0};
    double x = node(a1, b1, h1, d1, i, n);
    for (int j = 0; j <= n; ++j) row += w1(j) * f(x, node(a2, b2, h2, d2, j, n));
    s += w1(i) * row;
  }
  return s * (h1 / 3.0) * (h2 / 3.0);
}

cplx brute_Tp(const Poly2& P, int p, int q, const Atom& a, double x1,
              double x2, int n) {
  // Integrate over the full annulus bounding box; the integrand vanishes
  // where the supports miss, so no support arithmetic is involved (that is
  // the point: an independent route).
  double r1 = std::ldexp(1.0, p + 1), r2 = std::ldexp(1.0, q + 1);
  auto f = [&](double y1, double y2) {
    return psi2(p, q, y1, y2) * a(x1 - y1, x2 - y2) *
           std::polar(1.0, P.eval(y1, y2));
  };
  // Simpson across the atom's jump lines would lose accuracy, so each axis
  // splits at 0 (sign quadrants), at the step image x, and at the support
  // edge images x -+ half.
  auto cuts = [](double lo, double hi, std::initializer_list<double> marks) {
    std::vector<double> c{lo};
    std::vector<double> m(marks);
    std::sort(m.begin(), m.end());
    for (double t : m)
      if (t > c.back() && t < hi) c.push_back(t);
    c.push_back(hi);
    return c;
  };
  cplx s{0.0, 0.0};
  for (double s1 : {-1.0, 1.0})
    for (double s2 : {-1.0, 1.0}) {
      double a1 = s1 < 0 ? -r1 : 0.0, b1 = s1 < 0 ? 0.0 : r1;
      double a2 = s2 < 0 ? -r2 : 0.0, b2 = s2 < 0 ? 0.0 : r2;
      auto c1 = cuts(a1, b1, {x1 - a.f1.half, x1, x1 + a.f1.half});
      auto c2 = cuts(a2, b2, {x2 - a.f2.half, x2, x2 + a.f2.half});
      for (std::size_t i = 0; i + 1 < c1.size(); ++i)
        for (std::size_t j = 0; j + 1 < c2.size(); ++j)
          s += simpson2(f, c1[i], c1[i + 1], c2[j], c2[j + 1], n);
    }
  return s;
}

}  // namespace

TEST_CASE("truncation set helpers") {
  TruncationSet f{{0, 0}, {-2, 3}};
  CHECK(truncation_ordered(f));
  f.push_back({4, 1});
  CHECK(!truncation_ordered(f));

  Atom a = atom_signed_square();
  CHECK(tf_support_radius({{0, 3}}, a) == Approx(16.5));
  CHECK(tf_support_radius({}, a) == Approx(0.5));
}

TEST_CASE("phi cutoff plateau and support") {
  CHECK(phi_cutoff(0.4, -0.5) == 1.0);
  CHECK(phi_cutoff(3.0, 0.0) == 0.0);
  CHECK(phi_cutoff(1.5, 0.0) > 0.0);
  CHECK(phi_cutoff(1.5, 0.0) < 1.0);
}

TEST_CASE("apply_Tp empty support returns zero without quadrature") {
  Poly2 P;
  P.set({1, 2}, 1.0);
  Atom a = atom_signed_square();
  QuadResult info;
  cplx v = apply_Tp(P, 0, 0, a, 10.0, 10.0, QuadSpec{}, &info);
  CHECK(v == cplx{0.0, 0.0});
  CHECK(info.panels == 0);
  CHECK(info.converged);

  // one empty axis suffices
  v = apply_Tp(P, 0, 0, a, 1.0, 10.0, QuadSpec{}, &info);
  CHECK(v == cplx{0.0, 0.0});
  CHECK(info.panels == 0);
}

TEST_CASE("apply_Tp rejects 1D atoms") {
  Poly2 P;
  CHECK_THROWS_AS(apply_Tp(P, 0, 0, atom_chirp(1.0), 1.0, 1.0, QuadSpec{}),
                  std::invalid_argument);
}

TEST_CASE("apply_Tp matches dense brute-force quadrature") {
  Atom a = atom_signed_square();
  QuadSpec spec;
  spec.abs_tol = 1e-12;
  spec.rel_tol = 1e-10;

  Poly2 P;
  P.set({1, 2}, 1.0);  // x1 x2^2
  QuadResult info;
  cplx got = apply_Tp(P, 0, 0, a, 1.0, 1.0, spec, &info);
  CHECK(info.converged);
  cplx want = brute_Tp(P, 0, 0, a, 1.0, 1.0, 512);
  CHECK(std::abs(got - want) < 1e-8);
  CHECK(std::abs(got) > 1e-3);  // regression guard: the value is genuinely nonzero

  // zero phase at a different scale pair and off-axis point
  Poly2 Z;
  cplx g2 = apply_Tp(Z, -1, 0, a, 0.7, -1.2, spec, &info);
  CHECK(info.converged);
  cplx w2 = brute_Tp(Z, -1, 0, a, 0.7, -1.2, 512);
  CHECK(std::abs(g2 - w2) < 1e-8);
}

TEST_CASE("apply_Tp symmetry checks for the even atom") {
  Atom a = atom_signed_square();
  QuadSpec spec;
  spec.abs_tol = 1e-12;
  Poly2 Z;
  // signed_square is even, psi2 is even: T(-x) = T(x) exactly for P = 0
  for (auto [x1, x2] : std::vector<std::pair<double, double>>{
           {1.0, 1.0}, {0.8, -1.3}, {1.9, 0.4}}) {
    cplx plus = apply_Tp(Z, 0, 0, a, x1, x2, spec);
    cplx minus = apply_Tp(Z, 0, 0, a, -x1, -x2, spec);
    CHECK(std::abs(plus - minus) < 1e-10);
  }
  // p = q: swapping the axes of x transposes the tensor integrand
  cplx xy = apply_Tp(Z, 0, 0, a, 1.2, 0.6, spec);
  cplx yx = apply_Tp(Z, 0, 0, a, 0.6, 1.2, spec);
  CHECK(std::abs(xy - yx) < 1e-10);
}

TEST_CASE("apply_TF linearity and per-scale support arithmetic") {
  QuadSpec spec;
  spec.abs_tol = 1e-12;
  Poly2 P;
  P.set({2, 2}, 0.5);

  Atom a = atom_signed_square();
  CHECK(apply_TF(P, {}, a, 1.0, 1.0, spec) == cplx{0.0, 0.0});

  TruncationSet one{{0, 0}};
  CHECK(std::abs(apply_TF(P, one, a, 1.0, 1.0, spec) -
                 apply_Tp(P, 0, 0, a, 1.0, 1.0, spec)) < 1e-14);

  // (3,3) has support |x|_inf >= 4 - 1/2; at x = (1,1) only (0,0) survives
  TruncationSet two{{0, 0}, {3, 3}};
  QuadResult info;
  cplx v = apply_TF(P, two, a, 1.0, 1.0, spec, &info);
  CHECK(std::abs(v - apply_Tp(P, 0, 0, a, 1.0, 1.0, spec)) < 1e-14);

  // additivity in the atom: (u1 + u2) tensor v
  Atom t1 = atom_random_tensor(5, 3);
  Atom t2 = atom_random_tensor(6, 3);
  Atom sum = t1;
  auto e1 = t1.f1.eval, e2 = t2.f1.eval;
  sum.f1.eval = [e1, e2](double y) { return e1(y) + e2(y); };
  Atom t2v = t2;
  t2v.f2 = t1.f2;  // share the second factor so the sum is still a tensor
  cplx lhs = apply_TF(P, one, sum, 0.9, 1.1, spec);
  cplx rhs = apply_TF(P, one, t1, 0.9, 1.1, spec) +
             apply_TF(P, one, t2v, 0.9, 1.1, spec);
  CHECK(std::abs(lhs - rhs) < 1e-9);
}

TEST_CASE("chirp operator: identity route vs direct route") {
  Atom a = atom_chirp(1.0);
  QuadSpec spec;
  spec.abs_tol = 1e-12;
  spec.rel_tol = 1e-10;
  for (double x : {2.5, 4.0, 10.0, -3.0, 57.0}) {
    QuadResult ri, rd;
    cplx ident = apply_chirp_T(a, x, spec, &ri);
    cplx direct = apply_chirp_T_direct(a, x, spec, &rd);
    CHECK(ri.converged);
    CHECK(rd.converged);
    CHECK(std::abs(ident - direct) < 1e-8);
  }
}

TEST_CASE("chirp operator symmetry and tail bound") {
  Atom a = atom_chirp(1.0);
  QuadSpec spec;
  spec.abs_tol = 1e-13;
  for (double x : {2.1, 3.7, 30.0}) {
    cplx plus = apply_chirp_T(a, x, spec);
    cplx minus = apply_chirp_T(a, -x, spec);
    CHECK(std::abs(plus - minus) < 1e-10);  // exact identity for the odd step
    CHECK(std::abs(plus) <= chirp_T_tail_bound(a, x) * (1.0 + 1e-12));
    CHECK(std::abs(plus) > 1e-9);
  }
}

TEST_CASE("chirp operator refuses points near the support") {
  Atom a = atom_chirp(1.0);
  CHECK_THROWS_AS(apply_chirp_T(a, 0.9, QuadSpec{}), std::domain_error);
  CHECK_THROWS_AS(apply_chirp_T(a, -1.0, QuadSpec{}), std::domain_error);
  CHECK_THROWS_AS(apply_chirp_T_direct(a, 0.5, QuadSpec{}), std::domain_error);
  CHECK_THROWS_AS(apply_chirp_T(atom_signed_square(), 3.0, QuadSpec{}),
                  std::invalid_argument);
}

TEST_CASE("kernel_L diagonal, Hermitian symmetry, and support radius") {
  QuadSpec spec;
  spec.abs_tol = 1e-12;
  Poly2 P;
  P.set({1, 2}, 3.0);

  // diagonal: phase cancels, value is a positive mass integral
  QuadResult info;
  cplx diag = kernel_L(P, 0, 0, 0.3, 0.2, 0.3, 0.2, spec, &info);
  CHECK(info.converged);
  CHECK(diag.real() > 0.0);
  CHECK(std::fabs(diag.imag()) < 1e-10 * diag.real());

  // Hermitian symmetry at distinct points
  cplx xu = kernel_L(P, 0, 0, 0.2, -0.1, 0.5, 0.3, spec);
  cplx ux = kernel_L(P, 0, 0, 0.5, 0.3, 0.2, -0.1, spec);
  CHECK(std::abs(xu - std::conj(ux)) < 1e-10);
  CHECK(std::abs(xu) > 0.0);

  // support: p = 0 and |x1 - u1| > 4 kills the y1 overlap, no quadrature
  cplx far = kernel_L(P, 0, 0, -2.5, 0.0, 2.0, 0.0, spec, &info);
  CHECK(far == cplx{0.0, 0.0});
  CHECK(info.panels == 0);

  // cutoff: outside [-3,3]^2 the kernel vanishes identically
  cplx cut = kernel_L(P, 0, 0, 3.2, 0.0, 2.9, 0.0, spec, &info);
  CHECK(cut == cplx{0.0, 0.0});
  CHECK(info.panels == 0);
}

TEST_CASE("schur bound: positivity, grid refinement, dominates power estimate") {
  QuadSpec spec;
  spec.rel_tol = 1e-7;
  spec.abs_tol = 1e-11;

  CHECK_THROWS_AS(schur_l2_bound(Poly2{}, 0, 0, 8, spec),
                  std::invalid_argument);

  Poly2 Z;
  double s16 = schur_l2_bound(Z, 0, 0, 16, spec);
  double s32 = schur_l2_bound(Z, 0, 0, 32, spec);
  CHECK(s16 > 0.0);
  CHECK(std::fabs(s32 - s16) / s16 < 0.05);

  PowerResult pw = power_iteration_l2(Z, 0, 0, 32, 40, spec);
  CHECK(pw.converged);
  CHECK(pw.norm > 0.0);
  CHECK(pw.norm <= s32 * 1.02);

  Poly2 P;
  P.set({1, 2}, 3.0);
  double sp = schur_l2_bound(P, 0, 0, 16, spec);
  PowerResult pwp = power_iteration_l2(P, 0, 0, 32, 40, spec);
  CHECK(pwp.converged);
  CHECK(pwp.norm <= sp * 1.02);
}

TEST_CASE("power iteration agrees with a dense eigensolve of the same matrix") {
  QuadSpec spec;
  spec.rel_tol = 1e-7;
  spec.abs_tol = 1e-11;
  Poly2 Z;
  const int n = 32;

  bool ok = true;
  std::vector<cplx> table = conv_cell_table(Z, 0, 0, n, spec, &ok);
  CHECK(ok);
  const int side = 2 * n - 1;
  const double h = 6.0 / n;

  Eigen::MatrixXcd W(n * n, n * n);
  W.setZero();
  std::vector<double> bump(n);
  for (int i = 0; i < n; ++i) bump[i] = smooth_bump(-3.0 + h * (i + 0.5), 0.5, 3.0);
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < n; ++i2)
      for (int j1 = 0; j1 < n; ++j1)
        for (int j2 = 0; j2 < n; ++j2) {
          cplx g = table[static_cast<std::size_t>(i1 - j1 + n - 1) * side +
                         (i2 - j2 + n - 1)];
          if (g != cplx{0.0, 0.0})
            W(i1 * n + i2, j1 * n + j2) = g * (bump[j1] * bump[j2]);
        }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(W.adjoint() * W);
  double sigma = std::sqrt(es.eigenvalues().maxCoeff());

  PowerResult pw = power_iteration_l2(Z, 0, 0, n, 60, spec);
  CHECK(pw.converged);
  CHECK(std::fabs(pw.norm - sigma) < 1e-3 * sigma);
}

TEST_CASE("power iteration input validation") {
  QuadSpec spec;
  CHECK_THROWS_AS(power_iteration_l2(Poly2{}, 0, 0, 16, 40, spec),
                  std::invalid_argument);
  CHECK_THROWS_AS(power_iteration_l2(Poly2{}, 0, 0, 32, 5, spec),
                  std::invalid_argument);
}

TEST_CASE("oscillation shrinks the operator norm estimate") {
  QuadSpec spec;
  spec.rel_tol = 1e-6;
  spec.abs_tol = 1e-10;
  Poly2 small, big;
  small.set({1, 2}, 1.0);
  big.set({1, 2}, 1024.0);
  PowerResult lo = power_iteration_l2(small, 0, 3, 32, 40, spec);
  PowerResult hi = power_iteration_l2(big, 0, 3, 32, 40, spec);
  CHECK(lo.norm > 0.0);
  CHECK(hi.norm < lo.norm);
}

TEST_CASE("l1_outside validation and trivial cases") {
  Poly2 P;
  P.set({2, 2}, 1.0);
  Atom a = atom_signed_square();
  QuadSpec spec;

  CHECK_THROWS_AS(l1_outside(P, {{0, 0}}, a, 1.0, 8.0, spec),
                  std::invalid_argument);
  CHECK_THROWS_AS(l1_outside(P, {{0, 0}}, a, 4.0, 3.0, spec),
                  std::invalid_argument);

  OutsideL1 empty = l1_outside(P, {}, a, 2.0, 8.0, spec);
  CHECK(empty.value == 0.0);
  CHECK(empty.converged);

  // all supports inside |x| < gamma: zero, and every node sees it for free
  OutsideL1 inner = l1_outside(P, {{-3, -3}}, a, 2.0, 8.0, spec);
  CHECK(inner.value == 0.0);
  CHECK(inner.converged);
}

TEST_CASE("l1_outside against a fixed-grid oracle") {
  Poly2 Z;
  Atom a = atom_signed_square();
  QuadSpec spec;
  spec.rel_tol = 1e-3;
  spec.abs_tol = 1e-8;
  TruncationSet f{{0, 0}};

  OutsideL1 got = l1_outside(Z, f, a, 2.0, 4.0, spec);
  CHECK(got.converged);
  CHECK(got.value > 0.0);

  // oracle: plain Simpson over the four band rectangles of the annulus
  auto tf_abs = [&](double x1, double x2) {
    return cplx{std::abs(apply_TF(Z, f, a, x1, x2, spec)), 0.0};
  };
  double want = 0.0;
  want += simpson2(tf_abs, -4.0, 4.0, 2.0, 4.0, 64).real();
  want += simpson2(tf_abs, -4.0, 4.0, -4.0, -2.0, 64).real();
  want += simpson2(tf_abs, -4.0, -2.0, -2.0, 2.0, 64).real();
  want += simpson2(tf_abs, 2.0, 4.0, -2.0, 2.0, 64).real();

  CHECK(got.value == Approx(want).epsilon(2e-2));
}
