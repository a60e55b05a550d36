#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <functional>

#include "oscint/dyadic.hpp"
#include "oscint/poly.hpp"
#include "oscint/quad.hpp"

using namespace oscint;
using cplx = std::complex<double>;

namespace {

// Odd step, +1 on the right half of [-1/2, 1/2].
double bstep(double u) { return u >= 0.0 ? 1.0 : -1.0; }

// Closed form for the oscillatory step transform
// int_{-1/2}^{1/2} bstep(s) exp(i xi s) ds = 2i (1 - cos(xi/2)) / xi.
cplx bstep_transform(double xi) {
  return cplx(0.0, 2.0 * (1.0 - std::cos(0.5 * xi)) / xi);
}

// Brute-force oracle: composite Simpson on a uniform grid, independent of
// everything in the engine.
cplx simpson(const std::function<cplx(double)>& f, double a, double b,
             int n) {
  if (n % 2 == 1) ++n;
  double h = (b - a) / n;
  cplx s = f(a) + f(b);
  for (int i = 1; i < n; ++i)
    s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * (h / 3.0);
}

// Adaptive Simpson on complex values, used as the outer layer of the
// nested-1D oracle for the 2D integrator.
cplx adaptive_simpson(const std::function<cplx(double)>& f, double a,
                      double b, double tol, int depth = 24) {
  double m = 0.5 * (a + b);
  cplx fa = f(a), fm = f(m), fb = f(b);
  std::function<cplx(double, double, cplx, cplx, cplx, double, int)> rec =
      [&](double lo, double hi, cplx flo, cplx fmid, cplx fhi, double eps,
          int d) -> cplx {
    double mid = 0.5 * (lo + hi);
    double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
    cplx flm = f(lm), frm = f(rm);
    cplx whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    cplx left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    cplx right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    if (d <= 0 || std::abs(left + right - whole) < 15.0 * eps)
      return left + right + (left + right - whole) / 15.0;
    return rec(lo, mid, flo, flm, fmid, 0.5 * eps, d - 1) +
           rec(mid, hi, fmid, frm, fhi, 0.5 * eps, d - 1);
  };
  return rec(a, b, fa, fm, fb, tol, depth);
}

}  // namespace

TEST_CASE("poly1 utilities") {
  Poly1 c{-6.0, 11.0, -6.0, 1.0};  // (s-1)(s-2)(s-3)
  CHECK(poly1_eval(c, 0.0) == -6.0);
  CHECK(poly1_eval(c, 2.0) == 0.0);
  Poly1 d = poly1_derive(c);
  CHECK(d.size() == 3);
  CHECK(poly1_eval(d, 1.0) == doctest::Approx(2.0));  // 11 - 12 + 3

  auto r = poly1_real_roots(c, 0.0, 2.5);
  REQUIRE(r.size() == 2);
  CHECK(r[0] == doctest::Approx(1.0));
  CHECK(r[1] == doctest::Approx(2.0));

  auto none = poly1_real_roots({1.0, 0.0, 1.0}, -10.0, 10.0);  // s^2 + 1
  CHECK(none.empty());

  auto dbl = poly1_real_roots({1.0, -2.0, 1.0}, 0.0, 2.0);  // (s-1)^2
  REQUIRE(dbl.size() == 1);
  CHECK(dbl[0] == doctest::Approx(1.0));

  // Degree 5 with three roots inside the window.
  Poly1 q{0.0, -4.0, 0.0, 5.0, 0.0, -1.0};  // -s(s^2-1)(s^2-4)
  auto r5 = poly1_real_roots(q, -1.5, 2.5);
  REQUIRE(r5.size() == 4);  // -1, 0, 1, 2
  CHECK(r5[0] == doctest::Approx(-1.0));
  CHECK(r5[3] == doctest::Approx(2.0));
}

TEST_CASE("restriction of a bivariate phase to a line") {
  Poly2 p;
  p.set({2, 1}, 3.0);
  p.set({0, 4}, 2.0);
  p.set({1, 0}, 5.0);
  Poly1 in_y = poly2_restrict(p, 0, 2.0);  // x1 = 2
  REQUIRE(in_y.size() == 5);
  CHECK(in_y[0] == doctest::Approx(10.0));
  CHECK(in_y[1] == doctest::Approx(12.0));
  CHECK(in_y[4] == doctest::Approx(2.0));
  Poly1 in_x = poly2_restrict(p, 1, -1.0);  // x2 = -1
  REQUIRE(in_x.size() == 3);
  CHECK(in_x[0] == doctest::Approx(2.0));
  CHECK(in_x[1] == doctest::Approx(5.0));
  CHECK(in_x[2] == doctest::Approx(-3.0));
}

TEST_CASE("zero phase reduces to plain quadrature") {
  QuadSpec spec;
  for (int k : {0, 1, 2, 5, 11}) {
    Amp1 f = [k](double s) { return cplx(std::pow(s, k), 0.0); };
    QuadResult r = integrate_osc_1d(f, {}, 0.0, 1.0, spec);
    CHECK(r.converged);
    CHECK(std::abs(r.value - cplx(1.0 / (k + 1), 0.0)) < 1e-13);
  }
}

TEST_CASE("linear phase step transform matches the closed form") {
  QuadSpec spec;
  Amp1 f = [](double s) { return cplx(bstep(s), 0.0); };
  for (double xi : {0.5, 3.0, 6.283185307179586, 40.0, 1111.0, 2.5e4}) {
    QuadResult r =
        integrate_osc_1d(f, {0.0, xi}, -0.5, 0.5, spec, {0.0});
    CHECK(r.converged);
    CHECK(std::abs(r.value - bstep_transform(xi)) < 1e-10);
  }
  // At xi = 2 pi the value is 2i/pi.
  QuadResult r =
      integrate_osc_1d(f, {0.0, 2.0 * M_PI}, -0.5, 0.5, spec, {0.0});
  CHECK(std::abs(r.value - cplx(0.0, 2.0 / M_PI)) < 1e-12);
}

TEST_CASE("huge linear phase goes through the collocation path") {
  QuadSpec spec;
  Amp1 f = [](double s) { return cplx(bstep(s), 0.0); };
  for (double xi : {1.0e6, 1.0e9, 3.7e10}) {
    QuadResult r =
        integrate_osc_1d(f, {0.0, xi}, -0.5, 0.5, spec, {0.0});
    CHECK(r.converged);
    CHECK(std::abs(r.value - bstep_transform(xi)) < 1e-10);
    // Far fewer panels than oscillations.
    CHECK(r.panels < 100);
  }
}

TEST_CASE("stationary phase cases agree with a brute-force oracle") {
  QuadSpec spec;
  SUBCASE("quadratic phase, stationary point at the left end") {
    double lam = 200.0;
    Amp1 f = [](double) { return cplx(1.0, 0.0); };
    QuadResult r = integrate_osc_1d(f, {0.0, 0.0, lam}, 0.0, 1.0, spec);
    cplx oracle = simpson(
        [lam](double s) {
          return std::exp(cplx(0.0, lam * s * s));
        },
        0.0, 1.0, 1 << 17);
    CHECK(r.converged);
    CHECK(std::abs(r.value - oracle) < 1e-9);
  }
  SUBCASE("cubic phase with interior stationary points") {
    // 50(s^3 - 3s) has turning points at s = +-1 inside the window.
    Poly1 phase{0.0, -150.0, 0.0, 50.0};
    Amp1 f = [](double s) { return cplx(std::exp(-s * s), 0.0); };
    QuadResult r = integrate_osc_1d(f, phase, -2.0, 2.0, spec);
    cplx oracle = simpson(
        [&](double s) {
          return std::exp(-s * s) *
                 std::exp(cplx(0.0, poly1_eval(phase, s)));
        },
        -2.0, 2.0, 1 << 18);
    CHECK(r.converged);
    CHECK(std::abs(r.value - oracle) < 1e-8);
  }
}

TEST_CASE("starved panel budget is reported, not hidden") {
  QuadSpec spec;
  spec.max_panels = 3;
  Amp1 f = [](double s) { return cplx(std::cos(3.0 * s), 0.0); };
  QuadResult r = integrate_osc_1d(f, {0.0, 0.0, 0.0, 90.0}, -2.0, 2.0, spec);
  CHECK_FALSE(r.converged);
  CHECK(r.err > spec.abs_tol);
}

TEST_CASE("separable 2d case factors into 1d closed forms") {
  QuadSpec spec;
  Amp2 f = [](double x, double y) { return cplx(bstep(x) * bstep(y), 0.0); };
  SUBCASE("moderate frequencies") {
    double xi1 = 11.0, xi2 = 2.0 * M_PI;
    Poly2 phase;
    phase.set({1, 0}, xi1);
    phase.set({0, 1}, xi2);
    Rect box{-0.5, 0.5, -0.5, 0.5};
    QuadResult r = integrate_osc_2d(f, phase, box, spec, {0.0}, {0.0});
    cplx oracle = bstep_transform(xi1) * bstep_transform(xi2);
    CHECK(r.converged);
    CHECK(std::abs(r.value - oracle) < 1e-9);
  }
  SUBCASE("one axis far beyond panel resolution") {
    double xi1 = 5.0e4, xi2 = 2.0 * M_PI;
    Poly2 phase;
    phase.set({1, 0}, xi1);
    phase.set({0, 1}, xi2);
    Rect box{-0.5, 0.5, -0.5, 0.5};
    QuadResult r = integrate_osc_2d(f, phase, box, spec, {0.0}, {0.0});
    cplx oracle = bstep_transform(xi1) * bstep_transform(xi2);
    CHECK(r.converged);
    CHECK(std::abs(r.value - oracle) <
          1e-6 * std::abs(oracle) + spec.abs_tol);
  }
}

TEST_CASE("2d integrator matches the nested 1d oracle") {
  QuadSpec spec;
  struct Case {
    double c_mixed, c_pure;
    const char* label;
  };
  for (Case cs : {Case{3.0, 2.0, "small"}, Case{30.0, 20.0, "medium"},
                  Case{-17.0, 55.0, "mixed sign"}}) {
    CAPTURE(cs.label);
    Poly2 phase;
    phase.set({1, 2}, cs.c_mixed);
    phase.set({0, 4}, cs.c_pure);
    Amp2 f = [](double x, double y) {
      return cplx(std::exp(-x * x - y * y) * (1.0 + 0.5 * x * y), 0.0);
    };
    Rect box{-1.0, 1.0, -1.0, 1.0};
    QuadResult r = integrate_osc_2d(f, phase, box, spec);

    // Oracle: 1d oscillatory inner integral in x, plain adaptive outer in y.
    auto inner = [&](double y) {
      Poly1 px = poly2_restrict(phase, 1, y);
      Amp1 fx = [&, y](double x) {
        return cplx(std::exp(-x * x - y * y) * (1.0 + 0.5 * x * y), 0.0);
      };
      QuadSpec inner_spec;
      inner_spec.abs_tol = 1e-12;
      return integrate_osc_1d(fx, px, -1.0, 1.0, inner_spec).value;
    };
    cplx oracle = adaptive_simpson(inner, -1.0, 1.0, 1e-10);
    CHECK(r.converged);
    CHECK(std::abs(r.value - oracle) <=
          1e-6 * std::abs(oracle) + 1e-8);
  }
}

TEST_CASE("odd kernel times even phase integrates to zero") {
  QuadSpec spec;
  Poly2 phase;
  phase.set({0, 2}, 7.0);  // even in y1 (no y1 dependence at all)
  Amp2 f = [](double y1, double y2) { return cplx(psi2(0, 0, y1, y2), 0.0); };
  Rect box{-2.0, 2.0, -2.0, 2.0};
  QuadResult r = integrate_osc_2d(f, phase, box, spec,
                                  {-1.0, -0.5, 0.5, 1.0},
                                  {-1.0, -0.5, 0.5, 1.0});
  CHECK(r.converged);
  CHECK(std::abs(r.value) < 1e-9);
}

TEST_CASE("derivative floor probe") {
  QuadSpec spec;
  Poly2 q;
  q.set({1, 1}, 100.0);
  SupportSet delta{{1, 1}};
  Amp2 f = [](double x, double y) {
    return cplx(smooth_bump(std::hypot(x, y), 0.5, 1.0), 0.0);
  };
  Rect box{-1.0, 1.0, -1.0, 1.0};
  VdcProbe p = vdc_probe(q, delta, f, box, 100.0, {1, 1}, spec);
  CHECK(p.delta == doctest::Approx(0.5));
  CHECK(p.converged);
  CHECK(p.integral_mag <= p.envelope);
  CHECK(p.integral_mag > 0.0);

  // (1,0) derivative is 100 y, which vanishes inside the box.
  CHECK_THROWS_AS(vdc_probe(q, delta, f, box, 1.0, {1, 0}, spec),
                  std::domain_error);
  CHECK_THROWS_AS(vdc_probe(q, SupportSet{}, f, box, 1.0, {1, 1}, spec),
                  std::invalid_argument);
}

TEST_CASE("scale sums of the odd kernel") {
  QuadSpec spec;
  SUBCASE("zero phase kills every scale by oddness") {
    QuadResult r = ul2_sum({}, {-2, -1, 0, 1, 2}, spec);
    CHECK(r.converged);
    CHECK(std::abs(r.value) < 1e-11);
  }
  SUBCASE("linear phase terms stay bounded") {
    QuadResult r = ul2_sum({0.0, 5.0}, {-3, -2, -1, 0, 1, 2, 3}, spec);
    CHECK(r.converged);
    CHECK(std::abs(r.value) < 20.0);
    CHECK(std::abs(r.value) > 1e-6);  // not spuriously zero
  }
}
