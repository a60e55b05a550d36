#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oscint/dyadic.hpp"

using namespace oscint;

TEST_CASE("base cutoff shape") {
  CHECK(chi_cut(0.0) == 1.0);
  CHECK(chi_cut(1.0) == 1.0);
  CHECK(chi_cut(-0.7) == 1.0);
  CHECK(chi_cut(2.0) == 0.0);
  CHECK(chi_cut(2.5) == 0.0);
  // Midpoint of the blend is exactly 1/2 by the symmetry g(2-s) <-> g(s-1).
  CHECK(chi_cut(1.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(chi_cut(-1.5) == doctest::Approx(0.5).epsilon(1e-15));
  // Monotone decreasing across the blend.
  double prev = 1.0;
  for (double s = 1.0; s <= 2.0; s += 1.0 / 128) {
    double v = chi_cut(s);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
}

TEST_CASE("annulus cutoff support and complementary pair") {
  CHECK(phi_cut(0.4) == 0.0);   // inside: both chis equal 1
  CHECK(phi_cut(0.5) == 0.0);
  CHECK(phi_cut(2.0) == 0.0);   // outside: both chis equal 0
  CHECK(phi_cut(1.0) == doctest::Approx(1.0));  // chi(1)=1, chi(2)=0
  for (double s : {0.6, 0.9, 1.3, 1.8}) {
    CHECK(phi_cut(s) >= 0.0);
    CHECK(phi_cut(s) <= 1.0);
    // Adjacent scales overlap-add exactly where only they contribute.
    CHECK(phi_cut(s) + phi_cut(s / 2) + phi_cut(2 * s) ==
          doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("partition of unity deviation stays at rounding level") {
  CHECK(partition_check(10, 10000) <= 1e-12);
  CHECK(partition_check(30, 10000) <= 1e-12);
}

TEST_CASE("kernel pieces are odd and scale exactly") {
  for (int p : {-12, -3, 0, 5, 17}) {
    double r = std::ldexp(1.0, p);
    CHECK(psi(p, 0.3 * r) == 0.0);      // below the support annulus
    CHECK(psi(p, 2.5 * r) == 0.0);      // above it
    CHECK(psi(p, 0.0) == 0.0);
    for (double m : {0.55, 0.8, 1.0, 1.45, 1.9}) {
      double s = m * r;
      CHECK(psi(p, -s) == -psi(p, s));  // odd
      // Dyadic rescaling is exact in binary floating point.
      CHECK(psi(p, s) == std::ldexp(psi(0, std::ldexp(s, -p)), -p));
    }
  }
  // Peak size is of order 2^-p.
  CHECK(std::fabs(psi(4, std::ldexp(1.0, 4))) ==
        doctest::Approx(std::ldexp(1.0, -4)));
}

TEST_CASE("tensor kernel factorizes") {
  CHECK(psi2(2, -1, 3.0, -0.7) ==
        doctest::Approx(psi(2, 3.0) * psi(-1, -0.7)));
  CHECK(psi2(0, 0, 1.0, 0.0) == 0.0);
}

TEST_CASE("plateau bump") {
  CHECK(smooth_bump(0.0, 1.0, 2.0) == 1.0);
  CHECK(smooth_bump(0.99, 1.0, 2.0) == 1.0);
  CHECK(smooth_bump(2.0, 1.0, 2.0) == 0.0);
  CHECK(smooth_bump(-2.3, 1.0, 2.0) == 0.0);
  CHECK(smooth_bump(1.5, 1.0, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
  double prev = 1.0;
  for (double t = 1.0; t <= 2.0; t += 1.0 / 64) {
    double v = smooth_bump(t, 1.0, 2.0);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
}
