#include "oscint/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <queue>
#include <stdexcept>

#include "oscint/dd.hpp"
#include "oscint/dyadic.hpp"
#include "oscint/rng.hpp"

namespace oscint {

namespace {

using cplx = std::complex<double>;

struct Iv {
  double lo = 0.0, hi = 0.0;
  bool ok() const { return hi > lo; }
};

Iv isect(const Iv& a, const Iv& b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

// The two components of the scale-s annulus |y| in [2^(s-1), 2^(s+1)].
std::array<Iv, 2> annulus(int s) {
  double lo = std::ldexp(1.0, s - 1), hi = std::ldexp(1.0, s + 1);
  return {Iv{-hi, -lo}, Iv{lo, hi}};
}

void kahan_add(cplx& sum, cplx& comp, cplx term) {
  cplx y = term - comp;
  cplx t = sum + y;
  comp = (t - sum) - y;
  sum = t;
}

void accumulate(QuadResult& acc, const QuadResult& r) {
  acc.value += r.value;
  acc.err += r.err;
  acc.panels += r.panels;
  acc.converged = acc.converged && r.converged;
}

}  // namespace

bool truncation_ordered(const TruncationSet& f) {
  return std::all_of(f.begin(), f.end(),
                     [](const ScalePair& s) { return s.p <= s.q; });
}

double phi_cutoff(double x1, double x2) {
  return smooth_bump(x1, 0.5, 3.0) * smooth_bump(x2, 0.5, 3.0);
}

double tf_support_radius(const TruncationSet& f, const Atom& a) {
  double r = 0.0;
  for (const ScalePair& s : f)
    r = std::max(r, std::ldexp(1.0, std::max(s.p, s.q) + 1));
  return r + std::max(a.f1.half, a.dim == 2 ? a.f2.half : 0.0);
}

std::complex<double> apply_Tp(const Poly2& p_phase, int p, int q,
                              const Atom& a, double x1, double x2,
                              const QuadSpec& spec, QuadResult* info) {
  if (a.dim != 2)
    throw std::invalid_argument("apply_Tp: atom must be two-dimensional");

  Iv win1{x1 - a.f1.half, x1 + a.f1.half};
  Iv win2{x2 - a.f2.half, x2 + a.f2.half};
  std::vector<Iv> iv1, iv2;
  for (const Iv& c : annulus(p)) {
    Iv s = isect(c, win1);
    if (s.ok()) iv1.push_back(s);
  }
  for (const Iv& c : annulus(q)) {
    Iv s = isect(c, win2);
    if (s.ok()) iv2.push_back(s);
  }

  QuadResult acc;
  if (iv1.empty() || iv2.empty()) {
    if (info) *info = acc;
    return acc.value;
  }

  Amp2 amp = [&](double y1, double y2) {
    return psi2(p, q, y1, y2) * a(x1 - y1, x2 - y2);
  };
  std::vector<double> br1{std::ldexp(-1.0, p), std::ldexp(1.0, p)};
  std::vector<double> br2{std::ldexp(-1.0, q), std::ldexp(1.0, q)};
  for (double j : a.f1.jumps) br1.push_back(x1 - j);
  for (double j : a.f2.jumps) br2.push_back(x2 - j);

  for (const Iv& i1 : iv1)
    for (const Iv& i2 : iv2) {
      Rect box{i1.lo, i1.hi, i2.lo, i2.hi};
      accumulate(acc, integrate_osc_2d(amp, p_phase, box, spec, br1, br2));
    }
  if (info) *info = acc;
  return acc.value;
}

std::complex<double> apply_TF(const Poly2& p_phase, const TruncationSet& f,
                              const Atom& a, double x1, double x2,
                              const QuadSpec& spec, QuadResult* info) {
  QuadResult acc;
  cplx sum{0.0, 0.0}, comp{0.0, 0.0};
  for (const ScalePair& s : f) {
    QuadResult one;
    kahan_add(sum, comp, apply_Tp(p_phase, s.p, s.q, a, x1, x2, spec, &one));
    acc.err += one.err;
    acc.panels += one.panels;
    acc.converged = acc.converged && one.converged;
  }
  acc.value = sum;
  if (info) *info = acc;
  return sum;
}

namespace {

// Tensor Gauss rules for the outer |T_F| integrals; two levels give the
// refinement estimate.
constexpr double kGl2T[2] = {-0.5773502691896257, 0.5773502691896257};
constexpr double kGl2W[2] = {1.0, 1.0};
constexpr double kGl4T[4] = {-0.8611363115940526, -0.33998104358485626,
                             0.33998104358485626, 0.8611363115940526};
constexpr double kGl4W[4] = {0.34785484513745385, 0.6521451548625461,
                             0.6521451548625461, 0.34785484513745385};

struct OuterCell {
  Rect r;
  double val = 0.0;    // coarse-fine pair: fine value kept
  double eq = 0.0;     // two-level outer estimate
  double inner = 0.0;  // weighted inner quadrature error
  bool ok = true;
  long id = 0;
};

}  // namespace

OutsideL1 l1_outside(const Poly2& p_phase, const TruncationSet& f,
                     const Atom& a, double gamma, double domain_radius,
                     const QuadSpec& spec) {
  if (!(gamma >= 2.0))
    throw std::invalid_argument("l1_outside: gamma must be at least 2");
  if (!(domain_radius > gamma))
    throw std::invalid_argument("l1_outside: domain_radius must exceed gamma");

  OutsideL1 out;
  if (f.empty()) return out;

  long evals = 0;
  auto integrand = [&](double x1, double x2, double& ierr, bool& iok) {
    QuadResult r;
    cplx v = apply_TF(p_phase, f, a, x1, x2, spec, &r);
    ++evals;
    ierr += r.err;
    iok = iok && r.converged;
    return std::abs(v);
  };

  auto eval_cell = [&](const Rect& r, long id) {
    OuterCell c;
    c.r = r;
    c.id = id;
    double j1 = 0.5 * r.w1(), j2 = 0.5 * r.w2();
    double m1 = 0.5 * (r.x1lo + r.x1hi), m2 = 0.5 * (r.x2lo + r.x2hi);
    double fine = 0.0, coarse = 0.0, ierr = 0.0;
    bool iok = true;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double w = kGl4W[i] * kGl4W[j] * j1 * j2;
        double e = 0.0;
        fine += w * integrand(m1 + j1 * kGl4T[i], m2 + j2 * kGl4T[j], e, iok);
        ierr += w * e;
      }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double w = kGl2W[i] * kGl2W[j] * j1 * j2;
        double e = 0.0;
        coarse += w * integrand(m1 + j1 * kGl2T[i], m2 + j2 * kGl2T[j], e, iok);
      }
    c.val = fine;
    c.eq = std::fabs(fine - coarse);
    c.inner = ierr;
    c.ok = iok;
    return c;
  };

  // T_F a lives on the union over (p,q) in F of the products
  //   {|x1| in [2^(p-1)-h1, 2^(p+1)+h1]} x {|x2| in [2^(q-1)-h2, 2^(q+1)+h2]}
  // and is identically zero elsewhere.  For uneven pairs those products are
  // thin strips inside a huge domain, and a coarse cell whose quadrature
  // nodes all miss a strip would report zero with a zero error estimate and
  // freeze the refinement at a wrong value.  So the initial decomposition is
  // the support union itself, minus the gamma cube, cut into disjoint
  // rectangles: sweep x1 slabs between consecutive support edges and merge
  // the x2 coverage of the pairs active in each slab.  Everything outside the
  // union is exactly zero and is never evaluated at all.
  double h1 = a.f1.half, h2 = a.f2.half;
  const double merge_tol = 1e-9 * domain_radius;
  std::vector<double> cuts{-domain_radius, -gamma, gamma, domain_radius};
  for (const ScalePair& s : f) {
    double lo = std::ldexp(1.0, s.p - 1) - h1;
    double hi = std::ldexp(1.0, s.p + 1) + h1;
    for (double v : {lo, hi, -lo, -hi})
      if (v > -domain_radius && v < domain_radius) cuts.push_back(v);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [&](double u, double v) { return v - u < merge_tol; }),
             cuts.end());

  std::vector<Rect> seed;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double u = cuts[i], v = cuts[i + 1];
    if (v - u <= merge_tol) continue;
    double mid = 0.5 * (u + v);
    std::vector<std::pair<double, double>> ys;
    for (const ScalePair& s : f) {
      double lo1 = std::ldexp(1.0, s.p - 1) - h1;
      double hi1 = std::ldexp(1.0, s.p + 1) + h1;
      double m = std::fabs(mid);
      if (m > hi1 || (lo1 > 0.0 && m < lo1)) continue;  // slab not covered
      double lo2 = std::ldexp(1.0, s.q - 1) - h2;
      double hi2 = std::min(std::ldexp(1.0, s.q + 1) + h2, domain_radius);
      if (lo2 <= 0.0) {
        ys.emplace_back(std::max(-domain_radius, -hi2), hi2);
      } else if (lo2 < domain_radius) {
        ys.emplace_back(lo2, hi2);
        ys.emplace_back(-hi2, -lo2);
      }
    }
    if (ys.empty()) continue;
    std::sort(ys.begin(), ys.end());
    std::vector<std::pair<double, double>> comps;
    for (const auto& yint : ys) {
      if (!comps.empty() && yint.first <= comps.back().second + merge_tol)
        comps.back().second = std::max(comps.back().second, yint.second);
      else
        comps.push_back(yint);
    }
    bool x_in_cube = std::fabs(mid) < gamma;
    auto emit = [&](double ylo, double yhi) {
      if (yhi - ylo > merge_tol) seed.push_back(Rect{u, v, ylo, yhi});
    };
    for (const auto& [ylo, yhi] : comps) {
      if (x_in_cube) {  // carve out |x2| < gamma
        if (ylo < -gamma) emit(ylo, std::min(yhi, -gamma));
        if (yhi > gamma) emit(std::max(ylo, gamma), yhi);
      } else {
        emit(ylo, yhi);
      }
    }
  }
  if (seed.empty()) return out;  // all supports inside the gamma cube

  long next_id = 0;
  auto cmp = [](const OuterCell& x, const OuterCell& y) {
    if (x.eq != y.eq) return x.eq < y.eq;
    return x.id > y.id;
  };
  std::priority_queue<OuterCell, std::vector<OuterCell>, decltype(cmp)> heap(
      cmp);
  long cells = 0;
  auto push = [&](const Rect& r) {
    heap.push(eval_cell(r, next_id++));
    ++cells;
  };
  const long kOuterCellCap = 2048;
  // tame extreme aspect ratios before the first two-level estimates
  while (!seed.empty()) {
    Rect r = seed.back();
    seed.pop_back();
    bool room = cells + static_cast<long>(seed.size()) < kOuterCellCap / 2;
    if (room && (r.w1() > 8.0 * r.w2() || r.w2() > 8.0 * r.w1())) {
      Rect lo = r, hi = r;
      if (r.w1() > r.w2()) {
        double m = 0.5 * (r.x1lo + r.x1hi);
        lo.x1hi = m;
        hi.x1lo = m;
      } else {
        double m = 0.5 * (r.x2lo + r.x2hi);
        lo.x2hi = m;
        hi.x2lo = m;
      }
      seed.push_back(lo);
      seed.push_back(hi);
      continue;
    }
    push(r);
  }

  const double min_w = 1e-6 * domain_radius;

  // Worst-first refinement; running sums track all cells ever kept.  Cells
  // narrower than min_w keep their error in the total but stop driving
  // refinement.  A global watchdog breaks the loop when a whole window of
  // splits fails to reduce the improvable error: where |T_F a| oscillates
  // faster than the outer rule resolves, the two-level estimates only
  // churn, and grinding to the cell cap would cost minutes for nothing.
  // The convergence flag stays honest either way.
  double frozen_eq = 0.0;
  double total_val = 0.0, total_eq = 0.0, total_inner = 0.0;
  bool all_ok = true;
  {
    auto snapshot = heap;  // sums over initial cells
    while (!snapshot.empty()) {
      const OuterCell& c = snapshot.top();
      total_val += c.val;
      total_eq += c.eq;
      total_inner += c.inner;
      all_ok = all_ok && c.ok;
      snapshot.pop();
    }
  }
  bool budget_ok = true;
  const long kStallWindow = 96;
  long splits = 0;
  double window_eq = total_eq - frozen_eq;
  while (!heap.empty() &&
         total_eq - frozen_eq >
             std::max(spec.abs_tol, spec.rel_tol * std::fabs(total_val))) {
    if (cells >= kOuterCellCap) {
      budget_ok = false;
      break;
    }
    if (splits > 0 && splits % kStallWindow == 0) {
      double now = total_eq - frozen_eq;
      if (now > 0.98 * window_eq) break;  // stalled, strict check decides
      window_eq = now;
    }
    OuterCell c = heap.top();
    if (c.eq <= 0.0) break;
    heap.pop();
    int axis = c.r.w1() >= c.r.w2() ? 0 : 1;
    if ((axis == 0 ? c.r.w1() : c.r.w2()) < min_w) {
      frozen_eq += c.eq;  // totals already include this cell
      continue;
    }
    total_val -= c.val;
    total_eq -= c.eq;
    total_inner -= c.inner;
    Rect lo = c.r, hi = c.r;
    if (axis == 0) {
      double m = 0.5 * (c.r.x1lo + c.r.x1hi);
      lo.x1hi = m;
      hi.x1lo = m;
    } else {
      double m = 0.5 * (c.r.x2lo + c.r.x2hi);
      lo.x2hi = m;
      hi.x2lo = m;
    }
    OuterCell nc_lo = eval_cell(lo, next_id++);
    OuterCell nc_hi = eval_cell(hi, next_id++);
    cells += 2;
    ++splits;
    for (const OuterCell* nc : {&nc_lo, &nc_hi}) {
      total_val += nc->val;
      total_eq += nc->eq;
      total_inner += nc->inner;
      all_ok = all_ok && nc->ok;
    }
    heap.push(std::move(nc_lo));
    heap.push(std::move(nc_hi));
  }

  out.value = total_val;
  out.err = total_eq + total_inner;
  out.outer_cells = cells;
  out.evals = evals;
  out.converged =
      all_ok && budget_ok &&
      total_eq <=
          std::max(spec.abs_tol, spec.rel_tol * std::fabs(total_val));
  if (std::getenv("OSCINT_DEBUG_L1"))
    std::fprintf(stderr,
                 "l1_outside: val %g total_eq %g frozen %g tol %g cells %ld "
                 "ok %d budget %d\n",
                 total_val, total_eq, frozen_eq,
                 std::max(spec.abs_tol, spec.rel_tol * std::fabs(total_val)),
                 cells, (int)all_ok, (int)budget_ok);
  return out;
}

namespace {

cplx unit_phase(DD angle) {
  // exp(i*angle) with double-double range reduction, matching the
  // quadrature engine's own phase handling.
  double r = dd_mod_2pi(angle);
  return {std::cos(r), std::sin(r)};
}

}  // namespace

std::complex<double> apply_chirp_T(const Atom& a, double x,
                                   const QuadSpec& spec, QuadResult* info) {
  if (a.dim != 1 || a.kind != Atom::Kind::chirp_1d)
    throw std::invalid_argument("apply_chirp_T: needs the 1D chirp atom");
  double half = a.f1.half;
  if (std::fabs(x) <= 2.0 * half)
    throw std::domain_error(
        "apply_chirp_T: x inside twice the atom support, kernel singularity "
        "not handled");

  // e^{i(x-s)^2} e^{-is^2} = e^{ix^2} e^{-2ixs}: the quadratic parts cancel
  // and only the odd step remains in the amplitude.
  Amp1 amp = [x, half](double s) -> cplx {
    if (s < -half || s > half) return {0.0, 0.0};
    double b = s >= 0.0 ? 1.0 : -1.0;
    return {b / (x - s), 0.0};
  };
  Poly1 phase{0.0, -2.0 * x};
  QuadResult r = integrate_osc_1d(amp, phase, -half, half, spec, {0.0});
  r.value *= unit_phase(dd_mul(DD{x, 0.0}, x));  // exp(i x^2)
  if (info) *info = r;
  return r.value;
}

std::complex<double> apply_chirp_T_direct(const Atom& a, double x,
                                          const QuadSpec& spec,
                                          QuadResult* info) {
  if (a.dim != 1)
    throw std::invalid_argument("apply_chirp_T_direct: needs a 1D atom");
  double half = a.f1.half;
  if (std::fabs(x) <= 2.0 * half)
    throw std::domain_error(
        "apply_chirp_T_direct: x inside twice the atom support");

  Amp1 amp = [&a, x](double s) -> cplx { return a(s) / (x - s); };
  Poly1 phase{x * x, -2.0 * x, 1.0};
  QuadResult r = integrate_osc_1d(amp, phase, -half, half, spec, a.f1.jumps);
  if (info) *info = r;
  return r.value;
}

double chirp_T_tail_bound(const Atom& a, double x) {
  double half = a.f1.half;
  return 2.0 * half / (std::fabs(x) - half);
}

namespace {

// Intervals of the intersection (c1 + annulus) with (c2 + annulus) on one
// axis, at dyadic scale s.
std::vector<Iv> pair_intervals(int s, double c1, double c2) {
  std::vector<Iv> out;
  for (const Iv& u : annulus(s))
    for (const Iv& v : annulus(s)) {
      Iv w = isect(Iv{c1 + u.lo, c1 + u.hi}, Iv{c2 + v.lo, c2 + v.hi});
      if (w.ok()) out.push_back(w);
    }
  return out;
}

void push_scale_breaks(std::vector<double>& br, int s, double center) {
  double r = std::ldexp(1.0, s);
  br.push_back(center - r);
  br.push_back(center + r);
}

}  // namespace

std::complex<double> kernel_L(const Poly2& p_phase, int p, int q, double x1,
                              double x2, double u1, double u2,
                              const QuadSpec& spec, QuadResult* info) {
  QuadResult acc;
  double cut = phi_cutoff(x1, x2) * phi_cutoff(u1, u2);
  if (cut == 0.0) {
    if (info) *info = acc;
    return acc.value;
  }

  std::vector<Iv> iv1 = pair_intervals(p, x1, u1);
  std::vector<Iv> iv2 = pair_intervals(q, x2, u2);
  if (iv1.empty() || iv2.empty()) {
    if (info) *info = acc;
    return acc.value;
  }

  Poly2 phase = p_phase.shifted(-x1, -x2) - p_phase.shifted(-u1, -u2);
  Amp2 amp = [&](double y1, double y2) -> cplx {
    return psi2(p, q, y1 - x1, y2 - x2) * psi2(p, q, y1 - u1, y2 - u2);
  };
  std::vector<double> br1, br2;
  push_scale_breaks(br1, p, x1);
  push_scale_breaks(br1, p, u1);
  push_scale_breaks(br2, q, x2);
  push_scale_breaks(br2, q, u2);

  for (const Iv& i1 : iv1)
    for (const Iv& i2 : iv2) {
      Rect box{i1.lo, i1.hi, i2.lo, i2.hi};
      accumulate(acc, integrate_osc_2d(amp, phase, box, spec, br1, br2));
    }
  acc.value *= cut;
  acc.err *= cut;
  if (info) *info = acc;
  return acc.value;
}

namespace {

// Autocorrelation factor of the T*T kernel: L(x,u) = phi(x) phi(u) M(u-x)
// with M depending on the difference only.  Exploited by the Schur
// estimator so an n^2 grid needs O(n^2) quadratures.
cplx kernel_M(const Poly2& p_phase, int p, int q, double v1, double v2,
              const QuadSpec& spec, bool* ok) {
  std::vector<Iv> iv1 = pair_intervals(p, 0.0, v1);
  std::vector<Iv> iv2 = pair_intervals(q, 0.0, v2);
  if (iv1.empty() || iv2.empty()) return {0.0, 0.0};

  Poly2 phase = p_phase - p_phase.shifted(-v1, -v2);
  Amp2 amp = [&](double w1, double w2) -> cplx {
    return psi2(p, q, w1, w2) * psi2(p, q, w1 - v1, w2 - v2);
  };
  std::vector<double> br1, br2;
  push_scale_breaks(br1, p, 0.0);
  push_scale_breaks(br1, p, v1);
  push_scale_breaks(br2, q, 0.0);
  push_scale_breaks(br2, q, v2);

  QuadResult acc;
  for (const Iv& i1 : iv1)
    for (const Iv& i2 : iv2) {
      Rect box{i1.lo, i1.hi, i2.lo, i2.hi};
      accumulate(acc, integrate_osc_2d(amp, phase, box, spec, br1, br2));
    }
  if (ok) *ok = *ok && acc.converged;
  return acc.value;
}

}  // namespace

double schur_l2_bound(const Poly2& p_phase, int p, int q, int grid_n,
                      const QuadSpec& spec) {
  if (grid_n < 16)
    throw std::invalid_argument("schur_l2_bound: grid_n must be at least 16");
  const int n = grid_n;
  const double h = 6.0 / n;
  const int side = 2 * n - 1;

  // |M| on the difference grid; Hermitian in v, so one half suffices.
  std::vector<double> absM(static_cast<std::size_t>(side) * side, 0.0);
  double r1 = std::ldexp(1.0, p + 2), r2 = std::ldexp(1.0, q + 2);
  bool ok = true;
  for (int k1 = 0; k1 <= n - 1; ++k1)
    for (int k2 = -(n - 1); k2 <= n - 1; ++k2) {
      if (k1 == 0 && k2 < 0) continue;
      double v1 = h * k1, v2 = h * k2;
      if (std::fabs(v1) > r1 || std::fabs(v2) > r2) continue;
      double m = std::abs(kernel_M(p_phase, p, q, v1, v2, spec, &ok));
      absM[static_cast<std::size_t>(k1 + n - 1) * side + (k2 + n - 1)] = m;
      absM[static_cast<std::size_t>(-k1 + n - 1) * side + (-k2 + n - 1)] = m;
    }

  std::vector<double> bump(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    bump[static_cast<std::size_t>(i)] =
        smooth_bump(-3.0 + h * (i + 0.5), 0.5, 3.0);

  // Row and column sums coincide: |M(-v)| = |M(v)| and the grid is
  // difference-symmetric.  Computed once, used for both sups.
  double sup = 0.0;
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < n; ++i2) {
      double phi_i = bump[i1] * bump[i2];
      if (phi_i == 0.0) continue;
      double row = 0.0;
      for (int j1 = 0; j1 < n; ++j1) {
        double b1 = bump[j1];
        if (b1 == 0.0) continue;
        const double* mrow =
            &absM[static_cast<std::size_t>(j1 - i1 + n - 1) * side];
        for (int j2 = 0; j2 < n; ++j2) {
          double m = mrow[j2 - i2 + n - 1];
          if (m != 0.0) row += b1 * bump[j2] * m;
        }
      }
      sup = std::max(sup, phi_i * row * h * h);
    }
  return std::sqrt(sup);
}

std::vector<std::complex<double>> conv_cell_table(const Poly2& p_phase, int p,
                                                  int q, int grid_n,
                                                  const QuadSpec& spec,
                                                  bool* all_converged) {
  const int n = grid_n;
  const double h = 6.0 / n;
  const int side = 2 * n - 1;
  std::vector<cplx> table(static_cast<std::size_t>(side) * side, cplx{0, 0});

  Poly2 neg = p_phase * -1.0;
  Amp2 amp = [p, q](double w1, double w2) -> cplx {
    return {psi2(p, q, w1, w2), 0.0};
  };
  auto overlaps = [](double lo, double hi, int s) {
    double rlo = std::ldexp(1.0, s - 1), rhi = std::ldexp(1.0, s + 1);
    return (hi > rlo && lo < rhi) || (hi > -rhi && lo < -rlo);
  };

  bool ok = true;
  for (int k1 = -(n - 1); k1 <= n - 1; ++k1) {
    double lo1 = h * k1 - 0.5 * h, hi1 = h * k1 + 0.5 * h;
    if (!overlaps(lo1, hi1, p)) continue;
    for (int k2 = -(n - 1); k2 <= n - 1; ++k2) {
      double lo2 = h * k2 - 0.5 * h, hi2 = h * k2 + 0.5 * h;
      if (!overlaps(lo2, hi2, q)) continue;
      Rect cell{lo1, hi1, lo2, hi2};
      QuadResult r = integrate_osc_2d(amp, neg, cell, spec);
      ok = ok && r.converged;
      table[static_cast<std::size_t>(k1 + n - 1) * side + (k2 + n - 1)] =
          r.value;
    }
  }
  if (all_converged) *all_converged = ok;
  return table;
}

PowerResult power_iteration_l2(const Poly2& p_phase, int p, int q, int grid_n,
                               int iters, const QuadSpec& spec,
                               std::uint64_t seed) {
  if (grid_n < 32)
    throw std::invalid_argument(
        "power_iteration_l2: grid_n must be at least 32");
  if (iters < 10)
    throw std::invalid_argument(
        "power_iteration_l2: need at least 10 iterations");

  const int n = grid_n;
  const int side = 2 * n - 1;
  const double h = 6.0 / n;
  bool table_ok = true;
  std::vector<cplx> table = conv_cell_table(p_phase, p, q, n, spec, &table_ok);

  struct Off {
    int k1, k2;
    cplx g;
  };
  std::vector<Off> offs;
  for (int k1 = -(n - 1); k1 <= n - 1; ++k1)
    for (int k2 = -(n - 1); k2 <= n - 1; ++k2) {
      cplx g = table[static_cast<std::size_t>(k1 + n - 1) * side + (k2 + n - 1)];
      if (g != cplx{0.0, 0.0}) offs.push_back({k1, k2, g});
    }

  std::vector<double> bump(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    bump[static_cast<std::size_t>(i)] =
        smooth_bump(-3.0 + h * (i + 0.5), 0.5, 3.0);
  auto phi_at = [&](int i1, int i2) { return bump[i1] * bump[i2]; };

  const std::size_t dim = static_cast<std::size_t>(n) * n;
  auto apply_w = [&](const std::vector<cplx>& v, std::vector<cplx>& out) {
    std::fill(out.begin(), out.end(), cplx{0, 0});
    for (const Off& o : offs) {
      int j1lo = std::max(0, 0 - o.k1), j1hi = std::min(n, n - o.k1);
      for (int j1 = j1lo; j1 < j1hi; ++j1) {
        int i1 = j1 + o.k1;
        int j2lo = std::max(0, 0 - o.k2), j2hi = std::min(n, n - o.k2);
        const cplx* vr = &v[static_cast<std::size_t>(j1) * n];
        cplx* orow = &out[static_cast<std::size_t>(i1) * n];
        for (int j2 = j2lo; j2 < j2hi; ++j2) {
          double ph = phi_at(j1, j2);
          if (ph != 0.0) orow[j2 + o.k2] += o.g * (ph * vr[j2]);
        }
      }
    }
  };
  auto apply_wt = [&](const std::vector<cplx>& v, std::vector<cplx>& out) {
    std::fill(out.begin(), out.end(), cplx{0, 0});
    for (const Off& o : offs) {
      cplx gc = std::conj(o.g);
      int j1lo = std::max(0, 0 - o.k1), j1hi = std::min(n, n - o.k1);
      for (int j1 = j1lo; j1 < j1hi; ++j1) {
        int i1 = j1 + o.k1;
        int j2lo = std::max(0, 0 - o.k2), j2hi = std::min(n, n - o.k2);
        const cplx* vr = &v[static_cast<std::size_t>(i1) * n];
        cplx* orow = &out[static_cast<std::size_t>(j1) * n];
        for (int j2 = j2lo; j2 < j2hi; ++j2) {
          double ph = phi_at(j1, j2);
          if (ph != 0.0) orow[j2] += gc * (ph * vr[j2 + o.k2]);
        }
      }
    }
  };

  Rng rng(seed);
  std::vector<cplx> v(dim), wv(dim), nv(dim);
  double nn = 0.0;
  for (cplx& c : v) {
    c = {rng.next_normal(), rng.next_normal()};
    nn += std::norm(c);
  }
  nn = std::sqrt(nn);
  for (cplx& c : v) c /= nn;

  PowerResult res;
  double lam_prev = -1.0, lam = 0.0, ratio = 1.0;
  for (int it = 0; it < iters; ++it) {
    apply_w(v, wv);
    double s2 = 0.0;
    for (const cplx& c : wv) s2 += std::norm(c);
    lam = s2;  // ||W v||^2 = v* (W*W) v for unit v
    if (lam == 0.0) {
      res.norm = 0.0;
      res.ratio = 0.0;
      res.converged = table_ok;
      return res;
    }
    apply_wt(wv, nv);
    double norm_nv = 0.0;
    for (const cplx& c : nv) norm_nv += std::norm(c);
    norm_nv = std::sqrt(norm_nv);
    for (std::size_t i = 0; i < dim; ++i) v[i] = nv[i] / norm_nv;
    if (lam_prev > 0.0) ratio = std::fabs(lam - lam_prev) / lam;
    lam_prev = lam;
  }
  res.norm = std::sqrt(lam);
  res.ratio = ratio;
  res.converged = table_ok && ratio <= 0.01;
  return res;
}

}  // namespace oscint
