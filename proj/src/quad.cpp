#include "oscint/quad.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <queue>
#include <stdexcept>

#include <Eigen/Dense>

#include "oscint/dd.hpp"
#include "oscint/dyadic.hpp"

namespace oscint {

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPi = 6.283185307179586;

// ===== Gauss-Legendre rules =================================================

struct GLRule {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

GLRule make_gl(int n) {
  // Newton iteration on Legendre polynomials, nodes symmetric around 0.
  GLRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
  return r;
}

const GLRule& gl_rule(int n) {
  static std::mutex mu;
  static std::map<int, GLRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gl(n)).first;
  return it->second;
}

// ===== Chebyshev-Lobatto nodes and differentiation ==========================

struct ChebRule {
  std::vector<double> t;     // ascending nodes on [-1, 1]
  std::vector<double> bw;    // barycentric weights
  Eigen::MatrixXd d;         // differentiation matrix for these nodes
};

ChebRule make_cheb(int n_pts) {
  ChebRule r;
  int n = n_pts - 1;
  r.t.resize(n_pts);
  r.bw.resize(n_pts);
  for (int j = 0; j <= n; ++j) {
    r.t[j] = -std::cos(M_PI * j / n);
    r.bw[j] = (j % 2 == 0 ? 1.0 : -1.0);
  }
  r.bw[0] *= 0.5;
  r.bw[n] *= 0.5;
  r.d.resize(n_pts, n_pts);
  for (int i = 0; i <= n; ++i) {
    double row = 0.0;
    for (int j = 0; j <= n; ++j) {
      if (i == j) continue;
      double v = (r.bw[j] / r.bw[i]) / (r.t[i] - r.t[j]);
      r.d(i, j) = v;
      row += v;
    }
    r.d(i, i) = -row;
  }
  return r;
}

const ChebRule& cheb_rule(int n_pts) {
  static std::mutex mu;
  static std::map<int, ChebRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n_pts);
  if (it == cache.end()) it = cache.emplace(n_pts, make_cheb(n_pts)).first;
  return it->second;
}

// Barycentric evaluation of data given at cheb nodes.
cplx cheb_eval(const ChebRule& r, const std::vector<cplx>& f, double t) {
  int n = static_cast<int>(r.t.size());
  cplx num = 0.0;
  double den = 0.0;
  for (int j = 0; j < n; ++j) {
    double dt = t - r.t[j];
    if (std::fabs(dt) < 1e-14) return f[j];
    double c = r.bw[j] / dt;
    num += c * f[j];
    den += c;
  }
  return num / den;
}

// ===== Phase evaluation =====================================================

DD poly1_eval_dd(const Poly1& c, double s) {
  DD acc{0.0, 0.0};
  for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k)
    acc = dd_add(dd_mul(acc, s), c[static_cast<std::size_t>(k)]);
  return acc;
}

// exp(i * Phi(s)) with the phase reduced mod 2*pi in double-double.
cplx phase_factor_1d(const Poly1& c, double s) {
  double r = dd_mod_2pi(poly1_eval_dd(c, s));
  return {std::cos(r), std::sin(r)};
}

DD poly2_eval_dd(const Poly2& p, double x, double y) {
  DD acc{p.constant(), 0.0};
  for (const auto& [a, co] : p.terms()) {
    DD t{co, 0.0};
    for (int i = 0; i < a.j; ++i) t = dd_mul(t, x);
    for (int i = 0; i < a.k; ++i) t = dd_mul(t, y);
    acc = dd_add(acc, t);
  }
  return acc;
}

cplx phase_factor_2d(const Poly2& p, double x, double y) {
  double r = dd_mod_2pi(poly2_eval_dd(p, x, y));
  return {std::cos(r), std::sin(r)};
}

// Upper bound for |p| on the rect (triangle inequality at corner radii).
double poly2_bound(const Poly2& p, const Rect& c) {
  double m1 = std::max(std::fabs(c.x1lo), std::fabs(c.x1hi));
  double m2 = std::max(std::fabs(c.x2lo), std::fabs(c.x2hi));
  double s = std::fabs(p.constant());
  for (const auto& [a, co] : p.terms()) {
    double t = std::fabs(co);
    for (int i = 0; i < a.j; ++i) t *= m1;
    for (int i = 0; i < a.k; ++i) t *= m2;
    s += t;
  }
  return s;
}

}  // namespace

// ===== Poly1 utilities ======================================================

double poly1_eval(const Poly1& c, double s) {
  double acc = 0.0;
  for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k)
    acc = acc * s + c[static_cast<std::size_t>(k)];
  return acc;
}

Poly1 poly1_derive(const Poly1& c) {
  Poly1 d;
  for (std::size_t k = 1; k < c.size(); ++k)
    d.push_back(c[k] * static_cast<double>(k));
  return d;
}

std::vector<double> poly1_real_roots(const Poly1& c_in, double a, double b) {
  // Strip trailing zero coefficients.
  Poly1 c = c_in;
  while (!c.empty() && c.back() == 0.0) c.pop_back();
  std::vector<double> roots;
  int deg = static_cast<int>(c.size()) - 1;
  if (deg < 1) return roots;
  if (deg == 1) {
    roots.push_back(-c[0] / c[1]);
  } else if (deg == 2) {
    double disc = c[1] * c[1] - 4.0 * c[2] * c[0];
    if (disc >= 0.0) {
      double sq = std::sqrt(disc);
      double q = -0.5 * (c[1] + (c[1] >= 0 ? sq : -sq));
      roots.push_back(q / c[2]);
      if (q != 0.0) roots.push_back(c[0] / q);
    }
  } else {
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -c[i] / c[deg];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    for (int i = 0; i < deg; ++i) {
      auto z = es.eigenvalues()(i);
      if (std::fabs(z.imag()) <= 1e-9 * (1.0 + std::fabs(z.real())))
        roots.push_back(z.real());
    }
  }
  // Keep roots inside (a, b), Newton-polish, sort, merge clusters.
  Poly1 d = poly1_derive(c);
  std::vector<double> out;
  double span = b - a;
  for (double r : roots) {
    for (int it = 0; it < 3; ++it) {
      double fv = poly1_eval(c, r), dv = poly1_eval(d, r);
      if (dv != 0.0 && std::isfinite(fv / dv)) r -= fv / dv;
    }
    if (r > a + 1e-14 * span && r < b - 1e-14 * span) out.push_back(r);
  }
  std::sort(out.begin(), out.end());
  std::vector<double> merged;
  for (double r : out)
    if (merged.empty() || r - merged.back() > 1e-12 * span) merged.push_back(r);
  return merged;
}

Poly1 poly2_restrict(const Poly2& p, int fixed_axis, double value) {
  Poly1 c;
  auto bump = [&c](int k, double v) {
    if (static_cast<int>(c.size()) <= k) c.resize(k + 1, 0.0);
    c[static_cast<std::size_t>(k)] += v;
  };
  bump(0, p.constant());
  for (const auto& [a, co] : p.terms()) {
    if (fixed_axis == 0) {
      double f = co;
      for (int i = 0; i < a.j; ++i) f *= value;
      bump(a.k, f);
    } else {
      double f = co;
      for (int i = 0; i < a.k; ++i) f *= value;
      bump(a.j, f);
    }
  }
  return c;
}

// ===== 1D engine ============================================================

namespace {

constexpr double kOscResolved = 2.0;   // panel counts as resolved below this
constexpr long kGlSegmentCap = 4096;   // max initial quarter-period panels

struct Panel1 {
  double a, b;
  cplx value;
  double err;
  bool splittable;
  long id;
};

// Two-level differences sit at rounding level once a panel is fully
// resolved; below this multiple of the panel's own absolute mass further
// splitting only random-walks the estimate upward.
constexpr double kNoiseFloor = 32.0 * 2.220446049250313e-16;

// Inward offset (in [-1, 1] panel coordinates) for amplitude samples at
// shared panel endpoints, so jump discontinuities marked by breakpoints are
// read from the correct side.
constexpr double kEdgeNudge = 1e-12;

struct Engine1 {
  const Amp1& amp;
  const Poly1& phase;
  Poly1 dphase;
  const QuadSpec& spec;
  double span;
  long panels = 0;
  long next_id = 0;
  bool budget_ok = true;

  Engine1(const Amp1& f, const Poly1& ph, const QuadSpec& sp, double sp_len)
      : amp(f), phase(ph), dphase(poly1_derive(ph)), spec(sp), span(sp_len) {}

  cplx gl(double a, double b, int n, double* l1_mass = nullptr) {
    const GLRule& r = gl_rule(n);
    double mid = 0.5 * (a + b), h = 0.5 * (b - a);
    cplx s = 0.0;
    double m = 0.0;
    for (int i = 0; i < n; ++i) {
      double x = mid + h * r.x[i];
      cplx fx = amp(x);
      s += r.w[i] * fx * phase_factor_1d(phase, x);
      m += r.w[i] * std::abs(fx);
    }
    if (l1_mass) *l1_mass = m * h;
    return s * h;
  }

  cplx levin(double a, double b, int n_pts) {
    const ChebRule& r = cheb_rule(n_pts);
    double mid = 0.5 * (a + b), h = 0.5 * (b - a);
    Eigen::MatrixXcd m = r.d.cast<cplx>();
    Eigen::VectorXcd rhs(n_pts);
    for (int j = 0; j < n_pts; ++j) {
      // Panels share endpoints, and amplitudes may jump exactly there
      // (that is what breakpoints mark).  Sample the one-sided limit.
      double t = r.t[j];
      if (j == 0) t += kEdgeNudge;
      if (j == n_pts - 1) t -= kEdgeNudge;
      double s = mid + h * t;
      m(j, j) += cplx(0.0, h * poly1_eval(dphase, s));
      rhs(j) = h * amp(s);
    }
    Eigen::VectorXcd u = m.colPivHouseholderQr().solve(rhs);
    return u(n_pts - 1) * phase_factor_1d(phase, b) -
           u(0) * phase_factor_1d(phase, a);
  }

  // First-derivative decay bound valid on panels where Phi' is single-signed
  // and monotone (guaranteed: segments are cut at roots of Phi' and Phi'').
  double prune_bound(double a, double b) {
    double la = std::fabs(poly1_eval(dphase, a));
    double lb = std::fabs(poly1_eval(dphase, b));
    double lam = std::min(la, lb);
    if (lam <= 0.0) return HUGE_VAL;
    double amax = 0.0, var = 0.0, prev = 0.0;
    const int ns = 9;
    for (int i = 0; i < ns; ++i) {
      double x = a + (b - a) * i / (ns - 1.0);
      double v = std::abs(amp(x));
      amax = std::max(amax, v);
      if (i > 0) var += std::fabs(v - prev);
      prev = v;
    }
    return 4.0 * (2.0 * amax + 2.0 * var) / lam;
  }

  Panel1 eval_panel(double a, double b, double prune_tol) {
    ++panels;
    Panel1 p{a, b, 0.0, 0.0, true, next_id++};
    double dphi = std::fabs(poly1_eval_phase(b) - poly1_eval_phase(a));
    double oscs = dphi / kTwoPi;
    int n = spec.nodes_per_panel;
    if (oscs <= kOscResolved) {
      double mass = 0.0;
      cplx v1 = gl(a, b, n, &mass);
      cplx v0 = gl(a, b, std::max(4, n / 2));
      p.value = v1;
      p.err = std::abs(v1 - v0);
      if (p.err <= kNoiseFloor * mass) p.splittable = false;
      return p;
    }
    double bound = prune_bound(a, b);
    if (bound < prune_tol) {
      p.value = 0.0;
      p.err = bound;
      return p;
    }
    cplx va = levin(a, b, n + 1);
    cplx vb = levin(a, b, n + 9);
    p.value = vb;
    p.err = std::abs(va - vb);
    if (p.err <= 1e-12 * std::abs(vb)) p.splittable = false;
    return p;
  }

  double poly1_eval_phase(double s) { return dd_value(poly1_eval_dd(phase, s)); }
};

}  // namespace

QuadResult integrate_osc_1d(const Amp1& amp, const Poly1& phase, double a,
                            double b, const QuadSpec& spec,
                            const std::vector<double>& breakpoints) {
  if (!(a <= b)) throw std::invalid_argument("integrate_osc_1d: a > b");
  QuadResult res;
  if (a == b) return res;
  if (spec.rel_tol <= 0 || spec.abs_tol <= 0 || spec.nodes_per_panel < 4 ||
      spec.max_panels < 1)
    throw std::invalid_argument("integrate_osc_1d: bad QuadSpec");

  Engine1 eng(amp, phase, spec, b - a);

  // Cut points: breakpoints plus roots of Phi' and Phi''.
  std::vector<double> cuts{a, b};
  for (double s : breakpoints)
    if (s > a && s < b) cuts.push_back(s);
  Poly1 d1 = poly1_derive(phase);
  Poly1 d2 = poly1_derive(d1);
  for (double s : poly1_real_roots(d1, a, b)) cuts.push_back(s);
  for (double s : poly1_real_roots(d2, a, b)) cuts.push_back(s);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [&](double x, double y) {
                           return std::fabs(x - y) <= 1e-14 * (b - a);
                         }),
             cuts.end());

  auto cmp = [](const Panel1& x, const Panel1& y) {
    if (x.err != y.err) return x.err < y.err;
    return x.id > y.id;
  };
  std::priority_queue<Panel1, std::vector<Panel1>, decltype(cmp)> heap(cmp);

  cplx total = 0.0;
  double err_frozen = 0.0;

  auto cur_tol = [&](cplx t, double e) {
    (void)e;
    return std::max(spec.abs_tol, spec.rel_tol * std::abs(t));
  };

  // Initial layout per segment.
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double s0 = cuts[i], s1 = cuts[i + 1];
    double md = std::max(std::fabs(poly1_eval(d1, s0)),
                         std::fabs(poly1_eval(d1, s1)));
    double n_req = std::ceil((s1 - s0) * md / kTwoPi) * 4.0;
    long n0 = n_req < 1.0 ? 1 : static_cast<long>(n_req);
    if (n0 > kGlSegmentCap) n0 = 1;  // heap + levin handle the rest
    // Respect the panel budget at layout time; every segment still gets
    // covered by at least one panel.
    long remaining = spec.max_panels - eng.panels;
    if (n0 > remaining) n0 = remaining < 1 ? 1 : remaining;
    for (long k = 0; k < n0; ++k) {
      double pa = s0 + (s1 - s0) * static_cast<double>(k) / n0;
      double pb = s0 + (s1 - s0) * static_cast<double>(k + 1) / n0;
      Panel1 p = eng.eval_panel(pa, pb, 0.0);
      total += p.value;
      heap.push(p);
    }
  }

  double err_live = 0.0;
  {
    // Recompute live error once from heap contents.
    std::priority_queue<Panel1, std::vector<Panel1>, decltype(cmp)> tmp(heap);
    while (!tmp.empty()) {
      err_live += tmp.top().err;
      tmp.pop();
    }
  }

  while (err_frozen + err_live > cur_tol(total, 0) && !heap.empty()) {
    if (eng.panels >= spec.max_panels) {
      res.converged = false;
      break;
    }
    Panel1 top = heap.top();
    heap.pop();
    err_live -= top.err;
    if (!top.splittable || top.b - top.a < 1e-13 * (b - a)) {
      err_frozen += top.err;
      continue;
    }
    double mid = 0.5 * (top.a + top.b);
    double share = cur_tol(total, 0) * (top.b - top.a) / (b - a) * 0.25;
    Panel1 l = eng.eval_panel(top.a, mid, share);
    Panel1 r = eng.eval_panel(mid, top.b, share);
    total += l.value + r.value - top.value;
    err_live += l.err + r.err;
    heap.push(l);
    heap.push(r);
  }

  res.value = total;
  res.err = err_frozen + err_live;
  res.panels = eng.panels;
  if (res.err > cur_tol(total, 0)) res.converged = false;
  return res;
}

// ===== 2D engine ============================================================

namespace {

struct Cell2 {
  Rect r;
  cplx value;
  double err;
  int split_axis;  // preferred axis for refinement
  bool splittable;
  long id;
};

struct Engine2 {
  const Amp2& amp;
  const Poly2& phase;
  Poly2 d1, d2, d11, d12, d22;
  int deg1, deg2;
  const QuadSpec& spec;
  Rect box;
  long panels = 0;
  long next_id = 0;

  Engine2(const Amp2& f, const Poly2& ph, const QuadSpec& sp, const Rect& bx)
      : amp(f), phase(ph), spec(sp), box(bx) {
    d1 = phase.partial({1, 0});
    d2 = phase.partial({0, 1});
    d11 = d1.partial({1, 0});
    d12 = d1.partial({0, 1});
    d22 = d2.partial({0, 1});
    deg1 = 0;
    deg2 = 0;
    for (const auto& [a, c] : phase.terms()) {
      deg1 = std::max(deg1, a.j);
      deg2 = std::max(deg2, a.k);
    }
  }

  cplx gl2(const Rect& c, int n, double* l1_mass = nullptr) {
    const GLRule& r = gl_rule(n);
    double m1 = 0.5 * (c.x1lo + c.x1hi), h1 = 0.5 * c.w1();
    double m2 = 0.5 * (c.x2lo + c.x2hi), h2 = 0.5 * c.w2();
    cplx s = 0.0;
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
      double x = m1 + h1 * r.x[i];
      cplx row = 0.0;
      double mrow = 0.0;
      for (int j = 0; j < n; ++j) {
        double y = m2 + h2 * r.x[j];
        cplx fx = amp(x, y);
        row += r.w[j] * fx * phase_factor_2d(phase, x, y);
        mrow += r.w[j] * std::abs(fx);
      }
      s += r.w[i] * row;
      mass += r.w[i] * mrow;
    }
    if (l1_mass) *l1_mass = mass * h1 * h2;
    return s * (h1 * h2);
  }

  // Lower bound for |dP| on the cell via center value minus Lipschitz radius.
  double grad_lower(const Poly2& dp, const Poly2& lx, const Poly2& ly,
                    const Rect& c) {
    double cx = 0.5 * (c.x1lo + c.x1hi), cy = 0.5 * (c.x2lo + c.x2hi);
    double v = std::fabs(dp.eval(cx, cy));
    double rad =
        0.5 * c.w1() * poly2_bound(lx, c) + 0.5 * c.w2() * poly2_bound(ly, c);
    return std::max(0.0, v - rad);
  }

  double amp_max(const Rect& c) {
    double m = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        double x = c.x1lo + c.w1() * i / 4.0;
        double y = c.x2lo + c.w2() * j / 4.0;
        m = std::max(m, std::abs(amp(x, y)));
      }
    return m;
  }

  cplx levin2d(const Rect& c, int n_pts) {
    const ChebRule& r = cheb_rule(n_pts);
    int n = n_pts;
    double m1 = 0.5 * (c.x1lo + c.x1hi), h1 = 0.5 * c.w1();
    double m2 = 0.5 * (c.x2lo + c.x2hi), h2 = 0.5 * c.w2();
    int m = n * n;
    Eigen::MatrixXcd sys = Eigen::MatrixXcd::Zero(m, 2 * m);
    Eigen::VectorXcd rhs(m);
    auto idx = [n](int i, int j) { return i * n + j; };
    for (int i = 0; i < n; ++i) {
      double ti = r.t[i];
      if (i == 0) ti += kEdgeNudge;
      if (i == n - 1) ti -= kEdgeNudge;
      double x = m1 + h1 * ti;
      for (int j = 0; j < n; ++j) {
        double tj = r.t[j];
        if (j == 0) tj += kEdgeNudge;
        if (j == n - 1) tj -= kEdgeNudge;
        double y = m2 + h2 * tj;
        int row = idx(i, j);
        rhs(row) = amp(x, y);
        double p1 = d1.eval(x, y), p2 = d2.eval(x, y);
        for (int k = 0; k < n; ++k) {
          sys(row, idx(k, j)) += r.d(i, k) / h1;          // d u1 / dx1
          sys(row, m + idx(i, k)) += r.d(j, k) / h2;      // d u2 / dx2
        }
        sys(row, idx(i, j)) += cplx(0.0, p1);
        sys(row, m + idx(i, j)) += cplx(0.0, p2);
      }
    }
    Eigen::VectorXcd u =
        sys.completeOrthogonalDecomposition().solve(rhs);

    // Boundary terms: four 1D oscillatory edge integrals.
    QuadSpec espec = spec;
    espec.max_panels = std::max(1024l, spec.max_panels / 64);
    auto edge_amp_x1 = [&](int i_fixed) {
      std::vector<cplx> f(n);
      for (int j = 0; j < n; ++j) f[j] = u(idx(i_fixed, j));
      return f;
    };
    auto edge_amp_x2 = [&](int j_fixed) {
      std::vector<cplx> f(n);
      for (int i = 0; i < n; ++i) f[i] = u(m + idx(i, j_fixed));
      return f;
    };
    cplx sum = 0.0;
    {
      std::vector<cplx> fr = edge_amp_x1(n - 1), fl = edge_amp_x1(0);
      Amp1 ar = [&](double y) { return cheb_eval(r, fr, (y - m2) / h2); };
      Amp1 al = [&](double y) { return cheb_eval(r, fl, (y - m2) / h2); };
      Poly1 pr = poly2_restrict(phase, 0, c.x1hi);
      Poly1 pl = poly2_restrict(phase, 0, c.x1lo);
      QuadResult qr = integrate_osc_1d(ar, pr, c.x2lo, c.x2hi, espec);
      QuadResult ql = integrate_osc_1d(al, pl, c.x2lo, c.x2hi, espec);
      sum += qr.value - ql.value;
    }
    {
      std::vector<cplx> ft = edge_amp_x2(n - 1), fb = edge_amp_x2(0);
      Amp1 at = [&](double x) { return cheb_eval(r, ft, (x - m1) / h1); };
      Amp1 ab = [&](double x) { return cheb_eval(r, fb, (x - m1) / h1); };
      Poly1 pt = poly2_restrict(phase, 1, c.x2hi);
      Poly1 pb = poly2_restrict(phase, 1, c.x2lo);
      QuadResult qt = integrate_osc_1d(at, pt, c.x1lo, c.x1hi, espec);
      QuadResult qb = integrate_osc_1d(ab, pb, c.x1lo, c.x1hi, espec);
      sum += qt.value - qb.value;
    }
    return sum;
  }

  // Oscillation count per axis above which the collocation solve beats
  // splitting down to resolved tensor panels.
  static constexpr double kOscCollocation = 32.0;

  Cell2 eval_cell(const Rect& c, double prune_tol) {
    ++panels;
    Cell2 cell{c, 0.0, 0.0, 0, true, next_id++};
    double mb1 = poly2_bound(d1, c), mb2 = poly2_bound(d2, c);
    double osc1 = c.w1() * mb1 / kTwoPi, osc2 = c.w2() * mb2 / kTwoPi;
    cell.split_axis = osc1 > osc2   ? 0
                      : osc2 > osc1 ? 1
                                    : (c.w1() >= c.w2() ? 0 : 1);
    if (osc1 <= 1.0 && osc2 <= 1.0) {
      // Oscillation is resolved, so remaining error is amplitude
      // truncation; that shrinks by splitting the wider axis, not the
      // more oscillatory one.
      cell.split_axis = c.w1() >= c.w2() ? 0 : 1;
      int n = spec.nodes_per_panel;
      double mass = 0.0;
      cplx v1 = gl2(c, n, &mass);
      cplx v0 = gl2(c, std::max(4, n / 2));
      cell.value = v1;
      cell.err = std::abs(v1 - v0);
      if (cell.err <= kNoiseFloor * mass) cell.splittable = false;
      return cell;
    }
    double l1 = grad_lower(d1, d11, d12, c);
    double l2 = grad_lower(d2, d12, d22, c);
    // Derivative-decay prune along the better axis.
    double lam = std::max(l1, l2);
    if (lam > 0.0 && prune_tol > 0.0) {
      double amax = amp_max(c);
      int pieces = (l1 >= l2 ? deg1 : deg2) + 1;
      double wother = l1 >= l2 ? c.w2() : c.w1();
      double bound = wother * pieces * 4.0 * (3.0 * amax) / lam;
      if (bound < prune_tol) {
        cell.value = 0.0;
        cell.err = bound;
        return cell;
      }
    }
    if (lam > 0.0 && std::max(osc1, osc2) >= kOscCollocation) {
      // The collocation solve is the cost center of the whole laboratory
      // (dense least-norm solve on n^2 x 2n^2), so the order pair is kept
      // as low as the two-level error check allows; cells the pair cannot
      // certify are split rather than solved at higher order.
      int na = std::max(6, spec.nodes_per_panel / 2 - 2);
      cplx va = levin2d(c, na);
      cplx vb = levin2d(c, na + 3);
      cell.value = vb;
      cell.err = std::abs(va - vb);
      if (cell.err <= 1e-12 * std::abs(vb)) cell.splittable = false;
      return cell;
    }
    // Moderate oscillation or no derivative certificate: coarse value with
    // an error that forces a split toward resolved panels.
    cplx v1 = gl2(c, std::max(4, spec.nodes_per_panel / 2));
    cell.value = v1;
    cell.err = std::abs(v1) + amp_max(c) * c.w1() * c.w2();
    return cell;
  }
};

}  // namespace

QuadResult integrate_osc_2d(const Amp2& amp, const Poly2& phase,
                            const Rect& box, const QuadSpec& spec,
                            const std::vector<double>& breaks1,
                            const std::vector<double>& breaks2) {
  if (!(box.x1lo <= box.x1hi) || !(box.x2lo <= box.x2hi))
    throw std::invalid_argument("integrate_osc_2d: malformed box");
  QuadResult res;
  if (box.w1() == 0.0 || box.w2() == 0.0) return res;

  Engine2 eng(amp, phase, spec, box);

  auto make_axis = [](double lo, double hi, const std::vector<double>& bks,
                      double mderiv) {
    std::vector<double> cuts{lo, hi};
    for (double s : bks)
      if (s > lo && s < hi) cuts.push_back(s);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [&](double x, double y) {
                             return std::fabs(x - y) <= 1e-14 * (hi - lo);
                           }),
               cuts.end());
    // Pre-split for oscillation, capped; adaptivity handles the rest.
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      double a = cuts[i], b = cuts[i + 1];
      double n_req = std::ceil((b - a) * mderiv / kTwoPi) * 4.0;
      long n0 = n_req < 1.0 ? 1 : static_cast<long>(n_req);
      if (n0 > 16) n0 = 1;  // too oscillatory for panels, leave whole
      for (long k = 0; k < n0; ++k)
        out.push_back(a + (b - a) * static_cast<double>(k) / n0);
    }
    out.push_back(hi);
    return out;
  };

  double mb1 = poly2_bound(eng.d1, box), mb2 = poly2_bound(eng.d2, box);
  std::vector<double> ax1 = make_axis(box.x1lo, box.x1hi, breaks1, mb1);
  std::vector<double> ax2 = make_axis(box.x2lo, box.x2hi, breaks2, mb2);

  auto cmp = [](const Cell2& x, const Cell2& y) {
    if (x.err != y.err) return x.err < y.err;
    return x.id > y.id;
  };
  std::priority_queue<Cell2, std::vector<Cell2>, decltype(cmp)> heap(cmp);

  cplx total = 0.0;
  double err_live = 0.0, err_frozen = 0.0;
  auto cur_tol = [&]() {
    return std::max(spec.abs_tol, spec.rel_tol * std::abs(total));
  };

  for (std::size_t i = 0; i + 1 < ax1.size(); ++i)
    for (std::size_t j = 0; j + 1 < ax2.size(); ++j) {
      Rect c{ax1[i], ax1[i + 1], ax2[j], ax2[j + 1]};
      Cell2 cell = eng.eval_cell(c, 0.0);
      total += cell.value;
      err_live += cell.err;
      heap.push(cell);
    }

  double area = box.w1() * box.w2();
  while (err_frozen + err_live > cur_tol() && !heap.empty()) {
    if (eng.panels >= spec.max_panels) {
      res.converged = false;
      break;
    }
    Cell2 top = heap.top();
    heap.pop();
    err_live -= top.err;
    double min_w = 1e-12 * std::max(box.w1(), box.w2());
    if (!top.splittable ||
        (top.r.w1() < min_w && top.r.w2() < min_w)) {
      err_frozen += top.err;
      continue;
    }
    int axis = top.split_axis;
    if (axis == 0 && top.r.w1() < min_w) axis = 1;
    if (axis == 1 && top.r.w2() < min_w) axis = 0;
    Rect l = top.r, r = top.r;
    if (axis == 0) {
      double mid = 0.5 * (top.r.x1lo + top.r.x1hi);
      l.x1hi = mid;
      r.x1lo = mid;
    } else {
      double mid = 0.5 * (top.r.x2lo + top.r.x2hi);
      l.x2hi = mid;
      r.x2lo = mid;
    }
    double share =
        cur_tol() * (top.r.w1() * top.r.w2()) / area * 0.25;
    Cell2 cl = eng.eval_cell(l, share);
    Cell2 cr = eng.eval_cell(r, share);
    total += cl.value + cr.value - top.value;
    err_live += cl.err + cr.err;
    heap.push(cl);
    heap.push(cr);
  }

  if (std::getenv("OSCINT_DEBUG_2D")) {
    std::fprintf(stderr,
                 "[2d] total=%.3e err_live=%.3e err_frozen=%.3e panels=%ld "
                 "heap=%zu\n",
                 std::abs(total), err_live, err_frozen, eng.panels,
                 heap.size());
    for (int i = 0; i < 8 && !heap.empty(); ++i) {
      const Cell2& t = heap.top();
      double mb1 = poly2_bound(eng.d1, t.r), mb2 = poly2_bound(eng.d2, t.r);
      std::fprintf(stderr,
                   "  cell [%g,%g]x[%g,%g] err=%.3e splittable=%d osc=(%.2f,"
                   "%.2f) |v|=%.3e\n",
                   t.r.x1lo, t.r.x1hi, t.r.x2lo, t.r.x2hi, t.err,
                   (int)t.splittable, t.r.w1() * mb1 / kTwoPi,
                   t.r.w2() * mb2 / kTwoPi, std::abs(t.value));
      heap.pop();
    }
  }

  res.value = total;
  res.err = err_frozen + err_live;
  res.panels = eng.panels;
  if (res.err > cur_tol()) res.converged = false;
  return res;
}

// ===== Probes built on the engines =========================================

VdcProbe vdc_probe(const Poly2& q, const SupportSet& delta_set,
                   const Amp2& amp, const Rect& box, double lambda,
                   MultiIndex alpha, const QuadSpec& spec) {
  if (delta_set.empty())
    throw std::invalid_argument("vdc_probe: empty index set");
  if (lambda <= 0) throw std::invalid_argument("vdc_probe: lambda <= 0");

  // Grid check of the derivative floor.
  Poly2 da = q.partial(alpha);
  const int gn = 128;
  for (int i = 0; i < gn; ++i)
    for (int j = 0; j < gn; ++j) {
      double x = box.x1lo + box.w1() * i / (gn - 1.0);
      double y = box.x2lo + box.w2() * j / (gn - 1.0);
      if (std::fabs(da.eval(x, y)) < lambda)
        throw std::domain_error(
            "vdc_probe: |derivative| drops below lambda on the box");
    }

  double dstar = 0.0;
  for (auto a : delta_set)
    dstar = std::max(dstar, 1.0 / static_cast<double>(a.order()));
  VdcProbe out;
  out.delta = std::min(0.5, dstar);

  // Amplitude sup and gradient l1 norm (central differences, fixed grid).
  double sup = 0.0, grad_l1 = 0.0;
  const int qn = 64;
  const GLRule& r = gl_rule(qn);
  double m1 = 0.5 * (box.x1lo + box.x1hi), h1 = 0.5 * box.w1();
  double m2 = 0.5 * (box.x2lo + box.x2hi), h2 = 0.5 * box.w2();
  const double fd = 1e-6;
  for (int i = 0; i < qn; ++i) {
    double x = m1 + h1 * r.x[i];
    for (int j = 0; j < qn; ++j) {
      double y = m2 + h2 * r.x[j];
      double v = std::abs(amp(x, y));
      sup = std::max(sup, v);
      double gx = (std::abs(amp(x + fd, y)) - std::abs(amp(x - fd, y))) /
                  (2.0 * fd);
      double gy = (std::abs(amp(x, y + fd)) - std::abs(amp(x, y - fd))) /
                  (2.0 * fd);
      grad_l1 += r.w[i] * r.w[j] * std::hypot(gx, gy);
    }
  }
  grad_l1 *= h1 * h2;
  out.envelope = std::pow(lambda, -out.delta) * (sup + grad_l1);

  QuadResult qr = integrate_osc_2d(amp, q, box, spec);
  out.integral_mag = std::abs(qr.value);
  out.converged = qr.converged;
  return out;
}

QuadResult ul2_sum(const Poly1& phase, const std::vector<int>& scales,
                   const QuadSpec& spec) {
  QuadResult out;
  cplx sum = 0.0, comp = 0.0;
  // Beyond this phase magnitude the double-double angle reduction stops
  // being meaningful, so extreme scales are bounded instead of integrated.
  const double kPhaseSafe = 1e12;
  Poly1 dp = poly1_derive(phase);
  Poly1 ddp = poly1_derive(dp);
  for (int p : scales) {
    double r0 = std::ldexp(1.0, p - 1), r2 = std::ldexp(1.0, p + 1);
    double r1 = std::ldexp(1.0, p);
    double phase_cap = 0.0;
    {
      double pw = 1.0;
      for (double c : phase) {
        phase_cap += std::fabs(c) * pw;
        pw *= r2;
      }
    }
    for (int side = 0; side < 2; ++side) {
      double a = side == 0 ? -r2 : r0;
      double b = side == 0 ? -r0 : r2;
      if (phase_cap > kPhaseSafe) {
        // First-derivative bound: |integral| <= (2 max|psi| + Var psi) /
        // min|phase'| when phase' is root-free here.  |psi| <= 1/|s| and
        // psi runs 0 -> peak -> 0, so the numerator is at most 4/r0.  At
        // scales this far out the candidate phases have no critical points
        // (their roots all sit near the unit interval), so the fallback
        // mass bound 2 ln 2 is never reached in practice.
        double lam = std::numeric_limits<double>::infinity();
        if (poly1_real_roots(dp, a, b).empty()) {
          lam = std::min(std::fabs(poly1_eval(dp, a)),
                         std::fabs(poly1_eval(dp, b)));
          for (double r : poly1_real_roots(ddp, a, b))
            lam = std::min(lam, std::fabs(poly1_eval(dp, r)));
        } else {
          lam = 0.0;
        }
        double bound = lam > 0.0 ? 4.0 / (r0 * lam) : 2.0 * std::log(2.0);
        out.err += std::min(bound, 2.0 * std::log(2.0));
        continue;
      }
      std::vector<double> bks{side == 0 ? -r1 : r1};
      Amp1 f = [p](double s) { return cplx(psi(p, s), 0.0); };
      QuadResult t = integrate_osc_1d(f, phase, a, b, spec, bks);
      // Kahan step.
      cplx y = t.value - comp;
      cplx s2 = sum + y;
      comp = (s2 - sum) - y;
      sum = s2;
      out.err += t.err;
      out.panels += t.panels;
      if (!t.converged) out.converged = false;
    }
  }
  out.value = sum;
  return out;
}

}  // namespace oscint
