#include "oscint/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oscint/dyadic.hpp"
#include "oscint/io.hpp"
#include "oscint/rng.hpp"
#include "oscint/workpool.hpp"

namespace oscint {

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Progress lines on stderr for the long sweeps, enabled by setting
// OSCINT_TRACE.  Results never depend on this; it only narrates.
void tracef(const char* fmt, ...) {
  static const bool on = [] {
    const char* v = std::getenv("OSCINT_TRACE");
    return v != nullptr && *v != '\0';
  }();
  if (!on) return;
  va_list ap;
  va_start(ap, fmt);
  std::fprintf(stderr, "[oscint] ");
  std::vfprintf(stderr, fmt, ap);
  std::fputc('\n', stderr);
  va_end(ap);
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string join_pairs(const std::vector<ScalePair>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(v[i].p) + ',' + std::to_string(v[i].q);
  }
  return out;
}

// Transform of the signed unit step (+1 on [0,1/2], -1 on [-1/2,0)) against
// e^{-i xi s}: -4i sin^2(xi/4) / xi, written with sin^2 so the small-xi
// cancellation is exact.  Tends to -i xi / 4 as xi -> 0.
std::complex<double> step_transform(double xi) {
  if (xi == 0.0) return {0.0, 0.0};
  double s = std::sin(0.25 * xi);
  return {0.0, -4.0 * s * s / xi};
}

double step_transform_mag(double xi) { return std::abs(step_transform(xi)); }

// Adaptive Simpson for a nonnegative integrand that also carries its own
// error estimate (quadrature noise from an inner integral).  The integrand
// returns (value, inner error); the inner errors are folded into .inner with
// the same quadrature weights.  knots are initial panel boundaries, used to
// seed the scale estimate before any tolerance decisions are made.
struct AbsIntegral {
  double value = 0.0;
  double err = 0.0;    // Richardson two-level estimate
  double inner = 0.0;  // propagated integrand error estimates
  long evals = 0;
  bool converged = true;
};

class AbsSimpson {
 public:
  AbsSimpson(std::function<std::pair<double, double>(double)> f, int max_depth)
      : f_(std::move(f)), max_depth_(max_depth) {}

  AbsIntegral run(const std::vector<double>& knots, double rel_tol,
                  double abs_tol) {
    struct Panel {
      double a, b;
      std::pair<double, double> fa, fm, fb;
      double s;
    };
    std::vector<Panel> coarse;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      Panel p;
      p.a = knots[i];
      p.b = knots[i + 1];
      p.fa = eval(p.a);
      p.fm = eval(0.5 * (p.a + p.b));
      p.fb = eval(p.b);
      p.s = simpson(p.a, p.b, p.fa.first, p.fm.first, p.fb.first);
      total += p.s;
      coarse.push_back(p);
    }
    double tol = std::max(abs_tol, rel_tol * std::fabs(total));
    double share = tol / static_cast<double>(std::max<std::size_t>(
                             1, coarse.size()));
    for (const Panel& p : coarse)
      refine(p.a, p.b, p.fa, p.fm, p.fb, p.s, share, max_depth_);
    return out_;
  }

 private:
  static double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  }

  std::pair<double, double> eval(double x) {
    ++out_.evals;
    return f_(x);
  }

  void refine(double a, double b, const std::pair<double, double>& fa,
              const std::pair<double, double>& fm,
              const std::pair<double, double>& fb, double s, double tol,
              int depth) {
    double m = 0.5 * (a + b);
    auto fl = eval(0.5 * (a + m));
    auto fr = eval(0.5 * (m + b));
    double sl = simpson(a, m, fa.first, fl.first, fm.first);
    double sr = simpson(m, b, fm.first, fr.first, fb.first);
    double d = sl + sr - s;
    if (std::fabs(d) <= 15.0 * tol || depth <= 0) {
      out_.value += sl + sr + d / 15.0;
      out_.err += std::fabs(d) / 15.0;
      out_.inner += (b - a) / 8.0 *
                    (fa.second + 2.0 * fl.second + 2.0 * fm.second +
                     2.0 * fr.second + fb.second);
      if (depth <= 0 && std::fabs(d) > 15.0 * tol) out_.converged = false;
      return;
    }
    refine(a, m, fa, fl, fm, sl, 0.5 * tol, depth - 1);
    refine(m, b, fm, fr, fb, sr, 0.5 * tol, depth - 1);
  }

  std::function<std::pair<double, double>(double)> f_;
  int max_depth_;
  AbsIntegral out_;
};

// Dyadic ladder a, 2a, 4a, ..., capped at b.
std::vector<double> dyadic_knots(double a, double b) {
  std::vector<double> k{a};
  for (double t = 2.0 * a; t < b; t *= 2.0) k.push_back(t);
  k.push_back(b);
  return k;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> ranks_of(const std::vector<double>& v) {
  std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average tie rank
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

LinFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line needs two same-length samples");
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0)
    throw std::invalid_argument("fit_line: degenerate abscissae");
  LinFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy == 0.0) {
    f.r2 = 1.0;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double r = y[i] - (f.intercept + f.slope * x[i]);
      ss_res += r * r;
    }
    f.r2 = 1.0 - ss_res / syy;
  }
  return f;
}

double spearman_rho(const std::vector<double>& a,
                    const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman_rho needs two same-length samples");
  std::vector<double> ra = ranks_of(a), rb = ranks_of(b);
  double n = static_cast<double>(a.size());
  double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
    sab += (ra[i] - ma) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;  // a constant column has no rank order
  return sab / std::sqrt(saa * sbb);
}

int q_min_for(double gamma) {
  if (!(gamma >= 2.0))
    throw std::invalid_argument("q_min_for: separation factor must be >= 2");
  return static_cast<int>(std::ceil(std::log2(gamma))) + 2;
}

ExperimentResult run_no_decay(const std::vector<int>& m_list,
                              const QuadSpec& spec, int gamma_exponent) {
  if (m_list.empty()) throw std::invalid_argument("no-decay: empty m list");
  for (int m : m_list)
    if (m < 1 || m > 12)
      throw std::invalid_argument("no-decay: m out of range [1,12]");
  if (gamma_exponent < 1 || gamma_exponent > 2)
    throw std::invalid_argument("no-decay: gamma exponent must be 1 or 2");

  Stopwatch clock;
  struct Cell {
    double mass = 0.0, err = 0.0, tail = 0.0;
    long evals = 0;
    bool ok = true;
  };
  std::vector<Cell> cells(m_list.size());

  parallel_for(static_cast<long>(m_list.size()), [&](long i) {
    int m = m_list[static_cast<std::size_t>(i)];
    double len = std::ldexp(1.0, -m);
    Atom a = atom_chirp(len);
    double half = 0.5 * len;
    // Interval of integration: from gamma * |I| outward.  gamma = |I|^-2
    // puts the lower edge at 2^m; the milder gamma = |I|^-1 starts at 1.
    double lo = std::ldexp(1.0, (gamma_exponent - 1) * m);
    double x_max = std::max(1000.0, std::ldexp(4.0, m));
    Cell& c = cells[static_cast<std::size_t>(i)];

    auto f = [&](double x) -> std::pair<double, double> {
      QuadResult info;
      std::complex<double> v = apply_chirp_T(a, x, spec, &info);
      if (!info.converged) c.ok = false;
      return {std::abs(v), info.err};
    };
    // |T a| has corner points near the transform zeros x = 2 pi 2^m k; give
    // the refinement panel edges there so the corners cannot hide inside a
    // panel and bias the two-level estimate.
    std::vector<double> knots = dyadic_knots(lo, x_max);
    for (double z = 2.0 * M_PI * std::ldexp(1.0, m); z < x_max;
         z += 2.0 * M_PI * std::ldexp(1.0, m))
      if (z > lo) knots.push_back(z);
    std::sort(knots.begin(), knots.end());
    AbsSimpson integ(f, 30);
    AbsIntegral r = integ.run(knots, 3e-4, 1e-8);
    // The profile is odd, so |T a(-x)| = |T a(x)|: integrate one side,
    // double.  The chirp profile has unit sup; an atom on an interval of
    // length 2^-m carries the normalization 2^m, applied here to the mass.
    double norm = std::ldexp(1.0, m);
    c.mass = norm * 2.0 * r.value;
    c.err = norm * 2.0 * (r.err + r.inner);
    c.evals = r.evals;
    c.ok = c.ok && r.converged;
    // Beyond x_max, integration by parts of the linear-phase form bounds
    // |T a(x)| by (2 max|g| + TV(g)) / (2x) with g(s) = a(s)/(x-s), which is
    // <= C / x^2 with C collecting the profile's sup, variation and the
    // kernel tilt.  Tail over both sides: 2C / x_max.
    double gm = 1.0 / (x_max - half);
    double tv = 3.0 * gm + 2.0 * half / (x_max * x_max);
    double cc = x_max * x_max * (2.0 * gm + tv) / (2.0 * x_max);
    c.tail = 2.0 * cc / x_max;
  });

  ExperimentResult res;
  res.name = "no-decay";
  res.param_name = "m";
  res.value_name = "mass";
  res.params = {{"m_list", join_ints(m_list)},
                {"gamma_exponent", std::to_string(gamma_exponent)}};
  double first = cells.front().mass;
  double mn = std::numeric_limits<double>::infinity();
  double tail_max = 0.0;
  long evals = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    res.rows.push_back({"mass", static_cast<double>(m_list[i]), c.mass,
                        c.err});
    mn = std::min(mn, c.mass);
    tail_max = std::max(tail_max, c.tail);
    evals += c.evals;
    res.converged = res.converged && c.ok;
  }
  res.metrics["mass_first"] = first;
  res.metrics["mass_min"] = mn;
  res.metrics["min_ratio"] = first > 0.0 ? mn / first : 0.0;
  res.metrics["tail_bound_max"] = tail_max;
  res.metrics["evals"] = static_cast<double>(evals);
  res.wall_time = clock.seconds();
  return res;
}

ExperimentResult run_necessity(int k0, int k1,
                               const std::vector<int>& eps_exponents,
                               NecessityMode mode, const QuadSpec& spec,
                               double eta) {
  if (k0 < 2 || k1 < 1)
    throw std::invalid_argument("necessity: need k0 >= 2 and k1 >= 1");
  if (eps_exponents.empty())
    throw std::invalid_argument("necessity: empty exponent list");
  if (!(eta > 0.0) || eta > 4.0)
    throw std::invalid_argument("necessity: eta must lie in (0, 4]");

  for (int e : eps_exponents)
    if (e < 1) throw std::invalid_argument("necessity: exponents must be >= 1");

  Stopwatch clock;
  struct Cell {
    double mass = 0.0, err = 0.0;
    std::vector<std::pair<double, double>> ratios;  // (abscissa, ratio)
    bool ok = true;
    bool empty = false;
  };
  std::vector<Cell> cells(eps_exponents.size());

  // Inner integral of the profile against the curved phase d (x2 - t)^k0,
  // constant term dropped (it only rotates the result).
  auto curved_inner = [&](double d, double x2,
                          QuadResult* info) -> std::complex<double> {
    Poly1 ph(static_cast<std::size_t>(k0) + 1, 0.0);
    double binom = 1.0;
    for (int j = 0; j <= k0; ++j) {
      if (j > 0) binom = binom * static_cast<double>(k0 - j + 1) / j;
      if (j == 0) continue;  // constant term
      double sign = (j % 2 == 0) ? 1.0 : -1.0;
      ph[static_cast<std::size_t>(j)] =
          d * binom * sign * std::pow(x2, static_cast<double>(k0 - j));
    }
    Amp1 amp = [](double t) {
      return std::complex<double>(signed_step(t), 0.0);
    };
    QuadResult r = integrate_osc_1d(amp, ph, -0.5, 0.5, spec, {0.0});
    if (info) *info = r;
    return r.value;
  };

  parallel_for(static_cast<long>(eps_exponents.size()), [&](long i) {
    int e = eps_exponents[static_cast<std::size_t>(i)];
    Cell& c = cells[static_cast<std::size_t>(i)];
    double cc = std::ldexp(1.0, -e);                 // coefficient on x1 x2^k1
    double dd = std::ldexp(1.0, -e * (k0 - 1));      // coefficient on x2^k0
    // Keep both transform arguments in the linear regime: |c x2^k1| <= eta
    // and |d x2^(k0-1)| <= eta.
    double cap_c = std::pow(eta / cc, 1.0 / k1);
    double cap_d = std::pow(eta / dd, 1.0 / (k0 - 1));
    double x2_max = std::min(cap_c, cap_d);
    if (x2_max <= 10.0 * (1.0 + 1e-9)) {
      c.empty = true;  // region below the inner cutoff, mass is zero
      return;
    }
    double ratio_dc = dd / cc;
    auto x1_hi = [&](double u) {
      return std::min(u, ratio_dc * std::pow(u, static_cast<double>(k0 - k1)));
    };
    auto f = [&](double u) -> std::pair<double, double> {
      double hi = x1_hi(u);
      if (hi <= 10.0) return {0.0, 0.0};
      double x1len = 2.0 * std::log(hi / 10.0);  // both x1 signs
      double bh = step_transform_mag(cc * std::pow(u, static_cast<double>(k1)));
      QuadResult info;
      double inner = std::abs(curved_inner(dd, u, &info));
      if (!info.converged) c.ok = false;
      // factor 2: both x2 signs give the same modulus
      double v = 2.0 / u * bh * inner * x1len;
      double ev = 2.0 / u * bh * info.err * x1len;
      return {v, ev};
    };
    AbsSimpson integ(f, 30);
    AbsIntegral r = integ.run(dyadic_knots(10.0, x2_max), 1e-4, 1e-12);
    c.mass = r.value;
    c.err = r.err + r.inner;
    c.ok = c.ok && r.converged;

    if (mode == NecessityMode::full_check) {
      // Sample the unreduced double integrand and compare with the reduced
      // form pointwise: the two factor integrals carry the kernel 1/(x - s)
      // that the reduction replaced by 1/x.
      double u_lo = 12.0;
      if (k0 - k1 > 0 && ratio_dc < 1.0) {
        double thresh = std::pow(10.0 / ratio_dc,
                                 1.0 / static_cast<double>(k0 - k1));
        u_lo = std::max(u_lo, 1.05 * thresh);
      }
      double u_hi = 0.95 * x2_max;
      if (u_lo < u_hi) {
        for (int s = 0; s < 4; ++s) {
          double u = u_lo * std::pow(u_hi / u_lo, s / 3.0);
          double hi = x1_hi(u);
          if (hi <= 10.0) continue;
          double x1 = std::sqrt(10.0 * hi);
          double xi = cc * std::pow(u, static_cast<double>(k1));
          Amp1 amp_a = [&](double t) {
            return std::complex<double>(signed_step(t) / (x1 - t), 0.0);
          };
          QuadResult ra =
              integrate_osc_1d(amp_a, Poly1{0.0, -xi}, -0.5, 0.5, spec, {0.0});
          Amp1 amp_b = [&](double t) {
            return std::complex<double>(signed_step(t) / (u - t), 0.0);
          };
          Poly1 ph(static_cast<std::size_t>(k0) + 1, 0.0);
          double binom = 1.0;
          for (int j = 0; j <= k0; ++j) {
            if (j > 0) binom = binom * static_cast<double>(k0 - j + 1) / j;
            if (j == 0) continue;
            double sg = (j % 2 == 0) ? 1.0 : -1.0;
            ph[static_cast<std::size_t>(j)] =
                dd * binom * sg * std::pow(u, static_cast<double>(k0 - j));
          }
          QuadResult rb = integrate_osc_1d(amp_b, ph, -0.5, 0.5, spec, {0.0});
          if (!ra.converged || !rb.converged) c.ok = false;
          double full = std::abs(ra.value) * std::abs(rb.value);
          QuadResult dummy;
          double reduced = step_transform_mag(xi) / x1 *
                           std::abs(curved_inner(dd, u, &dummy)) / u;
          if (reduced > 0.0) c.ratios.emplace_back(u, full / reduced);
        }
      }
    }
  });

  ExperimentResult res;
  res.name = "necessity";
  res.param_name = "eps_exponent";
  res.value_name = "J";
  res.params = {{"k0", std::to_string(k0)},
                {"k1", std::to_string(k1)},
                {"eps_exponents", join_ints(eps_exponents)},
                {"mode", mode == NecessityMode::reduced ? "reduced"
                                                        : "full-check"},
                {"eta", format_g17(eta)}};
  std::vector<double> xs, ys;
  double ratio_min = std::numeric_limits<double>::infinity();
  double ratio_max = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    double e = static_cast<double>(eps_exponents[i]);
    res.rows.push_back({"mass", e, c.mass, c.err});
    res.converged = res.converged && c.ok;
    if (!c.empty && c.mass > 0.0) {
      xs.push_back(e);
      ys.push_back(c.mass);
    }
  }
  for (const Cell& c : cells)
    for (const auto& [u, r] : c.ratios) {
      res.rows.push_back({"ratio", u, r, 0.0});
      ratio_min = std::min(ratio_min, r);
      ratio_max = std::max(ratio_max, r);
    }
  if (xs.size() >= 2) {
    LinFit f = fit_line(xs, ys);
    res.metrics["slope"] = f.slope;
    res.metrics["intercept"] = f.intercept;
    res.metrics["r2"] = f.r2;
  }
  if (ratio_max > 0.0) {
    res.metrics["ratio_min"] = ratio_min;
    res.metrics["ratio_max"] = ratio_max;
  }
  res.wall_time = clock.seconds();
  return res;
}

ExperimentResult run_ftb_checks(const QuadSpec& spec) {
  Stopwatch clock;
  ExperimentResult res;
  res.name = "ftb";
  res.params = {{"grid", "log"}};

  Amp1 step_amp = [](double s) {
    return std::complex<double>(signed_step(s), 0.0);
  };
  bool ok = true;
  long violations = 0;

  // quadrature against the closed form across six decades
  double max_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    double xi = std::pow(10.0, -3.0 + 6.0 * i / 99.0);
    QuadResult r =
        integrate_osc_1d(step_amp, Poly1{0.0, -xi}, -0.5, 0.5, spec, {0.0});
    ok = ok && r.converged;
    double err = std::abs(r.value - step_transform(xi));
    max_err = std::max(max_err, err);
    res.rows.push_back({"closed_form_err", xi, err, r.err});
  }
  res.metrics["closed_form_max_err"] = max_err;

  // linear lower bound near zero, constant fit from quadrature values only
  double c1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 40; ++i) {
    double xi = std::pow(10.0, -4.0 + 3.0 * i / 39.0);
    QuadResult r =
        integrate_osc_1d(step_amp, Poly1{0.0, -xi}, -0.5, 0.5, spec, {0.0});
    ok = ok && r.converged;
    double ratio = std::abs(r.value) / xi;
    if (ratio <= 0.0) ++violations;
    c1 = std::min(c1, ratio);
    res.rows.push_back({"linear_lower", xi, ratio, r.err / xi});
  }
  res.metrics["c1"] = c1;

  // same lower bound for the curved phases d (x2 - t)^k0, measured against
  // the effective frequency k0 d x2^(k0-1)
  double c2 = std::numeric_limits<double>::infinity();
  const double dx_grid[] = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  const double x2_grid[] = {10.0, 30.0, 100.0};
  for (int k0 = 2; k0 <= 4; ++k0) {
    double ck = std::numeric_limits<double>::infinity();
    std::string series = "curved_lower_k" + std::to_string(k0);
    for (double dx : dx_grid)
      for (double x2 : x2_grid) {
        double d = dx / std::pow(x2, static_cast<double>(k0 - 1));
        Poly1 ph(static_cast<std::size_t>(k0) + 1, 0.0);
        double binom = 1.0;
        for (int j = 0; j <= k0; ++j) {
          if (j > 0) binom = binom * static_cast<double>(k0 - j + 1) / j;
          if (j == 0) continue;
          double sg = (j % 2 == 0) ? 1.0 : -1.0;
          ph[static_cast<std::size_t>(j)] =
              d * binom * sg * std::pow(x2, static_cast<double>(k0 - j));
        }
        QuadResult r = integrate_osc_1d(step_amp, ph, -0.5, 0.5, spec, {0.0});
        ok = ok && r.converged;
        double freq = static_cast<double>(k0) * dx;
        double ratio = std::abs(r.value) / freq;
        if (ratio <= 0.0) ++violations;
        ck = std::min(ck, ratio);
        res.rows.push_back({series, dx, ratio, r.err / freq});
      }
    res.metrics["c2_k" + std::to_string(k0)] = ck;
    c2 = std::min(c2, ck);
  }
  res.metrics["c2"] = c2;
  res.metrics["violations"] = static_cast<double>(violations);
  res.converged = ok;
  res.wall_time = clock.seconds();
  return res;
}

ExperimentResult run_sufficiency_sweep(const SupportSet& delta, double gamma,
                                       int trials, double coeff_log2_lo,
                                       double coeff_log2_hi, int q_max,
                                       std::uint64_t seed,
                                       const QuadSpec& spec) {
  if (!check_h1_uniform(delta))
    throw std::invalid_argument(
        "sufficiency sweep: the support set fails the uniformity predicates "
        "(a pure linear term or an occupied 0/1 slice pair), so the outside "
        "mass has no reason to stay bounded; refusing to run");
  if (!(gamma >= 2.0))
    throw std::invalid_argument("sufficiency sweep: gamma must be >= 2");
  if (trials < 1)
    throw std::invalid_argument("sufficiency sweep: need at least one trial");
  if (coeff_log2_lo > coeff_log2_hi)
    throw std::invalid_argument("sufficiency sweep: empty coefficient range");
  int q_lo = q_min_for(gamma);
  if (q_max < q_lo)
    throw std::invalid_argument(
        "sufficiency sweep: q_max below the smallest admissible coarse scale");

  Stopwatch clock;
  TruncationSet candidates;
  for (int q = q_lo; q <= q_max; ++q)
    for (int p = -q_max; p <= q; ++p) candidates.push_back({p, q});

  struct Trial {
    double l1 = 0.0, err = 0.0, clog = 0.0;
    double fsize = 0.0;
    bool ok = true;
  };
  std::vector<Trial> ts(static_cast<std::size_t>(trials));

  parallel_for(trials, [&](long t) {
    Stopwatch tick;
    Trial& tr = ts[static_cast<std::size_t>(t)];
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(t)));
    Poly2 P = random_poly(delta, coeff_log2_lo, coeff_log2_hi, rng.next_u64());
    std::size_t want =
        1 + static_cast<std::size_t>(rng.next_index(
                std::min<std::uint64_t>(12, candidates.size())));
    std::set<std::uint64_t> picks;
    while (picks.size() < want) picks.insert(rng.next_index(candidates.size()));
    TruncationSet F;
    for (std::uint64_t idx : picks)
      F.push_back(candidates[static_cast<std::size_t>(idx)]);
    Atom a = rng.next_index(2) == 0
                 ? atom_signed_square()
                 : atom_random_tensor(rng.next_u64(),
                                      1 + static_cast<int>(rng.next_index(4)));
    double R = std::ldexp(1.0, q_max + 2);
    OutsideL1 out = l1_outside(P, F, a, gamma, R, spec);
    tr.l1 = out.value;
    tr.err = out.err;
    tr.ok = out.converged;
    tr.fsize = static_cast<double>(F.size());
    double s = 0.0;
    for (const auto& [idx, c] : P.terms()) s += std::log2(std::fabs(c));
    tr.clog = s / static_cast<double>(P.terms().size());
    tracef("sufficiency trial %ld: l1 %.4g, |F| %zu, cells %ld, evals %ld, "
           "%.1f s%s",
           t, tr.l1, F.size(), out.outer_cells, out.evals, tick.seconds(),
           tr.ok ? "" : " [unconverged]");
  });

  ExperimentResult res;
  res.name = "sufficiency";
  res.param_name = "trial";
  res.seed = seed;
  res.params = {{"gamma", format_g17(gamma)},
                {"trials", std::to_string(trials)},
                {"coeff_log2_lo", format_g17(coeff_log2_lo)},
                {"coeff_log2_hi", format_g17(coeff_log2_hi)},
                {"q_max", std::to_string(q_max)},
                {"delta_size", std::to_string(delta.size())}};
  std::vector<double> l1s, clogs;
  long bad = 0;
  for (std::size_t t = 0; t < ts.size(); ++t) {
    const Trial& tr = ts[t];
    res.rows.push_back({"l1", static_cast<double>(t), tr.l1, tr.err});
    l1s.push_back(tr.l1);
    clogs.push_back(tr.clog);
    if (!tr.ok) ++bad;
    res.converged = res.converged && tr.ok;
  }
  for (std::size_t t = 0; t < ts.size(); ++t)
    res.rows.push_back({"coeff_log2", static_cast<double>(t), ts[t].clog, 0.0});
  for (std::size_t t = 0; t < ts.size(); ++t)
    res.rows.push_back({"f_size", static_cast<double>(t), ts[t].fsize, 0.0});
  double mx = *std::max_element(l1s.begin(), l1s.end());
  double med = median_of(l1s);
  res.metrics["l1_max"] = mx;
  res.metrics["l1_median"] = med;
  res.metrics["max_over_median"] =
      med > 0.0 ? mx / med : std::numeric_limits<double>::infinity();
  res.metrics["spearman_abs"] =
      trials >= 2 ? std::fabs(spearman_rho(l1s, clogs)) : 0.0;
  res.metrics["unconverged"] = static_cast<double>(bad);
  res.wall_time = clock.seconds();
  return res;
}

ExperimentResult run_contrast_sweep(double gamma, int trials,
                                    const std::vector<int>& eps_exponents,
                                    std::uint64_t seed, const QuadSpec& spec) {
  if (!(gamma >= 2.0))
    throw std::invalid_argument("contrast sweep: gamma must be >= 2");
  if (trials < 1)
    throw std::invalid_argument("contrast sweep: need at least one trial");
  if (eps_exponents.empty())
    throw std::invalid_argument("contrast sweep: empty exponent list");
  int q_lo = q_min_for(gamma);
  for (int e : eps_exponents)
    if (e + 1 < q_lo)
      throw std::invalid_argument(
          "contrast sweep: exponent too small, truncation window is empty");

  SupportSet delta{{1, 2}, {0, 4}};

  Stopwatch clock;
  struct Cell {
    double mass = 0.0, err = 0.0;
    bool ok = true;
  };
  std::vector<Cell> cells(eps_exponents.size());

  parallel_for(static_cast<long>(eps_exponents.size()), [&](long i) {
    int e = eps_exponents[static_cast<std::size_t>(i)];
    Cell& c = cells[static_cast<std::size_t>(i)];
    Poly2 P;
    P.set({1, 2}, std::ldexp(1.0, -2 * e));
    P.set({0, 4}, std::ldexp(1.0, -3 * e));
    TruncationSet F;
    for (int q = q_lo; q <= e + 1; ++q)
      for (int p = -(e + 1); p <= q; ++p) F.push_back({p, q});
    double R = std::ldexp(1.0, e + 3);
    double sum = 0.0, errs = 0.0;
    for (int t = 0; t < trials; ++t) {
      Atom a = t == 0 ? atom_signed_square()
                      : atom_random_tensor(
                            Rng::derive(seed, static_cast<std::uint64_t>(
                                                  i * 1000 + t)),
                            2);
      OutsideL1 out = l1_outside(P, F, a, gamma, R, spec);
      sum += out.value;
      errs += out.err;
      c.ok = c.ok && out.converged;
    }
    c.mass = sum / trials;
    c.err = errs / trials;
    tracef("contrast e=%d: mass %.4g%s", e, c.mass,
           c.ok ? "" : " [unconverged]");
  });

  ExperimentResult res;
  res.name = "contrast";
  res.param_name = "eps_exponent";
  res.value_name = "mass";
  res.seed = seed;
  res.params = {{"gamma", format_g17(gamma)},
                {"trials", std::to_string(trials)},
                {"eps_exponents", join_ints(eps_exponents)}};
  res.metrics["ricci_stein"] = check_ricci_stein(delta) ? 1.0 : 0.0;
  res.metrics["h1_uniform"] = check_h1_uniform(delta) ? 1.0 : 0.0;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    res.rows.push_back({"mass", static_cast<double>(eps_exponents[i]),
                        cells[i].mass, cells[i].err});
    res.converged = res.converged && cells[i].ok;
    xs.push_back(static_cast<double>(eps_exponents[i]));
    ys.push_back(cells[i].mass);
  }
  if (xs.size() >= 2) {
    LinFit f = fit_line(xs, ys);
    res.metrics["slope"] = f.slope;
    res.metrics["r2"] = f.r2;
    res.metrics["last_over_first"] =
        ys.front() > 0.0 ? ys.back() / ys.front()
                         : std::numeric_limits<double>::infinity();
  }
  res.wall_time = clock.seconds();
  return res;
}

ExperimentResult run_l2_decay(const SupportSet& delta, MultiIndex alpha_star,
                              const std::vector<ScalePair>& pq_grid,
                              const std::vector<int>& coeff_exponents,
                              int grid_n, const QuadSpec& spec) {
  if (!delta.contains(alpha_star))
    throw std::invalid_argument("l2 decay: alpha_star must belong to delta");
  if (pq_grid.empty() || coeff_exponents.empty())
    throw std::invalid_argument("l2 decay: empty sweep grid");
  if (!truncation_ordered(pq_grid))
    throw std::invalid_argument("l2 decay: scale pairs must have p <= q");

  Stopwatch clock;
  struct Cell {
    double power = 0.0, ratio = 0.0, schur = 0.0;
    bool ok = true;
  };
  std::size_t nc = coeff_exponents.size();
  std::vector<Cell> cells(pq_grid.size() * nc);

  parallel_for(static_cast<long>(cells.size()), [&](long job) {
    std::size_t ip = static_cast<std::size_t>(job) / nc;
    std::size_t ic = static_cast<std::size_t>(job) % nc;
    ScalePair pq = pq_grid[ip];
    Poly2 P;
    P.set(alpha_star, std::ldexp(1.0, coeff_exponents[ic]));
    Cell& c = cells[static_cast<std::size_t>(job)];
    PowerResult pw = power_iteration_l2(P, pq.p, pq.q, grid_n, 40, spec);
    c.power = pw.norm;
    c.ratio = pw.ratio;
    c.ok = pw.converged;
    c.schur = schur_l2_bound(P, pq.p, pq.q, 16, spec);
    tracef("l2 decay p=%d q=%d 2^%d: power %.4g, schur %.4g%s", pq.p, pq.q,
           coeff_exponents[ic], c.power, c.schur,
           c.ok ? "" : " [unconverged]");
  });

  ExperimentResult res;
  res.name = "l2-decay";
  res.param_name = "coeff_exponent";
  res.value_name = "norm";
  res.params = {{"alpha_star", std::to_string(alpha_star.j) + "," +
                                   std::to_string(alpha_star.k)},
                {"pq_grid", join_pairs(pq_grid)},
                {"coeff_exponents", join_ints(coeff_exponents)},
                {"grid_n", std::to_string(grid_n)}};

  bool single = pq_grid.size() == 1;
  double worst_step = 0.0, worst_ps = 0.0;
  std::vector<double> fit_x, fit_y;
  for (std::size_t ip = 0; ip < pq_grid.size(); ++ip) {
    ScalePair pq = pq_grid[ip];
    std::string tag = single ? ""
                             : "_p" + std::to_string(pq.p) + "q" +
                                   std::to_string(pq.q);
    double prev = -1.0;
    for (std::size_t ic = 0; ic < nc; ++ic) {
      const Cell& c = cells[ip * nc + ic];
      double ce = static_cast<double>(coeff_exponents[ic]);
      res.rows.push_back({"power" + tag, ce, c.power, c.power * c.ratio});
      res.converged = res.converged && c.ok;
      if (c.schur > 0.0) worst_ps = std::max(worst_ps, c.power / c.schur);
      if (prev > 0.0) worst_step = std::max(worst_step, c.power / prev);
      prev = c.power;
      // scale-normalized coefficient: the phase size that the single piece
      // actually sees at scale (p, q)
      double lam = std::ldexp(1.0, coeff_exponents[ic] + pq.p * alpha_star.j +
                                       pq.q * alpha_star.k);
      if (lam >= 8.0 && c.power > 0.0) {
        fit_x.push_back(std::log(lam));
        fit_y.push_back(std::log(c.power));
      }
    }
    for (std::size_t ic = 0; ic < nc; ++ic) {
      const Cell& c = cells[ip * nc + ic];
      res.rows.push_back(
          {"schur" + tag, static_cast<double>(coeff_exponents[ic]), c.schur,
           0.0});
    }
  }
  res.metrics["max_step_ratio"] = worst_step;
  res.metrics["max_power_over_schur"] = worst_ps;
  if (fit_x.size() >= 2) {
    LinFit f = fit_line(fit_x, fit_y);
    res.metrics["delta_fit"] = -f.slope;
    res.metrics["delta_r2"] = f.r2;
  }
  res.wall_time = clock.seconds();
  return res;
}

ExperimentResult run_lemma_suite(const QuadSpec& spec) {
  Stopwatch clock;
  ExperimentResult res;
  res.name = "lemmas";
  res.seed = 1789;
  res.params = {{"seminorm_draws", "10000"},
                {"scale_sum_draws", "30"},
                {"vdc_exponents", "0..16"}};

  // coefficient seminorm over the unit l1 sphere of the flagship support
  {
    SupportSet delta{{1, 2}, {0, 4}};
    const int batches = 100, per_batch = 100;
    std::vector<double> mins(batches,
                             std::numeric_limits<double>::infinity());
    parallel_for(batches, [&](long b) {
      Rng rng(Rng::derive(1789, static_cast<std::uint64_t>(b)));
      double mn = std::numeric_limits<double>::infinity();
      for (int d = 0; d < per_batch; ++d) {
        double g1 = rng.next_normal(), g2 = rng.next_normal();
        double s = std::fabs(g1) + std::fabs(g2);
        if (s == 0.0) continue;
        Poly2 Q;
        Q.set({1, 2}, g1 / s);
        Q.set({0, 4}, g2 / s);
        mn = std::min(mn, triple_norm(Q, delta, 10.0, 64));
      }
      mins[static_cast<std::size_t>(b)] = mn;
    });
    double overall = std::numeric_limits<double>::infinity();
    for (int b = 0; b < batches; ++b) {
      res.rows.push_back({"seminorm_min", static_cast<double>(b), mins[b],
                          0.0});
      overall = std::min(overall, mins[b]);
    }
    res.metrics["seminorm_min"] = overall;
  }

  // saturation of the single-scale sums as the window grows
  {
    const int window[] = {8, 16, 32, 64};
    double sat_max = 0.0;
    bool ok = true;
    for (int deg = 2; deg <= 4; ++deg) {
      // one family of phases per degree, reused for every window size
      const int draws = 30;
      std::vector<std::vector<double>> mag(
          4, std::vector<double>(draws, 0.0));
      std::vector<std::vector<double>> mage(
          4, std::vector<double>(draws, 0.0));
      std::vector<char> draw_ok(draws, 1);
      parallel_for(draws, [&](long dr) {
        Rng rng(Rng::derive(1889, static_cast<std::uint64_t>(deg * 100 + dr)));
        Poly1 ph(static_cast<std::size_t>(deg) + 1, 0.0);
        for (int j = 1; j <= deg; ++j)
          ph[static_cast<std::size_t>(j)] =
              rng.next_sign() * std::exp2(rng.next_uniform(-2.0, 2.0));
        // per-scale terms once, then nested partial sums
        std::vector<std::complex<double>> term(64);
        std::vector<double> terr(64);
        for (int p = -32; p < 32; ++p) {
          QuadResult r = ul2_sum(ph, {p}, spec);
          term[static_cast<std::size_t>(p + 32)] = r.value;
          terr[static_cast<std::size_t>(p + 32)] = r.err;
          if (!r.converged) draw_ok[static_cast<std::size_t>(dr)] = 0;
        }
        for (int w = 0; w < 4; ++w) {
          int half = window[w] / 2;
          std::complex<double> sum{0.0, 0.0};
          double esum = 0.0;
          for (int p = -half; p < half; ++p) {
            sum += term[static_cast<std::size_t>(p + 32)];
            esum += terr[static_cast<std::size_t>(p + 32)];
          }
          mag[w][static_cast<std::size_t>(dr)] = std::abs(sum);
          mage[w][static_cast<std::size_t>(dr)] = esum;
        }
      });
      double vals[4] = {0, 0, 0, 0};
      double errs[4] = {0, 0, 0, 0};
      for (int w = 0; w < 4; ++w) {
        for (int dr = 0; dr < draws; ++dr) {
          if (mag[w][static_cast<std::size_t>(dr)] > vals[w]) {
            vals[w] = mag[w][static_cast<std::size_t>(dr)];
            errs[w] = mage[w][static_cast<std::size_t>(dr)];
          }
          ok = ok && draw_ok[static_cast<std::size_t>(dr)] != 0;
        }
        res.rows.push_back({"scale_sum_deg" + std::to_string(deg),
                            static_cast<double>(window[w]), vals[w], errs[w]});
      }
      double ref = vals[3];
      if (ref > 0.0)
        for (int w = 1; w < 3; ++w)
          sat_max = std::max(sat_max, std::fabs(vals[w] - ref) / ref);
    }
    res.metrics["scale_sat_max"] = sat_max;
    res.converged = res.converged && ok;
  }

  // stationary-phase envelope for the flagship phase at growing modulation
  {
    SupportSet dset{{1, 2}, {0, 4}};
    Amp2 amp = [](double t1, double t2) {
      return std::complex<double>(
          smooth_bump(t1, 0.5, 1.0) * smooth_bump(t2, 0.5, 1.0), 0.0);
    };
    Rect box{-1.0, 1.0, -1.0, 1.0};
    const int jmax = 16;
    std::vector<VdcProbe> probes(jmax + 1);
    parallel_for(jmax + 1, [&](long j) {
      double lam = std::ldexp(1.0, static_cast<int>(j));
      Poly2 Q;
      Q.set({1, 2}, lam);
      Q.set({0, 4}, lam);
      // the (1,2) mixed partial of Q is the constant 2 lam (the x2^4 term
      // carries no x1), so the derivative bound holds on the whole box
      probes[static_cast<std::size_t>(j)] =
          vdc_probe(Q, dset, amp, box, 2.0 * lam, MultiIndex{1, 2}, spec);
    });
    bool ok = true;
    for (int j = 0; j <= jmax; ++j) {
      const VdcProbe& p = probes[static_cast<std::size_t>(j)];
      res.rows.push_back({"vdc", static_cast<double>(j), p.integral_mag, 0.0});
      res.rows.push_back(
          {"vdc_env", static_cast<double>(j), p.envelope, 0.0});
      ok = ok && p.converged;
    }
    res.metrics["vdc_delta"] = probes[0].delta;
    res.metrics["vdc_first"] = probes[0].integral_mag;
    res.metrics["vdc_last"] = probes[jmax].integral_mag;
    res.metrics["vdc_endpoint_ratio"] =
        probes[0].integral_mag > 0.0
            ? probes[jmax].integral_mag / probes[0].integral_mag
            : std::numeric_limits<double>::infinity();
    res.converged = res.converged && ok;
  }

  res.wall_time = clock.seconds();
  return res;
}

}  // namespace oscint
