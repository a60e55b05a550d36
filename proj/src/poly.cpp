#include "oscint/poly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "oscint/rng.hpp"

namespace oscint {

namespace {

void reject_constant(MultiIndex a, const char* what) {
  if (a.j == 0 && a.k == 0)
    throw std::invalid_argument(
        std::string(what) +
        ": (0,0) is not allowed, constant terms are normalized away");
  if (a.j < 0 || a.k < 0)
    throw std::invalid_argument(std::string(what) + ": negative exponent");
}

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

// Falling factorial j * (j-1) * ... * (j-a+1).
double falling(int j, int a) {
  double r = 1.0;
  for (int i = 0; i < a; ++i) r *= static_cast<double>(j - i);
  return r;
}

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / i;
  return r;
}

}  // namespace

SupportSet::SupportSet(std::initializer_list<MultiIndex> idx) {
  for (auto a : idx) insert(a);
}

void SupportSet::insert(MultiIndex a) {
  reject_constant(a, "SupportSet::insert");
  idx_.insert(a);
}

void Poly2::set(MultiIndex a, double c) {
  reject_constant(a, "Poly2::set");
  if (c == 0.0)
    terms_.erase(a);
  else
    terms_[a] = c;
}

double Poly2::coeff(MultiIndex a) const {
  auto it = terms_.find(a);
  return it == terms_.end() ? 0.0 : it->second;
}

SupportSet Poly2::support() const {
  SupportSet s;
  for (const auto& [a, c] : terms_) s.insert(a);
  return s;
}

Poly2 Poly2::operator+(const Poly2& o) const {
  Poly2 r = *this;
  for (const auto& [a, c] : o.terms_) r.set(a, r.coeff(a) + c);
  r.constant_ += o.constant_;
  return r;
}

Poly2 Poly2::operator-(const Poly2& o) const {
  Poly2 r = *this;
  for (const auto& [a, c] : o.terms_) r.set(a, r.coeff(a) - c);
  r.constant_ -= o.constant_;
  return r;
}

Poly2 Poly2::operator*(double s) const {
  Poly2 r;
  if (s == 0.0) return r;
  for (const auto& [a, c] : terms_) r.set(a, c * s);
  r.constant_ = constant_ * s;
  return r;
}

Poly2 Poly2::shifted(double h1, double h2) const {
  Poly2 r;
  r.constant_ = constant_;
  for (const auto& [a, c] : terms_) {
    for (int u = 0; u <= a.j; ++u) {
      for (int v = 0; v <= a.k; ++v) {
        double w = c * binom(a.j, u) * ipow(h1, a.j - u) * binom(a.k, v) *
                   ipow(h2, a.k - v);
        if (u == 0 && v == 0)
          r.constant_ += w;
        else {
          MultiIndex b{u, v};
          r.set(b, r.coeff(b) + w);
        }
      }
    }
  }
  return r;
}

double Poly2::eval(double x1, double x2) const {
  // Neumaier-compensated sum over terms.
  double s = constant_, comp = 0.0;
  for (const auto& [a, c] : terms_) {
    double t = c * ipow(x1, a.j) * ipow(x2, a.k);
    double u = s + t;
    if (std::fabs(s) >= std::fabs(t))
      comp += (s - u) + t;
    else
      comp += (t - u) + s;
    s = u;
  }
  return s + comp;
}

Poly2 Poly2::partial(MultiIndex a) const {
  if (a.j < 0 || a.k < 0)
    throw std::invalid_argument("Poly2::partial: negative order");
  if (a.j == 0 && a.k == 0) return *this;
  Poly2 r;
  for (const auto& [b, c] : terms_) {
    if (b.j < a.j || b.k < a.k) continue;
    MultiIndex d{b.j - a.j, b.k - a.k};
    double nc = c * falling(b.j, a.j) * falling(b.k, a.k);
    if (d.j == 0 && d.k == 0)
      r.constant_ += nc;
    else
      r.set(d, r.coeff(d) + nc);
  }
  return r;
}

double Poly2::norm1() const {
  double s = std::fabs(constant_);
  for (const auto& [a, c] : terms_) s += std::fabs(c);
  return s;
}

std::set<int> rows(const SupportSet& s, int j) {
  std::set<int> r;
  for (auto a : s)
    if (a.j == j) r.insert(a.k);
  return r;
}

std::set<int> cols(const SupportSet& s, int k) {
  std::set<int> r;
  for (auto a : s)
    if (a.k == k) r.insert(a.j);
  return r;
}

bool check_condition_a(const SupportSet& s) {
  return !s.contains({1, 0}) && !s.contains({0, 1});
}

bool check_condition_b(const SupportSet& s) {
  std::size_t r0 = rows(s, 0).size(), r1 = rows(s, 1).size();
  std::size_t c0 = cols(s, 0).size(), c1 = cols(s, 1).size();
  return r0 * r1 + c0 * c1 == 0;
}

bool check_h1_uniform(const SupportSet& s) {
  return check_condition_a(s) && check_condition_b(s);
}

bool check_ricci_stein(const SupportSet& s) {
  for (auto a : s)
    if ((a.j * a.k) % 2 != 0) return false;
  return true;
}

bool check_corollary(const SupportSet& s) {
  return check_ricci_stein(s) && check_h1_uniform(s);
}

double triple_norm(const Poly2& p, const SupportSet& delta, double C0,
                   int grid_n) {
  if (delta.empty())
    throw std::invalid_argument("triple_norm: support set empty");
  if (grid_n < 2) throw std::invalid_argument("triple_norm: grid_n < 2");

  double best_max = 0.0;
  for (auto a : delta) {
    Poly2 d = p.partial(a);
    // Grid scan for the box minimum of |d|.
    double h = 2.0 * C0 / (grid_n - 1);
    double min_v = std::fabs(d.eval(-C0, -C0));
    double min_x = -C0, min_y = -C0;
    for (int i = 0; i < grid_n; ++i) {
      double x = -C0 + h * i;
      for (int l = 0; l < grid_n; ++l) {
        double y = -C0 + h * l;
        double v = std::fabs(d.eval(x, y));
        if (v < min_v) {
          min_v = v;
          min_x = x;
          min_y = y;
        }
      }
    }
    // Compass descent from the best grid point, step halved on failure.
    double step = h;
    double cx = min_x, cy = min_y;
    while (step > 1e-10 * C0) {
      bool moved = false;
      const double dx[4] = {step, -step, 0.0, 0.0};
      const double dy[4] = {0.0, 0.0, step, -step};
      for (int t = 0; t < 4; ++t) {
        double nx = std::clamp(cx + dx[t], -C0, C0);
        double ny = std::clamp(cy + dy[t], -C0, C0);
        double v = std::fabs(d.eval(nx, ny));
        if (v < min_v) {
          min_v = v;
          cx = nx;
          cy = ny;
          moved = true;
        }
      }
      if (!moved) step *= 0.5;
    }
    if (min_v > best_max) best_max = min_v;
  }
  return best_max;
}

Poly2 random_poly(const SupportSet& delta, double coeff_log2_lo,
                  double coeff_log2_hi, std::uint64_t seed) {
  if (coeff_log2_lo > coeff_log2_hi)
    throw std::invalid_argument("random_poly: empty coefficient range");
  Rng rng(seed);
  Poly2 p;
  for (auto a : delta) {
    double u = rng.next_uniform(coeff_log2_lo, coeff_log2_hi);
    double c = rng.next_sign() * std::exp2(u);
    p.set(a, c);
  }
  return p;
}

nlohmann::json poly_to_json(const Poly2& p) {
  if (p.constant() != 0.0)
    throw std::invalid_argument(
        "poly_to_json: only origin-vanishing polynomials serialize");
  nlohmann::json coeffs = nlohmann::json::array();
  for (const auto& [a, c] : p.terms())
    coeffs.push_back({{"j", a.j}, {"k", a.k}, {"c", c}});
  return {{"coeffs", coeffs}};
}

Poly2 poly_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1 || !j.contains("coeffs"))
    throw std::invalid_argument(
        "polynomial JSON must be exactly {\"coeffs\": [...]}");
  Poly2 p;
  for (const auto& t : j.at("coeffs")) {
    if (!t.is_object() || t.size() != 3 || !t.contains("j") ||
        !t.contains("k") || !t.contains("c"))
      throw std::invalid_argument(
          "polynomial term must be exactly {\"j\":, \"k\":, \"c\":}");
    MultiIndex a{t.at("j").get<int>(), t.at("k").get<int>()};
    reject_constant(a, "poly_from_json");
    if (p.coeff(a) != 0.0)
      throw std::invalid_argument("duplicate exponent pair in polynomial");
    p.set(a, t.at("c").get<double>());
  }
  return p;
}

nlohmann::json support_to_json(const SupportSet& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (auto a : s) arr.push_back({a.j, a.k});
  return arr;
}

SupportSet support_from_json(const nlohmann::json& j) {
  if (!j.is_array())
    throw std::invalid_argument("support set JSON must be an array of [j,k]");
  SupportSet s;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2)
      throw std::invalid_argument("support entry must be [j, k]");
    MultiIndex a{e.at(0).get<int>(), e.at(1).get<int>()};
    if (s.contains(a))
      throw std::invalid_argument("duplicate exponent pair in support set");
    s.insert(a);
  }
  return s;
}

SupportSet support_from_inline(const std::string& text) {
  SupportSet s;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(';', pos);
    if (end == std::string::npos) end = text.size();
    std::string frag = text.substr(pos, end - pos);
    int j, k;
    char tail;
    int got = std::sscanf(frag.c_str(), " %d , %d %c", &j, &k, &tail);
    if (got != 2)
      throw std::invalid_argument("bad support fragment '" + frag +
                                  "' at offset " + std::to_string(pos) +
                                  ", expected 'j,k'");
    s.insert({j, k});
    pos = end + 1;
  }
  if (s.empty())
    throw std::invalid_argument("empty support list");
  return s;
}

}  // namespace oscint
