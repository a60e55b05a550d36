#pragma once

// Bivariate real polynomials with no constant term, their monomial support
// sets, and the combinatorial boundedness predicates on those sets.
//
// A support set lists exponent pairs (j, k) of the monomials x1^j x2^k that
// a polynomial family is allowed to use.  The predicates classify a support
// set by two independent mechanisms:
//
//   * condition A: neither (1, 0) nor (0, 1) is present, i.e. no pure linear
//     term in either variable survives;
//   * condition B: the set of row slices through j = 0 and j = 1 (and dually
//     the column slices through k = 0 and k = 1) cannot both be occupied:
//     |rows(0)|*|rows(1)| + |cols(0)|*|cols(1)| must vanish.
//
// check_h1_uniform = A and B.  check_ricci_stein asks instead that every
// exponent pair has an even product j*k.  check_corollary is the
// conjunction of all of the above.  Constant terms are normalized away:
// (0, 0) is never a member of a support set, callers must strip it.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace oscint {

struct MultiIndex {
  int j = 0;
  int k = 0;

  int order() const { return j + k; }
  auto operator<=>(const MultiIndex&) const = default;
};

// Sorted set of exponent pairs; (0, 0) is rejected on insertion.
class SupportSet {
 public:
  SupportSet() = default;
  explicit SupportSet(std::initializer_list<MultiIndex> idx);

  void insert(MultiIndex a);
  bool contains(MultiIndex a) const { return idx_.count(a) > 0; }
  bool empty() const { return idx_.empty(); }
  std::size_t size() const { return idx_.size(); }

  auto begin() const { return idx_.begin(); }
  auto end() const { return idx_.end(); }

  bool operator==(const SupportSet&) const = default;

 private:
  std::set<MultiIndex> idx_;
};

// Polynomial with real coefficients indexed by exponent pairs.  Zero
// coefficients are never stored and (0, 0) is rejected from the term map:
// phase polynomials vanish at the origin.  Calculus operations (partial,
// shifted) can still produce a constant part; it lives in a dedicated slot
// so the term-map invariant holds throughout.
class Poly2 {
 public:
  Poly2() = default;

  // Sets the coefficient of x1^j x2^k; c == 0 erases the term.
  void set(MultiIndex a, double c);
  double coeff(MultiIndex a) const;

  void set_constant(double c) { constant_ = c; }
  double constant() const { return constant_; }

  const std::map<MultiIndex, double>& terms() const { return terms_; }
  bool zero() const { return terms_.empty() && constant_ == 0.0; }
  SupportSet support() const;

  Poly2 operator+(const Poly2& o) const;
  Poly2 operator-(const Poly2& o) const;
  Poly2 operator*(double s) const;

  // Substitutes x -> x + h exactly (binomial expansion).
  Poly2 shifted(double h1, double h2) const;

  // Value at (x1, x2), compensated summation over terms.
  double eval(double x1, double x2) const;

  // Exact partial derivative of order a.j in x1 and a.k in x2.
  Poly2 partial(MultiIndex a) const;

  // Sum of absolute coefficient values (constant slot included).
  double norm1() const;

 private:
  std::map<MultiIndex, double> terms_;
  double constant_ = 0.0;
};

// Row slice {k : (j, k) in S} and column slice {j : (j, k) in S}.
std::set<int> rows(const SupportSet& s, int j);
std::set<int> cols(const SupportSet& s, int k);

bool check_condition_a(const SupportSet& s);
bool check_condition_b(const SupportSet& s);
bool check_h1_uniform(const SupportSet& s);
bool check_ricci_stein(const SupportSet& s);
bool check_corollary(const SupportSet& s);

// max over a in delta of the box minimum of |partial(P, a)| on
// [-C0, C0]^2.  The minimum is located on a grid_n x grid_n scan and then
// refined by a local compass descent from the best grid point.
// Throws std::invalid_argument if delta is empty.
double triple_norm(const Poly2& p, const SupportSet& delta, double C0,
                   int grid_n);

// Random polynomial supported exactly on delta with coefficients of
// magnitude 2^u, u uniform in [coeff_log2_lo, coeff_log2_hi], random sign.
// Deterministic in seed; terms are drawn in sorted support order.
Poly2 random_poly(const SupportSet& delta, double coeff_log2_lo,
                  double coeff_log2_hi, std::uint64_t seed);

// JSON forms: polynomial as {"coeffs": [{"j":, "k":, "c":}, ...]} sorted by
// (j, k); support set as sorted [[j, k], ...].  Parsing is strict: unknown
// keys, duplicate exponent pairs and (0, 0) entries are errors.
nlohmann::json poly_to_json(const Poly2& p);
Poly2 poly_from_json(const nlohmann::json& j);
nlohmann::json support_to_json(const SupportSet& s);
SupportSet support_from_json(const nlohmann::json& j);

// Parses the inline CLI form "j,k;j,k;..." (e.g. "1,2;0,4").
// Throws std::invalid_argument with the offending fragment on bad input.
SupportSet support_from_inline(const std::string& text);

}  // namespace oscint
