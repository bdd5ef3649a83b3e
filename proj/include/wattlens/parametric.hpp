#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wattlens/hir.hpp"

namespace wattlens::parametric {

using Rational = boost::multiprecision::cpp_rational;

// (variable, exponent) pairs sorted by variable name; exponents are >= 1.
using Monomial = std::vector<std::pair<std::string, int>>;

int degree(const Monomial& m);

// Graded lexicographic order: higher total degree first, ties broken by
// the exponent of the alphabetically first variable where they differ.
struct GradedLex {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(Rational c);  // constants convert implicitly
  static Polynomial variable(const std::string& name);

  const std::map<Monomial, Rational, GradedLex>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  Rational constant_term() const;
  int degree() const;
  int degree_in(const std::string& var) const;
  std::vector<std::string> variables() const;

  // Coefficient of var^k, as a polynomial in the remaining variables.
  Polynomial coefficient(const std::string& var, int k) const;
  Polynomial substitute(const std::string& var, const Polynomial& by) const;
  // Throws ValidationError if a variable is unbound.
  Rational eval(const std::map<std::string, Rational>& at) const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend bool operator==(const Polynomial&, const Polynomial&) = default;

  // e.g. "3/2*n^2 - n + 7"; "0" for the zero polynomial.
  std::string to_string() const;

 private:
  void add_term(const Monomial& m, const Rational& c);
  std::map<Monomial, Rational, GradedLex> terms_;
};

Polynomial pow(const Polynomial& p, int k);

// Coefficient-wise maximum / minimum. Bounds the pointwise max / min from
// above / below wherever every variable is non-negative.
Polynomial coeff_max(const Polynomial& a, const Polynomial& b);
Polynomial coeff_min(const Polynomial& a, const Polynomial& b);

// Bernoulli numbers with B_1 = -1/2.
Rational bernoulli(int k);
// sum_{i=0}^{x-1} i^k as a polynomial in x.
Polynomial faulhaber(int k, const std::string& x);
// sum_{var=lo}^{hi-1} body, for lo <= hi.
Polynomial sum_over(const Polynomial& body, const std::string& var, const Polynomial& lo, const Polynomial& hi);

std::string rational_string(const Rational& r);

// Symbolic cost before summations and calls are eliminated. Leaves are
// polynomials in pJ over parameters and enclosing loop indices.
struct RelExpr {
  enum class Kind { poly, add, max, min, scale, sum, call, self };
  Kind kind = Kind::poly;
  Polynomial poly;  // poly leaf; loop count for scale
  std::vector<RelExpr> args;
  std::string var;  // summation index
  Polynomial lo, hi;  // summation range lo..hi-1
  std::string callee;
  // Call arguments per callee parameter; empty when some argument is not
  // a polynomial, in which case the callee is bounded over its domains.
  std::vector<Polynomial> call_args;

  std::string to_string() const;
};

enum class Bound { upper, lower };

using Domains = std::map<std::string, std::pair<std::int64_t, std::int64_t>>;

struct CostRelation {
  std::string function;
  std::vector<std::string> params;  // symbolic parameters
  std::vector<std::string> positional;  // every parameter, in order
  Domains domains;
  RelExpr upper, lower;
  // Simple linear recursion C(n) = C(n - shift) + step, base case for
  // n < lo + shift.
  bool recursive = false;
  std::string rec_param;
  std::int64_t rec_lo = 0;
  std::int64_t shift = 0;
  RelExpr base_upper, base_lower;

  std::string to_string() const;
};

// One relation per function, in program order. Throws UnsupportedError for
// shapes outside the supported class (mutual or non-linear recursion,
// non-affine or possibly negative loop ranges, negative domains).
std::vector<CostRelation> extract_relations(const hir::HirProgram& program, const hir::HirCosts& costs);

struct CostFunction {
  std::string function;
  std::vector<std::string> params;
  Domains domains;
  Polynomial upper, lower;  // pJ
  std::vector<std::string> notes;
};

// Callees are solved before callers. Throws UnsupportedError when the
// result would not be polynomial.
std::vector<CostFunction> solve(const std::vector<CostRelation>& relations);

using Bindings = std::map<std::string, std::int64_t>;

// Exact value in pJ. Throws ValidationError for unbound or negative
// parameters.
Rational eval_cost(const Polynomial& f, const Bindings& at);
Rational eval_cost(const CostFunction& f, Bound which, const Bindings& at);

std::string cost_functions_json(const std::vector<CostFunction>& fns);
std::string cost_functions_text(const std::vector<CostFunction>& fns);

}  // namespace wattlens::parametric
