#include <algorithm>
#include <set>

#include "wattlens/errors.hpp"
#include "wattlens/parametric.hpp"

namespace wattlens::parametric {

int degree(const Monomial& m) {
  int d = 0;
  for (const auto& [v, e] : m) d += e;
  return d;
}

bool GradedLex::operator()(const Monomial& a, const Monomial& b) const {
  int da = degree(a), db = degree(b);
  if (da != db) return da > db;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) return true;
    if (i == a.size() || b[j].first < a[i].first) return false;
    if (a[i].second != b[j].second) return a[i].second > b[j].second;
    ++i;
    ++j;
  }
  return false;
}

Polynomial::Polynomial(Rational c) {
  if (c != 0) terms_[{}] = c;
}

Polynomial Polynomial::variable(const std::string& name) {
  Polynomial p;
  p.terms_[{{name, 1}}] = 1;
  return p;
}

bool Polynomial::is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty()); }

Rational Polynomial::constant_term() const {
  auto it = terms_.find({});
  return it == terms_.end() ? Rational(0) : it->second;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, parametric::degree(m));
  return d;
}

int Polynomial::degree_in(const std::string& var) const {
  int d = 0;
  for (const auto& [m, c] : terms_)
    for (const auto& [v, e] : m)
      if (v == var) d = std::max(d, e);
  return d;
}

std::vector<std::string> Polynomial::variables() const {
  std::set<std::string> s;
  for (const auto& [m, c] : terms_)
    for (const auto& [v, e] : m) s.insert(v);
  return {s.begin(), s.end()};
}

void Polynomial::add_term(const Monomial& m, const Rational& c) {
  if (c == 0) return;
  auto [it, fresh] = terms_.try_emplace(m, c);
  if (!fresh) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

namespace {

Monomial multiply(const Monomial& a, const Monomial& b) {
  std::map<std::string, int> e;
  for (const auto& [v, k] : a) e[v] += k;
  for (const auto& [v, k] : b) e[v] += k;
  return {e.begin(), e.end()};
}

}  // namespace

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial out;
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) out.add_term(multiply(ma, mb), ca * cb);
  return out;
}

Polynomial pow(const Polynomial& p, int k) {
  Polynomial out(1);
  for (int i = 0; i < k; ++i) out = out * p;
  return out;
}

Polynomial Polynomial::coefficient(const std::string& var, int k) const {
  Polynomial out;
  for (const auto& [m, c] : terms_) {
    int e = 0;
    Monomial rest;
    for (const auto& [v, x] : m) {
      if (v == var)
        e = x;
      else
        rest.emplace_back(v, x);
    }
    if (e == k) out.add_term(rest, c);
  }
  return out;
}

Polynomial Polynomial::substitute(const std::string& var, const Polynomial& by) const {
  Polynomial out;
  int d = degree_in(var);
  Polynomial power(1);
  for (int k = 0; k <= d; ++k) {
    out += coefficient(var, k) * power;
    power = power * by;
  }
  return out;
}

Rational Polynomial::eval(const std::map<std::string, Rational>& at) const {
  Rational total = 0;
  for (const auto& [m, c] : terms_) {
    Rational t = c;
    for (const auto& [v, e] : m) {
      auto it = at.find(v);
      if (it == at.end()) throw ValidationError(v, "parameter is not bound");
      for (int k = 0; k < e; ++k) t *= it->second;
    }
    total += t;
  }
  return total;
}

std::string rational_string(const Rational& r) {
  std::string s = boost::multiprecision::numerator(r).str();
  if (boost::multiprecision::denominator(r) != 1) s += "/" + boost::multiprecision::denominator(r).str();
  return s;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    Rational mag = c < 0 ? Rational(-c) : c;
    if (first)
      out += c < 0 ? "-" : "";
    else
      out += c < 0 ? " - " : " + ";
    first = false;
    std::string vars;
    for (const auto& [v, e] : m) {
      if (!vars.empty()) vars += "*";
      vars += v;
      if (e > 1) vars += "^" + std::to_string(e);
    }
    if (vars.empty())
      out += rational_string(mag);
    else if (mag == 1)
      out += vars;
    else
      out += rational_string(mag) + "*" + vars;
  }
  return out;
}

namespace {

Polynomial coeff_pick(const Polynomial& a, const Polynomial& b, bool upper) {
  std::set<Monomial, GradedLex> ms;
  for (const auto& [m, c] : a.terms()) ms.insert(m);
  for (const auto& [m, c] : b.terms()) ms.insert(m);
  Polynomial out;
  for (const auto& m : ms) {
    auto ia = a.terms().find(m);
    auto ib = b.terms().find(m);
    Rational ca = ia == a.terms().end() ? Rational(0) : ia->second;
    Rational cb = ib == b.terms().end() ? Rational(0) : ib->second;
    Rational c = upper ? std::max(ca, cb) : std::min(ca, cb);
    Polynomial t(c);
    for (const auto& [v, e] : m) t = t * pow(Polynomial::variable(v), e);
    out += t;
  }
  return out;
}

}  // namespace

Polynomial coeff_max(const Polynomial& a, const Polynomial& b) { return coeff_pick(a, b, true); }
Polynomial coeff_min(const Polynomial& a, const Polynomial& b) { return coeff_pick(a, b, false); }

namespace {

Rational binomial(int n, int k) {
  Rational r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

Rational bernoulli(int k) {
  static std::vector<Rational> memo{Rational(1)};
  while (static_cast<int>(memo.size()) <= k) {
    int m = static_cast<int>(memo.size());
    Rational s = 0;
    for (int j = 0; j < m; ++j) s += binomial(m + 1, j) * memo[static_cast<std::size_t>(j)];
    memo.push_back(-s / (m + 1));
  }
  return memo[static_cast<std::size_t>(k)];
}

Polynomial faulhaber(int k, const std::string& x) {
  Polynomial out;
  Polynomial xv = Polynomial::variable(x);
  for (int j = 0; j <= k; ++j) out += Polynomial(binomial(k + 1, j) * bernoulli(j) / (k + 1)) * pow(xv, k + 1 - j);
  return out;
}

Polynomial sum_over(const Polynomial& body, const std::string& var, const Polynomial& lo, const Polynomial& hi) {
  Polynomial out;
  const std::string x = "\x01x";
  for (int k = 0; k <= body.degree_in(var); ++k) {
    Polynomial q = body.coefficient(var, k);
    if (q.is_zero()) continue;
    Polynomial f = faulhaber(k, x);
    out += q * (f.substitute(x, hi) - f.substitute(x, lo));
  }
  return out;
}

}  // namespace wattlens::parametric
