#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcofdma/error.hpp"

namespace mcofdma::gp {

using VarId = std::size_t;

/// c * prod_v x_v^{a_v}, c > 0.
struct Monomial {
  double coeff = 1.0;
  std::map<VarId, double> exponents;

  Monomial() = default;
  explicit Monomial(double c) : coeff(c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw UsageError("Monomial: coefficient must be positive and finite");
  }
  Monomial(double c, std::map<VarId, double> exps) : Monomial(c) {
    exponents = std::move(exps);
    prune();
  }

  /// c * x_v
  static Monomial variable(VarId v, double c = 1.0) { return Monomial(c, {{v, 1.0}}); }

  double eval(std::span<const double> x) const {
    double value = coeff;
    for (const auto& [v, e] : exponents) {
      if (v >= x.size()) throw UsageError("posynomial evaluation: variable " + std::to_string(v) + " not assigned");
      if (!(x[v] > 0.0)) throw UsageError("posynomial evaluation: variables must be strictly positive");
      value *= std::pow(x[v], e);
    }
    return value;
  }

  Monomial& operator*=(const Monomial& o) {
    coeff *= o.coeff;
    for (const auto& [v, e] : o.exponents) exponents[v] += e;
    prune();
    return *this;
  }
  Monomial& operator/=(const Monomial& o) {
    coeff /= o.coeff;
    for (const auto& [v, e] : o.exponents) exponents[v] -= e;
    prune();
    return *this;
  }
  friend Monomial operator*(Monomial a, const Monomial& b) { return a *= b; }
  friend Monomial operator/(Monomial a, const Monomial& b) { return a /= b; }

  /// m^p
  Monomial pow(double p) const {
    Monomial out(std::pow(coeff, p));
    for (const auto& [v, e] : exponents) out.exponents[v] = e * p;
    out.prune();
    return out;
  }

 private:
  void prune() {
    for (auto it = exponents.begin(); it != exponents.end();) {
      it = (it->second == 0.0) ? exponents.erase(it) : std::next(it);
    }
  }
};

/// Non-empty sum of monomials.
struct Posynomial {
  std::vector<Monomial> terms;

  Posynomial() = default;
  Posynomial(Monomial m) { terms.push_back(std::move(m)); }  // NOLINT: implicit by design of the algebra
  explicit Posynomial(std::vector<Monomial> ts) : terms(std::move(ts)) {}
  static Posynomial constant(double c) { return Posynomial(Monomial(c)); }

  bool empty() const { return terms.empty(); }

  double eval(std::span<const double> x) const {
    if (terms.empty()) throw UsageError("posynomial evaluation: empty posynomial");
    double s = 0.0;
    for (const auto& t : terms) s += t.eval(x);
    return s;
  }

  Posynomial& operator+=(const Posynomial& o) {
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    return *this;
  }
  friend Posynomial operator+(Posynomial a, const Posynomial& b) { return a += b; }

  Posynomial& operator*=(const Monomial& m) {
    for (auto& t : terms) t *= m;
    return *this;
  }
  Posynomial& operator/=(const Monomial& m) {
    for (auto& t : terms) t /= m;
    return *this;
  }
  friend Posynomial operator*(Posynomial a, const Monomial& m) { return a *= m; }
  friend Posynomial operator/(Posynomial a, const Monomial& m) { return a /= m; }

  friend Posynomial operator*(const Posynomial& a, const Posynomial& b) {
    Posynomial out;
    out.terms.reserve(a.terms.size() * b.terms.size());
    for (const auto& s : a.terms) {
      for (const auto& t : b.terms) out.terms.push_back(s * t);
    }
    return out;
  }
};

inline double posy_eval(const Posynomial& p, std::span<const double> x) { return p.eval(x); }

/// Monomial under-estimator of f that is exact at x0 (arithmetic-geometric
/// mean inequality with weights s_i = u_i(x0) / f(x0)):
///   f(x) >= prod_i (u_i(x) / s_i)^{s_i}.
inline Monomial condense(const Posynomial& f, std::span<const double> x0) {
  const double total = f.eval(x0);
  Monomial out(1.0);
  double log_coeff = 0.0;
  for (const auto& u : f.terms) {
    const double s = u.eval(x0) / total;
    if (s <= 0.0) continue;  // underflowed term carries no weight
    log_coeff += s * (std::log(u.coeff) - std::log(s));
    for (const auto& [v, e] : u.exponents) out.exponents[v] += s * e;
  }
  out.coeff = std::exp(log_coeff);
  return Monomial(out.coeff, std::move(out.exponents));
}

}  // namespace mcofdma::gp
