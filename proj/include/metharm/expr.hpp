#pragma once

// Immutable, hash-consed symbolic expressions over chart coordinates.
//
// Nodes live in a process-wide pool and are never freed; an Expr is a thin
// handle. Structurally equal expressions share one node, so equality is a
// pointer compare and derivative results can be memoized per node.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <deque>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "metharm/errors.hpp"

namespace metharm {

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  bool is_integer() const { return den == 1; }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
  friend Rational operator-(Rational a, Rational b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
  friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
  friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
};

enum class Op : std::uint8_t { Const, Var, Add, Mul, Pow, Sin, Cos, Tan, Exp, Log, Sinh, Cosh };

struct Node {
  Op op = Op::Const;
  double value = 0.0;
  int var = -1;
  Rational exponent;
  std::vector<const Node*> kids;
  std::uint32_t id = 0;
  std::size_t hash = 0;
};

class Expr;

namespace detail {

inline std::size_t mix(std::size_t h, std::size_t v) { return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)); }

inline std::size_t hash_node(Op op, double value, int var, Rational ex, const std::vector<const Node*>& kids) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &value, sizeof bits);
  std::size_t h = static_cast<std::size_t>(op);
  h = mix(h, bits);
  h = mix(h, static_cast<std::size_t>(var + 1));
  h = mix(h, static_cast<std::size_t>(ex.num));
  h = mix(h, static_cast<std::size_t>(ex.den));
  for (const Node* k : kids) h = mix(h, k->id);
  return h;
}

/// Interning table for nodes plus the derivative memo. Guarded by a recursive
/// mutex so that expressions can be built from several threads.
class Pool {
 public:
  const Node* intern(Op op, double value, int var, Rational ex, std::vector<const Node*> kids) {
    std::lock_guard lock(mutex_);
    if (value == 0.0) value = 0.0;  // fold -0.0
    std::size_t h = hash_node(op, value, var, ex, kids);
    auto [lo, hi] = table_.equal_range(h);
    for (auto it = lo; it != hi; ++it) {
      const Node* n = it->second;
      if (n->op == op && std::memcmp(&n->value, &value, sizeof value) == 0 && n->var == var && n->exponent == ex &&
          n->kids == kids)
        return n;
    }
    Node& n = nodes_.emplace_back();
    n.op = op;
    n.value = value;
    n.var = var;
    n.exponent = ex;
    n.kids = std::move(kids);
    n.id = static_cast<std::uint32_t>(nodes_.size() - 1);
    n.hash = h;
    table_.emplace(h, &n);
    return &n;
  }

  int variable_id(const std::string& name) {
    std::lock_guard lock(mutex_);
    auto it = var_ids_.find(name);
    if (it != var_ids_.end()) return it->second;
    int id = static_cast<int>(var_names_.size());
    var_names_.push_back(name);
    var_ids_.emplace(name, id);
    return id;
  }

  std::string variable_name(int id) {
    std::lock_guard lock(mutex_);
    return var_names_.at(static_cast<std::size_t>(id));
  }

  std::size_t variable_count() {
    std::lock_guard lock(mutex_);
    return var_names_.size();
  }

  std::size_t size() {
    std::lock_guard lock(mutex_);
    return nodes_.size();
  }

  std::recursive_mutex& mutex() { return mutex_; }
  std::unordered_map<std::uint64_t, const Node*>& diff_memo() { return diff_memo_; }

 private:
  std::recursive_mutex mutex_;
  std::deque<Node> nodes_;
  std::unordered_multimap<std::size_t, const Node*> table_;
  std::vector<std::string> var_names_;
  std::unordered_map<std::string, int> var_ids_;
  std::unordered_map<std::uint64_t, const Node*> diff_memo_;
};

inline Pool& pool() {
  static Pool instance;
  return instance;
}

}  // namespace detail

inline int variable_id(const std::string& name) { return detail::pool().variable_id(name); }
inline std::string variable_name(int id) { return detail::pool().variable_name(id); }
inline std::size_t expression_pool_size() { return detail::pool().size(); }

class Expr {
 public:
  Expr() : Expr(0.0) {}
  Expr(double c) : node_(detail::pool().intern(Op::Const, c, -1, {}, {})) {}  // NOLINT: implicit by design of the algebra
  Expr(int c) : Expr(static_cast<double>(c)) {}                                  // NOLINT
  explicit Expr(const Node* n) : node_(n) {}

  static Expr variable(const std::string& name) { return variable(variable_id(name)); }
  static Expr variable(int id) { return Expr(detail::pool().intern(Op::Var, 0.0, id, {}, {})); }

  const Node* node() const { return node_; }
  Op op() const { return node_->op; }
  std::uint32_t id() const { return node_->id; }
  bool is_constant() const { return node_->op == Op::Const; }
  bool is_zero() const { return is_constant() && node_->value == 0.0; }
  bool is_one() const { return is_constant() && node_->value == 1.0; }
  double constant_value() const { return node_->value; }

  friend bool operator==(const Expr& a, const Expr& b) { return a.node_ == b.node_; }
  friend bool operator!=(const Expr& a, const Expr& b) { return a.node_ != b.node_; }

 private:
  const Node* node_;
};

Expr add(const std::vector<Expr>& terms);
Expr mul(const std::vector<Expr>& factors);
Expr pow(const Expr& base, Rational exponent);

namespace detail {

inline Expr make_func(Op op, const Expr& a) {
  if (a.is_constant()) {
    double v = a.constant_value();
    double r = std::numeric_limits<double>::quiet_NaN();
    switch (op) {
      case Op::Sin: r = std::sin(v); break;
      case Op::Cos: r = std::cos(v); break;
      case Op::Tan: r = std::cos(v) != 0.0 ? std::tan(v) : r; break;
      case Op::Exp: r = std::exp(v); break;
      case Op::Log: r = v > 0.0 ? std::log(v) : r; break;
      case Op::Sinh: r = std::sinh(v); break;
      case Op::Cosh: r = std::cosh(v); break;
      default: break;
    }
    if (std::isfinite(r)) return Expr(r);
  }
  return Expr(pool().intern(op, 0.0, -1, {}, {a.node()}));
}

// Integer power of a constant, or NaN when it must stay symbolic.
inline double const_pow(double v, Rational r) {
  if (r.is_integer()) {
    if (v == 0.0 && r.num < 0) return std::numeric_limits<double>::quiet_NaN();
    return std::pow(v, static_cast<double>(r.num));
  }
  if (v > 0.0) return std::pow(v, r.value());
  if (v == 0.0) return r.num > 0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  if (r.den % 2 != 0) {
    double m = std::pow(-v, r.value());
    return (r.num % 2 != 0) ? -m : m;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

inline Expr add(const std::vector<Expr>& terms) {
  std::lock_guard lock(detail::pool().mutex());
  double c = 0.0;
  std::map<std::uint32_t, std::pair<const Node*, double>> collected;
  auto push = [&](auto&& self, const Node* t, double k) -> void {
    switch (t->op) {
      case Op::Const: c += k * t->value; return;
      case Op::Add:
        for (const Node* kid : t->kids) self(self, kid, k);
        return;
      case Op::Mul:
        if (t->kids.front()->op == Op::Const) {
          double coef = t->kids.front()->value;
          std::vector<const Node*> rest(t->kids.begin() + 1, t->kids.end());
          const Node* core =
              rest.size() == 1 ? rest.front() : detail::pool().intern(Op::Mul, 0.0, -1, {}, std::move(rest));
          auto& slot = collected[core->id];
          slot.first = core;
          slot.second += k * coef;
          return;
        }
        [[fallthrough]];
      default: {
        auto& slot = collected[t->id];
        slot.first = t;
        slot.second += k;
      }
    }
  };
  for (const Expr& e : terms) push(push, e.node(), 1.0);

  std::vector<const Node*> kids;
  for (auto& [id, entry] : collected) {
    auto [core, coef] = entry;
    if (coef == 0.0) continue;
    if (coef == 1.0) {
      kids.push_back(core);
      continue;
    }
    std::vector<const Node*> fk{Expr(coef).node()};
    if (core->op == Op::Mul)
      fk.insert(fk.end(), core->kids.begin(), core->kids.end());
    else
      fk.push_back(core);
    kids.push_back(detail::pool().intern(Op::Mul, 0.0, -1, {}, std::move(fk)));
  }
  if (kids.empty()) return Expr(c);
  if (kids.size() == 1 && c == 0.0) return Expr(kids.front());
  std::sort(kids.begin(), kids.end(), [](const Node* a, const Node* b) { return a->id < b->id; });
  if (c != 0.0) kids.insert(kids.begin(), Expr(c).node());
  return Expr(detail::pool().intern(Op::Add, 0.0, -1, {}, std::move(kids)));
}

inline Expr mul(const std::vector<Expr>& factors) {
  std::lock_guard lock(detail::pool().mutex());
  double coef = 1.0;
  std::map<std::uint32_t, std::pair<const Node*, Rational>> collected;
  auto collect = [&](const Node* base, Rational r) {
    auto& slot = collected[base->id];
    slot.first = base;
    slot.second = slot.second + r;
  };
  // push(f, r) records f^r for an integer r, so (b^s)^r = b^(s*r) always holds.
  auto push = [&](auto&& self, const Node* f, Rational r) -> void {
    switch (f->op) {
      case Op::Const: {
        double v = detail::const_pow(f->value, r);
        if (std::isfinite(v))
          coef *= v;
        else
          collect(f, r);
        return;
      }
      case Op::Mul:
        for (const Node* kid : f->kids) self(self, kid, r);
        return;
      case Op::Pow: {
        Rational e2 = f->exponent * r;
        if (e2.is_integer())
          self(self, f->kids.front(), e2);
        else
          collect(f->kids.front(), e2);
        return;
      }
      default: collect(f, r);
    }
  };
  for (const Expr& e : factors) push(push, e.node(), Rational(1));
  if (coef == 0.0) return Expr(0.0);

  std::vector<const Node*> kids;
  for (auto& [id, entry] : collected) {
    auto [base, ex] = entry;
    if (ex.num == 0) continue;
    if (ex == Rational(1)) {
      kids.push_back(base);
      continue;
    }
    if (base->op == Op::Pow && ex.is_integer()) {
      Expr merged = pow(Expr(base->kids.front()), base->exponent * ex);
      if (merged.is_constant()) {
        coef *= merged.constant_value();
        continue;
      }
      kids.push_back(merged.node());
      continue;
    }
    kids.push_back(detail::pool().intern(Op::Pow, 0.0, -1, ex, {base}));
  }
  if (coef == 0.0) return Expr(0.0);
  if (kids.empty()) return Expr(coef);
  if (kids.size() == 1 && coef == 1.0) return Expr(kids.front());
  std::sort(kids.begin(), kids.end(), [](const Node* a, const Node* b) { return a->id < b->id; });
  if (coef != 1.0) kids.insert(kids.begin(), Expr(coef).node());
  return Expr(detail::pool().intern(Op::Mul, 0.0, -1, {}, std::move(kids)));
}

inline Expr pow(const Expr& base, Rational r) {
  if (r.num == 0) return Expr(1.0);
  if (r == Rational(1)) return base;
  if (base.is_constant()) {
    double v = detail::const_pow(base.constant_value(), r);
    if (std::isfinite(v)) return Expr(v);
  }
  if (r.is_integer()) {
    if (base.op() == Op::Pow) {
      Rational e2 = base.node()->exponent * r;
      const Node* inner = base.node()->kids.front();
      if (e2.is_integer() && inner->op == Op::Mul)
        return mul({Expr(detail::pool().intern(Op::Pow, 0.0, -1, e2, {inner}))});
      return e2 == Rational(1) ? Expr(inner) : Expr(detail::pool().intern(Op::Pow, 0.0, -1, e2, {inner}));
    }
    if (base.op() == Op::Mul) return mul({Expr(detail::pool().intern(Op::Pow, 0.0, -1, r, {base.node()}))});
  }
  return Expr(detail::pool().intern(Op::Pow, 0.0, -1, r, {base.node()}));
}

inline Expr operator+(const Expr& a, const Expr& b) { return add({a, b}); }
inline Expr operator-(const Expr& a) { return mul({Expr(-1.0), a}); }
inline Expr operator-(const Expr& a, const Expr& b) { return add({a, -b}); }
inline Expr operator*(const Expr& a, const Expr& b) { return mul({a, b}); }
inline Expr operator/(const Expr& a, const Expr& b) { return mul({a, pow(b, Rational(-1))}); }
inline Expr& operator+=(Expr& a, const Expr& b) { return a = a + b; }
inline Expr& operator-=(Expr& a, const Expr& b) { return a = a - b; }
inline Expr& operator*=(Expr& a, const Expr& b) { return a = a * b; }

inline Expr sin(const Expr& a) { return detail::make_func(Op::Sin, a); }
inline Expr cos(const Expr& a) { return detail::make_func(Op::Cos, a); }
inline Expr tan(const Expr& a) { return detail::make_func(Op::Tan, a); }
inline Expr exp(const Expr& a) { return detail::make_func(Op::Exp, a); }
inline Expr log(const Expr& a) { return detail::make_func(Op::Log, a); }
inline Expr sinh(const Expr& a) { return detail::make_func(Op::Sinh, a); }
inline Expr cosh(const Expr& a) { return detail::make_func(Op::Cosh, a); }
inline Expr sqrt(const Expr& a) { return pow(a, Rational(1, 2)); }

/// Exact partial derivative with respect to the variable with the given id.
inline Expr diff(const Expr& e, int var) {
  auto& pool = detail::pool();
  std::lock_guard lock(pool.mutex());
  std::uint64_t key = (static_cast<std::uint64_t>(e.id()) << 20) | static_cast<std::uint64_t>(var);
  if (auto it = pool.diff_memo().find(key); it != pool.diff_memo().end()) return Expr(it->second);

  const Node* n = e.node();
  auto kid = [&](std::size_t i) { return Expr(n->kids[i]); };
  Expr result;
  switch (n->op) {
    case Op::Const: result = Expr(0.0); break;
    case Op::Var: result = Expr(n->var == var ? 1.0 : 0.0); break;
    case Op::Add: {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < n->kids.size(); ++i) terms.push_back(diff(kid(i), var));
      result = add(terms);
      break;
    }
    case Op::Mul: {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < n->kids.size(); ++i) {
        Expr d = diff(kid(i), var);
        if (d.is_zero()) continue;
        std::vector<Expr> f;
        for (std::size_t j = 0; j < n->kids.size(); ++j) f.push_back(j == i ? d : kid(j));
        terms.push_back(mul(f));
      }
      result = add(terms);
      break;
    }
    case Op::Pow: {
      Expr d = diff(kid(0), var);
      Rational r = n->exponent;
      result = d.is_zero() ? Expr(0.0) : mul({Expr(r.value()), pow(kid(0), r - Rational(1)), d});
      break;
    }
    case Op::Sin: result = cos(kid(0)) * diff(kid(0), var); break;
    case Op::Cos: result = -sin(kid(0)) * diff(kid(0), var); break;
    case Op::Tan: result = pow(cos(kid(0)), Rational(-2)) * diff(kid(0), var); break;
    case Op::Exp: result = e * diff(kid(0), var); break;
    case Op::Log: result = diff(kid(0), var) / kid(0); break;
    case Op::Sinh: result = cosh(kid(0)) * diff(kid(0), var); break;
    case Op::Cosh: result = sinh(kid(0)) * diff(kid(0), var); break;
  }
  pool.diff_memo().emplace(key, result.node());
  return result;
}

inline Expr diff(const Expr& e, const std::string& var) { return diff(e, variable_id(var)); }

/// Simultaneous substitution of variables by expressions.
inline Expr substitute(const Expr& e, const std::unordered_map<int, Expr>& by) {
  std::unordered_map<std::uint32_t, Expr> memo;
  auto rec = [&](auto&& self, const Node* n) -> Expr {
    if (auto it = memo.find(n->id); it != memo.end()) return it->second;
    Expr out;
    switch (n->op) {
      case Op::Const: out = Expr(n); break;
      case Op::Var: {
        auto it = by.find(n->var);
        out = it == by.end() ? Expr(n) : it->second;
        break;
      }
      case Op::Add:
      case Op::Mul: {
        std::vector<Expr> parts;
        for (const Node* k : n->kids) parts.push_back(self(self, k));
        out = n->op == Op::Add ? add(parts) : mul(parts);
        break;
      }
      case Op::Pow: out = pow(self(self, n->kids[0]), n->exponent); break;
      default: out = detail::make_func(n->op, self(self, n->kids[0])); break;
    }
    memo.emplace(n->id, out);
    return out;
  };
  return rec(rec, e.node());
}

inline std::set<int> free_variables(const Expr& e) {
  std::set<int> vars;
  std::set<std::uint32_t> seen;
  auto rec = [&](auto&& self, const Node* n) -> void {
    if (!seen.insert(n->id).second) return;
    if (n->op == Op::Var) vars.insert(n->var);
    for (const Node* k : n->kids) self(self, k);
  };
  rec(rec, e.node());
  return vars;
}

/// Number of distinct nodes reachable from e.
inline std::size_t dag_size(const Expr& e) {
  std::set<std::uint32_t> seen;
  auto rec = [&](auto&& self, const Node* n) -> void {
    if (!seen.insert(n->id).second) return;
    for (const Node* k : n->kids) self(self, k);
  };
  rec(rec, e.node());
  return seen.size();
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sinh: return "sinh";
    case Op::Cosh: return "cosh";
    default: return "?";
  }
}

/// Fully parenthesized text form; re-parses to an equivalent expression.
inline std::string to_string(const Expr& e) {
  auto rec = [](auto&& self, const Node* n) -> std::string {
    switch (n->op) {
      case Op::Const: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", n->value);
        return n->value < 0 ? "(" + std::string(buf) + ")" : std::string(buf);
      }
      case Op::Var: return variable_name(n->var);
      case Op::Add:
      case Op::Mul: {
        std::string s = "(";
        for (std::size_t i = 0; i < n->kids.size(); ++i) {
          if (i) s += n->op == Op::Add ? " + " : "*";
          s += self(self, n->kids[i]);
        }
        return s + ")";
      }
      case Op::Pow:
        return "(" + self(self, n->kids[0]) + ")^(" + std::to_string(n->exponent.num) + "/" +
               std::to_string(n->exponent.den) + ")";
      default: return std::string(function_name(n->op)) + "(" + self(self, n->kids[0]) + ")";
    }
  };
  return rec(rec, e.node());
}

/// Map from coordinate name to value.
class Binding {
 public:
  Binding() = default;
  Binding(std::initializer_list<std::pair<const std::string, double>> init) {
    for (auto& [k, v] : init) set(k, v);
  }
  void set(const std::string& name, double value) { set(variable_id(name), value); }
  void set(int var, double value) {
    if (static_cast<std::size_t>(var) >= values_.size())
      values_.resize(static_cast<std::size_t>(var) + 1, std::numeric_limits<double>::quiet_NaN());
    values_[static_cast<std::size_t>(var)] = value;
  }
  bool has(int var) const {
    return static_cast<std::size_t>(var) < values_.size() && !std::isnan(values_[static_cast<std::size_t>(var)]);
  }
  double get(int var) const {
    if (!has(var)) throw UnboundVariableError(variable_name(var));
    return values_[static_cast<std::size_t>(var)];
  }

 private:
  std::vector<double> values_;
};

/// Evaluates expressions at one binding, sharing results across every
/// expression evaluated through the same instance.
class Evaluator {
 public:
  explicit Evaluator(Binding binding) : binding_(std::move(binding)) {}

  double operator()(const Expr& e) { return eval(e.node()); }
  const Binding& binding() const { return binding_; }

 private:
  double eval(const Node* n) {
    if (n->op == Op::Const) return n->value;
    std::size_t id = n->id;
    if (id < known_.size() && known_[id]) return cache_[id];
    double r = compute(n);
    if (id >= known_.size()) {
      std::size_t sz = std::max<std::size_t>(id + 1, known_.size() * 2);
      known_.resize(sz, 0);
      cache_.resize(sz, 0.0);
    }
    known_[id] = 1;
    cache_[id] = r;
    return r;
  }

  [[noreturn]] static void domain(const Node* n) {
    std::string s = to_string(Expr(n));
    if (s.size() > 200) s = s.substr(0, 200) + "...";
    throw DomainError(s);
  }

  double compute(const Node* n) {
    switch (n->op) {
      case Op::Const: return n->value;
      case Op::Var: return binding_.get(n->var);
      case Op::Add: {
        double s = 0.0;
        for (const Node* k : n->kids) s += eval(k);
        return s;
      }
      case Op::Mul: {
        double s = 1.0;
        for (const Node* k : n->kids) s *= eval(k);
        return s;
      }
      case Op::Pow: {
        double b = eval(n->kids[0]);
        Rational r = n->exponent;
        if (b == 0.0 && r.num < 0) domain(n);
        if (b < 0.0 && r.den % 2 == 0) domain(n);
        double v = detail::const_pow(b, r);
        if (!std::isfinite(v)) domain(n);
        return v;
      }
      default: break;
    }
    double a = eval(n->kids[0]);
    double v = 0.0;
    switch (n->op) {
      case Op::Sin: v = std::sin(a); break;
      case Op::Cos: v = std::cos(a); break;
      case Op::Tan: v = std::tan(a); break;
      case Op::Exp: v = std::exp(a); break;
      case Op::Log:
        if (a <= 0.0) domain(n);
        v = std::log(a);
        break;
      case Op::Sinh: v = std::sinh(a); break;
      case Op::Cosh: v = std::cosh(a); break;
      default: break;
    }
    if (!std::isfinite(v)) domain(n);
    return v;
  }

  Binding binding_;
  std::vector<char> known_;
  std::vector<double> cache_;
};

inline double eval(const Expr& e, const Binding& b) { return Evaluator(b)(e); }

}  // namespace metharm
