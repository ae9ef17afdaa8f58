#pragma once

// Recursive-descent parser for component expressions. Grammar (see
// docs/grammar.md):
//
//   expr     := term (('+' | '-') term)*
//   term     := unary (('*' | '/') unary)*
//   unary    := ('-' | '+') unary | power
//   power    := primary ('^' exponent)?
//   exponent := ('-' | '+')? power          (must fold to a rational constant)
//   primary  := number | name | func '(' expr ')' | '(' expr ')'

#include <cctype>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "metharm/errors.hpp"
#include "metharm/expr.hpp"

namespace metharm {

inline constexpr double kGoldenRatio = 1.6180339887498948482;

namespace detail {

inline bool to_rational(double v, Rational& out) {
  if (!std::isfinite(v)) return false;
  for (std::int64_t den = 1; den <= 1000; ++den) {
    double num = std::round(v * static_cast<double>(den));
    if (std::abs(num / static_cast<double>(den) - v) <= 1e-12 * std::max(1.0, std::abs(v))) {
      out = Rational(static_cast<std::int64_t>(num), den);
      return true;
    }
  }
  return false;
}

class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& coords) : src_(src), coords_(coords) {}

  Expr parse() {
    skip_ws();
    if (at_end()) fail("empty expression");
    Expr e = expr();
    skip_ws();
    if (!at_end()) fail(std::string("unexpected '") + peek() + "'");
    return e;
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek() const { return at_end() ? '\0' : src_[pos_]; }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }

  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(what, line_, col_); }

  bool accept(char c) {
    skip_ws();
    if (peek() == c) {
      advance();
      return true;
    }
    return false;
  }

  Expr expr() {
    std::vector<Expr> terms{term()};
    for (;;) {
      if (accept('+'))
        terms.push_back(term());
      else if (accept('-'))
        terms.push_back(-term());
      else
        break;
    }
    return add(terms);
  }

  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept('*'))
        e = e * unary();
      else if (accept('/'))
        e = e / unary();
      else
        break;
    }
    return e;
  }

  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    skip_ws();
    if (peek() != '^') return base;
    int line = line_, col = col_;
    advance();
    Expr ex;
    if (accept('-'))
      ex = -power();
    else {
      accept('+');
      ex = power();
    }
    Rational r;
    if (!ex.is_constant() || !to_rational(ex.constant_value(), r))
      throw SyntaxError("exponent must be a rational constant", line, col);
    return pow(base, r);
  }

  Expr primary() {
    skip_ws();
    if (at_end()) fail("unexpected end of input");
    char c = peek();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    if (c == '(') {
      advance();
      Expr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    fail(std::string("unexpected '") + c + "'");
  }

  Expr number() {
    std::size_t start = pos_;
    while (!at_end() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.')) advance();
    if (!at_end() && (peek() == 'e' || peek() == 'E')) {
      std::size_t save = pos_;
      int sl = line_, sc = col_;
      advance();
      if (peek() == '+' || peek() == '-') advance();
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      } else {
        pos_ = save;
        line_ = sl;
        col_ = sc;
      }
    }
    std::string text(src_.substr(start, pos_ - start));
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) fail("malformed number '" + text + "'");
    return Expr(v);
  }

  Expr name() {
    int line = line_, col = col_;
    std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) advance();
    std::string id(src_.substr(start, pos_ - start));

    static const std::pair<const char*, Expr (*)(const Expr&)> funcs[] = {
        {"sin", &metharm::sin},   {"cos", &metharm::cos},   {"tan", &metharm::tan},
        {"exp", &metharm::exp},   {"log", &metharm::log},   {"sqrt", &metharm::sqrt},
        {"sinh", &metharm::sinh}, {"cosh", &metharm::cosh},
    };
    for (auto& [fname, fn] : funcs) {
      if (id == fname) {
        if (!accept('(')) fail("expected '(' after " + id);
        Expr arg = expr();
        if (!accept(')')) fail("expected ')'");
        return fn(arg);
      }
    }
    for (const std::string& c : coords_)
      if (c == id) return Expr::variable(id);
    if (id == "pi") return Expr(M_PI);
    if (id == "phi") return Expr(kGoldenRatio);
    throw UnknownIdentifierError(id, line, col);
  }

  std::string_view src_;
  const std::vector<std::string>& coords_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace detail

/// Parses `source` over the declared coordinate names.
inline Expr parse(std::string_view source, const std::vector<std::string>& coordinates) {
  return detail::Parser(source, coordinates).parse();
}

}  // namespace metharm
