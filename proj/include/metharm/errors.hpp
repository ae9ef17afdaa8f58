#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace metharm {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, int line, int column)
      : Error("syntax error at " + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class UnknownIdentifierError : public Error {
 public:
  UnknownIdentifierError(const std::string& name, int line, int column)
      : Error("unknown identifier '" + name + "' at " + std::to_string(line) + ":" + std::to_string(column)),
        name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& subexpr)
      : Error("domain error evaluating " + subexpr), subexpr_(subexpr) {}
  const std::string& subexpression() const { return subexpr_; }

 private:
  std::string subexpr_;
};

class UnboundVariableError : public Error {
 public:
  explicit UnboundVariableError(const std::string& name) : Error("unbound variable '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class DegenerateMetricError : public Error {
 public:
  explicit DegenerateMetricError(double det)
      : Error("degenerate metric (|det g| = " + std::to_string(std::abs(det)) + " <= 1e-10)"), det_(det) {}
  double determinant() const { return det_; }

 private:
  double det_;
};

class NearNullVectorError : public Error {
 public:
  using Error::Error;
};

class DiscriminantError : public Error {
 public:
  using Error::Error;
};

class SignatureError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDegreeError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class SingularJacobianError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

}  // namespace metharm
