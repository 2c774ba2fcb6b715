#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "plap/errors.hpp"

namespace plap::cli {

// Grammar, loosest binding first:
//
//   expr   := term   (('+' | '-') term)*        left associative
//   term   := power  (('*' | '/') power)*       left associative
//   power  := unary  ('^' power)?               right associative
//   unary  := '-' unary | primary
//   primary:= number | 'pi' | 'x' | 'y' | 't' | name '(' args ')' | '(' expr ')'
//
// Unary minus sits below '^', so "-x^2" is (-x)^2 and "2^-1" is 0.5.
// Functions: abs/1, sqrt/1, pos/1 (positive part), min/2, max/2, pow/2.

enum class NodeKind { number, variable, constant, negate, add, subtract, multiply, divide, power, call };

struct Expression {
  NodeKind kind = NodeKind::number;
  double value = 0.0;  ///< number literal, or the constant's value
  std::string name;    ///< variable, constant or function name
  std::vector<Expression> args;

  friend bool operator==(const Expression&, const Expression&) = default;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& message, std::size_t offset, std::vector<std::string> expected);
  std::size_t offset() const { return offset_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

struct Env {
  std::optional<double> x;
  std::optional<double> y;
  std::optional<double> t;
};

Expression parse_expression(const std::string& text);

/// Strict evaluation: division by zero, 0^negative, sqrt of a negative and
/// non-finite results throw EvalError, as does an unbound variable.
double eval_expression(const Expression& ast, const Env& env);

/// Fully parenthesized text that parses back to an identical tree.
std::string to_string(const Expression& ast);

/// Variables (x, y, t) occurring in the tree.
std::set<std::string> free_variables(const Expression& ast);

/// Shortest round-trip decimal form, independent of the C locale.
std::string format_number(double v);

}  // namespace plap::cli
