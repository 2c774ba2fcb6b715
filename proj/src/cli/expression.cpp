#include "plap/cli/expression.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace plap::cli {

namespace {

struct FunctionInfo {
  const char* name;
  int arity;
};

constexpr FunctionInfo kFunctions[] = {
    {"abs", 1}, {"sqrt", 1}, {"pos", 1}, {"min", 2}, {"max", 2}, {"pow", 2},
};

const FunctionInfo* find_function(const std::string& name) {
  for (const auto& f : kFunctions)
    if (name == f.name) return &f;
  return nullptr;
}

bool is_variable(const std::string& name) { return name == "x" || name == "y" || name == "t"; }

const std::vector<std::string> kOperand = {"number", "identifier", "'('", "'-'"};

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  Expression parse() {
    skip();
    if (pos_ == s_.size()) fail("empty expression", kOperand);
    Expression e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character", {"operator", "end of input"});
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected) const {
    std::ostringstream os;
    os << what << " at offset " << pos_ << " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) os << (i ? ", " : "") << expected[i];
    os << ")";
    throw ParseError(os.str(), pos_, std::move(expected));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static Expression binary(NodeKind kind, Expression a, Expression b) {
    Expression e;
    e.kind = kind;
    e.args.push_back(std::move(a));
    e.args.push_back(std::move(b));
    return e;
  }

  Expression expr() {
    Expression lhs = term();
    for (;;) {
      if (accept('+')) lhs = binary(NodeKind::add, std::move(lhs), term());
      else if (accept('-')) lhs = binary(NodeKind::subtract, std::move(lhs), term());
      else return lhs;
    }
  }

  Expression term() {
    Expression lhs = power();
    for (;;) {
      if (accept('*')) lhs = binary(NodeKind::multiply, std::move(lhs), power());
      else if (accept('/')) lhs = binary(NodeKind::divide, std::move(lhs), power());
      else return lhs;
    }
  }

  Expression power() {
    Expression base = unary();
    if (accept('^')) return binary(NodeKind::power, std::move(base), power());
    return base;
  }

  Expression unary() {
    if (accept('-')) {
      Expression e;
      e.kind = NodeKind::negate;
      e.args.push_back(unary());
      return e;
    }
    return primary();
  }

  Expression primary() {
    skip();
    if (pos_ == s_.size()) fail("unexpected end of input", kOperand);
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expression e = expr();
      if (!accept(')')) fail("missing ')'", {"')'", "operator"});
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected '") + c + "'", kOperand);
  }

  Expression number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t q = pos_ + 1;
      if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
      if (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) {
        pos_ = q;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    Expression e;
    e.kind = NodeKind::number;
    const auto res = std::from_chars(s_.data() + start, s_.data() + pos_, e.value);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_ || !std::isfinite(e.value)) {
      pos_ = start;
      fail("malformed number", {"number"});
    }
    return e;
  }

  Expression identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    const std::string name = s_.substr(start, pos_ - start);
    Expression e;
    e.name = name;
    if (is_variable(name)) {
      e.kind = NodeKind::variable;
      return e;
    }
    if (name == "pi") {
      e.kind = NodeKind::constant;
      e.value = std::numbers::pi;
      return e;
    }
    const FunctionInfo* fn = find_function(name);
    if (!fn) {
      pos_ = start;
      fail("unknown identifier '" + name + "'", {"x", "y", "t", "pi", "function name"});
    }
    e.kind = NodeKind::call;
    if (!accept('(')) fail("expected '(' after " + name, {"'('"});
    if (!accept(')')) {
      do {
        e.args.push_back(expr());
      } while (accept(','));
      if (!accept(')')) fail("missing ')' in call to " + name, {"','", "')'"});
    }
    if (static_cast<int>(e.args.size()) != fn->arity) {
      std::ostringstream os;
      os << name << " takes " << fn->arity << " argument(s), got " << e.args.size();
      pos_ = start;
      fail(os.str(), {std::to_string(fn->arity) + " argument(s)"});
    }
    return e;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw EvalError(std::string("non-finite result in ") + what);
  return v;
}

double lookup(const Expression& e, const Env& env) {
  const std::optional<double>* v = nullptr;
  if (e.name == "x") v = &env.x;
  else if (e.name == "y") v = &env.y;
  else v = &env.t;
  if (!v->has_value()) throw EvalError("unbound variable '" + e.name + "'");
  return **v;
}

double power_of(double a, double b) {
  if (a == 0.0 && b < 0.0) throw EvalError("0 raised to a negative power");
  if (a < 0.0 && b != std::floor(b)) throw EvalError("negative base with non-integer exponent");
  return checked(std::pow(a, b), "^");
}

}  // namespace

ParseError::ParseError(const std::string& message, std::size_t offset, std::vector<std::string> expected)
    : ConfigError(message), offset_(offset), expected_(std::move(expected)) {}

Expression parse_expression(const std::string& text) { return Parser(text).parse(); }

double eval_expression(const Expression& e, const Env& env) {
  auto arg = [&](std::size_t k) { return eval_expression(e.args[k], env); };
  switch (e.kind) {
    case NodeKind::number:
    case NodeKind::constant:
      return e.value;
    case NodeKind::variable:
      return lookup(e, env);
    case NodeKind::negate:
      return -arg(0);
    case NodeKind::add:
      return checked(arg(0) + arg(1), "+");
    case NodeKind::subtract:
      return checked(arg(0) - arg(1), "-");
    case NodeKind::multiply:
      return checked(arg(0) * arg(1), "*");
    case NodeKind::divide: {
      const double a = arg(0);
      const double b = arg(1);
      if (b == 0.0) throw EvalError("division by zero");
      return checked(a / b, "/");
    }
    case NodeKind::power:
      return power_of(arg(0), arg(1));
    case NodeKind::call: {
      if (e.name == "abs") return std::abs(arg(0));
      if (e.name == "pos") return std::max(arg(0), 0.0);
      if (e.name == "sqrt") {
        const double a = arg(0);
        if (a < 0.0) throw EvalError("sqrt of a negative number");
        return std::sqrt(a);
      }
      if (e.name == "min") return std::min(arg(0), arg(1));
      if (e.name == "max") return std::max(arg(0), arg(1));
      return power_of(arg(0), arg(1));
    }
  }
  throw EvalError("corrupt expression tree");
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string to_string(const Expression& e) {
  switch (e.kind) {
    case NodeKind::number:
      return format_number(e.value);
    case NodeKind::variable:
    case NodeKind::constant:
      return e.name;
    case NodeKind::negate:
      return "(-" + to_string(e.args[0]) + ")";
    case NodeKind::call: {
      std::string s = e.name + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) s += (i ? ", " : "") + to_string(e.args[i]);
      return s + ")";
    }
    default:
      break;
  }
  const char* op = e.kind == NodeKind::add        ? " + "
                   : e.kind == NodeKind::subtract ? " - "
                   : e.kind == NodeKind::multiply ? " * "
                   : e.kind == NodeKind::divide   ? " / "
                                                  : " ^ ";
  return "(" + to_string(e.args[0]) + op + to_string(e.args[1]) + ")";
}

std::set<std::string> free_variables(const Expression& e) {
  std::set<std::string> out;
  if (e.kind == NodeKind::variable) out.insert(e.name);
  for (const auto& a : e.args) out.merge(free_variables(a));
  return out;
}

}  // namespace plap::cli
