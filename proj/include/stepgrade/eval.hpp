#ifndef STEPGRADE_EVAL_HPP
#define STEPGRADE_EVAL_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepgrade/expr.hpp"

namespace stepgrade {

using Assignment = std::map<std::string, double, std::less<>>;

namespace detail {

inline double apply_function(Function f, double x) {
  switch (f) {
    case Function::Sin: return std::sin(x);
    case Function::Cos: return std::cos(x);
    case Function::Tan: return std::tan(x);
    case Function::Exp: return std::exp(x);
    case Function::Ln: return x > 0 ? std::log(x) : std::nan("");
    case Function::Log: return x > 0 ? std::log10(x) : std::nan("");
    case Function::Sqrt: return x >= 0 ? std::sqrt(x) : std::nan("");
    case Function::Abs: return std::fabs(x);
  }
  return std::nan("");
}

inline double constant_value(NamedConstant c) {
  return c == NamedConstant::Pi ? std::numbers::pi : std::numbers::e;
}

}  // namespace detail

/// Numeric value of `e` under `env`. Domain errors produce NaN; a symbol
/// missing from `env` is a programming error and throws.
inline double evaluate(const Expr& e, const Assignment& env) {
  switch (e.kind()) {
    case ExprKind::Number: return e.value();
    case ExprKind::UnitLiteral: return e.si_magnitude();
    case ExprKind::Constant: return detail::constant_value(e.named_constant());
    case ExprKind::Symbol: {
      auto it = env.find(e.name());
      if (it == env.end()) throw std::out_of_range("no value for symbol " + e.name());
      return it->second;
    }
    case ExprKind::Negate: return -evaluate(e.child(0), env);
    case ExprKind::Sum: {
      double s = 0;
      for (const Expr& c : e.children()) s += evaluate(c, env);
      return s;
    }
    case ExprKind::Product: {
      double p = 1;
      for (const Expr& c : e.children()) p *= evaluate(c, env);
      return p;
    }
    case ExprKind::Quotient: return evaluate(e.child(0), env) / evaluate(e.child(1), env);
    case ExprKind::Power: return std::pow(evaluate(e.child(0), env), evaluate(e.child(1), env));
    case ExprKind::Function: return detail::apply_function(e.function(), evaluate(e.child(0), env));
  }
  return std::nan("");
}

/// Postfix program for a one-variable residual. Every subtree that does not
/// mention the variable is folded to a constant when the program is built.
class UnaryProgram {
 public:
  UnaryProgram() = default;

  /// Program for lhs - rhs as a function of `variable`, with all other
  /// symbols taken from `env`.
  static UnaryProgram residual(const Formula& f, const std::string& variable, const Assignment& env) {
    UnaryProgram p;
    p.emit_tree(f.lhs, variable, env);
    p.emit_tree(f.rhs, variable, env);
    p.push(Op{Code::Sub, 0, 0});
    return p;
  }

  static UnaryProgram of(const Expr& e, const std::string& variable, const Assignment& env) {
    UnaryProgram p;
    p.emit_tree(e, variable, env);
    return p;
  }

  [[nodiscard]] double operator()(double x) const {
    double stack[kMaxDepth];
    std::size_t sp = 0;
    for (const Op& op : ops_) {
      switch (op.code) {
        case Code::Const: stack[sp++] = op.imm; break;
        case Code::Var: stack[sp++] = x; break;
        case Code::Neg: stack[sp - 1] = -stack[sp - 1]; break;
        case Code::Add: {
          double s = 0;
          for (std::uint32_t k = 0; k < op.count; ++k) s += stack[sp - op.count + k];
          sp -= op.count;
          stack[sp++] = s;
          break;
        }
        case Code::Mul: {
          double s = 1;
          for (std::uint32_t k = 0; k < op.count; ++k) s *= stack[sp - op.count + k];
          sp -= op.count;
          stack[sp++] = s;
          break;
        }
        case Code::Sub: --sp; stack[sp - 1] -= stack[sp]; break;
        case Code::Div: --sp; stack[sp - 1] /= stack[sp]; break;
        case Code::Pow: --sp; stack[sp - 1] = std::pow(stack[sp - 1], stack[sp]); break;
        case Code::Fn: stack[sp - 1] = detail::apply_function(static_cast<Function>(op.count), stack[sp - 1]); break;
      }
    }
    return sp == 1 ? stack[0] : std::nan("");
  }

  /// True when the variable does not occur (the program is a constant).
  [[nodiscard]] bool is_constant() const { return !uses_variable_; }

 private:
  static constexpr std::size_t kMaxDepth = 256;

  enum class Code : std::uint8_t { Const, Var, Neg, Add, Mul, Sub, Div, Pow, Fn };

  struct Op {
    Code code;
    double imm;
    std::uint32_t count;
  };

  void push(Op op) {
    switch (op.code) {
      case Code::Const:
      case Code::Var: ++depth_; break;
      case Code::Add:
      case Code::Mul: depth_ -= op.count - 1; break;
      case Code::Sub:
      case Code::Div:
      case Code::Pow: --depth_; break;
      default: break;
    }
    if (depth_ > max_depth_) max_depth_ = depth_;
    if (max_depth_ > kMaxDepth) throw std::length_error("expression too deeply nested");
    ops_.push_back(op);
  }

  static bool mentions(const Expr& e, const std::string& v) {
    if (e.is(ExprKind::Symbol)) return e.name() == v;
    for (const Expr& c : e.children()) {
      if (mentions(c, v)) return true;
    }
    return false;
  }

  void emit_tree(const Expr& e, const std::string& v, const Assignment& env) {
    if (!mentions(e, v)) {
      push(Op{Code::Const, evaluate(e, env), 0});
      return;
    }
    uses_variable_ = true;
    switch (e.kind()) {
      case ExprKind::Symbol: push(Op{Code::Var, 0, 0}); return;
      case ExprKind::Negate:
        emit_tree(e.child(0), v, env);
        push(Op{Code::Neg, 0, 0});
        return;
      case ExprKind::Sum:
      case ExprKind::Product: {
        // Fold the variable-free operands into one constant.
        bool sum = e.is(ExprKind::Sum);
        double folded = sum ? 0.0 : 1.0;
        std::uint32_t n = 0;
        for (const Expr& c : e.children()) {
          if (mentions(c, v)) {
            emit_tree(c, v, env);
            ++n;
          } else {
            double x = evaluate(c, env);
            folded = sum ? folded + x : folded * x;
          }
        }
        if (n < e.children().size()) {
          push(Op{Code::Const, folded, 0});
          ++n;
        }
        if (n > 1) push(Op{sum ? Code::Add : Code::Mul, 0, n});
        return;
      }
      case ExprKind::Quotient:
        emit_tree(e.child(0), v, env);
        emit_tree(e.child(1), v, env);
        push(Op{Code::Div, 0, 0});
        return;
      case ExprKind::Power:
        emit_tree(e.child(0), v, env);
        emit_tree(e.child(1), v, env);
        push(Op{Code::Pow, 0, 0});
        return;
      case ExprKind::Function:
        emit_tree(e.child(0), v, env);
        push(Op{Code::Fn, 0, static_cast<std::uint32_t>(e.function())});
        return;
      default: push(Op{Code::Const, evaluate(e, env), 0}); return;
    }
  }

  std::vector<Op> ops_;
  std::size_t depth_ = 0;
  std::size_t max_depth_ = 0;
  bool uses_variable_ = false;
};

}  // namespace stepgrade

#endif  // STEPGRADE_EVAL_HPP
