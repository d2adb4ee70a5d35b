#ifndef STEPGRADE_EXPR_HPP
#define STEPGRADE_EXPR_HPP

#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stepgrade/units.hpp"

namespace stepgrade {

enum class ExprKind { Number, UnitLiteral, Symbol, Negate, Sum, Product, Quotient, Power, Function, Constant };

enum class Function { Sin, Cos, Tan, Exp, Ln, Log, Sqrt, Abs };

enum class NamedConstant { Pi, Euler };

inline std::string_view function_name(Function f) {
  switch (f) {
    case Function::Sin: return "sin";
    case Function::Cos: return "cos";
    case Function::Tan: return "tan";
    case Function::Exp: return "exp";
    case Function::Ln: return "ln";
    case Function::Log: return "log";
    case Function::Sqrt: return "sqrt";
    case Function::Abs: return "abs";
  }
  return "?";
}

/// Immutable expression tree with value semantics.
///
/// Sums and products always hold at least two children; the factories
/// collapse singletons and splice nested sums/products of the same kind.
/// Symbol names are canonical LaTeX spellings (e.g. "v_{0}", "\epsilon_{0}")
/// so printing a symbol is just emitting its name.
class Expr {
 public:
  static Expr number(double v) {
    Expr e(ExprKind::Number);
    e.value_ = v;
    return e;
  }

  static Expr unit_literal(double magnitude, std::string unit_id, UnitInfo info) {
    Expr e(ExprKind::UnitLiteral);
    e.value_ = magnitude;
    e.name_ = std::move(unit_id);
    e.unit_ = info;
    return e;
  }

  static Expr symbol(std::string name) {
    Expr e(ExprKind::Symbol);
    e.name_ = std::move(name);
    return e;
  }

  static Expr constant(NamedConstant c) {
    Expr e(ExprKind::Constant);
    e.constant_ = c;
    return e;
  }

  static Expr negate(Expr x) {
    Expr e(ExprKind::Negate);
    e.children_.push_back(std::move(x));
    return e;
  }

  static Expr sum(std::vector<Expr> terms) { return nary(ExprKind::Sum, std::move(terms)); }
  static Expr product(std::vector<Expr> factors) { return nary(ExprKind::Product, std::move(factors)); }

  static Expr quotient(Expr num, Expr den) {
    Expr e(ExprKind::Quotient);
    e.children_.push_back(std::move(num));
    e.children_.push_back(std::move(den));
    return e;
  }

  static Expr power(Expr base, Expr exponent) {
    Expr e(ExprKind::Power);
    e.children_.push_back(std::move(base));
    e.children_.push_back(std::move(exponent));
    return e;
  }

  static Expr apply(Function f, Expr arg) {
    Expr e(ExprKind::Function);
    e.function_ = f;
    e.children_.push_back(std::move(arg));
    return e;
  }

  [[nodiscard]] ExprKind kind() const { return kind_; }
  [[nodiscard]] bool is(ExprKind k) const { return kind_ == k; }

  /// Number value, or the raw (pre-conversion) magnitude of a unit literal.
  [[nodiscard]] double value() const { return value_; }
  /// Symbol name or unit id.
  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const UnitInfo& unit() const { return unit_; }
  [[nodiscard]] double si_magnitude() const { return value_ * unit_.factor; }
  [[nodiscard]] Function function() const { return function_; }
  [[nodiscard]] NamedConstant named_constant() const { return constant_; }
  [[nodiscard]] const std::vector<Expr>& children() const { return children_; }
  [[nodiscard]] const Expr& child(std::size_t i) const { return children_.at(i); }

  bool operator==(const Expr&) const = default;

 private:
  explicit Expr(ExprKind k) : kind_(k) {}

  static Expr nary(ExprKind k, std::vector<Expr> items) {
    if (items.empty()) throw std::invalid_argument("sum/product needs at least one operand");
    if (items.size() == 1) return std::move(items.front());
    Expr e(k);
    for (auto& item : items) {
      if (item.kind_ == k) {
        for (auto& c : item.children_) e.children_.push_back(std::move(c));
      } else {
        e.children_.push_back(std::move(item));
      }
    }
    return e;
  }

  ExprKind kind_;
  double value_ = 0.0;
  std::string name_;
  UnitInfo unit_{};
  Function function_ = Function::Sin;
  NamedConstant constant_ = NamedConstant::Pi;
  std::vector<Expr> children_;
};

enum class Relation { Equal, Approx, Less, LessEqual, Greater, GreaterEqual };

inline std::string_view relation_text(Relation r) {
  switch (r) {
    case Relation::Equal: return "=";
    case Relation::Approx: return "\\approx";
    case Relation::Less: return "<";
    case Relation::LessEqual: return "\\le";
    case Relation::Greater: return ">";
    case Relation::GreaterEqual: return "\\ge";
  }
  return "=";
}

inline bool is_equality(Relation r) { return r == Relation::Equal || r == Relation::Approx; }

struct Formula {
  Expr lhs;
  Expr rhs;
  Relation relation = Relation::Equal;

  bool operator==(const Formula&) const = default;
};

// ---------------------------------------------------------------------------
// Canonical printing. The output is accepted by parse_formula and reparses to
// a structurally identical tree.

namespace detail {

inline std::string format_number(double v) {
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  if (res.ec != std::errc{}) return std::to_string(v);
  return std::string(buf, res.ptr);
}

enum class Slot { Top, SumTail, Factor, PowerBase };

inline void print(const Expr& e, std::string& out, Slot slot);

inline void print_parenthesized(const Expr& e, std::string& out) {
  out += '(';
  print(e, out, Slot::Top);
  out += ')';
}

inline void print(const Expr& e, std::string& out, Slot slot) {
  switch (e.kind()) {
    case ExprKind::Number:
      if (slot != Slot::Top && std::signbit(e.value())) {
        out += '(' + format_number(e.value()) + ')';
      } else {
        out += format_number(e.value());
      }
      return;
    case ExprKind::UnitLiteral: {
      std::string text = format_number(e.value()) + "\\unit{" + e.name() + "}";
      if (slot == Slot::PowerBase) text = '(' + text + ')';
      out += text;
      return;
    }
    case ExprKind::Symbol:
      out += e.name();
      return;
    case ExprKind::Constant:
      out += e.named_constant() == NamedConstant::Pi ? "\\pi" : "e";
      return;
    case ExprKind::Negate:
      if (slot == Slot::Top) {
        out += '-';
        print(e.child(0), out, Slot::SumTail);
      } else {
        print_parenthesized(e, out);
      }
      return;
    case ExprKind::Sum: {
      if (slot != Slot::Top) {
        print_parenthesized(e, out);
        return;
      }
      bool first = true;
      for (const Expr& t : e.children()) {
        if (first) {
          print(t, out, Slot::Top);
        } else if (t.is(ExprKind::Negate)) {
          out += " - ";
          print(t.child(0), out, Slot::SumTail);
        } else {
          out += " + ";
          print(t, out, Slot::SumTail);
        }
        first = false;
      }
      return;
    }
    case ExprKind::Product: {
      if (slot == Slot::Factor || slot == Slot::PowerBase) {
        print_parenthesized(e, out);
        return;
      }
      bool first = true;
      for (const Expr& f : e.children()) {
        if (!first) out += " \\cdot ";
        print(f, out, Slot::Factor);
        first = false;
      }
      return;
    }
    case ExprKind::Quotient:
      if (slot == Slot::PowerBase) {
        print_parenthesized(e, out);
        return;
      }
      out += "\\frac{";
      print(e.child(0), out, Slot::Top);
      out += "}{";
      print(e.child(1), out, Slot::Top);
      out += '}';
      return;
    case ExprKind::Power:
      if (slot == Slot::PowerBase) {
        print_parenthesized(e, out);
        return;
      }
      print(e.child(0), out, Slot::PowerBase);
      out += "^{";
      print(e.child(1), out, Slot::Top);
      out += '}';
      return;
    case ExprKind::Function: {
      std::string text;
      switch (e.function()) {
        case Function::Sqrt:
          text = "\\sqrt{";
          print(e.child(0), text, Slot::Top);
          text += '}';
          break;
        case Function::Abs:
          text = "\\lvert ";
          print(e.child(0), text, Slot::Top);
          text += " \\rvert";
          break;
        default:
          text = "\\" + std::string(function_name(e.function())) + "(";
          print(e.child(0), text, Slot::Top);
          text += ')';
      }
      if (slot == Slot::PowerBase) text = '(' + text + ')';
      out += text;
      return;
    }
  }
}

}  // namespace detail

inline std::string to_latex(const Expr& e) {
  std::string out;
  detail::print(e, out, detail::Slot::Top);
  return out;
}

inline std::string to_latex(const Formula& f) {
  return to_latex(f.lhs) + " " + std::string(relation_text(f.relation)) + " " + to_latex(f.rhs);
}

// ---------------------------------------------------------------------------

inline void collect_symbols(const Expr& e, std::set<std::string>& out) {
  if (e.is(ExprKind::Symbol)) {
    out.insert(e.name());
    return;
  }
  for (const Expr& c : e.children()) collect_symbols(c, out);
}

inline std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  collect_symbols(e, out);
  return out;
}

/// All symbols of both sides; pi and e are named constants, not symbols.
inline std::set<std::string> free_variables(const Formula& f) {
  std::set<std::string> out;
  collect_symbols(f.lhs, out);
  collect_symbols(f.rhs, out);
  return out;
}

}  // namespace stepgrade

#endif  // STEPGRADE_EXPR_HPP
