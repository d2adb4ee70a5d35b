#ifndef STEPGRADE_CONSTANTS_HPP
#define STEPGRADE_CONSTANTS_HPP

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "stepgrade/expr.hpp"
#include "stepgrade/latex.hpp"
#include "stepgrade/units.hpp"

namespace stepgrade {

class ConstantsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symbol replacements applied before equivalence trials.
///
/// Expression-valued entries are substituted first, then numeric ones; each
/// in a single non-recursive pass. No replacement expression may mention a
/// symbol that is itself a key, which keeps the single pass well defined.
class ConstantsMap {
 public:
  void set_expression(const std::string& symbol, Expr replacement) {
    std::string key = canonical_key(symbol);
    auto mentioned = free_variables(replacement);
    if (mentioned.contains(key)) throw ConstantsError("constant '" + key + "' refers to itself");
    for (const auto& m : mentioned) {
      if (is_key(m)) throw ConstantsError("replacement for '" + key + "' mentions constant '" + m + "'");
    }
    for (const auto& [other, expr] : expressions_) {
      if (free_variables(expr).contains(key)) {
        throw ConstantsError("replacement for '" + other + "' mentions constant '" + key + "'");
      }
    }
    values_.erase(key);
    expressions_.insert_or_assign(key, std::move(replacement));
  }

  void set_expression(const std::string& symbol, std::string_view latex, const UnitTable& units = UnitTable::defaults()) {
    set_expression(symbol, parse_expression(normalize_source(latex), units));
  }

  /// Numeric value, optionally in a unit (stored converted to SI).
  void set_value(const std::string& symbol, double value, std::string_view unit = {},
                 const UnitTable& units = UnitTable::defaults()) {
    if (!std::isfinite(value)) throw ConstantsError("constant '" + symbol + "' must be finite");
    std::string key = canonical_key(symbol);
    for (const auto& [other, expr] : expressions_) {
      if (free_variables(expr).contains(key)) {
        throw ConstantsError("replacement for '" + other + "' mentions constant '" + key + "'");
      }
    }
    Expr literal = unit.empty() ? Expr::number(std::fabs(value))
                                : Expr::unit_literal(std::fabs(value), std::string(unit), units.resolve(unit));
    expressions_.erase(key);
    values_.insert_or_assign(key, std::signbit(value) ? Expr::negate(std::move(literal)) : std::move(literal));
  }

  [[nodiscard]] bool empty() const { return expressions_.empty() && values_.empty(); }
  [[nodiscard]] std::size_t size() const { return expressions_.size() + values_.size(); }
  [[nodiscard]] const std::map<std::string, Expr>& expressions() const { return expressions_; }
  [[nodiscard]] const std::map<std::string, Expr>& values() const { return values_; }

  /// Deterministic text form, used to key memo tables.
  [[nodiscard]] std::string fingerprint() const {
    std::string out;
    for (const auto& [k, v] : expressions_) out += k + ":=" + to_latex(v) + ";";
    for (const auto& [k, v] : values_) out += k + ":" + to_latex(v) + ";";
    return out;
  }

  /// JSON object: symbol -> LaTeX string | number | {"value": number, "unit": string}.
  static ConstantsMap from_json(const nlohmann::json& j, const UnitTable& units = UnitTable::defaults()) {
    if (!j.is_object()) throw ConstantsError("constants file must hold a JSON object");
    ConstantsMap map;
    // Values first so that expression entries are checked against every key.
    for (const auto& [key, val] : j.items()) {
      if (val.is_number()) {
        map.set_value(key, val.get<double>(), {}, units);
      } else if (val.is_object()) {
        map.set_value(key, val.at("value").get<double>(), val.value("unit", std::string{}), units);
      }
    }
    for (const auto& [key, val] : j.items()) {
      if (val.is_string()) {
        map.set_expression(key, val.get<std::string>(), units);
      } else if (!val.is_number() && !val.is_object()) {
        throw ConstantsError("constant '" + key + "' must be a string, number, or {value, unit}");
      }
    }
    return map;
  }

  static ConstantsMap load(const std::string& path, const UnitTable& units = UnitTable::defaults()) {
    std::ifstream in(path);
    if (!in) throw ConstantsError("cannot open constants file '" + path + "'");
    return from_json(nlohmann::json::parse(in), units);
  }

  static const ConstantsMap& defaults();

 private:
  static std::string canonical_key(const std::string& symbol) {
    try {
      return canonical_symbol(normalize_source(symbol));
    } catch (const ParseError& e) {
      throw ConstantsError("bad constant name '" + symbol + "': " + e.what());
    }
  }

  bool is_key(const std::string& s) const { return expressions_.contains(s) || values_.contains(s); }

  std::map<std::string, Expr> expressions_;
  std::map<std::string, Expr> values_;
};

inline constexpr std::string_view kDefaultConstantsJson = R"({
  "\\pi": 3.141592653589793,
  "e": 2.718281828459045,
  "c_0": "\\frac{1}{\\sqrt{\\varepsilon_0 \\mu_0}}",
  "k": "\\frac{1}{4\\pi\\varepsilon_0}",
  "g": 9.8,
  "N_A": 6.02214076e23,
  "h": 6.62607015e-34,
  "\\hbar": 1.054571817e-34,
  "k_B": 1.380649e-23
})";

inline const ConstantsMap& ConstantsMap::defaults() {
  static const ConstantsMap map = from_json(nlohmann::json::parse(kDefaultConstantsJson));
  return map;
}

namespace detail {

inline Expr replace_symbols(const Expr& e, const std::map<std::string, Expr>& table) {
  if (e.is(ExprKind::Symbol)) {
    auto it = table.find(e.name());
    return it == table.end() ? e : it->second;
  }
  if (e.children().empty()) return e;
  std::vector<Expr> kids;
  kids.reserve(e.children().size());
  for (const Expr& c : e.children()) kids.push_back(replace_symbols(c, table));
  switch (e.kind()) {
    case ExprKind::Negate: return Expr::negate(std::move(kids[0]));
    case ExprKind::Sum: return Expr::sum(std::move(kids));
    case ExprKind::Product: return Expr::product(std::move(kids));
    case ExprKind::Quotient: return Expr::quotient(std::move(kids[0]), std::move(kids[1]));
    case ExprKind::Power: return Expr::power(std::move(kids[0]), std::move(kids[1]));
    case ExprKind::Function: return Expr::apply(e.function(), std::move(kids[0]));
    default: return e;
  }
}

}  // namespace detail

inline Expr substitute_constants(const Expr& e, const ConstantsMap& c) {
  return detail::replace_symbols(detail::replace_symbols(e, c.expressions()), c.values());
}

inline Formula substitute_constants(const Formula& f, const ConstantsMap& c) {
  if (c.empty()) return f;
  return Formula{substitute_constants(f.lhs, c), substitute_constants(f.rhs, c), f.relation};
}

}  // namespace stepgrade

#endif  // STEPGRADE_CONSTANTS_HPP
