#ifndef STEPGRADE_LATEX_HPP
#define STEPGRADE_LATEX_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stepgrade/expr.hpp"
#include "stepgrade/units.hpp"

namespace stepgrade {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " (at offset " + std::to_string(position) + ")"), position_(position) {}

  [[nodiscard]] std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// ---------------------------------------------------------------------------
// Source normalization

namespace detail {

inline bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Position just past "\name" when text[pos..] starts with that command and the
// command is not a prefix of a longer one ("\left" vs "\leftarrow").
inline std::optional<std::size_t> match_command(std::string_view text, std::size_t pos, std::string_view name) {
  if (text.substr(pos).starts_with(name)) {
    std::size_t end = pos + name.size();
    bool word = is_letter(name.back());
    if (!word || end >= text.size() || !is_letter(text[end])) return end;
  }
  return std::nullopt;
}

inline std::size_t matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '\\') {
      ++i;
      continue;
    }
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

inline constexpr std::array<std::string_view, 14> kDroppedCommands = {
    "\\left", "\\right", "\\bigl", "\\bigr", "\\Bigl", "\\Bigr", "\\biggl", "\\biggr",
    "\\Biggl", "\\Biggr", "\\big", "\\Big", "\\displaystyle", "\\nonumber"};

inline constexpr std::array<std::string_view, 8> kSpacingCommands = {
    "\\qquad", "\\quad", "\\,", "\\;", "\\!", "\\:", "\\ ", "~"};

inline constexpr std::array<std::string_view, 8> kStyleCommands = {
    "\\mathrm", "\\mathit", "\\mathbf", "\\text", "\\textrm", "\\textit", "\\boldsymbol", "\\mathsf"};

inline constexpr std::array<std::string_view, 10> kEnvironmentMarkers = {
    "\\begin{aligned}", "\\end{aligned}", "\\begin{aligned*}", "\\end{aligned*}",
    "\\begin{align}",   "\\end{align}",   "\\begin{align*}",   "\\end{align*}",
    "\\begin{split}",   "\\end{split}"};

inline std::string normalize_once(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    bool handled = false;
    for (auto env : kEnvironmentMarkers) {
      if (raw.substr(i).starts_with(env)) {
        out += ' ';
        i += env.size();
        handled = true;
        break;
      }
    }
    if (handled) continue;
    if (raw.substr(i).starts_with("\\\\")) {
      out += ' ';
      i += 2;
      continue;
    }
    if (raw[i] == '&') {
      ++i;
      continue;
    }
    for (auto cmd : kSpacingCommands) {
      if (auto end = match_command(raw, i, cmd)) {
        out += ' ';
        i = *end;
        handled = true;
        break;
      }
    }
    if (handled) continue;
    for (auto cmd : kDroppedCommands) {
      if (auto end = match_command(raw, i, cmd)) {
        i = *end;
        handled = true;
        break;
      }
    }
    if (handled) continue;
    for (auto cmd : kStyleCommands) {
      if (auto end = match_command(raw, i, cmd)) {
        std::size_t j = *end;
        while (j < raw.size() && raw[j] == ' ') ++j;
        if (j < raw.size() && raw[j] == '{') {
          std::size_t close = matching_brace(raw, j);
          if (close != std::string_view::npos) {
            out.append(raw.substr(j + 1, close - j - 1));
            i = close + 1;
            handled = true;
            break;
          }
        }
        i = *end;
        handled = true;
        break;
      }
    }
    if (handled) continue;
    if (raw[i] == '\\' && i + 1 < raw.size()) {
      // Copy any other command (or escaped char) whole so that e.g. "\." is
      // never split by the punctuation rules below.
      std::size_t j = i + 1;
      if (is_letter(raw[j])) {
        while (j < raw.size() && is_letter(raw[j])) ++j;
      } else {
        ++j;
      }
      out.append(raw.substr(i, j - i));
      i = j;
      continue;
    }
    out += raw[i++];
  }

  // Trim and drop terminal punctuation.
  auto is_trailing_junk = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '.' || c == ',' || c == ';' || c == ':';
  };
  while (!out.empty()) {
    char c = out.back();
    if (!is_trailing_junk(c)) break;
    // A trailing punctuation char preceded by a backslash is a command.
    if (!std::isspace(static_cast<unsigned char>(c)) && out.size() >= 2 && out[out.size() - 2] == '\\') break;
    out.pop_back();
  }
  std::size_t lead = 0;
  while (lead < out.size() && std::isspace(static_cast<unsigned char>(out[lead]))) ++lead;
  return out.substr(lead);
}

}  // namespace detail

/// Strip presentation-only LaTeX (sizing delimiters, font wrappers, spacing,
/// aligned environments) and terminal punctuation. Idempotent.
inline std::string normalize_source(std::string_view raw) {
  std::string current(raw);
  for (;;) {
    std::string next = detail::normalize_once(current);
    if (next == current) return next;
    current = std::move(next);
  }
}

/// Contents of every $$...$$ block and $...$ inline span, in document order.
/// An unterminated delimiter ends the scan.
inline std::vector<std::string> extract_formulas(std::string_view text) {
  std::vector<std::string> out;
  auto push = [&](std::string_view body) {
    body = detail::trim(body);
    if (!body.empty()) out.emplace_back(body);
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      i += 2;
      continue;
    }
    if (text[i] != '$') {
      ++i;
      continue;
    }
    bool block = i + 1 < text.size() && text[i + 1] == '$';
    std::size_t open = i + (block ? 2 : 1);
    std::size_t j = open;
    std::size_t close = std::string_view::npos;
    while (j < text.size()) {
      if (text[j] == '\\') {
        j += 2;
        continue;
      }
      if (text[j] == '$') {
        close = j;
        break;
      }
      ++j;
    }
    if (close == std::string_view::npos) break;
    if (block) {
      if (close + 1 >= text.size() || text[close + 1] != '$') {
        // "$$ ... $" never closes properly; resume after the stray '$'.
        i = close + 1;
        continue;
      }
      push(text.substr(open, close - open));
      i = close + 2;
    } else {
      if (close + 1 < text.size() && text[close + 1] == '$') {
        // Inline span runs into a block opener: treat the '$' as stray.
        i = open;
        continue;
      }
      push(text.substr(open, close - open));
      i = close + 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace detail {

enum class TokKind { Number, Letter, Command, Punct, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;  // digits, the letter, command name without '\', or the punctuation char
  std::size_t pos = 0;
  std::size_t end = 0;
};

struct Utf8Alias {
  std::string_view utf8;
  TokKind kind;
  std::string_view text;
};

inline constexpr std::array<Utf8Alias, 8> kUtf8Aliases = {{
    {"≈", TokKind::Command, "approx"},
    {"≤", TokKind::Command, "le"},
    {"≥", TokKind::Command, "ge"},
    {"·", TokKind::Command, "cdot"},
    {"×", TokKind::Command, "times"},
    {"−", TokKind::Punct, "-"},
    {"π", TokKind::Command, "pi"},
    {" ", TokKind::Punct, " "},
}};

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> toks;
  std::size_t i = 0;
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      bool dot = false;
      while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || (src[j] == '.' && !dot))) {
        if (src[j] == '.') {
          if (j + 1 >= src.size() || !std::isdigit(static_cast<unsigned char>(src[j + 1]))) break;
          dot = true;
        }
        ++j;
      }
      t.kind = TokKind::Number;
      t.text = std::string(src.substr(i, j - i));
      i = j;
    } else if (is_letter(c)) {
      t.kind = TokKind::Letter;
      t.text = std::string(1, c);
      ++i;
    } else if (c == '\\') {
      std::size_t j = i + 1;
      if (j < src.size() && is_letter(src[j])) {
        while (j < src.size() && is_letter(src[j])) ++j;
        t.kind = TokKind::Command;
        t.text = std::string(src.substr(i + 1, j - i - 1));
      } else if (j < src.size()) {
        ++j;
        t.kind = TokKind::Command;
        t.text = std::string(1, src[i + 1]);
      } else {
        throw ParseError("dangling backslash", i);
      }
      i = j;
    } else if (static_cast<unsigned char>(c) >= 0x80) {
      bool matched = false;
      for (const auto& alias : kUtf8Aliases) {
        if (src.substr(i).starts_with(alias.utf8)) {
          i += alias.utf8.size();
          matched = true;
          if (alias.text == " ") break;
          t.kind = alias.kind;
          t.text = std::string(alias.text);
          t.end = i;
          toks.push_back(t);
          break;
        }
      }
      if (!matched) throw ParseError("unsupported character", i);
      continue;
    } else {
      t.kind = TokKind::Punct;
      t.text = std::string(1, c);
      ++i;
    }
    t.end = i;
    toks.push_back(std::move(t));
  }
  Token end;
  end.pos = end.end = src.size();
  toks.push_back(end);
  return toks;
}

struct GreekAlias {
  std::string_view from;
  std::string_view to;
};

inline constexpr std::array<GreekAlias, 6> kGreekAliases = {{
    {"varepsilon", "epsilon"}, {"vartheta", "theta"}, {"varphi", "phi"},
    {"varrho", "rho"},         {"varsigma", "sigma"}, {"varpi", "pi"},
}};

inline constexpr std::array<std::string_view, 47> kSymbolCommands = {
    "alpha", "beta",  "gamma",   "delta",   "epsilon", "varepsilon", "zeta",   "eta",   "theta", "vartheta",
    "iota",  "kappa", "lambda",  "mu",      "nu",      "xi",         "omicron", "rho",  "varrho", "sigma",
    "varsigma", "tau", "upsilon", "phi",    "varphi",  "chi",        "psi",    "omega", "varpi", "Gamma",
    "Delta", "Theta", "Lambda",  "Xi",      "Pi",      "Sigma",      "Upsilon", "Phi",  "Psi",   "Omega",
    "hbar",  "ell",   "Alpha",   "Beta",    "Epsilon", "Eta",        "Tau"};

inline constexpr std::array<std::string_view, 9> kDecorations = {
    "bar", "hat", "vec", "dot", "ddot", "tilde", "overline", "widehat", "widetilde"};

inline constexpr std::array<std::string_view, 24> kUnsupportedCommands = {
    "int",   "iint",  "iiint", "oint",  "partial", "nabla", "sum",    "prod",
    "lim",   "infty", "mathbb", "begin", "end",    "pm",    "mp",     "neq",
    "ne",    "to",    "rightarrow", "Rightarrow", "propto", "sim", "operatorname", "mathcal"};

inline std::string fold_alias(std::string_view name) {
  for (const auto& a : kGreekAliases) {
    if (name == a.from) return std::string(a.to);
  }
  return std::string(name);
}

// Canonical spelling of raw LaTeX inside a subscript or decoration: whitespace
// removed, redundant outer braces dropped, Greek aliases folded.
inline std::string canonical_fragment(std::string_view raw) {
  std::string s;
  for (char c : raw) {
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  }
  while (s.size() >= 2 && s.front() == '{' && matching_brace(s, 0) == s.size() - 1) {
    s = s.substr(1, s.size() - 2);
  }
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '\\' && i + 1 < s.size() && is_letter(s[i + 1])) {
      std::size_t j = i + 1;
      while (j < s.size() && is_letter(s[j])) ++j;
      out += '\\';
      out += fold_alias(std::string_view(s).substr(i + 1, j - i - 1));
      i = j;
    } else {
      out += s[i++];
    }
  }
  return out;
}

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& arr, std::string_view s) {
  return std::find(arr.begin(), arr.end(), s) != arr.end();
}

inline std::optional<Function> function_command(std::string_view name) {
  if (name == "sin") return Function::Sin;
  if (name == "cos") return Function::Cos;
  if (name == "tan") return Function::Tan;
  if (name == "exp") return Function::Exp;
  if (name == "ln") return Function::Ln;
  if (name == "log") return Function::Log;
  return std::nullopt;
}

inline std::optional<Relation> relation_token(const Token& t) {
  if (t.kind == TokKind::Punct) {
    if (t.text == "=") return Relation::Equal;
    if (t.text == "<") return Relation::Less;
    if (t.text == ">") return Relation::Greater;
  } else if (t.kind == TokKind::Command) {
    if (t.text == "approx" || t.text == "simeq") return Relation::Approx;
    if (t.text == "le" || t.text == "leq" || t.text == "leqslant") return Relation::LessEqual;
    if (t.text == "ge" || t.text == "geq" || t.text == "geqslant") return Relation::GreaterEqual;
    if (t.text == "lt") return Relation::Less;
    if (t.text == "gt") return Relation::Greater;
  }
  return std::nullopt;
}

class Parser {
 public:
  Parser(std::string_view src, const UnitTable& units) : src_(src), units_(units), toks_(tokenize(src)) {}

  std::vector<Formula> formulas() {
    std::vector<Expr> sides;
    std::vector<Relation> rels;
    sides.push_back(expression());
    while (auto rel = relation_token(peek())) {
      ++pos_;
      rels.push_back(*rel);
      sides.push_back(expression());
    }
    expect_end();
    if (rels.empty()) throw ParseError("formula has no relation", 0);
    std::vector<Formula> out;
    for (std::size_t i = 0; i < rels.size(); ++i) out.push_back(Formula{sides[i], sides[i + 1], rels[i]});
    return out;
  }

  Expr lone_expression() {
    Expr e = expression();
    expect_end();
    return e;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  bool at_end() const { return peek().kind == TokKind::End; }

  bool is_punct(const Token& t, char c) const { return t.kind == TokKind::Punct && t.text.size() == 1 && t.text[0] == c; }
  bool is_command(const Token& t, std::string_view name) const { return t.kind == TokKind::Command && t.text == name; }

  bool eat_punct(char c) {
    if (is_punct(peek(), c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().pos); }

  void expect_punct(char c) {
    if (!eat_punct(c)) fail(std::string("expected '") + c + "'");
  }

  void expect_end() {
    if (!at_end()) {
      const Token& t = peek();
      fail("unexpected " + describe(t));
    }
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case TokKind::Command: return "command \\" + t.text;
      case TokKind::End: return "end of formula";
      default: return "'" + t.text + "'";
    }
  }

  // expr := ('+'|'-')? term (('+'|'-') term)*
  Expr expression() {
    if (at_end() || relation_token(peek())) fail("expected expression");
    std::vector<Expr> terms;
    if (eat_punct('-')) {
      terms.push_back(Expr::negate(term()));
    } else {
      eat_punct('+');
      terms.push_back(term());
    }
    for (;;) {
      if (eat_punct('+')) {
        terms.push_back(term());
      } else if (eat_punct('-')) {
        terms.push_back(Expr::negate(term()));
      } else {
        break;
      }
    }
    return Expr::sum(std::move(terms));
  }

  // term := signed (('\cdot'|'\times'|'*'|'/'|'\div') signed)*, left associative
  Expr term() {
    Expr acc = signed_factor();
    for (;;) {
      const Token& t = peek();
      if (is_punct(t, '*') || is_command(t, "cdot") || is_command(t, "times")) {
        ++pos_;
        acc = Expr::product({std::move(acc), signed_factor()});
      } else if (is_punct(t, '/') || is_command(t, "div")) {
        ++pos_;
        acc = Expr::quotient(std::move(acc), signed_factor());
      } else {
        return acc;
      }
    }
  }

  Expr signed_factor() {
    if (eat_punct('-')) return Expr::negate(signed_factor());
    if (eat_punct('+')) return signed_factor();
    return juxtaposition(false);
  }

  // Implicit multiplication. Inside a function argument written without
  // parentheses, the run stops at the next function command so that
  // "\sin\theta\cos\theta" reads as sin(theta) cos(theta).
  Expr juxtaposition(bool function_argument) {
    std::vector<Expr> factors;
    factors.push_back(power());
    while (starts_primary(peek())) {
      if (function_argument && is_function_start(peek())) break;
      factors.push_back(power());
    }
    return Expr::product(std::move(factors));
  }

  bool is_function_start(const Token& t) const {
    return t.kind == TokKind::Command && (function_command(t.text) || t.text == "sqrt");
  }

  bool starts_primary(const Token& t) const {
    switch (t.kind) {
      case TokKind::Number:
      case TokKind::Letter: return true;
      case TokKind::Command:
        if (t.text == "vert") return abs_depth_ == 0;
        return !relation_token(t) && t.text != "cdot" && t.text != "times" && t.text != "div" && t.text != "rvert" &&
               t.text != "}";
      case TokKind::Punct:
        if (t.text == "(" || t.text == "[" || t.text == "{") return true;
        if (t.text == "|") return abs_depth_ == 0;
        return false;
      case TokKind::End: return false;
    }
    return false;
  }

  // power := primary ('^' argument)?
  Expr power() {
    Expr base = primary();
    if (eat_punct('^')) {
      Expr exponent = script_argument();
      if (is_punct(peek(), '^')) fail("ambiguous double superscript");
      return Expr::power(std::move(base), std::move(exponent));
    }
    return base;
  }

  // A TeX macro argument: a braced group or a single token. A multi-digit
  // number contributes only its first digit ("x^23" is x^2 times 3).
  Expr script_argument() {
    const Token& t = peek();
    if (is_punct(t, '{')) {
      ++pos_;
      Expr e = expression();
      expect_punct('}');
      return e;
    }
    if (t.kind == TokKind::Number) return Expr::number(take_leading_digit());
    if (is_punct(t, '-')) {
      ++pos_;
      return Expr::negate(script_argument());
    }
    if (t.kind == TokKind::Letter || t.kind == TokKind::Command) return bare_atom();
    fail("expected superscript argument");
  }

  double take_leading_digit() {
    Token& t = toks_[pos_];
    if (t.text.size() == 1 || t.text[0] == '.') {
      ++pos_;
      return std::stod(t.text);
    }
    double d = t.text[0] - '0';
    t.text.erase(0, 1);
    ++t.pos;
    return d;
  }

  // Single letter / Greek / constant, no trailing superscript.
  Expr bare_atom() {
    const Token& t = peek();
    if (t.kind == TokKind::Letter || is_symbol_command(t) || is_command(t, "pi")) return symbol_or_constant();
    fail("unexpected " + describe(t));
  }

  bool is_symbol_command(const Token& t) const {
    return t.kind == TokKind::Command && (contains(kSymbolCommands, t.text) || contains(kDecorations, t.text));
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokKind::Number: {
        double v = std::stod(t.text);
        ++pos_;
        if (is_command(peek(), "unit")) return unit_annotation(v);
        return Expr::number(v);
      }
      case TokKind::Letter: return symbol_or_constant();
      case TokKind::Punct: {
        if (eat_punct('(')) {
          Expr e = expression();
          expect_punct(')');
          return e;
        }
        if (eat_punct('[')) {
          Expr e = expression();
          expect_punct(']');
          return e;
        }
        if (eat_punct('{')) {
          Expr e = expression();
          expect_punct('}');
          return e;
        }
        if (is_punct(t, '|') && abs_depth_ == 0) {
          ++pos_;
          ++abs_depth_;
          Expr e = expression();
          --abs_depth_;
          expect_punct('|');
          return Expr::apply(Function::Abs, std::move(e));
        }
        fail("unexpected " + describe(t));
      }
      case TokKind::Command: return command_primary();
      case TokKind::End: fail("unexpected end of formula");
    }
    fail("unexpected token");
  }

  Expr command_primary() {
    const Token& t = peek();
    const std::string name = t.text;
    if (name == "pi" || is_symbol_command(t)) {
      if (name == "delta" && is_punct(peek(1), '(')) fail("unsupported command \\delta (Dirac delta)");
      return symbol_or_constant();
    }
    if (name == "frac" || name == "dfrac" || name == "tfrac") {
      ++pos_;
      if (looks_like_derivative()) fail("unsupported derivative notation \\frac{d...}{d...}");
      Expr num = frac_argument();
      Expr den = frac_argument();
      return Expr::quotient(std::move(num), std::move(den));
    }
    if (name == "sqrt") {
      ++pos_;
      std::optional<Expr> index;
      if (eat_punct('[')) {
        index = expression();
        expect_punct(']');
      }
      Expr arg = frac_argument();
      if (index) return Expr::power(std::move(arg), Expr::quotient(Expr::number(1), std::move(*index)));
      return Expr::apply(Function::Sqrt, std::move(arg));
    }
    if (auto fn = function_command(name)) {
      ++pos_;
      std::optional<Expr> exponent;
      if (eat_punct('^')) exponent = script_argument();
      Expr arg = function_argument();
      Expr applied = Expr::apply(*fn, std::move(arg));
      if (exponent) return Expr::power(std::move(applied), std::move(*exponent));
      return applied;
    }
    if (name == "lvert" || name == "vert") {
      ++pos_;
      ++abs_depth_;
      Expr e = expression();
      --abs_depth_;
      if (!is_command(peek(), "rvert") && !is_command(peek(), "vert")) fail("expected \\rvert");
      ++pos_;
      return Expr::apply(Function::Abs, std::move(e));
    }
    if (name == "unit") return unit_annotation(1.0);
    if (name == "{") {
      ++pos_;
      Expr e = expression();
      if (!is_command(peek(), "}")) fail("expected \\}");
      ++pos_;
      return e;
    }
    if (contains(kUnsupportedCommands, name)) fail("unsupported command \\" + name);
    fail("unknown command \\" + name);
  }

  Expr function_argument() {
    if (is_punct(peek(), '(')) return power();
    return juxtaposition(true);
  }

  Expr frac_argument() {
    const Token& t = peek();
    if (is_punct(t, '{')) {
      ++pos_;
      Expr e = expression();
      expect_punct('}');
      return e;
    }
    if (t.kind == TokKind::Number) return Expr::number(take_leading_digit());
    if (t.kind == TokKind::Letter || t.kind == TokKind::Command) return bare_atom();
    fail("expected \\frac argument");
  }

  // \frac{d...}{d...}, \frac{dv}{dt}, \frac{d}{dr}, \frac{d^2x}{dt^2}
  bool looks_like_derivative() const {
    auto group_starts_with_d = [&](std::size_t at) -> std::optional<std::size_t> {
      const Token& open = peek(at);
      if (!is_punct(open, '{')) return std::nullopt;
      const Token& first = peek(at + 1);
      if (!(first.kind == TokKind::Letter && first.text == "d") && !is_command(first, "partial")) return std::nullopt;
      // d_o, d^2 as plain symbols
      if (is_punct(peek(at + 2), '_') || is_punct(peek(at + 2), '^')) return std::nullopt;
      int depth = 0;
      for (std::size_t k = at;; ++k) {
        const Token& tk = peek(k);
        if (tk.kind == TokKind::End) return std::nullopt;
        if (is_punct(tk, '{')) ++depth;
        if (is_punct(tk, '}') && --depth == 0) return k + 1;
      }
    };
    auto after_num = group_starts_with_d(0);
    if (!after_num) return false;
    return group_starts_with_d(*after_num).has_value();
  }

  Expr unit_annotation(double magnitude) {
    const Token& cmd = peek();
    ++pos_;
    const Token& open = peek();
    if (!is_punct(open, '{')) fail("expected '{' after \\unit");
    std::size_t close_pos = matching_brace(src_, open.pos);
    if (close_pos == std::string_view::npos) fail("unbalanced \\unit braces");
    std::string id(detail::trim(src_.substr(open.pos + 1, close_pos - open.pos - 1)));
    UnitInfo info;
    try {
      info = units_.resolve(id);
    } catch (const UnitError& e) {
      throw ParseError(e.what(), cmd.pos);
    }
    while (!at_end() && peek().pos <= close_pos) ++pos_;
    return Expr::unit_literal(magnitude, std::move(id), info);
  }

  std::string raw_group_or_token() {
    const Token& t = peek();
    if (is_punct(t, '{')) {
      std::size_t close_pos = matching_brace(src_, t.pos);
      if (close_pos == std::string_view::npos) fail("unbalanced braces");
      std::string raw(src_.substr(t.pos + 1, close_pos - t.pos - 1));
      while (!at_end() && peek().pos <= close_pos) ++pos_;
      return raw;
    }
    if (t.kind == TokKind::Number) {
      double d = take_leading_digit();
      return std::to_string(static_cast<int>(d));
    }
    if (t.kind == TokKind::Letter) {
      ++pos_;
      return t.text;
    }
    if (t.kind == TokKind::Command && contains(kSymbolCommands, t.text)) {
      std::string s = "\\" + t.text;
      ++pos_;
      return s;
    }
    fail("expected subscript");
  }

  Expr symbol_or_constant() {
    const Token& t = peek();
    std::string base;
    bool decorated = false;
    if (t.kind == TokKind::Letter) {
      base = t.text;
      ++pos_;
    } else if (t.kind == TokKind::Command && contains(kDecorations, t.text)) {
      std::string deco = t.text;
      ++pos_;
      base = "\\" + deco + "{" + canonical_fragment(raw_group_or_token()) + "}";
      decorated = true;
    } else {
      base = "\\" + fold_alias(t.text);
      ++pos_;
    }
    std::string name = base;
    bool modified = decorated;
    bool has_sub = false;
    for (;;) {
      if (!has_sub && is_punct(peek(), '_')) {
        ++pos_;
        name += "_{" + canonical_fragment(raw_group_or_token()) + "}";
        has_sub = modified = true;
      } else if (is_punct(peek(), '\'')) {
        ++pos_;
        name += "'";
        modified = true;
      } else {
        break;
      }
    }
    if (!modified && base == "e") return Expr::constant(NamedConstant::Euler);
    if (!modified && base == "\\pi") return Expr::constant(NamedConstant::Pi);
    return Expr::symbol(std::move(name));
  }

  std::string_view src_;
  const UnitTable& units_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int abs_depth_ = 0;
};

}  // namespace detail

/// Parse one formula block. Chained relations ("a < b < c") yield one
/// Formula per relation. Throws ParseError on malformed input, unsupported
/// commands (integrals, derivatives, nabla, ...), or a block without a relation.
inline std::vector<Formula> parse_formula(std::string_view src, const UnitTable& units = UnitTable::defaults()) {
  return detail::Parser(src, units).formulas();
}

inline Expr parse_expression(std::string_view src, const UnitTable& units = UnitTable::defaults()) {
  return detail::Parser(src, units).lone_expression();
}

/// Canonical symbol name for a LaTeX spelling such as "\varepsilon_0".
inline std::string canonical_symbol(std::string_view latex) {
  Expr e = parse_expression(latex);
  if (e.is(ExprKind::Symbol)) return e.name();
  if (e.is(ExprKind::Constant)) return e.named_constant() == NamedConstant::Pi ? "\\pi" : "e";
  throw ParseError("'" + std::string(latex) + "' is not a single symbol", 0);
}

}  // namespace stepgrade

#endif  // STEPGRADE_LATEX_HPP
