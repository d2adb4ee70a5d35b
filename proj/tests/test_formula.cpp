#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include <json.hpp>

#include "stepgrade/expr.hpp"
#include "stepgrade/latex.hpp"

using namespace stepgrade;

namespace {

Formula one(std::string_view src) {
  auto fs = parse_formula(normalize_source(src));
  EXPECT_EQ(fs.size(), 1u) << src;
  return fs.at(0);
}

Expr sym(const char* n) { return Expr::symbol(n); }
Expr num(double v) { return Expr::number(v); }

}  // namespace

// ---- normalize_source

TEST(Normalize, StripsPresentation) {
  EXPECT_EQ(normalize_source("\\left( x \\right)\\,"), "( x )");
  EXPECT_EQ(normalize_source("x = y"), "x = y");
  EXPECT_EQ(normalize_source("E = mc^2."), "E = mc^2");
  EXPECT_EQ(normalize_source("\\mathrm{d} = \\text{v}\\quad t"), "d = v  t");
  EXPECT_EQ(normalize_source("\\begin{aligned} a &= b \\\\ \\end{aligned}"), "a = b");
  EXPECT_EQ(normalize_source("\\mathbf{E} = 3;"), "E = 3");
}

TEST(Normalize, IdempotentOnRandomText) {
  const std::vector<std::string> pieces = {"\\left(", "\\right)", "\\,", "\\;", "\\!", "~", "\\quad", "\\qquad",
                                           "\\mathrm{", "\\text{", "\\mathbf{", "}", "x", "=", "2", ".", ",",
                                           " ", "\\frac{a}{b}", "&", "\\\\", "\\begin{aligned}", "\\end{aligned}",
                                           "\\mathit{", "\\displaystyle", "^2", "_0"};
  std::mt19937_64 rng(42);
  for (int iter = 0; iter < 2000; ++iter) {
    std::string s;
    int len = static_cast<int>(rng() % 12);
    for (int i = 0; i < len; ++i) s += pieces[rng() % pieces.size()];
    std::string once = normalize_source(s);
    EXPECT_EQ(normalize_source(once), once) << s;
  }
}

// ---- parse_formula

TEST(Parse, PromptExample) {
  Formula f = one("E_0 = mgH + \\frac 1 2 mv_0^2");
  EXPECT_EQ(f.relation, Relation::Equal);
  EXPECT_EQ(f.lhs, sym("E_{0}"));
  Expr rhs = Expr::sum({Expr::product({sym("m"), sym("g"), sym("H")}),
                        Expr::product({Expr::quotient(num(1), num(2)), sym("m"),
                                       Expr::power(sym("v_{0}"), num(2))})});
  EXPECT_EQ(f.rhs, rhs);
}

TEST(Parse, UnitLiteralHertz) {
  Formula f = one("f = 50\\unit{Hz}");
  ASSERT_TRUE(f.rhs.is(ExprKind::UnitLiteral));
  EXPECT_EQ(f.rhs.si_magnitude(), 50.0);
  EXPECT_EQ(f.rhs.unit().dimension, (Dimension{0, 0, -1, 0, 0, 0, 0}));
  Formula g = one("f = 50\\unit{s^{-1}}");
  EXPECT_EQ(g.rhs.si_magnitude(), f.rhs.si_magnitude());
  EXPECT_EQ(g.rhs.unit().dimension, f.rhs.unit().dimension);
}

TEST(Parse, UnitSoundness) {
  for (const char* u : {"km/h", "cm", "g", "eV", "kN", "\\mu F", "min"}) {
    Formula f = one(std::string("x = 3.5\\unit{") + u + "}");
    EXPECT_DOUBLE_EQ(f.rhs.si_magnitude(), 3.5 * UnitTable::defaults().resolve(u).factor) << u;
  }
}

TEST(Parse, Errors) {
  EXPECT_THROW(parse_formula("x ="), ParseError);
  EXPECT_THROW(parse_formula("x + 1"), ParseError);
  EXPECT_THROW(parse_formula("Q = \\int \\rho dV"), ParseError);
  EXPECT_THROW(parse_formula("\\frac{d}{dr} f = 0"), ParseError);
  EXPECT_THROW(parse_formula("\\partial_t u = 0"), ParseError);
  EXPECT_THROW(parse_formula("\\nabla \\cdot E = 0"), ParseError);
  EXPECT_THROW(parse_formula("\\rho = 4 \\pi \\delta(r)"), ParseError);
  EXPECT_THROW(parse_formula("x = (a + b"), ParseError);
  EXPECT_THROW(parse_formula("x = 3\\unit{furlong}"), ParseError);
}

TEST(Parse, ChainSplitting) {
  auto fs = parse_formula("a < b < c");
  ASSERT_EQ(fs.size(), 2u);
  EXPECT_EQ(fs[0].lhs, sym("a"));
  EXPECT_EQ(fs[0].rhs, sym("b"));
  EXPECT_EQ(fs[1].lhs, sym("b"));
  EXPECT_EQ(fs[1].rhs, sym("c"));
  EXPECT_EQ(fs[1].relation, Relation::Less);

  auto mixed = parse_formula("x = 2 y \\approx 3 \\le z");
  ASSERT_EQ(mixed.size(), 3u);
  EXPECT_EQ(mixed[1].relation, Relation::Approx);
  EXPECT_EQ(mixed[2].relation, Relation::LessEqual);
  EXPECT_EQ(parse_formula("a ≥ b")[0].relation, Relation::GreaterEqual);
}

TEST(Parse, Precedence) {
  // implicit multiplication binds tighter than '/', '^' tightest
  EXPECT_EQ(one("x = a/bc").rhs, Expr::quotient(sym("a"), Expr::product({sym("b"), sym("c")})));
  EXPECT_EQ(one("x = ab^2").rhs, Expr::product({sym("a"), Expr::power(sym("b"), num(2))}));
  EXPECT_EQ(one("x = a/b/c").rhs, Expr::quotient(Expr::quotient(sym("a"), sym("b")), sym("c")));
  EXPECT_EQ(one("x = -a^2").rhs, Expr::negate(Expr::power(sym("a"), num(2))));
  EXPECT_EQ(one("x = 2^{3}4").rhs, Expr::product({Expr::power(num(2), num(3)), num(4)}));
}

TEST(Parse, SymbolCanonicalization) {
  EXPECT_EQ(one("\\varepsilon_0 = 1").lhs, one("\\epsilon_{0} = 1").lhs);
  EXPECT_EQ(one("\\mathbf{E} = 1").lhs, sym("E"));
  EXPECT_EQ(canonical_symbol("\\varepsilon_0"), canonical_symbol("\\epsilon_0"));
  EXPECT_EQ(one("v' = 1").lhs.name(), "v'");
  EXPECT_EQ(one("x = \\pi").rhs, Expr::constant(NamedConstant::Pi));
  EXPECT_EQ(one("x = e^2").rhs, Expr::power(Expr::constant(NamedConstant::Euler), num(2)));
}

TEST(Parse, Functions) {
  EXPECT_EQ(one("y = \\sin\\theta\\cos\\theta").rhs,
            Expr::product({Expr::apply(Function::Sin, sym("\\theta")), Expr::apply(Function::Cos, sym("\\theta"))}));
  EXPECT_EQ(one("y = \\cos\\omega t").rhs, Expr::apply(Function::Cos, Expr::product({sym("\\omega"), sym("t")})));
  EXPECT_EQ(one("y = \\sin^2 x").rhs, Expr::power(Expr::apply(Function::Sin, sym("x")), num(2)));
  EXPECT_EQ(one("y = |x|").rhs, Expr::apply(Function::Abs, sym("x")));
  EXPECT_EQ(one("y = \\sqrt[3]{x}").rhs, Expr::power(sym("x"), Expr::quotient(num(1), num(3))));
}

TEST(Parse, QuotientOfDSymbolsIsNotDerivative) {
  EXPECT_EQ(one("M = -\\frac{d_i}{d_o}").rhs, Expr::negate(Expr::quotient(sym("d_{i}"), sym("d_{o}"))));
}

// ---- extract_formulas

TEST(Extract, Examples) {
  EXPECT_EQ(extract_formulas("text $$a=b$$ text $$c=d$$"), (std::vector<std::string>{"a=b", "c=d"}));
  EXPECT_TRUE(extract_formulas("").empty());
  EXPECT_EQ(extract_formulas("see $F=ma$ then $$E=mc^2$$"), (std::vector<std::string>{"F=ma", "E=mc^2"}));
  EXPECT_EQ(extract_formulas("cost \\$5 and $x=1$"), (std::vector<std::string>{"x=1"}));
  EXPECT_EQ(extract_formulas("$$a=b$$ $$a=b$$"), (std::vector<std::string>{"a=b", "a=b"}));
  // unbalanced: the tail is dropped
  EXPECT_EQ(extract_formulas("$x=1$ and $$y=2"), (std::vector<std::string>{"x=1"}));
}

namespace {

// Character-level oracle: split on runs of '$', pair openers with closers.
std::vector<std::string> scan_oracle(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while ((i = s.find('$', i)) != std::string::npos) {
    bool block = i + 1 < s.size() && s[i + 1] == '$';
    std::string delim = block ? "$$" : "$";
    std::size_t open = i + delim.size();
    std::size_t close = s.find(delim, open);
    if (close == std::string::npos) break;
    std::string body = s.substr(open, close - open);
    auto b = body.find_first_not_of(" \n\t"), e = body.find_last_not_of(" \n\t");
    if (b != std::string::npos) out.push_back(body.substr(b, e - b + 1));
    i = close + delim.size();
  }
  return out;
}

}  // namespace

TEST(Extract, MatchesScannerOracleOnWellFormedText) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> bodies = {"a=b", "F = ma", "x^2 = 4", "E=mc^2", "v", "\\frac{1}{2}"};
  for (int iter = 0; iter < 500; ++iter) {
    std::string text;
    int blocks = static_cast<int>(rng() % 5);
    for (int k = 0; k < blocks; ++k) {
      text += "word ";
      const std::string& b = bodies[rng() % bodies.size()];
      text += (rng() % 2) ? "$$\n" + b + "\n$$" : "$" + b + "$";
      text += " more\n";
    }
    EXPECT_EQ(extract_formulas(text), scan_oracle(text)) << text;
  }
}

// ---- free_variables

TEST(FreeVariables, Examples) {
  EXPECT_EQ(free_variables(one("F = m a")), (std::set<std::string>{"F", "m", "a"}));
  EXPECT_EQ(free_variables(one("x = 2\\pi")), (std::set<std::string>{"x"}));
  EXPECT_EQ(free_variables(one("T = 2\\pi\\sqrt{\\frac{a^3}{G M}}")), (std::set<std::string>{"T", "a", "G", "M"}));
}

// ---- round trip over every parseable formula in the shipped datasets

TEST(RoundTrip, DatasetFormulasAreFixpoints) {
  int checked = 0;
  for (const char* file : {"/physics20.json", "/sample_1001.json"}) {
    std::ifstream in(std::string(STEPGRADE_DATA_DIR) + file);
    auto doc = nlohmann::json::parse(in);
    if (!doc.is_array()) doc = nlohmann::json::array({doc});
    for (const auto& p : doc) {
      std::vector<std::string> sources;
      for (const auto& g : p["grading_standard"]) sources.push_back(g["formula"]);
      for (const auto& q : p["subquestions"]) {
        for (auto& s : extract_formulas(q["solution"].get<std::string>())) sources.push_back(s);
      }
      for (const auto& raw : sources) {
        auto bodies = extract_formulas(raw);
        std::string body = bodies.empty() ? raw : bodies.front();
        std::vector<Formula> fs;
        try {
          fs = parse_formula(normalize_source(body));
        } catch (const ParseError&) {
          continue;
        }
        for (const auto& f : fs) {
          std::string printed = to_latex(f);
          auto again = parse_formula(printed);
          ASSERT_EQ(again.size(), 1u) << printed;
          EXPECT_EQ(again[0], f) << body << " -> " << printed;
          EXPECT_EQ(to_latex(again[0]), printed);
          ++checked;
        }
      }
    }
  }
  EXPECT_GT(checked, 150);
}

TEST(RoundTrip, NegativeAndNestedForms) {
  for (const char* s : {"x = -3", "x = a \\cdot (-3)", "x = (-2)^{3}", "y = -\\frac{-a}{b}", "z = a - (b - c)",
                        "w = \\lvert x - y \\rvert", "u = 2^{-1}", "v = e^{-\\frac{t}{R C}}", "q = 1.5e3 x"}) {
    Formula f = one(s);
    auto again = parse_formula(to_latex(f));
    ASSERT_EQ(again.size(), 1u);
    EXPECT_EQ(again[0], f) << s << " -> " << to_latex(f);
  }
}
