#ifndef STEPGRADE_DATASET_HPP
#define STEPGRADE_DATASET_HPP

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepgrade/expr.hpp"
#include "stepgrade/latex.hpp"
#include "stepgrade/rubric.hpp"
#include "stepgrade/units.hpp"

namespace stepgrade {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Subquestion {
  std::string letter;
  std::string subproblem;
  std::string solution;
  std::string final_answer_form;  // "algebraic", "numerical", ...
  std::string final_answer_instructions;
  std::optional<int> significant_figures;
};

/// Parsed view of one rubric node formula. A node whose source holds a
/// chained relation carries several formulas.
struct ParsedNode {
  std::vector<Formula> formulas;
  std::string error;  // non-empty when the node cannot be parsed

  [[nodiscard]] bool ok() const { return error.empty(); }
};

struct Problem {
  std::string id;
  std::string context;
  nlohmann::json images = nlohmann::json::array();
  std::vector<Subquestion> subquestions;
  RubricDag dag;
  std::vector<ParsedNode> parsed;  // parallel to dag.nodes()
  std::string difficulty;          // optional label, empty when absent
  std::string domain;

  /// All subquestion solutions, in order; the reference solution text.
  [[nodiscard]] std::string reference_solution() const {
    std::string out;
    for (const auto& s : subquestions) {
      if (!out.empty()) out += "\n\n";
      out += s.solution;
    }
    return out;
  }
};

/// Numeric-aware ordering for problem ids: "2" < "10" < "a".
inline bool id_less(const std::string& a, const std::string& b) {
  auto numeric = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
  };
  bool na = numeric(a), nb = numeric(b);
  if (na != nb) return na;
  if (na) {
    auto strip = [](const std::string& s) {
      auto p = s.find_first_not_of('0');
      return p == std::string::npos ? std::string("0") : s.substr(p);
    };
    std::string x = strip(a), y = strip(b);
    if (x.size() != y.size()) return x.size() < y.size();
    if (x != y) return x < y;
  }
  return a < b;
}

/// A formula field or a solution block: the body of the first $$...$$ or
/// $...$ span, or the whole string when it has no delimiters.
inline std::vector<Formula> parse_formula_block(const std::string& source, const UnitTable& units) {
  auto bodies = extract_formulas(source);
  std::string body = bodies.empty() ? source : bodies.front();
  return parse_formula(normalize_source(body), units);
}

namespace detail {

inline std::string id_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw DatasetError("problem id must be an integer or a string");
}

inline std::string opt_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw DatasetError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace detail

inline Problem problem_from_json(const nlohmann::json& j, const UnitTable& units = UnitTable::defaults()) {
  if (!j.is_object()) throw DatasetError("problem must be a JSON object");
  Problem p;
  p.id = detail::id_string(j.at("id"));
  try {
    p.context = detail::opt_string(j, "context");
    if (j.contains("images")) p.images = j.at("images");
    for (const auto& s : j.value("subquestions", nlohmann::json::array())) {
      Subquestion q;
      q.letter = detail::opt_string(s, "letter");
      q.subproblem = detail::opt_string(s, "subproblem");
      q.solution = detail::opt_string(s, "solution");
      q.final_answer_form = detail::opt_string(s, "final_answer_form");
      q.final_answer_instructions = detail::opt_string(s, "final_answer_instructions");
      if (s.contains("significant_figures") && !s.at("significant_figures").is_null()) {
        q.significant_figures = s.at("significant_figures").get<int>();
      }
      p.subquestions.push_back(std::move(q));
    }
    std::vector<RubricNode> nodes;
    for (const auto& g : j.at("grading_standard")) {
      RubricNode n;
      n.index = g.at("index").get<int>();
      n.formula = g.at("formula").get<std::string>();
      n.dependency = g.value("dependency", std::vector<int>{});
      n.is_final_answer = g.value("is_final_answer", false);
      nodes.push_back(std::move(n));
    }
    p.dag = RubricDag(std::move(nodes));
    p.difficulty = detail::opt_string(j, "difficulty");
    p.domain = detail::opt_string(j, "domain");
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError("problem " + p.id + ": " + e.what());
  }

  for (const auto& n : p.dag.nodes()) {
    ParsedNode pn;
    try {
      pn.formulas = parse_formula_block(n.formula, units);
    } catch (const std::exception& e) {
      pn.error = e.what();
    }
    p.parsed.push_back(std::move(pn));
  }
  return p;
}

struct Dataset {
  std::vector<Problem> problems;  // sorted by id

  [[nodiscard]] const Problem* find(const std::string& id) const {
    for (const auto& p : problems) {
      if (p.id == id) return &p;
    }
    return nullptr;
  }
};

/// Accepts a JSON array of problems, a single problem object, or JSON lines.
inline Dataset dataset_from_text(const std::string& text, const UnitTable& units = UnitTable::defaults()) {
  Dataset ds;
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  std::vector<nlohmann::json> items;
  if (!doc.is_discarded()) {
    if (doc.is_array()) {
      items.assign(doc.begin(), doc.end());
    } else {
      items.push_back(std::move(doc));
    }
  } else {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim(line).empty()) continue;
      try {
        items.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error& e) {
        throw DatasetError("line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  for (const auto& item : items) ds.problems.push_back(problem_from_json(item, units));
  std::stable_sort(ds.problems.begin(), ds.problems.end(),
                   [](const Problem& a, const Problem& b) { return id_less(a.id, b.id); });
  for (std::size_t i = 1; i < ds.problems.size(); ++i) {
    if (ds.problems[i].id == ds.problems[i - 1].id) throw DatasetError("duplicate problem id " + ds.problems[i].id);
  }
  return ds;
}

inline Dataset load_dataset(const std::string& path, const UnitTable& units = UnitTable::defaults()) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return dataset_from_text(buf.str(), units);
}

/// DAG validation plus an unparseable-formula warning per node.
inline ValidationReport validate(const Problem& p) {
  ValidationReport rep = validate(p.dag);
  for (std::size_t i = 0; i < p.parsed.size(); ++i) {
    if (!p.parsed[i].ok()) {
      int index = p.dag.nodes()[i].index;
      rep.issues.push_back(Issue{IssueKind::UnparseableFormula, index,
                                 "node " + std::to_string(index) + ": " + p.parsed[i].error, true});
    }
  }
  return rep;
}

}  // namespace stepgrade

#endif  // STEPGRADE_DATASET_HPP
