#ifndef STEPGRADE_RUBRIC_HPP
#define STEPGRADE_RUBRIC_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stepgrade {

struct RubricNode {
  int index = 0;            // 1-based
  std::string formula;      // LaTeX source, usually wrapped in $$...$$
  std::vector<int> dependency;
  bool is_final_answer = false;
};

using IndexSet = std::set<int>;

/// Reference solution as a DAG of formula nodes. Edges run from each
/// dependency to the node that uses it and always point forward in index
/// order. Immutable after construction.
class RubricDag {
 public:
  RubricDag() = default;
  explicit RubricDag(std::vector<RubricNode> nodes) : nodes_(std::move(nodes)) {}

  [[nodiscard]] const std::vector<RubricNode>& nodes() const { return nodes_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] bool contains(int index) const { return index >= 1 && static_cast<std::size_t>(index) <= nodes_.size(); }

  /// Node by 1-based index; valid only when indices are gap-free.
  [[nodiscard]] const RubricNode& node(int index) const { return nodes_.at(static_cast<std::size_t>(index - 1)); }

  [[nodiscard]] std::vector<int> final_answers() const {
    std::vector<int> out;
    for (const auto& n : nodes_) {
      if (n.is_final_answer) out.push_back(n.index);
    }
    return out;
  }

  /// Same formulas, final flags, and edge sets (dependency order ignored).
  friend bool operator==(const RubricDag& a, const RubricDag& b) {
    if (a.nodes_.size() != b.nodes_.size()) return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
      const auto& x = a.nodes_[i];
      const auto& y = b.nodes_[i];
      if (x.index != y.index || x.formula != y.formula || x.is_final_answer != y.is_final_answer) return false;
      if (std::set<int>(x.dependency.begin(), x.dependency.end()) !=
          std::set<int>(y.dependency.begin(), y.dependency.end())) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<RubricNode> nodes_;
};

// ---------------------------------------------------------------------------
// Validation

enum class IssueKind {
  EmptyDag,
  IndexGap,
  BackwardEdge,
  DuplicateDependency,
  NoFinalAnswer,
  LastNotFinal,
  UnreachableFinal,
  PossiblyRedundant,   // warning
  UnparseableFormula,  // warning, reported by the dataset layer
};

inline const char* issue_name(IssueKind k) {
  switch (k) {
    case IssueKind::EmptyDag: return "empty_dag";
    case IssueKind::IndexGap: return "index_gap";
    case IssueKind::BackwardEdge: return "backward_edge";
    case IssueKind::DuplicateDependency: return "duplicate_dependency";
    case IssueKind::NoFinalAnswer: return "no_final_answer";
    case IssueKind::LastNotFinal: return "last_not_final";
    case IssueKind::UnreachableFinal: return "unreachable_final";
    case IssueKind::PossiblyRedundant: return "possibly_redundant";
    case IssueKind::UnparseableFormula: return "unparseable_formula";
  }
  return "unknown";
}

struct Issue {
  IssueKind kind;
  int index = 0;  // offending node, 0 when not node-specific
  std::string message;
  bool warning = false;
};

struct ValidationReport {
  std::vector<Issue> issues;

  [[nodiscard]] bool ok() const {
    return std::none_of(issues.begin(), issues.end(), [](const Issue& i) { return !i.warning; });
  }
  [[nodiscard]] std::vector<Issue> violations() const {
    std::vector<Issue> out;
    std::copy_if(issues.begin(), issues.end(), std::back_inserter(out), [](const Issue& i) { return !i.warning; });
    return out;
  }
  [[nodiscard]] std::vector<Issue> warnings() const {
    std::vector<Issue> out;
    std::copy_if(issues.begin(), issues.end(), std::back_inserter(out), [](const Issue& i) { return i.warning; });
    return out;
  }
};

/// Check the construction rules: gap-free 1..N indices, forward-only and
/// duplicate-free dependencies, at least one final answer with the last node
/// final, and every node on a path to some final answer. Single-use chain
/// steps are flagged as non-blocking redundancy warnings.
inline ValidationReport validate(const RubricDag& dag) {
  ValidationReport rep;
  auto add = [&](IssueKind k, int index, std::string msg, bool warning = false) {
    rep.issues.push_back(Issue{k, index, std::move(msg), warning});
  };
  const auto& nodes = dag.nodes();
  const int n = static_cast<int>(nodes.size());
  if (n == 0) {
    add(IssueKind::EmptyDag, 0, "grading standard has no nodes");
    return rep;
  }

  for (int pos = 0; pos < n; ++pos) {
    if (nodes[pos].index != pos + 1) {
      add(IssueKind::IndexGap, nodes[pos].index,
          "node at position " + std::to_string(pos + 1) + " has index " + std::to_string(nodes[pos].index));
    }
  }

  std::vector<std::vector<int>> dependents(n + 1);
  for (const auto& node : nodes) {
    std::set<int> seen;
    for (int d : node.dependency) {
      if (!seen.insert(d).second) {
        add(IssueKind::DuplicateDependency, node.index,
            "node " + std::to_string(node.index) + " lists dependency " + std::to_string(d) + " twice");
        continue;
      }
      if (d < 1 || d >= node.index || d > n) {
        add(IssueKind::BackwardEdge, node.index,
            "node " + std::to_string(node.index) + " depends on " + std::to_string(d) +
                ", which does not precede it");
        continue;
      }
      if (node.index >= 1 && node.index <= n) dependents[d].push_back(node.index);
    }
  }

  const auto finals = dag.final_answers();
  if (finals.empty()) add(IssueKind::NoFinalAnswer, 0, "no node is marked as a final answer");
  if (!nodes.back().is_final_answer) {
    add(IssueKind::LastNotFinal, nodes.back().index, "the last node must be a final answer");
  }

  // Walk dependency edges backwards from every final answer.
  std::vector<bool> reaches(n + 1, false);
  std::vector<int> stack;
  for (int f : finals) {
    if (f >= 1 && f <= n && !reaches[f]) {
      reaches[f] = true;
      stack.push_back(f);
    }
  }
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int d : nodes[v - 1].dependency) {
      if (d >= 1 && d <= n && !reaches[d]) {
        reaches[d] = true;
        stack.push_back(d);
      }
    }
  }
  for (int v = 1; v <= n; ++v) {
    if (!reaches[v]) {
      add(IssueKind::UnreachableFinal, v, "node " + std::to_string(v) + " has no path to a final answer");
    }
  }

  for (int v = 1; v <= n; ++v) {
    const auto& node = nodes[v - 1];
    if (!node.is_final_answer && node.dependency.size() == 1 && dependents[v].size() == 1) {
      add(IssueKind::PossiblyRedundant, v,
          "node " + std::to_string(v) + " is a single-use step between " + std::to_string(node.dependency[0]) +
              " and " + std::to_string(dependents[v][0]),
          true);
    }
  }
  return rep;
}

class InvalidDagError : public std::runtime_error {
 public:
  explicit InvalidDagError(ValidationReport report)
      : std::runtime_error(describe(report)), report_(std::move(report)) {}

  [[nodiscard]] const ValidationReport& report() const { return report_; }

 private:
  static std::string describe(const ValidationReport& r) {
    std::string s = "invalid rubric DAG:";
    for (const auto& i : r.violations()) s += " [" + std::string(issue_name(i.kind)) + "] " + i.message + ";";
    return s;
  }
  ValidationReport report_;
};

// ---------------------------------------------------------------------------
// Ancestor-closure scoring

/// Matched nodes plus all of their ancestors, by recursive marking along
/// dependency lists. Throws std::out_of_range for an unknown index.
inline IndexSet ancestor_closure(const RubricDag& dag, const IndexSet& matched) {
  for (int m : matched) {
    if (!dag.contains(m)) throw std::out_of_range("matched index " + std::to_string(m) + " is not a rubric node");
  }
  IndexSet achieved;
  std::function<void(int)> mark = [&](int u) {
    if (achieved.insert(u).second) {
      for (int p : dag.node(u).dependency) {
        if (dag.contains(p)) mark(p);
      }
    }
  };
  for (int v : matched) mark(v);
  return achieved;
}

/// Exact non-negative rational, kept in lowest terms.
struct Fraction {
  long long num = 0;
  long long den = 1;

  static Fraction of(long long n, long long d) {
    if (d == 0) throw std::invalid_argument("zero denominator");
    long long g = std::gcd(n, d);
    if (g == 0) g = 1;
    return Fraction{n / g, d / g};
  }

  [[nodiscard]] double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  [[nodiscard]] std::string to_string() const { return std::to_string(num) + "/" + std::to_string(den); }

  bool operator==(const Fraction&) const = default;
  friend bool operator<(const Fraction& a, const Fraction& b) { return a.num * b.den < b.num * a.den; }
  friend bool operator<=(const Fraction& a, const Fraction& b) { return !(b < a); }
};

/// Credit restricted to one final answer's ancestry.
struct FinalSlice {
  int final_index = 0;
  bool matched = false;
  Fraction score;
};

struct ScoreReport {
  IndexSet matched;
  IndexSet achieved;
  Fraction score;
  bool final_correct = false;
  std::vector<FinalSlice> finals;
};

/// Step score |Ach(M)| / N. `final_correct` requires every final-answer node
/// to be matched directly. Refuses DAGs that do not validate.
inline ScoreReport score(const RubricDag& dag, const IndexSet& matched) {
  auto report = validate(dag);
  if (!report.ok()) throw InvalidDagError(std::move(report));

  ScoreReport out;
  out.matched = matched;
  out.achieved = ancestor_closure(dag, matched);
  out.score = Fraction::of(static_cast<long long>(out.achieved.size()), static_cast<long long>(dag.size()));
  out.final_correct = true;
  for (int f : dag.final_answers()) {
    FinalSlice slice;
    slice.final_index = f;
    slice.matched = matched.contains(f);
    IndexSet region = ancestor_closure(dag, {f});
    long long credited = 0;
    for (int v : region) credited += out.achieved.contains(v) ? 1 : 0;
    slice.score = Fraction::of(credited, static_cast<long long>(region.size()));
    out.final_correct = out.final_correct && slice.matched;
    out.finals.push_back(slice);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Justification kernel: the DAG's edge set as explicit "A |- B" pairs.

struct JustificationKernel {
  std::size_t size = 0;
  std::vector<std::pair<int, int>> pairs;  // (justifier, justified), sorted

  bool operator==(const JustificationKernel&) const = default;
};

inline JustificationKernel to_kernel(const RubricDag& dag) {
  JustificationKernel k;
  k.size = dag.size();
  for (const auto& node : dag.nodes()) {
    for (int d : node.dependency) k.pairs.emplace_back(d, node.index);
  }
  std::sort(k.pairs.begin(), k.pairs.end());
  k.pairs.erase(std::unique(k.pairs.begin(), k.pairs.end()), k.pairs.end());
  return k;
}

/// Rebuild a DAG over the given formulas and final flags from a kernel.
inline RubricDag from_kernel(const JustificationKernel& k, const std::vector<std::string>& formulas,
                             const std::vector<bool>& finals) {
  if (formulas.size() != k.size || finals.size() != k.size) {
    throw std::invalid_argument("kernel size does not match the formula list");
  }
  std::vector<RubricNode> nodes(k.size);
  for (std::size_t i = 0; i < k.size; ++i) {
    nodes[i].index = static_cast<int>(i + 1);
    nodes[i].formula = formulas[i];
    nodes[i].is_final_answer = finals[i];
  }
  for (auto [a, b] : k.pairs) {
    if (a < 1 || b < 1 || static_cast<std::size_t>(b) > k.size || a >= b) {
      throw std::invalid_argument("kernel pair " + std::to_string(a) + " |- " + std::to_string(b) +
                                  " is not order-keeping");
    }
    nodes[static_cast<std::size_t>(b - 1)].dependency.push_back(a);
  }
  return RubricDag(std::move(nodes));
}

inline std::string to_text(const JustificationKernel& k) {
  std::ostringstream os;
  os << "nodes " << k.size << "\n";
  for (auto [a, b] : k.pairs) os << a << " |- " << b << "\n";
  return os.str();
}

inline JustificationKernel parse_kernel(const std::string& text) {
  std::istringstream in(text);
  JustificationKernel k;
  std::string word;
  if (!(in >> word >> k.size) || word != "nodes") throw std::invalid_argument("kernel text must start with 'nodes N'");
  int a = 0, b = 0;
  std::string turnstile;
  while (in >> a >> turnstile >> b) {
    if (turnstile != "|-") throw std::invalid_argument("expected '|-' in kernel text");
    k.pairs.emplace_back(a, b);
  }
  if (!in.eof()) throw std::invalid_argument("malformed kernel pair");
  return k;
}

/// DAG -> kernel text -> DAG.
inline RubricDag kernel_roundtrip(const RubricDag& dag) {
  std::vector<std::string> formulas;
  std::vector<bool> finals;
  for (const auto& n : dag.nodes()) {
    formulas.push_back(n.formula);
    finals.push_back(n.is_final_answer);
  }
  return from_kernel(parse_kernel(to_text(to_kernel(dag))), formulas, finals);
}

}  // namespace stepgrade

#endif  // STEPGRADE_RUBRIC_HPP
