#ifndef STEPGRADE_GRADING_HPP
#define STEPGRADE_GRADING_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stepgrade/constants.hpp"
#include "stepgrade/dataset.hpp"
#include "stepgrade/equivalence.hpp"
#include "stepgrade/eval.hpp"
#include "stepgrade/rubric.hpp"

#ifndef STEPGRADE_VERSION
#define STEPGRADE_VERSION "0.1.0"
#endif

namespace stepgrade {

struct CandidateSolution {
  std::string problem_id;
  std::string model;
  std::string solution;
  std::optional<double> latency_s;
};

/// JSON lines, one {problem_id, model?, solution, latency_s?} per line.
inline std::vector<CandidateSolution> candidates_from_text(const std::string& text) {
  std::vector<CandidateSolution> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      CandidateSolution c;
      c.problem_id = detail::id_string(j.at("problem_id"));
      c.model = detail::opt_string(j, "model");
      c.solution = j.at("solution").get<std::string>();
      if (j.contains("latency_s") && !j.at("latency_s").is_null()) c.latency_s = j.at("latency_s").get<double>();
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError("candidates line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<CandidateSolution> load_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open candidates file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return candidates_from_text(buf.str());
}

// ---------------------------------------------------------------------------
// Candidate extraction

struct DiscardedExpression {
  std::string source;
  std::string error;
};

struct ExtractedFormulas {
  std::vector<Formula> formulas;
  std::vector<DiscardedExpression> discarded;
};

/// Every math span of the text that parses as a relation. Spans without a
/// relation (inline symbol mentions) and unsupported constructs are dropped
/// and listed.
inline ExtractedFormulas extract_candidate_formulas(const std::string& text,
                                                    const UnitTable& units = UnitTable::defaults()) {
  ExtractedFormulas out;
  for (const auto& body : extract_formulas(text)) {
    try {
      for (auto& f : parse_formula(normalize_source(body), units)) out.formulas.push_back(std::move(f));
    } catch (const std::exception& e) {
      out.discarded.push_back({body, e.what()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise memo

struct PairResult {
  bool equivalent = false;
  int n_eq = 0;
  int n_neq = 0;
  int n_fail = 0;
};

/// Thread-safe cache of equivalence verdicts for one batch, keyed on the
/// unordered pair of canonical prints. The verdict itself is symmetric, so
/// the key is too. Params and constants must stay fixed for the memo's life.
class EquivalenceMemo {
 public:
  EquivalenceMemo(const ConstantsMap& constants, const EquivParams& params)
      : constants_(constants), params_(params) {}

  PairResult check(const Formula& a, const Formula& b) {
    std::string pa = to_latex(a), pb = to_latex(b);
    if (pb < pa) std::swap(pa, pb);
    std::string key = pa + '\x1f' + pb;
    {
      std::shared_lock lock(mutex_);
      auto it = table_.find(key);
      if (it != table_.end()) return it->second;
    }
    auto v = check_equivalence(a, b, constants_, params_);
    PairResult r{v.equivalent(), v.n_eq_observed, v.n_neq_observed, v.n_fail_observed};
    std::unique_lock lock(mutex_);
    table_.emplace(std::move(key), r);
    return r;
  }

  [[nodiscard]] const ConstantsMap& constants() const { return constants_; }
  [[nodiscard]] const EquivParams& params() const { return params_; }

 private:
  const ConstantsMap& constants_;
  EquivParams params_;
  std::shared_mutex mutex_;
  std::unordered_map<std::string, PairResult> table_;
};

// ---------------------------------------------------------------------------
// Numeric final answers

namespace detail {

// "x = <closed expression>" in either orientation.
struct NumericAssignment {
  std::string symbol;
  double value;
};

inline std::optional<NumericAssignment> numeric_assignment(const Formula& f, const ConstantsMap& c) {
  if (!is_equality(f.relation)) return std::nullopt;
  Formula g = substitute_constants(f, c);
  const Expr* sym = nullptr;
  const Expr* val = nullptr;
  if (f.lhs.is(ExprKind::Symbol) && free_variables(g.rhs).empty()) {
    sym = &f.lhs;
    val = &g.rhs;
  } else if (f.rhs.is(ExprKind::Symbol) && free_variables(g.lhs).empty()) {
    sym = &f.rhs;
    val = &g.lhs;
  } else {
    return std::nullopt;
  }
  double v = evaluate(*val, Assignment{});
  if (!std::isfinite(v)) return std::nullopt;
  return NumericAssignment{sym->name(), v};
}

inline std::string round_sig(double v, int sig) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", std::max(sig, 1) - 1, v);
  return buf;
}

}  // namespace detail

/// Both formulas assign a closed numeric value to the same symbol and the
/// values agree at `sig_figs` significant figures (SI units). Anything else
/// falls back to the equivalence check.
inline bool numeric_final_check(const Formula& value, const Formula& reference, int sig_figs,
                                const ConstantsMap& constants = ConstantsMap{}, const EquivParams& params = {}) {
  auto a = detail::numeric_assignment(value, constants);
  auto b = detail::numeric_assignment(reference, constants);
  if (a && b && a->symbol == b->symbol) {
    return detail::round_sig(a->value, sig_figs) == detail::round_sig(b->value, sig_figs);
  }
  return check_equivalence(value, reference, constants, params).equivalent();
}

// ---------------------------------------------------------------------------
// Matching and grading

enum class NodeStatus { Matched, Unmatched, Unparseable };

inline const char* status_name(NodeStatus s) {
  switch (s) {
    case NodeStatus::Matched: return "matched";
    case NodeStatus::Unmatched: return "unmatched";
    case NodeStatus::Unparseable: return "unparseable";
  }
  return "unknown";
}

struct NodeLog {
  int index = 0;
  NodeStatus status = NodeStatus::Unmatched;
  bool achieved = false;
  std::string matched_by;  // canonical print of the matching candidate
  std::string diagnostic;
};

struct MatchResult {
  IndexSet matched;
  std::vector<NodeLog> log;
};

namespace detail {

// Sig-fig rule per final node: the k-th final node belongs to the k-th
// subquestion.
inline std::map<int, int> numeric_finals(const Problem& p) {
  std::map<int, int> out;
  auto finals = p.dag.final_answers();
  for (std::size_t k = 0; k < finals.size() && k < p.subquestions.size(); ++k) {
    const auto& q = p.subquestions[k];
    if (q.final_answer_form == "numerical" && q.significant_figures) out[finals[k]] = *q.significant_figures;
  }
  return out;
}

}  // namespace detail

/// Node v is matched iff every relation of its formula is equivalent to some
/// candidate formula. Order-free: every candidate is tried against every node.
inline MatchResult match_against_dag(const Problem& problem, const std::vector<Formula>& candidates,
                                     EquivalenceMemo& memo) {
  MatchResult out;
  const auto sig_rules = detail::numeric_finals(problem);
  const auto& nodes = problem.dag.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    NodeLog log;
    log.index = nodes[i].index;
    const ParsedNode& pn = problem.parsed[i];
    if (!pn.ok()) {
      log.status = NodeStatus::Unparseable;
      log.diagnostic = "parse: " + pn.error;
      out.log.push_back(std::move(log));
      continue;
    }
    auto sig = sig_rules.find(log.index);
    bool all = true;
    for (const Formula& target : pn.formulas) {
      const Formula* hit = nullptr;
      PairResult best;
      bool have_best = false;
      for (const Formula& g : candidates) {
        bool ok;
        if (sig != sig_rules.end()) {
          ok = numeric_final_check(g, target, sig->second, memo.constants(), memo.params());
        } else {
          PairResult r = memo.check(g, target);
          ok = r.equivalent;
          if (!have_best || r.n_eq > best.n_eq || (r.n_eq == best.n_eq && r.n_fail < best.n_fail)) {
            best = r;
            have_best = true;
          }
        }
        if (ok) {
          hit = &g;
          break;
        }
      }
      if (hit) {
        if (!log.matched_by.empty()) log.matched_by += "; ";
        log.matched_by += to_latex(*hit);
        continue;
      }
      all = false;
      std::string d = "no equivalent candidate for " + to_latex(target) + " among " +
                      std::to_string(candidates.size());
      if (have_best) {
        d += "; best trial counts eq/neq/fail = " + std::to_string(best.n_eq) + "/" + std::to_string(best.n_neq) +
             "/" + std::to_string(best.n_fail);
        if (best.n_eq == 0 && best.n_neq == 0 && best.n_fail > 0) d += " (solver found no usable trials)";
      }
      log.diagnostic = std::move(d);
      break;
    }
    if (all) {
      log.status = NodeStatus::Matched;
      out.matched.insert(log.index);
    }
    out.log.push_back(std::move(log));
  }
  return out;
}

inline MatchResult match_against_dag(const Problem& problem, const std::vector<Formula>& candidates,
                                     const ConstantsMap& constants, const EquivParams& params) {
  EquivalenceMemo memo(constants, params);
  return match_against_dag(problem, candidates, memo);
}

struct ProblemGrade {
  std::string problem_id;
  std::string model;
  std::string difficulty;
  std::string domain;
  std::optional<double> latency_s;
  std::string error;  // non-empty when the candidate could not be graded
  ScoreReport report;
  std::vector<NodeLog> nodes;
  std::size_t candidate_formulas = 0;
  std::vector<DiscardedExpression> discarded;

  [[nodiscard]] bool ok() const { return error.empty(); }
};

/// Extract, parse, match, score.
inline ProblemGrade grade_solution(const Problem& problem, const CandidateSolution& candidate, EquivalenceMemo& memo,
                                   const UnitTable& units = UnitTable::defaults()) {
  ProblemGrade g;
  g.problem_id = problem.id;
  g.model = candidate.model;
  g.difficulty = problem.difficulty;
  g.domain = problem.domain;
  g.latency_s = candidate.latency_s;

  auto extracted = extract_candidate_formulas(candidate.solution, units);
  g.candidate_formulas = extracted.formulas.size();
  g.discarded = std::move(extracted.discarded);
  auto match = match_against_dag(problem, extracted.formulas, memo);
  g.report = score(problem.dag, match.matched);
  for (auto& n : match.log) n.achieved = g.report.achieved.contains(n.index);
  g.nodes = std::move(match.log);
  return g;
}

inline ProblemGrade grade_solution(const Problem& problem, const CandidateSolution& candidate,
                                   const ConstantsMap& constants, const EquivParams& params) {
  EquivalenceMemo memo(constants, params);
  return grade_solution(problem, candidate, memo);
}

// ---------------------------------------------------------------------------
// Batch grading and aggregation

struct Rollup {
  int count = 0;
  double step_mean = 0;         // mean of per-problem scores
  double step_mean_pooled = 0;  // achieved nodes over total nodes
  double final_accuracy = 0;
  std::optional<double> mean_latency_s;
};

struct AggregateReport {
  std::vector<ProblemGrade> per_problem;
  Rollup overall;
  std::map<std::string, Rollup> by_difficulty;
  std::map<std::string, Rollup> by_domain;
  std::map<std::string, Rollup> by_model;
  int errors = 0;

  [[nodiscard]] int graded() const { return overall.count; }
};

namespace detail {

struct RollupAcc {
  int count = 0;
  double score_sum = 0;
  long long achieved = 0, total = 0;
  int finals = 0;
  double latency_sum = 0;
  int latency_n = 0;

  void add(const ProblemGrade& g) {
    ++count;
    score_sum += g.report.score.to_double();
    achieved += static_cast<long long>(g.report.achieved.size());
    total += static_cast<long long>(g.nodes.size());
    finals += g.report.final_correct ? 1 : 0;
    if (g.latency_s) {
      latency_sum += *g.latency_s;
      ++latency_n;
    }
  }

  [[nodiscard]] Rollup finish() const {
    Rollup r;
    r.count = count;
    if (count == 0) return r;
    r.step_mean = score_sum / count;
    r.step_mean_pooled = total == 0 ? 0.0 : static_cast<double>(achieved) / static_cast<double>(total);
    r.final_accuracy = static_cast<double>(finals) / count;
    if (latency_n > 0) r.mean_latency_s = latency_sum / latency_n;
    return r;
  }
};

inline std::string group_key(const std::string& s, const char* fallback) { return s.empty() ? fallback : s; }

}  // namespace detail

/// Grade every candidate, in parallel over candidates. Output order is by
/// problem id, then model, then input order, independent of `jobs`.
inline AggregateReport grade_dataset(const Dataset& dataset, const std::vector<CandidateSolution>& candidates,
                                     const ConstantsMap& constants, const EquivParams& params, int jobs = 1,
                                     const UnitTable& units = UnitTable::defaults()) {
  params.validate();
  EquivalenceMemo memo(constants, params);
  std::vector<ProblemGrade> results(candidates.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < candidates.size(); i = next++) {
      const auto& c = candidates[i];
      ProblemGrade& g = results[i];
      const Problem* p = dataset.find(c.problem_id);
      if (!p) {
        g.problem_id = c.problem_id;
        g.model = c.model;
        g.latency_s = c.latency_s;
        g.error = "unknown problem id '" + c.problem_id + "'";
        continue;
      }
      try {
        g = grade_solution(*p, c, memo, units);
      } catch (const std::exception& e) {
        g = ProblemGrade{};
        g.problem_id = c.problem_id;
        g.model = c.model;
        g.difficulty = p->difficulty;
        g.domain = p->domain;
        g.latency_s = c.latency_s;
        g.error = e.what();
      }
    }
  };
  const int n_threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(candidates.size(), 1)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = results[a];
    const auto& y = results[b];
    if (x.problem_id != y.problem_id) return id_less(x.problem_id, y.problem_id);
    return x.model < y.model;
  });

  AggregateReport rep;
  detail::RollupAcc all;
  std::map<std::string, detail::RollupAcc> diff, dom, model;
  for (std::size_t i : order) {
    ProblemGrade& g = results[i];
    if (g.ok()) {
      all.add(g);
      diff[detail::group_key(g.difficulty, "unrated")].add(g);
      dom[detail::group_key(g.domain, "unspecified")].add(g);
      model[detail::group_key(g.model, "unnamed")].add(g);
    } else {
      ++rep.errors;
    }
    rep.per_problem.push_back(std::move(g));
  }
  rep.overall = all.finish();
  for (auto& [k, v] : diff) rep.by_difficulty[k] = v.finish();
  for (auto& [k, v] : dom) rep.by_domain[k] = v.finish();
  for (auto& [k, v] : model) rep.by_model[k] = v.finish();
  return rep;
}

// ---------------------------------------------------------------------------
// Report rendering

inline nlohmann::json to_json(const Rollup& r) {
  nlohmann::json j;
  j["count"] = r.count;
  j["step_mean_per_problem"] = r.step_mean;
  j["step_mean_pooled"] = r.step_mean_pooled;
  j["final_accuracy"] = r.final_accuracy;
  j["mean_latency_s"] = r.mean_latency_s ? nlohmann::json(*r.mean_latency_s) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const ProblemGrade& g) {
  nlohmann::json j;
  j["problem_id"] = g.problem_id;
  j["model"] = g.model;
  j["difficulty"] = g.difficulty;
  j["domain"] = g.domain;
  j["latency_s"] = g.latency_s ? nlohmann::json(*g.latency_s) : nlohmann::json(nullptr);
  if (!g.ok()) {
    j["error"] = g.error;
    return j;
  }
  j["score"] = g.report.score.to_string();
  j["score_value"] = g.report.score.to_double();
  j["final_correct"] = g.report.final_correct;
  j["matched"] = g.report.matched;
  j["achieved"] = g.report.achieved;
  nlohmann::json finals = nlohmann::json::array();
  for (const auto& f : g.report.finals) {
    finals.push_back({{"index", f.final_index}, {"matched", f.matched}, {"score", f.score.to_string()}});
  }
  j["finals"] = std::move(finals);
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes) {
    nlohmann::json nj{{"index", n.index}, {"status", status_name(n.status)}, {"achieved", n.achieved}};
    if (!n.matched_by.empty()) nj["matched_by"] = n.matched_by;
    if (!n.diagnostic.empty()) nj["diagnostic"] = n.diagnostic;
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = std::move(nodes);
  j["candidate_formulas"] = g.candidate_formulas;
  nlohmann::json discarded = nlohmann::json::array();
  for (const auto& d : g.discarded) discarded.push_back({{"source", d.source}, {"error", d.error}});
  j["discarded"] = std::move(discarded);
  return j;
}

inline nlohmann::json to_json(const AggregateReport& r, const EquivParams& p) {
  nlohmann::json j;
  j["per_problem"] = nlohmann::json::array();
  for (const auto& g : r.per_problem) j["per_problem"].push_back(to_json(g));
  auto group = [](const std::map<std::string, Rollup>& m) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& [k, v] : m) o[k] = to_json(v);
    return o;
  };
  j["rollups"] = {{"overall", to_json(r.overall)},
                  {"by_difficulty", group(r.by_difficulty)},
                  {"by_domain", group(r.by_domain)},
                  {"by_model", group(r.by_model)}};
  j["run_meta"] = {
      {"seed", p.seed},
      {"errors", r.errors},
      {"params",
       {{"n_max", p.n_max},
        {"n_succ", p.n_succ},
        {"n_eq", p.n_eq},
        {"eps", p.eps},
        {"sample_range", {p.sample_lo, p.sample_hi}},
        {"t_max_ms", p.t_max.count()}}},
      {"versions",
       {{"stepgrade", STEPGRADE_VERSION},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
  return j;
}

inline std::string to_tsv(const AggregateReport& r) {
  std::ostringstream os;
  os << "problem_id\tmodel\tscore\tscore_value\tfinal_correct\tmatched\tnodes\terror\n";
  for (const auto& g : r.per_problem) {
    os << g.problem_id << '\t' << g.model << '\t';
    if (g.ok()) {
      os << g.report.score.to_string() << '\t' << g.report.score.to_double() << '\t'
         << (g.report.final_correct ? "yes" : "no") << '\t' << g.report.matched.size() << '\t' << g.nodes.size()
         << "\t\n";
    } else {
      os << "\t\t\t\t\t" << g.error << '\n';
    }
  }
  os << "\ngroup\tkey\tcount\tstep_mean\tstep_mean_pooled\tfinal_accuracy\n";
  auto line = [&](const std::string& group, const std::string& key, const Rollup& x) {
    os << group << '\t' << key << '\t' << x.count << '\t' << x.step_mean << '\t' << x.step_mean_pooled << '\t'
       << x.final_accuracy << '\n';
  };
  line("overall", "all", r.overall);
  for (const auto& [k, v] : r.by_difficulty) line("difficulty", k, v);
  for (const auto& [k, v] : r.by_domain) line("domain", k, v);
  for (const auto& [k, v] : r.by_model) line("model", k, v);
  return os.str();
}

}  // namespace stepgrade

#endif  // STEPGRADE_GRADING_HPP
