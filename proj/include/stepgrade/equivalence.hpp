#ifndef STEPGRADE_EQUIVALENCE_HPP
#define STEPGRADE_EQUIVALENCE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepgrade/constants.hpp"
#include "stepgrade/eval.hpp"
#include "stepgrade/expr.hpp"
#include "stepgrade/rng.hpp"
#include "stepgrade/solve.hpp"

namespace stepgrade {

inline constexpr std::uint64_t kDefaultSeed = 1234567;

struct EquivParams {
  int n_max = 40;   // trial cap
  int n_succ = 10;  // valid (non-failure) trials needed before stopping
  int n_eq = 10;    // non-rejecting trials needed for Equivalent
  double eps = 1e-6;
  double sample_lo = 2.0;
  double sample_hi = 20.0;
  std::chrono::milliseconds t_max{200};
  std::uint64_t seed = kDefaultSeed;
  bool diagnostics = false;  // keep the per-trial log

  void validate() const {
    if (!(n_eq <= n_succ && n_succ <= n_max && n_eq >= 1)) throw std::invalid_argument("need 1 <= n_eq <= n_succ <= n_max");
    if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
    if (!(0 < sample_lo && sample_lo < sample_hi)) throw std::invalid_argument("need 0 < sample_lo < sample_hi");
    if (t_max.count() <= 0) throw std::invalid_argument("t_max must be positive");
  }

  /// Text form of every field that affects verdicts.
  [[nodiscard]] std::string fingerprint() const {
    return std::to_string(n_max) + "/" + std::to_string(n_succ) + "/" + std::to_string(n_eq) + "/" +
           detail::format_number(eps) + "/" + detail::format_number(sample_lo) + ":" +
           detail::format_number(sample_hi) + "/" + std::to_string(seed);
  }
};

enum class Verdict { Equivalent, Inequivalent };

enum class TrialOutcome { NonRejecting, Rejecting, Failure };

struct TrialRecord {
  std::string target;  // empty for constant formulas
  Assignment assignment;
  SolveResult first;
  SolveResult second;
  TrialOutcome outcome = TrialOutcome::Failure;
};

struct EquivVerdict {
  Verdict verdict = Verdict::Inequivalent;
  int n_eq_observed = 0;
  int n_neq_observed = 0;
  int n_fail_observed = 0;
  std::string note;  // set when no trials ran (relation mismatch)
  std::vector<TrialRecord> trials;

  [[nodiscard]] bool equivalent() const { return verdict == Verdict::Equivalent; }
  [[nodiscard]] int trials_executed() const { return n_eq_observed + n_neq_observed + n_fail_observed; }
};

namespace detail {

enum class RelationClass { Equality, Strict, NonStrict };

struct OrientedFormula {
  Formula formula;  // Greater/GreaterEqual flipped to Less/LessEqual
  RelationClass cls;
};

inline OrientedFormula orient(const Formula& f) {
  switch (f.relation) {
    case Relation::Equal:
    case Relation::Approx: return {f, RelationClass::Equality};
    case Relation::Less: return {f, RelationClass::Strict};
    case Relation::LessEqual: return {f, RelationClass::NonStrict};
    case Relation::Greater: return {Formula{f.rhs, f.lhs, Relation::Less}, RelationClass::Strict};
    case Relation::GreaterEqual: return {Formula{f.rhs, f.lhs, Relation::LessEqual}, RelationClass::NonStrict};
  }
  return {f, RelationClass::Equality};
}

inline std::optional<bool> holds(const Formula& f, const Assignment& env) {
  double l = evaluate(f.lhs, env), r = evaluate(f.rhs, env);
  if (!std::isfinite(l) || !std::isfinite(r)) return std::nullopt;
  return f.relation == Relation::Less ? l < r : l <= r;
}

inline TrialOutcome compare_constant(const Formula& a, const Formula& b, double eps) {
  const Assignment none;
  SolutionSet va{evaluate(a.lhs, none), evaluate(a.rhs, none)};
  SolutionSet vb{evaluate(b.lhs, none), evaluate(b.rhs, none)};
  for (double v : va) {
    if (!std::isfinite(v)) return TrialOutcome::Failure;
  }
  for (double v : vb) {
    if (!std::isfinite(v)) return TrialOutcome::Failure;
  }
  std::sort(va.begin(), va.end());
  std::sort(vb.begin(), vb.end());
  return all_close(va, vb, eps) ? TrialOutcome::NonRejecting : TrialOutcome::Rejecting;
}

}  // namespace detail

/// Randomized equivalence check of two formulas.
///
/// Both formulas go through constant substitution; then each trial picks a
/// target variable uniformly from the union of free variables, draws the
/// others uniformly from [sample_lo, sample_hi], solves both formulas for the
/// target and compares the root sets. A trial where neither formula has a
/// root, or where a solve hit a domain error or its time budget, is a
/// failure and does not count. The run stops on the first rejecting trial
/// or once n_succ valid trials have been seen.
///
/// The random stream is seeded from `p.seed` and the lexicographically
/// smaller canonical print of the two formulas, so the verdict does not
/// depend on argument order.
inline EquivVerdict check_equivalence(const Formula& f1, const Formula& f2, const ConstantsMap& constants,
                                      const EquivParams& p) {
  p.validate();
  EquivVerdict out;

  auto o1 = detail::orient(f1);
  auto o2 = detail::orient(f2);
  if (o1.cls != o2.cls) {
    out.note = "relation kinds differ";
    return out;
  }
  const bool inequality = o1.cls != detail::RelationClass::Equality;

  const std::string print1 = to_latex(f1), print2 = to_latex(f2);
  Rng rng(mix_seed(p.seed, fnv1a64(std::min(print1, print2))));

  const Formula e1 = substitute_constants(o1.formula, constants);
  const Formula e2 = substitute_constants(o2.formula, constants);

  std::set<std::string> vars = free_variables(e1);
  vars.merge(free_variables(e2));
  const std::vector<std::string> variables(vars.begin(), vars.end());

  SolverOptions solver;
  solver.eps = p.eps;
  solver.t_max = p.t_max;

  for (int k = 1; k <= p.n_max; ++k) {
    TrialRecord trial;
    if (variables.empty()) {
      trial.outcome = detail::compare_constant(e1, e2, p.eps);
    } else {
      trial.target = variables[rng.index(variables.size())];
      for (const auto& v : variables) {
        if (v != trial.target) trial.assignment[v] = rng.uniform(p.sample_lo, p.sample_hi);
      }
      trial.first = solve_target(e1, trial.target, trial.assignment, solver);
      trial.second = solve_target(e2, trial.target, trial.assignment, solver);
      if (trial.first.status != SolveStatus::Ok || trial.second.status != SolveStatus::Ok) {
        trial.outcome = TrialOutcome::Failure;
      } else if (!trial.first.roots.empty() || !trial.second.roots.empty()) {
        trial.outcome = all_close(trial.first.roots, trial.second.roots, p.eps) ? TrialOutcome::NonRejecting
                                                                                : TrialOutcome::Rejecting;
      } else {
        trial.outcome = TrialOutcome::Failure;
      }
      if (inequality && trial.outcome != TrialOutcome::Rejecting) {
        // Equal boundaries are necessary but not sufficient; the two
        // inequalities must also agree on which side of it holds.
        Assignment full = trial.assignment;
        full[trial.target] = rng.uniform(p.sample_lo, p.sample_hi);
        auto h1 = detail::holds(e1, full), h2 = detail::holds(e2, full);
        if (h1 && h2 && *h1 != *h2) trial.outcome = TrialOutcome::Rejecting;
      }
    }

    switch (trial.outcome) {
      case TrialOutcome::NonRejecting: ++out.n_eq_observed; break;
      case TrialOutcome::Rejecting: ++out.n_neq_observed; break;
      case TrialOutcome::Failure: ++out.n_fail_observed; break;
    }
    const bool rejected = trial.outcome == TrialOutcome::Rejecting;
    if (p.diagnostics) out.trials.push_back(std::move(trial));
    if (rejected) break;
    if (out.n_eq_observed + out.n_neq_observed >= p.n_succ && k >= p.n_succ) break;
  }

  out.verdict = (out.n_eq_observed >= p.n_eq && out.n_neq_observed == 0) ? Verdict::Equivalent : Verdict::Inequivalent;
  return out;
}

inline EquivVerdict check_equivalence(const Formula& f1, const Formula& f2, const EquivParams& p = {}) {
  return check_equivalence(f1, f2, ConstantsMap{}, p);
}

}  // namespace stepgrade

#endif  // STEPGRADE_EQUIVALENCE_HPP
