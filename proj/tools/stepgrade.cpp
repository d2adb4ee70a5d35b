// stepgrade: validate rubric datasets, grade candidate solutions, annotate
// difficulty and compute annotation agreement.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stepgrade/stepgrade.hpp"

namespace {

using nlohmann::json;
using namespace stepgrade;

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string dataset;
  std::string candidates;
  std::string constants;
  std::string units;
  std::string out;
  std::string format = "json";
  std::uint64_t seed = kDefaultSeed;
  int jobs = 1;
  int n_max = 40;
  int n_succ = 10;
  int n_eq = 10;
  double eps = 1e-6;
  std::string sample_range = "2:20";
  long t_max_ms = 200;
  bool self = false;
  // annotate
  std::string annotations;
  std::optional<double> tau1, tau2;
  // stats
  std::string pairs;
  int n_perm = 10000;
};

EquivParams make_params(const Options& o) {
  EquivParams p;
  p.n_max = o.n_max;
  p.n_succ = o.n_succ;
  p.n_eq = std::min(o.n_eq, o.n_succ);
  p.eps = o.eps;
  p.seed = o.seed;
  p.t_max = std::chrono::milliseconds(o.t_max_ms);
  auto colon = o.sample_range.find(':');
  if (colon == std::string::npos) throw UsageError("--sample-range must look like LO:HI");
  try {
    p.sample_lo = std::stod(o.sample_range.substr(0, colon));
    p.sample_hi = std::stod(o.sample_range.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--sample-range must look like LO:HI");
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return p;
}

UnitTable load_units(const Options& o) { return o.units.empty() ? UnitTable::defaults() : UnitTable::load(o.units); }

ConstantsMap load_constants(const Options& o, const UnitTable& units) {
  return o.constants.empty() ? ConstantsMap::defaults() : ConstantsMap::load(o.constants, units);
}

void write_output(const Options& o, const std::string& text) {
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + o.out + "'");
  f << text;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::vector<json> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DatasetError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

json issue_json(const Issue& i) { return {{"kind", issue_name(i.kind)}, {"index", i.index}, {"message", i.message}}; }

int cmd_validate(const Options& o) {
  const UnitTable units = load_units(o);
  const Dataset ds = load_dataset(o.dataset, units);
  json problems = json::array();
  int bad = 0;
  std::ostringstream tsv;
  tsv << "problem_id\tseverity\tkind\tindex\tmessage\n";
  for (const auto& p : ds.problems) {
    auto rep = validate(p);
    json v = json::array(), w = json::array();
    for (const auto& i : rep.issues) {
      (i.warning ? w : v).push_back(issue_json(i));
      tsv << p.id << '\t' << (i.warning ? "warning" : "error") << '\t' << issue_name(i.kind) << '\t' << i.index
          << '\t' << i.message << '\n';
    }
    bad += rep.ok() ? 0 : 1;
    problems.push_back({{"id", p.id}, {"ok", rep.ok()}, {"violations", v}, {"warnings", w}});
  }
  json doc{{"ok", bad == 0}, {"problems", problems}};
  write_output(o, o.format == "tsv" ? tsv.str() : doc.dump(2) + "\n");
  std::cerr << ds.problems.size() << " problems, " << bad << " invalid\n";
  return bad == 0 ? kExitOk : kExitFail;
}

int cmd_grade(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const EquivParams params = make_params(o);
  const UnitTable units = load_units(o);
  const ConstantsMap constants = load_constants(o, units);
  const Dataset ds = load_dataset(o.dataset, units);

  std::vector<CandidateSolution> cands;
  if (o.self) {
    for (const auto& p : ds.problems) cands.push_back({p.id, "reference", p.reference_solution(), std::nullopt});
  } else {
    if (o.candidates.empty()) throw UsageError("grade needs --candidates or --self");
    cands = load_candidates(o.candidates);
  }

  AggregateReport rep = grade_dataset(ds, cands, constants, params, o.jobs, units);
  write_output(o, o.format == "tsv" ? to_tsv(rep) : to_json(rep, params).dump(2) + "\n");

  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& g : rep.per_problem) {
    if (!g.ok()) std::cerr << "problem " << g.problem_id << ": " << g.error << "\n";
  }
  if (rep.graded() == 0) {
    std::cerr << "zero problems graded\n";
    return kExitFail;
  }
  char line[256];
  std::snprintf(line, sizeof line, "graded %d (%d errors): step mean %.4f, final accuracy %.4f, wall %.2fs\n",
                rep.graded(), rep.errors, rep.overall.step_mean, rep.overall.final_accuracy, wall);
  std::cerr << line;
  return kExitOk;
}

int cmd_annotate(const Options& o) {
  const Dataset ds = load_dataset(o.dataset, load_units(o));
  std::vector<double> entropies;
  for (const auto& p : ds.problems) entropies.push_back(dag_entropy(p.dag));
  auto [t1, t2] = tertile_thresholds(entropies);
  if (o.tau1) t1 = *o.tau1;
  if (o.tau2) t2 = *o.tau2;
  if (!(t1 < t2)) throw UsageError("need tau1 < tau2");

  std::string out;
  for (const auto& row : read_jsonl(o.annotations)) {
    std::string id = detail::id_string(row.at("problem_id"));
    const Problem* p = ds.find(id);
    if (!p) throw DatasetError("annotation for unknown problem '" + id + "'");
    auto r = difficulty_label(row.at("c1").get<int>(), row.at("c2").get<int>(), p->dag, t1, t2);
    json j{{"problem_id", id},     {"e", r.entropy}, {"c1", r.c1}, {"c2", r.c2},
           {"c3", r.c3},           {"S", r.total},   {"label", difficulty_name(r.label)}};
    out += j.dump() + "\n";
  }
  write_output(o, out);
  std::fprintf(stderr, "tau1 %.6g, tau2 %.6g\n", t1, t2);
  return kExitOk;
}

int cmd_stats(const Options& o) {
  std::vector<double> x, y;
  for (const auto& row : read_jsonl(o.pairs)) {
    x.push_back(row.at("score_a").get<double>());
    y.push_back(row.at("score_b").get<double>());
  }
  if (x.size() < 2) throw UsageError("need at least two pairs");
  auto tau = kendall_tau_b(x, y);
  if (!tau) {
    std::cerr << "tau_b undefined: one of the rankings is entirely tied\n";
    return kExitFail;
  }
  double p_perm = *permutation_test(x, y, o.n_perm, o.seed, o.jobs);
  if (o.format == "json") {
    json j{{"n", x.size()}, {"tau_b", tau->tau_b}, {"p_asymptotic", tau->p_asymptotic}, {"p_permutation", p_perm},
           {"n_perm", o.n_perm}, {"seed", o.seed}};
    write_output(o, j.dump(2) + "\n");
  } else {
    char buf[256];
    std::snprintf(buf, sizeof buf, "tau_b\tp_asymptotic\tp_permutation\n%.6f\t%.6g\t%.6g\n", tau->tau_b,
                  tau->p_asymptotic, p_perm);
    write_output(o, buf);
  }
  return kExitOk;
}

void add_equiv_flags(CLI::App* c, Options& o) {
  c->add_option("--constants", o.constants, "constants JSON (default: built-in table)")->check(CLI::ExistingFile);
  c->add_option("--seed", o.seed, "base seed")->capture_default_str();
  c->add_option("--jobs", o.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--n-max", o.n_max, "trial cap")->capture_default_str();
  c->add_option("--n-succ", o.n_succ, "valid trials required")->capture_default_str();
  c->add_option("--n-eq", o.n_eq, "non-rejecting trials required")->capture_default_str();
  c->add_option("--eps", o.eps, "relative tolerance")->capture_default_str();
  c->add_option("--sample-range", o.sample_range, "LO:HI sampling range")->capture_default_str();
  c->add_option("--t-max-ms", o.t_max_ms, "per-solve time budget")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stepwise formula grading against rubric DAGs"};
  app.set_version_flag("--version", std::string(STEPGRADE_VERSION));
  app.set_config("--config", "", "TOML/INI file supplying any flag");
  app.require_subcommand(1);
  Options o;

  auto* validate_cmd = app.add_subcommand("validate", "check rubric DAGs against the construction rules");
  validate_cmd->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--units", o.units, "unit table file")->check(CLI::ExistingFile);
  validate_cmd->add_option("--out", o.out);
  validate_cmd->add_option("--format", o.format)->check(CLI::IsMember({"json", "tsv"}));

  auto* grade_cmd = app.add_subcommand("grade", "grade candidate solutions");
  grade_cmd->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingFile);
  grade_cmd->add_option("--candidates", o.candidates, "JSON lines of candidate solutions")->check(CLI::ExistingFile);
  grade_cmd->add_flag("--self", o.self, "grade each problem's own reference solution");
  grade_cmd->add_option("--units", o.units, "unit table file")->check(CLI::ExistingFile);
  grade_cmd->add_option("--out", o.out);
  grade_cmd->add_option("--format", o.format)->check(CLI::IsMember({"json", "tsv"}));
  add_equiv_flags(grade_cmd, o);

  auto* annotate_cmd = app.add_subcommand("annotate", "difficulty labels from c1/c2 ratings and DAG entropy");
  annotate_cmd->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingFile);
  annotate_cmd->add_option("--annotations", o.annotations, "JSON lines {problem_id, c1, c2}")
      ->required()
      ->check(CLI::ExistingFile);
  annotate_cmd->add_option("--tau1", o.tau1, "entropy threshold (default: lower tertile)");
  annotate_cmd->add_option("--tau2", o.tau2, "entropy threshold (default: upper tertile)");
  annotate_cmd->add_option("--out", o.out);

  auto* stats_cmd = app.add_subcommand("stats", "Kendall tau-b agreement with asymptotic and permutation p");
  stats_cmd->add_option("--pairs", o.pairs, "JSON lines {id, score_a, score_b}")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--n-perm", o.n_perm)->capture_default_str()->check(CLI::PositiveNumber);
  stats_cmd->add_option("--seed", o.seed)->capture_default_str();
  stats_cmd->add_option("--jobs", o.jobs)->capture_default_str()->check(CLI::PositiveNumber);
  stats_cmd->add_option("--out", o.out);
  stats_cmd->add_option("--format", o.format, "json or tsv")->check(CLI::IsMember({"json", "tsv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate_cmd) return cmd_validate(o);
    if (*grade_cmd) return cmd_grade(o);
    if (*annotate_cmd) return cmd_annotate(o);
    if (*stats_cmd) return cmd_stats(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConstantsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitUsage;
}
