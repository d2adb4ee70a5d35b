// Independent reference implementations used by the tests. Deliberately
// naive: matrix closure, definition-level pair counting, full enumeration.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "stepgrade/rubric.hpp"

namespace oracle {

// Random valid DAG with n nodes: forward edges with probability p, the last
// node final, and every sink either final or wired into a later node.
inline stepgrade::RubricDag random_dag(std::mt19937_64& rng, int n, double p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<stepgrade::RubricNode> nodes(n);
  for (int v = 1; v <= n; ++v) {
    nodes[v - 1].index = v;
    nodes[v - 1].formula = "$$x_{" + std::to_string(v) + "} = " + std::to_string(v) + "$$";
    for (int d = 1; d < v; ++d) {
      if (u(rng) < p) nodes[v - 1].dependency.push_back(d);
    }
    std::shuffle(nodes[v - 1].dependency.begin(), nodes[v - 1].dependency.end(), rng);
  }
  nodes[n - 1].is_final_answer = true;
  for (int v = n - 1; v >= 1; --v) {
    bool has_dependent = false;
    for (int w = v + 1; w <= n && !has_dependent; ++w) {
      const auto& deps = nodes[w - 1].dependency;
      has_dependent = std::find(deps.begin(), deps.end(), v) != deps.end();
    }
    if (has_dependent) continue;
    if (u(rng) < 0.3) {
      nodes[v - 1].is_final_answer = true;
    } else {
      int w = std::uniform_int_distribution<int>(v + 1, n)(rng);
      nodes[w - 1].dependency.push_back(v);
    }
  }
  return stepgrade::RubricDag(std::move(nodes));
}

// reach[i][j]: i is an ancestor of j (Warshall over the dependency edges).
inline std::vector<std::vector<bool>> reach_matrix(const stepgrade::RubricDag& dag) {
  const int n = static_cast<int>(dag.size());
  std::vector<std::vector<bool>> r(n + 1, std::vector<bool>(n + 1, false));
  for (const auto& node : dag.nodes()) {
    for (int d : node.dependency) r[d][node.index] = true;
  }
  for (int k = 1; k <= n; ++k)
    for (int i = 1; i <= n; ++i)
      if (r[i][k])
        for (int j = 1; j <= n; ++j)
          if (r[k][j]) r[i][j] = true;
  return r;
}

inline std::set<int> closure(const stepgrade::RubricDag& dag, const std::set<int>& matched) {
  auto r = reach_matrix(dag);
  std::set<int> out = matched;
  for (int i = 1; i <= static_cast<int>(dag.size()); ++i) {
    for (int m : matched) {
      if (r[i][m]) out.insert(i);
    }
  }
  return out;
}

struct PairCounts {
  long long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, tied_both = 0;
};

inline PairCounts count_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  PairCounts c;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      bool tx = x[i] == x[j], ty = y[i] == y[j];
      if (tx && ty) {
        ++c.tied_both;
      } else if (tx) {
        ++c.tied_x;
      } else if (ty) {
        ++c.tied_y;
      } else if ((x[i] < x[j]) == (y[i] < y[j])) {
        ++c.concordant;
      } else {
        ++c.discordant;
      }
    }
  }
  return c;
}

// tau_b = (nc - nd) / sqrt((n0 - n1)(n0 - n2)); NaN when undefined.
inline double tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  auto c = count_pairs(x, y);
  long long n = static_cast<long long>(x.size());
  long long n0 = n * (n - 1) / 2;
  long long n1 = c.tied_x + c.tied_both, n2 = c.tied_y + c.tied_both;
  double denom = std::sqrt(static_cast<double>((n0 - n1) * (n0 - n2)));
  if (denom == 0) return std::nan("");
  return static_cast<double>(c.concordant - c.discordant) / denom;
}

// Exact two-sided permutation p over all n! orderings of y.
inline double exhaustive_p(const std::vector<double>& x, const std::vector<double>& y) {
  double observed = std::fabs(tau_b(x, y));
  std::vector<int> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  long long hits = 0, total = 0;
  std::vector<double> perm(y.size());
  do {
    for (std::size_t i = 0; i < idx.size(); ++i) perm[i] = y[idx[i]];
    if (std::fabs(tau_b(x, perm)) >= observed - 1e-12) ++hits;
    ++total;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace oracle
