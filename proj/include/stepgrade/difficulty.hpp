#ifndef STEPGRADE_DIFFICULTY_HPP
#define STEPGRADE_DIFFICULTY_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stepgrade/rubric.hpp"

namespace stepgrade {

/// Longest-path layer of every node (1-based), parallel to dag.nodes().
inline std::vector<int> dag_layers(const RubricDag& dag) {
  std::vector<int> layer(dag.size(), 1);
  for (std::size_t i = 0; i < dag.size(); ++i) {
    for (int d : dag.nodes()[i].dependency) {
      if (dag.contains(d) && static_cast<std::size_t>(d - 1) < i) layer[i] = std::max(layer[i], layer[d - 1] + 1);
    }
  }
  return layer;
}

/// Sum over layers of ln(width).
inline double dag_entropy(const RubricDag& dag) {
  std::map<int, int> width;
  for (int l : dag_layers(dag)) ++width[l];
  double e = 0;
  for (const auto& [l, w] : width) e += std::log(static_cast<double>(w));
  return e;
}

enum class Difficulty { Easy, Medium, Hard };

inline const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "Easy";
    case Difficulty::Medium: return "Medium";
    case Difficulty::Hard: return "Hard";
  }
  return "unknown";
}

/// S <= easy_max is Easy, S <= medium_max is Medium, the rest Hard.
struct DifficultyBands {
  int easy_max = 4;
  int medium_max = 6;
};

struct DifficultyInput {
  int c1 = 1;
  int c2 = 1;
  double entropy = 0;
  double tau1 = 0;
  double tau2 = 0;
};

struct DifficultyResult {
  int c1 = 0, c2 = 0, c3 = 0;
  double entropy = 0;
  int total = 0;
  Difficulty label = Difficulty::Easy;
};

inline DifficultyResult difficulty_label(const DifficultyInput& in, const DifficultyBands& bands = {}) {
  if (in.c1 < 1 || in.c1 > 3 || in.c2 < 1 || in.c2 > 3) throw std::invalid_argument("c1 and c2 must be in 1..3");
  if (!(in.tau1 < in.tau2)) throw std::invalid_argument("need tau1 < tau2");
  DifficultyResult r;
  r.c1 = in.c1;
  r.c2 = in.c2;
  r.entropy = in.entropy;
  r.c3 = in.entropy <= in.tau1 ? 1 : (in.entropy <= in.tau2 ? 2 : 3);
  r.total = r.c1 + r.c2 + r.c3;
  r.label = r.total <= bands.easy_max ? Difficulty::Easy
            : r.total <= bands.medium_max ? Difficulty::Medium
                                          : Difficulty::Hard;
  return r;
}

inline DifficultyResult difficulty_label(int c1, int c2, const RubricDag& dag, double tau1, double tau2,
                                         const DifficultyBands& bands = {}) {
  return difficulty_label(DifficultyInput{c1, c2, dag_entropy(dag), tau1, tau2}, bands);
}

/// Default thresholds: the 1/3 and 2/3 quantiles (linear interpolation) of
/// the entropies. tau2 is nudged above tau1 when they coincide.
inline std::pair<double, double> tertile_thresholds(std::vector<double> entropies) {
  if (entropies.empty()) return {0.0, std::nextafter(0.0, 1.0)};
  std::sort(entropies.begin(), entropies.end());
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(entropies.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, entropies.size() - 1);
    return entropies[lo] + (pos - static_cast<double>(lo)) * (entropies[hi] - entropies[lo]);
  };
  double t1 = quantile(1.0 / 3.0), t2 = quantile(2.0 / 3.0);
  if (!(t1 < t2)) t2 = std::nextafter(t1, std::numeric_limits<double>::infinity());
  return {t1, t2};
}

}  // namespace stepgrade

#endif  // STEPGRADE_DIFFICULTY_HPP
