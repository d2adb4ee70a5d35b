#ifndef STEPGRADE_SOLVE_HPP
#define STEPGRADE_SOLVE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "stepgrade/eval.hpp"
#include "stepgrade/expr.hpp"

namespace stepgrade {

/// Sorted real roots of one formula for one target variable.
using SolutionSet = std::vector<double>;

enum class SolveStatus {
  Ok,
  Timeout,
  DomainError,  // the residual is non-finite at every probe
};

struct SolveResult {
  SolveStatus status = SolveStatus::Ok;
  SolutionSet roots;
};

struct SolverOptions {
  double eps = 1e-6;
  std::chrono::nanoseconds t_max = std::chrono::milliseconds(200);
  double tangent_threshold = 1e-9;  // relative to neighbouring probes
};

/// True iff both sets have the same size and the sorted elements agree within
/// |a - b| <= eps * max(1, |a|, |b|).
inline bool all_close(const SolutionSet& s1, const SolutionSet& s2, double eps) {
  if (s1.size() != s2.size()) return false;
  for (std::size_t i = 0; i < s1.size(); ++i) {
    double a = s1[i], b = s2[i];
    if (!(std::fabs(a - b) <= eps * std::max({1.0, std::fabs(a), std::fabs(b)}))) return false;
  }
  return true;
}

namespace detail {

inline constexpr double kSearchBound = 1e6;
inline constexpr std::size_t kProbeCount = 4096;

// 1536 log-spaced magnitudes per sign over [1e-6, 1e6] plus 1024 linear
// probes over [-100, 100), merged and sorted.
inline const std::vector<double>& probe_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g;
    g.reserve(kProbeCount);
    constexpr int per_side = 1536;
    for (int i = 0; i < per_side; ++i) {
      double x = std::pow(10.0, -6.0 + 12.0 * i / (per_side - 1));
      g.push_back(x);
      g.push_back(-x);
    }
    constexpr int linear = 1024;
    for (int k = -linear / 2; k < linear / 2; ++k) g.push_back(k * (100.0 / (linear / 2)));
    std::sort(g.begin(), g.end());
    return g;
  }();
  return grid;
}

// Bisect down to adjacent doubles. Stopping at a relative width leaves a
// residual that scales with the slope, and the acceptance test then depends
// on how the formula happens to be written (steep roots of sin(w t) at large
// w pass for "y + c = ..." but not for "y = ...").
inline double bisect(const UnaryProgram& r, double lo, double hi, double rlo) {
  for (int iter = 0; iter < 2200; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) return mid;
    double rm = r(mid);
    if (rm == 0.0) return mid;
    if (!std::isfinite(rm)) return mid;
    if ((rm < 0) == (rlo < 0)) {
      lo = mid;
      rlo = rm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Golden-section minimisation of |r| on [lo, hi].
inline double minimize_abs(const UnaryProgram& r, double lo, double hi) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = std::fabs(r(c)), fd = std::fabs(r(d));
  for (int iter = 0; iter < 80; ++iter) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = std::fabs(r(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = std::fabs(r(d));
    }
  }
  return fc < fd ? c : d;
}

// Last finite point between a finite probe `in` and a non-finite probe `out`.
inline double domain_edge(const UnaryProgram& r, double in, double out) {
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (in + out);
    if (mid == in || mid == out) break;
    if (std::isfinite(r(mid))) {
      in = mid;
    } else {
      out = mid;
    }
  }
  return in;
}

inline SolutionSet dedupe(SolutionSet roots, double eps) {
  std::sort(roots.begin(), roots.end());
  SolutionSet out;
  for (double x : roots) {
    if (!out.empty() && std::fabs(x - out.back()) <= eps * std::max({1.0, std::fabs(x), std::fabs(out.back())})) {
      continue;
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace detail

/// All real roots of lhs - rhs in [-1e6, 1e6] for one target variable.
///
/// The residual is scanned on a fixed composite grid; sign changes are
/// refined by bisection and strict local minima of |residual| that get below
/// `tangent_threshold` times the neighbouring probes' |residual| are accepted
/// as touching roots. Candidates whose
/// residual is not small relative to the magnitude of the two sides (poles)
/// are discarded.
inline SolveResult solve_target(const Formula& f, const std::string& target, const Assignment& assignment,
                                const SolverOptions& opt = {}) {
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + opt.t_max;

  const UnaryProgram residual = UnaryProgram::residual(f, target, assignment);
  const UnaryProgram lhs = UnaryProgram::of(f.lhs, target, assignment);
  const UnaryProgram rhs = UnaryProgram::of(f.rhs, target, assignment);
  const auto& grid = detail::probe_grid();

  std::vector<double> values(grid.size());
  bool any_finite = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if ((i & 255) == 0 && Clock::now() > deadline) return {SolveStatus::Timeout, {}};
    values[i] = residual(grid[i]);
    any_finite = any_finite || std::isfinite(values[i]);
  }
  if (!any_finite) return {SolveStatus::DomainError, {}};

  auto accept = [&](double x) {
    double r = residual(x);
    if (!std::isfinite(r)) return false;
    double scale = std::max({1.0, std::fabs(lhs(x)), std::fabs(rhs(x))});
    return std::fabs(r) <= opt.eps * scale;
  };

  SolutionSet roots;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if ((i & 255) == 0 && Clock::now() > deadline) return {SolveStatus::Timeout, {}};
    const double ri = values[i];
    if (!std::isfinite(ri)) continue;
    if (ri == 0.0) {
      roots.push_back(grid[i]);
      continue;
    }
    if (i + 1 < grid.size()) {
      const double rn = values[i + 1];
      if (std::isfinite(rn) && rn != 0.0 && (ri < 0) != (rn < 0)) {
        double x = detail::bisect(residual, grid[i], grid[i + 1], ri);
        if (accept(x)) roots.push_back(x);
        continue;
      }
    }
    // A root can sit between the last finite probe and the domain boundary
    // (sqrt(1 - x^2) near |x| = 1); look for the sign change at the edge.
    for (int side : {-1, 1}) {
      if ((side < 0 && i == 0) || (side > 0 && i + 1 == grid.size())) continue;
      std::size_t j = side < 0 ? i - 1 : i + 1;
      if (std::isfinite(values[j])) continue;
      double edge = detail::domain_edge(residual, grid[i], grid[j]);
      double re = residual(edge);
      if (edge == grid[i] || !std::isfinite(re)) continue;
      if (re == 0.0) {
        if (accept(edge)) roots.push_back(edge);
      } else if ((re < 0) != (ri < 0)) {
        double lo = std::min(grid[i], edge), hi = std::max(grid[i], edge);
        double x = detail::bisect(residual, lo, hi, residual(lo));
        if (accept(x)) roots.push_back(x);
      }
    }
    if (i > 0 && i + 1 < grid.size()) {
      const double rp = values[i - 1], rn = values[i + 1];
      if (std::isfinite(rp) && std::isfinite(rn) && std::fabs(ri) < std::fabs(rp) && std::fabs(ri) < std::fabs(rn) &&
          (rp < 0) == (ri < 0) && (rn < 0) == (ri < 0)) {
        double x = detail::minimize_abs(residual, grid[i - 1], grid[i + 1]);
        double rx = residual(x);
        // relative to the neighbouring probes so that rescaling a formula
        // cannot change which near-touches count
        if (std::isfinite(rx) && std::fabs(rx) < opt.tangent_threshold * std::max(std::fabs(rp), std::fabs(rn)) &&
            accept(x)) {
          roots.push_back(x);
        }
      }
    }
  }
  return {SolveStatus::Ok, detail::dedupe(std::move(roots), opt.eps)};
}

}  // namespace stepgrade

#endif  // STEPGRADE_SOLVE_HPP
