#ifndef STEPGRADE_KENDALL_HPP
#define STEPGRADE_KENDALL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "stepgrade/rng.hpp"

namespace stepgrade {

struct TauResult {
  double tau_b = 0;
  double p_asymptotic = 1;
  double z = 0;
  long long s = 0;  // n_c - n_d
};

namespace detail {

struct TieSums {
  double pairs = 0;  // sum t(t-1)/2
  double v = 0;      // sum t(t-1)(2t+5)
  double t1 = 0;     // sum t(t-1)
  double t2 = 0;     // sum t(t-1)(t-2)
};

inline TieSums tie_sums(const std::vector<double>& a) {
  std::map<double, long long> groups;
  for (double v : a) ++groups[v];
  TieSums s;
  for (const auto& [value, cnt] : groups) {
    double t = static_cast<double>(cnt);
    s.pairs += t * (t - 1) / 2;
    s.v += t * (t - 1) * (2 * t + 5);
    s.t1 += t * (t - 1);
    s.t2 += t * (t - 1) * (t - 2);
  }
  return s;
}

inline long long s_statistic(const std::vector<double>& x, const std::vector<double>& y) {
  long long s = 0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      int a = (x[i] < x[j]) - (x[j] < x[i]);
      int b = (y[i] < y[j]) - (y[j] < y[i]);
      s += a * b;
    }
  }
  return s;
}

inline void check_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("rankings differ in length");
  if (x.size() < 2) throw std::invalid_argument("need at least two pairs");
}

}  // namespace detail

/// Kendall's tau-b with a two-sided normal-approximation p-value using the
/// tie-corrected variance of S. Empty when either ranking is entirely tied.
inline std::optional<TauResult> kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  detail::check_pairs(x, y);
  const double n = static_cast<double>(x.size());
  const double n0 = n * (n - 1) / 2;
  const auto tx = detail::tie_sums(x), ty = detail::tie_sums(y);
  const double denom = std::sqrt((n0 - tx.pairs) * (n0 - ty.pairs));
  if (!(denom > 0)) return std::nullopt;

  TauResult r;
  r.s = detail::s_statistic(x, y);
  r.tau_b = static_cast<double>(r.s) / denom;
  r.tau_b = std::clamp(r.tau_b, -1.0, 1.0);

  double var = (n * (n - 1) * (2 * n + 5) - tx.v - ty.v) / 18.0 + tx.t1 * ty.t1 / (2 * n * (n - 1));
  if (n > 2) var += tx.t2 * ty.t2 / (9 * n * (n - 1) * (n - 2));
  if (var > 0) {
    r.z = static_cast<double>(r.s) / std::sqrt(var);
    r.p_asymptotic = std::erfc(std::fabs(r.z) / std::sqrt(2.0));
  }
  return r;
}

/// Two-sided permutation p-value, y shuffled with x fixed, add-one smoothed.
/// Permutation k draws from its own stream derived from (seed, k), so the
/// result does not depend on `jobs`.
inline std::optional<double> permutation_test(const std::vector<double>& x, const std::vector<double>& y, int n_perm,
                                              std::uint64_t seed, int jobs = 1) {
  if (n_perm < 1) throw std::invalid_argument("n_perm must be at least 1");
  auto observed = kendall_tau_b(x, y);
  if (!observed) return std::nullopt;
  const double threshold = std::fabs(observed->tau_b) - 1e-12;

  auto run = [&](int begin, int end) {
    long long hits = 0;
    std::vector<double> shuffled;
    for (int k = begin; k < end; ++k) {
      shuffled = y;
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
      for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.index(i + 1)]);
      auto t = kendall_tau_b(x, shuffled);
      if (t && std::fabs(t->tau_b) >= threshold) ++hits;
    }
    return hits;
  };

  long long hits = 0;
  jobs = std::clamp(jobs, 1, n_perm);
  if (jobs == 1) {
    hits = run(0, n_perm);
  } else {
    std::vector<long long> partial(static_cast<std::size_t>(jobs), 0);
    {
      std::vector<std::jthread> pool;
      for (int t = 0; t < jobs; ++t) {
        int begin = static_cast<int>(static_cast<long long>(n_perm) * t / jobs);
        int end = static_cast<int>(static_cast<long long>(n_perm) * (t + 1) / jobs);
        pool.emplace_back([&, t, begin, end] { partial[static_cast<std::size_t>(t)] = run(begin, end); });
      }
    }
    for (long long h : partial) hits += h;
  }
  return static_cast<double>(1 + hits) / static_cast<double>(1 + n_perm);
}

}  // namespace stepgrade

#endif  // STEPGRADE_KENDALL_HPP
