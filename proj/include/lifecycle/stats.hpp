#pragma once

// Nonparametric tests, effect sizes and descriptive statistics.

#include "lifecycle/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace lifecycle::stats {

// Exact null distributions are enumerated up to this many observations.
inline constexpr std::size_t kExactLimit = 12;

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool exact = false;
  bool degenerate = false;
};

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double two_sided_normal_p(double z) { return std::min(1.0, 2.0 * normal_cdf(-std::abs(z))); }

struct Ranking {
  std::vector<double> ranks;  // midranks, aligned with the input
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
  bool has_ties = false;
};

inline Ranking midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  Ranking r;
  r.ranks.assign(n, 0.0);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = rank;
    const double t = static_cast<double>(j - i + 1);
    if (t > 1) {
      r.has_ties = true;
      r.tie_term += t * t * t - t;
    }
    i = j + 1;
  }
  return r;
}

namespace detail {

// Two-sided p from an integer-valued null distribution given as counts.
inline double two_sided_from_counts(const std::vector<double>& counts, std::size_t observed) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double lower = 0.0, upper = 0.0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (s <= observed) lower += counts[s];
    if (s >= observed) upper += counts[s];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

// counts[s] = number of k-subsets of {1..n} with element sum s.
inline std::vector<double> subset_sum_counts(std::size_t n, std::size_t k) {
  const std::size_t max_sum = n * (n + 1) / 2;
  std::vector<std::vector<double>> dp(k + 1, std::vector<double>(max_sum + 1, 0.0));
  dp[0][0] = 1.0;
  for (std::size_t item = 1; item <= n; ++item)
    for (std::size_t size = std::min(item, k); size >= 1; --size)
      for (std::size_t s = max_sum; s >= item; --s) dp[size][s] += dp[size - 1][s - item];
  return dp[k];
}

// counts[s] = number of subsets of {1..n} (any size) with element sum s.
inline std::vector<double> signed_rank_counts(std::size_t n) {
  const std::size_t max_sum = n * (n + 1) / 2;
  std::vector<double> dp(max_sum + 1, 0.0);
  dp[0] = 1.0;
  for (std::size_t item = 1; item <= n; ++item)
    for (std::size_t s = max_sum; s >= item; --s) dp[s] += dp[s - item];
  return dp;
}

}  // namespace detail

// U is reported for sample_a: the number of (a, b) pairs with a > b, ties
// counting one half.
inline TestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b) {
  if (sample_a.empty() || sample_b.empty())
    throw Error(ErrorKind::Domain, "Mann-Whitney U needs two non-empty samples");
  const std::size_t na = sample_a.size(), nb = sample_b.size(), n = na + nb;
  std::vector<double> pooled(sample_a.begin(), sample_a.end());
  pooled.insert(pooled.end(), sample_b.begin(), sample_b.end());
  const auto ranking = midranks(pooled);
  const double rank_sum_a = std::accumulate(ranking.ranks.begin(), ranking.ranks.begin() + na, 0.0);
  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb), dn = static_cast<double>(n);

  TestResult out;
  out.statistic = rank_sum_a - dna * (dna + 1.0) / 2.0;

  if (n <= kExactLimit && !ranking.has_ties) {
    out.exact = true;
    const auto counts = detail::subset_sum_counts(n, na);
    out.p_value = detail::two_sided_from_counts(counts, static_cast<std::size_t>(std::lround(rank_sum_a)));
    return out;
  }
  const double mean = dna * dnb / 2.0;
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - ranking.tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) {
    out.degenerate = true;
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(out.statistic - mean) - 0.5) / std::sqrt(var);
  out.p_value = two_sided_normal_p(z);
  return out;
}

// W is the sum of the ranks of |d| over positive differences; zeros dropped.
inline TestResult wilcoxon_signed_rank(std::span<const double> diffs) {
  std::vector<double> nonzero;
  for (double d : diffs)
    if (d != 0.0) nonzero.push_back(d);
  TestResult out;
  if (nonzero.empty()) {
    out.degenerate = true;
    out.p_value = 1.0;
    return out;
  }
  std::vector<double> magnitude(nonzero.size());
  std::transform(nonzero.begin(), nonzero.end(), magnitude.begin(), [](double d) { return std::abs(d); });
  const auto ranking = midranks(magnitude);
  for (std::size_t i = 0; i < nonzero.size(); ++i)
    if (nonzero[i] > 0.0) out.statistic += ranking.ranks[i];

  const std::size_t n = nonzero.size();
  if (n <= kExactLimit && !ranking.has_ties) {
    out.exact = true;
    out.p_value = detail::two_sided_from_counts(detail::signed_rank_counts(n),
                                                static_cast<std::size_t>(std::lround(out.statistic)));
    return out;
  }
  const double dn = static_cast<double>(n);
  const double mean = dn * (dn + 1.0) / 4.0;
  const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - ranking.tie_term / 48.0;
  if (!(var > 0.0)) {
    out.degenerate = true;
    out.p_value = 1.0;
    return out;
  }
  out.p_value = two_sided_normal_p((out.statistic - mean) / std::sqrt(var));
  return out;
}

inline double mean(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorKind::Domain, "mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Sample variance (n - 1 denominator).
inline double variance(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorKind::Domain, "variance needs at least two observations");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

inline double cohens_d(std::span<const double> group_a, std::span<const double> group_b) {
  if (group_a.size() < 2 || group_b.size() < 2)
    throw Error(ErrorKind::Domain, "Cohen's d needs at least two observations per group");
  const double na = static_cast<double>(group_a.size()), nb = static_cast<double>(group_b.size());
  const double pooled =
      std::sqrt(((na - 1.0) * variance(group_a) + (nb - 1.0) * variance(group_b)) / (na + nb - 2.0));
  if (!(pooled > 0.0)) throw Error(ErrorKind::Undefined, "Cohen's d undefined: pooled standard deviation is zero");
  return (mean(group_a) - mean(group_b)) / pooled;
}

inline double median(std::vector<double> x) {
  if (x.empty()) throw Error(ErrorKind::Domain, "median of an empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
inline double percentile_nearest_rank(std::vector<double> x, double p) {
  if (x.empty()) throw Error(ErrorKind::Domain, "percentile of an empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  // Guard against p/100*n landing a hair above an integer.
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
  return x[std::clamp<std::size_t>(rank, 1, x.size()) - 1];
}

// Linear-interpolation quantile (R type 7).
inline double quantile_linear(std::vector<double> x, double q) {
  if (x.empty()) throw Error(ErrorKind::Domain, "quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
};

inline Summary summarize(std::span<const double> x) {
  Summary s;
  s.n = x.size();
  if (x.empty()) {
    s.mean = s.sd = s.p5 = s.p95 = std::nan("");
    return s;
  }
  s.mean = mean(x);
  s.sd = x.size() > 1 ? std::sqrt(variance(x)) : 0.0;
  std::vector<double> v(x.begin(), x.end());
  s.p5 = percentile_nearest_rank(v, 5.0);
  s.p95 = percentile_nearest_rank(v, 95.0);
  return s;
}

// 0.9 * min(sd, IQR / 1.34) * n^(-1/5); falls back to sd when the IQR is zero.
inline double silverman_bandwidth(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorKind::Domain, "bandwidth needs at least two observations");
  const double sd = std::sqrt(variance(values));
  std::vector<double> v(values.begin(), values.end());
  const double iqr = quantile_linear(v, 0.75) - quantile_linear(v, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0))
    throw Error(ErrorKind::Undefined, "sample has zero spread; supply an explicit bandwidth");
  return 0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);
}

// Gaussian kernel density evaluated at each grid point. bandwidth <= 0
// selects Silverman's rule.
inline std::vector<double> kernel_density(std::span<const double> values, std::span<const double> grid,
                                          double bandwidth = 0.0) {
  if (values.size() < 2) throw Error(ErrorKind::Domain, "kernel density needs at least two observations");
  const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(values);
  const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * M_PI));
  std::vector<double> out;
  out.reserve(grid.size());
  for (double x : grid) {
    double s = 0.0;
    for (double v : values) {
      const double z = (x - v) / h;
      s += std::exp(-0.5 * z * z);
    }
    out.push_back(s * norm);
  }
  return out;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t points) {
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i)
    out[i] = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return out;
}

}  // namespace lifecycle::stats
