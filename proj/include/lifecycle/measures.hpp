#pragma once

// Per-round deviations from optimal consumption and the debt-aversion index.

#include "lifecycle/error.hpp"
#include "lifecycle/model.hpp"
#include "lifecycle/study_config.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace lifecycle {

struct DeviationMeasures {
  std::string participant_id;
  std::string country;
  int round = 0;
  Treatment treatment = Treatment::Borrowing;
  double m1 = 0.0;  // signed: sum of c*_t(w_t) - c_t, positive = under-consumption
  double m2 = 0.0;  // absolute: sum of |c*_t(w_t) - c_t|
  double m3 = 0.0;  // utility loss against the unconditional optimal path
};

// c*_t(w_t) is re-evaluated at the participant's realized wealth; the
// utility benchmark follows the optimal policy from period 1 on the same
// shocks.
inline DeviationMeasures compute_measures(const LifecyclePath& path, const ModelParams& base) {
  const int horizon = base.horizon;
  const auto n = static_cast<std::size_t>(horizon);
  if (path.consumption.size() != n || path.wealth.size() != n || path.shocks.shocks.size() != n)
    throw Error(ErrorKind::State, "measures need a complete " + std::to_string(horizon) +
                                      "-period path with its shock sequence");
  const auto params = with_treatment(base, path.treatment);
  const OptimalPolicy policy{params};
  const auto benchmark = simulate_optimal(path.treatment, path.shocks, base);

  DeviationMeasures m;
  m.treatment = path.treatment;
  for (int t = 1; t <= horizon; ++t) {
    const double gap = policy(t, path.wealth[t - 1]) - path.consumption[t - 1];
    m.m1 += gap;
    m.m2 += std::abs(gap);
    m.m3 += benchmark.utility[t - 1] - utility(path.consumption[t - 1], params);
  }
  return m;
}

struct DebtAversionIndex {
  double da = 0.0;
  bool degenerate = false;  // total deviation below threshold, da set to 0
};

inline constexpr double kDegenerateDeviation = 1e-9;

// m2 per round in play order; the first half of the rounds share one
// treatment, the second half the other.
inline DebtAversionIndex compute_da(std::span<const double> m2, Ordering ordering) {
  if (m2.empty() || m2.size() % 2 != 0)
    throw Error(ErrorKind::Domain, "debt-aversion index needs an even, non-zero number of rounds");
  const std::size_t half = m2.size() / 2;
  double first = 0.0, second = 0.0;
  for (std::size_t r = 0; r < m2.size(); ++r) {
    if (!(m2[r] >= 0.0) || !std::isfinite(m2[r]))
      throw Error(ErrorKind::Domain, "m2 must be finite and non-negative");
    (r < half ? first : second) += m2[r];
  }
  const double total = first + second;
  if (total < kDegenerateDeviation) return {0.0, true};
  const double borrowing_minus_saving =
      ordering == Ordering::BorrowingFirst ? first - second : second - first;
  return {borrowing_minus_saving / total, false};
}

struct LearningDeltas {
  std::vector<double> consecutive;  // m2^{r-1} - m2^r for r = 2..n
  std::vector<double> from_first;   // m2^1 - m2^r for r = 2..n
};

inline LearningDeltas learning_deltas(std::span<const double> m2) {
  LearningDeltas out;
  for (std::size_t r = 1; r < m2.size(); ++r) {
    out.consecutive.push_back(m2[r - 1] - m2[r]);
    out.from_first.push_back(m2[0] - m2[r]);
  }
  return out;
}

}  // namespace lifecycle
