#pragma once

// Compares the closed-form policy with backward induction at every node the
// optimal policy can reach from zero initial assets.

#include "lifecycle/dp_oracle.hpp"
#include "lifecycle/model.hpp"

#include <chrono>
#include <cmath>

namespace lifecycle {

struct OracleSweep {
  std::size_t nodes = 0;
  double max_abs_diff = 0.0;
  int worst_period = 0;
  double worst_wealth = 0.0;
  double seconds = 0.0;
};

inline OracleSweep oracle_sweep(const ModelParams& params) {
  const auto start = std::chrono::steady_clock::now();
  const BackwardInduction oracle{params};
  const OptimalPolicy policy{params};
  OracleSweep out;
  const double sigma = params.shock_sigma;
  const int shocks = sigma == 0.0 ? 1 : 2;

  auto visit = [&](auto&& self, int t, double wealth) -> void {
    const double closed = policy(t, wealth);
    const double diff = std::abs(closed - oracle.argmax(t, wealth));
    ++out.nodes;
    if (diff > out.max_abs_diff || std::isnan(diff)) {
      out.max_abs_diff = diff;
      out.worst_period = t;
      out.worst_wealth = wealth;
    }
    if (t == params.horizon) return;
    for (int s = 0; s < shocks; ++s)
      self(self, t + 1, wealth - closed + expected_income(t + 1, params) + (s ? -sigma : sigma));
  };
  for (int s = 0; s < shocks; ++s) visit(visit, 1, expected_income(1, params) + (s ? -sigma : sigma));

  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace lifecycle
