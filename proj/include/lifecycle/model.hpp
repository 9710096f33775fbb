#pragma once

// Life-cycle consumption problem with CARA utility and binary income shocks.
//
// Each period t = 1..T the agent receives income y_t = y0 + s*t + eps_t with
// eps_t = +/-sigma equally likely, holds wealth w_t = y_t + a_{t-1}, consumes
// c_t and carries a_t = w_t - c_t forward. a_0 = 0 and a_T = 0, there is no
// interest and no discounting.

#include "lifecycle/error.hpp"

#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lifecycle {

enum class Treatment { Borrowing, Saving };

constexpr std::string_view to_string(Treatment t) noexcept {
  return t == Treatment::Borrowing ? "borrowing" : "saving";
}

inline Treatment parse_treatment(std::string_view s) {
  if (s == "borrowing" || s == "B") return Treatment::Borrowing;
  if (s == "saving" || s == "S") return Treatment::Saving;
  throw Error(ErrorKind::Validation, "unknown treatment '" + std::string(s) + "'");
}

struct IncomeProcess {
  double intercept;
  double slope;
};

// Increasing (y = 10t) and decreasing (y = 210 - 10t) income streams.
constexpr IncomeProcess income_process(Treatment t) noexcept {
  return t == Treatment::Borrowing ? IncomeProcess{0.0, 10.0} : IncomeProcess{210.0, -10.0};
}

struct ModelParams {
  int horizon = 20;
  double theta = 0.02;
  double utility_scale = 250.0;
  double shock_sigma = 10.0;
  double income_intercept = 0.0;
  double income_slope = 10.0;

  void validate() const {
    if (horizon < 1) throw Error(ErrorKind::Domain, "horizon must be >= 1");
    if (!(theta > 0.0) || !std::isfinite(theta)) throw Error(ErrorKind::Domain, "theta must be > 0");
    if (!(shock_sigma >= 0.0) || !std::isfinite(shock_sigma))
      throw Error(ErrorKind::Domain, "shock_sigma must be >= 0");
    if (!(utility_scale > 0.0) || !std::isfinite(utility_scale))
      throw Error(ErrorKind::Domain, "utility_scale must be > 0");
    if (!std::isfinite(income_intercept) || !std::isfinite(income_slope))
      throw Error(ErrorKind::Domain, "income process coefficients must be finite");
  }
};

inline ModelParams with_treatment(ModelParams params, Treatment t) noexcept {
  const auto process = income_process(t);
  params.income_intercept = process.intercept;
  params.income_slope = process.slope;
  return params;
}

namespace detail {

inline void check_period(int t, const ModelParams& params) {
  if (t < 1 || t > params.horizon)
    throw Error(ErrorKind::Domain, "period " + std::to_string(t) + " outside 1.." +
                                       std::to_string(params.horizon));
}

}  // namespace detail

// log(cosh(x)) without overflow for large |x|.
inline double log_cosh(double x) noexcept {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
}

inline double utility(double c, const ModelParams& params) {
  if (!std::isfinite(c)) throw Error(ErrorKind::Domain, "utility of non-finite consumption");
  return params.utility_scale * -std::expm1(-params.theta * c);
}

inline double expected_income(int t, const ModelParams& params) noexcept {
  return params.income_intercept + params.income_slope * t;
}

inline double income(int t, Treatment treatment, double shock, const ModelParams& params) {
  detail::check_period(t, params);
  return expected_income(t, with_treatment(params, treatment)) + shock;
}

// zeta_t: expected income over periods t+1..T.
inline double expected_remaining_income(int t, const ModelParams& params) {
  detail::check_period(t, params);
  const double remaining = params.horizon - t;
  return remaining *
         (params.income_intercept + params.income_slope * (params.horizon + t + 1) / 2.0);
}

// Dimensionless double sum sum_{j=0}^{T-t} sum_{i=1}^{j} log cosh(theta*sigma / (T-t+1-i)).
inline double precautionary_index(int t, const ModelParams& params) {
  detail::check_period(t, params);
  const double x = params.theta * params.shock_sigma;
  const int n = params.horizon - t + 1;
  // Term i appears for every j >= i, i.e. (n - i) times.
  double total = 0.0;
  for (int i = 1; i < n; ++i) total += (n - i) * log_cosh(x / (n - i));
  return total;
}

// Precautionary savings in consumption units: the index scaled by 1/theta.
inline double precautionary_savings(int t, const ModelParams& params) {
  return precautionary_index(t, params) / params.theta;
}

inline double optimal_consumption(double wealth, int t, const ModelParams& params) {
  detail::check_period(t, params);
  if (t == params.horizon) return wealth;
  const double periods_left = params.horizon - t + 1;
  // Same association as OptimalPolicy so both give bit-identical results.
  const double shift = expected_remaining_income(t, params) - precautionary_savings(t, params);
  return (wealth + shift) / periods_left;
}

// Precomputed c*_t(w) = slope_t * (w + offset_t) for a fixed parameter set.
class OptimalPolicy {
 public:
  explicit OptimalPolicy(const ModelParams& params) : horizon_{params.horizon} {
    params.validate();
    shift_.resize(static_cast<std::size_t>(horizon_));
    for (int t = 1; t < horizon_; ++t)
      shift_[t - 1] = expected_remaining_income(t, params) - precautionary_savings(t, params);
  }

  double operator()(int t, double wealth) const {
    if (t < 1 || t > horizon_) throw Error(ErrorKind::Domain, "period outside horizon");
    if (t == horizon_) return wealth;
    return (wealth + shift_[t - 1]) / (horizon_ - t + 1);
  }

 private:
  int horizon_;
  std::vector<double> shift_;
};

struct ShockSequence {
  std::vector<double> shocks;
  std::uint64_t seed = 0;

  bool operator==(const ShockSequence&) const = default;
};

// One sign bit per period from a seeded Mersenne Twister stream.
inline ShockSequence draw_shocks(std::mt19937_64& rng, int horizon, double sigma) {
  ShockSequence seq;
  seq.shocks.reserve(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) seq.shocks.push_back((rng() >> 63) ? sigma : -sigma);
  return seq;
}

inline ShockSequence draw_shocks(std::uint64_t seed, int horizon, double sigma) {
  std::mt19937_64 rng{seed};
  auto seq = draw_shocks(rng, horizon, sigma);
  seq.seed = seed;
  return seq;
}

// Fixed per-round sequences shared by every session of a study.
inline std::vector<ShockSequence> draw_schedule(std::uint64_t seed, int rounds, int horizon,
                                                double sigma) {
  std::mt19937_64 rng{seed};
  std::vector<ShockSequence> out;
  for (int r = 0; r < rounds; ++r) {
    out.push_back(draw_shocks(rng, horizon, sigma));
    out.back().seed = seed;
  }
  return out;
}

struct LifecyclePath {
  Treatment treatment = Treatment::Borrowing;
  ShockSequence shocks;
  std::vector<double> income;
  std::vector<double> wealth;
  std::vector<double> consumption;
  std::vector<double> assets;
  std::vector<double> utility;

  int periods() const noexcept { return static_cast<int>(consumption.size()); }
};

struct PolicyContext {
  int t;
  double income;
  double assets_prev;
  double wealth;
  std::span<const double> past_consumption;
};

template <typename F>
concept ConsumptionPolicy = requires(F f, const PolicyContext& ctx) {
  { f(ctx) } -> std::convertible_to<double>;
};

template <ConsumptionPolicy Policy>
LifecyclePath simulate_path(Policy&& policy, Treatment treatment, const ShockSequence& shocks,
                            const ModelParams& base) {
  const auto params = with_treatment(base, treatment);
  params.validate();
  const int horizon = params.horizon;
  if (static_cast<int>(shocks.shocks.size()) != horizon)
    throw Error(ErrorKind::Domain, "shock sequence length " +
                                       std::to_string(shocks.shocks.size()) +
                                       " does not match horizon " + std::to_string(horizon));

  LifecyclePath path;
  path.treatment = treatment;
  path.shocks = shocks;
  path.income.reserve(horizon);
  path.wealth.reserve(horizon);
  path.consumption.reserve(horizon);
  path.assets.reserve(horizon);
  path.utility.reserve(horizon);

  double assets = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    const double y = expected_income(t, params) + shocks.shocks[t - 1];
    const double w = y + assets;
    double c = w;
    if (t < horizon) {
      c = static_cast<double>(policy(PolicyContext{t, y, assets, w, path.consumption}));
      if (!std::isfinite(c))
        throw Error(ErrorKind::Simulation,
                    "policy returned non-finite consumption in period " + std::to_string(t));
    }
    assets = t < horizon ? w - c : 0.0;
    path.income.push_back(y);
    path.wealth.push_back(w);
    path.consumption.push_back(c);
    path.assets.push_back(assets);
    path.utility.push_back(utility(c, params));
  }
  return path;
}

inline LifecyclePath simulate_optimal(Treatment treatment, const ShockSequence& shocks,
                                      const ModelParams& base) {
  const OptimalPolicy policy{with_treatment(base, treatment)};
  return simulate_path([&](const PolicyContext& ctx) { return policy(ctx.t, ctx.wealth); },
                       treatment, shocks, base);
}

}  // namespace lifecycle
