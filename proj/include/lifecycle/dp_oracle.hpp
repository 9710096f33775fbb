#pragma once

// Brute-force backward induction over the binary shock tree. Used only to
// verify the closed-form policy; it never calls optimal_consumption().
//
// At every node the period objective u(c) + E[V_{t+1}(w - c + y_{t+1})] is
// concave in c, so its maximizer is the unique root of the first-order
// condition u'(c) = E[u'(c_{t+1})] (envelope theorem). The root is found by
// bracketed search on the log of the marginal-utility ratio, recursing into
// both shock branches for every trial c. Searching on the derivative rather
// than on the value keeps the maximizer accurate to ~1e-10; comparing values
// of a flat objective cannot resolve c below ~1e-6.

#include "lifecycle/error.hpp"
#include "lifecycle/model.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

namespace lifecycle {

inline constexpr int kOracleMaxHorizon = 6;
inline constexpr double kOracleTolerance = 1e-8;

class BackwardInduction {
 public:
  explicit BackwardInduction(const ModelParams& params, double tolerance = kOracleTolerance)
      : params_{params}, tol_{tolerance} {
    params_.validate();
    if (params_.horizon > kOracleMaxHorizon)
      throw Error(ErrorKind::Capability,
                  "backward induction enumerates 2^(T-t) shock branches; horizon " +
                      std::to_string(params_.horizon) + " exceeds the supported maximum of " +
                      std::to_string(kOracleMaxHorizon));
  }

  // Optimal period-t consumption given wealth w_t.
  double argmax(int t, double wealth) const {
    if (t < 1 || t > params_.horizon) throw Error(ErrorKind::Domain, "period outside horizon");
    if (t == params_.horizon) return wealth;

    auto [lo, hi] = bracket(t, wealth);
    auto foc = [&](double c) { return first_order_gap(t, wealth, c); };
    double f_lo = foc(lo), f_hi = foc(hi);
    for (int widen = 0; f_lo < 0.0 || f_hi > 0.0; ++widen) {
      if (widen == 60) throw Error(ErrorKind::Capability, "failed to bracket optimal consumption");
      const double width = hi - lo;
      if (f_lo < 0.0) f_lo = foc(lo -= width);
      if (f_hi > 0.0) f_hi = foc(hi += width);
    }
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;

    const double tol = tol_ * 1e-2;
    auto done = [tol](double a, double b) { return std::abs(b - a) <= tol; };
    std::uintmax_t max_iter = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(foc, lo, hi, f_lo, f_hi, done, max_iter);
    return 0.5 * (a + b);
  }

  // V_t(w): maximal expected utility from period t on, given wealth w_t.
  double value(int t, double wealth) const {
    const double c = argmax(t, wealth);
    if (t == params_.horizon) return utility(c, params_);
    const double carry = wealth - c + expected_income(t + 1, params_);
    const double sigma = params_.shock_sigma;
    return utility(c, params_) +
           0.5 * (value(t + 1, carry + sigma) + value(t + 1, carry - sigma));
  }

 private:
  // log u'(c) - log E[u'(c_{t+1})]; strictly decreasing in c.
  double first_order_gap(int t, double wealth, double c) const {
    const double carry = wealth - c + expected_income(t + 1, params_);
    const double sigma = params_.shock_sigma;
    const double theta = params_.theta;
    double log_expected_mu;
    if (sigma == 0.0) {
      log_expected_mu = -theta * argmax(t + 1, carry);
    } else {
      const double up = -theta * argmax(t + 1, carry + sigma);
      const double down = -theta * argmax(t + 1, carry - sigma);
      const double m = std::max(up, down);
      log_expected_mu = m + std::log(0.5 * (std::exp(up - m) + std::exp(down - m)));
    }
    return -theta * c - log_expected_mu;
  }

  // Certainty-equivalent average of remaining resources; a risk-averse agent
  // deviates from it by at most sigma per remaining shock.
  std::pair<double, double> bracket(int t, double wealth) const {
    const int periods = params_.horizon - t + 1;
    double resources = wealth;
    for (int j = t + 1; j <= params_.horizon; ++j) resources += expected_income(j, params_);
    const double center = resources / periods;
    const double half = params_.shock_sigma * (periods - 1) + 10.0;
    return {center - half, center + half};
  }

  ModelParams params_;
  double tol_;
};

inline double dp_oracle(const ModelParams& params, int t, double assets_prev,
                        double current_income) {
  return BackwardInduction{params}.argmax(t, current_income + assets_prev);
}

}  // namespace lifecycle
