#include "lifecycle/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace lifecycle;

namespace {

// Literal double sum over j = 0..T-t, i = 1..j.
double gamma_direct(int t, const ModelParams& p) {
  double s = 0.0;
  const int n = p.horizon - t + 1;
  for (int j = 0; j <= p.horizon - t; ++j)
    for (int i = 1; i <= j; ++i) s += std::log(std::cosh(p.theta * p.shock_sigma / (n - i)));
  return s;
}

double zeta_direct(int t, const ModelParams& p) {
  double s = 0.0;
  for (int k = t + 1; k <= p.horizon; ++k) s += p.income_intercept + p.income_slope * k;
  return s;
}

ModelParams borrowing() { return with_treatment(ModelParams{}, Treatment::Borrowing); }
ModelParams saving() { return with_treatment(ModelParams{}, Treatment::Saving); }

}  // namespace

TEST(Utility, KnownValues) {
  const ModelParams p;
  EXPECT_NEAR(utility(100.0, p), 216.16617919, 1e-8);
  EXPECT_NEAR(utility(105.0, p), 219.38589294, 1e-8);
  EXPECT_EQ(utility(0.0, p), 0.0);
  EXPECT_LT(utility(-10.0, p), 0.0);
}

TEST(Utility, DerivativesMatchFiniteDifferences) {
  const ModelParams p;
  const double h = 1e-4;
  // A second difference at h = 1e-4 loses ~eps*|u|/h^2 to rounding (~3e-4
  // relative at c = -200), so u'' uses a wider step.
  const double h2 = 1e-2;
  for (int k = 0; k < 100; ++k) {
    const double c = -200.0 + 600.0 * k / 99.0;
    const double d1 = (utility(c + h, p) - utility(c - h, p)) / (2 * h);
    const double d2 = (utility(c + h2, p) - 2 * utility(c, p) + utility(c - h2, p)) / (h2 * h2);
    const double e = p.utility_scale * std::exp(-p.theta * c);
    EXPECT_NEAR(d1 / (p.theta * e), 1.0, 1e-4) << c;
    EXPECT_NEAR(d2 / (-p.theta * p.theta * e), 1.0, 1e-4) << c;
    EXPECT_GT(d1, 0.0);
    EXPECT_LT(d2, 0.0);
  }
}

TEST(Utility, BoundedByScale) {
  const ModelParams p;
  EXPECT_NEAR(utility(10000.0, p), 250.0, 1e-6);
  EXPECT_LE(utility(10000.0, p), 250.0);
}

TEST(Utility, RejectsNonFinite) {
  EXPECT_THROW(utility(NAN, ModelParams{}), Error);
  EXPECT_THROW(utility(INFINITY, ModelParams{}), Error);
}

TEST(LogCosh, StableAndAccurate) {
  EXPECT_NEAR(log_cosh(0.2), 0.01986807184, 1e-11);
  EXPECT_EQ(log_cosh(0.0), 0.0);
  EXPECT_NEAR(log_cosh(800.0), 800.0 - std::log(2.0), 1e-9);
  EXPECT_EQ(log_cosh(-3.0), log_cosh(3.0));
}

TEST(Income, Processes) {
  EXPECT_DOUBLE_EQ(income(1, Treatment::Borrowing, 10.0, ModelParams{}), 20.0);
  EXPECT_DOUBLE_EQ(income(20, Treatment::Borrowing, -10.0, ModelParams{}), 190.0);
  EXPECT_DOUBLE_EQ(income(1, Treatment::Saving, -10.0, ModelParams{}), 190.0);
  EXPECT_DOUBLE_EQ(income(20, Treatment::Saving, 10.0, ModelParams{}), 20.0);
  EXPECT_THROW(income(0, Treatment::Saving, 0.0, ModelParams{}), Error);
  EXPECT_THROW(income(21, Treatment::Saving, 0.0, ModelParams{}), Error);
}

TEST(ClosedForm, RemainingIncomeMatchesDirectSum) {
  for (const auto& p : {borrowing(), saving()})
    for (int t = 1; t <= p.horizon; ++t) EXPECT_NEAR(expected_remaining_income(t, p), zeta_direct(t, p), 1e-9);
}

TEST(ClosedForm, RemainingIncomeExamples) {
  EXPECT_DOUBLE_EQ(expected_remaining_income(19, borrowing()), 200.0);
  EXPECT_DOUBLE_EQ(expected_remaining_income(1, borrowing()), 2090.0);
  EXPECT_DOUBLE_EQ(expected_remaining_income(20, saving()), 0.0);
}

TEST(ClosedForm, PrecautionaryIndexMatchesDoubleSum) {
  for (double theta : {0.01, 0.02, 0.05})
    for (double sigma : {0.0, 10.0, 40.0}) {
      ModelParams p;
      p.theta = theta;
      p.shock_sigma = sigma;
      for (int t = 1; t <= p.horizon; ++t) EXPECT_NEAR(precautionary_index(t, p), gamma_direct(t, p), 1e-12);
    }
}

TEST(ClosedForm, PrecautionaryValuesNearHorizon) {
  const ModelParams p;
  EXPECT_EQ(precautionary_index(20, p), 0.0);
  EXPECT_NEAR(precautionary_index(19, p), 0.01986807184, 1e-11);
  EXPECT_NEAR(precautionary_savings(19, p), 0.993403592, 1e-8);
}

TEST(ClosedForm, NoRiskMeansEqualSplitOfResources) {
  ModelParams p = borrowing();
  p.shock_sigma = 0.0;
  for (int t = 1; t < p.horizon; ++t) {
    const double w = 37.0 + t;
    EXPECT_NEAR(optimal_consumption(w, t, p), (w + zeta_direct(t, p)) / (p.horizon - t + 1), 1e-12);
  }
}

TEST(ClosedForm, PrecautionaryTermShape) {
  const ModelParams p;
  for (int t = 1; t < p.horizon; ++t) {
    EXPECT_GE(precautionary_savings(t, p), 0.0);
    EXPECT_GE(precautionary_savings(t, p), precautionary_savings(t + 1, p));
  }
  ModelParams safe;
  safe.shock_sigma = 0.0;
  for (int t = 1; t <= safe.horizon; ++t) EXPECT_EQ(precautionary_savings(t, safe), 0.0);
}

TEST(ClosedForm, DeterministicEqualSplit) {
  ModelParams p = borrowing();
  p.shock_sigma = 0.0;
  EXPECT_DOUBLE_EQ(optimal_consumption(10.0, 1, p), 105.0);
}

TEST(ClosedForm, LastPeriodConsumesEverything) {
  EXPECT_EQ(optimal_consumption(123.25, 20, borrowing()), 123.25);
  EXPECT_EQ(optimal_consumption(-4.0, 20, saving()), -4.0);
}

TEST(ClosedForm, PolicyObjectIsBitIdentical) {
  for (const auto& p : {borrowing(), saving()}) {
    const OptimalPolicy policy{p};
    for (int t = 1; t <= p.horizon; ++t)
      for (double w : {-300.0, 0.0, 17.3, 205.0, 1999.5}) EXPECT_EQ(policy(t, w), optimal_consumption(w, t, p));
  }
}

TEST(ClosedForm, ShiftingWealthShiftsConsumptionProportionally) {
  const auto p = borrowing();
  for (int t = 1; t < p.horizon; ++t) {
    const double dc = optimal_consumption(150.0, t, p) - optimal_consumption(50.0, t, p);
    EXPECT_NEAR(dc, 100.0 / (p.horizon - t + 1), 1e-9);
  }
}

TEST(Shocks, DeterministicAndBinary) {
  const auto a = draw_shocks(42, 20, 10.0);
  const auto b = draw_shocks(42, 20, 10.0);
  EXPECT_EQ(a.shocks, b.shocks);
  for (double s : a.shocks) EXPECT_TRUE(s == 10.0 || s == -10.0);
  EXPECT_NE(draw_shocks(43, 20, 10.0).shocks, a.shocks);
  const auto schedule = draw_schedule(5, 6, 20, 10.0);
  ASSERT_EQ(schedule.size(), 6u);
  EXPECT_EQ(schedule, draw_schedule(5, 6, 20, 10.0));
}

TEST(Shocks, RoughlyBalanced) {
  std::mt19937_64 rng{9};
  int up = 0;
  const int n = 20000;
  for (int i = 0; i < n / 20; ++i)
    for (double s : draw_shocks(rng, 20, 1.0).shocks) up += s > 0;
  EXPECT_NEAR(static_cast<double>(up) / n, 0.5, 0.02);
}

TEST(Simulation, PoliciesSeeCorrectContext) {
  const auto shocks = draw_shocks(1, 20, 10.0);
  int calls = 0;
  const auto path = simulate_path(
      [&](const PolicyContext& ctx) {
        ++calls;
        EXPECT_EQ(static_cast<int>(ctx.past_consumption.size()), ctx.t - 1);
        EXPECT_DOUBLE_EQ(ctx.wealth, ctx.income + ctx.assets_prev);
        return 0.5 * ctx.wealth;
      },
      Treatment::Saving, shocks, ModelParams{});
  EXPECT_EQ(calls, 19);  // the last period is forced
  EXPECT_EQ(path.periods(), 20);
  EXPECT_EQ(path.assets.back(), 0.0);
  EXPECT_EQ(path.consumption.back(), path.wealth.back());
}

TEST(Simulation, BudgetIdentityForRandomPolicies) {
  std::mt19937_64 rng{2024};
  for (int k = 0; k < 200; ++k) {
    const auto shocks = draw_shocks(rng, 20, 10.0);
    std::uniform_real_distribution<double> frac{-0.5, 1.5};
    const auto t = k % 2 ? Treatment::Borrowing : Treatment::Saving;
    const auto path = simulate_path([&](const PolicyContext& ctx) { return frac(rng) * ctx.wealth + 3.0; }, t,
                                    shocks, ModelParams{});
    const double sc = std::accumulate(path.consumption.begin(), path.consumption.end(), 0.0);
    const double sy = std::accumulate(path.income.begin(), path.income.end(), 0.0);
    EXPECT_NEAR(sc, sy, 1e-9);
  }
}

TEST(Simulation, RejectsBadInput) {
  EXPECT_THROW(simulate_optimal(Treatment::Borrowing, draw_shocks(1, 19, 10.0), ModelParams{}), Error);
  try {
    simulate_path([](const PolicyContext& ctx) { return ctx.t == 7 ? NAN : 1.0; }, Treatment::Borrowing,
                  draw_shocks(1, 20, 10.0), ModelParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Simulation);
    EXPECT_NE(std::string(e.what()).find("period 7"), std::string::npos);
  }
}

TEST(Simulation, DeterministicOptimalPathIsFlat) {
  ModelParams p;
  p.shock_sigma = 0.0;
  const ShockSequence zero{std::vector<double>(20, 0.0), 0};
  for (auto t : {Treatment::Borrowing, Treatment::Saving}) {
    const auto path = simulate_optimal(t, zero, p);
    for (double c : path.consumption) EXPECT_NEAR(c, 105.0, 1e-9);
  }
}

TEST(Simulation, HandToMouthHoldsNoAssets) {
  const auto shocks = draw_shocks(11, 20, 10.0);
  for (auto t : {Treatment::Borrowing, Treatment::Saving}) {
    const auto path = simulate_path([](const PolicyContext& ctx) { return ctx.income; }, t, shocks, ModelParams{});
    for (double a : path.assets) EXPECT_EQ(a, 0.0);
  }
}

TEST(Simulation, MirrorIncomeIdentity) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto shocks = draw_shocks(seed, 20, 10.0);
    double b = 0.0, s = 0.0;
    for (int t = 1; t <= 20; ++t) {
      b += income(t, Treatment::Borrowing, shocks.shocks[t - 1], ModelParams{});
      s += income(t, Treatment::Saving, shocks.shocks[t - 1], ModelParams{});
      EXPECT_DOUBLE_EQ(income(t, Treatment::Borrowing, 0.0, ModelParams{}) +
                           income(t, Treatment::Saving, 0.0, ModelParams{}),
                       210.0);
    }
    EXPECT_EQ(b, s);
  }
}

TEST(Simulation, OptimalPathIsTreatmentInvariant) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto shocks = draw_shocks(seed, 20, 10.0);
    const auto b = simulate_optimal(Treatment::Borrowing, shocks, ModelParams{});
    const auto s = simulate_optimal(Treatment::Saving, shocks, ModelParams{});
    for (int t = 0; t < 20; ++t) EXPECT_NEAR(b.consumption[t], s.consumption[t], 1e-9);
  }
}

TEST(Params, Validation) {
  ModelParams p;
  p.theta = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.shock_sigma = -1.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.horizon = 0;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_EQ(parse_treatment("saving"), Treatment::Saving);
  EXPECT_THROW(parse_treatment("lending"), Error);
}
