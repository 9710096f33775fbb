#include "lifecycle/agents.hpp"
#include "lifecycle/measures.hpp"

#include <gtest/gtest.h>

#include <array>
#include <random>

using namespace lifecycle;

namespace {

LifecyclePath play(AgentSpec spec, Treatment t, const ShockSequence& shocks, const ModelParams& base) {
  Agent agent{spec};
  const auto p = with_treatment(base, t);
  return simulate_path([&](const PolicyContext& c) { return agent.consume(c.t, c.wealth, c.income, p); }, t, shocks,
                       base);
}

ShockSequence zeros(int horizon) { return ShockSequence{std::vector<double>(horizon, 0.0), 0}; }

}  // namespace

TEST(Measures, OptimalPathHasNoDeviation) {
  const ModelParams base;
  std::mt19937_64 rng{17};
  for (int i = 0; i < 50; ++i) {
    const auto shocks = draw_shocks(rng, base.horizon, base.shock_sigma);
    for (auto t : {Treatment::Borrowing, Treatment::Saving}) {
      const auto m = compute_measures(simulate_optimal(t, shocks, base), base);
      EXPECT_NEAR(m.m1, 0.0, 1e-6);
      EXPECT_NEAR(m.m2, 0.0, 1e-6);
      EXPECT_NEAR(m.m3, 0.0, 1e-6);
      EXPECT_EQ(m.treatment, t);
    }
  }
}

// Without risk and with assets held at zero, c*_t(y_t) is the mean of the
// remaining incomes: 5(t + T) in Borrowing, so the gap is 5(T - t) and
// m1 = m2 = 5 * 190. The benchmark path is flat at 105.
TEST(Measures, HandToMouthWithoutRiskFixture) {
  ModelParams base;
  base.shock_sigma = 0.0;
  const auto u = [](double c) { return 250.0 * (1.0 - std::exp(-0.02 * c)); };
  for (auto t : {Treatment::Borrowing, Treatment::Saving}) {
    double m1 = 0.0, m3 = 0.0;
    for (int s = 1; s <= 20; ++s) {
      const double y = t == Treatment::Borrowing ? 10.0 * s : 210.0 - 10.0 * s;
      double remaining = 0.0;
      for (int k = s; k <= 20; ++k) remaining += t == Treatment::Borrowing ? 10.0 * k : 210.0 - 10.0 * k;
      m1 += remaining / (21 - s) - y;
      m3 += u(105.0) - u(y);
    }
    const auto m = compute_measures(play({AgentKind::HandToMouth}, t, zeros(20), base), base);
    EXPECT_NEAR(m.m1, m1, 1e-9);
    EXPECT_NEAR(m.m2, 950.0, 1e-9);
    EXPECT_NEAR(m.m3, m3, 1e-9);
    EXPECT_NEAR(m.m3, 496.20039218334625, 1e-9);
    if (t == Treatment::Borrowing) {
      EXPECT_NEAR(m.m1, 950.0, 1e-9);
      EXPECT_GT(m.m1, 0.0);
    } else {
      EXPECT_NEAR(m.m1, -950.0, 1e-9);
    }
  }
}

TEST(Measures, InvariantsOnRandomBehaviour) {
  const ModelParams base;
  std::mt19937_64 rng{23};
  for (int i = 0; i < 300; ++i) {
    const auto shocks = draw_shocks(rng, base.horizon, base.shock_sigma);
    const auto t = i % 2 ? Treatment::Borrowing : Treatment::Saving;
    const auto path = play({AgentKind::NoisyOptimal, 40.0, static_cast<std::uint64_t>(i)}, t, shocks, base);
    const auto m = compute_measures(path, base);
    EXPECT_GE(m.m2, 0.0);
    EXPECT_GE(m.m2, std::abs(m.m1) - 1e-9);
    EXPECT_GE(m.m3, -1e-6);
  }
}

TEST(Measures, IncompletePathIsAStateError) {
  const ModelParams base;
  auto path = simulate_optimal(Treatment::Borrowing, draw_shocks(1, 20, 10.0), base);
  path.consumption.pop_back();
  try {
    compute_measures(path, base);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::State);
  }
}

TEST(DebtAversion, BoundaryCases) {
  const std::array<double, 6> borrow_only{5, 6, 7, 0, 0, 0}, equal{3, 3, 3, 3, 3, 3}, save_only{0, 0, 0, 1, 2, 3};
  EXPECT_EQ(compute_da(borrow_only, Ordering::BorrowingFirst).da, 1.0);
  EXPECT_EQ(compute_da(equal, Ordering::BorrowingFirst).da, 0.0);
  EXPECT_EQ(compute_da(save_only, Ordering::BorrowingFirst).da, -1.0);
  // Under SF the saving rounds come first.
  EXPECT_EQ(compute_da(borrow_only, Ordering::SavingFirst).da, -1.0);
  EXPECT_EQ(compute_da(save_only, Ordering::SavingFirst).da, 1.0);
}

TEST(DebtAversion, BoundedAndAntisymmetric) {
  std::mt19937_64 rng{31};
  std::exponential_distribution<double> draw{0.01};
  std::bernoulli_distribution zero{0.2};
  for (int i = 0; i < 10000; ++i) {
    std::array<double, 6> m2{};
    for (auto& v : m2) v = zero(rng) ? 0.0 : draw(rng);
    std::array<double, 6> swapped{m2[3], m2[4], m2[5], m2[0], m2[1], m2[2]};
    const auto bf = compute_da(m2, Ordering::BorrowingFirst);
    if (bf.degenerate) continue;
    EXPECT_GE(bf.da, -1.0);
    EXPECT_LE(bf.da, 1.0);
    EXPECT_EQ(compute_da(swapped, Ordering::SavingFirst).da, bf.da);
    EXPECT_NEAR(compute_da(swapped, Ordering::BorrowingFirst).da, -bf.da, 1e-15);
  }
}

TEST(DebtAversion, DegenerateAndDomain) {
  const std::array<double, 6> none{0, 0, 0, 0, 0, 1e-12};
  const auto d = compute_da(none, Ordering::BorrowingFirst);
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(d.da, 0.0);
  const std::array<double, 6> negative{1, 1, 1, 1, 1, -0.5};
  EXPECT_THROW(compute_da(negative, Ordering::BorrowingFirst), Error);
  const std::array<double, 5> odd{1, 1, 1, 1, 1};
  EXPECT_THROW(compute_da(odd, Ordering::BorrowingFirst), Error);
}

TEST(DebtAversion, AgentFixtures) {
  const ModelParams base;
  std::mt19937_64 rng{41};
  for (int i = 0; i < 20; ++i) {
    std::vector<ShockSequence> sched;
    for (int r = 0; r < 6; ++r) sched.push_back(draw_shocks(rng, 20, 10.0));
    for (auto order : {Ordering::BorrowingFirst, Ordering::SavingFirst}) {
      std::vector<double> m2;
      StudyConfig cfg;
      for (int r = 1; r <= 6; ++r) {
        const auto t = cfg.treatment_for(r, order);
        m2.push_back(compute_measures(play({AgentKind::DebtAverse}, t, sched[r - 1], base), base).m2);
      }
      EXPECT_EQ(compute_da(m2, order).da, 1.0);
    }
  }
  ModelParams calm = base;
  calm.shock_sigma = 0.0;
  std::vector<double> m2;
  for (int r = 1; r <= 6; ++r) {
    const auto t = StudyConfig{}.treatment_for(r, Ordering::BorrowingFirst);
    m2.push_back(compute_measures(play({AgentKind::HandToMouth}, t, zeros(20), calm), calm).m2);
  }
  EXPECT_NEAR(compute_da(m2, Ordering::BorrowingFirst).da, 0.0, 1e-9);
}

TEST(Learning, Deltas) {
  const std::array<double, 6> m2{600, 500, 400, 450, 300, 300};
  const auto d = learning_deltas(m2);
  EXPECT_EQ(d.consecutive, (std::vector<double>{100, 100, -50, 150, 0}));
  EXPECT_EQ(d.from_first, (std::vector<double>{100, 200, 150, 300, 300}));
  const std::array<double, 6> flat{7, 7, 7, 7, 7, 7};
  for (double v : learning_deltas(flat).from_first) EXPECT_EQ(v, 0.0);
  const std::array<double, 6> falling{9, 8, 7, 6, 5, 4};
  for (double v : learning_deltas(falling).from_first) EXPECT_GT(v, 0.0);
}
