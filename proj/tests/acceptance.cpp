// One line per acceptance criterion; exit status is nonzero if any
// unconditional criterion fails.

#include "lifecycle/dataset.hpp"
#include "lifecycle/measures.hpp"
#include "lifecycle/oracle_check.hpp"
#include "lifecycle/regression.hpp"
#include "lifecycle/service.hpp"
#include "lifecycle/simulate.hpp"
#include "lifecycle/stats.hpp"

#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace lifecycle;

namespace {

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  if (!pass) ++failures;
}

// Runs a check; an exception is a failure, not a crash.
void criterion(const char* name, const std::function<std::pair<bool, std::string>()>& check) {
  try {
    const auto [pass, detail] = check();
    report(name, pass, detail);
  } catch (const std::exception& e) {
    report(name, false, std::string("threw: ") + e.what());
  }
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::pair<bool, std::string> oracle_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t nodes = 0, configs = 0;
  for (int T : {2, 3, 4})
    for (double theta : {0.01, 0.02, 0.05})
      for (double sigma : {0.0, 10.0})
        for (auto tr : {Treatment::Borrowing, Treatment::Saving}) {
          ModelParams p;
          p.horizon = T;
          p.theta = theta;
          p.shock_sigma = sigma;
          const auto r = oracle_sweep(with_treatment(p, tr));
          worst = std::max(worst, std::isnan(r.max_abs_diff) ? INFINITY : r.max_abs_diff);
          nodes += r.nodes;
          ++configs;
        }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-6 && secs < 60.0,
          fmt("max |c_closed - c_dp| = %.3g over %.0f nodes, %.2f s", worst, static_cast<double>(nodes), secs) +
              " (" + std::to_string(configs) + " configs)"};
}

std::pair<bool, std::string> policy_paths() {
  const ModelParams base;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto shocks = draw_shocks(seed, base.horizon, base.shock_sigma);
    const auto b = simulate_optimal(Treatment::Borrowing, shocks, base);
    const auto s = simulate_optimal(Treatment::Saving, shocks, base);
    for (int t = 0; t < base.horizon; ++t) worst = std::max(worst, std::abs(b.consumption[t] - s.consumption[t]));
  }
  return {worst <= 1e-9, fmt("max period-wise gap %.3g over 100 shock sequences", worst)};
}

std::pair<bool, std::string> budget_identity() {
  const ModelParams base;
  std::mt19937_64 rng{2024};
  std::uniform_real_distribution<double> frac{-0.5, 1.5};
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto shocks = draw_shocks(rng, base.horizon, base.shock_sigma);
    const auto tr = i % 2 ? Treatment::Saving : Treatment::Borrowing;
    const double scale = frac(rng);
    auto policy = [&](const PolicyContext& ctx) { return ctx.income * scale + frac(rng) * 40.0; };
    const auto path = simulate_path(policy, tr, shocks, base);
    double sc = 0.0, sy = 0.0;
    for (int t = 0; t < path.periods(); ++t) {
      sc += path.consumption[t];
      sy += path.income[t];
    }
    worst = std::max(worst, std::abs(sc - sy));
  }
  return {worst <= 1e-9, fmt("max |sum c - sum y| = %.3g over 1000 random policies", worst)};
}

std::vector<double> m2_in_play_order(const SessionRecord& rec, const ModelParams& params) {
  std::vector<double> m2;
  for (const auto& r : rec.rounds) m2.push_back(compute_measures(r.path, params).m2);
  return m2;
}

std::pair<bool, std::string> measures_fixture() {
  StudyConfig cfg;
  cfg.study_id = "acc";
  cfg.shock_seed = 77;
  Study study{cfg};
  double worst_opt = 0.0;
  int da_one = 0, da_total = 0;
  for (int i = 0; i < 20; ++i) {
    const auto order = i % 2 ? Ordering::SavingFirst : Ordering::BorrowingFirst;
    const auto& opt = testing::complete_session(study, "o" + std::to_string(i), {AgentKind::Optimal}, order, i);
    for (const auto& r : opt.record().rounds) {
      const auto m = compute_measures(r.path, cfg.params);
      worst_opt = std::max({worst_opt, std::abs(m.m1), std::abs(m.m2), std::abs(m.m3)});
    }
    const auto& da = testing::complete_session(study, "d" + std::to_string(i), {AgentKind::DebtAverse}, order, i);
    const auto idx = compute_da(m2_in_play_order(da.record(), cfg.params), order);
    da_one += !idx.degenerate && idx.da == 1.0;
    ++da_total;
  }

  StudyConfig calm = cfg;
  calm.params.shock_sigma = 0.0;
  Study still{calm};
  double worst_h2m = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto order = i % 2 ? Ordering::SavingFirst : Ordering::BorrowingFirst;
    const auto& s = testing::complete_session(still, "h" + std::to_string(i), {AgentKind::HandToMouth}, order, i);
    const auto idx = compute_da(m2_in_play_order(s.record(), calm.params), order);
    worst_h2m = std::max(worst_h2m, idx.degenerate ? INFINITY : std::abs(idx.da));
  }
  const bool pass = worst_opt <= 1e-6 && da_one == da_total && worst_h2m <= 1e-9;
  return {pass, fmt("optimal max|m| = %.3g; debt-averse da=1 in %.0f/%.0f; ", worst_opt, da_one, da_total) +
                    fmt("hand-to-mouth max|da| = %.3g", worst_h2m)};
}

std::pair<bool, std::string> da_bounds() {
  std::mt19937_64 rng{99};
  std::exponential_distribution<double> draw{0.005};
  std::bernoulli_distribution zero{0.25};
  int outside = 0, evaluated = 0;
  for (int i = 0; i < 100000; ++i) {
    std::array<double, 6> m2{};
    for (auto& v : m2) v = zero(rng) ? 0.0 : draw(rng);
    for (auto order : {Ordering::BorrowingFirst, Ordering::SavingFirst}) {
      const auto idx = compute_da(m2, order);
      if (idx.degenerate) continue;
      ++evaluated;
      outside += !(idx.da >= -1.0 && idx.da <= 1.0);
    }
  }
  const std::array<double, 6> borrow_only{40, 30, 20, 0, 0, 0}, equal{9, 9, 9, 9, 9, 9}, save_only{0, 0, 0, 5, 6, 7};
  const double a = compute_da(borrow_only, Ordering::BorrowingFirst).da;
  const double b = compute_da(equal, Ordering::BorrowingFirst).da;
  const double c = compute_da(save_only, Ordering::BorrowingFirst).da;
  const bool pass = outside == 0 && a == 1.0 && b == 0.0 && c == -1.0;
  return {pass, std::to_string(outside) + " of " + std::to_string(evaluated) + " outside [-1,1]; " +
                    fmt("boundaries {%g, %g, %g}", a, b, c)};
}

// Brute-force two-sided p from every equally likely labelling.
double enumerate_p(const std::vector<long>& null, long observed) {
  double lo = 0, hi = 0;
  for (long s : null) {
    lo += s <= observed;
    hi += s >= observed;
  }
  return std::min(1.0, 2.0 * std::min(lo, hi) / static_cast<double>(null.size()));
}

std::pair<bool, std::string> statistics() {
  double worst = 0.0;
  std::size_t cases = 0;
  for (int n = 2; n <= 8; ++n)
    for (int na = 1; na < n; ++na) {
      std::vector<long> null;
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != na) continue;
        long s = 0;
        for (int i = 0; i < n; ++i)
          if (mask >> i & 1u) s += i + 1;
        null.push_back(s);
      }
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != na) continue;
        std::vector<double> a, b;
        long rs = 0;
        for (int i = 0; i < n; ++i) {
          const double v = 2.5 * (i + 1) + 0.1 * std::sin(i);
          (mask >> i & 1u ? a : b).push_back(v);
          if (mask >> i & 1u) rs += i + 1;
        }
        const auto r = stats::mann_whitney_u(a, b);
        worst = std::max(worst, r.exact ? std::abs(r.p_value - enumerate_p(null, rs)) : INFINITY);
        ++cases;
      }
    }
  for (int n = 1; n <= 8; ++n) {
    std::vector<long> null;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      long s = 0;
      for (int i = 0; i < n; ++i)
        if (mask >> i & 1u) s += i + 1;
      null.push_back(s);
    }
    for (unsigned signs = 0; signs < (1u << n); ++signs) {
      std::vector<double> d;
      long w = 0;
      for (int i = 0; i < n; ++i) {
        const bool pos = signs >> i & 1u;
        d.push_back((pos ? 1.0 : -1.0) * (0.7 + 1.3 * i));
        if (pos) w += i + 1;
      }
      const auto r = stats::wilcoxon_signed_rank(d);
      worst = std::max(worst, r.exact ? std::abs(r.p_value - enumerate_p(null, w)) : INFINITY);
      ++cases;
    }
  }

  const double d = stats::cohens_d(std::vector<double>{1, 2, 3}, std::vector<double>{3, 4, 5});

  RegressionFrame f;
  f.columns["y"] = {1.0, 2.0, 3.0};
  f.cluster = {"g1", "g2", "g2"};
  const auto ols = ols_clustered(f, {"y", {}});
  const double beta = ols.coef(0), se = ols.se(0);

  const bool pass = worst <= 1e-12 && d == -2.0 && std::abs(beta - 2.0) <= 1e-12 && std::abs(se - 0.6667) <= 1e-4;
  return {pass, fmt("max |p - p_enum| = %.3g over ", worst) + std::to_string(cases) +
                    fmt(" inputs; d = %g; beta = %g, ", d, beta) + fmt("CR1 SE = %.6f", se)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<bool, std::string> replay_determinism() {
  const auto logs = testing::scratch_dir("acc-logs");
  const auto live = testing::scratch_dir("acc-live");
  const auto replayed = testing::scratch_dir("acc-replayed");
  StudyConfig cfg;
  cfg.study_id = "replay";
  cfg.shock_seed = 5150;
  ServiceOptions opts;
  opts.log_dir = logs;
  opts.allow_ordering_override = true;

  std::mt19937_64 rng{8128};
  const AgentKind kinds[] = {AgentKind::Optimal, AgentKind::NoisyOptimal, AgentKind::DebtAverse,
                             AgentKind::HandToMouth};
  std::size_t sessions = 0;
  {
    Service svc{cfg, opts};
    for (int i = 0; i < 50; ++i) {
      AgentSpec spec{kinds[rng() % 4], 5.0 + static_cast<double>(rng() % 40), rng()};
      Agent agent{spec};
      const auto order = rng() % 2 ? Ordering::SavingFirst : Ordering::BorrowingFirst;
      drive_agent(svc, participant_label("s", i), agent, order, rng());
    }
    sessions = svc.export_dataset(live).sessions;
  }
  Service again{cfg, opts};
  again.export_dataset(replayed);
  bool same = again.recovered_sessions() == 50;
  for (const char* f : {"periods.csv", "participants.csv", "measures.csv"})
    same = same && slurp(live / f) == slurp(replayed / f) && !slurp(live / f).empty();
  std::filesystem::remove_all(logs);
  std::filesystem::remove_all(live);
  std::filesystem::remove_all(replayed);
  return {same && sessions == 50,
          std::to_string(sessions) + " sessions exported, " + std::to_string(again.recovered_sessions()) +
              " replayed, exports " + (same ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
  criterion("oracle-equivalence", oracle_equivalence);
  criterion("policy-path-equivalence", policy_paths);
  criterion("budget-identity", budget_identity);
  criterion("measures-fixture", measures_fixture);
  criterion("da-bounds", da_bounds);
  criterion("statistics-vs-enumeration", statistics);
  criterion("replay-determinism", replay_determinism);
  std::printf("SKIP  %-28s %s\n", "replication-dataset", "SKIPPED (conditional: replication dataset not present)");
  std::printf("%s\n", failures ? "acceptance: FAILED" : "acceptance: all unconditional criteria passed");
  return failures ? 1 : 0;
}
