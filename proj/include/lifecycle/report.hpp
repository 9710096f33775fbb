#pragma once

// Tables and figure data computed from an AnalysisDataset. Everything is
// emitted as CSV; figures come with a short plot-spec text.

#include "lifecycle/csv.hpp"
#include "lifecycle/dataset.hpp"
#include "lifecycle/error.hpp"
#include "lifecycle/measures.hpp"
#include "lifecycle/model.hpp"
#include "lifecycle/regression.hpp"
#include "lifecycle/stats.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lifecycle::report {

namespace detail {

inline std::string p_text(double p) { return csv::fixed6(p); }

inline double measure_of(const AnalysisRow& r, int m) { return m == 1 ? r.m1 : m == 2 ? r.m2 : r.m3; }

inline std::vector<double> present(const std::vector<std::optional<double>>& v) {
  std::vector<double> out;
  for (const auto& x : v)
    if (x) out.push_back(*x);
  return out;
}

inline std::string range_label(int lo, int hi) { return std::to_string(lo) + "-" + std::to_string(hi); }

}  // namespace detail

// The country whose participants carry individual covariates: the one with
// the most non-missing CRT scores, ties broken alphabetically.
inline std::string focal_country(const AnalysisDataset& ds) {
  std::map<std::string, int> count;
  for (const auto& p : ds.participants()) count[p.country] += p.crt_score ? 1 : 0;
  if (count.empty()) throw Error(ErrorKind::Data, "dataset is empty");
  std::string best = count.begin()->first;
  for (const auto& [c, n] : count)
    if (n > count[best]) best = c;
  return best;
}

// Participant-level summary statistics (nearest-rank percentiles).
inline csv::Table table1(const AnalysisDataset& ds) {
  csv::Table t;
  t.header = {"country", "variable", "n", "mean", "sd", "p5", "p95"};
  const auto participants = ds.participants();
  for (const auto& country : ds.countries()) {
    std::vector<std::optional<double>> crt, female, risk;
    for (const auto& p : participants) {
      if (p.country != country) continue;
      crt.push_back(p.crt_score);
      female.push_back(p.female);
      risk.push_back(p.risk_aversion);
    }
    const std::pair<const char*, std::vector<std::optional<double>>*> vars[] = {
        {"crt_score", &crt}, {"female", &female}, {"risk_aversion", &risk}};
    for (const auto& [name, values] : vars) {
      const auto v = detail::present(*values);
      const auto s = stats::summarize(v);
      t.rows.push_back({country, name, std::to_string(s.n), csv::fixed6(s.mean), csv::fixed6(s.sd),
                        csv::fixed6(s.p5), csv::fixed6(s.p95)});
    }
  }
  return t;
}

// Per country, measure and round: BF vs SF medians and a Mann-Whitney test.
inline csv::Table table2(const AnalysisDataset& ds) {
  csv::Table t;
  t.header = {"country", "measure", "round", "median_bf", "median_sf", "n_bf", "n_sf", "u", "p_value", "exact"};
  for (const auto& country : ds.countries())
    for (int m = 1; m <= 3; ++m)
      for (int r = 1; r <= ds.rounds(); ++r) {
        std::vector<double> bf, sf;
        for (const auto& row : ds.rows) {
          if (row.country != country || row.round != r) continue;
          (row.ordering == Ordering::BorrowingFirst ? bf : sf).push_back(detail::measure_of(row, m));
        }
        std::vector<std::string> line{country, "m" + std::to_string(m), std::to_string(r),
                                      bf.empty() ? "" : csv::fixed6(stats::median(bf)),
                                      sf.empty() ? "" : csv::fixed6(stats::median(sf)),
                                      std::to_string(bf.size()), std::to_string(sf.size())};
        if (!bf.empty() && !sf.empty()) {
          const auto res = stats::mann_whitney_u(bf, sf);
          line.insert(line.end(), {csv::fixed6(res.statistic), detail::p_text(res.p_value), res.exact ? "1" : "0"});
        } else {
          line.insert(line.end(), {"", "", ""});
        }
        t.rows.push_back(std::move(line));
      }
  return t;
}

// Cohen's d of borrowing-round minus saving-round values within each block
// of rounds, pooling participant-round rows.
inline csv::Table table3(const AnalysisDataset& ds) {
  csv::Table t;
  t.header = {"country", "measure", "rounds", "d", "n_borrowing", "n_saving", "note"};
  const int half = ds.rounds() / 2;
  for (const auto& country : ds.countries())
    for (int m = 1; m <= 3; ++m)
      for (int block = 0; block < 2; ++block) {
        const int lo = block * half + 1, hi = (block + 1) * half;
        std::vector<double> borrowing, saving;
        for (const auto& row : ds.rows) {
          if (row.country != country || row.round < lo || row.round > hi) continue;
          (row.treatment == Treatment::Borrowing ? borrowing : saving).push_back(detail::measure_of(row, m));
        }
        std::string d, note;
        try {
          d = csv::fixed6(stats::cohens_d(borrowing, saving));
        } catch (const Error& e) {
          note = e.what();
        }
        t.rows.push_back({country, "m" + std::to_string(m), detail::range_label(lo, hi), d,
                          std::to_string(borrowing.size()), std::to_string(saving.size()), note});
      }
  return t;
}

// Learning: medians of m2 differences with Wilcoxon signed-rank tests.
inline csv::Table table5(const AnalysisDataset& ds) {
  csv::Table t;
  t.header = {"country", "ordering", "delta", "round", "median", "n", "w", "p_value", "exact", "degenerate"};
  const auto participants = ds.participants();
  for (const auto& country : ds.countries())
    for (const auto ordering : {Ordering::BorrowingFirst, Ordering::SavingFirst}) {
      std::vector<LearningDeltas> deltas;
      for (const auto& p : participants)
        if (p.country == country && p.ordering == ordering) deltas.push_back(learning_deltas(p.m2_by_round));
      if (deltas.empty()) continue;
      for (const auto kind : {"consecutive", "from_first"}) {
        for (int r = 2; r <= ds.rounds(); ++r) {
          std::vector<double> d;
          for (const auto& ld : deltas)
            d.push_back((std::string(kind) == "consecutive" ? ld.consecutive : ld.from_first)[r - 2]);
          const auto res = stats::wilcoxon_signed_rank(d);
          t.rows.push_back({country, std::string(to_string(ordering)), kind, std::to_string(r),
                            csv::fixed6(stats::median(d)), std::to_string(d.size()), csv::fixed6(res.statistic),
                            detail::p_text(res.p_value), res.exact ? "1" : "0", res.degenerate ? "1" : "0"});
        }
      }
    }
  return t;
}

struct RegressionSpec {
  std::string name;
  std::string sample;  // label of the row subset
  Formula formula;
  std::function<bool(std::size_t)> include;  // row filter on the frame
};

inline csv::Table regression_header() {
  csv::Table t;
  t.header = {"spec", "sample", "term", "coef", "se", "t", "p_value", "n", "clusters", "r2", "adj_r2", "note"};
  return t;
}

inline void run_specs(csv::Table& out, const RegressionFrame& full, const std::vector<RegressionSpec>& specs) {
  for (const auto& spec : specs) {
    RegressionFrame frame;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < full.rows(); ++i)
      if (!spec.include || spec.include(i)) rows.push_back(i);
    for (const auto& [name, col] : full.columns) {
      auto& dst = frame.columns[name];
      for (auto i : rows) dst.push_back(col[i]);
    }
    for (auto i : rows) frame.cluster.push_back(full.cluster[i]);
    try {
      const auto res = ols_clustered(frame, spec.formula);
      for (std::size_t j = 0; j < res.terms.size(); ++j) {
        const auto k = static_cast<Eigen::Index>(j);
        out.rows.push_back({spec.name, spec.sample, res.terms[j], csv::fixed6(res.coef[k]), csv::fixed6(res.se[k]),
                            csv::fixed6(res.t[k]), csv::fixed6(res.p[k]), std::to_string(res.n),
                            std::to_string(res.clusters), csv::fixed6(res.r2), csv::fixed6(res.adj_r2), ""});
      }
    } catch (const Error& e) {
      out.rows.push_back({spec.name, spec.sample, "", "", "", "", "", "", "", "", "", e.what()});
    }
  }
}

inline void add_country_dummies(RegressionFrame& frame, const std::vector<std::string>& row_country,
                                const std::vector<std::string>& countries, const std::string& reference,
                                std::vector<std::string>& names) {
  for (const auto& c : countries) {
    if (c == reference) continue;
    const auto name = "country_" + c;
    names.push_back(name);
    auto& col = frame.columns[name];
    for (const auto& rc : row_country) col.push_back(rc == c ? 1.0 : 0.0);
  }
}

// m2 on covariates, participant-round rows clustered by participant. Spec 1
// pools countries (only with two or more); specs 2-5 use the focal country.
// Each spec is repeated on saving-only and borrowing-only rows.
inline csv::Table table4(const AnalysisDataset& ds, const std::string& focal) {
  RegressionFrame frame;
  std::vector<std::string> country;
  std::vector<Treatment> treatment;
  for (const auto& r : ds.rows) {
    frame.columns["m2"].push_back(r.m2);
    frame.columns["round"].push_back(static_cast<double>(r.round));
    frame.columns["crt_score"].push_back(r.crt_score);
    frame.columns["crt_known"].push_back(r.crt_known);
    frame.columns["female"].push_back(r.female);
    frame.columns["risk_aversion"].push_back(r.risk_aversion);
    frame.cluster.push_back(r.participant_key());
    country.push_back(r.country);
    treatment.push_back(r.treatment);
  }
  std::vector<std::string> dummies;
  const auto countries = ds.countries();
  add_country_dummies(frame, country, countries, focal, dummies);

  std::vector<RegressionSpec> specs;
  const std::pair<std::string, std::optional<Treatment>> samples[] = {
      {"all", std::nullopt}, {"saving", Treatment::Saving}, {"borrowing", Treatment::Borrowing}};
  for (const auto& [label, only] : samples) {
    auto keep_t = [&, only = only](std::size_t i) { return !only || treatment[i] == *only; };
    auto focal_only = [&, keep_t](std::size_t i) { return keep_t(i) && country[i] == focal; };
    if (countries.size() >= 2) {
      Formula f{"m2", {"round"}};
      f.covariates.insert(f.covariates.end(), dummies.begin(), dummies.end());
      specs.push_back({"1", label, f, keep_t});
    }
    specs.push_back({"2", label, {"m2", {"round", "crt_score", "crt_known"}}, focal_only});
    specs.push_back({"3", label, {"m2", {"round", "female"}}, focal_only});
    specs.push_back({"4", label, {"m2", {"round", "risk_aversion"}}, focal_only});
    specs.push_back({"5", label, {"m2", {"round", "crt_score", "female", "risk_aversion", "crt_known"}}, focal_only});
  }
  auto out = regression_header();
  run_specs(out, frame, specs);
  return out;
}

// Debt-aversion index on covariates, one row per participant.
inline csv::Table table_da(const AnalysisDataset& ds, const std::string& focal) {
  RegressionFrame frame;
  std::vector<std::string> country;
  auto opt = [](const std::optional<double>& x, auto f) -> std::optional<double> {
    return x ? std::optional<double>(f(*x)) : std::nullopt;
  };
  for (const auto& p : ds.participants()) {
    frame.columns["da"].push_back(p.da.da);
    frame.columns["saving_first"].push_back(p.ordering == Ordering::SavingFirst ? 1.0 : 0.0);
    frame.columns["crt_score"].push_back(p.crt_score);
    frame.columns["crt_score_sq"].push_back(opt(p.crt_score, [](double c) { return c * c; }));
    for (int k = 1; k <= 3; ++k)
      frame.columns["crt" + std::to_string(k)].push_back(
          opt(p.crt_score, [k](double c) { return std::lround(c) == k ? 1.0 : 0.0; }));
    frame.columns["crt_known"].push_back(p.crt_known);
    frame.columns["female"].push_back(p.female);
    frame.columns["risk_aversion"].push_back(p.risk_aversion);
    frame.cluster.push_back(p.participant_key());
    country.push_back(p.country);
  }
  std::vector<std::string> dummies;
  const auto countries = ds.countries();
  add_country_dummies(frame, country, countries, focal, dummies);
  auto focal_only = [&](std::size_t i) { return country[i] == focal; };

  std::vector<RegressionSpec> specs;
  if (countries.size() >= 2) {
    Formula f{"da", {"saving_first"}};
    f.covariates.insert(f.covariates.end(), dummies.begin(), dummies.end());
    specs.push_back({"1", "all", f, nullptr});
  }
  specs.push_back({"2", focal, {"da", {"saving_first", "crt_score", "crt_known"}}, focal_only});
  specs.push_back({"3", focal, {"da", {"saving_first", "female"}}, focal_only});
  specs.push_back({"4", focal, {"da", {"saving_first", "risk_aversion"}}, focal_only});
  specs.push_back(
      {"5", focal, {"da", {"saving_first", "crt_score", "female", "risk_aversion", "crt_known"}}, focal_only});
  specs.push_back({"6",
                   focal,
                   {"da", {"saving_first", "crt_score", "female", "risk_aversion", "crt_score_sq", "crt_known"}},
                   focal_only});
  specs.push_back({"7",
                   focal,
                   {"da", {"saving_first", "female", "risk_aversion", "crt1", "crt2", "crt3", "crt_known"}},
                   focal_only});
  auto out = regression_header();
  run_specs(out, frame, specs);
  return out;
}

// Per-participant DA values, the input of figure 4 and the DA regressions.
inline csv::Table da_values(const AnalysisDataset& ds) {
  csv::Table t;
  t.header = {"country", "participant_id", "ordering", "da", "degenerate"};
  for (const auto& p : ds.participants())
    t.rows.push_back({p.country, p.participant_id, std::string(to_string(p.ordering)), csv::fixed6(p.da.da),
                      p.da.degenerate ? "1" : "0"});
  return t;
}

// Mean and median consumption by period next to the optimal path for the
// round's shock sequence. Needs period-level data.
inline csv::Table fig2(const AnalysisDataset& ds, const ModelParams& params) {
  if (ds.periods.empty()) throw Error(ErrorKind::Data, "figure 2 needs periods.csv");
  csv::Table t;
  t.header = {"country", "ordering", "round", "treatment", "period", "n", "mean_consumption", "median_consumption",
              "optimal_consumption"};
  using Key = std::tuple<std::string, Ordering, int>;
  std::map<Key, std::map<int, std::vector<double>>> consumption;
  std::map<Key, std::map<int, double>> shocks;
  std::map<Key, Treatment> treatments;
  for (const auto& r : ds.periods) {
    const Key key{r.country, r.ordering, r.round};
    consumption[key][r.period].push_back(r.consumption);
    shocks[key].emplace(r.period, r.shock);
    treatments[key] = r.treatment;
  }
  for (const auto& [key, by_period] : consumption) {
    const auto& [country, ordering, round] = key;
    ShockSequence seq;
    for (const auto& [period, s] : shocks[key]) seq.shocks.push_back(s);
    if (static_cast<int>(seq.shocks.size()) != params.horizon)
      throw Error(ErrorKind::Data, "periods.csv: round " + std::to_string(round) + " has " +
                                       std::to_string(seq.shocks.size()) + " periods, expected " +
                                       std::to_string(params.horizon));
    const auto optimal = simulate_optimal(treatments[key], seq, params);
    for (const auto& [period, values] : by_period)
      t.rows.push_back({country, std::string(to_string(ordering)), std::to_string(round),
                        std::string(to_string(treatments[key])), std::to_string(period),
                        std::to_string(values.size()), csv::fixed6(stats::mean(values)),
                        csv::fixed6(stats::median(values)),
                        csv::fixed6(optimal.consumption[static_cast<std::size_t>(period - 1)])});
  }
  return t;
}

// Median m1, m2, m3 per country, ordering and round.
inline csv::Table fig3(const AnalysisDataset& ds) {
  csv::Table t;
  t.header = {"country", "ordering", "measure", "round", "n", "median"};
  for (const auto& country : ds.countries())
    for (const auto ordering : {Ordering::BorrowingFirst, Ordering::SavingFirst})
      for (int m = 1; m <= 3; ++m)
        for (int r = 1; r <= ds.rounds(); ++r) {
          std::vector<double> v;
          for (const auto& row : ds.rows)
            if (row.country == country && row.ordering == ordering && row.round == r)
              v.push_back(detail::measure_of(row, m));
          if (v.empty()) continue;
          t.rows.push_back({country, std::string(to_string(ordering)), "m" + std::to_string(m), std::to_string(r),
                            std::to_string(v.size()), csv::fixed6(stats::median(v))});
        }
  return t;
}

struct Fig4 {
  std::map<std::string, csv::Table> densities;  // country -> (da, density)
  csv::Table tests;                             // pairwise Mann-Whitney between countries
  std::vector<std::string> notes;
};

inline Fig4 fig4(const AnalysisDataset& ds, std::size_t grid_points = 301) {
  Fig4 out;
  out.tests.header = {"country_a", "country_b", "n_a", "n_b", "u", "p_value", "exact"};
  std::map<std::string, std::vector<double>> da;
  for (const auto& p : ds.participants()) da[p.country].push_back(p.da.da);
  const auto grid = stats::linspace(-1.5, 1.5, grid_points);
  for (const auto& [country, values] : da) {
    try {
      const auto density = stats::kernel_density(values, grid);
      csv::Table t;
      t.header = {"da", "density"};
      for (std::size_t i = 0; i < grid.size(); ++i) t.rows.push_back({csv::fixed6(grid[i]), csv::fixed6(density[i])});
      out.densities[country] = std::move(t);
    } catch (const Error& e) {
      out.notes.push_back("density for " + country + " skipped: " + e.what());
    }
  }
  for (auto a = da.begin(); a != da.end(); ++a)
    for (auto b = std::next(a); b != da.end(); ++b) {
      const auto res = stats::mann_whitney_u(a->second, b->second);
      out.tests.rows.push_back({a->first, b->first, std::to_string(a->second.size()), std::to_string(b->second.size()),
                                csv::fixed6(res.statistic), detail::p_text(res.p_value), res.exact ? "1" : "0"});
    }
  return out;
}

struct Selection {
  std::set<std::string> tables;  // "1".."5", "da"
  std::set<std::string> figures;  // "2".."4"
  std::optional<std::string> focal;
  ModelParams params;
};

struct Written {
  std::vector<std::string> files;
  std::vector<std::string> notes;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Data, "cannot write '" + path.string() + "'");
  out << text;
}

inline Written write_report(const AnalysisDataset& ds, const Selection& sel, const std::filesystem::path& dir) {
  if (ds.rows.empty()) throw Error(ErrorKind::Data, "no participant-round rows to analyze");
  std::filesystem::create_directories(dir);
  Written w;
  auto put = [&](const std::string& name, const csv::Table& t) {
    csv::write_file((dir / name).string(), t);
    w.files.push_back(name);
  };
  const auto focal = sel.focal.value_or(focal_country(ds));
  if (sel.tables.count("1")) put("table1.csv", table1(ds));
  if (sel.tables.count("2")) put("table2.csv", table2(ds));
  if (sel.tables.count("3")) put("table3.csv", table3(ds));
  if (sel.tables.count("4")) put("table4.csv", table4(ds, focal));
  if (sel.tables.count("5")) put("table5.csv", table5(ds));
  if (sel.tables.count("da")) {
    put("table_da.csv", table_da(ds, focal));
    put("da_values.csv", da_values(ds));
  }
  if (sel.figures.count("2")) {
    put("fig2_consumption.csv", fig2(ds, sel.params));
    write_text(dir / "fig2_plot.txt",
               "file: fig2_consumption.csv\n"
               "panels: one per (country, ordering, round)\n"
               "x: period\n"
               "lines: mean_consumption (solid), median_consumption (dashed), optimal_consumption (black)\n");
    w.files.push_back("fig2_plot.txt");
  }
  if (sel.figures.count("3")) {
    put("fig3_medians.csv", fig3(ds));
    write_text(dir / "fig3_plot.txt",
               "file: fig3_medians.csv\n"
               "panels: one per measure (m1, m2, m3)\n"
               "x: round\n"
               "lines: median, one per (country, ordering)\n");
    w.files.push_back("fig3_plot.txt");
  }
  if (sel.figures.count("4")) {
    auto f = fig4(ds);
    std::string spec = "x: da (debt aversion index)\ny: kernel density (Gaussian, Silverman bandwidth)\n";
    for (const auto& [country, table] : f.densities) {
      const auto name = "fig4_density_" + country + ".csv";
      put(name, table);
      spec += "line: " + name + " label " + country + "\n";
    }
    put("fig4_country_test.csv", f.tests);
    for (const auto& n : f.notes) spec += "note: " + n + "\n";
    write_text(dir / "fig4_plot.txt", spec);
    w.files.push_back("fig4_plot.txt");
    w.notes.insert(w.notes.end(), f.notes.begin(), f.notes.end());
  }
  return w;
}

}  // namespace lifecycle::report
