#pragma once

// Canonical CSV export of completed sessions: periods.csv, participants.csv
// and measures.csv.

#include "lifecycle/csv.hpp"
#include "lifecycle/measures.hpp"
#include "lifecycle/session.hpp"

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

namespace lifecycle {

struct ExportTables {
  csv::Table periods;
  csv::Table participants;
  csv::Table measures;
};

struct ExportResult {
  std::size_t sessions = 0;
  bool empty = false;  // no completed sessions; headers only
};

inline ExportTables build_export(std::vector<const SessionRecord*> sessions, const ModelParams& params) {
  std::erase_if(sessions, [](const SessionRecord* s) { return !s->payment_total.has_value(); });
  std::sort(sessions.begin(), sessions.end(),
            [](const SessionRecord* a, const SessionRecord* b) { return a->participant_id < b->participant_id; });

  ExportTables out;
  out.periods.header = {"participant_id", "ordering", "round",  "treatment",   "period",
                        "income",         "shock",    "wealth", "consumption", "assets"};
  out.participants.header = {"participant_id", "ordering",    "crt_score",      "crt_known", "female",
                             "risk_aversion",  "nationality", "field_of_study", "payment",   "country"};
  out.measures.header = {"participant_id", "ordering", "round", "treatment", "m1", "m2", "m3", "da"};

  for (const auto* s : sessions) {
    const std::string ordering{to_string(s->ordering)};
    std::vector<double> m2;
    std::vector<DeviationMeasures> per_round;
    for (const auto& r : s->rounds) {
      const auto& p = r.path;
      for (int t = 0; t < p.periods(); ++t)
        out.periods.rows.push_back({s->participant_id, ordering, std::to_string(r.round),
                                    std::string(to_string(p.treatment)), std::to_string(t + 1),
                                    csv::fixed6(p.income[t]), csv::fixed6(p.shocks.shocks[t]),
                                    csv::fixed6(p.wealth[t]), csv::fixed6(p.consumption[t]),
                                    csv::fixed6(p.assets[t])});
      per_round.push_back(compute_measures(p, params));
      m2.push_back(per_round.back().m2);
    }
    const auto da = compute_da(m2, s->ordering);
    for (std::size_t i = 0; i < per_round.size(); ++i) {
      const auto& m = per_round[i];
      out.measures.rows.push_back({s->participant_id, ordering, std::to_string(s->rounds[i].round),
                                   std::string(to_string(m.treatment)), csv::fixed6(m.m1), csv::fixed6(m.m2),
                                   csv::fixed6(m.m3), csv::fixed6(da.da)});
    }
    const auto& q = *s->questionnaire;
    const auto female = q.female();
    out.participants.rows.push_back({s->participant_id, ordering, std::to_string(q.crt_score),
                                     *q.answers.crt_known ? "1" : "0", female ? std::to_string(*female) : "",
                                     std::to_string(q.mpl_safe_count), q.answers.nationality,
                                     q.answers.field_of_study, csv::fixed6(*s->payment_total), s->country});
  }
  return out;
}

inline ExportResult write_export(const ExportTables& tables, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  csv::write_file((dir / "periods.csv").string(), tables.periods);
  csv::write_file((dir / "participants.csv").string(), tables.participants);
  csv::write_file((dir / "measures.csv").string(), tables.measures);
  ExportResult res;
  res.sessions = tables.participants.rows.size();
  res.empty = res.sessions == 0;
  return res;
}

}  // namespace lifecycle
