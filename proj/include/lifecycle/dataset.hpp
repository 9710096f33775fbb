#pragma once

// Participant-round analysis dataset: loading from the canonical export and
// from external files through a column-mapping file.

#include "lifecycle/csv.hpp"
#include "lifecycle/error.hpp"
#include "lifecycle/measures.hpp"
#include "lifecycle/model.hpp"
#include "lifecycle/study_config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace lifecycle {

struct AnalysisRow {
  std::string participant_id;
  std::string country;
  Ordering ordering = Ordering::BorrowingFirst;
  int round = 0;
  Treatment treatment = Treatment::Borrowing;
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  std::optional<double> crt_score;
  std::optional<double> crt_known;
  std::optional<double> female;
  std::optional<double> risk_aversion;

  // Participant ids are only unique within a country sample.
  std::string participant_key() const { return country + "/" + participant_id; }
};

struct PeriodRow {
  std::string participant_id;
  std::string country;
  Ordering ordering = Ordering::BorrowingFirst;
  int round = 0;
  Treatment treatment = Treatment::Borrowing;
  int period = 0;
  double income = 0.0;
  double shock = 0.0;
  double wealth = 0.0;
  double consumption = 0.0;
  double assets = 0.0;
};

struct ParticipantSummary {
  std::string participant_id;
  std::string country;
  Ordering ordering = Ordering::BorrowingFirst;
  std::vector<double> m2_by_round;
  DebtAversionIndex da;
  std::optional<double> crt_score, crt_known, female, risk_aversion;

  std::string participant_key() const { return country + "/" + participant_id; }
};

struct AnalysisDataset {
  std::vector<AnalysisRow> rows;
  std::vector<PeriodRow> periods;

  int rounds() const {
    int r = 0;
    for (const auto& row : rows) r = std::max(r, row.round);
    return r;
  }

  std::vector<std::string> countries() const {
    std::set<std::string> s;
    for (const auto& row : rows) s.insert(row.country);
    return {s.begin(), s.end()};
  }

  // Enforces one row per participant-round, rounds 1..R with R even and
  // covariates constant within participant.
  void validate() const {
    std::map<std::string, std::set<int>> seen;
    std::map<std::string, const AnalysisRow*> first;
    const int total = rounds();
    if (total % 2 != 0) throw Error(ErrorKind::Data, "dataset must contain an even number of rounds");
    for (const auto& row : rows) {
      const auto key = row.participant_key();
      if (row.round < 1) throw Error(ErrorKind::Data, "round numbers start at 1 (participant " + key + ")");
      if (!seen[key].insert(row.round).second)
        throw Error(ErrorKind::Data, "duplicate row for participant " + key + " round " + std::to_string(row.round));
      auto [it, inserted] = first.emplace(key, &row);
      if (!inserted) {
        const auto& a = *it->second;
        if (std::tie(a.crt_score, a.crt_known, a.female, a.risk_aversion, a.ordering) !=
            std::tie(row.crt_score, row.crt_known, row.female, row.risk_aversion, row.ordering))
          throw Error(ErrorKind::Data, "participant " + key + " has covariates that vary across rounds");
      }
    }
    for (const auto& [key, rs] : seen)
      if (static_cast<int>(rs.size()) != total)
        throw Error(ErrorKind::Data, "participant " + key + " has " + std::to_string(rs.size()) + " of " +
                                         std::to_string(total) + " rounds");
  }

  // Ordered by (country, participant id).
  std::vector<ParticipantSummary> participants() const {
    std::map<std::string, ParticipantSummary> by_key;
    const int total = rounds();
    for (const auto& row : rows) {
      auto& p = by_key[row.participant_key()];
      if (p.m2_by_round.empty()) {
        p.participant_id = row.participant_id;
        p.country = row.country;
        p.ordering = row.ordering;
        p.crt_score = row.crt_score;
        p.crt_known = row.crt_known;
        p.female = row.female;
        p.risk_aversion = row.risk_aversion;
        p.m2_by_round.assign(static_cast<std::size_t>(total), 0.0);
      }
      p.m2_by_round[static_cast<std::size_t>(row.round - 1)] = row.m2;
    }
    std::vector<ParticipantSummary> out;
    for (auto& [key, p] : by_key) {
      p.da = compute_da(p.m2_by_round, p.ordering);
      out.push_back(std::move(p));
    }
    return out;
  }
};

namespace detail {

inline bool is_missing(const std::string& s, const std::set<std::string>& tokens) {
  return tokens.count(trim(s)) > 0;
}

inline double parse_double(const std::string& raw, std::string_view what) {
  const auto s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw Error(ErrorKind::Data, std::string(what) + ": cannot parse number '" + raw + "'");
  return v;
}

inline std::optional<double> parse_optional(const std::string& raw, std::string_view what,
                                            const std::set<std::string>& missing) {
  if (is_missing(raw, missing)) return std::nullopt;
  return parse_double(raw, what);
}

inline int parse_int(const std::string& raw, std::string_view what) {
  const double v = parse_double(raw, what);
  if (v != std::floor(v)) throw Error(ErrorKind::Data, std::string(what) + ": expected an integer, got '" + raw + "'");
  return static_cast<int>(v);
}

inline Treatment treatment_for(Ordering o, int round, int rounds_per_treatment) {
  const bool first_block = round <= rounds_per_treatment;
  return ((o == Ordering::BorrowingFirst) == first_block) ? Treatment::Borrowing : Treatment::Saving;
}

inline void assign_treatments(AnalysisDataset& ds) {
  const int half = ds.rounds() / 2;
  for (auto& row : ds.rows) row.treatment = treatment_for(row.ordering, row.round, half);
}

}  // namespace detail

// Reads measures.csv, participants.csv and (if present) periods.csv from a
// canonical export directory.
inline AnalysisDataset load_canonical(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const std::set<std::string> missing{""};
  const auto measures_path = (dir / "measures.csv").string();
  const auto participants_path = (dir / "participants.csv").string();
  const auto measures = csv::read_file(measures_path);
  const auto participants = csv::read_file(participants_path);

  struct Covariates {
    std::optional<double> crt_score, crt_known, female, risk_aversion;
    std::string country = "ALL";
  };
  std::map<std::string, Covariates> covariates;
  {
    const auto& t = participants;
    const auto id = t.require("participant_id", participants_path);
    const auto crt = t.require("crt_score", participants_path);
    const auto known = t.require("crt_known", participants_path);
    const auto female = t.require("female", participants_path);
    const auto risk = t.require("risk_aversion", participants_path);
    const auto country = t.find("country");
    for (const auto& row : t.rows) {
      if (row.size() != t.header.size()) throw Error(ErrorKind::Data, participants_path + ": ragged row");
      Covariates c;
      c.crt_score = detail::parse_optional(row[crt], "crt_score", missing);
      c.crt_known = detail::parse_optional(row[known], "crt_known", missing);
      c.female = detail::parse_optional(row[female], "female", missing);
      c.risk_aversion = detail::parse_optional(row[risk], "risk_aversion", missing);
      if (country && !row[*country].empty()) c.country = row[*country];
      covariates[row[id]] = c;
    }
  }

  AnalysisDataset ds;
  const auto& t = measures;
  const auto id = t.require("participant_id", measures_path);
  const auto ordering = t.require("ordering", measures_path);
  const auto round = t.require("round", measures_path);
  const auto m1 = t.require("m1", measures_path);
  const auto m2 = t.require("m2", measures_path);
  const auto m3 = t.require("m3", measures_path);
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw Error(ErrorKind::Data, measures_path + ": ragged row");
    const auto it = covariates.find(row[id]);
    if (it == covariates.end())
      throw Error(ErrorKind::Data, measures_path + ": participant '" + row[id] + "' missing from participants.csv");
    AnalysisRow r;
    r.participant_id = row[id];
    r.country = it->second.country;
    r.ordering = parse_ordering(row[ordering]);
    r.round = detail::parse_int(row[round], "round");
    r.m1 = detail::parse_double(row[m1], "m1");
    r.m2 = detail::parse_double(row[m2], "m2");
    r.m3 = detail::parse_double(row[m3], "m3");
    r.crt_score = it->second.crt_score;
    r.crt_known = it->second.crt_known;
    r.female = it->second.female;
    r.risk_aversion = it->second.risk_aversion;
    ds.rows.push_back(std::move(r));
  }
  detail::assign_treatments(ds);

  const auto periods_path = dir / "periods.csv";
  if (fs::exists(periods_path)) {
    const auto p = csv::read_file(periods_path.string());
    const auto path = periods_path.string();
    const std::size_t cols[] = {p.require("participant_id", path), p.require("ordering", path),
                                p.require("round", path),          p.require("treatment", path),
                                p.require("period", path),         p.require("income", path),
                                p.require("shock", path),          p.require("wealth", path),
                                p.require("consumption", path),    p.require("assets", path)};
    for (const auto& row : p.rows) {
      if (row.size() != p.header.size()) throw Error(ErrorKind::Data, path + ": ragged row");
      PeriodRow r;
      r.participant_id = row[cols[0]];
      const auto it = covariates.find(r.participant_id);
      r.country = it == covariates.end() ? "ALL" : it->second.country;
      r.ordering = parse_ordering(row[cols[1]]);
      r.round = detail::parse_int(row[cols[2]], "round");
      r.treatment = parse_treatment(row[cols[3]]);
      r.period = detail::parse_int(row[cols[4]], "period");
      r.income = detail::parse_double(row[cols[5]], "income");
      r.shock = detail::parse_double(row[cols[6]], "shock");
      r.wealth = detail::parse_double(row[cols[7]], "wealth");
      r.consumption = detail::parse_double(row[cols[8]], "consumption");
      r.assets = detail::parse_double(row[cols[9]], "assets");
      ds.periods.push_back(std::move(r));
    }
  }
  ds.validate();
  return ds;
}

// Column-mapping file for external participant-round data (long format, one
// row per participant and round). Flat `key = value` lines:
//
//   file = us_rounds.csv              # relative to the mapping file
//   column.participant_id = subject
//   column.round = period_block
//   column.ordering = order           # values mapped through value.ordering.*
//   value.ordering.1 = BF
//   value.ordering.0 = SF
//   column.m1 = m1                    # likewise m2, m3
//   column.crt_score = crt            # optional: crt_known, female, risk_aversion
//   column.country = sample           # or: constant.country = US
//   missing = ., NA                   # tokens read as missing (empty always is)
struct ImportMap {
  std::filesystem::path file;
  std::map<std::string, std::string> columns;
  std::map<std::string, std::string> ordering_values;
  std::optional<std::string> constant_country;
  std::set<std::string> missing{"", ".", "NA"};
};

inline ImportMap load_import_map(const std::filesystem::path& map_path) {
  std::ifstream in(map_path);
  if (!in) throw Error(ErrorKind::Data, "cannot open import map '" + map_path.string() + "'");
  ImportMap map;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto s = detail::trim(line);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Data, map_path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    const auto key = detail::trim(std::string_view(s).substr(0, eq));
    const auto value = detail::trim(std::string_view(s).substr(eq + 1));
    if (key == "file") {
      map.file = map_path.parent_path() / value;
    } else if (key.rfind("column.", 0) == 0) {
      map.columns[key.substr(7)] = value;
    } else if (key.rfind("value.ordering.", 0) == 0) {
      map.ordering_values[key.substr(15)] = value;
    } else if (key == "constant.country") {
      map.constant_country = value;
    } else if (key == "missing") {
      map.missing = {""};
      std::string token;
      for (char ch : value + ",") {
        if (ch == ',') {
          map.missing.insert(detail::trim(token));
          token.clear();
        } else {
          token += ch;
        }
      }
    } else {
      throw Error(ErrorKind::Data, map_path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (map.file.empty()) throw Error(ErrorKind::Data, map_path.string() + ": missing 'file' key");
  for (const char* required : {"participant_id", "round", "ordering", "m1", "m2", "m3"})
    if (!map.columns.count(required))
      throw Error(ErrorKind::Data, map_path.string() + ": missing column." + required);
  if (!map.columns.count("country") && !map.constant_country)
    throw Error(ErrorKind::Data, map_path.string() + ": needs column.country or constant.country");
  return map;
}

inline AnalysisDataset import_dataset(const ImportMap& map) {
  const auto path = map.file.string();
  const auto table = csv::read_file(path);
  auto col = [&](const std::string& canonical) -> std::optional<std::size_t> {
    const auto it = map.columns.find(canonical);
    if (it == map.columns.end()) return std::nullopt;
    return table.require(it->second, path);
  };
  const auto id = *col("participant_id"), round = *col("round"), ordering = *col("ordering");
  const auto m1 = *col("m1"), m2 = *col("m2"), m3 = *col("m3");
  const auto country = col("country"), crt = col("crt_score"), known = col("crt_known"), female = col("female"),
             risk = col("risk_aversion");

  AnalysisDataset ds;
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw Error(ErrorKind::Data, path + ": ragged row");
    AnalysisRow r;
    r.participant_id = detail::trim(row[id]);
    r.round = detail::parse_int(row[round], "round");
    const auto raw_order = detail::trim(row[ordering]);
    const auto mapped = map.ordering_values.find(raw_order);
    r.ordering = parse_ordering(mapped == map.ordering_values.end() ? raw_order : mapped->second);
    r.m1 = detail::parse_double(row[m1], "m1");
    r.m2 = detail::parse_double(row[m2], "m2");
    r.m3 = detail::parse_double(row[m3], "m3");
    r.country = country ? detail::trim(row[*country]) : *map.constant_country;
    if (crt) r.crt_score = detail::parse_optional(row[*crt], "crt_score", map.missing);
    if (known) r.crt_known = detail::parse_optional(row[*known], "crt_known", map.missing);
    if (female) r.female = detail::parse_optional(row[*female], "female", map.missing);
    if (risk) r.risk_aversion = detail::parse_optional(row[*risk], "risk_aversion", map.missing);
    ds.rows.push_back(std::move(r));
  }
  detail::assign_treatments(ds);
  ds.validate();
  return ds;
}

inline void append(AnalysisDataset& into, AnalysisDataset&& from) {
  std::move(from.rows.begin(), from.rows.end(), std::back_inserter(into.rows));
  std::move(from.periods.begin(), from.periods.end(), std::back_inserter(into.periods));
}

}  // namespace lifecycle
