#pragma once

#include "lifecycle/error.hpp"
#include "lifecycle/model.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace lifecycle {

enum class Ordering { BorrowingFirst, SavingFirst };

constexpr std::string_view to_string(Ordering o) noexcept {
  return o == Ordering::BorrowingFirst ? "BF" : "SF";
}

inline Ordering parse_ordering(std::string_view s) {
  if (s == "BF" || s == "borrowing_first") return Ordering::BorrowingFirst;
  if (s == "SF" || s == "saving_first") return Ordering::SavingFirst;
  throw Error(ErrorKind::Validation, "unknown ordering '" + std::string(s) + "' (expected BF or SF)");
}

enum class PaymentRule { SumAllRounds, RandomRound };

constexpr std::string_view to_string(PaymentRule r) noexcept {
  return r == PaymentRule::SumAllRounds ? "sum_all_rounds" : "random_round";
}

inline PaymentRule parse_payment_rule(std::string_view s) {
  if (s == "sum_all_rounds") return PaymentRule::SumAllRounds;
  if (s == "random_round") return PaymentRule::RandomRound;
  throw Error(ErrorKind::Validation, "unknown payment rule '" + std::string(s) + "'");
}

struct PaymentConfig {
  // Currency per utility point. Optimal play earns about 26,300 points over
  // six rounds, so the default pays roughly 25 on top of the show-up fee.
  double exchange_rate = 0.00095;
  double show_up_fee = 5.50;
  PaymentRule rule = PaymentRule::SumAllRounds;
  std::uint64_t seed = 7;
};

struct CrtItem {
  std::string question;
  double answer = 0.0;
};

struct MplRow {
  std::string safe;
  std::string lottery;
};

struct QuestionnaireConfig {
  std::vector<CrtItem> crt_items;
  int mpl_rows = 14;
  std::vector<MplRow> mpl;  // empty rows are filled from the default template
};

inline std::vector<CrtItem> default_crt_items() {
  return {
      {"A bat and a ball cost $1.10 in total. The bat costs $1.00 more than the ball. "
       "How much does the ball cost (in cents)?",
       5.0},
      {"If it takes 5 machines 5 minutes to make 5 widgets, how long would it take 100 "
       "machines to make 100 widgets (in minutes)?",
       5.0},
      {"In a lake, there is a patch of lily pads. Every day, the patch doubles in size. If it "
       "takes 48 days for the patch to cover the entire lake, how long would it take for the "
       "patch to cover half of the lake (in days)?",
       47.0},
  };
}

// Row k of n: a fixed 6.00 against 15.00 with probability k/n.
inline MplRow default_mpl_row(int k, int n) {
  std::ostringstream lottery;
  lottery << "15.00 with probability " << k << "/" << n << ", otherwise 0.00";
  return {"6.00 for sure", lottery.str()};
}

struct StudyConfig {
  std::string study_id = "study";
  std::string country = "SIM";
  Ordering ordering = Ordering::BorrowingFirst;
  int rounds_per_treatment = 3;
  ModelParams params;
  std::uint64_t shock_seed = 1;
  PaymentConfig payment;
  QuestionnaireConfig questionnaire{default_crt_items(), 14, {}};

  int rounds() const noexcept { return 2 * rounds_per_treatment; }

  Treatment treatment_for(int round, Ordering order) const noexcept {
    const bool first_block = round <= rounds_per_treatment;
    const bool borrowing = (order == Ordering::BorrowingFirst) == first_block;
    return borrowing ? Treatment::Borrowing : Treatment::Saving;
  }

  MplRow mpl_row(int k) const {
    if (k >= 1 && k <= static_cast<int>(questionnaire.mpl.size())) {
      const auto& row = questionnaire.mpl[k - 1];
      if (!row.safe.empty() || !row.lottery.empty()) return row;
    }
    return default_mpl_row(k, questionnaire.mpl_rows);
  }

  void validate() const {
    try {
      params.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::Validation, std::string("params: ") + e.what());
    }
    if (rounds_per_treatment < 1) throw Error(ErrorKind::Validation, "rounds_per_treatment must be >= 1");
    if (!(payment.exchange_rate > 0.0)) throw Error(ErrorKind::Validation, "payment.exchange_rate must be > 0");
    if (!(payment.show_up_fee >= 0.0)) throw Error(ErrorKind::Validation, "payment.show_up_fee must be >= 0");
    if (questionnaire.mpl_rows < 1) throw Error(ErrorKind::Validation, "questionnaire.mpl_rows must be >= 1");
    if (study_id.empty() || study_id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
                                std::string::npos)
      throw Error(ErrorKind::Validation, "study_id must be non-empty and use only [A-Za-z0-9_-]");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty())
    throw Error(ErrorKind::Validation, "config key '" + std::string(key) + "': cannot parse '" + text + "'");
  return value;
}

inline bool parse_indexed(std::string_view key, std::string_view prefix, int& index,
                          std::string& field) {
  if (key.substr(0, prefix.size()) != prefix) return false;
  const auto rest = key.substr(prefix.size());
  const auto dot = rest.find('.');
  if (dot == std::string_view::npos) return false;
  const auto num = std::string(rest.substr(0, dot));
  const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), index);
  if (ec != std::errc{} || ptr != num.data() + num.size() || index < 1) return false;
  field = std::string(rest.substr(dot + 1));
  return true;
}

}  // namespace detail

// Flat `key = value` file; '#' starts a comment. Keys mirror the StudyConfig
// field paths, e.g. `params.theta`, `payment.rule`, `questionnaire.crt.2.answer`.
inline StudyConfig parse_study_config(std::istream& in) {
  StudyConfig cfg;
  std::map<int, CrtItem> crt;
  bool crt_given = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Validation, "config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = detail::trim(std::string_view(stripped).substr(0, eq));
    const auto value = detail::trim(std::string_view(stripped).substr(eq + 1));
    using detail::parse_number;

    int index = 0;
    std::string field;
    if (key == "study_id") cfg.study_id = value;
    else if (key == "country") cfg.country = value;
    else if (key == "ordering") cfg.ordering = parse_ordering(value);
    else if (key == "rounds_per_treatment") cfg.rounds_per_treatment = parse_number<int>(key, value);
    else if (key == "shock_seed") cfg.shock_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "params.horizon_T") cfg.params.horizon = parse_number<int>(key, value);
    else if (key == "params.theta") cfg.params.theta = parse_number<double>(key, value);
    else if (key == "params.utility_scale") cfg.params.utility_scale = parse_number<double>(key, value);
    else if (key == "params.shock_sigma") cfg.params.shock_sigma = parse_number<double>(key, value);
    else if (key == "payment.exchange_rate") cfg.payment.exchange_rate = parse_number<double>(key, value);
    else if (key == "payment.show_up_fee") cfg.payment.show_up_fee = parse_number<double>(key, value);
    else if (key == "payment.rule") cfg.payment.rule = parse_payment_rule(value);
    else if (key == "payment.seed") cfg.payment.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "questionnaire.mpl_rows") cfg.questionnaire.mpl_rows = parse_number<int>(key, value);
    else if (detail::parse_indexed(key, "questionnaire.crt.", index, field) &&
             (field == "question" || field == "answer")) {
      crt_given = true;
      if (field == "question") crt[index].question = value;
      else crt[index].answer = parse_number<double>(key, value);
    } else if (detail::parse_indexed(key, "questionnaire.mpl.", index, field) &&
               (field == "safe" || field == "lottery")) {
      auto& rows = cfg.questionnaire.mpl;
      if (static_cast<int>(rows.size()) < index) rows.resize(static_cast<std::size_t>(index));
      (field == "safe" ? rows[index - 1].safe : rows[index - 1].lottery) = value;
    } else {
      throw Error(ErrorKind::Validation, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (crt_given) {
    cfg.questionnaire.crt_items.clear();
    int expected = 1;
    for (auto& [i, item] : crt) {
      if (i != expected++ || item.question.empty())
        throw Error(ErrorKind::Validation, "questionnaire.crt items must be numbered 1..n with a question each");
      cfg.questionnaire.crt_items.push_back(item);
    }
  }
  cfg.validate();
  return cfg;
}

inline StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Data, "cannot open study config '" + path + "'");
  return parse_study_config(in);
}

}  // namespace lifecycle
