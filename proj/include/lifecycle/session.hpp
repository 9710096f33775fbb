#pragma once

// Experiment state machine for one participant: 2 x rounds_per_treatment
// rounds of T periods, then a questionnaire, then payment.

#include "lifecycle/error.hpp"
#include "lifecycle/model.hpp"
#include "lifecycle/study_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lifecycle {

enum class Phase { Playing, Questionnaire, Complete };

constexpr std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::Playing: return "play";
    case Phase::Questionnaire: return "questionnaire";
    case Phase::Complete: return "complete";
  }
  return "unknown";
}

struct HistoryEntry {
  int period;
  double income;
  double consumption;
  double assets;
};

struct PeriodState {
  int round;
  int period;
  Treatment treatment;
  double income;
  double assets_prev;
  double wealth;
  bool forced;  // final period: consumption is fixed at wealth
  std::vector<HistoryEntry> history;
};

struct RoundSummary {
  int round;
  Treatment treatment;
  double total_utility;
};

struct PhaseChange {
  Phase phase;
  std::optional<Treatment> treatment;
  std::string instructions;
};

struct QuestionnaireForm {
  std::vector<std::string> crt_questions;
  std::vector<MplRow> mpl_rows;
};

struct SessionComplete {
  double payment_total;
};

using SessionEvent =
    std::variant<PhaseChange, PeriodState, RoundSummary, QuestionnaireForm, SessionComplete>;

struct QuestionnaireAnswers {
  std::vector<std::string> crt_responses;
  std::optional<bool> crt_known;
  std::string mpl_choices;  // one 'S' (safe) or 'L' (lottery) per row
  std::string gender;
  std::string field_of_study;
  std::string nationality;
};

struct ScoredQuestionnaire {
  QuestionnaireAnswers answers;
  int crt_score = 0;
  int mpl_safe_count = 0;
  bool mpl_monotone = true;

  std::optional<int> female() const {
    const auto& g = answers.gender;
    if (g == "female" || g == "f" || g == "F") return 1;
    if (g == "male" || g == "m" || g == "M") return 0;
    return std::nullopt;
  }
};

struct RoundRecord {
  int round;
  LifecyclePath path;
};

struct SessionRecord {
  std::string session_id;
  std::string participant_id;
  std::string study_id;
  std::string country;
  Ordering ordering = Ordering::BorrowingFirst;
  std::vector<RoundRecord> rounds;
  std::optional<ScoredQuestionnaire> questionnaire;
  std::optional<double> payment_total;
};

inline std::string instructions_for(Treatment t, const StudyConfig& cfg, int first_round) {
  const auto p = with_treatment(cfg.params, t);
  std::ostringstream os;
  os << "Rounds " << first_round << "-" << first_round + cfg.rounds_per_treatment - 1 << ": ";
  os << "each round lasts " << p.horizon << " periods. In period t your income is "
     << p.income_intercept << (p.income_slope >= 0 ? " + " : " - ") << std::abs(p.income_slope)
     << " x t, plus or minus " << p.shock_sigma << " with equal chance. ";
  os << (t == Treatment::Borrowing
             ? "Income rises over the round, so smoothing consumption requires borrowing early "
               "and repaying later. "
             : "Income falls over the round, so smoothing consumption requires saving early "
               "and living off savings later. ");
  os << "Wealth is income plus savings carried over (negative savings are debt). There is no "
        "interest. In the last period all wealth is consumed. Each period you earn "
     << p.utility_scale << " x (1 - exp(-" << p.theta << " x consumption)) points.";
  return os.str();
}

inline ScoredQuestionnaire score_questionnaire(const QuestionnaireAnswers& answers,
                                               const StudyConfig& cfg) {
  const auto& qc = cfg.questionnaire;
  std::vector<std::string> missing;
  if (answers.crt_responses.size() != qc.crt_items.size()) {
    missing.push_back("crt_responses");
  } else {
    for (std::size_t i = 0; i < answers.crt_responses.size(); ++i)
      if (answers.crt_responses[i].empty()) missing.push_back("crt_responses[" + std::to_string(i) + "]");
  }
  if (!answers.crt_known) missing.push_back("crt_known");
  if (static_cast<int>(answers.mpl_choices.size()) != qc.mpl_rows ||
      answers.mpl_choices.find_first_not_of("SL") != std::string::npos)
    missing.push_back("mpl_choices");
  if (answers.gender.empty()) missing.push_back("gender");
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(ErrorKind::Validation, "incomplete questionnaire: " + list);
  }

  ScoredQuestionnaire out;
  out.answers = answers;
  for (std::size_t i = 0; i < qc.crt_items.size(); ++i) {
    const auto text = detail::trim(answers.crt_responses[i]);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc{} && ptr == text.data() + text.size() &&
        std::abs(value - qc.crt_items[i].answer) < 1e-9)
      ++out.crt_score;
  }
  const auto& mpl = answers.mpl_choices;
  const auto first_lottery = mpl.find('L');
  out.mpl_monotone =
      first_lottery == std::string::npos || mpl.find('S', first_lottery) == std::string::npos;
  out.mpl_safe_count = static_cast<int>(std::count(mpl.begin(), mpl.end(), 'S'));
  return out;
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

inline double round_total_utility(const LifecyclePath& path) {
  double total = 0.0;
  for (double u : path.utility) total += u;
  return total;
}

// Index (0-based) of the round paid under RandomRound.
inline int paid_round_index(const SessionRecord& session, const PaymentConfig& payment) {
  std::mt19937_64 rng{payment.seed ^ detail::fnv1a(session.participant_id)};
  return static_cast<int>(rng() % session.rounds.size());
}

inline double compute_payment(const SessionRecord& session, const StudyConfig& cfg) {
  if (static_cast<int>(session.rounds.size()) != cfg.rounds())
    throw Error(ErrorKind::State, "payment requires all " + std::to_string(cfg.rounds()) +
                                      " rounds to be complete");
  const auto& pay = cfg.payment;
  double points = 0.0;
  if (pay.rule == PaymentRule::SumAllRounds) {
    for (const auto& r : session.rounds) points += round_total_utility(r.path);
  } else {
    points = round_total_utility(session.rounds[paid_round_index(session, pay)].path);
  }
  const double total = std::round((pay.show_up_fee + pay.exchange_rate * points) * 100.0) / 100.0;
  return std::max(pay.show_up_fee, total);
}

class Session {
 public:
  Session(const StudyConfig& cfg, const std::vector<ShockSequence>& schedule,
          std::string participant_id, Ordering ordering)
      : cfg_{cfg}, schedule_{schedule} {
    record_.participant_id = std::move(participant_id);
    record_.study_id = cfg.study_id;
    record_.country = cfg.country;
    record_.session_id = cfg.study_id + "-" + record_.participant_id;
    record_.ordering = ordering;
    begin_round(1);
  }

  const SessionRecord& record() const noexcept { return record_; }
  const std::string& id() const noexcept { return record_.session_id; }
  Phase phase() const noexcept { return phase_; }
  int round() const noexcept { return round_; }
  int period() const noexcept { return period_; }

  // Events a freshly created session emits.
  std::vector<SessionEvent> opening_events() const {
    return {instructions_change(1), period_state()};
  }

  // What a reconnecting client needs to resume.
  std::vector<SessionEvent> current_events() const {
    switch (phase_) {
      case Phase::Playing: return {period_state()};
      case Phase::Questionnaire: return {questionnaire_form()};
      case Phase::Complete: return {SessionComplete{*record_.payment_total}};
    }
    return {};
  }

  PeriodState period_state() const {
    if (phase_ != Phase::Playing) throw Error(ErrorKind::State, "session is not in the play phase");
    PeriodState s;
    s.round = round_;
    s.period = period_;
    s.treatment = treatment();
    s.income = income_.back();
    s.assets_prev = assets_prev();
    s.wealth = wealth_.back();
    s.forced = period_ == cfg_.params.horizon;
    for (int t = 1; t < period_; ++t)
      s.history.push_back({t, income_[t - 1], consumption_[t - 1], assets_[t - 1]});
    return s;
  }

  std::vector<SessionEvent> submit_consumption(int round, int period, double c) {
    if (phase_ != Phase::Playing) throw Error(ErrorKind::State, "session is not in the play phase");
    if (round != round_ || period != period_)
      throw Error(ErrorKind::Sequence, "submission for round " + std::to_string(round) + " period " +
                                           std::to_string(period) + " but the open position is round " +
                                           std::to_string(round_) + " period " + std::to_string(period_));
    if (!std::isfinite(c)) throw Error(ErrorKind::Validation, "consumption must be finite");
    const int horizon = cfg_.params.horizon;
    const double w = wealth_.back();
    if (period_ == horizon) {
      c = w;
    } else if (c < 0.0) {
      throw Error(ErrorKind::Validation, "consumption must be non-negative");
    }
    consumption_.push_back(c);
    assets_.push_back(period_ == horizon ? 0.0 : w - c);

    std::vector<SessionEvent> events;
    if (period_ < horizon) {
      ++period_;
      push_income();
      events.emplace_back(period_state());
      return events;
    }

    finish_round();
    events.emplace_back(RoundSummary{round_, treatment(), round_total_utility(record_.rounds.back().path)});
    if (round_ == cfg_.rounds()) {
      phase_ = Phase::Questionnaire;
      events.emplace_back(PhaseChange{Phase::Questionnaire, std::nullopt, {}});
      events.emplace_back(questionnaire_form());
      return events;
    }
    begin_round(round_ + 1);
    if (round_ == cfg_.rounds_per_treatment + 1) events.emplace_back(instructions_change(round_));
    events.emplace_back(period_state());
    return events;
  }

  std::vector<SessionEvent> submit_questionnaire(const QuestionnaireAnswers& answers) {
    if (phase_ != Phase::Questionnaire)
      throw Error(ErrorKind::State, "session is not in the questionnaire phase");
    record_.questionnaire = score_questionnaire(answers, cfg_);
    record_.payment_total = compute_payment(record_, cfg_);
    phase_ = Phase::Complete;
    return {SessionComplete{*record_.payment_total}};
  }

  QuestionnaireForm questionnaire_form() const {
    QuestionnaireForm form;
    for (const auto& item : cfg_.questionnaire.crt_items) form.crt_questions.push_back(item.question);
    for (int k = 1; k <= cfg_.questionnaire.mpl_rows; ++k) form.mpl_rows.push_back(cfg_.mpl_row(k));
    return form;
  }

 private:
  Treatment treatment() const noexcept { return cfg_.treatment_for(round_, record_.ordering); }

  double assets_prev() const noexcept { return assets_.empty() ? 0.0 : assets_.back(); }

  PhaseChange instructions_change(int first_round) const {
    const auto t = cfg_.treatment_for(first_round, record_.ordering);
    return {Phase::Playing, t, instructions_for(t, cfg_, first_round)};
  }

  void begin_round(int round) {
    round_ = round;
    period_ = 1;
    income_.clear();
    wealth_.clear();
    consumption_.clear();
    assets_.clear();
    push_income();
  }

  void push_income() {
    const auto& shocks = schedule_.at(static_cast<std::size_t>(round_ - 1));
    const auto params = with_treatment(cfg_.params, treatment());
    const double y = expected_income(period_, params) + shocks.shocks.at(static_cast<std::size_t>(period_ - 1));
    income_.push_back(y);
    wealth_.push_back(y + assets_prev());
  }

  void finish_round() {
    LifecyclePath path;
    path.treatment = treatment();
    path.shocks = schedule_.at(static_cast<std::size_t>(round_ - 1));
    path.income = income_;
    path.wealth = wealth_;
    path.consumption = consumption_;
    path.assets = assets_;
    const auto params = with_treatment(cfg_.params, path.treatment);
    for (double c : consumption_) path.utility.push_back(utility(c, params));
    record_.rounds.push_back({round_, std::move(path)});
  }

  StudyConfig cfg_;
  std::vector<ShockSequence> schedule_;
  SessionRecord record_;
  Phase phase_ = Phase::Playing;
  int round_ = 1;
  int period_ = 1;
  std::vector<double> income_, wealth_, consumption_, assets_;
};

// A study fixes the config and the per-round shock sequences shared by all
// of its sessions.
class Study {
 public:
  explicit Study(StudyConfig cfg)
      : cfg_{std::move(cfg)},
        schedule_{(cfg_.validate(), draw_schedule(cfg_.shock_seed, cfg_.rounds(), cfg_.params.horizon,
                                                  cfg_.params.shock_sigma))} {}

  const StudyConfig& config() const noexcept { return cfg_; }
  const std::vector<ShockSequence>& schedule() const noexcept { return schedule_; }

  Session& create_session(const std::string& participant_id,
                          std::optional<Ordering> ordering = std::nullopt) {
    if (participant_id.empty()) throw Error(ErrorKind::Validation, "participant_id must not be empty");
    if (by_participant_.count(participant_id))
      throw Error(ErrorKind::Conflict, "participant '" + participant_id + "' already has a session in study '" +
                                           cfg_.study_id + "'");
    auto session = std::make_unique<Session>(cfg_, schedule_, participant_id, ordering.value_or(cfg_.ordering));
    auto& ref = *session;
    by_participant_[participant_id] = ref.id();
    sessions_[ref.id()] = std::move(session);
    return ref;
  }

  Session* find(const std::string& session_id) {
    const auto it = sessions_.find(session_id);
    return it == sessions_.end() ? nullptr : it->second.get();
  }
  const Session* find(const std::string& session_id) const {
    const auto it = sessions_.find(session_id);
    return it == sessions_.end() ? nullptr : it->second.get();
  }

  // Sorted by session id.
  const std::map<std::string, std::unique_ptr<Session>>& sessions() const noexcept { return sessions_; }

 private:
  StudyConfig cfg_;
  std::vector<ShockSequence> schedule_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
  std::map<std::string, std::string> by_participant_;
};

}  // namespace lifecycle
