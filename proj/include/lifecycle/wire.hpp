#pragma once

// Line-delimited JSON session protocol. Every message is one object
//   {"type": ..., "session_id": ..., "seq": n, "payload": {...}}
// terminated by '\n'.

#include "lifecycle/error.hpp"
#include "lifecycle/session.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lifecycle::wire {

using json = nlohmann::json;

namespace type {
inline constexpr const char* kHello = "HELLO";
inline constexpr const char* kPeriodState = "PERIOD_STATE";
inline constexpr const char* kSubmitConsumption = "SUBMIT_CONSUMPTION";
inline constexpr const char* kRoundSummary = "ROUND_SUMMARY";
inline constexpr const char* kPhaseChange = "PHASE_CHANGE";
inline constexpr const char* kQuestionnaireForm = "QUESTIONNAIRE_FORM";
inline constexpr const char* kQuestionnaireSubmit = "QUESTIONNAIRE_SUBMIT";
inline constexpr const char* kSessionComplete = "SESSION_COMPLETE";
inline constexpr const char* kError = "ERROR";
}  // namespace type

// Malformed envelope or payload.
class BadRequest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Envelope {
  std::string type;
  std::string session_id;
  std::int64_t seq = 0;
  json payload = json::object();
};

inline json to_json(const Envelope& e) {
  return json{{"type", e.type}, {"session_id", e.session_id}, {"seq", e.seq}, {"payload", e.payload}};
}

inline std::string dump(const Envelope& e) { return to_json(e).dump(); }

inline Envelope parse_envelope(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& ex) {
    throw BadRequest(std::string("malformed JSON: ") + ex.what());
  }
  if (!j.is_object()) throw BadRequest("message must be a JSON object");
  Envelope e;
  if (!j.contains("type") || !j["type"].is_string()) throw BadRequest("missing string field 'type'");
  e.type = j["type"].get<std::string>();
  if (j.contains("session_id")) {
    if (!j["session_id"].is_string()) throw BadRequest("'session_id' must be a string");
    e.session_id = j["session_id"].get<std::string>();
  }
  if (j.contains("seq")) {
    if (!j["seq"].is_number_integer()) throw BadRequest("'seq' must be an integer");
    e.seq = j["seq"].get<std::int64_t>();
  }
  if (j.contains("payload")) {
    if (!j["payload"].is_object()) throw BadRequest("'payload' must be an object");
    e.payload = j["payload"];
  }
  return e;
}

namespace detail {

template <typename T>
T field(const json& payload, const char* name) {
  if (!payload.contains(name)) throw BadRequest(std::string("payload missing field '") + name + "'");
  try {
    return payload.at(name).get<T>();
  } catch (const json::exception&) {
    throw BadRequest(std::string("payload field '") + name + "' has the wrong type");
  }
}

}  // namespace detail

struct SubmitConsumption {
  int round;
  int period;
  double consumption;
};

inline SubmitConsumption parse_submit(const json& payload) {
  if (!payload.contains("consumption") || !payload["consumption"].is_number())
    throw BadRequest("payload field 'consumption' must be a number");
  return {detail::field<int>(payload, "round"), detail::field<int>(payload, "period"),
          payload["consumption"].get<double>()};
}

inline json to_payload(const SubmitConsumption& s) {
  return {{"round", s.round}, {"period", s.period}, {"consumption", s.consumption}};
}

// Absent fields stay empty so the engine can report every missing field.
inline QuestionnaireAnswers parse_answers(const json& payload) {
  QuestionnaireAnswers a;
  try {
    if (payload.contains("crt_responses")) {
      for (const auto& r : payload.at("crt_responses")) {
        if (r.is_string()) a.crt_responses.push_back(r.get<std::string>());
        else if (r.is_number()) a.crt_responses.push_back(r.dump());
        else throw BadRequest("crt_responses entries must be strings or numbers");
      }
    }
    if (payload.contains("crt_known") && !payload["crt_known"].is_null())
      a.crt_known = payload.at("crt_known").get<bool>();
    if (payload.contains("mpl_choices")) {
      const auto& m = payload.at("mpl_choices");
      if (m.is_string()) {
        a.mpl_choices = m.get<std::string>();
      } else {
        for (const auto& c : m) a.mpl_choices += c.get<std::string>();
      }
    }
    if (payload.contains("gender")) a.gender = payload.at("gender").get<std::string>();
    if (payload.contains("field_of_study")) a.field_of_study = payload.at("field_of_study").get<std::string>();
    if (payload.contains("nationality")) a.nationality = payload.at("nationality").get<std::string>();
  } catch (const json::exception&) {
    throw BadRequest("questionnaire payload has a field of the wrong type");
  }
  return a;
}

inline json to_payload(const QuestionnaireAnswers& a) {
  json j{{"crt_responses", a.crt_responses},
         {"mpl_choices", a.mpl_choices},
         {"gender", a.gender},
         {"field_of_study", a.field_of_study},
         {"nationality", a.nationality}};
  j["crt_known"] = a.crt_known ? json(*a.crt_known) : json(nullptr);
  return j;
}

struct Encoded {
  std::string type;
  json payload;
};

inline Encoded encode(const SessionEvent& event) {
  return std::visit(
      [](const auto& e) -> Encoded {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, PeriodState>) {
          json history = json::array();
          for (const auto& h : e.history)
            history.push_back(
                {{"period", h.period}, {"income", h.income}, {"consumption", h.consumption}, {"assets", h.assets}});
          return {type::kPeriodState,
                  {{"round", e.round},
                   {"period", e.period},
                   {"treatment_label", to_string(e.treatment)},
                   {"income", e.income},
                   {"assets_prev", e.assets_prev},
                   {"wealth", e.wealth},
                   {"forced", e.forced},
                   {"history", history}}};
        } else if constexpr (std::is_same_v<T, RoundSummary>) {
          return {type::kRoundSummary,
                  {{"round", e.round}, {"treatment_label", to_string(e.treatment)}, {"total_utility", e.total_utility}}};
        } else if constexpr (std::is_same_v<T, PhaseChange>) {
          json p{{"phase", to_string(e.phase)}, {"instructions_payload", e.instructions}};
          if (e.treatment) p["treatment_label"] = to_string(*e.treatment);
          return {type::kPhaseChange, p};
        } else if constexpr (std::is_same_v<T, QuestionnaireForm>) {
          json rows = json::array();
          for (std::size_t i = 0; i < e.mpl_rows.size(); ++i)
            rows.push_back({{"row", i + 1}, {"safe", e.mpl_rows[i].safe}, {"lottery", e.mpl_rows[i].lottery}});
          return {type::kQuestionnaireForm, {{"crt_questions", e.crt_questions}, {"mpl_rows", rows}}};
        } else {
          return {type::kSessionComplete, {{"payment_total", e.payment_total}}};
        }
      },
      event);
}

inline json error_payload(std::string_view code, std::string_view message) {
  return {{"code", code}, {"message", message}};
}

}  // namespace lifecycle::wire
