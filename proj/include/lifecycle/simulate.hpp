#pragma once

// Synthetic participants driven through the wire protocol, exactly as a
// remote client would.

#include "lifecycle/agents.hpp"
#include "lifecycle/error.hpp"
#include "lifecycle/service.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lifecycle {

struct DriveResult {
  std::string session_id;
  std::string token;
  double payment_total = 0.0;
  std::size_t decisions = 0;
};

inline DriveResult drive_agent(Service& service, const std::string& participant_id, Agent& agent,
                               std::optional<Ordering> ordering, std::uint64_t answers_seed) {
  const auto& cfg = service.config();
  Service::Connection conn;
  std::int64_t seq = 0;
  std::deque<wire::json> inbox;
  auto send = [&](const std::string& type, wire::json payload) {
    wire::Envelope env{type, conn.session_id, seq++, std::move(payload)};
    for (const auto& line : service.handle(conn, wire::dump(env))) inbox.push_back(wire::json::parse(line));
  };

  wire::json hello{{"participant_id", participant_id}};
  if (ordering) hello["ordering"] = std::string(to_string(*ordering));
  send(wire::type::kHello, hello);
  seq = 1;

  DriveResult result;
  while (!inbox.empty()) {
    const auto msg = std::move(inbox.front());
    inbox.pop_front();
    const auto type = msg.at("type").get<std::string>();
    const auto& p = msg.at("payload");
    if (type == wire::type::kError) {
      throw Error(ErrorKind::Simulation, "participant " + participant_id + ": server replied " +
                                             p.value("code", "?") + ": " + p.value("message", ""));
    } else if (type == wire::type::kHello) {
      result.session_id = p.at("session_id").get<std::string>();
      result.token = p.value("token", "");
    } else if (type == wire::type::kPeriodState) {
      const int round = p.at("round").get<int>();
      const int period = p.at("period").get<int>();
      const auto params = with_treatment(cfg.params, parse_treatment(p.at("treatment_label").get<std::string>()));
      const double c = agent.consume(period, p.at("wealth").get<double>(), p.at("income").get<double>(), params);
      ++result.decisions;
      send(wire::type::kSubmitConsumption, wire::to_payload(wire::SubmitConsumption{round, period, c}));
    } else if (type == wire::type::kQuestionnaireForm) {
      send(wire::type::kQuestionnaireSubmit, wire::to_payload(synthetic_answers(cfg, answers_seed)));
    } else if (type == wire::type::kSessionComplete) {
      result.payment_total = p.at("payment_total").get<double>();
      return result;
    }
  }
  throw Error(ErrorKind::Simulation, "participant " + participant_id + ": session ended without SESSION_COMPLETE");
}

enum class OrderingMode { BF, SF, Mixed };

inline OrderingMode parse_ordering_mode(std::string_view s) {
  if (s == "mixed") return OrderingMode::Mixed;
  return parse_ordering(s) == Ordering::BorrowingFirst ? OrderingMode::BF : OrderingMode::SF;
}

struct CohortSpec {
  AgentSpec agent;
  int n = 1;
  OrderingMode ordering = OrderingMode::BF;
  std::uint64_t seed = 1;
  std::string id_prefix = "p";
};

inline std::string participant_label(const std::string& prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", i);
  return prefix + buf;
}

// Participant i gets agent seed `seed + i`; mixed orderings come from one
// stream seeded with `seed`.
inline std::vector<DriveResult> simulate_cohort(Service& service, const CohortSpec& spec) {
  if (spec.n < 1) throw Error(ErrorKind::Validation, "cohort size must be >= 1");
  std::mt19937_64 order_rng{spec.seed};
  std::vector<DriveResult> out;
  for (int i = 1; i <= spec.n; ++i) {
    Ordering ordering = spec.ordering == OrderingMode::SF ? Ordering::SavingFirst : Ordering::BorrowingFirst;
    if (spec.ordering == OrderingMode::Mixed && (order_rng() >> 63)) ordering = Ordering::SavingFirst;
    auto agent_spec = spec.agent;
    agent_spec.seed = spec.seed + static_cast<std::uint64_t>(i);
    Agent agent{agent_spec};
    out.push_back(drive_agent(service, participant_label(spec.id_prefix, i), agent, ordering, agent_spec.seed));
  }
  return out;
}

}  // namespace lifecycle
