#pragma once

// Simulated participants.

#include "lifecycle/error.hpp"
#include "lifecycle/model.hpp"
#include "lifecycle/session.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace lifecycle {

enum class AgentKind { Optimal, HandToMouth, DebtAverse, NoisyOptimal };

constexpr std::string_view to_string(AgentKind k) noexcept {
  switch (k) {
    case AgentKind::Optimal: return "optimal";
    case AgentKind::HandToMouth: return "handtomouth";
    case AgentKind::DebtAverse: return "debtaverse";
    case AgentKind::NoisyOptimal: return "noisy";
  }
  return "unknown";
}

struct AgentSpec {
  AgentKind kind = AgentKind::Optimal;
  double noise_sd = 0.0;  // NoisyOptimal only
  std::uint64_t seed = 0;
};

// "optimal", "handtomouth", "debtaverse", "noisy" or "noisy:<sd>".
inline AgentSpec parse_agent_spec(std::string_view text, std::uint64_t seed = 0) {
  AgentSpec spec;
  spec.seed = seed;
  auto name = text;
  std::string_view arg;
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    name = text.substr(0, colon);
    arg = text.substr(colon + 1);
  }
  if (name == "optimal") spec.kind = AgentKind::Optimal;
  else if (name == "handtomouth") spec.kind = AgentKind::HandToMouth;
  else if (name == "debtaverse") spec.kind = AgentKind::DebtAverse;
  else if (name == "noisy") {
    spec.kind = AgentKind::NoisyOptimal;
    spec.noise_sd = 25.0;
  } else {
    throw Error(ErrorKind::Validation, "unknown agent kind '" + std::string(name) + "'");
  }
  if (!arg.empty()) {
    if (spec.kind != AgentKind::NoisyOptimal)
      throw Error(ErrorKind::Validation, "agent kind '" + std::string(name) + "' takes no argument");
    const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), spec.noise_sd);
    if (ec != std::errc{} || ptr != arg.data() + arg.size() || !(spec.noise_sd >= 0.0))
      throw Error(ErrorKind::Validation, "noise sd must be a non-negative number, got '" + std::string(arg) + "'");
  }
  return spec;
}

class Agent {
 public:
  explicit Agent(AgentSpec spec) : spec_{spec}, rng_{spec.seed} {
    if (!(spec_.noise_sd >= 0.0)) throw Error(ErrorKind::Domain, "noise_sd must be >= 0");
  }

  const AgentSpec& spec() const noexcept { return spec_; }

  // `params` must carry the income process of the current treatment.
  double consume(int t, double wealth, double income, const ModelParams& params) {
    const double optimal = optimal_consumption(wealth, t, params);
    switch (spec_.kind) {
      case AgentKind::Optimal: return optimal;
      case AgentKind::HandToMouth: return income;
      case AgentKind::DebtAverse: return std::min(optimal, wealth);
      case AgentKind::NoisyOptimal:
        if (spec_.noise_sd == 0.0) return optimal;
        return std::max(0.0, optimal + std::normal_distribution<double>{0.0, spec_.noise_sd}(rng_));
    }
    return optimal;
  }

 private:
  AgentSpec spec_;
  std::mt19937_64 rng_;
};

// Plausible questionnaire answers for synthetic participants.
inline QuestionnaireAnswers synthetic_answers(const StudyConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng{seed ^ 0x9e3779b97f4a7c15ull};
  std::bernoulli_distribution correct{0.6}, known{0.15}, female{0.4};
  QuestionnaireAnswers a;
  for (const auto& item : cfg.questionnaire.crt_items) {
    const double answer = correct(rng) ? item.answer : item.answer * 2 + 5;
    a.crt_responses.push_back(std::to_string(static_cast<long long>(answer)));
  }
  a.crt_known = known(rng);
  const int rows = cfg.questionnaire.mpl_rows;
  const int safe = std::uniform_int_distribution<int>{0, rows}(rng);
  a.mpl_choices = std::string(static_cast<std::size_t>(safe), 'S') +
                  std::string(static_cast<std::size_t>(rows - safe), 'L');
  a.gender = female(rng) ? "female" : "male";
  a.field_of_study = "economics";
  a.nationality = cfg.country;
  return a;
}

}  // namespace lifecycle
