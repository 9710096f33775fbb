#pragma once

// Shared helpers for tests: drive a Study session to completion in-process.

#include "lifecycle/agents.hpp"
#include "lifecycle/session.hpp"

#include <filesystem>
#include <optional>
#include <random>
#include <string>

namespace lifecycle::testing {

inline Session& complete_session(Study& study, const std::string& participant, AgentSpec spec,
                                 std::optional<Ordering> ordering = std::nullopt, std::uint64_t answers_seed = 0) {
  auto& s = study.create_session(participant, ordering);
  Agent agent{spec};
  const auto& cfg = study.config();
  while (s.phase() == Phase::Playing) {
    const auto st = s.period_state();
    const auto p = with_treatment(cfg.params, st.treatment);
    s.submit_consumption(st.round, st.period, agent.consume(st.period, st.wealth, st.income, p));
  }
  s.submit_questionnaire(synthetic_answers(cfg, answers_seed));
  return s;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::mt19937_64 rng{std::random_device{}()};
  auto dir = std::filesystem::temp_directory_path() / ("lifecycle-" + name + "-" + std::to_string(rng() % 1000000000));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace lifecycle::testing
