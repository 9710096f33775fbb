#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lifecycle {

enum class ErrorKind {
  Domain,      // argument outside the mathematical domain
  Capability,  // request exceeds a documented computational bound
  Simulation,  // a policy produced an unusable value
  Conflict,    // duplicate entity
  Sequence,    // out-of-turn or stale submission
  Validation,  // malformed or incomplete input
  State,       // operation not valid in the current phase
  Data,        // unreadable or inconsistent data files
  Undefined,   // statistic undefined for the given input
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Capability: return "capability";
    case ErrorKind::Simulation: return "simulation";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::Sequence: return "sequence";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::State: return "state";
    case ErrorKind::Data: return "data";
    case ErrorKind::Undefined: return "undefined";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_{kind} {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lifecycle
