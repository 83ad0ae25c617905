#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace csbp {

enum class ErrorKind {
  NonIntegrable,
  QuadratureFailure,
  DegenerateMeasure,
  HypothesisViolation,
  DomainError,
  StepFailure,
  NegativeExcursion,
  ConditionViolation,
  TailBoundFailure,
  PopulationExplosion,
  InsufficientReplicas,
  StepTooCoarse,
  NegativeHeight,
  BandUnresolved,
  DegeneratePath,
  EventBudgetExceeded,
  MarkStackViolation,
  IncompleteLog,
  EmptySample,
  ConfigError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonIntegrable: return "NonIntegrable";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::DegenerateMeasure: return "DegenerateMeasure";
    case ErrorKind::HypothesisViolation: return "HypothesisViolation";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::StepFailure: return "StepFailure";
    case ErrorKind::NegativeExcursion: return "NegativeExcursion";
    case ErrorKind::ConditionViolation: return "ConditionViolation";
    case ErrorKind::TailBoundFailure: return "TailBoundFailure";
    case ErrorKind::PopulationExplosion: return "PopulationExplosion";
    case ErrorKind::InsufficientReplicas: return "InsufficientReplicas";
    case ErrorKind::StepTooCoarse: return "StepTooCoarse";
    case ErrorKind::NegativeHeight: return "NegativeHeight";
    case ErrorKind::BandUnresolved: return "BandUnresolved";
    case ErrorKind::DegeneratePath: return "DegeneratePath";
    case ErrorKind::EventBudgetExceeded: return "EventBudgetExceeded";
    case ErrorKind::MarkStackViolation: return "MarkStackViolation";
    case ErrorKind::IncompleteLog: return "IncompleteLog";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace csbp
