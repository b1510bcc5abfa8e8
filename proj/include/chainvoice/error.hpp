#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chainvoice {

enum class ErrorCode {
  // bn-core
  InvalidSpec,
  CycleDetected,
  CptShapeMismatch,
  CptRowNotNormalized,
  UnknownNode,
  UnknownState,
  ImpossibleEvidence,
  StateSpaceTooLarge,
  // oobn
  DuplicateInstanceName,
  BindingToNonOutput,
  CycleAfterFlatten,
  // finance-model
  InconsistentTargets,
  FitFailed,
  UnknownScenario,
  // ledger
  DuplicateChainId,
  EmptyMembership,
  NotAMember,
  BadSignature,
  PrivacyViolation,
  InsufficientBalance,
  ContractLocked,
  UnknownAddress,
  UnknownChain,
  UnknownMethod,
  // xchain
  EmptyPlan,
  LockConflict,
  StepFailed,
  NoGrant,
  // financing-flow
  ValidationFailed,
  NotCountersigned,
  FundingDeclined,
  RateOutOfRange,
  // gateway / io
  ParseError,
  VersionConflict,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. `code()` identifies the failure class
/// so callers (CLI exit codes, HTTP status mapping) never parse messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace chainvoice
