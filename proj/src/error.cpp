#include "chainvoice/error.hpp"

namespace chainvoice {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::CptShapeMismatch: return "CptShapeMismatch";
    case ErrorCode::CptRowNotNormalized: return "CptRowNotNormalized";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::UnknownState: return "UnknownState";
    case ErrorCode::ImpossibleEvidence: return "ImpossibleEvidence";
    case ErrorCode::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::DuplicateInstanceName: return "DuplicateInstanceName";
    case ErrorCode::BindingToNonOutput: return "BindingToNonOutput";
    case ErrorCode::CycleAfterFlatten: return "CycleAfterFlatten";
    case ErrorCode::InconsistentTargets: return "InconsistentTargets";
    case ErrorCode::FitFailed: return "FitFailed";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::DuplicateChainId: return "DuplicateChainId";
    case ErrorCode::EmptyMembership: return "EmptyMembership";
    case ErrorCode::NotAMember: return "NotAMember";
    case ErrorCode::BadSignature: return "BadSignature";
    case ErrorCode::PrivacyViolation: return "PrivacyViolation";
    case ErrorCode::InsufficientBalance: return "InsufficientBalance";
    case ErrorCode::ContractLocked: return "ContractLocked";
    case ErrorCode::UnknownAddress: return "UnknownAddress";
    case ErrorCode::UnknownChain: return "UnknownChain";
    case ErrorCode::UnknownMethod: return "UnknownMethod";
    case ErrorCode::EmptyPlan: return "EmptyPlan";
    case ErrorCode::LockConflict: return "LockConflict";
    case ErrorCode::StepFailed: return "StepFailed";
    case ErrorCode::NoGrant: return "NoGrant";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::NotCountersigned: return "NotCountersigned";
    case ErrorCode::FundingDeclined: return "FundingDeclined";
    case ErrorCode::RateOutOfRange: return "RateOutOfRange";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::VersionConflict: return "VersionConflict";
  }
  return "Unknown";
}

}  // namespace chainvoice
