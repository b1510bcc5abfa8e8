#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainvoice/bn/inference.hpp"
#include "chainvoice/bn/network.hpp"
#include "chainvoice/oobn/compose.hpp"

namespace chainvoice::finance {

// Node ids. Sub-model nodes appear in the overall network as
// "<instance>.<node>", e.g. "SupplierProfile.GWaL".
namespace ids {
inline constexpr const char* kSupplierProfileInstance = "SupplierProfile";
inline constexpr const char* kFinancialIncentiveInstance = "FinancialIncentive";

inline constexpr const char* kTier1 = "Tier1";
inline constexpr const char* kGWaL = "GWaL";
inline constexpr const char* kSupplierProfile = "SupplierProfile";
inline constexpr const char* kCreditRating = "CreditRating";
inline constexpr const char* kFinancialRewards = "FinancialRewards";
inline constexpr const char* kFinancialIncentive = "FinancialIncentive";
inline constexpr const char* kPerceptionOfRisk = "PerceptionOfRisk";
inline constexpr const char* kDecision = "Decision";
inline constexpr const char* kLowerTierFunded = "LowerTierFunded";
inline constexpr const char* kStability = "Stability";
}  // namespace ids

namespace states {
inline constexpr const char* kYes = "Yes";
inline constexpr const char* kNo = "No";
inline constexpr const char* kLowRisk = "LowRisk";
inline constexpr const char* kHighRisk = "HighRisk";
inline constexpr const char* kPassed = "Passed";
inline constexpr const char* kFailed = "Failed";
inline constexpr const char* kAdditional = "Additional";
inline constexpr const char* kStandard = "Standard";
inline constexpr const char* kCompelling = "Compelling";
inline constexpr const char* kNotCompelling = "NotCompelling";
inline constexpr const char* kAcceptableRisk = "AcceptableRisk";
inline constexpr const char* kUnacceptableRisk = "UnacceptableRisk";
inline constexpr const char* kFund = "Fund";
inline constexpr const char* kDoNotFund = "DoNotFund";
inline constexpr const char* kStable = "Stable";
inline constexpr const char* kUnstable = "Unstable";
}  // namespace states

inline constexpr const char* kSupplierProfileModel = "supplier_profile";
inline constexpr const char* kFinancialIncentiveModel = "financial_incentive";
inline constexpr const char* kOverallModel = "overall";

/// Overall-model id of a sub-model node, e.g. flat_id("SupplierProfile", "GWaL").
std::string flat_id(const char* instance, const char* node);

/// Binary CPT from P(first state) per row.
bn::Cpt binary_cpt(const std::vector<double>& first_state_probability);

// Structures with uniform root priors. CPTs of non-root nodes are taken as
// given (pass a placeholder to obtain the bare structure).
oobn::OobnClass supplier_profile_class(const bn::Cpt& profile_cpt);
oobn::OobnClass financial_incentive_class(const bn::Cpt& incentive_cpt);

struct MasterCpts {
  bn::Cpt perception_of_risk;  // parents: SupplierProfile, FinancialIncentive
  bn::Cpt decision;            // parent: PerceptionOfRisk
  bn::Cpt stability;           // parents: Decision, LowerTierFunded
};

/// Master nodes of the overall model; sub-model outputs are referenced
/// through the aliases "SupplierProfile" and "FinancialIncentive".
std::vector<bn::NodeSpec> overall_master_nodes(const MasterCpts& cpts);
oobn::MasterSpec overall_master(const oobn::OobnClass& profile, const oobn::OobnClass& incentive,
                                const std::vector<bn::NodeSpec>& master_nodes);

/// The three fitted networks plus the master document they compose from.
struct FinanceModels {
  oobn::OobnClass supplier_profile;
  oobn::OobnClass financial_incentive;
  oobn::MasterSpec overall_master;
  bn::NetworkSpec overall;  // flattened
};

/// Built, immutable networks ready for queries.
struct ModelSet {
  bn::Network supplier_profile;
  bn::Network financial_incentive;
  bn::Network overall;

  /// Lookup by model name; throws UnknownNode for an unknown model.
  const bn::Network& get(const std::string& model) const;
  static std::vector<std::string> names();
};

ModelSet build_model_set(const FinanceModels& models);

// models/ layout: supplier_profile.json, financial_incentive.json (class
// documents), overall_master.json (master document) and overall.json (the
// flattened network).
void save_models(const FinanceModels& models, const std::filesystem::path& dir);
FinanceModels load_models(const std::filesystem::path& dir);

/// Funding policy: Fund iff P(Fund) > threshold; ties go to DoNotFund.
inline constexpr double kDefaultFundingThreshold = 0.5;
bool should_fund(double probability_fund, double threshold = kDefaultFundingThreshold);

}  // namespace chainvoice::finance
