#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainvoice/finance/model.hpp"
#include "chainvoice/ledger/world.hpp"
#include "chainvoice/xchain/coordinator.hpp"

namespace chainvoice::flow {

using ledger::Address;
using ledger::Amount;
using ledger::ChainId;
using ledger::PartyId;

inline constexpr const char* kSupplierFinancierChain = "T3Fin";
inline constexpr const char* kFinancierChain = "Fin";

struct FinancingRequest {
  PartyId supplier;
  PartyId financier = "FinancierIlze";
  Amount amount = 0;
  int payment_terms_days = 60;
  /// Chain holding the supply agreement; the address is resolved by the
  /// flow when unset.
  ChainId agreement_chain = "T2T3";
  std::optional<Address> agreement_address;
  Amount total_unpaid = 0;
  /// "Additional" or "Standard"; empty leaves the rewards node unobserved.
  std::string rewards;
};

nlohmann::json to_json(const FinancingRequest& request);
/// Throws ParseError.
FinancingRequest request_from_json(const nlohmann::json& doc);

struct Fixtures {
  /// Party -> "Passed" | "Failed". A missing party leaves the credit node
  /// unobserved.
  std::map<PartyId, std::string> credit_bureau;
  /// Parties whose invoices the financier already funds.
  std::set<PartyId> customer_list;
  /// Supply-chain membership flag per party.
  std::map<PartyId, bool> gwal;
  /// Buyer -> parties further down the supply chain.
  std::map<PartyId, std::vector<PartyId>> downstream;
  double discount_rate = 0.05;
  /// Terms replayed in steps 1-3 when no agreement is on chain yet.
  ledger::SupplyAgreement agreement;
};

nlohmann::json to_json(const Fixtures& fixtures);
Fixtures fixtures_from_json(const nlohmann::json& doc);
Fixtures load_fixtures(const std::filesystem::path& path);
FinancingRequest load_request(const std::filesystem::path& path);

struct Validation {
  std::vector<std::string> violations;  // e.g. "AmountExceedsAgreement"
  bool ok() const { return violations.empty(); }
};

/// Throws NotCountersigned.
Validation validate_request(const ledger::SupplyAgreement& agreement, const FinancingRequest& request,
                            const ledger::Keyring& keyring);

/// Yes iff the buyer, or anyone reachable from it through `downstream`, is on
/// the customer list.
bool lower_tier_funded(const std::set<PartyId>& customer_list, const PartyId& buyer,
                       const std::map<PartyId, std::vector<PartyId>>& downstream);

/// amount * (1 - rate), rounded down. Throws RateOutOfRange unless 0 <= rate < 1.
Amount early_payment_discount(Amount amount, double rate);

/// Findings for the overall network's input nodes; nullopt = unobserved.
struct FlowEvidence {
  std::optional<std::string> tier1;
  std::optional<std::string> gwal;
  std::optional<std::string> credit_rating;
  std::optional<std::string> financial_rewards;
  std::optional<std::string> lower_tier_funded;

  bn::Evidence findings() const;
  nlohmann::json to_json() const;
};

FlowEvidence assemble_evidence(const ledger::World& world, const FinancingRequest& request, const Fixtures& fixtures,
                               const PartyId& buyer);

enum class StepStatus { Pending, Done, Failed };
std::string to_string(StepStatus status);

struct StepRecord {
  int number = 0;
  std::string title;
  StepStatus status = StepStatus::Pending;
  std::string detail;
};

/// Crash point for one run: a sequence step (1-12) or a coordinator phase.
struct FlowFault {
  std::optional<int> step;
  std::optional<xchain::FaultPhase> phase;

  bool empty() const { return !step && !phase; }
};

struct FlowOptions {
  double threshold = finance::kDefaultFundingThreshold;
  /// Human financier decision replacing the threshold rule.
  std::optional<bool> financier_decision;
  FlowFault fault;
  /// Called before each sequence step runs.
  std::function<void(int step, const ledger::World&)> before_step;
};

struct FlowOutcome {
  FinancingRequest request;
  std::array<StepRecord, 12> steps;
  std::string tx_id;
  std::optional<xchain::TxStatus> tx_status;
  std::optional<std::string> decision;  // "Fund" | "DoNotFund"
  std::optional<double> p_fund;
  FlowEvidence evidence;
  nlohmann::json posteriors = nlohmann::json::object();
  std::optional<Amount> settlement;
  bool crashed = false;
  std::optional<ErrorCode> error;
  std::string message;

  /// Human-readable lines, one per step plus a summary.
  std::vector<std::string> trace() const;
};

nlohmann::json to_json(const FlowOutcome& outcome);

/// Runs steps 1-12 against `world`. Steps 1-3 are replayed only when the
/// agreement is not on chain yet. Failures are reported in the outcome: the
/// failing step is marked Failed and later steps stay Pending.
FlowOutcome run_financing_sequence(ledger::World& world, xchain::Journal& journal,
                                   std::shared_ptr<const finance::ModelSet> models, const FinancingRequest& request,
                                   const Fixtures& fixtures, const FlowOptions& options = {});

}  // namespace chainvoice::flow
