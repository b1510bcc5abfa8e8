#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "chainvoice/ledger/agreement.hpp"
#include "chainvoice/ledger/crypto.hpp"

namespace chainvoice::ledger {

using ChainId = std::string;
using Address = std::string;
using GroupId = std::string;
using LockOwner = std::string;  // crosschain transaction id

/// Lock resource naming a chain's balance table (as opposed to a contract).
inline constexpr const char* kBalancesResource = "@balances";

enum class ContractKind { SupplyContract, FinanceContract };

std::string to_string(ContractKind kind);
/// Throws ParseError.
ContractKind contract_kind_from_string(const std::string& text);

struct PrivacyGroup {
  GroupId id;
  std::set<PartyId> members;
};

struct ContractState {
  ContractKind kind = ContractKind::SupplyContract;
  Address address;
  PartyId owner;
  GroupId privacy_group;
  std::map<std::string, nlohmann::json> storage;
  std::optional<LockOwner> lock;
};

/// A transaction as authored: JSON body plus the author's signature over
/// `body.dump()`.
struct SignedTx {
  PartyId author;
  nlohmann::json body;
  std::string signature;

  std::string signing_payload() const { return body.dump(); }
};

/// One log entry. `body_digest` commits to author, signature and payload;
/// `digest` commits to the sequence number, predecessor digest, privacy group
/// and `body_digest`, so the chain of digests verifies even when the body is
/// withheld from a viewer.
struct SealedEntry {
  std::uint64_t seq = 0;
  std::string prev_digest;
  GroupId privacy_group;
  PartyId author;
  std::string signature;
  nlohmann::json payload;
  std::string body_digest;
  std::string digest;
};

// State changes produced by transactions; a transaction's ops apply
// all-or-nothing.
struct SetOp {
  Address address;
  std::string key;
  nlohmann::json value;
};
struct DebitOp {
  PartyId party;
  Amount amount = 0;
};
struct CreditOp {
  PartyId party;
  Amount amount = 0;
};
struct DeployOp {
  ContractKind kind;
  Address address;
  PartyId owner;
  GroupId group;
};
struct GroupOp {
  PrivacyGroup group;
};
using Op = std::variant<SetOp, DebitOp, CreditOp, DeployOp, GroupOp>;

nlohmann::json to_json(const Op& op);
Op op_from_json(const nlohmann::json& doc);

/// One private chain: members, privacy groups, contracts, balances and a
/// hash-chained append-only log. Chains are values; copying one yields an
/// independent shadow that the crosschain coordinator stages against.
class Chain {
 public:
  /// Seals the genesis entry (members plus minted balances).
  Chain(ChainId id, std::set<PartyId> members, std::map<PartyId, Amount> mint = {});

  const ChainId& id() const noexcept { return id_; }
  const std::set<PartyId>& members() const noexcept { return members_; }
  bool is_member(const PartyId& party) const { return members_.count(party) != 0; }
  const std::vector<SealedEntry>& log() const noexcept { return log_; }
  const std::map<Address, ContractState>& contracts() const noexcept { return contracts_; }
  const std::map<PartyId, Amount>& balances() const noexcept { return balances_; }
  const std::map<GroupId, PrivacyGroup>& groups() const noexcept { return groups_; }

  /// Id of the group containing every member (the chain id).
  const GroupId& default_group() const noexcept { return id_; }

  /// Throws UnknownAddress.
  const ContractState& contract(const Address& address) const;
  bool has_contract(const Address& address) const { return contracts_.count(address) != 0; }
  /// Throws PrivacyViolation for an unknown group id.
  const PrivacyGroup& group(const GroupId& id) const;
  Amount balance(const PartyId& party) const;
  Amount total_balance() const;

  /// Holder of a contract lock or of kBalancesResource.
  std::optional<LockOwner> lock_holder(const std::string& resource) const;
  /// Returns false when held by another owner.
  bool try_lock(const std::string& resource, const LockOwner& owner);
  /// No-op unless held by `owner`.
  void unlock(const std::string& resource, const LockOwner& owner);
  /// Resources currently held by `owner`.
  std::vector<std::string> locks_held_by(const LockOwner& owner) const;
  bool any_lock_held() const;

  /// Validates `ops` against the current state (lock ownership via
  /// `as_owner`), applies them atomically and seals one entry. Nothing
  /// changes when validation fails.
  /// Errors: UnknownAddress, ContractLocked, InsufficientBalance, NotAMember,
  /// PrivacyViolation.
  const SealedEntry& commit(const SignedTx& tx, const GroupId& group, const std::vector<Op>& ops,
                            const std::optional<LockOwner>& as_owner);

  /// Address for the next deployment: digest of chain id and log length.
  Address next_address() const;
  /// Fresh opaque group id: digest of chain id and log length.
  GroupId next_group_id() const;

  /// Recomputes every body digest and digest link.
  bool verify_log() const;

  /// Log as seen by `viewer`: full entries for groups the viewer belongs to,
  /// envelopes (no author, signature or payload) otherwise. Throws
  /// PrivacyViolation for non-members.
  std::vector<nlohmann::json> log_view(const PartyId& viewer) const;
  /// Unfiltered log records.
  std::vector<nlohmann::json> log_records() const;

  /// Canonical full-state document (log, contracts, locks, balances, groups).
  nlohmann::json export_state() const;

  /// Test hook for tamper-detection checks.
  std::vector<SealedEntry>& mutable_log_for_testing() { return log_; }

 private:
  void seal(const SignedTx& tx, const GroupId& group);

  ChainId id_;
  std::set<PartyId> members_;
  std::map<GroupId, PrivacyGroup> groups_;
  std::map<Address, ContractState> contracts_;
  std::map<PartyId, Amount> balances_;
  std::optional<LockOwner> balance_lock_;
  std::vector<SealedEntry> log_;
};

nlohmann::json to_json(const SealedEntry& entry);
nlohmann::json envelope_json(const SealedEntry& entry);
/// Digest recomputation for a single record (full or envelope) given its
/// predecessor digest; used to verify exported logs.
bool verify_record_chain(const std::vector<nlohmann::json>& records);

}  // namespace chainvoice::ledger
