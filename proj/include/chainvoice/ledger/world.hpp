#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chainvoice/ledger/chain.hpp"
#include "chainvoice/ledger/crypto.hpp"

namespace chainvoice::ledger {

class World;

struct CallContext {
  const World& world;
  ChainId chain;
  PartyId author;
  /// Set when the call is staged inside a crosschain transaction.
  std::optional<LockOwner> xtx;
  /// Outputs of the earlier steps of the same crosschain transaction.
  std::span<const nlohmann::json> prior_outputs;
};

struct MethodResult {
  std::vector<Op> ops;
  nlohmann::json output;
};

/// Native contract method: reads the contract state and arguments, returns
/// the ops to apply. Throws chainvoice::Error to reject the call.
using ContractMethod =
    std::function<MethodResult(const ContractState&, const nlohmann::json& args, const CallContext&)>;

class MethodRegistry {
 public:
  void add(ContractKind kind, const std::string& method, ContractMethod fn);
  /// Throws UnknownMethod.
  const ContractMethod& find(ContractKind kind, const std::string& method) const;

 private:
  std::map<std::pair<ContractKind, std::string>, ContractMethod> methods_;
};

struct PartyInfo {
  PartyId id;
  std::string name;
  std::optional<int> tier;
};

struct ChainConfig {
  ChainId id;
  std::set<PartyId> members;
  std::map<PartyId, Amount> genesis;
};

struct ContractConfig {
  ChainId chain;
  ContractKind kind = ContractKind::SupplyContract;
  PartyId owner;
  /// Empty: the chain-wide group.
  std::set<PartyId> privacy_group;
  std::map<std::string, nlohmann::json> storage;
};

struct WorldConfig {
  std::vector<PartyInfo> parties;
  std::vector<ChainConfig> chains;
  std::vector<ContractConfig> contracts;
};

WorldConfig world_config_from_json(const nlohmann::json& doc);
WorldConfig load_world_config(const std::filesystem::path& path);

struct Receipt {
  ChainId chain;
  std::uint64_t seq = 0;
  std::string digest;
  std::optional<Address> address;
  std::optional<GroupId> group;
  nlohmann::json output;
  /// Group the entry was sealed under and the ops it applied.
  GroupId sealed_group;
  std::vector<Op> ops;
};

/// The simulated set of private chains plus the parties' keys and the
/// native contract runtime. Single writer: callers serialize mutations.
class World {
 public:
  World(std::string seed, std::vector<PartyInfo> parties);

  /// Creates every configured chain and deploys every configured contract
  /// through ordinary signed transactions.
  static World bootstrap(const WorldConfig& config, const std::string& seed);

  const Keyring& keyring() const noexcept { return keyring_; }
  const std::vector<PartyInfo>& parties() const noexcept { return parties_; }
  bool is_party(const PartyId& party) const;
  std::optional<int> tier(const PartyId& party) const;

  MethodRegistry& methods() noexcept { return methods_; }
  const MethodRegistry& methods() const noexcept { return methods_; }

  /// Errors: DuplicateChainId, EmptyMembership, NotAMember (unknown party).
  Chain& create_chain(const ChainId& id, const std::set<PartyId>& members,
                      const std::map<PartyId, Amount>& mint = {});
  bool has_chain(const ChainId& id) const { return chains_.count(id) != 0; }
  /// Throws UnknownChain.
  Chain& chain(const ChainId& id);
  const Chain& chain(const ChainId& id) const;
  const std::map<ChainId, Chain>& chains() const noexcept { return chains_; }

  SignedTx sign(const PartyId& author, nlohmann::json body) const;

  /// Verifies and applies one transaction to `target` (a world chain or a
  /// shadow copy of one). Body types: deploy, group, call, transfer, and
  /// xchain (pre-computed ops; only accepted together with `as_owner`).
  /// Errors: BadSignature, NotAMember, PrivacyViolation, InsufficientBalance,
  /// ContractLocked, UnknownAddress, UnknownMethod, plus method rejections.
  Receipt apply(Chain& target, const SignedTx& tx, const std::optional<LockOwner>& as_owner = {},
                std::span<const nlohmann::json> prior_outputs = {}) const;

  Receipt submit_tx(const ChainId& chain, const SignedTx& tx);

  // Signed-transaction conveniences for simulated parties.
  GroupId create_privacy_group(const ChainId& chain, const PartyId& creator, const std::set<PartyId>& members);
  /// `group` empty selects the chain-wide group.
  Address deploy_contract(const ChainId& chain, ContractKind kind, const PartyId& deployer,
                          const GroupId& group = {});
  Receipt call(const ChainId& chain, const PartyId& author, const Address& address, const std::string& method,
               nlohmann::json args);
  Receipt transfer(const ChainId& chain, const PartyId& from, const PartyId& to, Amount amount);

  /// Committed value of `key` (null when unset). Only members of the
  /// contract's privacy group may read, and a locked contract answers only
  /// its locker. Errors: UnknownChain, UnknownAddress, PrivacyViolation,
  /// ContractLocked.
  nlohmann::json read_state(const ChainId& chain, const Address& address, const std::string& key,
                            const PartyId& caller, const std::optional<LockOwner>& as_owner = {}) const;

  Amount total_balance() const;
  bool any_lock_held() const;

  /// Addresses of contracts of `kind` owned by `owner` on `chain`.
  std::vector<Address> find_contracts(const ChainId& chain, ContractKind kind, const PartyId& owner) const;

  /// Canonical full export of every chain.
  nlohmann::json export_state() const;
  std::string export_string() const { return export_state().dump(); }
  /// One JSON-lines file per chain, `<dir>/<chain>.jsonl`, unfiltered.
  void write_ledger_exports(const std::filesystem::path& dir) const;

 private:
  std::string seed_;
  Keyring keyring_;
  std::vector<PartyInfo> parties_;
  MethodRegistry methods_;
  std::map<ChainId, Chain> chains_;
};

/// Storage key under which a crosschain read grant is recorded.
std::string grant_key(const PartyId& reader, const std::string& key);

}  // namespace chainvoice::ledger
