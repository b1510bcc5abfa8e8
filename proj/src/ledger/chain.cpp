#include "chainvoice/ledger/chain.hpp"

#include <algorithm>

#include "chainvoice/error.hpp"

namespace chainvoice::ledger {

using nlohmann::json;

namespace {

const std::string kZeroDigest(64, '0');

std::string body_digest_of(const PartyId& author, const std::string& signature, const json& payload) {
  return sha256_hex(json{{"author", author}, {"signature", signature}, {"payload", payload}}.dump());
}

std::string entry_digest_of(std::uint64_t seq, const std::string& prev, const GroupId& group,
                            const std::string& body_digest) {
  return sha256_hex(
      json{{"seq", seq}, {"prev_digest", prev}, {"privacy_group", group}, {"body_digest", body_digest}}.dump());
}

void check_lock(const std::optional<LockOwner>& holder, const std::optional<LockOwner>& as_owner,
                const std::string& what) {
  if (holder && holder != as_owner)
    throw Error(ErrorCode::ContractLocked, what + " is locked by crosschain transaction " + *holder);
}

}  // namespace

std::string to_string(ContractKind kind) {
  return kind == ContractKind::SupplyContract ? "SupplyContract" : "FinanceContract";
}

ContractKind contract_kind_from_string(const std::string& text) {
  if (text == "SupplyContract") return ContractKind::SupplyContract;
  if (text == "FinanceContract") return ContractKind::FinanceContract;
  throw Error(ErrorCode::ParseError, "unknown contract kind '" + text + "'");
}

json to_json(const Op& op) {
  return std::visit(
      [](const auto& o) -> json {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, SetOp>) {
          return json{{"op", "set"}, {"address", o.address}, {"key", o.key}, {"value", o.value}};
        } else if constexpr (std::is_same_v<T, DebitOp>) {
          return json{{"op", "debit"}, {"party", o.party}, {"amount", o.amount}};
        } else if constexpr (std::is_same_v<T, CreditOp>) {
          return json{{"op", "credit"}, {"party", o.party}, {"amount", o.amount}};
        } else if constexpr (std::is_same_v<T, DeployOp>) {
          return json{{"op", "deploy"},
                      {"kind", to_string(o.kind)},
                      {"address", o.address},
                      {"owner", o.owner},
                      {"group", o.group}};
        } else {
          return json{{"op", "group"}, {"id", o.group.id}, {"members", o.group.members}};
        }
      },
      op);
}

Op op_from_json(const json& doc) {
  try {
    const auto kind = doc.at("op").get<std::string>();
    if (kind == "set") return SetOp{doc.at("address").get<std::string>(), doc.at("key").get<std::string>(), doc.at("value")};
    if (kind == "debit") return DebitOp{doc.at("party").get<std::string>(), doc.at("amount").get<Amount>()};
    if (kind == "credit") return CreditOp{doc.at("party").get<std::string>(), doc.at("amount").get<Amount>()};
    if (kind == "deploy")
      return DeployOp{contract_kind_from_string(doc.at("kind").get<std::string>()), doc.at("address").get<std::string>(), doc.at("owner").get<std::string>(), doc.at("group").get<std::string>()};
    if (kind == "group")
      return GroupOp{PrivacyGroup{doc.at("id").get<std::string>(), doc.at("members").get<std::set<PartyId>>()}};
    throw Error(ErrorCode::ParseError, "unknown op '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("op: ") + e.what());
  }
}

Chain::Chain(ChainId id, std::set<PartyId> members, std::map<PartyId, Amount> mint)
    : id_(std::move(id)), members_(std::move(members)) {
  if (members_.empty()) throw Error(ErrorCode::EmptyMembership, "chain '" + id_ + "' needs at least one member");
  groups_.emplace(id_, PrivacyGroup{id_, members_});
  for (const auto& [party, amount] : mint) {
    if (!is_member(party)) throw Error(ErrorCode::NotAMember, party + " cannot be minted funds on " + id_);
    if (amount < 0) throw Error(ErrorCode::InsufficientBalance, "negative genesis balance for " + party);
    balances_[party] = amount;
  }
  SignedTx genesis{"", json{{"type", "genesis"}, {"chain", id_}, {"members", members_}, {"mint", mint}}, ""};
  seal(genesis, id_);
}

const ContractState& Chain::contract(const Address& address) const {
  auto it = contracts_.find(address);
  if (it == contracts_.end()) throw Error(ErrorCode::UnknownAddress, "no contract at " + address + " on " + id_);
  return it->second;
}

const PrivacyGroup& Chain::group(const GroupId& id) const {
  auto it = groups_.find(id);
  if (it == groups_.end()) throw Error(ErrorCode::PrivacyViolation, "unknown privacy group on " + id_);
  return it->second;
}

Amount Chain::balance(const PartyId& party) const {
  auto it = balances_.find(party);
  return it == balances_.end() ? 0 : it->second;
}

Amount Chain::total_balance() const {
  Amount total = 0;
  for (const auto& [party, amount] : balances_) total += amount;
  return total;
}

std::optional<LockOwner> Chain::lock_holder(const std::string& resource) const {
  if (resource == kBalancesResource) return balance_lock_;
  return contract(resource).lock;
}

bool Chain::try_lock(const std::string& resource, const LockOwner& owner) {
  auto& slot = resource == kBalancesResource ? balance_lock_ : contracts_.at(contract(resource).address).lock;
  if (slot && *slot != owner) return false;
  slot = owner;
  return true;
}

void Chain::unlock(const std::string& resource, const LockOwner& owner) {
  auto& slot = resource == kBalancesResource ? balance_lock_ : contracts_.at(contract(resource).address).lock;
  if (slot == owner) slot.reset();
}

std::vector<std::string> Chain::locks_held_by(const LockOwner& owner) const {
  std::vector<std::string> out;
  if (balance_lock_ == owner) out.push_back(kBalancesResource);
  for (const auto& [address, c] : contracts_)
    if (c.lock == owner) out.push_back(address);
  return out;
}

bool Chain::any_lock_held() const {
  if (balance_lock_) return true;
  return std::any_of(contracts_.begin(), contracts_.end(), [](const auto& c) { return c.second.lock.has_value(); });
}

const SealedEntry& Chain::commit(const SignedTx& tx, const GroupId& group_id, const std::vector<Op>& ops,
                                 const std::optional<LockOwner>& as_owner) {
  auto contracts = contracts_;
  auto balances = balances_;
  auto groups = groups_;

  for (const auto& op : ops) {
    if (const auto* set = std::get_if<SetOp>(&op)) {
      auto it = contracts.find(set->address);
      if (it == contracts.end()) throw Error(ErrorCode::UnknownAddress, "no contract at " + set->address);
      check_lock(it->second.lock, as_owner, "contract " + set->address);
      if (set->value.is_null()) {
        it->second.storage.erase(set->key);
      } else {
        it->second.storage[set->key] = set->value;
      }
    } else if (const auto* debit = std::get_if<DebitOp>(&op)) {
      check_lock(balance_lock_, as_owner, "balance table of " + id_);
      if (debit->amount < 0) throw Error(ErrorCode::InsufficientBalance, "negative debit");
      Amount& bal = balances[debit->party];
      if (bal < debit->amount)
        throw Error(ErrorCode::InsufficientBalance, debit->party + " holds " + std::to_string(bal) + " on " + id_ +
                                                        ", needs " + std::to_string(debit->amount));
      bal -= debit->amount;
    } else if (const auto* credit = std::get_if<CreditOp>(&op)) {
      check_lock(balance_lock_, as_owner, "balance table of " + id_);
      if (credit->amount < 0) throw Error(ErrorCode::InsufficientBalance, "negative credit");
      if (!is_member(credit->party)) throw Error(ErrorCode::NotAMember, credit->party + " is not a member of " + id_);
      balances[credit->party] += credit->amount;
    } else if (const auto* deploy = std::get_if<DeployOp>(&op)) {
      if (contracts.count(deploy->address)) throw Error(ErrorCode::InvalidSpec, "address already in use");
      if (!groups.count(deploy->group)) throw Error(ErrorCode::PrivacyViolation, "unknown privacy group");
      contracts.emplace(deploy->address,
                        ContractState{deploy->kind, deploy->address, deploy->owner, deploy->group, {}, std::nullopt});
    } else if (const auto* g = std::get_if<GroupOp>(&op)) {
      if (g->group.members.empty()) throw Error(ErrorCode::EmptyMembership, "empty privacy group");
      for (const auto& m : g->group.members)
        if (!is_member(m)) throw Error(ErrorCode::NotAMember, m + " is not a member of " + id_);
      if (!groups.emplace(g->group.id, g->group).second)
        throw Error(ErrorCode::InvalidSpec, "privacy group id already in use");
    }
  }

  if (!groups.count(group_id)) throw Error(ErrorCode::PrivacyViolation, "unknown privacy group on " + id_);

  contracts_ = std::move(contracts);
  balances_ = std::move(balances);
  groups_ = std::move(groups);
  seal(tx, group_id);
  return log_.back();
}

void Chain::seal(const SignedTx& tx, const GroupId& group) {
  SealedEntry e;
  e.seq = log_.size();
  e.prev_digest = log_.empty() ? kZeroDigest : log_.back().digest;
  e.privacy_group = group;
  e.author = tx.author;
  e.signature = tx.signature;
  e.payload = tx.body;
  e.body_digest = body_digest_of(e.author, e.signature, e.payload);
  e.digest = entry_digest_of(e.seq, e.prev_digest, e.privacy_group, e.body_digest);
  log_.push_back(std::move(e));
}

Address Chain::next_address() const {
  return "0x" + sha256_hex(id_ + ":" + std::to_string(log_.size())).substr(0, 40);
}

GroupId Chain::next_group_id() const {
  return "pg-" + sha256_hex(id_ + ":group:" + std::to_string(log_.size())).substr(0, 16);
}

bool Chain::verify_log() const {
  std::string prev = kZeroDigest;
  for (std::size_t i = 0; i < log_.size(); ++i) {
    const auto& e = log_[i];
    if (e.seq != i || e.prev_digest != prev) return false;
    if (e.body_digest != body_digest_of(e.author, e.signature, e.payload)) return false;
    if (e.digest != entry_digest_of(e.seq, e.prev_digest, e.privacy_group, e.body_digest)) return false;
    prev = e.digest;
  }
  return true;
}

json to_json(const SealedEntry& e) {
  return json{{"seq", e.seq},
              {"prev_digest", e.prev_digest},
              {"privacy_group", e.privacy_group},
              {"author", e.author},
              {"signature", e.signature},
              {"payload", e.payload},
              {"body_digest", e.body_digest},
              {"digest", e.digest}};
}

json envelope_json(const SealedEntry& e) {
  return json{{"seq", e.seq},
              {"prev_digest", e.prev_digest},
              {"privacy_group", e.privacy_group},
              {"envelope", true},
              {"body_digest", e.body_digest},
              {"digest", e.digest}};
}

bool verify_record_chain(const std::vector<json>& records) {
  std::string prev = kZeroDigest;
  std::uint64_t seq = 0;
  for (const auto& r : records) {
    try {
      if (r.at("seq").get<std::uint64_t>() != seq++ || r.at("prev_digest").get<std::string>() != prev) return false;
      const auto body = r.at("body_digest").get<std::string>();
      if (r.contains("payload") && body != body_digest_of(r.at("author").get<std::string>(), r.at("signature").get<std::string>(), r.at("payload")))
        return false;
      const auto digest = entry_digest_of(r.at("seq").get<std::uint64_t>(), prev, r.at("privacy_group").get<std::string>(), body);
      if (digest != r.at("digest").get<std::string>()) return false;
      prev = digest;
    } catch (const json::exception&) {
      return false;
    }
  }
  return true;
}

std::vector<json> Chain::log_view(const PartyId& viewer) const {
  if (!is_member(viewer)) throw Error(ErrorCode::PrivacyViolation, viewer + " is not a member of " + id_);
  std::vector<json> out;
  for (const auto& e : log_) {
    const auto& g = group(e.privacy_group);
    out.push_back(g.members.count(viewer) ? to_json(e) : envelope_json(e));
  }
  return out;
}

std::vector<json> Chain::log_records() const {
  std::vector<json> out;
  for (const auto& e : log_) out.push_back(to_json(e));
  return out;
}

json Chain::export_state() const {
  json contracts = json::object();
  for (const auto& [address, c] : contracts_) {
    json storage = json::object();
    for (const auto& [k, v] : c.storage) storage[k] = v;
    contracts[address] = json{{"kind", to_string(c.kind)},
                              {"owner", c.owner},
                              {"privacy_group", c.privacy_group},
                              {"storage", std::move(storage)},
                              {"lock", c.lock ? json(*c.lock) : json(nullptr)}};
  }
  json groups = json::object();
  for (const auto& [id, g] : groups_) groups[id] = g.members;
  return json{{"id", id_},
              {"members", members_},
              {"groups", std::move(groups)},
              {"contracts", std::move(contracts)},
              {"balances", balances_},
              {"balance_lock", balance_lock_ ? json(*balance_lock_) : json(nullptr)},
              {"log", log_records()}};
}

}  // namespace chainvoice::ledger
