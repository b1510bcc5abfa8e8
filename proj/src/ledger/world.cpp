#include "chainvoice/ledger/world.hpp"

#include <algorithm>
#include <fstream>

#include "chainvoice/error.hpp"

namespace chainvoice::ledger {

using nlohmann::json;

namespace {

const json& field(const json& body, const char* name) {
  if (!body.contains(name)) throw Error(ErrorCode::ParseError, std::string("transaction body lacks '") + name + "'");
  return body.at(name);
}

void require_group_member(const Chain& chain, const GroupId& group, const PartyId& party) {
  if (!chain.group(group).members.count(party))
    throw Error(ErrorCode::PrivacyViolation, party + " is not in the privacy group");
}

MethodResult put_method(const ContractState& c, const json& args, const CallContext& ctx) {
  if (ctx.author != c.owner) throw Error(ErrorCode::PrivacyViolation, "only the owner may put state");
  return {{SetOp{c.address, args.at("key").get<std::string>(), args.at("value")}}, json::object()};
}

MethodResult upload_agreement(const ContractState& c, const json& args, const CallContext& ctx) {
  auto agreement = agreement_from_json(args.at("agreement"));
  const auto& keyring = ctx.world.keyring();
  if (ctx.author != agreement.supplier && ctx.author != agreement.buyer)
    throw Error(ErrorCode::ValidationFailed, ctx.author + " is not a party to the agreement");
  const auto& group = ctx.world.chain(ctx.chain).group(c.privacy_group);
  if (!group.members.count(agreement.supplier) || !group.members.count(agreement.buyer))
    throw Error(ErrorCode::PrivacyViolation, "agreement parties must belong to the contract's privacy group");
  if (agreement.signatures.empty() || !agreement.signed_by(keyring, ctx.author))
    throw Error(ErrorCode::BadSignature, "uploader " + ctx.author + " has not signed the agreement");
  for (const auto& s : agreement.signatures)
    if (!keyring.verify(s.party, agreement.terms(), s.signature))
      throw Error(ErrorCode::BadSignature, "invalid agreement signature by " + s.party);
  if (auto it = c.storage.find("agreement"); it != c.storage.end()) {
    if (agreement_from_json(it->second).terms() != agreement.terms())
      throw Error(ErrorCode::ValidationFailed, "agreement terms differ from the uploaded agreement");
  }
  return {{SetOp{c.address, "agreement", to_json(agreement)}},
          json{{"countersigned", agreement.countersigned(keyring)}}};
}

MethodResult grant_read(const ContractState& c, const json& args, const CallContext& ctx) {
  const auto reader = args.at("reader").get<std::string>();
  const auto key = args.at("key").get<std::string>();
  return {{SetOp{c.address, grant_key(reader, key), json{{"grantor", ctx.author}}}}, json::object()};
}

}  // namespace

std::string grant_key(const PartyId& reader, const std::string& key) { return "grant/" + reader + "/" + key; }

void MethodRegistry::add(ContractKind kind, const std::string& method, ContractMethod fn) {
  methods_[{kind, method}] = std::move(fn);
}

const ContractMethod& MethodRegistry::find(ContractKind kind, const std::string& method) const {
  auto it = methods_.find({kind, method});
  if (it == methods_.end())
    throw Error(ErrorCode::UnknownMethod, to_string(kind) + " has no method '" + method + "'");
  return it->second;
}

WorldConfig world_config_from_json(const json& doc) {
  WorldConfig cfg;
  try {
    for (const auto& p : doc.at("parties")) {
      PartyInfo info{p.at("id").get<std::string>(), p.value("name", p.at("id").get<std::string>()), std::nullopt};
      if (p.contains("tier") && !p.at("tier").is_null()) info.tier = p.at("tier").get<int>();
      cfg.parties.push_back(std::move(info));
    }
    for (const auto& c : doc.at("chains"))
      cfg.chains.push_back(ChainConfig{c.at("id").get<std::string>(), c.at("members").get<std::set<PartyId>>(),
                                       c.value("genesis", std::map<PartyId, Amount>{})});
    for (const auto& c : doc.value("contracts", json::array())) {
      ContractConfig cc;
      cc.chain = c.at("chain").get<std::string>();
      cc.kind = contract_kind_from_string(c.at("kind").get<std::string>());
      cc.owner = c.at("owner").get<std::string>();
      cc.privacy_group = c.value("privacy_group", std::set<PartyId>{});
      const auto storage = c.value("storage", json::object());
      for (const auto& [k, v] : storage.items()) cc.storage[k] = v;
      cfg.contracts.push_back(std::move(cc));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("world config: ") + e.what());
  }
  return cfg;
}

WorldConfig load_world_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  try {
    return world_config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

World::World(std::string seed, std::vector<PartyInfo> parties)
    : seed_(std::move(seed)), keyring_(seed_), parties_(std::move(parties)) {
  for (const auto& p : parties_) keyring_.add_party(p.id);
  methods_.add(ContractKind::SupplyContract, "put", put_method);
  methods_.add(ContractKind::FinanceContract, "put", put_method);
  methods_.add(ContractKind::SupplyContract, "upload_agreement", upload_agreement);
  methods_.add(ContractKind::SupplyContract, "grant_read", grant_read);
}

World World::bootstrap(const WorldConfig& config, const std::string& seed) {
  World world(seed, config.parties);
  for (const auto& c : config.chains) world.create_chain(c.id, c.members, c.genesis);
  for (const auto& c : config.contracts) {
    GroupId group;
    if (!c.privacy_group.empty()) group = world.create_privacy_group(c.chain, c.owner, c.privacy_group);
    const auto address = world.deploy_contract(c.chain, c.kind, c.owner, group);
    for (const auto& [key, value] : c.storage)
      world.call(c.chain, c.owner, address, "put", json{{"key", key}, {"value", value}});
  }
  return world;
}

bool World::is_party(const PartyId& party) const {
  return std::any_of(parties_.begin(), parties_.end(), [&](const auto& p) { return p.id == party; });
}

std::optional<int> World::tier(const PartyId& party) const {
  for (const auto& p : parties_)
    if (p.id == party) return p.tier;
  return std::nullopt;
}

Chain& World::create_chain(const ChainId& id, const std::set<PartyId>& members, const std::map<PartyId, Amount>& mint) {
  if (chains_.count(id)) throw Error(ErrorCode::DuplicateChainId, "chain '" + id + "' already exists");
  if (members.empty()) throw Error(ErrorCode::EmptyMembership, "chain '" + id + "' needs at least one member");
  for (const auto& m : members)
    if (!is_party(m)) throw Error(ErrorCode::NotAMember, "unknown party '" + m + "'");
  return chains_.emplace(id, Chain(id, members, mint)).first->second;
}

Chain& World::chain(const ChainId& id) {
  auto it = chains_.find(id);
  if (it == chains_.end()) throw Error(ErrorCode::UnknownChain, "unknown chain '" + id + "'");
  return it->second;
}

const Chain& World::chain(const ChainId& id) const {
  auto it = chains_.find(id);
  if (it == chains_.end()) throw Error(ErrorCode::UnknownChain, "unknown chain '" + id + "'");
  return it->second;
}

SignedTx World::sign(const PartyId& author, json body) const {
  SignedTx tx{author, std::move(body), {}};
  tx.signature = keyring_.sign(author, tx.signing_payload());
  return tx;
}

Receipt World::apply(Chain& target, const SignedTx& tx, const std::optional<LockOwner>& as_owner,
                     std::span<const json> prior_outputs) const {
  if (!keyring_.verify(tx.author, tx.signing_payload(), tx.signature))
    throw Error(ErrorCode::BadSignature, "signature does not verify for " + tx.author);
  if (!target.is_member(tx.author))
    throw Error(ErrorCode::NotAMember, tx.author + " is not a member of " + target.id());
  if (field(tx.body, "chain").get<std::string>() != target.id())
    throw Error(ErrorCode::InvalidSpec, "transaction addressed to another chain");

  const auto type = field(tx.body, "type").get<std::string>();
  Receipt receipt;
  receipt.chain = target.id();
  receipt.output = json::object();
  GroupId seal_group = target.default_group();
  std::vector<Op> ops;

  if (type == "group") {
    auto members = field(tx.body, "members").get<std::set<PartyId>>();
    if (!members.count(tx.author)) throw Error(ErrorCode::PrivacyViolation, "group creator must be a member");
    seal_group = target.next_group_id();
    ops.push_back(GroupOp{PrivacyGroup{seal_group, std::move(members)}});
    receipt.group = seal_group;
  } else if (type == "deploy") {
    const auto kind = contract_kind_from_string(field(tx.body, "kind").get<std::string>());
    const auto requested = tx.body.value("group", std::string{});
    seal_group = requested.empty() ? target.default_group() : requested;
    require_group_member(target, seal_group, tx.author);
    receipt.address = target.next_address();
    ops.push_back(DeployOp{kind, *receipt.address, tx.author, seal_group});
  } else if (type == "call") {
    const auto& contract = target.contract(field(tx.body, "address").get<std::string>());
    seal_group = contract.privacy_group;
    require_group_member(target, seal_group, tx.author);
    if (contract.lock && contract.lock != as_owner)
      throw Error(ErrorCode::ContractLocked, "contract " + contract.address + " is locked by " + *contract.lock);
    const auto& method = methods_.find(contract.kind, field(tx.body, "method").get<std::string>());
    CallContext ctx{*this, target.id(), tx.author, as_owner, prior_outputs};
    auto result = method(contract, tx.body.value("args", json::object()), ctx);
    ops = std::move(result.ops);
    receipt.output = std::move(result.output);
    receipt.address = contract.address;
  } else if (type == "transfer") {
    const auto amount = field(tx.body, "amount").get<Amount>();
    if (amount <= 0) throw Error(ErrorCode::InsufficientBalance, "transfer amount must be positive");
    ops.push_back(DebitOp{tx.author, amount});
    ops.push_back(CreditOp{field(tx.body, "to").get<std::string>(), amount});
  } else if (type == "xchain") {
    if (!as_owner || field(tx.body, "xtx").get<std::string>() != *as_owner)
      throw Error(ErrorCode::InvalidSpec, "crosschain effects are only accepted from their coordinator");
    for (const auto& op : field(tx.body, "ops")) ops.push_back(op_from_json(op));
    const auto requested = tx.body.value("group", std::string{});
    if (!requested.empty()) seal_group = requested;
    require_group_member(target, seal_group, tx.author);
  } else {
    throw Error(ErrorCode::ParseError, "unknown transaction type '" + type + "'");
  }

  const auto& entry = target.commit(tx, seal_group, ops, as_owner);
  receipt.seq = entry.seq;
  receipt.digest = entry.digest;
  receipt.sealed_group = seal_group;
  receipt.ops = std::move(ops);
  return receipt;
}

Receipt World::submit_tx(const ChainId& chain_id, const SignedTx& tx) { return apply(chain(chain_id), tx); }

GroupId World::create_privacy_group(const ChainId& chain_id, const PartyId& creator, const std::set<PartyId>& members) {
  return *submit_tx(chain_id, sign(creator, json{{"type", "group"}, {"chain", chain_id}, {"members", members}})).group;
}

Address World::deploy_contract(const ChainId& chain_id, ContractKind kind, const PartyId& deployer,
                               const GroupId& group) {
  json body{{"type", "deploy"}, {"chain", chain_id}, {"kind", to_string(kind)}};
  if (!group.empty()) body["group"] = group;
  return *submit_tx(chain_id, sign(deployer, std::move(body))).address;
}

Receipt World::call(const ChainId& chain_id, const PartyId& author, const Address& address, const std::string& method,
                    json args) {
  return submit_tx(chain_id, sign(author, json{{"type", "call"},
                                               {"chain", chain_id},
                                               {"address", address},
                                               {"method", method},
                                               {"args", std::move(args)}}));
}

Receipt World::transfer(const ChainId& chain_id, const PartyId& from, const PartyId& to, Amount amount) {
  return submit_tx(chain_id,
                   sign(from, json{{"type", "transfer"}, {"chain", chain_id}, {"to", to}, {"amount", amount}}));
}

json World::read_state(const ChainId& chain_id, const Address& address, const std::string& key,
                       const PartyId& caller, const std::optional<LockOwner>& as_owner) const {
  const auto& c = chain(chain_id);
  const auto& contract = c.contract(address);
  if (!c.is_member(caller) || !c.group(contract.privacy_group).members.count(caller))
    throw Error(ErrorCode::PrivacyViolation, caller + " may not read contract " + address + " on " + chain_id);
  if (contract.lock && contract.lock != as_owner)
    throw Error(ErrorCode::ContractLocked, "contract " + address + " is locked by " + *contract.lock);
  auto it = contract.storage.find(key);
  return it == contract.storage.end() ? json(nullptr) : it->second;
}

Amount World::total_balance() const {
  Amount total = 0;
  for (const auto& [id, c] : chains_) total += c.total_balance();
  return total;
}

bool World::any_lock_held() const {
  return std::any_of(chains_.begin(), chains_.end(), [](const auto& c) { return c.second.any_lock_held(); });
}

std::vector<Address> World::find_contracts(const ChainId& chain_id, ContractKind kind, const PartyId& owner) const {
  std::vector<Address> out;
  for (const auto& [address, c] : chain(chain_id).contracts())
    if (c.kind == kind && c.owner == owner) out.push_back(address);
  return out;
}

json World::export_state() const {
  json chains = json::object();
  for (const auto& [id, c] : chains_) chains[id] = c.export_state();
  return json{{"chains", std::move(chains)}};
}

void World::write_ledger_exports(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [id, c] : chains_) {
    std::ofstream out(dir / (id + ".jsonl"), std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + (dir / (id + ".jsonl")).string());
    for (const auto& record : c.log_records()) out << record.dump() << '\n';
  }
}

}  // namespace chainvoice::ledger
