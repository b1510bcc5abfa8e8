#include "chainvoice/xchain/coordinator.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace chainvoice::xchain {

using nlohmann::json;
using ledger::Chain;
using ledger::SignedTx;

namespace {

json tx_json(const SignedTx& tx) {
  return json{{"author", tx.author}, {"body", tx.body}, {"signature", tx.signature}};
}

SignedTx tx_from_json(const json& doc) {
  return SignedTx{doc.at("author").get<std::string>(), doc.at("body"), doc.at("signature").get<std::string>()};
}

bool already_sealed(const Chain& chain, const SignedTx& tx) {
  const auto& log = chain.log();
  return std::any_of(log.begin(), log.end(),
                     [&](const auto& e) { return e.author == tx.author && e.signature == tx.signature; });
}

}  // namespace

json to_json(const Step& step) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ReadStep>) {
          return json{{"type", "read"}, {"chain", s.chain}, {"address", s.address}, {"key", s.key},
                      {"reader", s.reader}};
        } else if constexpr (std::is_same_v<T, CallStep>) {
          return json{{"type", "call"},     {"chain", s.chain}, {"address", s.address},
                      {"method", s.method}, {"args", s.args},   {"author", s.author}};
        } else {
          json j{{"type", "transfer"}, {"from_chain", s.from_chain}, {"to_chain", s.to_chain},
                 {"from", s.from},     {"to", s.to},                 {"amount", s.amount}};
          if (s.amount_from_step) j["amount_from_step"] = *s.amount_from_step;
          return j;
        }
      },
      step);
}

Step step_from_json(const json& doc) {
  try {
    const auto type = doc.at("type").get<std::string>();
    if (type == "read") return ReadStep{doc.at("chain").get<std::string>(), doc.at("address").get<std::string>(), doc.at("key").get<std::string>(), doc.at("reader").get<std::string>()};
    if (type == "call")
      return CallStep{doc.at("chain").get<std::string>(), doc.at("address").get<std::string>(), doc.at("method").get<std::string>(), doc.value("args", json::object()),
                      doc.at("author").get<std::string>()};
    if (type == "transfer") {
      TransferStep t{doc.at("from_chain").get<std::string>(), doc.at("to_chain").get<std::string>(), doc.at("from").get<std::string>(), doc.at("to").get<std::string>(),
                     doc.value("amount", Amount{0}), std::nullopt};
      if (doc.contains("amount_from_step")) t.amount_from_step = doc.at("amount_from_step").get<std::size_t>();
      return t;
    }
    throw Error(ErrorCode::ParseError, "unknown step type '" + type + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("step: ") + e.what());
  }
}

std::string to_string(TxStatus status) {
  switch (status) {
    case TxStatus::Planned: return "Planned";
    case TxStatus::Locking: return "Locking";
    case TxStatus::Executing: return "Executing";
    case TxStatus::Committed: return "Committed";
    case TxStatus::Ignored: return "Ignored";
  }
  return "?";
}

std::string to_string(FaultPhase phase) {
  switch (phase) {
    case FaultPhase::Lock: return "lock";
    case FaultPhase::Stage: return "stage";
    case FaultPhase::Commit: return "commit";
  }
  return "?";
}

FaultPhase fault_phase_from_string(const std::string& text) {
  if (text == "lock") return FaultPhase::Lock;
  if (text == "stage") return FaultPhase::Stage;
  if (text == "commit") return FaultPhase::Commit;
  throw Error(ErrorCode::ParseError, "fault phase must be lock, stage or commit, got '" + text + "'");
}

CrosschainTx plan(const ledger::World& world, std::string id, PartyId originator, std::vector<Step> steps) {
  if (steps.empty()) throw Error(ErrorCode::EmptyPlan, "crosschain transaction " + id + " has no steps");
  for (const auto& step : steps) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, TransferStep>) {
            (void)world.chain(s.from_chain);
            (void)world.chain(s.to_chain);
          } else {
            (void)world.chain(s.chain);
          }
        },
        step);
  }
  return CrosschainTx{std::move(id), std::move(originator), std::move(steps), TxStatus::Planned};
}

std::vector<LockKey> lock_set(const CrosschainTx& tx) {
  std::set<LockKey> keys;
  for (const auto& step : tx.steps) {
    if (const auto* r = std::get_if<ReadStep>(&step)) keys.insert({r->chain, r->address});
    if (const auto* c = std::get_if<CallStep>(&step)) keys.insert({c->chain, c->address});
    if (const auto* t = std::get_if<TransferStep>(&step)) {
      keys.insert({t->from_chain, ledger::kBalancesResource});
      keys.insert({t->to_chain, ledger::kBalancesResource});
    }
  }
  return {keys.begin(), keys.end()};
}

Journal::Journal(std::filesystem::path file) : file_(std::move(file)) {
  if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
  std::ofstream(*file_, std::ios::trunc);
}

void Journal::append(json record) {
  if (file_) {
    std::ofstream out(*file_, std::ios::app | std::ios::binary);
    out << record.dump() << '\n';
  }
  records_.push_back(std::move(record));
}

std::string Journal::dump() const {
  std::string out;
  for (const auto& r : records_) out += r.dump() + "\n";
  return out;
}

Journal Journal::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open journal " + file.string());
  Journal journal;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      journal.records_.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, file.string() + ": " + e.what());
    }
  }
  journal.file_ = file;
  return journal;
}

json to_json(const ExecutionReport& r) {
  json j{{"tx", r.tx_id}, {"status", to_string(r.status)}, {"outputs", r.outputs}};
  if (r.failed_step) j["failed_step"] = *r.failed_step;
  if (r.error) j["error"] = chainvoice::to_string(*r.error);
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

json crosschain_read(const Chain& source, const std::string& tx_id, const Address& address, const std::string& key,
                     const PartyId& reader) {
  const auto& contract = source.contract(address);
  if (contract.lock != tx_id)
    throw Error(ErrorCode::LockConflict, "crosschain read of " + address + " without holding its lock");
  auto value = [&] {
    auto it = contract.storage.find(key);
    return it == contract.storage.end() ? json(nullptr) : it->second;
  };
  const auto& group = source.group(contract.privacy_group);
  if (group.members.count(reader)) return value();
  auto grant = contract.storage.find(ledger::grant_key(reader, key));
  if (grant != contract.storage.end() && grant->second.is_object() &&
      group.members.count(grant->second.value("grantor", std::string{})))
    return value();
  if (source.is_member(reader))
    throw Error(ErrorCode::PrivacyViolation, reader + " is outside the privacy group of " + address);
  throw Error(ErrorCode::NoGrant, "no read grant for " + reader + " on '" + key + "' at " + address);
}

Execution::Execution(ledger::World& world, Journal& journal, CrosschainTx& tx, FaultPlan fault)
    : world_(world), journal_(journal), tx_(tx), fault_(fault) {
  report_.tx_id = tx_.id;
  report_.status = tx_.status;
}

void Execution::advance() {
  switch (stage_) {
    case Stage::Begin: {
      json steps = json::array();
      for (const auto& s : tx_.steps) steps.push_back(to_json(s));
      journal_.append(json{{"tx", tx_.id}, {"phase", "begin"}, {"originator", tx_.originator}, {"steps", steps}});
      locks_ = lock_set(tx_);
      tx_.status = report_.status = TxStatus::Locking;
      cursor_ = 0;
      stage_ = Stage::Locking;
      return;
    }
    case Stage::Locking: {
      const auto& [chain_id, resource] = locks_[cursor_];
      auto& chain = world_.chain(chain_id);
      if (resource != ledger::kBalancesResource && !chain.has_contract(resource))
        return abort(std::nullopt, Error(ErrorCode::UnknownAddress, "no contract at " + resource + " on " + chain_id));
      if (!chain.try_lock(resource, tx_.id))
        return abort(std::nullopt, Error(ErrorCode::LockConflict, chain_id + "/" + resource + " is locked by " +
                                                                       *chain.lock_holder(resource)));
      ++cursor_;
      if (fault_.phase == FaultPhase::Lock && cursor_ == 1) throw CoordinatorCrash("after taking the first lock");
      if (cursor_ == locks_.size()) {
        json held = json::array();
        for (const auto& [c, r] : locks_) held.push_back({c, r});
        journal_.append(json{{"tx", tx_.id}, {"phase", "locked"}, {"locks", held}});
        for (const auto& [c, r] : locks_)
          if (!shadows_.count(c)) shadows_.emplace(c, world_.chain(c));
        tx_.status = report_.status = TxStatus::Executing;
        cursor_ = 0;
        stage_ = Stage::Staging;
      }
      return;
    }
    case Stage::Staging: {
      if (fault_.step == cursor_) throw CoordinatorCrash("before staging step " + std::to_string(cursor_));
      try {
        stage_step(cursor_);
      } catch (const Error& e) {
        return abort(cursor_, e);
      }
      if (++cursor_ == tx_.steps.size()) stage_ = Stage::CommitPoint;
      return;
    }
    case Stage::CommitPoint: {
      if (fault_.phase == FaultPhase::Stage) throw CoordinatorCrash("after staging, before the commit record");
      json effects = json::array();
      std::set<ChainId> chains;
      for (const auto& e : effects_) {
        json ops = json::array();
        for (const auto& op : e.ops) ops.push_back(ledger::to_json(op));
        effects.push_back(json{{"chain", e.chain}, {"group", e.group}, {"tx", tx_json(e.tx)}, {"ops", ops}});
        chains.insert(e.chain);
      }
      journal_.append(json{{"tx", tx_.id},
                           {"phase", "commit"},
                           {"digest", ledger::sha256_hex(effects.dump())},
                           {"effects", effects}});
      apply_order_.assign(chains.begin(), chains.end());
      cursor_ = 0;
      stage_ = apply_order_.empty() ? Stage::Release : Stage::Applying;
      return;
    }
    case Stage::Applying: {
      const auto& chain_id = apply_order_[cursor_];
      auto& chain = world_.chain(chain_id);
      for (const auto& e : effects_)
        if (e.chain == chain_id && !already_sealed(chain, e.tx)) chain.commit(e.tx, e.group, e.ops, tx_.id);
      journal_.append(json{{"tx", tx_.id}, {"phase", "applied"}, {"chain", chain_id}});
      ++cursor_;
      if (fault_.phase == FaultPhase::Commit && cursor_ == 1) throw CoordinatorCrash("after applying one chain");
      if (cursor_ == apply_order_.size()) stage_ = Stage::Release;
      return;
    }
    case Stage::Release: {
      release_locks();
      journal_.append(json{{"tx", tx_.id}, {"phase", "committed"}});
      tx_.status = report_.status = TxStatus::Committed;
      stage_ = Stage::Done;
      return;
    }
    case Stage::Done:
      return;
  }
}

void Execution::stage_step(std::size_t index) {
  const auto& step = tx_.steps[index];
  const std::span<const json> prior(report_.outputs);
  json output;
  const auto effects_before = effects_.size();

  if (const auto* r = std::get_if<ReadStep>(&step)) {
    output = json{{"type", "read"},
                  {"chain", r->chain},
                  {"address", r->address},
                  {"key", r->key},
                  {"value", crosschain_read(shadows_.at(r->chain), tx_.id, r->address, r->key, r->reader)}};
  } else if (const auto* c = std::get_if<CallStep>(&step)) {
    auto signed_tx = world_.sign(c->author, json{{"type", "call"},
                                                 {"chain", c->chain},
                                                 {"address", c->address},
                                                 {"method", c->method},
                                                 {"args", c->args},
                                                 {"xtx", tx_.id},
                                                 {"step", index}});
    auto receipt = world_.apply(shadows_.at(c->chain), signed_tx, tx_.id, prior);
    effects_.push_back(Effect{c->chain, std::move(signed_tx), receipt.sealed_group, std::move(receipt.ops)});
    output = json{{"type", "call"}, {"chain", c->chain}, {"method", c->method}, {"output", receipt.output}};
  } else {
    const auto& t = std::get<TransferStep>(step);
    Amount amount = t.amount;
    if (t.amount_from_step) {
      if (*t.amount_from_step >= index)
        throw Error(ErrorCode::InvalidSpec, "transfer amount must come from an earlier step");
      const auto& src = report_.outputs.at(*t.amount_from_step);
      amount = src.contains("output") ? src.at("output").at("amount").get<Amount>() : src.at("amount").get<Amount>();
    }
    if (amount <= 0) throw Error(ErrorCode::InsufficientBalance, "transfer amount must be positive");
    auto leg = [&](const ChainId& chain, const char* name, std::vector<ledger::Op> ops) {
      json op_docs = json::array();
      for (const auto& op : ops) op_docs.push_back(ledger::to_json(op));
      auto signed_tx = world_.sign(t.from, json{{"type", "xchain"},
                                                {"chain", chain},
                                                {"xtx", tx_.id},
                                                {"step", index},
                                                {"leg", name},
                                                {"ops", op_docs}});
      auto receipt = world_.apply(shadows_.at(chain), signed_tx, tx_.id, prior);
      effects_.push_back(Effect{chain, std::move(signed_tx), receipt.sealed_group, std::move(receipt.ops)});
    };
    if (t.from_chain == t.to_chain) {
      leg(t.from_chain, "transfer", {ledger::DebitOp{t.from, amount}, ledger::CreditOp{t.to, amount}});
    } else {
      leg(t.from_chain, "debit", {ledger::DebitOp{t.from, amount}});
      leg(t.to_chain, "credit", {ledger::CreditOp{t.to, amount}});
    }
    output = json{{"type", "transfer"}, {"from_chain", t.from_chain}, {"to_chain", t.to_chain},
                  {"from", t.from},     {"to", t.to},                 {"amount", amount}};
  }

  json staged = json::array();
  for (std::size_t i = effects_before; i < effects_.size(); ++i) staged.push_back(tx_json(effects_[i].tx));
  journal_.append(json{{"tx", tx_.id},
                       {"phase", "staged"},
                       {"step", index},
                       {"digest", ledger::sha256_hex(json{{"output", output}, {"effects", staged}}.dump())}});
  report_.outputs.push_back(std::move(output));
}

void Execution::abort(std::optional<std::size_t> step, const Error& cause) {
  release_locks();
  json record{{"tx", tx_.id}, {"phase", "ignored"}, {"error", to_string(cause.code())}, {"message", cause.what()}};
  if (step) record["step"] = *step;
  journal_.append(std::move(record));
  shadows_.clear();
  effects_.clear();
  tx_.status = report_.status = TxStatus::Ignored;
  report_.failed_step = step;
  report_.error = cause.code();
  report_.message = cause.what();
  stage_ = Stage::Done;
}

void Execution::release_locks() {
  for (const auto& [chain_id, resource] : locks_) {
    auto& chain = world_.chain(chain_id);
    if (resource == ledger::kBalancesResource || chain.has_contract(resource)) chain.unlock(resource, tx_.id);
  }
}

ExecutionReport Coordinator::execute(CrosschainTx& tx, const FaultPlan& fault) {
  Execution execution(world_, journal_, tx, fault);
  while (!execution.finished()) execution.advance();
  return execution.report();
}

std::vector<std::pair<std::string, TxStatus>> Coordinator::recover() {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const json*>> by_tx;
  for (const auto& r : journal_.records()) {
    const auto id = r.at("tx").get<std::string>();
    if (!by_tx.count(id)) order.push_back(id);
    by_tx[id].push_back(&r);
  }

  std::vector<std::pair<std::string, TxStatus>> recovered;
  for (const auto& id : order) {
    const json* commit = nullptr;
    bool terminal = false;
    std::set<ChainId> applied;
    for (const auto* r : by_tx[id]) {
      const auto phase = r->at("phase").get<std::string>();
      if (phase == "committed" || phase == "ignored") terminal = true;
      if (phase == "commit") commit = r;
      if (phase == "applied") applied.insert(r->at("chain").get<std::string>());
    }
    if (terminal) continue;

    auto release = [&] {
      for (const auto& [chain_id, chain] : world_.chains())
        for (const auto& resource : chain.locks_held_by(id)) world_.chain(chain_id).unlock(resource, id);
    };

    if (commit) {
      std::vector<ChainId> chains;
      for (const auto& e : commit->at("effects")) {
        const auto chain_id = e.at("chain").get<std::string>();
        auto& chain = world_.chain(chain_id);
        const auto tx = tx_from_json(e.at("tx"));
        if (!already_sealed(chain, tx)) {
          std::vector<ledger::Op> ops;
          for (const auto& op : e.at("ops")) ops.push_back(ledger::op_from_json(op));
          chain.commit(tx, e.at("group").get<std::string>(), ops, id);
        }
        if (std::find(chains.begin(), chains.end(), chain_id) == chains.end()) chains.push_back(chain_id);
      }
      std::sort(chains.begin(), chains.end());
      for (const auto& c : chains)
        if (!applied.count(c)) journal_.append(json{{"tx", id}, {"phase", "applied"}, {"chain", c}});
      release();
      journal_.append(json{{"tx", id}, {"phase", "committed"}, {"recovered", true}});
      recovered.emplace_back(id, TxStatus::Committed);
    } else {
      release();
      journal_.append(json{{"tx", id},
                           {"phase", "ignored"},
                           {"error", "CoordinatorCrash"},
                           {"message", "rolled back on restart"},
                           {"recovered", true}});
      recovered.emplace_back(id, TxStatus::Ignored);
    }
  }
  return recovered;
}

}  // namespace chainvoice::xchain
