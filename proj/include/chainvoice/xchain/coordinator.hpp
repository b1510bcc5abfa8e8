#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "chainvoice/error.hpp"
#include "chainvoice/ledger/world.hpp"

namespace chainvoice::xchain {

using ledger::Address;
using ledger::Amount;
using ledger::ChainId;
using ledger::PartyId;

struct ReadStep {
  ChainId chain;
  Address address;
  std::string key;
  PartyId reader;
};

struct CallStep {
  ChainId chain;
  Address address;
  std::string method;
  nlohmann::json args = nlohmann::json::object();
  PartyId author;
};

/// Moves `amount` from `from` on `from_chain` to `to` on `to_chain`. When
/// `amount_from_step` is set the amount is taken from that earlier step's
/// output field "amount".
struct TransferStep {
  ChainId from_chain;
  ChainId to_chain;
  PartyId from;
  PartyId to;
  Amount amount = 0;
  std::optional<std::size_t> amount_from_step;
};

using Step = std::variant<ReadStep, CallStep, TransferStep>;

nlohmann::json to_json(const Step& step);
Step step_from_json(const nlohmann::json& doc);

enum class TxStatus { Planned, Locking, Executing, Committed, Ignored };
std::string to_string(TxStatus status);

struct CrosschainTx {
  std::string id;
  PartyId originator;
  std::vector<Step> steps;
  TxStatus status = TxStatus::Planned;
};

/// (chain, resource) pair; resource is a contract address or
/// ledger::kBalancesResource.
using LockKey = std::pair<ChainId, std::string>;

/// Errors: EmptyPlan, UnknownChain.
CrosschainTx plan(const ledger::World& world, std::string id, PartyId originator, std::vector<Step> steps);

/// Sorted, de-duplicated lock set: every contract read or called plus the
/// balance tables of both transfer legs.
std::vector<LockKey> lock_set(const CrosschainTx& tx);

enum class FaultPhase { Lock, Stage, Commit };
std::string to_string(FaultPhase phase);
/// Throws ParseError.
FaultPhase fault_phase_from_string(const std::string& text);

/// At most one crash point. `step` halts before staging that step index;
/// Lock halts after the first lock is taken; Stage after every step is
/// staged but before the commit record; Commit after the commit record and
/// the first chain's application.
struct FaultPlan {
  std::optional<FaultPhase> phase;
  std::optional<std::size_t> step;

  bool empty() const { return !phase && !step; }
};

/// Simulated coordinator death (not a chainvoice::Error).
class CoordinatorCrash : public std::runtime_error {
 public:
  explicit CoordinatorCrash(const std::string& where) : std::runtime_error("coordinator crashed " + where) {}
};

/// Append-only coordinator journal. Records are JSON objects with at least
/// `tx` and `phase`; optionally mirrored to a JSON-lines file.
class Journal {
 public:
  Journal() = default;
  explicit Journal(std::filesystem::path file);

  void append(nlohmann::json record);
  const std::vector<nlohmann::json>& records() const noexcept { return records_; }
  std::string dump() const;
  static Journal load(const std::filesystem::path& file);

 private:
  std::optional<std::filesystem::path> file_;
  std::vector<nlohmann::json> records_;
};

struct ExecutionReport {
  std::string tx_id;
  TxStatus status = TxStatus::Planned;
  /// Output per staged step (read values, method outputs, transfer legs).
  std::vector<nlohmann::json> outputs;
  std::optional<std::size_t> failed_step;
  std::optional<ErrorCode> error;
  std::string message;
};

nlohmann::json to_json(const ExecutionReport& report);

/// Reads `key` from a contract the transaction has locked. Members of the
/// contract's privacy group read directly; anyone else needs a grant stored
/// by a group member under ledger::grant_key(reader, key).
/// Errors: LockConflict (lock not held by `tx_id`), PrivacyViolation (source
/// chain member outside the group, no grant), NoGrant.
nlohmann::json crosschain_read(const ledger::Chain& source, const std::string& tx_id, const Address& address,
                               const std::string& key, const PartyId& reader);

/// One crosschain transaction as a resumable state machine. Each advance()
/// performs one unit: take one lock, stage one step, write the commit record,
/// apply one chain, or release. Interleaving two executions models
/// concurrent coordinators over the same world.
class Execution {
 public:
  Execution(ledger::World& world, Journal& journal, CrosschainTx& tx, FaultPlan fault = {});

  bool finished() const noexcept { return stage_ == Stage::Done; }
  /// Throws CoordinatorCrash at the armed fault point.
  void advance();
  const ExecutionReport& report() const noexcept { return report_; }

 private:
  enum class Stage { Begin, Locking, Staging, CommitPoint, Applying, Release, Done };

  struct Effect {
    ChainId chain;
    ledger::SignedTx tx;
    ledger::GroupId group;
    std::vector<ledger::Op> ops;
  };

  void stage_step(std::size_t index);
  void abort(std::optional<std::size_t> step, const Error& cause);
  void release_locks();

  ledger::World& world_;
  Journal& journal_;
  CrosschainTx& tx_;
  FaultPlan fault_;
  Stage stage_ = Stage::Begin;
  std::vector<LockKey> locks_;
  std::size_t cursor_ = 0;
  std::map<ChainId, ledger::Chain> shadows_;
  std::vector<Effect> effects_;
  std::vector<ChainId> apply_order_;
  ExecutionReport report_;
};

/// Runs transactions one at a time and restores consistency after a crash.
class Coordinator {
 public:
  Coordinator(ledger::World& world, Journal& journal) : world_(world), journal_(journal) {}

  /// Ignored outcomes (lock conflict, failing or rejected step) are reported,
  /// not thrown. Throws CoordinatorCrash when the fault plan fires; call
  /// recover() afterwards.
  ExecutionReport execute(CrosschainTx& tx, const FaultPlan& fault = {});

  /// Completes every unfinished transaction in the journal: rolls forward
  /// when its commit record exists, otherwise rolls back and releases its
  /// locks. Returns the final status of each recovered transaction.
  std::vector<std::pair<std::string, TxStatus>> recover();

 private:
  ledger::World& world_;
  Journal& journal_;
};

}  // namespace chainvoice::xchain
