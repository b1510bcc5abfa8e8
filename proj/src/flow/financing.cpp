#include "chainvoice/flow/financing.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "chainvoice/bn/io.hpp"

namespace chainvoice::flow {

using nlohmann::json;
using ledger::ContractKind;
using ledger::SupplyAgreement;
namespace ids = finance::ids;
namespace st = finance::states;

namespace {

const std::array<const char*, 12> kStepTitles = {
    "Buyer deploys the supply contract and uploads the agreement signed by the buyer",
    "Supplier downloads the agreement",
    "Supplier countersigns and uploads the agreement, granting the financier read access",
    "Supplier establishes the supplier-financier chain",
    "Financier deploys a finance contract on the supplier-financier chain",
    "Supplier submits the crosschain financing transaction",
    "Crosschain read of the countersigned agreement",
    "Request validated against the agreement",
    "Request passed to the financier chain",
    "Credit check, customer list check and network evaluation",
    "Funds moved from the financier chain to the supplier-financier chain",
    "Funds paid to the supplier",
};

// First sequence step carried out by each crosschain step.
constexpr std::array<int, 5> kTxStepToSequence = {7, 8, 9, 11, 12};

struct SequenceCrash {
  int step;
};

struct Hooks {
  std::shared_ptr<const finance::ModelSet> models;
  Fixtures fixtures;
  double threshold = finance::kDefaultFundingThreshold;
  std::optional<bool> financier_decision;
  bool crash_at_evaluation = false;

  bool reached_handoff = false;
  bool reached_evaluation = false;
  FlowEvidence evidence;
  json posteriors = json::object();
  std::optional<double> p_fund;
  std::optional<std::string> decision;
  std::optional<Amount> funded_amount;
};

std::string optional_state(const std::optional<std::string>& s) { return s ? *s : std::string("unobserved"); }

SupplyAgreement agreement_from_read(std::span<const json> prior) {
  if (prior.empty() || !prior.front().contains("value") || prior.front().at("value").is_null())
    throw Error(ErrorCode::ValidationFailed, "no supply agreement was read");
  return ledger::agreement_from_json(prior.front().at("value"));
}

void register_hooks(ledger::World& world, const std::shared_ptr<Hooks>& hooks) {
  world.methods().add(
      ContractKind::FinanceContract, "validate_request",
      [hooks](const ledger::ContractState& c, const json& args, const ledger::CallContext& ctx) {
        const auto request = request_from_json(args.at("request"));
        const auto agreement = agreement_from_read(ctx.prior_outputs);
        const auto validation = validate_request(agreement, request, ctx.world.keyring());
        if (!validation.ok()) {
          std::string joined;
          for (const auto& v : validation.violations) joined += (joined.empty() ? "" : ", ") + v;
          throw Error(ErrorCode::ValidationFailed, joined);
        }
        const auto key = "request/" + ctx.xtx.value_or("direct");
        return ledger::MethodResult{
            {ledger::SetOp{c.address, key, json{{"request", to_json(request)}, {"status", "validated"}}}},
            json{{"valid", true}, {"agreement_value", agreement.value()}}};
      });

  world.methods().add(
      ContractKind::FinanceContract, "process_request",
      [hooks](const ledger::ContractState& c, const json& args, const ledger::CallContext& ctx) {
        hooks->reached_handoff = true;
        if (hooks->crash_at_evaluation) throw xchain::CoordinatorCrash("during step 10");
        hooks->reached_evaluation = true;

        const auto request = request_from_json(args.at("request"));
        const auto agreement = agreement_from_read(ctx.prior_outputs);
        hooks->evidence = assemble_evidence(ctx.world, request, hooks->fixtures, agreement.buyer);
        const auto findings = hooks->evidence.findings();
        const auto& net = hooks->models->overall;
        json posteriors = json::object();
        for (const char* node : {ids::kPerceptionOfRisk, ids::kDecision, ids::kStability})
          posteriors[node] = bn::to_json(bn::query(net, findings, node)).at("distribution");
        hooks->posteriors = posteriors;
        const double p_fund = posteriors.at(ids::kDecision).at(st::kFund).get<double>();
        hooks->p_fund = p_fund;
        const bool fund = hooks->financier_decision.value_or(finance::should_fund(p_fund, hooks->threshold));
        hooks->decision = fund ? st::kFund : st::kDoNotFund;
        if (!fund) {
          std::ostringstream msg;
          msg << "funding declined (P(Fund) = " << std::setprecision(4) << p_fund << ")";
          throw Error(ErrorCode::FundingDeclined, msg.str());
        }
        const Amount amount = request.rewards == st::kAdditional
                                  ? early_payment_discount(request.amount, hooks->fixtures.discount_rate)
                                  : request.amount;
        hooks->funded_amount = amount;
        const auto key = "funded/" + ctx.xtx.value_or("direct");
        return ledger::MethodResult{
            {ledger::SetOp{c.address, key,
                           json{{"supplier", request.supplier}, {"amount", amount}, {"p_fund", p_fund}}}},
            json{{"decision", st::kFund}, {"p_fund", p_fund}, {"amount", amount}}};
      });
}

std::optional<Address> find_agreement(const ledger::World& world, const ChainId& chain_id, const PartyId& supplier) {
  for (const auto& [address, c] : world.chain(chain_id).contracts()) {
    if (c.kind != ContractKind::SupplyContract) continue;
    auto it = c.storage.find("agreement");
    if (it != c.storage.end() && it->second.value("supplier", std::string{}) == supplier) return address;
  }
  return std::nullopt;
}

std::string next_tx_id(const xchain::Journal& journal) {
  std::set<std::string> seen;
  for (const auto& r : journal.records()) seen.insert(r.at("tx").get<std::string>());
  std::ostringstream id;
  id << "xtx-" << std::setw(4) << std::setfill('0') << seen.size() + 1;
  return id.str();
}

std::size_t staged_steps(const xchain::Journal& journal, const std::string& tx_id) {
  std::size_t n = 0;
  for (const auto& r : journal.records())
    if (r.at("tx") == tx_id && r.at("phase") == "staged") ++n;
  return n;
}

}  // namespace

json to_json(const FinancingRequest& r) {
  return json{{"supplier", r.supplier},
              {"financier", r.financier},
              {"amount", r.amount},
              {"payment_terms_days", r.payment_terms_days},
              {"agreement", {{"chain", r.agreement_chain},
                             {"address", r.agreement_address ? json(*r.agreement_address) : json(nullptr)}}},
              {"total_unpaid", r.total_unpaid},
              {"rewards", r.rewards.empty() ? json(nullptr) : json(r.rewards)}};
}

FinancingRequest request_from_json(const json& doc) {
  FinancingRequest r;
  try {
    r.supplier = doc.at("supplier").get<std::string>();
    r.financier = doc.value("financier", r.financier);
    r.amount = doc.at("amount").get<Amount>();
    r.payment_terms_days = doc.value("payment_terms_days", r.payment_terms_days);
    if (doc.contains("agreement")) {
      const auto& a = doc.at("agreement");
      r.agreement_chain = a.value("chain", r.agreement_chain);
      if (a.contains("address") && !a.at("address").is_null()) r.agreement_address = a.at("address");
    }
    r.total_unpaid = doc.value("total_unpaid", r.amount);
    if (doc.contains("rewards") && !doc.at("rewards").is_null()) r.rewards = doc.at("rewards").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("financing request: ") + e.what());
  }
  if (!r.rewards.empty() && r.rewards != st::kAdditional && r.rewards != st::kStandard)
    throw Error(ErrorCode::ParseError, "rewards must be Additional or Standard, got '" + r.rewards + "'");
  return r;
}

json to_json(const Fixtures& f) {
  return json{{"credit_bureau", f.credit_bureau},
              {"customer_list", f.customer_list},
              {"gwal", f.gwal},
              {"downstream", f.downstream},
              {"discount_rate", f.discount_rate},
              {"agreement", ledger::to_json(f.agreement)}};
}

Fixtures fixtures_from_json(const json& doc) {
  Fixtures f;
  try {
    f.credit_bureau = doc.value("credit_bureau", f.credit_bureau);
    f.customer_list = doc.value("customer_list", f.customer_list);
    f.gwal = doc.value("gwal", f.gwal);
    f.downstream = doc.value("downstream", f.downstream);
    f.discount_rate = doc.value("discount_rate", f.discount_rate);
    f.agreement = ledger::agreement_from_json(doc.at("agreement"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("fixtures: ") + e.what());
  }
  for (const auto& [party, result] : f.credit_bureau)
    if (result != st::kPassed && result != st::kFailed)
      throw Error(ErrorCode::ParseError, "credit result for " + party + " must be Passed or Failed");
  return f;
}

Fixtures load_fixtures(const std::filesystem::path& path) { return fixtures_from_json(bn::read_json_file(path)); }

FinancingRequest load_request(const std::filesystem::path& path) {
  return request_from_json(bn::read_json_file(path));
}

Validation validate_request(const SupplyAgreement& agreement, const FinancingRequest& request,
                            const ledger::Keyring& keyring) {
  if (!agreement.countersigned(keyring))
    throw Error(ErrorCode::NotCountersigned, "supply agreement lacks a valid signature from both parties");
  Validation v;
  if (agreement.supplier != request.supplier) v.violations.push_back("SupplierMismatch");
  if (request.amount <= 0) v.violations.push_back("NonPositiveAmount");
  if (request.amount > agreement.value()) v.violations.push_back("AmountExceedsAgreement");
  if (request.payment_terms_days != agreement.payment_terms_days) v.violations.push_back("PaymentTermsMismatch");
  if (request.amount > request.total_unpaid) v.violations.push_back("AmountExceedsUnpaid");
  return v;
}

bool lower_tier_funded(const std::set<PartyId>& customer_list, const PartyId& buyer,
                       const std::map<PartyId, std::vector<PartyId>>& downstream) {
  std::set<PartyId> seen{buyer};
  std::deque<PartyId> queue{buyer};
  while (!queue.empty()) {
    const auto party = queue.front();
    queue.pop_front();
    if (customer_list.count(party)) return true;
    auto it = downstream.find(party);
    if (it == downstream.end()) continue;
    for (const auto& next : it->second)
      if (seen.insert(next).second) queue.push_back(next);
  }
  return false;
}

Amount early_payment_discount(Amount amount, double rate) {
  if (!std::isfinite(rate) || rate < 0.0 || rate >= 1.0)
    throw Error(ErrorCode::RateOutOfRange, "discount rate must lie in [0, 1)");
  if (amount < 0) throw Error(ErrorCode::InvalidSpec, "negative invoice amount");
  constexpr std::int64_t kScale = 1'000'000'000;
  const auto rate_nano = static_cast<std::int64_t>(std::llround(rate * kScale));
  const __int128 kept = static_cast<__int128>(amount) * (kScale - rate_nano);
  return static_cast<Amount>(kept / kScale);
}

bn::Evidence FlowEvidence::findings() const {
  bn::Evidence ev;
  auto put = [&](const std::string& node, const std::optional<std::string>& state) {
    if (state) ev.findings[node] = *state;
  };
  put(finance::flat_id(ids::kSupplierProfileInstance, ids::kTier1), tier1);
  put(finance::flat_id(ids::kSupplierProfileInstance, ids::kGWaL), gwal);
  put(finance::flat_id(ids::kFinancialIncentiveInstance, ids::kCreditRating), credit_rating);
  put(finance::flat_id(ids::kFinancialIncentiveInstance, ids::kFinancialRewards), financial_rewards);
  put(ids::kLowerTierFunded, lower_tier_funded);
  return ev;
}

json FlowEvidence::to_json() const {
  auto j = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
  return json{{finance::flat_id(ids::kSupplierProfileInstance, ids::kTier1), j(tier1)},
              {finance::flat_id(ids::kSupplierProfileInstance, ids::kGWaL), j(gwal)},
              {finance::flat_id(ids::kFinancialIncentiveInstance, ids::kCreditRating), j(credit_rating)},
              {finance::flat_id(ids::kFinancialIncentiveInstance, ids::kFinancialRewards), j(financial_rewards)},
              {ids::kLowerTierFunded, j(lower_tier_funded)}};
}

FlowEvidence assemble_evidence(const ledger::World& world, const FinancingRequest& request, const Fixtures& fixtures,
                               const PartyId& buyer) {
  FlowEvidence ev;
  if (auto tier = world.tier(request.supplier)) ev.tier1 = *tier == 1 ? st::kYes : st::kNo;
  if (auto it = fixtures.gwal.find(request.supplier); it != fixtures.gwal.end())
    ev.gwal = it->second ? st::kYes : st::kNo;
  if (auto it = fixtures.credit_bureau.find(request.supplier); it != fixtures.credit_bureau.end())
    ev.credit_rating = it->second;
  if (!request.rewards.empty()) ev.financial_rewards = request.rewards;
  ev.lower_tier_funded = lower_tier_funded(fixtures.customer_list, buyer, fixtures.downstream) ? st::kYes : st::kNo;
  return ev;
}

std::string to_string(StepStatus status) {
  switch (status) {
    case StepStatus::Pending: return "Pending";
    case StepStatus::Done: return "Done";
    case StepStatus::Failed: return "Failed";
  }
  return "?";
}

std::vector<std::string> FlowOutcome::trace() const {
  std::vector<std::string> lines;
  for (const auto& s : steps) {
    std::ostringstream line;
    line << "step " << std::setw(2) << s.number << " [" << to_string(s.status) << "] " << s.title;
    if (!s.detail.empty()) line << ": " << s.detail;
    lines.push_back(line.str());
  }
  std::ostringstream summary;
  summary << "tx " << (tx_id.empty() ? "-" : tx_id) << " " << (tx_status ? xchain::to_string(*tx_status) : "-")
          << ", decision " << decision.value_or("-");
  if (p_fund) summary << " (P(Fund) = " << std::fixed << std::setprecision(4) << *p_fund << ")";
  summary << ", settlement " << (settlement ? std::to_string(*settlement) : std::string("none"));
  lines.push_back(summary.str());
  lines.push_back("evidence: Tier1=" + optional_state(evidence.tier1) + " GWaL=" + optional_state(evidence.gwal) +
                  " CreditRating=" + optional_state(evidence.credit_rating) + " FinancialRewards=" +
                  optional_state(evidence.financial_rewards) +
                  " LowerTierFunded=" + optional_state(evidence.lower_tier_funded));
  return lines;
}

json to_json(const FlowOutcome& o) {
  json steps = json::array();
  for (const auto& s : o.steps)
    steps.push_back(json{{"step", s.number}, {"title", s.title}, {"status", to_string(s.status)}, {"detail", s.detail}});
  json j{{"request", to_json(o.request)},
         {"steps", steps},
         {"tx", o.tx_id.empty() ? json(nullptr) : json(o.tx_id)},
         {"tx_status", o.tx_status ? json(xchain::to_string(*o.tx_status)) : json(nullptr)},
         {"decision", o.decision ? json(*o.decision) : json(nullptr)},
         {"p_fund", o.p_fund ? json(*o.p_fund) : json(nullptr)},
         {"evidence", o.evidence.to_json()},
         {"posteriors", o.posteriors},
         {"settlement", o.settlement ? json(*o.settlement) : json(nullptr)},
         {"crashed", o.crashed},
         {"error", o.error ? json(to_string(*o.error)) : json(nullptr)},
         {"message", o.message}};
  return j;
}

FlowOutcome run_financing_sequence(ledger::World& world, xchain::Journal& journal,
                                   std::shared_ptr<const finance::ModelSet> models, const FinancingRequest& request,
                                   const Fixtures& fixtures, const FlowOptions& options) {
  if (options.fault.step && (*options.fault.step < 1 || *options.fault.step > 12))
    throw Error(ErrorCode::ParseError, "fault step must lie in 1..12");
  if (options.fault.step && options.fault.phase)
    throw Error(ErrorCode::ParseError, "at most one crash point per run");

  FlowOutcome out;
  out.request = request;
  for (int i = 0; i < 12; ++i) out.steps[i] = StepRecord{i + 1, kStepTitles[i], StepStatus::Pending, {}};
  auto done = [&](int step, std::string detail) {
    out.steps[step - 1].status = StepStatus::Done;
    out.steps[step - 1].detail = std::move(detail);
  };
  auto fail_at = [&](int step, std::string detail) {
    for (int i = 0; i < step - 1; ++i) out.steps[i].status = StepStatus::Done;
    out.steps[step - 1].status = StepStatus::Failed;
    out.steps[step - 1].detail = std::move(detail);
  };

  auto hooks = std::make_shared<Hooks>();
  hooks->models = std::move(models);
  hooks->fixtures = fixtures;
  hooks->threshold = options.threshold;
  hooks->financier_decision = options.financier_decision;
  hooks->crash_at_evaluation = options.fault.step == 10;
  register_hooks(world, hooks);

  const auto& supplier = request.supplier;
  const auto& financier = request.financier;
  int current = 0;
  auto begin = [&](int step) {
    current = step;
    if (options.before_step) options.before_step(step, world);
    if (options.fault.step == step && step <= 6) throw SequenceCrash{step};
  };

  xchain::CrosschainTx tx;
  try {
    // Steps 1-3: the countersigned agreement on the buyer-supplier chain.
    begin(1);
    const auto& chain_id = request.agreement_chain;
    std::optional<Address> address = request.agreement_address;
    if (!address) address = find_agreement(world, chain_id, supplier);
    if (address) {
      (void)world.chain(chain_id).contract(*address);
      done(1, "agreement already on chain at " + *address);
    } else {
      const auto& terms = fixtures.agreement;
      if (terms.supplier != supplier)
        throw Error(ErrorCode::ValidationFailed, "fixture agreement names supplier " + terms.supplier);
      const auto group = world.create_privacy_group(chain_id, terms.buyer, {terms.buyer, terms.supplier});
      address = world.deploy_contract(chain_id, ContractKind::SupplyContract, terms.buyer, group);
      SupplyAgreement unsigned_copy = terms;
      unsigned_copy.signatures.clear();
      unsigned_copy.sign(world.keyring(), terms.buyer);
      world.call(chain_id, terms.buyer, *address, "upload_agreement",
                 json{{"agreement", ledger::to_json(unsigned_copy)}});
      done(1, terms.buyer + " deployed " + *address + " on " + chain_id);
    }

    begin(2);
    const auto stored = world.read_state(chain_id, *address, "agreement", supplier);
    if (stored.is_null()) throw Error(ErrorCode::ValidationFailed, "no agreement stored at " + *address);
    auto agreement = ledger::agreement_from_json(stored);
    done(2, "agreement between " + agreement.supplier + " and " + agreement.buyer + " worth " +
                std::to_string(agreement.value()));

    begin(3);
    std::string detail;
    if (!agreement.countersigned(world.keyring())) {
      agreement.sign(world.keyring(), supplier);
      world.call(chain_id, supplier, *address, "upload_agreement", json{{"agreement", ledger::to_json(agreement)}});
      detail = "countersigned by " + supplier;
    } else {
      detail = "already countersigned";
    }
    if (world.read_state(chain_id, *address, ledger::grant_key(financier, "agreement"), supplier).is_null())
      world.call(chain_id, supplier, *address, "grant_read", json{{"reader", financier}, {"key", "agreement"}});
    done(3, detail + "; read grant for " + financier);

    begin(4);
    const std::set<PartyId> pair{supplier, financier};
    if (!world.has_chain(kSupplierFinancierChain)) {
      world.create_chain(kSupplierFinancierChain, pair);
      done(4, std::string("created ") + kSupplierFinancierChain);
    } else if (world.chain(kSupplierFinancierChain).members() != pair) {
      throw Error(ErrorCode::ValidationFailed,
                  std::string(kSupplierFinancierChain) + " exists with a different membership");
    } else {
      done(4, std::string(kSupplierFinancierChain) + " already established");
    }

    begin(5);
    auto t3_contracts = world.find_contracts(kSupplierFinancierChain, ContractKind::FinanceContract, financier);
    const Address t3_address = t3_contracts.empty()
                                   ? world.deploy_contract(kSupplierFinancierChain, ContractKind::FinanceContract,
                                                           financier)
                                   : t3_contracts.front();
    auto fin_contracts = world.find_contracts(kFinancierChain, ContractKind::FinanceContract, financier);
    const Address fin_address =
        fin_contracts.empty() ? world.deploy_contract(kFinancierChain, ContractKind::FinanceContract, financier)
                              : fin_contracts.front();
    done(5, "finance contract " + t3_address);

    begin(6);
    const json request_doc = to_json(request);
    tx = xchain::plan(world, next_tx_id(journal), supplier,
                      {xchain::ReadStep{chain_id, *address, "agreement", financier},
                       xchain::CallStep{kSupplierFinancierChain, t3_address, "validate_request",
                                        json{{"request", request_doc}}, supplier},
                       xchain::CallStep{kFinancierChain, fin_address, "process_request",
                                        json{{"request", request_doc}}, financier},
                       xchain::TransferStep{kFinancierChain, kSupplierFinancierChain, financier, financier, 0, 2},
                       xchain::TransferStep{kSupplierFinancierChain, kSupplierFinancierChain, financier, supplier, 0,
                                            2}});
    out.tx_id = tx.id;
    done(6, "submitted " + tx.id);
    begin(7);
  } catch (const SequenceCrash& c) {
    out.crashed = true;
    out.message = "crash injected before step " + std::to_string(c.step);
    fail_at(c.step, out.message);
    return out;
  } catch (const Error& e) {
    out.error = e.code();
    out.message = e.what();
    fail_at(current, e.what());
    return out;
  }

  xchain::FaultPlan plan;
  plan.phase = options.fault.phase;
  if (options.fault.step && *options.fault.step >= 7 && *options.fault.step != 10) {
    const auto it = std::find(kTxStepToSequence.begin(), kTxStepToSequence.end(), *options.fault.step);
    plan.step = static_cast<std::size_t>(it - kTxStepToSequence.begin());
  }

  xchain::Coordinator coordinator(world, journal);
  xchain::ExecutionReport report;
  try {
    report = coordinator.execute(tx, plan);
  } catch (const xchain::CoordinatorCrash& crash) {
    out.crashed = true;
    out.message = crash.what();
    report.tx_id = tx.id;
    report.status = xchain::TxStatus::Ignored;
    for (const auto& [id, status] : coordinator.recover())
      if (id == tx.id) report.status = status;
    tx.status = report.status;
  }
  out.tx_status = report.status;
  out.evidence = hooks->evidence;
  out.posteriors = hooks->posteriors;
  out.p_fund = hooks->p_fund;
  out.decision = hooks->decision;

  if (report.status == xchain::TxStatus::Committed) {
    for (int s = 7; s <= 12; ++s) done(s, "");
    out.settlement = hooks->funded_amount;
    out.steps[9].detail = std::string("decision ") + out.decision.value_or("-");
    out.steps[11].detail = "paid " + std::to_string(out.settlement.value_or(0)) + " to " + supplier;
    return out;
  }

  int failed = 7;
  if (out.crashed) {
    const auto staged = staged_steps(journal, tx.id);
    if (staged >= kTxStepToSequence.size()) {
      failed = 12;
    } else {
      failed = kTxStepToSequence[staged];
      if (staged == 2 && hooks->reached_handoff) failed = 10;
    }
    fail_at(failed, out.message + "; transaction rolled back");
    return out;
  }

  out.error = report.error;
  out.message = report.message;
  if (report.failed_step) {
    failed = kTxStepToSequence[*report.failed_step];
    if (*report.failed_step == 2 && hooks->reached_evaluation)
      failed = report.error == ErrorCode::FundingDeclined ? 11 : 10;
  }
  if (failed == 11 && report.error == ErrorCode::FundingDeclined) out.steps[9].detail = "decision DoNotFund";
  fail_at(failed, report.message);
  return out;
}

}  // namespace chainvoice::flow
