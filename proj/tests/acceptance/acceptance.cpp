// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "chainvoice/bn/inference.hpp"
#include "chainvoice/error.hpp"
#include "chainvoice/finance/fit.hpp"
#include "chainvoice/finance/model.hpp"
#include "chainvoice/finance/scenario.hpp"
#include "chainvoice/flow/financing.hpp"
#include "chainvoice/gateway/cli.hpp"
#include "support.hpp"

using namespace chainvoice;
using namespace chainvoice::finance;
using bn::Evidence;
namespace fs = std::filesystem;

namespace {

constexpr double kPosteriorTol = 0.01;
constexpr double kUniformTol = 1e-6;
constexpr double kPinnedRowTol = 0.001;
constexpr double kOracleTol = 1e-9;
constexpr double kSubmodelSeconds = 1.0;
constexpr double kFitSeconds = 30.0;
constexpr double kOracleSeconds = 10.0;
constexpr double kSweepSeconds = 30.0;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [miss] " << what;
    }
  }
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct Expectation {
  Evidence evidence;
  const char* node;
  const char* state;
  double value;
  double tol;
};

void check_posteriors(Verdict& v, const bn::Network& net, const std::vector<Expectation>& rows) {
  for (const auto& e : rows) {
    const double p = bn::query(net, e.evidence, e.node).at(e.state);
    v.require(std::abs(p - e.value) <= e.tol, std::string(e.node) + "=" + e.state + " got " + fmt(p));
    v.detail << " " << fmt(p);
  }
}

Verdict supplier_profile() {
  Verdict v;
  Timer t;
  const auto net = build_model_set(load_models(testing::models_dir())).supplier_profile;
  using namespace ids;
  const std::vector<Expectation> rows{
      {{}, kSupplierProfile, states::kLowRisk, 0.500, kPosteriorTol},
      {{{{kGWaL, states::kYes}}}, kSupplierProfile, states::kLowRisk, 0.795, kPosteriorTol},
      {{{{kTier1, states::kYes}}}, kSupplierProfile, states::kLowRisk, 0.695, kPosteriorTol},
      {{{{kTier1, states::kYes}, {kGWaL, states::kYes}}}, kSupplierProfile, states::kLowRisk, 0.990, kPosteriorTol},
  };
  check_posteriors(v, net, rows);
  const double s = t.seconds();
  v.require(s < kSubmodelSeconds, "runtime " + fmt(s) + "s");
  v.detail << " in " << fmt(s) << "s";
  return v;
}

Verdict financial_incentive() {
  Verdict v;
  Timer t;
  const auto net = build_model_set(load_models(testing::models_dir())).financial_incentive;
  using namespace ids;
  const std::vector<Expectation> rows{
      {{}, kFinancialIncentive, states::kCompelling, 0.500, kPosteriorTol},
      {{{{kFinancialRewards, states::kAdditional}}}, kFinancialIncentive, states::kCompelling, 0.600, kPosteriorTol},
      {{{{kCreditRating, states::kPassed}}}, kFinancialIncentive, states::kCompelling, 0.900, kPosteriorTol},
      {{{{kCreditRating, states::kFailed}, {kFinancialRewards, states::kAdditional}}},
       kFinancialIncentive, states::kCompelling, 0.200, kPosteriorTol},
      {{{{kCreditRating, states::kPassed}, {kFinancialRewards, states::kStandard}}},
       kFinancialIncentive, states::kCompelling, 0.800, kPosteriorTol},
      {{{{kCreditRating, states::kPassed}, {kFinancialRewards, states::kAdditional}}},
       kFinancialIncentive, states::kCompelling, 0.990, kPosteriorTol},
  };
  check_posteriors(v, net, rows);
  const double s = t.seconds();
  v.require(s < kSubmodelSeconds, "runtime " + fmt(s) + "s");
  v.detail << " in " << fmt(s) << "s";
  return v;
}

Verdict overall() {
  Verdict v;
  Timer t;
  const auto scenarios = load_scenarios(testing::data_dir() / "scenarios.json");
  const auto fit = fit_overall_cpts(derive_submodel_cpts(scenarios), overall_fit_targets(scenarios));
  const double s = t.seconds();
  const auto net = bn::build_network(fit.overall);

  for (const char* node : {ids::kPerceptionOfRisk, ids::kDecision, ids::kStability}) {
    const auto p = bn::query(net, {}, node);
    for (const auto& [state, value] : p.distribution)
      v.require(std::abs(value - 0.5) <= kUniformTol, std::string(node) + " prior " + fmt(value));
  }
  const auto gwal = flat_id(ids::kSupplierProfileInstance, ids::kGWaL);
  const auto tier1 = flat_id(ids::kSupplierProfileInstance, ids::kTier1);
  const auto credit = flat_id(ids::kFinancialIncentiveInstance, ids::kCreditRating);
  const std::vector<Expectation> rows{
      {{{{gwal, states::kYes}}}, ids::kPerceptionOfRisk, states::kAcceptableRisk, 0.618, kPosteriorTol},
      {{{{gwal, states::kYes}, {credit, states::kPassed}}}, ids::kPerceptionOfRisk, states::kAcceptableRisk, 0.857,
       kPosteriorTol},
      {{{{gwal, states::kYes}, {credit, states::kPassed}, {tier1, states::kNo}, {ids::kLowerTierFunded, states::kYes}}},
       ids::kDecision, states::kFund, 0.774, kPosteriorTol},
      {{{{gwal, states::kYes}, {credit, states::kPassed}, {tier1, states::kNo}, {ids::kLowerTierFunded, states::kYes}}},
       ids::kStability, states::kStable, 0.768, kPosteriorTol},
      {{{{ids::kDecision, states::kDoNotFund}, {ids::kLowerTierFunded, states::kYes}}}, ids::kStability,
       states::kUnstable, 0.990, kPinnedRowTol},
  };
  check_posteriors(v, net, rows);
  v.require(s < kFitSeconds, "fit " + fmt(s) + "s");
  v.detail << " fit in " << fmt(s) << "s";
  return v;
}

Verdict oracle_equivalence() {
  Verdict v;
  Timer t;
  const auto net = build_model_set(load_models(testing::models_dir())).overall;
  // Inputs set by the financing flow, plus the financier's decision.
  const std::vector<std::string> observable{
      flat_id(ids::kSupplierProfileInstance, ids::kTier1),
      flat_id(ids::kSupplierProfileInstance, ids::kGWaL),
      flat_id(ids::kFinancialIncentiveInstance, ids::kCreditRating),
      flat_id(ids::kFinancialIncentiveInstance, ids::kFinancialRewards),
      ids::kLowerTierFunded,
      ids::kDecision,
  };
  std::vector<std::size_t> indices;
  for (const auto& id : observable) indices.push_back(net.require_index(id));
  std::size_t assignments = 0, compared = 0;
  double worst = 0;
  for (const auto& ev : testing::all_evidence(net, indices)) {
    ++assignments;
    for (std::size_t n = 0; n < net.size(); ++n) {
      const auto& id = net.node(n).id;
      if (ev.contains(id)) continue;
      const auto ve = bn::query(net, ev, id);
      const auto oracle = bn::enumerate_joint(net, ev, id);
      for (std::size_t s = 0; s < ve.distribution.size(); ++s) {
        worst = std::max(worst, std::abs(ve.distribution[s].second - oracle.distribution[s].second));
        ++compared;
      }
    }
  }
  const double s = t.seconds();
  v.require(worst <= kOracleTol, "max diff " + std::to_string(worst));
  v.require(assignments == 729, "assignments " + std::to_string(assignments));
  v.require(s < kOracleSeconds, "runtime " + fmt(s) + "s");
  v.detail << " " << assignments << " assignments, " << compared << " probabilities, max diff " << worst << " in "
           << fmt(s) << "s";
  return v;
}

// Shared fixture for the ledger criteria.
struct FlowWorld {
  ledger::WorldConfig config = ledger::load_world_config(testing::data_dir() / "world.json");
  flow::FinancingRequest request = flow::load_request(testing::data_dir() / "request.json");
  flow::Fixtures fixtures = flow::load_fixtures(testing::data_dir() / "fixtures.json");
  std::shared_ptr<const ModelSet> models =
      std::make_shared<const ModelSet>(build_model_set(load_models(testing::models_dir())));
};

struct FlowRun {
  ledger::World world;
  xchain::Journal journal;
  flow::FlowOutcome outcome;
  std::map<int, std::string> before;
};

FlowRun run_flow(const FlowWorld& fw, flow::FlowOptions options, const std::string& seed = "acceptance") {
  FlowRun r{ledger::World::bootstrap(fw.config, seed), {}, {}, {}};
  options.before_step = [&r](int step, const ledger::World& w) { r.before[step] = w.export_string(); };
  r.outcome = flow::run_financing_sequence(r.world, r.journal, fw.models, fw.request, fw.fixtures, options);
  return r;
}

std::vector<std::pair<std::string, flow::FlowFault>> crash_points() {
  std::vector<std::pair<std::string, flow::FlowFault>> out;
  flow::FlowFault f;
  f.phase = xchain::FaultPhase::Lock;
  out.emplace_back("lock", f);
  f.phase = xchain::FaultPhase::Stage;
  out.emplace_back("stage", f);
  for (int s = 1; s <= 12; ++s) {
    flow::FlowFault g;
    g.step = s;
    out.emplace_back("step " + std::to_string(s), g);
  }
  f.phase = xchain::FaultPhase::Commit;
  out.emplace_back("commit", f);
  return out;
}

Verdict atomicity(const FlowWorld& fw) {
  Verdict v;
  Timer t;
  const auto clean = run_flow(fw, {});
  v.require(clean.outcome.tx_status == xchain::TxStatus::Committed, "clean run not committed");
  const auto committed = clean.world.export_string();
  const auto pre_tx = clean.before.at(7);
  int points = 0, rolled_back = 0, rolled_forward = 0;
  for (const auto& [name, fault] : crash_points()) {
    flow::FlowOptions o;
    o.fault = fault;
    const auto r = run_flow(fw, o);
    const auto after = r.world.export_string();
    // Steps 1-6 crash before the transaction exists; their pre-transaction
    // state is the export just before the crashing step.
    const auto& baseline = fault.step && *fault.step <= 6 ? r.before.at(*fault.step) : pre_tx;
    const bool back = after == baseline;
    const bool forward = after == committed;
    v.require(back || forward, name + " export matches neither");
    v.require(!r.world.any_lock_held(), name + " left locks");
    rolled_back += back;
    rolled_forward += forward;
    ++points;
  }
  const double s = t.seconds();
  v.require(points == 15, "crash points " + std::to_string(points));
  v.require(s < kSweepSeconds, "sweep " + fmt(s) + "s");
  v.detail << " " << points << " crash points, " << rolled_back << " rolled back, " << rolled_forward
           << " committed, no locks, in " << fmt(s) << "s";
  return v;
}

bool throws_code(const std::function<void()>& fn, ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

Verdict privacy(const FlowWorld& fw) {
  Verdict v;
  const auto bootstrapped = ledger::World::bootstrap(fw.config, "acceptance");
  const auto funded = run_flow(fw, {});
  int attempts = 0, denied = 0;
  for (const auto* w : {&bootstrapped, &funded.world}) {
    for (const auto& [chain_id, chain] : w->chains()) {
      for (const auto& [address, contract] : chain.contracts()) {
        const auto& group = chain.group(contract.privacy_group).members;
        for (const auto& party : w->parties()) {
          if (group.count(party.id)) continue;
          ++attempts;
          const bool ok = throws_code([&] { w->read_state(chain_id, address, "item", party.id); },
                                      ErrorCode::PrivacyViolation);
          denied += ok;
          v.require(ok, party.id + " read " + chain_id + "/" + address);
        }
      }
    }
  }
  // Eric against the countersigned Fran-Reginald agreement.
  const auto& t2t3 = funded.world.chain("T2T3");
  int agreements = 0;
  for (const auto& [address, contract] : t2t3.contracts()) {
    if (!contract.storage.count("agreement")) continue;
    const auto& group = t2t3.group(contract.privacy_group).members;
    if (!group.count("FarmerFran") || !group.count("Reginald")) continue;
    ++agreements;
    v.require(throws_code([&] { funded.world.read_state("T2T3", address, "agreement", "FarmerEric"); },
                          ErrorCode::PrivacyViolation),
              "Eric read the agreement");
  }
  v.require(agreements == 1, "agreements found " + std::to_string(agreements));
  v.require(throws_code([&] { t2t3.log_view("FarmerEric"); }, ErrorCode::PrivacyViolation), "Eric viewed T2T3 log");
  v.require(attempts > 0 && denied == attempts, "denied " + std::to_string(denied));
  v.detail << " " << denied << "/" << attempts << " non-member reads denied, Eric blocked";
  return v;
}

Verdict conservation(const FlowWorld& fw) {
  Verdict v;
  const auto genesis = ledger::World::bootstrap(fw.config, "acceptance").total_balance();
  std::vector<flow::FlowOptions> variants(1);
  for (const auto& [name, fault] : crash_points()) {
    flow::FlowOptions o;
    o.fault = fault;
    variants.push_back(o);
  }
  for (bool d : {true, false}) {
    flow::FlowOptions o;
    o.financier_decision = d;
    variants.push_back(o);
  }
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto r = run_flow(fw, variants[i]);
    v.require(r.world.total_balance() == genesis, "run " + std::to_string(i));
  }
  v.detail << " " << variants.size() << " runs, total " << genesis;
  return v;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return out;
}

Verdict determinism() {
  Verdict v;
  std::size_t files = 0;
  for (const auto& fault : {flow::FlowFault{}, flow::FlowFault{std::nullopt, xchain::FaultPhase::Commit}}) {
    std::map<std::string, std::string> trees[2];
    for (int i = 0; i < 2; ++i) {
      gateway::RunConfig c;
      c.world_file = testing::data_dir() / "world.json";
      c.request_file = testing::data_dir() / "request.json";
      c.fixtures_file = testing::data_dir() / "fixtures.json";
      c.models_dir = testing::models_dir();
      c.output_dir = testing::scratch_dir("acceptance-determinism-" + std::to_string(i));
      c.fault = fault;
      gateway::run_simulation(c);
      trees[i] = read_tree(c.output_dir);
    }
    v.require(trees[0] == trees[1], "output trees differ");
    v.require(trees[0].count("journal.jsonl") && !trees[0]["journal.jsonl"].empty(), "journal missing");
    v.require(trees[0].count("ledger/T3Fin.jsonl") != 0, "ledger export missing");
    files += trees[0].size();
  }
  v.detail << " " << files << " files identical across two runs each of clean and commit-crash";
  return v;
}

}  // namespace

int main() {
  using Criterion = std::pair<const char*, std::function<Verdict()>>;
  std::unique_ptr<FlowWorld> fw;
  auto flow_world = [&]() -> const FlowWorld& {
    if (!fw) fw = std::make_unique<FlowWorld>();
    return *fw;
  };
  const std::vector<Criterion> criteria{
      {"posterior reproduction: supplier profile", supplier_profile},
      {"posterior reproduction: financial incentive", financial_incentive},
      {"posterior reproduction: overall model", overall},
      {"oracle equivalence", oracle_equivalence},
      {"atomicity", [&] { return atomicity(flow_world()); }},
      {"privacy", [&] { return privacy(flow_world()); }},
      {"conservation", [&] { return conservation(flow_world()); }},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " threw: " << e.what();
    }
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ":" << v.detail.str() << "\n";
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
