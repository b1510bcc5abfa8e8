#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chainvoice/bn/io.hpp"
#include "chainvoice/error.hpp"
#include "chainvoice/finance/fit.hpp"
#include "chainvoice/finance/model.hpp"
#include "chainvoice/finance/scenario.hpp"
#include "support.hpp"

using namespace chainvoice;
using namespace chainvoice::finance;
using bn::Evidence;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::ParseError;
}

const std::vector<ScenarioDef>& scenarios() {
  static const auto s = load_scenarios(testing::data_dir() / "scenarios.json");
  return s;
}

const ModelSet& fitted() {
  static const auto m = build_model_set(load_models(testing::models_dir()));
  return m;
}

std::vector<double> first_column(const bn::Cpt& cpt) {
  std::vector<double> out;
  for (const auto& row : cpt.rows) out.push_back(row.front());
  return out;
}

}  // namespace

TEST_CASE("fixture lists the fifteen published scenarios") {
  CHECK(scenarios().size() == 15);
  std::size_t targets = 0;
  for (const auto& s : scenarios()) targets += s.targets.size();
  CHECK(targets == 18);
}

TEST_CASE("sub-model rows follow from the linear solve") {
  const auto cpts = derive_submodel_cpts(scenarios());
  const std::vector<double> profile{0.99, 0.40, 0.60, 0.01};
  const std::vector<double> incentive{0.99, 0.80, 0.20, 0.01};
  const auto p = first_column(cpts.supplier_profile);
  const auto f = first_column(cpts.financial_incentive);
  REQUIRE(p.size() == 4);
  REQUIRE(f.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(p[i] == doctest::Approx(profile[i]).epsilon(1e-12));
    CHECK(f[i] == doctest::Approx(incentive[i]).epsilon(1e-12));
  }
  // Grand-mean closure, the remaining row from the other three.
  CHECK(4 * 0.5 - 0.99 - 0.80 - 0.20 == doctest::Approx(f[3]).epsilon(1e-12));
  CHECK(4 * 0.5 - 0.99 - 0.60 - 0.40 == doctest::Approx(p[3]).epsilon(1e-12));
}

TEST_CASE("derived sub-models reproduce every sub-model scenario by enumeration") {
  const auto cpts = derive_submodel_cpts(scenarios());
  const auto profile = bn::build_network(supplier_profile_class(cpts.supplier_profile).spec);
  const auto incentive = bn::build_network(financial_incentive_class(cpts.financial_incentive).spec);
  int checked = 0;
  for (const auto& s : scenarios()) {
    if (s.model == kOverallModel) continue;
    const auto& net = s.model == kSupplierProfileModel ? profile : incentive;
    for (const auto& t : s.targets) {
      const double p = bn::enumerate_joint(net, s.evidence, t.node).at(t.state);
      CHECK_MESSAGE(std::abs(p - t.expected) <= t.tolerance, s.name);
      ++checked;
    }
  }
  CHECK(checked == 10);
}

TEST_CASE("additional rewards alone gives 0.595, accepted against 0.60") {
  const double p = bn::query(fitted().financial_incentive, Evidence{{{ids::kFinancialRewards, states::kAdditional}}},
                             ids::kFinancialIncentive)
                       .at(states::kCompelling);
  CHECK(p == doctest::Approx(0.595).epsilon(1e-12));
  CHECK(std::abs(p - 0.60) <= 0.01);
}

TEST_CASE("a transcription error in the targets is reported") {
  auto broken = scenarios();
  for (auto& s : broken)
    if (s.name == "profile/tier1") s.targets[0].expected = 0.9;
  CHECK(code_of([&] { derive_submodel_cpts(broken); }) == ErrorCode::InconsistentTargets);
}

TEST_CASE("solve_pinned_rows pins single unknowns and checks the rest") {
  const std::vector<RowEquation> eqs{
      {{0}, 0.9, "a"}, {{0, 1}, 0.7, "b"}, {{0, 1, 2, 3}, 0.45, "c"}, {{2}, 0.3, "d"}, {{2, 3}, 0.2, "e"}};
  const auto rows = solve_pinned_rows(4, eqs, 1e-9, "X");
  CHECK(rows[0] == doctest::Approx(0.9));
  CHECK(rows[1] == doctest::Approx(0.5));
  CHECK(rows[2] == doctest::Approx(0.3));
  CHECK(rows[3] == doctest::Approx(0.1));
  CHECK(code_of([&] { solve_pinned_rows(4, {{{0}, 0.9, "a"}}, 0.01, "X"); }) == ErrorCode::InconsistentTargets);
}

TEST_CASE("overall fit meets every target and is deterministic") {
  const auto cpts = derive_submodel_cpts(scenarios());
  const auto targets = overall_fit_targets(scenarios());
  const auto a = fit_overall_cpts(cpts, targets);
  const auto b = fit_overall_cpts(cpts, targets);
  CHECK(a.max_abs_residual <= 0.01);
  for (const auto& r : a.residuals) CHECK_MESSAGE(std::abs(r.residual) <= r.target.tolerance, r.target.source);
  CHECK(bn::to_json(a.overall) == bn::to_json(b.overall));

  SUBCASE("committed models equal a fresh fit") {
    const auto committed = load_models(testing::models_dir()).overall;
    REQUIRE(committed.nodes.size() == a.overall.nodes.size());
    for (std::size_t n = 0; n < committed.nodes.size(); ++n)
      for (std::size_t r = 0; r < committed.nodes[n].cpt.rows.size(); ++r)
        for (std::size_t s = 0; s < committed.nodes[n].cpt.rows[r].size(); ++s)
          CHECK(committed.nodes[n].cpt.rows[r][s] == doctest::Approx(a.overall.nodes[n].cpt.rows[r][s]).epsilon(1e-9));
  }
  SUBCASE("an unreachable tolerance fails with a residual report") {
    FitOptions tight;
    tight.tol = 1e-6;
    try {
      fit_overall_cpts(cpts, targets, tight);
      FAIL("fit accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::FitFailed);
      CHECK(std::string(e.what()).find("PerceptionOfRisk") != std::string::npos);
    }
  }
}

TEST_CASE("all fifteen scenarios pass on the committed models") {
  for (const auto& s : scenarios()) {
    const auto report = run_scenario(fitted().get(s.model), s);
    CHECK_MESSAGE(report.pass(), s.name);
  }
  CHECK(run_scenario(fitted().supplier_profile, find_scenario(scenarios(), "profile/tier1-gwal")).rows[0].actual ==
        doctest::Approx(0.99));
  CHECK(run_scenario(fitted().financial_incentive, find_scenario(scenarios(), "incentive/failed-additional"))
            .rows[0]
            .actual == doctest::Approx(0.20));
}

TEST_CASE("overall network without evidence is uniform on every reported node") {
  for (const char* node : {ids::kPerceptionOfRisk, ids::kDecision, ids::kStability}) {
    const auto p = bn::query(fitted().overall, {}, node);
    CHECK(std::abs(p.distribution[0].second - 0.5) <= 1e-6);
  }
}

TEST_CASE("scenario lookup and validation errors") {
  CHECK(code_of([] { find_scenario(scenarios(), "nope"); }) == ErrorCode::UnknownScenario);
  CHECK(code_of([] { fitted().get("nope"); }) == ErrorCode::UnknownNode);
  nlohmann::json doc{{"scenarios",
                      {{{"name", "x"},
                        {"model", "overall"},
                        {"evidence", nlohmann::json::object()},
                        {"targets", {{{"node", "Decision"}, {"state", "Fund"}, {"expected", 1.5}}}}}}}};
  CHECK(code_of([&] { scenarios_from_json(doc); }) == ErrorCode::InvalidSpec);
  ScenarioDef bad{"bad", "overall", "", Evidence{{{"Ghost", "Yes"}}}, {{"Decision", "Fund", 0.5, 0.01}}};
  CHECK(code_of([&] { run_scenario(fitted().overall, bad); }) == ErrorCode::UnknownNode);
}

TEST_CASE("property: passed credit never lowers P(Compelling)") {
  const auto& net = fitted().overall;
  const auto credit = flat_id(ids::kFinancialIncentiveInstance, ids::kCreditRating);
  const auto target = flat_id(ids::kFinancialIncentiveInstance, ids::kFinancialIncentive);
  std::vector<std::size_t> others;
  for (std::size_t n = 0; n < net.size(); ++n) {
    const auto& id = net.node(n).id;
    if (id != credit && id != target) others.push_back(n);
  }
  int compared = 0;
  for (const auto& ev : testing::all_evidence(net, others)) {
    double base = 0;
    try {
      base = bn::query(net, ev, target).at(states::kCompelling);
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::ImpossibleEvidence);
      continue;
    }
    auto with = ev;
    with.findings[credit] = states::kPassed;
    try {
      CHECK(bn::query(net, with, target).at(states::kCompelling) >= base - 1e-12);
      ++compared;
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::ImpossibleEvidence);
    }
  }
  CHECK(compared > 1000);
}

TEST_CASE("property: hard evidence on all parents reproduces the CPT row") {
  const auto& net = fitted().overall;
  for (std::size_t n = 0; n < net.size(); ++n) {
    const auto parents = net.parents(n);
    if (parents.empty()) continue;
    std::vector<std::size_t> ps(parents.begin(), parents.end());
    for (const auto& ev : testing::all_evidence(net, ps)) {
      if (ev.findings.size() != ps.size()) continue;
      std::vector<std::size_t> assignment(net.size(), 0);
      for (auto p : ps) assignment[p] = net.state_index(p, ev.findings.at(net.node(p).id));
      const auto& row = net.node(n).cpt.rows[net.cpt_row(n, assignment)];
      const auto post = bn::query(net, ev, net.node(n).id);
      for (std::size_t s = 0; s < row.size(); ++s) CHECK(post.distribution[s].second == doctest::Approx(row[s]).epsilon(1e-12));
    }
  }
  const auto unstable = bn::query(net, Evidence{{{ids::kDecision, states::kDoNotFund}, {ids::kLowerTierFunded, states::kYes}}},
                                  ids::kStability)
                            .at(states::kUnstable);
  CHECK(std::abs(unstable - 0.99) <= 0.001);
}

TEST_CASE("funding threshold sends ties to DoNotFund") {
  CHECK(should_fund(0.5001));
  CHECK_FALSE(should_fund(0.5));
  CHECK_FALSE(should_fund(0.2));
}
