#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "chainvoice/bn/inference.hpp"
#include "chainvoice/bn/io.hpp"
#include "chainvoice/error.hpp"
#include "support.hpp"

using namespace chainvoice;
using namespace chainvoice::bn;

namespace {

NodeSpec node(std::string id, std::vector<std::string> parents, std::vector<std::vector<double>> rows,
              std::vector<std::string> states = {"T", "F"}) {
  return NodeSpec{id, id, std::move(states), std::move(parents), Cpt{std::move(rows)}};
}

NetworkSpec chain_ab() {
  return NetworkSpec{{node("A", {}, {{0.3, 0.7}}), node("B", {"A"}, {{0.9, 0.1}, {0.2, 0.8}})}};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::ParseError;
}

double total(const Posterior& p) {
  double s = 0;
  for (const auto& [_, v] : p.distribution) s += v;
  return s;
}

// Supplier-profile structure with the derived CPT.
NetworkSpec supplier_profile() {
  return NetworkSpec{{node("Tier1", {}, {{0.5, 0.5}}, {"Yes", "No"}),
                      node("GWaL", {}, {{0.5, 0.5}}, {"Yes", "No"}),
                      node("SupplierProfile", {"Tier1", "GWaL"},
                           {{0.99, 0.01}, {0.40, 0.60}, {0.60, 0.40}, {0.01, 0.99}}, {"LowRisk", "HighRisk"})}};
}

NetworkSpec financial_incentive() {
  return NetworkSpec{{node("CreditRating", {}, {{0.5, 0.5}}, {"Passed", "Failed"}),
                      node("FinancialRewards", {}, {{0.5, 0.5}}, {"Additional", "Standard"}),
                      node("FinancialIncentive", {"CreditRating", "FinancialRewards"},
                           {{0.99, 0.01}, {0.80, 0.20}, {0.20, 0.80}, {0.01, 0.99}},
                           {"Compelling", "NotCompelling"})}};
}

}  // namespace

TEST_CASE("two-node chain builds with topological order A, B") {
  const auto net = build_network(chain_ab());
  REQUIRE(net.size() == 2);
  CHECK(net.node(net.topological_order()[0]).id == "A");
  CHECK(net.node(net.topological_order()[1]).id == "B");
}

TEST_CASE("build_network rejects malformed specs") {
  SUBCASE("two-edge cycle") {
    NetworkSpec s{{node("A", {"B"}, {{0.5, 0.5}, {0.5, 0.5}}), node("B", {"A"}, {{0.5, 0.5}, {0.5, 0.5}})}};
    CHECK(code_of([&] { build_network(s); }) == ErrorCode::CycleDetected);
  }
  SUBCASE("row count mismatch") {
    NetworkSpec s{{node("A", {}, {{0.5, 0.5}}), node("B", {"A"}, {{0.5, 0.5}})}};
    CHECK(code_of([&] { build_network(s); }) == ErrorCode::CptShapeMismatch);
  }
  SUBCASE("column count mismatch") {
    NetworkSpec s{{node("A", {}, {{0.2, 0.3, 0.5}})}};
    CHECK(code_of([&] { build_network(s); }) == ErrorCode::CptShapeMismatch);
  }
  SUBCASE("row not normalized names node and row") {
    NetworkSpec s{{node("A", {}, {{0.5, 0.5}}), node("B", {"A"}, {{0.5, 0.5}, {0.5, 0.6}})}};
    try {
      build_network(s);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::CptRowNotNormalized);
      CHECK(std::string(e.what()).find("B") != std::string::npos);
      CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
  }
  SUBCASE("negative entry") {
    NetworkSpec s{{node("A", {}, {{1.2, -0.2}})}};
    CHECK(code_of([&] { build_network(s); }) != ErrorCode::ParseError);
  }
  SUBCASE("duplicate id") {
    NetworkSpec s{{node("A", {}, {{0.5, 0.5}}), node("A", {}, {{0.5, 0.5}})}};
    CHECK(code_of([&] { build_network(s); }) == ErrorCode::InvalidSpec);
  }
  SUBCASE("dangling parent") {
    NetworkSpec s{{node("A", {"Z"}, {{0.5, 0.5}, {0.5, 0.5}})}};
    CHECK(code_of([&] { build_network(s); }) == ErrorCode::InvalidSpec);
  }
  SUBCASE("single state") {
    NetworkSpec s{{node("A", {}, {{1.0}}, {"only"})}};
    CHECK(code_of([&] { build_network(s); }) == ErrorCode::InvalidSpec);
  }
}

TEST_CASE("supplier profile network has three nodes") {
  CHECK(build_network(supplier_profile()).size() == 3);
}

TEST_CASE("single node prior passes through") {
  const auto net = build_network(NetworkSpec{{node("A", {}, {{0.3, 0.7}})}});
  const auto p = query(net, {}, "A");
  CHECK(p.at("T") == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(p.at("F") == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("financial incentive: passed credit and additional rewards gives 0.99 compelling") {
  const auto net = build_network(financial_incentive());
  const auto p = query(net, Evidence{{{"CreditRating", "Passed"}, {"FinancialRewards", "Additional"}}},
                       "FinancialIncentive");
  CHECK(std::abs(p.at("Compelling") - 0.99) <= 0.01);
}

TEST_CASE("supplier profile: GWaL yes gives 0.795 low risk by enumeration") {
  const auto net = build_network(supplier_profile());
  const auto p = enumerate_joint(net, Evidence{{{"GWaL", "Yes"}}}, "SupplierProfile");
  CHECK(std::abs(p.at("LowRisk") - 0.795) <= 0.01);
  CHECK(query(net, Evidence{{{"GWaL", "Yes"}}}, "SupplierProfile").at("LowRisk") ==
        doctest::Approx(p.at("LowRisk")).epsilon(1e-12));
}

TEST_CASE("evidence on the target gives a point mass") {
  const auto net = build_network(NetworkSpec{{node("A", {}, {{0.3, 0.7}})}});
  for (auto fn : {&query, &enumerate_joint}) {
    const auto p = fn(net, Evidence{{{"A", "F"}}}, "A");
    CHECK(p.at("F") == 1.0);
    CHECK(p.at("T") == 0.0);
  }
}

TEST_CASE("query errors") {
  const auto net = build_network(chain_ab());
  CHECK(code_of([&] { query(net, {}, "Z"); }) == ErrorCode::UnknownNode);
  CHECK(code_of([&] { query(net, Evidence{{{"Z", "T"}}}, "A"); }) == ErrorCode::UnknownNode);
  CHECK(code_of([&] { query(net, Evidence{{{"A", "maybe"}}}, "B"); }) == ErrorCode::UnknownState);

  const auto det = build_network(NetworkSpec{{node("A", {}, {{1.0, 0.0}}), node("B", {"A"}, {{1.0, 0.0}, {0.0, 1.0}})}});
  CHECK(code_of([&] { query(det, Evidence{{{"B", "F"}}}, "A"); }) == ErrorCode::ImpossibleEvidence);
  CHECK(code_of([&] { enumerate_joint(det, Evidence{{{"B", "F"}}}, "A"); }) == ErrorCode::ImpossibleEvidence);
}

TEST_CASE("enumerate_joint refuses state spaces above 2^20") {
  testing::NetworkGen gen(7);
  gen.max_parents = 1;
  const auto net = build_network(gen.spec(21));
  CHECK(code_of([&] { enumerate_joint(net, {}, "n0"); }) == ErrorCode::StateSpaceTooLarge);
  CHECK_NOTHROW(query(net, {}, "n20"));
}

TEST_CASE("property: variable elimination equals enumeration on random 6-node nets, all evidence") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    testing::NetworkGen gen(seed);
    gen.ternary_share = seed % 3 == 0 ? 0.3 : 0.0;
    const auto net = build_network(gen.spec(6));
    std::vector<std::size_t> all(net.size());
    std::iota(all.begin(), all.end(), 0);
    for (const auto& ev : testing::all_evidence(net, all)) {
      for (std::size_t t = 0; t < net.size(); ++t) {
        const auto& target = net.node(t).id;
        const auto a = query(net, ev, target);
        const auto b = enumerate_joint(net, ev, target);
        REQUIRE(a.distribution.size() == b.distribution.size());
        for (std::size_t s = 0; s < a.distribution.size(); ++s)
          REQUIRE(std::abs(a.distribution[s].second - b.distribution[s].second) <= 1e-9);
        REQUIRE(std::abs(total(a) - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("property: variable elimination equals enumeration on random 12-node nets") {
  for (std::uint64_t seed = 100; seed < 106; ++seed) {
    testing::NetworkGen gen(seed);
    const auto net = build_network(gen.spec(12));
    for (int trial = 0; trial < 60; ++trial) {
      Evidence ev;
      for (std::size_t n = 0; n < net.size(); ++n) {
        const auto pick = gen.below(3);
        if (pick < 2) continue;
        ev.findings[net.node(n).id] = net.node(n).states[gen.below(net.cardinality(n))];
      }
      const auto& target = net.node(gen.below(net.size())).id;
      const auto a = query(net, ev, target);
      const auto b = enumerate_joint(net, ev, target);
      for (std::size_t s = 0; s < a.distribution.size(); ++s)
        REQUIRE(std::abs(a.distribution[s].second - b.distribution[s].second) <= 1e-9);
    }
  }
}

TEST_CASE("property: posteriors do not depend on declaration order") {
  for (std::uint64_t seed = 40; seed < 50; ++seed) {
    testing::NetworkGen gen(seed);
    auto spec = gen.spec(8);
    const auto net = build_network(spec);
    auto shuffled = spec;
    std::shuffle(shuffled.nodes.begin(), shuffled.nodes.end(), gen.rng);
    const auto other = build_network(shuffled);
    std::vector<std::size_t> some{0, 3, 5};
    for (const auto& ev : testing::all_evidence(net, some)) {
      for (std::size_t t = 0; t < net.size(); ++t) {
        const auto& id = net.node(t).id;
        const auto a = query(net, ev, id);
        const auto b = query(other, ev, id);
        for (std::size_t s = 0; s < a.distribution.size(); ++s)
          REQUIRE(std::abs(a.distribution[s].second - b.distribution[s].second) <= 1e-12);
      }
    }
  }
}

TEST_CASE("network documents round-trip") {
  const auto spec = supplier_profile();
  const auto doc = to_json(spec);
  CHECK(network_from_json(doc) == spec);
  CHECK(doc.at("nodes").at(2).at("parents") == nlohmann::json({"Tier1", "GWaL"}));
  CHECK(code_of([] { network_from_json(nlohmann::json{{"nodes", 3}}); }) == ErrorCode::ParseError);
}
