#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "chainvoice/error.hpp"
#include "chainvoice/ledger/world.hpp"
#include "support.hpp"

using namespace chainvoice;
using namespace chainvoice::ledger;
using nlohmann::json;

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

const WorldConfig& table_config() {
  static const auto cfg = load_world_config(testing::data_dir() / "world.json");
  return cfg;
}

World table_world(const std::string& seed = "ledger-test") { return World::bootstrap(table_config(), seed); }

SupplyAgreement fran_reginald() {
  return SupplyAgreement{"FarmerFran", "Reginald", "organic wheat, tonnes", 1200, 10, 60, {}};
}

// Deploys a {Reginald, Fran} supply contract on T2T3 carrying the agreement
// signed by both.
Address countersigned_contract(World& w) {
  const auto group = w.create_privacy_group("T2T3", "Reginald", {"Reginald", "FarmerFran"});
  const auto address = w.deploy_contract("T2T3", ContractKind::SupplyContract, "Reginald", group);
  auto agreement = fran_reginald();
  agreement.sign(w.keyring(), "Reginald");
  w.call("T2T3", "Reginald", address, "upload_agreement", json{{"agreement", to_json(agreement)}});
  agreement.sign(w.keyring(), "FarmerFran");
  w.call("T2T3", "FarmerFran", address, "upload_agreement", json{{"agreement", to_json(agreement)}});
  return address;
}

}  // namespace

TEST_CASE("Ed25519 keys are reproducible from the seed") {
  Keyring a("s"), b("s"), c("t");
  for (auto* k : {&a, &b, &c}) k->add_party("FarmerFran");
  CHECK(a.sign("FarmerFran", "m") == b.sign("FarmerFran", "m"));
  CHECK(a.public_key_hex("FarmerFran") != c.public_key_hex("FarmerFran"));
  CHECK(a.verify("FarmerFran", "m", a.sign("FarmerFran", "m")));
  CHECK_FALSE(a.verify("FarmerFran", "n", a.sign("FarmerFran", "m")));
  CHECK_FALSE(c.verify("FarmerFran", "m", a.sign("FarmerFran", "m")));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("create_chain") {
  World w("seed", {{"FarmerFran", "Fran", 3}, {"FinancierIlze", "Ilze", std::nullopt}});
  const auto& c = w.create_chain("T3Fin", {"FarmerFran", "FinancierIlze"});
  CHECK(c.members().size() == 2);
  CHECK(c.log().size() == 1);
  CHECK(c.verify_log());
  CHECK(code_of([&] { w.create_chain("T3Fin", {"FarmerFran"}); }) == ErrorCode::DuplicateChainId);
  CHECK(code_of([&] { w.create_chain("Empty", {}); }) == ErrorCode::EmptyMembership);
  CHECK(code_of([&] { w.create_chain("X", {"Nobody"}); }) == ErrorCode::NotAMember);
  CHECK(code_of([] { Chain("Y", {"a"}, {{"b", 5}}); }) == ErrorCode::NotAMember);
}

TEST_CASE("bootstrap builds the seven chains with disjoint logs") {
  const auto w = table_world();
  CHECK(w.chains().size() == 7);
  std::set<std::string> digests;
  std::size_t entries = 0;
  for (const auto& [id, c] : w.chains()) {
    CHECK(c.verify_log());
    for (const auto& e : c.log()) digests.insert(e.digest);
    entries += c.log().size();
  }
  CHECK(digests.size() == entries);
  CHECK(w.chain("T3Fin").members() == std::set<PartyId>{"FarmerFran", "FinancierIlze"});
  CHECK(w.chain("Fin").balance("FinancierIlze") == 1000000);
  CHECK(w.tier("FarmerFran") == 3);
}

TEST_CASE("deploy_contract") {
  auto w = table_world();
  const auto before = w.chain("T2T3").next_address();
  const auto a1 = w.deploy_contract("T2T3", ContractKind::SupplyContract, "Reginald");
  CHECK(a1 == before);
  CHECK(a1.size() == 42);
  const auto& c = w.chain("T2T3").contract(a1);
  CHECK(c.owner == "Reginald");
  CHECK(c.storage.empty());
  CHECK_FALSE(c.lock);
  const auto a2 = w.deploy_contract("T3Fin", ContractKind::FinanceContract, "FinancierIlze");
  CHECK(w.chain("T3Fin").contract(a2).kind == ContractKind::FinanceContract);
  CHECK(code_of([&] { w.deploy_contract("Fin", ContractKind::FinanceContract, "FarmerFran"); }) ==
        ErrorCode::NotAMember);
  const auto group = w.create_privacy_group("T2T3", "Reginald", {"Reginald", "FarmerLucy"});
  CHECK(code_of([&] { w.deploy_contract("T2T3", ContractKind::SupplyContract, "FarmerFran", group); }) ==
        ErrorCode::PrivacyViolation);
}

TEST_CASE("countersigned agreement upload") {
  auto w = table_world();
  const auto address = countersigned_contract(w);
  const auto stored = agreement_from_json(w.read_state("T2T3", address, "agreement", "FarmerFran"));
  CHECK(stored.countersigned(w.keyring()));
  CHECK(stored.signed_by(w.keyring(), "Reginald"));
  CHECK(stored.value() == 12000);

  SUBCASE("terms cannot change after upload") {
    auto changed = stored;
    changed.quantity = 5000;
    changed.signatures.clear();
    changed.sign(w.keyring(), "FarmerFran");
    CHECK(code_of([&] {
            w.call("T2T3", "FarmerFran", address, "upload_agreement", json{{"agreement", to_json(changed)}});
          }) == ErrorCode::ValidationFailed);
  }
  SUBCASE("a forged signature is rejected") {
    auto forged = fran_reginald();
    forged.sign(w.keyring(), "FarmerFran");
    forged.signatures.push_back({"Reginald", std::string(128, '0')});
    CHECK(code_of([&] {
            w.call("T2T3", "FarmerFran", address, "upload_agreement", json{{"agreement", to_json(forged)}});
          }) == ErrorCode::BadSignature);
  }
}

TEST_CASE("submit_tx errors leave the log unchanged") {
  auto w = table_world();
  const auto length = w.chain("T1T2").log().size();
  const auto exported = w.export_string();

  CHECK(code_of([&] { w.transfer("T1T2", "ManufacturerMark", "Reginald", 200001); }) ==
        ErrorCode::InsufficientBalance);

  auto tx = w.sign("ManufacturerMark", json{{"type", "transfer"}, {"chain", "T1T2"}, {"to", "Reginald"}, {"amount", 5}});
  auto tampered = tx;
  tampered.body["amount"] = 500;
  CHECK(code_of([&] { w.submit_tx("T1T2", tampered); }) == ErrorCode::BadSignature);

  auto impostor = tx;
  impostor.author = "Sanjeeta";
  CHECK(code_of([&] { w.submit_tx("T1T2", impostor); }) == ErrorCode::BadSignature);

  auto outsider = w.sign("FarmerEric", json{{"type", "transfer"}, {"chain", "T1T2"}, {"to", "Reginald"}, {"amount", 1}});
  CHECK(code_of([&] { w.submit_tx("T1T2", outsider); }) == ErrorCode::NotAMember);

  CHECK(code_of([&] { w.transfer("T1T2", "ManufacturerMark", "FarmerFran", 1); }) == ErrorCode::NotAMember);

  CHECK(w.chain("T1T2").log().size() == length);
  CHECK(w.export_string() == exported);

  w.submit_tx("T1T2", tx);
  CHECK(w.chain("T1T2").balance("Reginald") == 5);
}

TEST_CASE("locked contracts refuse other writers and readers") {
  auto w = table_world();
  const auto address = countersigned_contract(w);
  REQUIRE(w.chain("T2T3").try_lock(address, "xtx-9"));
  CHECK_FALSE(w.chain("T2T3").try_lock(address, "xtx-8"));
  CHECK(code_of([&] {
          w.call("T2T3", "Reginald", address, "put", json{{"key", "k"}, {"value", 1}});
        }) == ErrorCode::ContractLocked);
  CHECK(code_of([&] { w.read_state("T2T3", address, "agreement", "Reginald"); }) == ErrorCode::ContractLocked);
  CHECK_FALSE(w.read_state("T2T3", address, "agreement", "Reginald", std::string("xtx-9")).is_null());
  w.chain("T2T3").unlock(address, "xtx-8");
  CHECK(w.chain("T2T3").lock_holder(address) == "xtx-9");
  w.chain("T2T3").unlock(address, "xtx-9");
  CHECK_FALSE(w.any_lock_held());
}

TEST_CASE("read_state") {
  auto w = table_world();
  const auto address = countersigned_contract(w);
  CHECK(w.read_state("T2T3", address, "unset", "Reginald").is_null());
  CHECK(code_of([&] { w.read_state("T2T3", address, "agreement", "FarmerEric"); }) == ErrorCode::PrivacyViolation);
  CHECK(code_of([&] { w.read_state("T2T3", address, "agreement", "FarmerLucy"); }) == ErrorCode::PrivacyViolation);
  CHECK(code_of([&] { w.read_state("T2T3", "0xdead", "agreement", "Reginald"); }) == ErrorCode::UnknownAddress);
  CHECK(code_of([&] { w.read_state("T9", address, "agreement", "Reginald"); }) == ErrorCode::UnknownChain);
}

TEST_CASE("property: privacy is complete over every (party, contract) pair") {
  auto w = table_world();
  countersigned_contract(w);
  int denied = 0, allowed = 0;
  for (const auto& [chain_id, chain] : w.chains()) {
    for (const auto& [address, contract] : chain.contracts()) {
      const auto& group = chain.group(contract.privacy_group).members;
      for (const auto& party : w.parties()) {
        const bool member = chain.is_member(party.id) && group.count(party.id);
        if (member) {
          CHECK_NOTHROW(w.read_state(chain_id, address, "agreement", party.id));
          ++allowed;
        } else {
          CHECK(code_of([&] { w.read_state(chain_id, address, "agreement", party.id); }) ==
                ErrorCode::PrivacyViolation);
          ++denied;
        }
      }
    }
  }
  CHECK(denied > 50);
  CHECK(allowed > 5);
}

TEST_CASE("log views withhold payloads outside the viewer's groups") {
  auto w = table_world();
  const auto address = countersigned_contract(w);
  const auto& chain = w.chain("T2T3");
  const auto group = chain.contract(address).privacy_group;
  for (const auto& viewer : {"FarmerLucy", "FarmerOlivier"}) {
    int agreement_envelopes = 0;
    for (const auto& record : chain.log_view(viewer)) {
      const bool hidden = record.contains("envelope");
      if (record.at("privacy_group") == group) agreement_envelopes += hidden;
      const auto& members = chain.group(record.at("privacy_group").get<std::string>()).members;
      CHECK(hidden == (members.count(viewer) == 0));
      if (hidden) {
        CHECK_FALSE(record.contains("payload"));
        CHECK_FALSE(record.contains("author"));
        CHECK(record.dump().find("FarmerFran") == std::string::npos);
      }
    }
    CHECK(agreement_envelopes >= 3);
    CHECK(verify_record_chain(chain.log_view(viewer)));
  }
  CHECK(code_of([&] { chain.log_view("FarmerEric"); }) == ErrorCode::PrivacyViolation);
  bool saw_agreement = false;
  for (const auto& record : chain.log_view("FarmerFran"))
    if (record.dump().find("upload_agreement") != std::string::npos) saw_agreement = true;
  CHECK(saw_agreement);
}

TEST_CASE("property: any in-place log mutation is detected") {
  auto w = table_world();
  countersigned_contract(w);
  auto& chain = w.chain("T2T3");
  REQUIRE(chain.verify_log());
  const auto pristine = chain.log();
  for (std::size_t i = 0; i < pristine.size(); ++i) {
    for (int field = 0; field < 5; ++field) {
      auto& log = chain.mutable_log_for_testing();
      log = pristine;
      auto& e = log[i];
      switch (field) {
        case 0: e.payload["tampered"] = true; break;
        case 1: e.author += "x"; break;
        case 2: e.privacy_group += "x"; break;
        case 3: e.prev_digest = std::string(64, 'f'); break;
        case 4: e.seq += 1; break;
      }
      CHECK_FALSE(chain.verify_log());
      std::vector<json> records;
      for (const auto& entry : log) records.push_back(to_json(entry));
      CHECK_FALSE(verify_record_chain(records));
    }
  }
  chain.mutable_log_for_testing() = pristine;
  CHECK(chain.verify_log());
}

TEST_CASE("property: random transfers conserve the total and stay non-negative") {
  auto w = table_world();
  const auto total = w.total_balance();
  testing::NetworkGen rng(99);
  std::vector<ChainId> ids;
  for (const auto& [id, _] : w.chains()) ids.push_back(id);
  int rejected = 0;
  for (int i = 0; i < 400; ++i) {
    const auto& id = ids[rng.below(ids.size())];
    const auto& chain = w.chain(id);
    std::vector<PartyId> members(chain.members().begin(), chain.members().end());
    const auto& from = members[rng.below(members.size())];
    const auto& to = members[rng.below(members.size())];
    const Amount amount = static_cast<Amount>(rng.below(300000)) + 1;
    try {
      w.transfer(id, from, to, amount);
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::InsufficientBalance);
      ++rejected;
    }
    REQUIRE(w.total_balance() == total);
    for (const auto& [party, balance] : chain.balances()) REQUIRE(balance >= 0);
  }
  CHECK(rejected > 0);
  for (const auto& [id, chain] : w.chains()) CHECK(chain.verify_log());
}

TEST_CASE("membership gate: no log entry is authored by a non-member") {
  auto w = table_world();
  countersigned_contract(w);
  for (const auto& [id, chain] : w.chains())
    for (const auto& e : chain.log())
      if (!e.author.empty()) CHECK(chain.is_member(e.author));
}

TEST_CASE("identical seeds give identical exports") {
  CHECK(table_world("a").export_string() == table_world("a").export_string());
  CHECK(table_world("a").export_string() != table_world("b").export_string());
  const auto dir = testing::scratch_dir("ledger-export");
  table_world().write_ledger_exports(dir);
  std::ifstream in(dir / "T2T3.jsonl");
  std::vector<json> records;
  for (std::string line; std::getline(in, line);) records.push_back(json::parse(line));
  CHECK(records.size() == table_world().chain("T2T3").log().size());
  CHECK(verify_record_chain(records));
}

TEST_CASE("ops round-trip through JSON") {
  const std::vector<Op> ops{SetOp{"0xa", "k", json{{"v", 1}}}, DebitOp{"p", 3}, CreditOp{"q", 3},
                            DeployOp{ContractKind::FinanceContract, "0xb", "o", "g"},
                            GroupOp{PrivacyGroup{"pg-1", {"a", "b"}}}};
  for (const auto& op : ops) CHECK(to_json(op_from_json(to_json(op))) == to_json(op));
  CHECK(code_of([] { op_from_json(json{{"op", "burn"}}); }) == ErrorCode::ParseError);
}
