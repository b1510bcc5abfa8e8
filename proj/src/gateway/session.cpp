#include "chainvoice/gateway/session.hpp"

#include <sodium.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>

#include "chainvoice/bn/io.hpp"
#include "chainvoice/ledger/crypto.hpp"

namespace chainvoice::gateway {

using nlohmann::json;
using ledger::PartyId;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<std::string> header(const Headers& headers, const std::string& name) {
  const auto wanted = lower(name);
  for (const auto& [k, v] : headers)
    if (lower(k) == wanted) return v;
  return std::nullopt;
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::PrivacyViolation:
    case ErrorCode::NotAMember:
    case ErrorCode::NoGrant:
      return 403;
    case ErrorCode::VersionConflict:
    case ErrorCode::LockConflict:
    case ErrorCode::ContractLocked:
      return 409;
    case ErrorCode::UnknownChain:
      return 404;
    default:
      return 400;
  }
}

json fault_json(const flow::FlowFault& f) {
  return json{{"step", f.step ? json(*f.step) : json(nullptr)},
              {"phase", f.phase ? json(xchain::to_string(*f.phase)) : json(nullptr)}};
}

}  // namespace

std::filesystem::path chainvoice_home() {
  if (const char* home = std::getenv("CHAINVOICE_HOME"); home && *home) return home;
  return std::filesystem::current_path();
}

HomeLayout HomeLayout::under(const std::filesystem::path& home) {
  return HomeLayout{home / "models", home / "data" / "scenarios.json", home / "data" / "world.json",
                    home / "data" / "request.json", home / "data" / "fixtures.json"};
}

TokenIssuer::TokenIssuer(const std::string& seed) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  key_.resize(crypto_auth_KEYBYTES);
  const std::string material = seed + "/session-token";
  crypto_hash_sha256(reinterpret_cast<unsigned char*>(key_.data()),
                     reinterpret_cast<const unsigned char*>(material.data()), material.size());
}

std::string TokenIssuer::mac(const std::string& party) const {
  unsigned char tag[crypto_auth_BYTES];
  crypto_auth(tag, reinterpret_cast<const unsigned char*>(party.data()), party.size(),
              reinterpret_cast<const unsigned char*>(key_.data()));
  std::string hex(sizeof tag * 2 + 1, '\0');
  sodium_bin2hex(hex.data(), hex.size(), tag, sizeof tag);
  hex.pop_back();
  return hex;
}

std::string TokenIssuer::issue(const PartyId& party) const { return party + "." + mac(party); }

std::optional<PartyId> TokenIssuer::verify(const std::string& token) const {
  const auto dot = token.rfind('.');
  if (dot == std::string::npos || dot == 0) return std::nullopt;
  const auto party = token.substr(0, dot);
  const auto given = token.substr(dot + 1);
  const auto expected = mac(party);
  if (given.size() != expected.size() || sodium_memcmp(given.data(), expected.data(), given.size()) != 0)
    return std::nullopt;
  return party;
}

Session::Session(std::string seed, const finance::FinanceModels& models, ledger::WorldConfig world,
                 flow::Fixtures fixtures, std::vector<finance::ScenarioDef> scenarios,
                 std::optional<flow::FinancingRequest> default_request)
    : seed_(std::move(seed)),
      tokens_(seed_),
      model_docs_(models),
      models_(std::make_shared<const finance::ModelSet>(finance::build_model_set(models))),
      world_config_(std::move(world)),
      fixtures_(std::move(fixtures)),
      scenarios_(std::move(scenarios)),
      default_request_(std::move(default_request)),
      world_(ledger::World::bootstrap(world_config_, seed_)) {}

std::unique_ptr<Session> Session::load(const HomeLayout& layout, const std::string& seed) {
  std::optional<flow::FinancingRequest> request;
  if (std::filesystem::exists(layout.request_file)) request = flow::load_request(layout.request_file);
  return std::make_unique<Session>(seed, finance::load_models(layout.models_dir),
                                   ledger::load_world_config(layout.world_file),
                                   flow::load_fixtures(layout.fixtures_file),
                                   finance::load_scenarios(layout.scenarios_file), std::move(request));
}

json Session::export_world() const {
  std::lock_guard lock(mu_);
  return world_.export_state();
}

Response Session::ok(json body) const {
  body["world_version"] = world_version();
  return Response{200, std::move(body)};
}

void Session::check_version(const json& body) const {
  if (!body.is_object() || !body.contains("expected_version") || body.at("expected_version").is_null()) return;
  const auto expected = body.at("expected_version").get<std::uint64_t>();
  if (expected != world_version())
    throw Error(ErrorCode::VersionConflict, "world is at version " + std::to_string(world_version()) +
                                                ", request expected " + std::to_string(expected));
}

Response Session::handle(const std::string& method, const std::string& path, const Headers& headers,
                         const std::string& body) {
  try {
    json doc = json::object();
    if (!body.empty()) {
      try {
        doc = json::parse(body);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("request body: ") + e.what());
      }
    }
    return route(method, path, headers, doc);
  } catch (const Error& e) {
    return Response{status_for(e.code()), json{{"error", to_string(e.code())},
                                               {"message", e.what()},
                                               {"world_version", world_version()}}};
  } catch (const json::exception& e) {
    return Response{400, json{{"error", "ParseError"}, {"message", e.what()}, {"world_version", world_version()}}};
  }
}

Response Session::route(const std::string& method, const std::string& path, const Headers& headers,
                        const json& body) {
  std::optional<PartyId> caller;
  if (auto token = header(headers, kTokenHeader)) {
    caller = tokens_.verify(*token);
    if (!caller) throw Error(ErrorCode::PrivacyViolation, "invalid party token");
  }

  static const std::regex chain_log(R"(^/v1/chains/([^/]+)/log$)");
  std::smatch m;
  auto not_allowed = [&] {
    return Response{405, json{{"error", "MethodNotAllowed"}, {"message", method + " " + path},
                              {"world_version", world_version()}}};
  };

  if (path == "/v1/session") return method == "POST" ? post_session(body) : not_allowed();
  if (path == "/v1/models") return method == "GET" ? get_models() : not_allowed();
  if (path == "/v1/query") return method == "POST" ? post_query(body) : not_allowed();
  if (path == "/v1/chains") return method == "GET" ? get_chains(caller) : not_allowed();
  if (std::regex_match(path, m, chain_log)) return method == "GET" ? get_chain_log(m[1], caller) : not_allowed();
  if (path == "/v1/requests") {
    if (method == "GET") return get_requests();
    if (method == "POST") return post_request(body, caller);
    return not_allowed();
  }
  if (path == "/v1/scenarios") return method == "GET" ? get_scenarios() : not_allowed();
  if (path == "/v1/faults") {
    if (method == "GET") return get_faults();
    if (method == "POST") return post_faults(body);
    if (method == "DELETE") return delete_faults();
    return not_allowed();
  }
  return Response{404, json{{"error", "NotFound"}, {"message", path}, {"world_version", world_version()}}};
}

Response Session::post_session(const json& body) {
  const auto party = body.at("party").get<std::string>();
  if (!world_.is_party(party)) throw Error(ErrorCode::NotAMember, "unknown party '" + party + "'");
  return ok(json{{"party", party}, {"token", tokens_.issue(party)}});
}

Response Session::get_models() const {
  json list = json::array();
  for (const auto& name : finance::ModelSet::names())
    list.push_back(json{{"name", name}, {"network", bn::to_json(models_->get(name).spec())}});
  return ok(json{{"models", list}});
}

Response Session::post_query(const json& body) const {
  check_version(body);
  const auto model = body.value("model", std::string(finance::kOverallModel));
  const auto& net = models_->get(model);
  const auto evidence = bn::evidence_from_json(body.value("evidence", json::object()));
  if (body.contains("targets")) {
    json posteriors = json::array();
    for (const auto& t : body.at("targets"))
      posteriors.push_back(bn::to_json(bn::query(net, evidence, t.get<std::string>())));
    return ok(json{{"model", model}, {"posteriors", posteriors}});
  }
  auto result = bn::to_json(bn::query(net, evidence, body.at("target").get<std::string>()));
  result["model"] = model;
  return ok(std::move(result));
}

Response Session::get_chains(const std::optional<PartyId>& caller) {
  std::lock_guard lock(mu_);
  json list = json::array();
  for (const auto& [id, chain] : world_.chains()) {
    const bool member = caller && chain.is_member(*caller);
    json entry{{"id", id}, {"length", chain.log().size()}, {"member", member}};
    if (member) entry["members"] = chain.members();
    list.push_back(std::move(entry));
  }
  return ok(json{{"chains", list}});
}

Response Session::get_chain_log(const std::string& chain_id, const std::optional<PartyId>& caller) {
  if (!caller) throw Error(ErrorCode::PrivacyViolation, std::string(kTokenHeader) + " header required");
  std::lock_guard lock(mu_);
  const auto& chain = world_.chain(chain_id);
  const auto entries = chain.log_view(*caller);
  json contracts = json::array();
  for (const auto& [address, c] : chain.contracts()) {
    if (!chain.group(c.privacy_group).members.count(*caller)) continue;
    json storage = json::object();
    for (const auto& [k, v] : c.storage) storage[k] = v;
    contracts.push_back(json{{"address", address},
                             {"kind", ledger::to_string(c.kind)},
                             {"owner", c.owner},
                             {"privacy_group", c.privacy_group},
                             {"storage", storage}});
  }
  return ok(json{{"chain", chain_id},
                 {"viewer", *caller},
                 {"entries", entries},
                 {"verified", ledger::verify_record_chain(entries)},
                 {"balances", chain.balances()},
                 {"contracts", contracts}});
}

Response Session::get_requests() {
  std::lock_guard lock(mu_);
  return ok(json{{"requests", outcomes_},
                 {"default_request", default_request_ ? flow::to_json(*default_request_) : json(nullptr)}});
}

Response Session::post_request(const json& body, const std::optional<PartyId>& caller) {
  check_version(body);
  flow::FinancingRequest request;
  if (body.contains("supplier")) {
    request = flow::request_from_json(body);
  } else if (body.contains("request")) {
    request = flow::request_from_json(body.at("request"));
  } else if (default_request_) {
    request = *default_request_;
  } else {
    throw Error(ErrorCode::ParseError, "no financing request given");
  }

  flow::FlowOptions options;
  if (body.contains("financier_decision") && !body.at("financier_decision").is_null()) {
    const auto d = body.at("financier_decision").get<std::string>();
    if (d != "approve" && d != "decline")
      throw Error(ErrorCode::ParseError, "financier_decision must be approve or decline");
    options.financier_decision = d == "approve";
  }
  if (caller && *caller != request.supplier && *caller != request.financier)
    throw Error(ErrorCode::PrivacyViolation, *caller + " is not a party to this request");

  std::lock_guard lock(mu_);
  check_version(body);
  options.fault = armed_fault_;
  armed_fault_ = {};
  const auto outcome = flow::run_financing_sequence(world_, journal_, models_, request, fixtures_, options);
  auto doc = flow::to_json(outcome);
  outcomes_.push_back(doc);
  ++version_;
  return ok(json{{"outcome", std::move(doc)}, {"trace", outcome.trace()}});
}

Response Session::get_scenarios() const {
  auto doc = finance::to_json(scenarios_);
  if (!doc.is_object()) doc = json{{"scenarios", doc}};
  return ok(std::move(doc));
}

Response Session::get_faults() {
  std::lock_guard lock(mu_);
  return ok(json{{"fault", fault_json(armed_fault_)}});
}

Response Session::post_faults(const json& body) {
  check_version(body);
  flow::FlowFault fault;
  if (body.contains("step") && !body.at("step").is_null()) {
    fault.step = body.at("step").get<int>();
    if (*fault.step < 1 || *fault.step > 12) throw Error(ErrorCode::ParseError, "fault step must lie in 1..12");
  }
  if (body.contains("phase") && !body.at("phase").is_null())
    fault.phase = xchain::fault_phase_from_string(body.at("phase").get<std::string>());
  if (fault.step && fault.phase) throw Error(ErrorCode::ParseError, "at most one crash point per run");
  std::lock_guard lock(mu_);
  armed_fault_ = fault;
  ++version_;
  return ok(json{{"fault", fault_json(armed_fault_)}});
}

Response Session::delete_faults() {
  std::lock_guard lock(mu_);
  armed_fault_ = {};
  ++version_;
  return ok(json{{"fault", fault_json(armed_fault_)}});
}

}  // namespace chainvoice::gateway
