#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainvoice/finance/model.hpp"
#include "chainvoice/finance/scenario.hpp"
#include "chainvoice/flow/financing.hpp"
#include "chainvoice/ledger/world.hpp"
#include "chainvoice/xchain/coordinator.hpp"

namespace chainvoice::gateway {

/// Artifact directory: $CHAINVOICE_HOME, or the working directory.
std::filesystem::path chainvoice_home();

/// Default artifact locations below a home directory.
struct HomeLayout {
  std::filesystem::path models_dir;
  std::filesystem::path scenarios_file;
  std::filesystem::path world_file;
  std::filesystem::path request_file;
  std::filesystem::path fixtures_file;

  static HomeLayout under(const std::filesystem::path& home);
};

inline constexpr const char* kDefaultSeed = "chainvoice";
inline constexpr const char* kTokenHeader = "X-Party-Token";

struct Response {
  int status = 200;
  nlohmann::json body;
};

/// Case-insensitive header names.
using Headers = std::map<std::string, std::string>;

/// Signed party tokens: "<party>.<hex HMAC>" keyed from the session seed.
class TokenIssuer {
 public:
  explicit TokenIssuer(const std::string& seed);
  std::string issue(const ledger::PartyId& party) const;
  std::optional<ledger::PartyId> verify(const std::string& token) const;

 private:
  std::string mac(const std::string& party) const;
  std::string key_;
};

/// One simulated world served over /v1. handle() is transport-free; the
/// HTTP server forwards every request to it. World reads and mutations are
/// serialized on one mutex; model queries run without it.
class Session {
 public:
  Session(std::string seed, const finance::FinanceModels& models, ledger::WorldConfig world,
          flow::Fixtures fixtures, std::vector<finance::ScenarioDef> scenarios,
          std::optional<flow::FinancingRequest> default_request = std::nullopt);

  /// Loads every artifact from a home layout.
  static std::unique_ptr<Session> load(const HomeLayout& layout, const std::string& seed);

  Response handle(const std::string& method, const std::string& path, const Headers& headers,
                  const std::string& body);

  std::string issue_token(const ledger::PartyId& party) const { return tokens_.issue(party); }
  std::uint64_t world_version() const noexcept { return version_.load(); }

  /// Full world export under the session lock.
  nlohmann::json export_world() const;

 private:
  Response route(const std::string& method, const std::string& path, const Headers& headers,
                 const nlohmann::json& body);
  Response post_session(const nlohmann::json& body);
  Response get_models() const;
  Response post_query(const nlohmann::json& body) const;
  Response get_chains(const std::optional<ledger::PartyId>& caller);
  Response get_chain_log(const std::string& chain, const std::optional<ledger::PartyId>& caller);
  Response get_requests();
  Response post_request(const nlohmann::json& body, const std::optional<ledger::PartyId>& caller);
  Response get_scenarios() const;
  Response get_faults();
  Response post_faults(const nlohmann::json& body);
  Response delete_faults();

  void check_version(const nlohmann::json& body) const;
  Response ok(nlohmann::json body) const;

  std::string seed_;
  TokenIssuer tokens_;
  finance::FinanceModels model_docs_;
  std::shared_ptr<const finance::ModelSet> models_;
  ledger::WorldConfig world_config_;
  flow::Fixtures fixtures_;
  std::vector<finance::ScenarioDef> scenarios_;
  std::optional<flow::FinancingRequest> default_request_;

  mutable std::mutex mu_;
  ledger::World world_;
  xchain::Journal journal_;
  flow::FlowFault armed_fault_;
  std::vector<nlohmann::json> outcomes_;
  std::atomic<std::uint64_t> version_{1};
};

/// HTTP binding of a Session. `ui_dir`, when set, is served at "/".
class HttpServer {
 public:
  explicit HttpServer(Session& session, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~HttpServer();

  /// Port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace chainvoice::gateway
