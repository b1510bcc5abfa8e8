#include "chainvoice/gateway/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>

#include "chainvoice/bn/io.hpp"
#include "chainvoice/finance/fit.hpp"
#include "chainvoice/finance/scenario.hpp"
#include "chainvoice/gateway/session.hpp"

namespace chainvoice::gateway {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  out << text;
}

std::string require_file(const std::string& given, const fs::path& fallback, const char* what) {
  const fs::path path = given.empty() ? fallback : fs::path(given);
  if (!fs::exists(path)) throw CLI::ValidationError(std::string(what), "file not found: " + path.string());
  return path.string();
}

int cmd_fit(const std::string& scenarios_file, const fs::path& out_dir, double tol, std::ostream& out) {
  const auto scenarios = finance::load_scenarios(scenarios_file);
  const auto start = std::chrono::steady_clock::now();
  const auto submodels = finance::derive_submodel_cpts(scenarios, tol);
  finance::FitOptions options;
  options.tol = tol;
  const auto fit = finance::fit_overall_cpts(submodels, finance::overall_fit_targets(scenarios), options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  finance::FinanceModels models;
  models.supplier_profile = finance::supplier_profile_class(submodels.supplier_profile);
  models.financial_incentive = finance::financial_incentive_class(submodels.financial_incentive);
  models.overall_master = finance::overall_master(models.supplier_profile, models.financial_incentive,
                                                  finance::overall_master_nodes(fit.cpts));
  models.overall = oobn::flatten(models.overall_master);
  finance::save_models(models, out_dir);

  out << std::left << std::setw(62) << "target" << std::right << std::setw(10) << "value" << std::setw(10)
      << "fitted" << std::setw(12) << "residual" << "\n";
  for (const auto& r : fit.residuals) {
    out << std::left << std::setw(62) << (r.target.source + " " + r.target.node + "=" + r.target.state) << std::right
        << std::fixed << std::setprecision(4) << std::setw(10) << r.target.value << std::setw(10) << r.actual
        << std::setw(12) << std::setprecision(6) << r.residual << "\n";
  }
  out << "max |residual| " << std::setprecision(6) << fit.max_abs_residual << " after " << fit.iterations
      << " iterations (" << std::setprecision(3) << seconds << " s)\n";
  out << "models written to " << out_dir.string() << "\n";
  return 0;
}

int cmd_scenario_run(const fs::path& models_dir, const std::string& scenarios_file, bool as_json, std::ostream& out,
                     std::ostream& err) {
  const auto models = finance::build_model_set(finance::load_models(models_dir));
  const auto scenarios = finance::load_scenarios(scenarios_file);
  json reports = json::array();
  std::size_t passed = 0;
  for (const auto& s : scenarios) {
    finance::ScenarioReport report;
    try {
      report = finance::run_scenario(models.get(s.model), s);
    } catch (const Error& e) {
      err << "error: scenario " << s.name << ": " << e.what() << "\n";
      return kExitUsage;
    }
    if (report.pass()) ++passed;
    reports.push_back(finance::to_json(report));
    if (as_json) continue;
    for (const auto& row : report.rows) {
      out << std::left << std::setw(44) << s.name << std::setw(44)
          << (row.target.node + "=" + row.target.state) << std::right << std::fixed << std::setprecision(4)
          << std::setw(8) << row.target.expected << std::setw(9) << row.actual << "  +/-" << std::left
          << std::setw(8) << std::defaultfloat << row.target.tolerance << (row.pass ? "pass" : "FAIL") << "\n";
    }
  }
  if (as_json) {
    out << json{{"scenarios", reports}, {"passed", passed}, {"total", scenarios.size()}}.dump(2) << "\n";
  } else {
    out << passed << "/" << scenarios.size() << " scenarios passed\n";
  }
  return passed == scenarios.size() ? 0 : kExitFailure;
}

int cmd_query(const fs::path& models_dir, const std::string& model, const std::string& evidence,
              const std::string& target, std::ostream& out) {
  const auto models = finance::build_model_set(finance::load_models(models_dir));
  json ev_doc;
  try {
    ev_doc = json::parse(evidence);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("--evidence: ") + e.what());
  }
  auto result = bn::to_json(bn::query(models.get(model), bn::evidence_from_json(ev_doc), target));
  result["model"] = model;
  out << result.dump(2) << "\n";
  return 0;
}

}  // namespace

SimArtifacts run_simulation(const RunConfig& config) {
  auto world = ledger::World::bootstrap(ledger::load_world_config(config.world_file), config.seed);
  auto models = std::make_shared<const finance::ModelSet>(finance::build_model_set(finance::load_models(config.models_dir)));
  const auto request = flow::load_request(config.request_file);
  const auto fixtures = flow::load_fixtures(config.fixtures_file);

  SimArtifacts artifacts;
  xchain::Journal journal;
  flow::FlowOptions options;
  options.fault = config.fault;
  options.financier_decision = config.financier_decision;
  options.before_step = [&](int step, const ledger::World& w) {
    if (step == 7) artifacts.pre_tx_export = w.export_state();
  };
  artifacts.outcome = flow::run_financing_sequence(world, journal, models, request, fixtures, options);
  artifacts.journal = journal.dump();
  artifacts.world_export = world.export_state();

  if (!config.output_dir.empty()) {
    const auto& dir = config.output_dir;
    fs::create_directories(dir);
    world.write_ledger_exports(dir / "ledger");
    write_text(dir / "journal.jsonl", artifacts.journal);
    write_text(dir / "outcome.json", flow::to_json(artifacts.outcome).dump(2) + "\n");
    std::string trace;
    for (const auto& line : artifacts.outcome.trace()) trace += line + "\n";
    write_text(dir / "trace.txt", trace);
    write_text(dir / "world.json", artifacts.world_export.dump(2) + "\n");
  }
  return artifacts;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"chainvoice: invoice-financing networks, private chains and atomic settlement"};
  app.require_subcommand(1);
  std::string home_opt;
  app.add_option("--home", home_opt, "artifact directory (default $CHAINVOICE_HOME or the working directory)");

  auto* fit = app.add_subcommand("fit", "derive and fit the CPTs, write models/");
  std::string fit_scenarios, fit_out;
  double fit_tol = 0.01;
  fit->add_option("--scenarios", fit_scenarios, "scenario fixture");
  fit->add_option("--out", fit_out, "output model directory");
  fit->add_option("--tol", fit_tol, "largest accepted residual")->check(CLI::Range(1e-9, 1.0));

  auto* scenario = app.add_subcommand("scenario", "scenario runner");
  scenario->require_subcommand(1);
  auto* scenario_run = scenario->add_subcommand("run", "run every scenario against the fitted models");
  std::string sc_models, sc_file;
  bool sc_json = false;
  scenario_run->add_option("--models", sc_models, "model directory");
  scenario_run->add_option("--scenarios", sc_file, "scenario fixture");
  scenario_run->add_flag("--json", sc_json, "machine-readable report");

  auto* sim = app.add_subcommand("sim", "financing sequence simulation");
  sim->require_subcommand(1);
  auto* sim_run = sim->add_subcommand("run", "bootstrap the world and run the 12-step sequence");
  std::string sim_world, sim_request, sim_fixtures, sim_models, sim_out, sim_phase, sim_decision;
  std::string sim_seed = kDefaultSeed;
  std::optional<int> sim_step;
  sim_run->add_option("--world", sim_world, "world bootstrap file");
  sim_run->add_option("--request", sim_request, "financing request");
  sim_run->add_option("--fixtures", sim_fixtures, "credit bureau, customer list and supply-chain fixtures");
  sim_run->add_option("--models", sim_models, "model directory");
  sim_run->add_option("--seed", sim_seed, "run seed");
  sim_run->add_option("--out", sim_out, "output directory (default <home>/out)");
  auto* step_opt = sim_run->add_option("--fault-step", sim_step, "crash before sequence step N")->check(CLI::Range(1, 12));
  sim_run->add_option("--fault-phase", sim_phase, "crash at a coordinator phase")
      ->check(CLI::IsMember({"lock", "stage", "commit"}))
      ->excludes(step_opt);
  sim_run->add_option("--decision", sim_decision, "financier decision replacing the threshold rule")
      ->check(CLI::IsMember({"approve", "decline"}));

  auto* serve = app.add_subcommand("serve", "serve the /v1 HTTP API");
  int port = 8080;
  std::string host = "127.0.0.1", serve_seed = kDefaultSeed, ui_dir;
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "bind address");
  serve->add_option("--seed", serve_seed, "session seed");
  serve->add_option("--ui", ui_dir, "static console build to serve at /")->check(CLI::ExistingDirectory);

  auto* query = app.add_subcommand("query", "posterior of one node given evidence");
  std::string q_models, q_model = finance::kOverallModel, q_evidence = "{}", q_target;
  query->add_option("--models", q_models, "model directory");
  query->add_option("--model", q_model, "supplier_profile | financial_incentive | overall");
  query->add_option("--evidence", q_evidence, "JSON object node -> state");
  query->add_option("--target", q_target, "node id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const fs::path home = home_opt.empty() ? chainvoice_home() : fs::path(home_opt);
  const auto layout = HomeLayout::under(home);
  auto dir_or = [](const std::string& given, const fs::path& fallback) {
    return given.empty() ? fallback : fs::path(given);
  };

  try {
    if (*fit) {
      return cmd_fit(require_file(fit_scenarios, layout.scenarios_file, "--scenarios"),
                     dir_or(fit_out, layout.models_dir), fit_tol, out);
    }
    if (*scenario_run) {
      return cmd_scenario_run(dir_or(sc_models, layout.models_dir),
                              require_file(sc_file, layout.scenarios_file, "--scenarios"), sc_json, out, err);
    }
    if (*query) return cmd_query(dir_or(q_models, layout.models_dir), q_model, q_evidence, q_target, out);
    if (*sim_run) {
      RunConfig config;
      config.seed = sim_seed;
      config.world_file = require_file(sim_world, layout.world_file, "--world");
      config.request_file = require_file(sim_request, layout.request_file, "--request");
      config.fixtures_file = require_file(sim_fixtures, layout.fixtures_file, "--fixtures");
      config.models_dir = dir_or(sim_models, layout.models_dir);
      config.output_dir = dir_or(sim_out, home / "out");
      config.fault.step = sim_step;
      if (!sim_phase.empty()) config.fault.phase = xchain::fault_phase_from_string(sim_phase);
      if (!sim_decision.empty()) config.financier_decision = sim_decision == "approve";
      const auto artifacts = run_simulation(config);
      for (const auto& line : artifacts.outcome.trace()) out << line << "\n";
      out << "artifacts written to " << config.output_dir.string() << "\n";
      return 0;
    }
    if (*serve) {
      auto session = Session::load(layout, serve_seed);
      HttpServer server(*session, ui_dir.empty() ? std::nullopt : std::optional<fs::path>(ui_dir));
      const int bound = server.bind(host, port);
      if (bound < 0) {
        err << "error: cannot bind " << host << ":" << port << "\n";
        return kExitFailure;
      }
      out << "serving /v1 on http://" << host << ":" << bound << " (seed " << serve_seed << ")" << std::endl;
      return server.listen() ? 0 : kExitFailure;
    }
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::FitFailed ? kExitFailure : kExitUsage;
  }
  return kExitUsage;
}

}  // namespace chainvoice::gateway
