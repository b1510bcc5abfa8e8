#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainvoice/bn/inference.hpp"

namespace chainvoice::finance {

struct ScenarioTarget {
  bn::NodeId node;
  std::string state;
  double expected = 0.0;
  double tolerance = 0.01;
};

struct ScenarioDef {
  std::string name;
  std::string model;  // supplier_profile | financial_incentive | overall
  std::string description;
  bn::Evidence evidence;
  std::vector<ScenarioTarget> targets;
};

struct ScenarioRow {
  ScenarioTarget target;
  double actual = 0.0;
  bool pass = false;
};

struct ScenarioReport {
  std::string name;
  std::string model;
  std::vector<ScenarioRow> rows;

  bool pass() const;
};

/// Throws ParseError (bad document) or InvalidSpec (expected value outside [0,1]).
std::vector<ScenarioDef> scenarios_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const std::vector<ScenarioDef>& scenarios);
nlohmann::json to_json(const ScenarioReport& report);
std::vector<ScenarioDef> load_scenarios(const std::filesystem::path& path);

/// Throws UnknownScenario.
const ScenarioDef& find_scenario(const std::vector<ScenarioDef>& scenarios, const std::string& name);

/// Posterior per target, checked against its tolerance. Errors from the
/// engine (UnknownNode, ImpossibleEvidence, ...) propagate.
ScenarioReport run_scenario(const bn::Network& model, const ScenarioDef& scenario);

}  // namespace chainvoice::finance
