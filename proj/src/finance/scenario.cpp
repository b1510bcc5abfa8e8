#include "chainvoice/finance/scenario.hpp"

#include <cmath>

#include "chainvoice/bn/io.hpp"
#include "chainvoice/error.hpp"

namespace chainvoice::finance {

using nlohmann::json;

bool ScenarioReport::pass() const {
  for (const auto& row : rows)
    if (!row.pass) return false;
  return true;
}

std::vector<ScenarioDef> scenarios_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("scenarios") || !doc.at("scenarios").is_array())
    throw Error(ErrorCode::ParseError, "scenario document needs a 'scenarios' array");
  std::vector<ScenarioDef> out;
  for (const auto& s : doc.at("scenarios")) {
    try {
      ScenarioDef def;
      def.name = s.at("name").get<std::string>();
      def.model = s.at("model").get<std::string>();
      def.description = s.value("description", "");
      def.evidence = bn::evidence_from_json(s.value("evidence", json::object()));
      for (const auto& t : s.at("targets")) {
        ScenarioTarget target{t.at("node").get<std::string>(), t.at("state").get<std::string>(),
                              t.at("expected").get<double>(), t.value("tolerance", 0.01)};
        if (target.expected < 0.0 || target.expected > 1.0)
          throw Error(ErrorCode::InvalidSpec,
                      "scenario '" + def.name + "': expected probability outside [0,1]");
        def.targets.push_back(std::move(target));
      }
      out.push_back(std::move(def));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("scenario entry: ") + e.what());
    }
  }
  return out;
}

json to_json(const std::vector<ScenarioDef>& scenarios) {
  json list = json::array();
  for (const auto& s : scenarios) {
    json targets = json::array();
    for (const auto& t : s.targets)
      targets.push_back(
          json{{"node", t.node}, {"state", t.state}, {"expected", t.expected}, {"tolerance", t.tolerance}});
    list.push_back(json{{"name", s.name},
                        {"model", s.model},
                        {"description", s.description},
                        {"evidence", bn::to_json(s.evidence)},
                        {"targets", std::move(targets)}});
  }
  return json{{"scenarios", std::move(list)}};
}

json to_json(const ScenarioReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back(json{{"node", r.target.node},
                        {"state", r.target.state},
                        {"expected", r.target.expected},
                        {"tolerance", r.target.tolerance},
                        {"actual", r.actual},
                        {"pass", r.pass}});
  return json{{"name", report.name}, {"model", report.model}, {"pass", report.pass()}, {"rows", std::move(rows)}};
}

std::vector<ScenarioDef> load_scenarios(const std::filesystem::path& path) {
  return scenarios_from_json(bn::read_json_file(path));
}

const ScenarioDef& find_scenario(const std::vector<ScenarioDef>& scenarios, const std::string& name) {
  for (const auto& s : scenarios)
    if (s.name == name) return s;
  throw Error(ErrorCode::UnknownScenario, "no scenario named '" + name + "'");
}

ScenarioReport run_scenario(const bn::Network& model, const ScenarioDef& scenario) {
  ScenarioReport report{scenario.name, scenario.model, {}};
  for (const auto& target : scenario.targets) {
    const double actual = bn::query(model, scenario.evidence, target.node).at(target.state);
    report.rows.push_back({target, actual, std::abs(actual - target.expected) <= target.tolerance});
  }
  return report;
}

}  // namespace chainvoice::finance
