#include "chainvoice/bn/io.hpp"

#include <fstream>
#include <sstream>

#include "chainvoice/error.hpp"

namespace chainvoice::bn {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& doc, const char* key, const std::string& where) {
  if (!doc.is_object() || !doc.contains(key))
    throw Error(ErrorCode::ParseError, where + ": missing field '" + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, where + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

NodeSpec node_from_json(const json& doc) {
  NodeSpec node;
  node.id = field<std::string>(doc, "id", "node");
  const std::string where = "node '" + node.id + "'";
  node.label = doc.value("label", node.id);
  node.states = field<std::vector<std::string>>(doc, "states", where);
  node.parents = doc.contains("parents") ? field<std::vector<NodeId>>(doc, "parents", where)
                                         : std::vector<NodeId>{};
  node.cpt.rows = field<std::vector<std::vector<double>>>(doc, "cpt", where);
  return node;
}

NetworkSpec network_from_json(const json& doc) {
  NetworkSpec spec;
  if (!doc.is_object() || !doc.contains("nodes") || !doc.at("nodes").is_array())
    throw Error(ErrorCode::ParseError, "network document needs a 'nodes' array");
  for (const auto& n : doc.at("nodes")) spec.nodes.push_back(node_from_json(n));
  return spec;
}

json to_json(const NodeSpec& node) {
  return json{{"id", node.id},
              {"label", node.label},
              {"states", node.states},
              {"parents", node.parents},
              {"cpt", node.cpt.rows}};
}

json to_json(const NetworkSpec& spec) {
  json nodes = json::array();
  for (const auto& node : spec.nodes) nodes.push_back(to_json(node));
  return json{{"nodes", std::move(nodes)}};
}

Evidence evidence_from_json(const json& doc) {
  Evidence ev;
  if (doc.is_null()) return ev;
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "evidence must be an object of node -> state");
  for (const auto& [id, state] : doc.items()) {
    if (!state.is_string())
      throw Error(ErrorCode::ParseError, "evidence for '" + id + "' must be a state name");
    ev.findings.emplace(id, state.get<std::string>());
  }
  return ev;
}

json to_json(const Evidence& evidence) {
  json out = json::object();
  for (const auto& [id, state] : evidence.findings) out[id] = state;
  return out;
}

json to_json(const Posterior& posterior) {
  json dist = json::object();
  for (const auto& [state, p] : posterior.distribution) dist[state] = p;
  return json{{"node", posterior.node}, {"distribution", std::move(dist)}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

NetworkSpec load_network(const std::filesystem::path& path) {
  try {
    return network_from_json(read_json_file(path));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ParseError) throw;
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace chainvoice::bn
