#include "chainvoice/oobn/compose.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "chainvoice/bn/io.hpp"
#include "chainvoice/error.hpp"

namespace chainvoice::oobn {

using nlohmann::json;

std::string qualify(const std::string& instance, const bn::NodeId& node) {
  return instance + kSeparator + node;
}

void validate_class(const OobnClass& cls) {
  for (const auto& id : cls.inputs) {
    const auto* node = cls.spec.find(id);
    if (!node) throw Error(ErrorCode::InvalidSpec, "interface input '" + id + "' is not a class node");
    if (!node->parents.empty())
      throw Error(ErrorCode::InvalidSpec, "interface input '" + id + "' has parents inside the class");
  }
  for (const auto& id : cls.outputs)
    if (!cls.spec.find(id))
      throw Error(ErrorCode::InvalidSpec, "interface output '" + id + "' is not a class node");
}

bn::NetworkSpec flatten(const MasterSpec& master) {
  bn::NetworkSpec flat;
  std::set<std::string> instance_names;
  for (const auto& [name, cls] : master.instances) {
    if (name.empty() || name.find(kSeparator) != std::string::npos)
      throw Error(ErrorCode::InvalidSpec, "instance name '" + name + "' must be non-empty and contain no '.'");
    if (!instance_names.insert(name).second)
      throw Error(ErrorCode::DuplicateInstanceName, "instance '" + name + "' declared twice");
    validate_class(cls);
    for (const auto& node : cls.spec.nodes) {
      bn::NodeSpec copy = node;
      copy.id = qualify(name, node.id);
      for (auto& parent : copy.parents) parent = qualify(name, parent);
      flat.nodes.push_back(std::move(copy));
    }
  }

  std::set<bn::NodeId> master_ids;
  for (const auto& node : master.nodes) {
    if (node.id.find(kSeparator) != std::string::npos)
      throw Error(ErrorCode::InvalidSpec, "master node id '" + node.id + "' uses the reserved '.'");
    master_ids.insert(node.id);
  }

  std::map<bn::NodeId, bn::NodeId> alias_target;
  for (const auto& b : master.bindings) {
    auto inst = std::find_if(master.instances.begin(), master.instances.end(),
                             [&](const auto& entry) { return entry.first == b.instance; });
    if (inst == master.instances.end() ||
        std::find(inst->second.outputs.begin(), inst->second.outputs.end(), b.output) ==
            inst->second.outputs.end()) {
      throw Error(ErrorCode::BindingToNonOutput,
                  "binding '" + qualify(b.instance, b.output) + "' does not name a declared output");
    }
    if (master_ids.count(b.alias) || b.alias.find(kSeparator) != std::string::npos)
      throw Error(ErrorCode::InvalidSpec, "binding alias '" + b.alias + "' collides with a master id");
    if (!alias_target.emplace(b.alias, qualify(b.instance, b.output)).second)
      throw Error(ErrorCode::InvalidSpec, "binding alias '" + b.alias + "' declared twice");
  }

  for (const auto& node : master.nodes) {
    bn::NodeSpec copy = node;
    for (auto& parent : copy.parents) {
      if (auto it = alias_target.find(parent); it != alias_target.end()) parent = it->second;
    }
    flat.nodes.push_back(std::move(copy));
  }

  try {
    (void)bn::build_network(flat);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CycleDetected) throw Error(ErrorCode::CycleAfterFlatten, e.what());
    throw;
  }
  return flat;
}

OobnClass class_from_json(const json& doc) {
  OobnClass cls;
  cls.spec = bn::network_from_json(doc);
  if (doc.contains("interface")) {
    const auto& iface = doc.at("interface");
    cls.inputs = iface.value("inputs", std::vector<bn::NodeId>{});
    cls.outputs = iface.value("outputs", std::vector<bn::NodeId>{});
  }
  validate_class(cls);
  return cls;
}

json to_json(const OobnClass& cls) {
  json doc = bn::to_json(cls.spec);
  doc["interface"] = json{{"inputs", cls.inputs}, {"outputs", cls.outputs}};
  return doc;
}

OobnClass load_class(const std::filesystem::path& path) {
  return class_from_json(bn::read_json_file(path));
}

MasterSpec master_from_json(const json& doc, const std::filesystem::path& base_dir) {
  MasterSpec master;
  if (doc.contains("nodes")) master.nodes = bn::network_from_json(doc).nodes;
  for (const auto& inst : doc.value("instances", json::array())) {
    if (!inst.contains("name") || !inst.contains("class"))
      throw Error(ErrorCode::ParseError, "instance entries need 'name' and 'class'");
    const auto& cls = inst.at("class");
    master.instances.emplace_back(inst.at("name").get<std::string>(),
                                  cls.is_string() ? load_class(base_dir / cls.get<std::string>())
                                                  : class_from_json(cls));
  }
  for (const auto& b : doc.value("bindings", json::array())) {
    const auto output = b.at("output").get<std::string>();
    const auto dot = output.find(kSeparator);
    if (dot == std::string::npos)
      throw Error(ErrorCode::ParseError, "binding output '" + output + "' must be 'instance.node'");
    master.bindings.push_back({output.substr(0, dot), output.substr(dot + 1), b.at("as").get<std::string>()});
  }
  return master;
}

MasterSpec load_master(const std::filesystem::path& path) {
  return master_from_json(bn::read_json_file(path), path.parent_path());
}

}  // namespace chainvoice::oobn
