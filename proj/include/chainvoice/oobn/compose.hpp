#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chainvoice/bn/network.hpp"

namespace chainvoice::oobn {

inline constexpr char kSeparator = '.';

/// A reusable sub-network with a declared interface. Input nodes are roots
/// of the class; output nodes are ordinary internal nodes that a master may
/// bind to.
struct OobnClass {
  bn::NetworkSpec spec;
  std::vector<bn::NodeId> inputs;
  std::vector<bn::NodeId> outputs;
};

/// Makes `instance.output` available to master nodes under the id `alias`.
struct Binding {
  std::string instance;
  bn::NodeId output;
  bn::NodeId alias;
};

struct MasterSpec {
  /// Declaration order is preserved; names must be unique.
  std::vector<std::pair<std::string, OobnClass>> instances;
  std::vector<bn::NodeSpec> nodes;
  std::vector<Binding> bindings;
};

/// Throws InvalidSpec when the interface does not match the class network.
void validate_class(const OobnClass& cls);

/// Inlines every instance under `instance.node` ids and rewires bound
/// aliases to the shared output nodes. Instance nodes come first (in
/// instance order), then master nodes.
/// Errors: DuplicateInstanceName, BindingToNonOutput, CycleAfterFlatten,
/// InvalidSpec, and any bn::build_network validation error.
bn::NetworkSpec flatten(const MasterSpec& master);

std::string qualify(const std::string& instance, const bn::NodeId& node);

// Class documents extend the network format with
// "interface": {"inputs": [...], "outputs": [...]}.
OobnClass class_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const OobnClass& cls);
OobnClass load_class(const std::filesystem::path& path);

// Master documents extend the network format with
// "instances": [{"name": ..., "class": <path relative to the master file> | {class doc}}]
// and "bindings": [{"output": "instance.node", "as": alias}].
MasterSpec master_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
MasterSpec load_master(const std::filesystem::path& path);

}  // namespace chainvoice::oobn
