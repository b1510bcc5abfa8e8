#pragma once

#include <filesystem>

#include <json.hpp>

#include "chainvoice/bn/inference.hpp"
#include "chainvoice/bn/network.hpp"

namespace chainvoice::bn {

// Network documents: {"nodes":[{"id","label","states":[],"parents":[],"cpt":[[...]]}]}

NetworkSpec network_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const NetworkSpec& spec);
nlohmann::json to_json(const NodeSpec& node);
NodeSpec node_from_json(const nlohmann::json& doc);

Evidence evidence_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Evidence& evidence);
nlohmann::json to_json(const Posterior& posterior);

/// Reads and parses a JSON file; throws ParseError with the path on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes `doc` with two-space indentation and a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

NetworkSpec load_network(const std::filesystem::path& path);

}  // namespace chainvoice::bn
