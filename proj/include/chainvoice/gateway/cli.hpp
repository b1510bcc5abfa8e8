#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "chainvoice/flow/financing.hpp"

namespace chainvoice::gateway {

/// Inputs of one simulation run. A fixed seed makes every output
/// byte-identical across runs.
struct RunConfig {
  std::string seed = "chainvoice";
  std::filesystem::path world_file;
  std::filesystem::path request_file;
  std::filesystem::path fixtures_file;
  std::filesystem::path models_dir;
  /// Empty: nothing written.
  std::filesystem::path output_dir;
  flow::FlowFault fault;
  std::optional<bool> financier_decision;
};

struct SimArtifacts {
  flow::FlowOutcome outcome;
  std::string journal;  // JSON lines
  nlohmann::json world_export;
  nlohmann::json pre_tx_export;  // world just before the crosschain transaction
};

/// Bootstraps the world, runs the financing sequence and, when an output
/// directory is set, writes ledger/<chain>.jsonl, journal.jsonl,
/// outcome.json, trace.txt and world.json there.
SimArtifacts run_simulation(const RunConfig& config);

/// `chainvoice` entry point; returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace chainvoice::gateway
