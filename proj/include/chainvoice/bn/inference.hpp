#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "chainvoice/bn/network.hpp"

namespace chainvoice::bn {

/// Hard findings: node id -> observed state name.
struct Evidence {
  std::map<NodeId, std::string> findings;

  bool empty() const noexcept { return findings.empty(); }
  bool contains(const NodeId& id) const { return findings.count(id) != 0; }

  friend bool operator==(const Evidence&, const Evidence&) = default;
};

struct Posterior {
  NodeId node;
  /// One entry per node state, in the node's state order.
  std::vector<std::pair<std::string, double>> distribution;

  /// Throws UnknownState.
  double at(const std::string& state) const;
};

/// Exact P(target | evidence) by variable elimination. Non-query,
/// non-evidence nodes are eliminated in ascending topological rank.
/// Errors: UnknownNode, UnknownState, ImpossibleEvidence.
Posterior query(const Network& net, const Evidence& evidence, const NodeId& target);

inline constexpr std::uint64_t kMaxJointStates = std::uint64_t{1} << 20;

/// Reference posterior obtained by summing the full joint distribution over
/// every configuration consistent with the evidence. Shares no code with
/// `query` beyond the validated network.
/// Errors: StateSpaceTooLarge, UnknownNode, UnknownState, ImpossibleEvidence.
Posterior enumerate_joint(const Network& net, const Evidence& evidence, const NodeId& target);

}  // namespace chainvoice::bn
