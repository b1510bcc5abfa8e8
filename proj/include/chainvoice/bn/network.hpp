#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace chainvoice::bn {

using NodeId = std::string;

/// Conditional probability table. `rows[r][s]` is P(node = states[s] | parent
/// combination r). Rows are ordered lexicographically over parent state
/// indices with the first-listed parent most significant.
struct Cpt {
  std::vector<std::vector<double>> rows;

  friend bool operator==(const Cpt&, const Cpt&) = default;
};

struct NodeSpec {
  NodeId id;
  std::string label;
  std::vector<std::string> states;
  std::vector<NodeId> parents;
  Cpt cpt;

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct NetworkSpec {
  std::vector<NodeSpec> nodes;

  /// (parent, child) pairs in declaration order.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  const NodeSpec* find(const NodeId& id) const;
  NodeSpec* find(const NodeId& id);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline constexpr double kCptRowTolerance = 1e-9;

/// A validated network. Immutable after construction; all queries are const
/// and safe to run concurrently.
class Network {
 public:
  const NetworkSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return spec_.nodes.size(); }

  const NodeSpec& node(std::size_t index) const { return spec_.nodes.at(index); }
  std::optional<std::size_t> index_of(const NodeId& id) const;
  /// Throws UnknownNode.
  std::size_t require_index(const NodeId& id) const;

  std::size_t cardinality(std::size_t index) const { return spec_.nodes[index].states.size(); }
  std::span<const std::size_t> parents(std::size_t index) const { return parent_index_[index]; }
  /// Node indices in topological order. Ties are broken by node id so the
  /// order does not depend on declaration order.
  std::span<const std::size_t> topological_order() const noexcept { return topo_order_; }
  std::size_t topological_rank(std::size_t index) const { return topo_rank_[index]; }

  /// Index of `state` in the node's state list; throws UnknownState.
  std::size_t state_index(std::size_t node, const std::string& state) const;

  /// Row of the CPT selected by a full assignment of node states, indexed by
  /// node index.
  std::size_t cpt_row(std::size_t node, std::span<const std::size_t> assignment) const;

 private:
  friend Network build_network(NetworkSpec spec);

  NetworkSpec spec_;
  std::map<NodeId, std::size_t> index_;
  std::vector<std::vector<std::size_t>> parent_index_;
  std::vector<std::size_t> topo_order_;
  std::vector<std::size_t> topo_rank_;
};

/// Validates `spec` and precomputes the topological order.
/// Errors: InvalidSpec, CycleDetected, CptShapeMismatch, CptRowNotNormalized.
Network build_network(NetworkSpec spec);

}  // namespace chainvoice::bn
