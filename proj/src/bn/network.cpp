#include "chainvoice/bn/network.hpp"

#include <cmath>
#include <set>

#include "chainvoice/error.hpp"

namespace chainvoice::bn {

std::vector<std::pair<NodeId, NodeId>> NetworkSpec::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (const auto& node : nodes)
    for (const auto& parent : node.parents) out.emplace_back(parent, node.id);
  return out;
}

const NodeSpec* NetworkSpec::find(const NodeId& id) const {
  for (const auto& node : nodes)
    if (node.id == id) return &node;
  return nullptr;
}

NodeSpec* NetworkSpec::find(const NodeId& id) {
  for (auto& node : nodes)
    if (node.id == id) return &node;
  return nullptr;
}

std::optional<std::size_t> Network::index_of(const NodeId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Network::require_index(const NodeId& id) const {
  auto idx = index_of(id);
  if (!idx) throw Error(ErrorCode::UnknownNode, "node '" + id + "' is not in the network");
  return *idx;
}

std::size_t Network::state_index(std::size_t node, const std::string& state) const {
  const auto& states = spec_.nodes[node].states;
  for (std::size_t s = 0; s < states.size(); ++s)
    if (states[s] == state) return s;
  throw Error(ErrorCode::UnknownState,
              "state '" + state + "' is not a state of node '" + spec_.nodes[node].id + "'");
}

std::size_t Network::cpt_row(std::size_t node, std::span<const std::size_t> assignment) const {
  std::size_t row = 0;
  for (std::size_t p : parent_index_[node]) row = row * cardinality(p) + assignment[p];
  return row;
}

namespace {

void check_node_shape(const NodeSpec& node, std::size_t expected_rows) {
  const auto& rows = node.cpt.rows;
  if (rows.size() != expected_rows) {
    throw Error(ErrorCode::CptShapeMismatch,
                "node '" + node.id + "' has " + std::to_string(rows.size()) + " CPT rows, expected " +
                    std::to_string(expected_rows));
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != node.states.size()) {
      throw Error(ErrorCode::CptShapeMismatch,
                  "node '" + node.id + "' row " + std::to_string(r) + " has " +
                      std::to_string(rows[r].size()) + " entries, expected " +
                      std::to_string(node.states.size()));
    }
    double sum = 0.0;
    for (double p : rows[r]) {
      if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        throw Error(ErrorCode::CptRowNotNormalized,
                    "node '" + node.id + "' row " + std::to_string(r) + " has an entry outside [0,1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kCptRowTolerance) {
      throw Error(ErrorCode::CptRowNotNormalized,
                  "node '" + node.id + "' row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
  }
}

}  // namespace

Network build_network(NetworkSpec spec) {
  Network net;
  const std::size_t n = spec.nodes.size();

  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = spec.nodes[i];
    if (node.id.empty()) throw Error(ErrorCode::InvalidSpec, "node with empty id");
    if (!net.index_.emplace(node.id, i).second)
      throw Error(ErrorCode::InvalidSpec, "duplicate node id '" + node.id + "'");
    if (node.states.size() < 2)
      throw Error(ErrorCode::InvalidSpec, "node '" + node.id + "' needs at least two states");
    std::set<std::string> seen(node.states.begin(), node.states.end());
    if (seen.size() != node.states.size())
      throw Error(ErrorCode::InvalidSpec, "node '" + node.id + "' has duplicate state names");
  }

  net.parent_index_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = spec.nodes[i];
    std::set<NodeId> seen;
    std::size_t rows = 1;
    for (const auto& parent : node.parents) {
      if (parent == node.id) throw Error(ErrorCode::CycleDetected, "self-loop on '" + node.id + "'");
      auto it = net.index_.find(parent);
      if (it == net.index_.end())
        throw Error(ErrorCode::InvalidSpec,
                    "edge " + parent + " -> " + node.id + " refers to an unknown node");
      if (!seen.insert(parent).second)
        throw Error(ErrorCode::InvalidSpec, "node '" + node.id + "' lists parent '" + parent + "' twice");
      net.parent_index_[i].push_back(it->second);
      rows *= spec.nodes[it->second].states.size();
    }
    check_node_shape(node, rows);
  }

  // Kahn's algorithm; ready nodes are taken in id order.
  std::vector<std::size_t> pending(n, 0);
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    pending[i] = net.parent_index_[i].size();
    for (std::size_t p : net.parent_index_[i]) children[p].push_back(i);
  }
  std::set<std::pair<NodeId, std::size_t>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (pending[i] == 0) ready.emplace(spec.nodes[i].id, i);
  net.topo_rank_.assign(n, 0);
  while (!ready.empty()) {
    auto [id, i] = *ready.begin();
    ready.erase(ready.begin());
    net.topo_rank_[i] = net.topo_order_.size();
    net.topo_order_.push_back(i);
    for (std::size_t c : children[i])
      if (--pending[c] == 0) ready.emplace(spec.nodes[c].id, c);
  }
  if (net.topo_order_.size() != n) {
    std::string involved;
    for (std::size_t i = 0; i < n; ++i)
      if (pending[i] != 0) involved += (involved.empty() ? "" : ", ") + spec.nodes[i].id;
    throw Error(ErrorCode::CycleDetected, "cycle through {" + involved + "}");
  }

  net.spec_ = std::move(spec);
  return net;
}

}  // namespace chainvoice::bn
