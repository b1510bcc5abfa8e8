#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "chainvoice/bn/inference.hpp"
#include "chainvoice/bn/network.hpp"

namespace chainvoice::testing {

inline std::filesystem::path source_dir() { return CHAINVOICE_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }
inline std::filesystem::path models_dir() { return source_dir() / "models"; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("chainvoice-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Random networks: nodes n0..n{k-1}, each with up to `max_parents` parents
// drawn from earlier nodes, 2 or 3 states, CPT entries bounded away from 0.
struct NetworkGen {
  std::mt19937_64 rng;
  std::size_t max_parents = 3;
  double ternary_share = 0.0;

  explicit NetworkGen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

  std::vector<double> row(std::size_t k) {
    std::vector<double> r(k);
    double sum = 0;
    for (auto& v : r) sum += (v = uniform(0.05, 1.0));
    for (auto& v : r) v /= sum;
    double rest = 1.0;
    for (std::size_t i = 0; i + 1 < k; ++i) rest -= r[i];
    r.back() = rest;
    return r;
  }

  bn::NetworkSpec spec(std::size_t nodes) {
    bn::NetworkSpec spec;
    for (std::size_t i = 0; i < nodes; ++i) {
      bn::NodeSpec node;
      node.id = "n" + std::to_string(i);
      node.label = node.id;
      const std::size_t k = uniform(0, 1) < ternary_share ? 3 : 2;
      for (std::size_t s = 0; s < k; ++s) node.states.push_back("s" + std::to_string(s));
      std::vector<std::size_t> pool(i);
      for (std::size_t p = 0; p < i; ++p) pool[p] = p;
      std::shuffle(pool.begin(), pool.end(), rng);
      const std::size_t parents = i == 0 ? 0 : below(std::min(max_parents, i) + 1);
      std::size_t rows = 1;
      for (std::size_t p = 0; p < parents; ++p) {
        node.parents.push_back(spec.nodes[pool[p]].id);
        rows *= spec.nodes[pool[p]].states.size();
      }
      for (std::size_t r = 0; r < rows; ++r) node.cpt.rows.push_back(row(k));
      spec.nodes.push_back(std::move(node));
    }
    return spec;
  }
};

// Every partial hard-evidence assignment over `nodes` (each node unobserved
// or in one of its states).
inline std::vector<bn::Evidence> all_evidence(const bn::Network& net, const std::vector<std::size_t>& nodes) {
  std::vector<bn::Evidence> out{bn::Evidence{}};
  for (auto n : nodes) {
    std::vector<bn::Evidence> next;
    for (const auto& ev : out) {
      next.push_back(ev);
      for (const auto& state : net.node(n).states) {
        auto e = ev;
        e.findings[net.node(n).id] = state;
        next.push_back(std::move(e));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace chainvoice::testing
