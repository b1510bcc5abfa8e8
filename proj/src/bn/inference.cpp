#include "chainvoice/bn/inference.hpp"

#include <algorithm>
#include <cmath>

#include "chainvoice/error.hpp"

namespace chainvoice::bn {

double Posterior::at(const std::string& state) const {
  for (const auto& [name, p] : distribution)
    if (name == state) return p;
  throw Error(ErrorCode::UnknownState, "posterior of '" + node + "' has no state '" + state + "'");
}

namespace {

constexpr std::size_t kUnobserved = static_cast<std::size_t>(-1);

/// Observed state per node index, kUnobserved where the node carries no finding.
std::vector<std::size_t> resolve_evidence(const Network& net, const Evidence& evidence) {
  std::vector<std::size_t> observed(net.size(), kUnobserved);
  for (const auto& [id, state] : evidence.findings) {
    std::size_t idx = net.require_index(id);
    observed[idx] = net.state_index(idx, state);
  }
  return observed;
}

Posterior make_posterior(const Network& net, std::size_t target, const std::vector<double>& weights,
                         double total) {
  Posterior post;
  post.node = net.node(target).id;
  const auto& states = net.node(target).states;
  for (std::size_t s = 0; s < states.size(); ++s) post.distribution.emplace_back(states[s], weights[s] / total);
  return post;
}

[[noreturn]] void impossible(const Evidence& evidence) {
  std::string what;
  for (const auto& [id, state] : evidence.findings) what += (what.empty() ? "" : ", ") + id + "=" + state;
  throw Error(ErrorCode::ImpossibleEvidence, "evidence {" + what + "} has probability zero");
}

// A table over a set of discrete variables, row-major with the last variable
// varying fastest.
struct Factor {
  std::vector<std::size_t> vars;
  std::vector<std::size_t> cards;
  std::vector<double> values;

  bool contains(std::size_t var) const { return std::find(vars.begin(), vars.end(), var) != vars.end(); }
};

// Advances a mixed-radix counter; returns false after the last assignment.
bool next_assignment(std::vector<std::size_t>& counter, const std::vector<std::size_t>& cards) {
  for (std::size_t i = counter.size(); i-- > 0;) {
    if (++counter[i] < cards[i]) return true;
    counter[i] = 0;
  }
  return false;
}

std::vector<std::size_t> strides_within(const Factor& f, const std::vector<std::size_t>& scope) {
  // Stride of each `scope` variable inside `f` (0 when absent).
  std::vector<std::size_t> own(f.vars.size(), 1);
  for (std::size_t i = f.vars.size(); i-- > 1;) own[i - 1] = own[i] * f.cards[i];
  std::vector<std::size_t> out(scope.size(), 0);
  for (std::size_t j = 0; j < scope.size(); ++j)
    for (std::size_t i = 0; i < f.vars.size(); ++i)
      if (f.vars[i] == scope[j]) out[j] = own[i];
  return out;
}

Factor cpt_factor(const Network& net, std::size_t node, const std::vector<std::size_t>& observed) {
  Factor f;
  std::vector<std::size_t> family(net.parents(node).begin(), net.parents(node).end());
  family.push_back(node);
  for (std::size_t v : family) {
    if (observed[v] != kUnobserved) continue;
    f.vars.push_back(v);
    f.cards.push_back(net.cardinality(v));
  }
  std::vector<std::size_t> assignment(net.size(), 0);
  for (std::size_t v : family)
    if (observed[v] != kUnobserved) assignment[v] = observed[v];

  const auto& rows = net.node(node).cpt.rows;
  std::vector<std::size_t> counter(f.vars.size(), 0);
  do {
    for (std::size_t i = 0; i < f.vars.size(); ++i) assignment[f.vars[i]] = counter[i];
    f.values.push_back(rows[net.cpt_row(node, assignment)][assignment[node]]);
  } while (next_assignment(counter, f.cards));
  return f;
}

Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  out.vars = a.vars;
  out.cards = a.cards;
  for (std::size_t i = 0; i < b.vars.size(); ++i) {
    if (!a.contains(b.vars[i])) {
      out.vars.push_back(b.vars[i]);
      out.cards.push_back(b.cards[i]);
    }
  }
  const auto sa = strides_within(a, out.vars);
  const auto sb = strides_within(b, out.vars);
  std::vector<std::size_t> counter(out.vars.size(), 0);
  do {
    std::size_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < counter.size(); ++i) {
      ia += counter[i] * sa[i];
      ib += counter[i] * sb[i];
    }
    out.values.push_back(a.values[ia] * b.values[ib]);
  } while (next_assignment(counter, out.cards));
  return out;
}

Factor sum_out(const Factor& f, std::size_t var) {
  Factor out;
  for (std::size_t i = 0; i < f.vars.size(); ++i) {
    if (f.vars[i] == var) continue;
    out.vars.push_back(f.vars[i]);
    out.cards.push_back(f.cards[i]);
  }
  std::size_t size = 1;
  for (std::size_t c : out.cards) size *= c;
  out.values.assign(size, 0.0);
  const auto so = strides_within(out, f.vars);
  std::vector<std::size_t> counter(f.vars.size(), 0);
  std::size_t flat = 0;
  do {
    std::size_t io = 0;
    for (std::size_t i = 0; i < counter.size(); ++i) io += counter[i] * so[i];
    out.values[io] += f.values[flat++];
  } while (next_assignment(counter, f.cards));
  return out;
}

}  // namespace

Posterior query(const Network& net, const Evidence& evidence, const NodeId& target) {
  const std::size_t target_idx = net.require_index(target);
  const auto observed = resolve_evidence(net, evidence);

  std::vector<Factor> factors;
  for (std::size_t node : net.topological_order()) factors.push_back(cpt_factor(net, node, observed));

  const bool target_observed = observed[target_idx] != kUnobserved;
  for (std::size_t var : net.topological_order()) {
    if (observed[var] != kUnobserved || var == target_idx) continue;
    std::vector<Factor> keep;
    std::optional<Factor> product;
    for (auto& f : factors) {
      if (!f.contains(var)) {
        keep.push_back(std::move(f));
      } else {
        product = product ? multiply(*product, f) : std::move(f);
      }
    }
    factors = std::move(keep);
    if (product) factors.push_back(sum_out(*product, var));
  }

  Factor result{{}, {}, {1.0}};
  for (const auto& f : factors) result = multiply(result, f);

  const std::size_t card = net.cardinality(target_idx);
  std::vector<double> weights(card, 0.0);
  if (target_observed) {
    weights[observed[target_idx]] = result.values.at(0);
  } else {
    // Only the target remains in scope.
    for (std::size_t s = 0; s < card; ++s) weights[s] = result.values.at(s);
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) impossible(evidence);
  return make_posterior(net, target_idx, weights, total);
}

Posterior enumerate_joint(const Network& net, const Evidence& evidence, const NodeId& target) {
  const std::size_t target_idx = net.require_index(target);
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < net.size(); ++i) {
    space *= net.cardinality(i);
    if (space > kMaxJointStates)
      throw Error(ErrorCode::StateSpaceTooLarge, "joint state space exceeds 2^20 configurations");
  }
  const auto observed = resolve_evidence(net, evidence);

  std::vector<std::size_t> free_vars;
  std::vector<std::size_t> free_cards;
  std::vector<std::size_t> assignment(net.size(), 0);
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (observed[i] != kUnobserved) {
      assignment[i] = observed[i];
    } else {
      free_vars.push_back(i);
      free_cards.push_back(net.cardinality(i));
    }
  }

  std::vector<double> weights(net.cardinality(target_idx), 0.0);
  std::vector<std::size_t> counter(free_vars.size(), 0);
  do {
    for (std::size_t k = 0; k < free_vars.size(); ++k) assignment[free_vars[k]] = counter[k];
    double joint = 1.0;
    for (std::size_t i = 0; i < net.size(); ++i)
      joint *= net.node(i).cpt.rows[net.cpt_row(i, assignment)][assignment[i]];
    weights[assignment[target_idx]] += joint;
  } while (next_assignment(counter, free_cards));

  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) impossible(evidence);
  return make_posterior(net, target_idx, weights, total);
}

}  // namespace chainvoice::bn
