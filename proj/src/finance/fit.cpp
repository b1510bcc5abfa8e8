#include "chainvoice/finance/fit.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "chainvoice/error.hpp"

namespace chainvoice::finance {

namespace {

double first_state_value(const bn::NodeSpec& node, const std::string& state, double probability) {
  if (node.states.size() != 2)
    throw Error(ErrorCode::InvalidSpec, "node '" + node.id + "' is not binary");
  if (state == node.states[0]) return probability;
  if (state == node.states[1]) return 1.0 - probability;
  throw Error(ErrorCode::UnknownState, "state '" + state + "' is not a state of '" + node.id + "'");
}

/// Row index of a parent assignment, first parent most significant.
std::size_t row_of(const bn::NetworkSpec& spec, const bn::NodeSpec& node, const bn::Evidence& evidence) {
  std::size_t row = 0;
  for (const auto& parent_id : node.parents) {
    const auto* parent = spec.find(parent_id);
    const auto& st = parent->states;
    const auto pos = std::find(st.begin(), st.end(), evidence.findings.at(parent_id));
    if (pos == st.end())
      throw Error(ErrorCode::UnknownState, "state '" + evidence.findings.at(parent_id) + "' of '" + parent_id + "'");
    row = row * st.size() + static_cast<std::size_t>(pos - st.begin());
  }
  return row;
}

}  // namespace

std::vector<double> solve_pinned_rows(std::size_t row_count, std::vector<RowEquation> equations, double tol,
                                      std::string_view node) {
  std::stable_sort(equations.begin(), equations.end(),
                   [](const RowEquation& a, const RowEquation& b) { return a.rows.size() < b.rows.size(); });

  std::vector<std::optional<double>> solved(row_count);
  std::vector<bool> used(equations.size(), false);
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t e = 0; e < equations.size() && !progress; ++e) {
      if (used[e]) continue;
      const auto& eq = equations[e];
      std::size_t unknown_count = 0, unknown = 0;
      double known_sum = 0.0;
      for (std::size_t r : eq.rows) {
        if (solved[r]) {
          known_sum += *solved[r];
        } else {
          ++unknown_count;
          unknown = r;
        }
      }
      if (unknown_count > 1) continue;
      used[e] = true;
      if (unknown_count == 1) {
        solved[unknown] = eq.value * static_cast<double>(eq.rows.size()) - known_sum;
        progress = true;
      }
    }
  }

  std::vector<double> rows(row_count);
  for (std::size_t r = 0; r < row_count; ++r) {
    if (!solved[r])
      throw Error(ErrorCode::InconsistentTargets,
                  std::string(node) + ": row " + std::to_string(r) + " is not determined by the targets");
    if (*solved[r] < -tol || *solved[r] > 1.0 + tol)
      throw Error(ErrorCode::InconsistentTargets,
                  std::string(node) + ": row " + std::to_string(r) + " solves to " + std::to_string(*solved[r]));
    rows[r] = std::clamp(*solved[r], 0.0, 1.0);
  }
  for (const auto& eq : equations) {
    double mean = 0.0;
    for (std::size_t r : eq.rows) mean += rows[r];
    mean /= static_cast<double>(eq.rows.size());
    if (std::abs(mean - eq.value) > tol)
      throw Error(ErrorCode::InconsistentTargets, std::string(node) + ": target '" + eq.source + "' misses by " +
                                                      std::to_string(mean - eq.value));
  }
  return rows;
}

std::vector<RowEquation> row_equations(const bn::NetworkSpec& structure, const bn::NodeId& node_id,
                                       const std::vector<ScenarioDef>& scenarios) {
  const auto* node = structure.find(node_id);
  if (!node) throw Error(ErrorCode::UnknownNode, "node '" + node_id + "' is not in the structure");

  std::vector<std::size_t> cards;
  for (const auto& p : node->parents) cards.push_back(structure.find(p)->states.size());
  std::size_t row_count = 1;
  for (std::size_t c : cards) row_count *= c;

  std::vector<RowEquation> out;
  for (const auto& s : scenarios) {
    for (const auto& t : s.targets) {
      if (t.node != node_id) continue;
      bool parents_only = true;
      for (const auto& [id, state] : s.evidence.findings)
        if (std::find(node->parents.begin(), node->parents.end(), id) == node->parents.end()) parents_only = false;
      if (!parents_only) continue;

      RowEquation eq{{}, first_state_value(*node, t.state, t.expected), s.name};
      for (std::size_t row = 0; row < row_count; ++row) {
        // Decode the row into parent state indices, most significant first.
        std::size_t rest = row;
        bool match = true;
        for (std::size_t p = node->parents.size(); p-- > 0;) {
          const std::size_t state_idx = rest % cards[p];
          rest /= cards[p];
          auto it = s.evidence.findings.find(node->parents[p]);
          if (it != s.evidence.findings.end() && structure.find(node->parents[p])->states[state_idx] != it->second)
            match = false;
        }
        if (match) eq.rows.push_back(row);
      }
      if (eq.rows.empty())
        throw Error(ErrorCode::UnknownState, "scenario '" + s.name + "' observes a state outside the parents");
      out.push_back(std::move(eq));
    }
  }
  return out;
}

SubmodelCpts derive_submodel_cpts(const std::vector<ScenarioDef>& scenarios, double tol) {
  auto solve = [&](const oobn::OobnClass& structure, const char* model, const char* node) {
    std::vector<ScenarioDef> own;
    for (const auto& s : scenarios)
      if (s.model == model) own.push_back(s);
    auto eqs = row_equations(structure.spec, node, own);
    return binary_cpt(solve_pinned_rows(structure.spec.find(node)->cpt.rows.size(), std::move(eqs), tol, node));
  };
  const bn::Cpt placeholder = binary_cpt({0.5, 0.5, 0.5, 0.5});
  return SubmodelCpts{
      solve(supplier_profile_class(placeholder), kSupplierProfileModel, ids::kSupplierProfile),
      solve(financial_incentive_class(placeholder), kFinancialIncentiveModel, ids::kFinancialIncentive),
  };
}

std::vector<FitTarget> overall_fit_targets(const std::vector<ScenarioDef>& scenarios) {
  std::vector<FitTarget> out;
  for (const auto& s : scenarios) {
    if (s.model != kOverallModel) continue;
    for (const auto& t : s.targets) out.push_back({s.evidence, t.node, t.state, t.expected, t.tolerance, s.name});
  }
  return out;
}

namespace {

struct FreeEntry {
  std::size_t node;  // index into the flattened spec
  std::size_t row;
};

// Everything downstream of `start` in `spec`.
std::set<bn::NodeId> descendants(const bn::NetworkSpec& spec, const bn::NodeId& start) {
  std::set<bn::NodeId> out;
  std::vector<bn::NodeId> frontier{start};
  while (!frontier.empty()) {
    const auto current = frontier.back();
    frontier.pop_back();
    for (const auto& node : spec.nodes) {
      if (std::find(node.parents.begin(), node.parents.end(), current) != node.parents.end() &&
          out.insert(node.id).second)
        frontier.push_back(node.id);
    }
  }
  return out;
}

std::string residual_report(const std::vector<FitResidual>& residuals) {
  std::ostringstream os;
  for (const auto& r : residuals)
    os << "\n  " << r.target.source << ": P(" << r.target.node << "=" << r.target.state << ") = " << r.actual
       << ", target " << r.target.value << ", residual " << r.residual << " (tolerance " << r.target.tolerance
       << ")";
  return os.str();
}

}  // namespace

FitResult fit_overall_cpts(const SubmodelCpts& submodels, const std::vector<FitTarget>& targets,
                           const FitOptions& options) {
  const MasterCpts start{binary_cpt({0.5, 0.5, 0.5, 0.5}), binary_cpt({0.5, 0.5}), binary_cpt({0.5, 0.5, 0.5, 0.5})};
  const auto master_nodes = overall_master_nodes(start);
  bn::NetworkSpec flat = oobn::flatten(overall_master(supplier_profile_class(submodels.supplier_profile),
                                                      financial_incentive_class(submodels.financial_incentive),
                                                      master_nodes));

  // Non-root master nodes carry the free entries.
  std::vector<FreeEntry> entries;
  for (const auto& m : master_nodes) {
    if (m.parents.empty()) continue;
    std::size_t idx = 0;
    while (flat.nodes[idx].id != m.id) ++idx;
    for (std::size_t row = 0; row < m.cpt.rows.size(); ++row) entries.push_back({idx, row});
  }
  auto entry_of = [&](std::size_t node, std::size_t row) -> std::optional<std::size_t> {
    for (std::size_t k = 0; k < entries.size(); ++k)
      if (entries[k].node == node && entries[k].row == row) return k;
    return std::nullopt;
  };

  // Targets observing every parent of a fitted node (and nothing below it)
  // pin that row outright.
  std::vector<std::optional<double>> pinned(entries.size());
  std::vector<const FitTarget*> fitted_targets;
  for (const auto& t : targets) {
    const auto* node = flat.find(t.node);
    if (!node) throw Error(ErrorCode::UnknownNode, "fit target node '" + t.node + "' is not in the overall model");
    bool pins = !node->parents.empty() && !t.evidence.contains(t.node);
    for (const auto& p : node->parents) pins = pins && t.evidence.contains(p);
    if (pins) {
      for (const auto& d : descendants(flat, t.node)) pins = pins && !t.evidence.contains(d);
    }
    std::optional<std::size_t> k;
    if (pins) k = entry_of(static_cast<std::size_t>(node - flat.nodes.data()), row_of(flat, *node, t.evidence));
    if (k) {
      pinned[*k] = first_state_value(*node, t.state, t.value);
    } else {
      fitted_targets.push_back(&t);
    }
  }

  std::vector<std::size_t> free_index;
  for (std::size_t k = 0; k < entries.size(); ++k)
    if (!pinned[k]) free_index.push_back(k);
  const auto n = static_cast<Eigen::Index>(free_index.size());
  const auto m = static_cast<Eigen::Index>(fitted_targets.size());

  auto apply = [&](const Eigen::VectorXd& x) {
    for (std::size_t k = 0; k < entries.size(); ++k) {
      double p = pinned[k] ? *pinned[k] : 0.0;
      if (!pinned[k]) {
        const auto pos = std::find(free_index.begin(), free_index.end(), k) - free_index.begin();
        p = x[pos];
      }
      flat.nodes[entries[k].node].cpt.rows[entries[k].row] = {p, 1.0 - p};
    }
    return bn::build_network(flat);
  };
  auto weight = [&](const FitTarget& t) { return std::max(1.0, options.tol / t.tolerance); };
  auto residuals = [&](const Eigen::VectorXd& x) {
    const auto net = apply(x);
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& t = *fitted_targets[static_cast<std::size_t>(i)];
      r[i] = weight(t) * (bn::query(net, t.evidence, t.node).at(t.state) - t.value);
    }
    return r;
  };

  // Bounded Levenberg-Marquardt with an active set on the [0,1] box.
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 0.5);
  Eigen::VectorXd r = residuals(x);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  constexpr double kStep = 1e-6;
  int iterations = 0;
  for (; iterations < options.max_iterations && n > 0; ++iterations) {
    Eigen::MatrixXd jac(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::VectorXd hi = x, lo = x;
      hi[j] = std::min(1.0, x[j] + kStep);
      lo[j] = std::max(0.0, x[j] - kStep);
      jac.col(j) = (residuals(hi) - residuals(lo)) / (hi[j] - lo[j]);
    }
    const Eigen::VectorXd grad = jac.transpose() * r;
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool pinned_low = x[j] <= 0.0 && grad[j] > 0.0;
      const bool pinned_high = x[j] >= 1.0 && grad[j] < 0.0;
      if (!pinned_low && !pinned_high) active.push_back(j);
    }
    double projected = 0.0;
    for (auto j : active) projected = std::max(projected, std::abs(grad[j]));
    if (active.empty() || projected < 1e-15) break;

    const auto a = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd ja(m, a);
    for (Eigen::Index k = 0; k < a; ++k) ja.col(k) = jac.col(active[static_cast<std::size_t>(k)]);
    const Eigen::MatrixXd normal = ja.transpose() * ja;
    Eigen::VectorXd rhs(a);
    for (Eigen::Index k = 0; k < a; ++k) rhs[k] = -grad[active[static_cast<std::size_t>(k)]];

    bool improved = false;
    while (lambda < 1e12) {
      Eigen::MatrixXd damped = normal;
      for (Eigen::Index k = 0; k < a; ++k) damped(k, k) += lambda * (normal(k, k) + 1e-9);
      const Eigen::VectorXd delta = damped.ldlt().solve(rhs);
      Eigen::VectorXd candidate = x;
      for (Eigen::Index k = 0; k < a; ++k) {
        const auto j = active[static_cast<std::size_t>(k)];
        candidate[j] = std::clamp(x[j] + delta[k], 0.0, 1.0);
      }
      const Eigen::VectorXd r_new = residuals(candidate);
      const double c_new = r_new.squaredNorm();
      if (c_new < cost) {
        const double gain = cost - c_new;
        const double step = (candidate - x).norm();
        x = candidate;
        r = r_new;
        cost = c_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = gain > 1e-32 && step > 1e-15;
        break;
      }
      lambda *= 4.0;
    }
    if (!improved) break;
  }

  FitResult result;
  const auto net = apply(x);
  for (const auto& t : targets) {
    const double actual = bn::query(net, t.evidence, t.node).at(t.state);
    result.residuals.push_back({t, actual, actual - t.value});
    result.max_abs_residual = std::max(result.max_abs_residual, std::abs(actual - t.value));
  }
  result.iterations = iterations;
  for (const auto& res : result.residuals) {
    if (std::abs(res.residual) > std::min(res.target.tolerance, options.tol))
      throw Error(ErrorCode::FitFailed, "residuals after " + std::to_string(iterations) + " iterations:" +
                                            residual_report(result.residuals));
  }

  auto rows_of = [&](const char* id) { return flat.find(id)->cpt; };
  result.cpts = MasterCpts{rows_of(ids::kPerceptionOfRisk), rows_of(ids::kDecision), rows_of(ids::kStability)};
  result.overall = flat;
  return result;
}

FinanceModels build_models(const std::vector<ScenarioDef>& scenarios, const FitOptions& options) {
  const auto submodels = derive_submodel_cpts(scenarios, options.tol);
  const auto fit = fit_overall_cpts(submodels, overall_fit_targets(scenarios), options);
  FinanceModels models;
  models.supplier_profile = supplier_profile_class(submodels.supplier_profile);
  models.financial_incentive = financial_incentive_class(submodels.financial_incentive);
  models.overall_master =
      overall_master(models.supplier_profile, models.financial_incentive, overall_master_nodes(fit.cpts));
  models.overall = oobn::flatten(models.overall_master);
  return models;
}

}  // namespace chainvoice::finance
