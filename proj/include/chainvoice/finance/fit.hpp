#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "chainvoice/bn/inference.hpp"
#include "chainvoice/finance/model.hpp"
#include "chainvoice/finance/scenario.hpp"

namespace chainvoice::finance {

/// "The mean of P(first state) over `rows` equals `value`": what a scenario
/// observing a subset of a node's uniformly distributed root parents says
/// about that node's CPT.
struct RowEquation {
  std::vector<std::size_t> rows;
  double value = 0.0;
  std::string source;
};

/// Solves for P(first state) per row by successive pinning: equations are
/// visited from most to least specific, any equation with a single unknown
/// row pins it, and the rest become checks. Throws InconsistentTargets when
/// a row stays undetermined or any equation misses by more than `tol`.
std::vector<double> solve_pinned_rows(std::size_t row_count, std::vector<RowEquation> equations,
                                      double tol, std::string_view node);

/// Builds the row equations for a binary node whose parents are uniform
/// roots, from every scenario of `model` that targets `node` and observes
/// only (a subset of) its parents.
std::vector<RowEquation> row_equations(const bn::NetworkSpec& structure, const bn::NodeId& node,
                                       const std::vector<ScenarioDef>& scenarios);

struct SubmodelCpts {
  bn::Cpt supplier_profile;
  bn::Cpt financial_incentive;
};

SubmodelCpts derive_submodel_cpts(const std::vector<ScenarioDef>& scenarios, double tol = 0.01);

struct FitTarget {
  bn::Evidence evidence;
  bn::NodeId node;
  std::string state;
  double value = 0.0;
  double tolerance = 0.01;
  std::string source;
};

struct FitResidual {
  FitTarget target;
  double actual = 0.0;
  double residual = 0.0;  // actual - value
};

struct FitOptions {
  double tol = 0.01;
  int max_iterations = 400;
};

struct FitResult {
  MasterCpts cpts;
  bn::NetworkSpec overall;  // flattened, with fitted master CPTs
  std::vector<FitResidual> residuals;
  double max_abs_residual = 0.0;
  int iterations = 0;
};

/// Fit targets for the overall model from its scenarios.
std::vector<FitTarget> overall_fit_targets(const std::vector<ScenarioDef>& scenarios);

/// Fits the master CPTs (risk perception, decision, stability) by bounded
/// Levenberg-Marquardt from a fixed all-0.5 start. Rows fully determined by
/// a target observing all of a node's parents are pinned first. Throws
/// FitFailed listing every residual when any target misses its tolerance or
/// `options.tol`.
FitResult fit_overall_cpts(const SubmodelCpts& submodels, const std::vector<FitTarget>& targets,
                           const FitOptions& options = {});

/// Derivation + fit in one go.
FinanceModels build_models(const std::vector<ScenarioDef>& scenarios, const FitOptions& options = {});

}  // namespace chainvoice::finance
