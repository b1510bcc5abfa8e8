#include "chainvoice/finance/model.hpp"

#include "chainvoice/bn/io.hpp"
#include "chainvoice/error.hpp"

namespace chainvoice::finance {

using nlohmann::json;

namespace {

constexpr const char* kSupplierProfileFile = "supplier_profile.json";
constexpr const char* kFinancialIncentiveFile = "financial_incentive.json";
constexpr const char* kMasterFile = "overall_master.json";
constexpr const char* kOverallFile = "overall.json";

bn::NodeSpec uniform_root(const char* id, const char* label, const char* first, const char* second) {
  return bn::NodeSpec{id, label, {first, second}, {}, binary_cpt({0.5})};
}

}  // namespace

std::string flat_id(const char* instance, const char* node) { return oobn::qualify(instance, node); }

bn::Cpt binary_cpt(const std::vector<double>& first_state_probability) {
  bn::Cpt cpt;
  for (double p : first_state_probability) cpt.rows.push_back({p, 1.0 - p});
  return cpt;
}

oobn::OobnClass supplier_profile_class(const bn::Cpt& profile_cpt) {
  using namespace ids;
  oobn::OobnClass cls;
  cls.spec.nodes = {
      uniform_root(kTier1, "Tier 1 Supplier?", states::kYes, states::kNo),
      uniform_root(kGWaL, "Golden Wait-a-Lot Supply Chain?", states::kYes, states::kNo),
      bn::NodeSpec{kSupplierProfile, "Supplier Profile", {states::kLowRisk, states::kHighRisk},
                   {kTier1, kGWaL}, profile_cpt},
  };
  cls.inputs = {kTier1, kGWaL};
  cls.outputs = {kSupplierProfile};
  return cls;
}

oobn::OobnClass financial_incentive_class(const bn::Cpt& incentive_cpt) {
  using namespace ids;
  oobn::OobnClass cls;
  cls.spec.nodes = {
      uniform_root(kCreditRating, "Credit rating", states::kPassed, states::kFailed),
      uniform_root(kFinancialRewards, "Financial rewards", states::kAdditional, states::kStandard),
      bn::NodeSpec{kFinancialIncentive, "Financial incentive", {states::kCompelling, states::kNotCompelling},
                   {kCreditRating, kFinancialRewards}, incentive_cpt},
  };
  cls.inputs = {kCreditRating, kFinancialRewards};
  cls.outputs = {kFinancialIncentive};
  return cls;
}

std::vector<bn::NodeSpec> overall_master_nodes(const MasterCpts& cpts) {
  using namespace ids;
  return {
      bn::NodeSpec{kPerceptionOfRisk, "Perception of risk",
                   {states::kAcceptableRisk, states::kUnacceptableRisk},
                   {kSupplierProfile, kFinancialIncentive}, cpts.perception_of_risk},
      bn::NodeSpec{kDecision, "Invoice financing decision", {states::kFund, states::kDoNotFund},
                   {kPerceptionOfRisk}, cpts.decision},
      uniform_root(kLowerTierFunded, "Lower tier is funded by invoice finance company", states::kYes,
                   states::kNo),
      bn::NodeSpec{kStability, "Supply Chain Stability", {states::kStable, states::kUnstable},
                   {kDecision, kLowerTierFunded}, cpts.stability},
  };
}

oobn::MasterSpec overall_master(const oobn::OobnClass& profile, const oobn::OobnClass& incentive,
                                const std::vector<bn::NodeSpec>& master_nodes) {
  using namespace ids;
  oobn::MasterSpec master;
  master.instances = {{kSupplierProfileInstance, profile}, {kFinancialIncentiveInstance, incentive}};
  master.nodes = master_nodes;
  master.bindings = {
      {kSupplierProfileInstance, kSupplierProfile, kSupplierProfile},
      {kFinancialIncentiveInstance, kFinancialIncentive, kFinancialIncentive},
  };
  return master;
}

const bn::Network& ModelSet::get(const std::string& model) const {
  if (model == kSupplierProfileModel) return supplier_profile;
  if (model == kFinancialIncentiveModel) return financial_incentive;
  if (model == kOverallModel) return overall;
  throw Error(ErrorCode::UnknownNode, "unknown model '" + model + "'");
}

std::vector<std::string> ModelSet::names() {
  return {kSupplierProfileModel, kFinancialIncentiveModel, kOverallModel};
}

ModelSet build_model_set(const FinanceModels& models) {
  return ModelSet{bn::build_network(models.supplier_profile.spec),
                  bn::build_network(models.financial_incentive.spec), bn::build_network(models.overall)};
}

void save_models(const FinanceModels& models, const std::filesystem::path& dir) {
  bn::write_json_file(dir / kSupplierProfileFile, oobn::to_json(models.supplier_profile));
  bn::write_json_file(dir / kFinancialIncentiveFile, oobn::to_json(models.financial_incentive));

  json master = bn::to_json(bn::NetworkSpec{models.overall_master.nodes});
  master["instances"] = json::array();
  for (const auto& [name, cls] : models.overall_master.instances) {
    const char* file = name == ids::kSupplierProfileInstance ? kSupplierProfileFile : kFinancialIncentiveFile;
    master["instances"].push_back(json{{"name", name}, {"class", file}});
  }
  master["bindings"] = json::array();
  for (const auto& b : models.overall_master.bindings)
    master["bindings"].push_back(json{{"output", oobn::qualify(b.instance, b.output)}, {"as", b.alias}});
  bn::write_json_file(dir / kMasterFile, master);

  bn::write_json_file(dir / kOverallFile, bn::to_json(models.overall));
}

FinanceModels load_models(const std::filesystem::path& dir) {
  FinanceModels models;
  models.supplier_profile = oobn::load_class(dir / kSupplierProfileFile);
  models.financial_incentive = oobn::load_class(dir / kFinancialIncentiveFile);
  models.overall_master = oobn::load_master(dir / kMasterFile);
  models.overall = bn::load_network(dir / kOverallFile);
  if (oobn::flatten(models.overall_master) != models.overall)
    throw Error(ErrorCode::InvalidSpec, (dir / kOverallFile).string() + " does not match its master document");
  return models;
}

bool should_fund(double probability_fund, double threshold) { return probability_fund > threshold; }

}  // namespace chainvoice::finance
