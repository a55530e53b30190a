#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "fleetsurv/dataset.hpp"
#include "fleetsurv/survival/base.hpp"
#include "fleetsurv/survival/cox.hpp"
#include "fleetsurv/survival/curve.hpp"
#include "fleetsurv/survival/deepsurv.hpp"
#include "fleetsurv/survival/forest.hpp"
#include "fleetsurv/survival/kaplan_meier.hpp"
#include "fleetsurv/survival/mtlr.hpp"

namespace fleetsurv::survival {

enum class Family { kCph, kMtlr, kCsf, kDeepSurv };
std::string_view to_string(Family f);
Family parse_family(const std::string& token);

using ModelConfig = std::variant<CoxConfig, MtlrConfig, ForestConfig, DeepSurvConfig>;

Family family_of(const ModelConfig& config);
ModelConfig default_config(Family family);
/// Copies `seed` into the config where the family uses one.
void set_seed(ModelConfig& config, std::uint64_t seed);
/// Iterative families report their epoch count; Cox and forest return 0.
int epochs_of(const ModelConfig& config);

std::unique_ptr<SurvivalModel> fit_model(const ModelConfig& config, const SurvivalDataset& data,
                                         const TrainingMonitor* monitor = nullptr);

/// Day-valued predictions, evaluated in row chunks.
Eigen::VectorXd predict_points(const SurvivalModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                               PointRule rule = PointRule::kRestrictedMean,
                               std::vector<std::uint8_t>* undefined = nullptr);

/// Compact JSON object of the hyper-parameters.
std::string config_json(const ModelConfig& config);

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON document with family, hyper-parameters, parameters, time
/// grid, feature names and standardization constants.
std::string serialize_model(const SurvivalModel& model);
std::unique_ptr<SurvivalModel> deserialize_model(const std::string& text);
void save_model(const SurvivalModel& model, const std::string& path);
std::unique_ptr<SurvivalModel> load_model(const std::string& path);

}  // namespace fleetsurv::survival
