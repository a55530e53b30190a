#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fleetsurv/dataset.hpp"
#include "fleetsurv/metrics.hpp"
#include "fleetsurv/rng.hpp"
#include "fleetsurv/survival/model.hpp"

namespace fleetsurv::tuning {

struct Split {
  SurvivalDataset train;
  SurvivalDataset validation;
  SurvivalDataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  std::vector<std::size_t> test_rows;
};

/// Seeded shuffle then contiguous slices of llround(f0 * n) and
/// llround(f1 * n) rows; the test split takes the rest.
Split split_dataset(const SurvivalDataset& data, std::array<double, 3> fractions = {0.6, 0.2, 0.2},
                    std::uint64_t seed = 0);

struct Domain {
  enum class Kind { kLogUniform, kUniform, kIntGrid, kCategorical, kBool };
  std::string name;
  Kind kind = Kind::kUniform;
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;                 // kIntGrid
  std::vector<std::string> choices;  // kCategorical
};

using ParamValue = std::variant<double, long long, std::string, bool>;
using ParamSet = std::map<std::string, ParamValue>;

struct SearchSpace {
  survival::Family family = survival::Family::kCph;
  std::vector<Domain> domains;
  survival::ModelConfig base;  // fixed settings the sampled values are applied to
};

SearchSpace default_space(survival::Family family);
ParamSet sample(const SearchSpace& space, Rng& rng);
/// Throws UsageError for unknown names or out-of-domain values.
survival::ModelConfig configure(const SearchSpace& space, const ParamSet& params);
std::string params_json(const ParamSet& params);

struct PruningConfig {
  bool enabled = true;
  std::vector<double> checkpoints = {0.25, 0.5, 0.75};  // fractions of the epoch budget
  int warmup = 5;                                       // trials never pruned
};

struct SearchOptions {
  int trials = 200;
  std::uint64_t seed = 0;
  PruningConfig pruning;
  int threads = 1;
  survival::PointRule rule = survival::PointRule::kRestrictedMean;
};

enum class TrialStatus { kComplete, kPruned, kFailed };
std::string_view to_string(TrialStatus s);

struct Trial {
  int id = 0;
  std::uint64_t seed = 0;
  ParamSet params;
  survival::ModelConfig config;
  std::vector<double> checkpoint_rmse;
  std::vector<int> checkpoint_epochs;
  TrialStatus status = TrialStatus::kComplete;
  std::optional<int> pruned_at;  // checkpoint epoch
  double validation_rmse = 0.0;
  std::string error;
};

struct SearchResult {
  std::vector<Trial> trials;
  int best = -1;
  [[nodiscard]] const Trial& best_trial() const { return trials.at(static_cast<std::size_t>(best)); }
};

/// Validation RMSE on uncensored validation rows.
double validation_rmse(const survival::SurvivalModel& model, const SurvivalDataset& validation,
                       survival::PointRule rule = survival::PointRule::kRestrictedMean);

/// Random search with deterministic median pruning: trial i at a checkpoint
/// is compared with the values that trials j < i reported there, so the
/// outcome does not depend on the thread count. Throws NumericalError when
/// every trial fails.
SearchResult run_search(const SearchSpace& space, const SurvivalDataset& train, const SurvivalDataset& validation,
                        const SearchOptions& options);

/// One JSON object per line, in trial order.
std::string trial_log_jsonl(const SearchResult& result);

}  // namespace fleetsurv::tuning
