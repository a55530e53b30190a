#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fleetsurv/errors.hpp"
#include "fleetsurv/tuning.hpp"
#include "test_support.hpp"

namespace fleetsurv::tuning {
namespace {

using survival::Family;

SurvivalDataset tuning_data() {
  const Eigen::VectorXd beta = (Eigen::VectorXd(2) << 0.8, -0.4).finished();
  return testing::synthetic_survival(240, beta, 51, 0.01);
}

TEST(Split, SizesAndDisjointness) {
  const auto data = tuning_data();
  const auto s = split_dataset(data, {0.6, 0.2, 0.2}, 3);
  EXPECT_EQ(s.train.rows(), 144u);
  EXPECT_EQ(s.validation.rows(), 48u);
  EXPECT_EQ(s.test.rows(), 48u);
  std::set<std::size_t> all(s.train_rows.begin(), s.train_rows.end());
  all.insert(s.validation_rows.begin(), s.validation_rows.end());
  all.insert(s.test_rows.begin(), s.test_rows.end());
  EXPECT_EQ(all.size(), data.rows());
  EXPECT_EQ(split_dataset(data, {0.6, 0.2, 0.2}, 3).test_rows, s.test_rows);
  EXPECT_NE(split_dataset(data, {0.6, 0.2, 0.2}, 4).test_rows, s.test_rows);
  EXPECT_THROW(split_dataset(data, {0.6, 0.3, 0.2}, 3), UsageError);
  EXPECT_THROW(split_dataset(data.subset(std::vector<std::size_t>{0, 1}), {0.6, 0.2, 0.2}, 3), DataError);
}

TEST(SearchSpace, SamplesStayInDomain) {
  for (auto f : {Family::kCph, Family::kMtlr, Family::kCsf, Family::kDeepSurv}) {
    const auto space = default_space(f);
    auto rng = make_rng(8);
    for (int i = 0; i < 200; ++i) {
      const auto p = sample(space, rng);
      EXPECT_EQ(p.size(), space.domains.size());
      EXPECT_NO_THROW(configure(space, p));
    }
  }
}

TEST(SearchSpace, ConfigureRejectsOutOfDomain) {
  const auto space = default_space(Family::kCsf);
  try {
    configure(space, {{"num_trees", 7LL}});
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_STREQ(e.what(), "num-trees must be one of 10..100 step 10");
  }
  EXPECT_THROW(configure(space, {{"learning_rate", 0.1}}), UsageError);
  const auto ds = default_space(Family::kDeepSurv);
  EXPECT_THROW(configure(ds, {{"learning_rate", 0.5}}), UsageError);
  EXPECT_THROW(configure(ds, {{"optimizer", std::string("rmsprop")}}), UsageError);
  const auto cfg = configure(ds, {{"epochs", 120LL}, {"batchnorm", true}});
  EXPECT_EQ(std::get<survival::DeepSurvConfig>(cfg).epochs, 120);
  EXPECT_TRUE(std::get<survival::DeepSurvConfig>(cfg).batchnorm);
}

SearchSpace quick_deepsurv() {
  auto space = default_space(Family::kDeepSurv);
  // Short budgets keep the search fast while still exercising checkpoints.
  for (auto& d : space.domains) {
    if (d.name == "epochs") {
      d.lo = 8;
      d.hi = 24;
    }
  }
  std::get<survival::DeepSurvConfig>(space.base).hidden = {8};
  return space;
}

TEST(Search, DeterministicAcrossThreadCounts) {
  const auto s = split_dataset(tuning_data(), {0.6, 0.2, 0.2}, 1);
  SearchOptions opts;
  opts.trials = 12;
  opts.seed = 5;
  opts.pruning.warmup = 2;
  const auto one = run_search(quick_deepsurv(), s.train, s.validation, opts);
  opts.threads = 3;
  const auto three = run_search(quick_deepsurv(), s.train, s.validation, opts);
  EXPECT_EQ(trial_log_jsonl(one), trial_log_jsonl(three));
  EXPECT_EQ(one.best, three.best);

  std::istringstream lines(trial_log_jsonl(one));
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) count += !line.empty();
  EXPECT_EQ(count, 12u);
}

TEST(Search, PruningRespectsWarmupAndMedian) {
  const auto s = split_dataset(tuning_data(), {0.6, 0.2, 0.2}, 1);
  SearchOptions opts;
  opts.trials = 16;
  opts.seed = 6;
  opts.pruning.warmup = 4;
  const auto r = run_search(quick_deepsurv(), s.train, s.validation, opts);
  for (const auto& t : r.trials) {
    if (t.id < 4) EXPECT_NE(t.status, TrialStatus::kPruned);
    if (t.status != TrialStatus::kPruned) continue;
    ASSERT_TRUE(t.pruned_at.has_value());
    const auto c = t.checkpoint_rmse.size() - 1;
    EXPECT_EQ(*t.pruned_at, t.checkpoint_epochs[c]);
    std::vector<double> earlier;
    for (int j = 0; j < t.id; ++j) {
      const auto& prev = r.trials[static_cast<std::size_t>(j)].checkpoint_rmse;
      if (prev.size() > c) earlier.push_back(prev[c]);
    }
    std::sort(earlier.begin(), earlier.end());
    const auto m = earlier.size();
    const double median = m % 2 ? earlier[m / 2] : 0.5 * (earlier[m / 2 - 1] + earlier[m / 2]);
    EXPECT_GT(t.checkpoint_rmse[c], median);
  }
  EXPECT_EQ(r.best_trial().status, TrialStatus::kComplete);
  for (const auto& t : r.trials) {
    if (t.status == TrialStatus::kComplete) EXPECT_GE(t.validation_rmse, r.best_trial().validation_rmse);
  }

  opts.pruning.enabled = false;
  for (const auto& t : run_search(quick_deepsurv(), s.train, s.validation, opts).trials) {
    EXPECT_NE(t.status, TrialStatus::kPruned);
    EXPECT_TRUE(t.checkpoint_epochs.empty());
  }
}

TEST(Search, CoxTrialsReuseIdenticalFits) {
  const auto s = split_dataset(tuning_data(), {0.6, 0.2, 0.2}, 2);
  SearchOptions opts;
  opts.trials = 6;
  const auto r = run_search(default_space(Family::kCph), s.train, s.validation, opts);
  std::set<double> distinct;
  for (const auto& t : r.trials) distinct.insert(t.validation_rmse);
  EXPECT_LE(distinct.size(), 2u);  // two baselines
  EXPECT_THROW(run_search(default_space(Family::kCph), s.train, s.validation, SearchOptions{.trials = 0}),
               UsageError);
}

}  // namespace
}  // namespace fleetsurv::tuning
