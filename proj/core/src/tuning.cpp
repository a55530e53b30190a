#include "fleetsurv/tuning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include "json.hpp"

#include "fleetsurv/errors.hpp"

namespace fleetsurv::tuning {
namespace {

using Json = nlohmann::ordered_json;
using survival::Family;

std::string flag_name(std::string name) {
  std::replace(name.begin(), name.end(), '_', '-');
  return name;
}

std::string format_number(double v) { return fmt::format("{}", v); }

double as_double(const ParamValue& v, const std::string& name) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<long long>(&v)) return static_cast<double>(*i);
  throw UsageError(flag_name(name) + " must be numeric");
}

// Validates one value against its domain and returns it in canonical form.
ParamValue check(const Domain& d, const ParamValue& v) {
  switch (d.kind) {
    case Domain::Kind::kLogUniform:
    case Domain::Kind::kUniform: {
      const double x = as_double(v, d.name);
      if (!(x >= d.lo && x <= d.hi)) {
        throw UsageError(fmt::format("{} must lie in [{}, {}]", flag_name(d.name), format_number(d.lo), format_number(d.hi)));
      }
      return x;
    }
    case Domain::Kind::kIntGrid: {
      const double x = as_double(v, d.name);
      const double k = (x - d.lo) / d.step;
      if (x < d.lo || x > d.hi || std::abs(k - std::round(k)) > 1e-9) {
        if (d.step == 1) {
          throw UsageError(fmt::format("{} must be an integer in {}..{}", flag_name(d.name), d.lo, d.hi));
        }
        throw UsageError(fmt::format("{} must be one of {}..{} step {}", flag_name(d.name), d.lo, d.hi, d.step));
      }
      return static_cast<long long>(std::llround(x));
    }
    case Domain::Kind::kCategorical: {
      const auto* s = std::get_if<std::string>(&v);
      if (!s || std::find(d.choices.begin(), d.choices.end(), *s) == d.choices.end()) {
        std::string all;
        for (const auto& c : d.choices) all += (all.empty() ? "" : "|") + c;
        throw UsageError(fmt::format("{} must be one of {}", flag_name(d.name), all));
      }
      return *s;
    }
    case Domain::Kind::kBool: {
      if (const auto* b = std::get_if<bool>(&v)) return *b;
      throw UsageError(flag_name(d.name) + " must be true or false");
    }
  }
  return v;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Json value_json(const ParamValue& v) {
  return std::visit([](const auto& x) { return Json(x); }, v);
}

}  // namespace

Split split_dataset(const SurvivalDataset& data, std::array<double, 3> fractions, std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("split fractions must sum to 1");
  for (double f : fractions) {
    if (f < 0) throw UsageError("split fractions must be non-negative");
  }
  const std::size_t n = data.rows();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto rng = make_rng(seed, 0);
  shuffle(std::span<std::size_t>(idx), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  const auto n_val = std::min(n - std::min(n, n_train),
                              static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n))));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw DataError(fmt::format("cannot split {} rows into three non-empty parts", n));
  }
  Split s;
  s.train_rows.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation_rows.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                           idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test_rows.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  s.train = data.subset(s.train_rows);
  s.validation = data.subset(s.validation_rows);
  s.test = data.subset(s.test_rows);
  return s;
}

SearchSpace default_space(Family family) {
  using K = Domain::Kind;
  SearchSpace s;
  s.family = family;
  s.base = survival::default_config(family);
  switch (family) {
    case Family::kCph:
      s.domains = {{"baseline", K::kCategorical, 0, 0, 1, {"breslow", "piecewise"}}};
      break;
    case Family::kMtlr:
      s.domains = {{"learning_rate", K::kLogUniform, 1e-5, 1e-3, 1, {}},
                   {"init", K::kCategorical, 0, 0, 1, {"orthogonal", "glorot_uniform"}},
                   {"optimizer", K::kCategorical, 0, 0, 1, {"adam", "adamax", "sgd"}}};
      break;
    case Family::kCsf:
      s.domains = {{"num_trees", K::kIntGrid, 10, 100, 10, {}},
                   {"max_depth", K::kIntGrid, 2, 10, 1, {}},
                   {"min_node_size", K::kIntGrid, 10, 50, 5, {}}};
      break;
    case Family::kDeepSurv:
      s.domains = {{"init", K::kCategorical, 0, 0, 1, {"orthogonal", "glorot_uniform"}},
                   {"optimizer", K::kCategorical, 0, 0, 1, {"sgd", "adam"}},
                   {"learning_rate", K::kLogUniform, 1e-5, 1e-2, 1, {}},
                   {"epochs", K::kIntGrid, 50, 500, 1, {}},
                   {"l2", K::kUniform, 0.0, 1e-2, 1, {}},
                   {"batchnorm", K::kBool, 0, 0, 1, {}},
                   {"dropout", K::kBool, 0, 0, 1, {}}};
      break;
  }
  return s;
}

ParamSet sample(const SearchSpace& space, Rng& rng) {
  ParamSet p;
  for (const auto& d : space.domains) {
    switch (d.kind) {
      case Domain::Kind::kLogUniform:
        p[d.name] = std::exp(std::log(d.lo) + uniform01(rng) * (std::log(d.hi) - std::log(d.lo)));
        break;
      case Domain::Kind::kUniform:
        p[d.name] = d.lo + uniform01(rng) * (d.hi - d.lo);
        break;
      case Domain::Kind::kIntGrid: {
        const auto count = static_cast<std::uint64_t>(std::llround((d.hi - d.lo) / d.step)) + 1;
        p[d.name] = static_cast<long long>(std::llround(d.lo + d.step * static_cast<double>(uniform_index(rng, count))));
        break;
      }
      case Domain::Kind::kCategorical:
        p[d.name] = d.choices[uniform_index(rng, d.choices.size())];
        break;
      case Domain::Kind::kBool:
        p[d.name] = uniform_index(rng, 2) == 1;
        break;
    }
  }
  return p;
}

survival::ModelConfig configure(const SearchSpace& space, const ParamSet& params) {
  auto config = space.base;
  for (const auto& [name, raw] : params) {
    const auto it = std::find_if(space.domains.begin(), space.domains.end(),
                                 [&](const Domain& d) { return d.name == name; });
    if (it == space.domains.end()) {
      throw UsageError(fmt::format("{} is not a {} hyper-parameter", flag_name(name), survival::to_string(space.family)));
    }
    const auto v = check(*it, raw);
    std::visit(
        [&](auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, survival::CoxConfig>) {
            if (name == "baseline") c.baseline = survival::parse_cox_baseline(std::get<std::string>(v));
          } else if constexpr (std::is_same_v<T, survival::MtlrConfig>) {
            if (name == "learning_rate") c.learning_rate = std::get<double>(v);
            if (name == "init") c.init = survival::parse_init(std::get<std::string>(v));
            if (name == "optimizer") c.optimizer = survival::parse_optimizer(std::get<std::string>(v));
          } else if constexpr (std::is_same_v<T, survival::ForestConfig>) {
            if (name == "num_trees") c.num_trees = static_cast<int>(std::get<long long>(v));
            if (name == "max_depth") c.max_depth = static_cast<int>(std::get<long long>(v));
            if (name == "min_node_size") c.min_node_size = static_cast<int>(std::get<long long>(v));
          } else {
            if (name == "init") c.init = survival::parse_init(std::get<std::string>(v));
            if (name == "optimizer") c.optimizer = survival::parse_optimizer(std::get<std::string>(v));
            if (name == "learning_rate") c.learning_rate = std::get<double>(v);
            if (name == "epochs") c.epochs = static_cast<int>(std::get<long long>(v));
            if (name == "l2") c.l2 = std::get<double>(v);
            if (name == "batchnorm") c.batchnorm = std::get<bool>(v);
            if (name == "dropout") c.dropout = std::get<bool>(v);
          }
        },
        config);
  }
  return config;
}

std::string params_json(const ParamSet& params) {
  Json j = Json::object();
  for (const auto& [k, v] : params) j[k] = value_json(v);
  return j.dump();
}

std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::kComplete: return "complete";
    case TrialStatus::kPruned: return "pruned";
    case TrialStatus::kFailed: return "failed";
  }
  return "?";
}

double validation_rmse(const survival::SurvivalModel& model, const SurvivalDataset& validation,
                       survival::PointRule rule) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < validation.rows(); ++i) {
    if (validation.event[i]) rows.push_back(i);
  }
  if (rows.empty()) throw DataError("validation split has no uncensored rows");
  const auto sub = validation.subset(rows);
  const Eigen::VectorXd pred = survival::predict_points(model, sub.x, rule);
  return evaluate(std::span<const double>(pred.data(), sub.rows()),
                  std::span<const double>(sub.duration.data(), sub.rows()), {false, false})
      .rmse;
}

SearchResult run_search(const SearchSpace& space, const SurvivalDataset& train, const SurvivalDataset& validation,
                        const SearchOptions& options) {
  if (options.trials < 1) throw UsageError("trials must be positive");
  SearchResult result;
  const auto n = static_cast<std::size_t>(options.trials);
  result.trials.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& t = result.trials[i];
    t.id = static_cast<int>(i);
    const auto trial_seed = derive_seed(options.seed, i);
    auto rng = make_rng(trial_seed, 0);
    t.params = sample(space, rng);
    t.config = configure(space, t.params);
    t.seed = derive_seed(trial_seed, 1);
    survival::set_seed(t.config, t.seed);
    const int epochs = survival::epochs_of(t.config);
    if (options.pruning.enabled && epochs > 0) {
      for (double f : options.pruning.checkpoints) {
        const int e = std::clamp(static_cast<int>(std::llround(f * epochs)), 1, epochs);
        if (e < epochs && (t.checkpoint_epochs.empty() || e > t.checkpoint_epochs.back())) t.checkpoint_epochs.push_back(e);
      }
    }
  }

  // Synchronization for the pruning rule: progress[j] counts checkpoints
  // trial j has reported, finished[j] marks that it will report no more.
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::size_t> progress(n, 0);
  std::vector<std::uint8_t> finished(n, 0);
  std::map<std::string, Trial> cache;  // single-shot fits reused by config

  auto run_one = [&](std::size_t i) {
    Trial& t = result.trials[i];
    const auto key = survival::config_json(t.config);
    const bool single_shot = survival::epochs_of(t.config) == 0;
    if (single_shot) {
      std::lock_guard lock(mu);
      if (auto it = cache.find(key); it != cache.end()) {
        t.status = it->second.status;
        t.validation_rmse = it->second.validation_rmse;
        t.error = it->second.error;
        finished[i] = 1;
        cv.notify_all();
        return;
      }
    }
    survival::TrainingMonitor monitor;
    monitor.checkpoints = t.checkpoint_epochs;
    monitor.on_checkpoint = [&](std::size_t c, const survival::SurvivalModel& snapshot) {
      double value = std::numeric_limits<double>::infinity();
      try {
        value = validation_rmse(snapshot, validation, options.rule);
      } catch (const std::exception&) {
      }
      if (!std::isfinite(value)) value = std::numeric_limits<double>::infinity();
      std::unique_lock lock(mu);
      t.checkpoint_rmse.push_back(value);
      cv.wait(lock, [&] {
        for (std::size_t j = 0; j < i; ++j) {
          if (!finished[j] && progress[j] <= c) return false;
        }
        return true;
      });
      std::vector<double> earlier;
      for (std::size_t j = 0; j < i; ++j) {
        if (result.trials[j].checkpoint_rmse.size() > c) earlier.push_back(result.trials[j].checkpoint_rmse[c]);
      }
      const bool prune = static_cast<int>(i) >= options.pruning.warmup && !earlier.empty() && value > median(earlier);
      progress[i] = c + 1;
      if (prune) {
        t.status = TrialStatus::kPruned;
        t.pruned_at = t.checkpoint_epochs[c];
        finished[i] = 1;
      }
      cv.notify_all();
      return !prune;
    };
    try {
      auto model = survival::fit_model(t.config, train, &monitor);
      if (t.status != TrialStatus::kPruned) {
        t.validation_rmse = validation_rmse(*model, validation, options.rule);
        if (!std::isfinite(t.validation_rmse)) throw NumericalError("validation RMSE is not finite");
      }
    } catch (const std::exception& e) {
      t.status = TrialStatus::kFailed;
      t.error = e.what();
    }
    std::lock_guard lock(mu);
    if (single_shot) cache.emplace(key, t);
    finished[i] = 1;
    cv.notify_all();
  };

  const auto workers = static_cast<std::size_t>(std::clamp(options.threads, 1, options.trials));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    // Trials are claimed in id order, so every trial a worker waits on has
    // already been claimed by another worker.
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (const auto& t : result.trials) {
    if (t.status != TrialStatus::kComplete) continue;
    if (result.best < 0 || t.validation_rmse < result.trials[static_cast<std::size_t>(result.best)].validation_rmse) {
      result.best = t.id;
    }
  }
  if (result.best < 0) {
    const auto& first = result.trials.front();
    throw NumericalError("all " + std::to_string(n) + " trials failed" + (first.error.empty() ? "" : ": " + first.error));
  }
  return result;
}

std::string trial_log_jsonl(const SearchResult& result) {
  std::string out;
  for (const auto& t : result.trials) {
    Json j;
    j["trial"] = t.id;
    j["seed"] = t.seed;
    j["params"] = Json::parse(params_json(t.params));
    j["status"] = to_string(t.status);
    Json cps = Json::array();
    for (std::size_t c = 0; c < t.checkpoint_rmse.size(); ++c) {
      cps.push_back({{"epoch", t.checkpoint_epochs[c]},
                     {"rmse", std::isfinite(t.checkpoint_rmse[c]) ? Json(t.checkpoint_rmse[c]) : Json()}});
    }
    j["checkpoints"] = cps;
    j["pruned_at"] = t.pruned_at ? Json(*t.pruned_at) : Json();
    j["validation_rmse"] = t.status == TrialStatus::kComplete ? Json(t.validation_rmse) : Json();
    j["best"] = t.id == result.best;
    if (!t.error.empty()) j["error"] = t.error;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace fleetsurv::tuning
