#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <memory>
#include <numeric>
#include <thread>

#include "common.hpp"
#include "fleetsurv/csv.hpp"
#include "fleetsurv/errors.hpp"
#include "fleetsurv/explain.hpp"
#include "fleetsurv/metrics.hpp"
#include "fleetsurv/simgen.hpp"
#include "fleetsurv/survival/model.hpp"
#include "fleetsurv/tuning.hpp"
#include "json.hpp"

namespace fleetsurv::cli {

namespace {

using Json = nlohmann::ordered_json;
using survival::Family;

std::string dashed(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

// Every searchable hyper-parameter of every family, as a string flag.
std::vector<std::string> all_hyper_parameters() {
  std::vector<std::string> names;
  for (Family f : {Family::kCph, Family::kMtlr, Family::kCsf, Family::kDeepSurv}) {
    for (const auto& d : tuning::default_space(f).domains) {
      if (std::find(names.begin(), names.end(), d.name) == names.end()) names.push_back(d.name);
    }
  }
  return names;
}

tuning::ParamValue convert(const tuning::SearchSpace& space, const std::string& name, const std::string& text) {
  const auto it = std::find_if(space.domains.begin(), space.domains.end(),
                               [&](const tuning::Domain& d) { return d.name == name; });
  if (it == space.domains.end()) return text;  // rejected by configure
  switch (it->kind) {
    case tuning::Domain::Kind::kCategorical:
      return text;
    case tuning::Domain::Kind::kBool:
      if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
      if (text == "false" || text == "0" || text == "no" || text == "off") return false;
      throw UsageError(dashed(name) + " must be true or false");
    default:
      try {
        return csv::parse_double(text);
      } catch (const DataError&) {
        throw UsageError(dashed(name) + " must be numeric");
      }
  }
}

void check_features(const survival::SurvivalModel& model, const SurvivalDataset& data) {
  if (!model.feature_names.empty() && model.feature_names != data.feature_names) {
    throw DataError("dataset columns do not match the features the model was fitted on");
  }
}

PredictionTable predict_table(const survival::SurvivalModel& model, const SurvivalDataset& data,
                              survival::PointRule rule) {
  check_features(model, data);
  PredictionTable t;
  t.ids = data.row_ids;
  t.duration.assign(data.duration.data(), data.duration.data() + data.duration.size());
  t.event = data.event;
  const Eigen::VectorXd p = survival::predict_points(model, data.x, rule);
  t.predicted.assign(p.data(), p.data() + p.size());
  return t;
}

tuning::MetricsReport uncensored_metrics(const PredictionTable& t, const std::string& label) {
  std::vector<double> p;
  std::vector<double> a;
  for (std::size_t i = 0; i < t.predicted.size(); ++i) {
    if (t.event[i] == 0) continue;
    p.push_back(t.predicted[i]);
    a.push_back(t.duration[i]);
  }
  tuning::MetricOptions options;
  options.mape = std::all_of(a.begin(), a.end(), [](double v) { return v != 0.0; });
  return tuning::evaluate(p, a, options, label);
}

// --------------------------------------------------------------------- fit

struct FitOptions {
  CommonOptions common;
  std::string data;
  std::string model;
  std::map<std::string, std::string> params;
};

void run_fit(const FitOptions& o, Context& ctx) {
  const Family family = survival::parse_family(o.model);
  const auto space = tuning::default_space(family);
  tuning::ParamSet params;
  for (const auto& [name, text] : o.params) {
    if (!text.empty()) params[name] = convert(space, name, text);
  }
  auto config = tuning::configure(space, params);
  survival::set_seed(config, o.common.seed);
  if (auto* forest = std::get_if<survival::ForestConfig>(&config)) forest->threads = o.common.threads;

  const auto data = read_survival_csv(o.data);
  const auto model = survival::fit_model(config, data);
  const auto dir = ensure_dir(o.common.out);
  survival::save_model(*model, (dir / "model.json").string());
  Json summary;
  summary["family"] = std::string(model->family());
  summary["rows"] = data.rows();
  summary["events"] = data.event_count();
  summary["config"] = Json::parse(survival::config_json(config));
  summary["warnings"] = model->warnings;
  write_text(dir / "fit_summary.json", summary.dump(2));
  print_warnings(ctx, model->warnings);
  ctx.out << fmt::format("fitted {} on {} rows ({} events)\n", model->family(), data.rows(), data.event_count());
}

// -------------------------------------------------------------------- tune

struct TuneOptions {
  CommonOptions common;
  std::string data;
  std::string model;
  int trials = 200;
  bool no_pruning = false;
  int warmup = 5;
  std::vector<double> split{0.6, 0.2, 0.2};
  std::string rule = "restricted_mean";
};

void run_tune(const TuneOptions& o, Context& ctx) {
  if (o.split.size() != 3) throw UsageError("--split takes three fractions");
  const Family family = survival::parse_family(o.model);
  const auto rule = survival::parse_point_rule(o.rule);
  const auto data = read_survival_csv(o.data);
  const auto split = tuning::split_dataset(data, {o.split[0], o.split[1], o.split[2]}, o.common.seed);

  auto space = tuning::default_space(family);
  tuning::SearchOptions options;
  options.trials = o.trials;
  options.seed = o.common.seed;
  options.threads = static_cast<int>(o.common.threads);
  options.pruning.enabled = !o.no_pruning;
  options.pruning.warmup = o.warmup;
  options.rule = rule;
  const auto result = tuning::run_search(space, split.train, split.validation, options);
  const auto& best = result.best_trial();

  auto config = best.config;
  const auto model = survival::fit_model(config, split.train);
  const auto dir = ensure_dir(o.common.out);
  write_text(dir / "trials.jsonl", tuning::trial_log_jsonl(result));
  survival::save_model(*model, (dir / "model.json").string());

  std::vector<tuning::MetricsReport> reports;
  const std::pair<const char*, const SurvivalDataset*> parts[] = {
      {"train", &split.train}, {"validation", &split.validation}, {"test", &split.test}};
  for (const auto& [name, part] : parts) {
    const auto table = predict_table(*model, *part, rule);
    write_predictions(dir / fmt::format("predictions_{}.csv", name), table);
    reports.push_back(uncensored_metrics(table, fmt::format("{}/{}", survival::to_string(family), name)));
  }
  write_text(dir / "metrics.json", tuning::metrics_json(reports));

  std::size_t pruned = 0;
  std::size_t failed = 0;
  for (const auto& t : result.trials) {
    pruned += t.status == tuning::TrialStatus::kPruned ? 1 : 0;
    failed += t.status == tuning::TrialStatus::kFailed ? 1 : 0;
  }
  Json summary;
  summary["family"] = std::string(survival::to_string(family));
  summary["trials"] = result.trials.size();
  summary["pruned"] = pruned;
  summary["failed"] = failed;
  summary["best_trial"] = best.id;
  summary["best_validation_rmse"] = best.validation_rmse;
  summary["params"] = Json::parse(tuning::params_json(best.params));
  summary["config"] = Json::parse(survival::config_json(config));
  summary["split_rows"] = {split.train.rows(), split.validation.rows(), split.test.rows()};
  write_text(dir / "best.json", summary.dump(2));
  print_warnings(ctx, model->warnings);
  ctx.out << fmt::format("{}: {} trials ({} pruned, {} failed); best #{} validation RMSE {:.4f}, test RMSE {:.4f}\n",
                         survival::to_string(family), result.trials.size(), pruned, failed, best.id,
                         best.validation_rmse, reports.back().rmse);
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
  CommonOptions common;
  std::vector<std::string> predictions;
  std::vector<std::string> labels;
  std::string predicted;
  std::string actual;
  std::string model;
  std::string data;
  std::string ground_truth;
  std::string rule = "restricted_mean";
};

void run_evaluate(const EvaluateOptions& o, Context& ctx) {
  const auto rule = survival::parse_point_rule(o.rule);
  if (o.predicted.empty() != o.actual.empty()) throw UsageError("--predicted and --actual go together");
  if (o.model.empty() != o.data.empty()) throw UsageError("--model and --data go together");
  if (o.predictions.empty() && o.predicted.empty() && o.model.empty()) {
    throw UsageError("nothing to evaluate: give --predictions, --predicted/--actual or --model/--data");
  }
  if (!o.labels.empty() && o.labels.size() != o.predictions.size()) {
    throw UsageError("--label must be given once per --predictions file");
  }
  const auto dir = ensure_dir(o.common.out);
  std::vector<tuning::MetricsReport> reports;
  std::vector<std::pair<std::string, PredictionTable>> tables;

  if (!o.predicted.empty()) {
    const auto p = read_column(o.predicted);
    const auto a = read_column(o.actual);
    tuning::MetricOptions options;
    options.mape = std::all_of(a.begin(), a.end(), [](double v) { return v != 0.0; });
    reports.push_back(tuning::evaluate(p, a, options, "vector"));
  }
  for (std::size_t i = 0; i < o.predictions.size(); ++i) {
    const std::string label =
        o.labels.empty() ? std::filesystem::path(o.predictions[i]).stem().string() : o.labels[i];
    tables.emplace_back(label, read_predictions(o.predictions[i]));
  }
  if (!o.model.empty()) {
    const auto model = survival::load_model(o.model);
    const auto data = read_survival_csv(o.data);
    auto table = predict_table(*model, data, rule);
    write_predictions(dir / "predictions.csv", table);
    tables.emplace_back(std::string(model->family()), std::move(table));
  }
  for (const auto& [label, table] : tables) reports.push_back(uncensored_metrics(table, label));
  write_text(dir / "metrics.json", tuning::metrics_json(reports));

  if (!o.ground_truth.empty()) {
    if (tables.empty()) throw UsageError("--ground-truth needs unit-keyed predictions");
    const auto truth = sim::read_ground_truth(o.ground_truth);
    Json oracle = Json::object();
    for (const auto& [label, table] : tables) {
      std::map<std::string, double> keyed;
      for (std::size_t i = 0; i < table.ids.size(); ++i) keyed[table.ids[i]] = table.predicted[i];
      oracle[label] = Json::parse(sim::oracle_json(sim::oracle_report(truth, keyed)));
    }
    write_text(dir / "oracle.json", oracle.dump(2));
  }
  for (const auto& r : reports) {
    ctx.out << fmt::format("{}: n={} RMSE {:.4f}", r.label, r.n, r.rmse);
    if (r.r2) ctx.out << fmt::format(" R2 {:.4f}", *r.r2);
    if (r.mape) ctx.out << fmt::format(" MAPE {:.2f}%", *r.mape);
    ctx.out << '\n';
  }
}

// ----------------------------------------------------- analyze-predictions

struct AnalyzeOptions {
  CommonOptions common;
  std::string predictions;
};

void run_analyze(const AnalyzeOptions& o, Context& ctx) {
  const auto t = read_predictions(o.predictions);
  const auto analysis = tuning::prediction_analysis(t.predicted, t.duration, t.event);
  const auto dir = ensure_dir(o.common.out);
  write_text(dir / "analysis.json", tuning::analysis_json(analysis));
  ctx.out << fmt::format("pearson {:.4f}; early {:.1f}% late {:.1f}%", analysis.pearson,
                         100.0 * analysis.share_early, 100.0 * analysis.share_late);
  if (analysis.censored_share_above) {
    ctx.out << fmt::format("; {:.1f}% of {} right-censored predictions above their durations",
                           100.0 * *analysis.censored_share_above, analysis.censored);
  }
  ctx.out << '\n';
}

// ----------------------------------------------------------------- explain

struct ExplainOptions {
  CommonOptions common;
  std::string model;
  std::string data;
  std::size_t instances = 100;
  std::size_t background = 100;
  std::size_t nsamples = 5000;
  std::string rule = "restricted_mean";
};

void run_explain(const ExplainOptions& o, Context& ctx) {
  const auto rule = survival::parse_point_rule(o.rule);
  const auto model = survival::load_model(o.model);
  const auto data = read_survival_csv(o.data);
  check_features(*model, data);
  if (data.rows() == 0) throw DataError(o.data + " has no rows");
  if (o.instances == 0 || o.background == 0) throw UsageError("--instances and --background must be positive");

  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (o.instances < rows.size()) {
    auto rng = make_rng(o.common.seed, 1);
    shuffle(std::span<std::size_t>(rows), rng);
    rows.resize(o.instances);
    std::sort(rows.begin(), rows.end());
  }
  const auto background = explain::kmeans_background(data.x, std::min(o.background, data.rows()),
                                                     derive_seed(o.common.seed, 2));
  const auto predict = explain::point_predictor(*model, rule);

  std::vector<explain::Explanation> explanations(rows.size());
  const auto work = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t i = worker; i < rows.size(); i += stride) {
      const Eigen::VectorXd instance = data.x.row(static_cast<Eigen::Index>(rows[i])).transpose();
      explain::ShapOptions options;
      options.nsamples = o.nsamples;
      options.seed = derive_seed(o.common.seed, 100 + rows[i]);
      explanations[i] = explain::kernel_shap(predict, std::span<const double>(instance.data(), instance.size()),
                                             background, options);
    }
  };
  const std::size_t threads = std::min<std::size_t>(o.common.threads, rows.size());
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }

  std::vector<std::string> ids;
  for (auto r : rows) ids.push_back(r < data.row_ids.size() ? data.row_ids[r] : std::to_string(r));
  const auto dir = ensure_dir(o.common.out);
  {
    std::ofstream out(dir / "shap.csv", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "shap.csv").string());
    explain::write_explanations_csv(out, ids, data.feature_names, explanations);
  }
  const auto ranking = explain::rank_features(explanations, data.feature_names);
  {
    std::ofstream out(dir / "ranking.csv", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "ranking.csv").string());
    out << "rank,feature,mean_abs_shap\n";
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      out << i + 1 << ',' << ranking[i].name << ',' << csv::format_double(ranking[i].mean_abs) << '\n';
    }
  }
  std::vector<std::string> warnings;
  for (const auto& e : explanations) warnings.insert(warnings.end(), e.warnings.begin(), e.warnings.end());
  std::sort(warnings.begin(), warnings.end());
  warnings.erase(std::unique(warnings.begin(), warnings.end()), warnings.end());
  print_warnings(ctx, warnings);
  ctx.out << fmt::format("explained {} instances against {} background rows; top feature {}\n", rows.size(),
                         background.rows.rows(), ranking.empty() ? "-" : ranking.front().name);
}

}  // namespace

void add_fit(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<FitOptions>();
  auto* sub = app.add_subcommand("fit", "Fit one survival model and serialize it");
  add_config_flag(*sub, o->common);
  sub->add_option("--data", o->data, "survival.csv")->required();
  sub->add_option("--model", o->model, "cph, mtlr, csf or deepsurv")->required();
  sub->add_option("--out", o->common.out, "output directory")->required();
  add_seed_flag(*sub, o->common);
  add_threads_flag(*sub, o->common);
  for (const auto& name : all_hyper_parameters()) {
    sub->add_option("--" + dashed(name), o->params[name], "hyper-parameter " + name + " (model-specific)");
  }
  sub->callback([o, &ctx] { run_fit(*o, ctx); });
}

void add_tune(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<TuneOptions>();
  auto* sub = app.add_subcommand("tune", "Random hyper-parameter search with median pruning");
  add_config_flag(*sub, o->common);
  sub->add_option("--data", o->data, "survival.csv")->required();
  sub->add_option("--model", o->model, "cph, mtlr, csf or deepsurv")->required();
  sub->add_option("--out", o->common.out, "output directory")->required();
  add_seed_flag(*sub, o->common);
  add_threads_flag(*sub, o->common);
  sub->add_option("--trials", o->trials, "number of sampled configurations")->default_val(200)->check(
      CLI::PositiveNumber);
  sub->add_flag("--no-pruning", o->no_pruning, "train every trial to completion");
  sub->add_option("--warmup", o->warmup, "leading trials that are never pruned")->default_val(5);
  sub->add_option("--split", o->split, "train,validation,test fractions")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)
      ->expected(3);
  sub->add_option("--rule", o->rule, "point prediction: restricted_mean or median")->default_val("restricted_mean");
  sub->callback([o, &ctx] { run_tune(*o, ctx); });
}

void add_evaluate(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<EvaluateOptions>();
  auto* sub = app.add_subcommand("evaluate", "RMSE, R2 and MAPE of day-valued predictions");
  add_config_flag(*sub, o->common);
  sub->add_option("--predictions", o->predictions, "predictions CSV (repeatable)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  sub->add_option("--label", o->labels, "label for each --predictions file")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  sub->add_option("--predicted", o->predicted, "one-column CSV of predictions");
  sub->add_option("--actual", o->actual, "one-column CSV of actual durations");
  sub->add_option("--model", o->model, "serialized model to predict with");
  sub->add_option("--data", o->data, "survival.csv to predict on");
  sub->add_option("--ground-truth", o->ground_truth, "simulator ground_truth.csv for an oracle report");
  sub->add_option("--rule", o->rule, "point prediction: restricted_mean or median")->default_val("restricted_mean");
  sub->add_option("--out", o->common.out, "output directory")->required();
  sub->callback([o, &ctx] { run_evaluate(*o, ctx); });
}

void add_analyze(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<AnalyzeOptions>();
  auto* sub = app.add_subcommand("analyze-predictions", "Ratio, difference and censoring analysis of predictions");
  add_config_flag(*sub, o->common);
  sub->add_option("--predictions", o->predictions, "predictions CSV")->required();
  sub->add_option("--out", o->common.out, "output directory")->required();
  sub->callback([o, &ctx] { run_analyze(*o, ctx); });
}

void add_explain(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<ExplainOptions>();
  auto* sub = app.add_subcommand("explain", "Kernel SHAP attributions of day-valued predictions");
  add_config_flag(*sub, o->common);
  sub->add_option("--model", o->model, "serialized model")->required();
  sub->add_option("--data", o->data, "survival.csv supplying instances and background")->required();
  sub->add_option("--out", o->common.out, "output directory")->required();
  add_seed_flag(*sub, o->common);
  add_threads_flag(*sub, o->common);
  sub->add_option("--instances", o->instances, "rows explained (seeded sample)")->default_val(100);
  sub->add_option("--background", o->background, "k-means background size")->default_val(100);
  sub->add_option("--nsamples", o->nsamples, "coalition budget per explanation")->default_val(5000);
  sub->add_option("--rule", o->rule, "point prediction: restricted_mean or median")->default_val("restricted_mean");
  sub->callback([o, &ctx] { run_explain(*o, ctx); });
}

}  // namespace fleetsurv::cli
