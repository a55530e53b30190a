// End-to-end acceptance checks. Prints one [PASS]/[FAIL] line per criterion
// and exits nonzero when any criterion fails.

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fleetsurv/cli.hpp"
#include "fleetsurv/csv.hpp"
#include "fleetsurv/errors.hpp"
#include "fleetsurv/explain.hpp"
#include "fleetsurv/stats.hpp"
#include "fleetsurv/survival/cox.hpp"
#include "fleetsurv/survival/deepsurv.hpp"
#include "fleetsurv/survival/kaplan_meier.hpp"
#include "fleetsurv/survival/model.hpp"
#include "fleetsurv/survival/mtlr.hpp"
#include "json.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace fleetsurv;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) throw std::runtime_error(fmt::format("`{}` exited {}: {}", args[0], code, err.str()));
}

json read_json(const fs::path& p) { return json::parse(testing::read_file(p)); }

// ------------------------------------------------------------------ 1: KM

double brute_force_km(const std::vector<double>& d, const std::vector<std::uint8_t>& e, double t) {
  std::set<double> times;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (e[i] && d[i] <= t) times.insert(d[i]);
  }
  double s = 1.0;
  for (double u : times) {
    double deaths = 0, risk = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      risk += d[i] >= u ? 1 : 0;
      deaths += d[i] == u && e[i] ? 1 : 0;
    }
    s *= 1.0 - deaths / risk;
  }
  return s;
}

Outcome kaplan_meier_check() {
  const auto t0 = Clock::now();
  const auto c = survival::kaplan_meier(std::vector<double>{1, 2, 3}, std::vector<std::uint8_t>{1, 1, 0});
  const bool fixture = c.at(1) == 2.0 / 3.0 && c.at(2) == 1.0 / 3.0 && c.at(0) == 1.0;
  auto rng = make_rng(2024, 1);
  double worst = 0.0;
  for (int f = 0; f < 200; ++f) {
    const auto n = 1 + uniform_index(rng, 80);
    std::vector<double> d(n);
    std::vector<std::uint8_t> e(n);
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = f % 2 ? 0.5 + 100.0 * uniform01(rng) : static_cast<double>(1 + uniform_index(rng, 20));
      e[i] = uniform01(rng) < 0.7 ? 1 : 0;
    }
    const auto km = survival::kaplan_meier(d, e);
    for (std::size_t g = 0; g < km.grid.size(); ++g) {
      worst = std::max(worst, std::abs(km.values[g] - brute_force_km(d, e, km.grid[g])));
    }
  }
  const double secs = seconds_since(t0);
  return {fixture && worst <= 1e-12 && secs < 1.0,
          fmt::format("S(1)={:.6f} S(2)={:.6f}; max brute-force gap {:.1e} over 200 fixtures; {:.3f}s", c.at(1),
                      c.at(2), worst, secs)};
}

// ---------------------------------------------------------------- 2: Cox

Outcome cox_recovery(const fs::path& dir) {
  const auto t0 = Clock::now();
  fs::create_directories(dir);
  std::ofstream out(dir / "cox_recovery.csv", std::ios::binary);
  out << "seed,beta,log_likelihood\n";
  const double truth = std::log(2.0);
  double sum_abs = 0.0, worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto rng = make_rng(seed, 42);
    SurvivalDataset data;
    data.feature_names = {"group"};
    const Eigen::Index n = 2000;
    data.x.resize(n, 1);
    data.duration.resize(n);
    data.event.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = i % 2;
      const double t = -std::log(1.0 - uniform01(rng)) * 30.0 / (g ? 2.0 : 1.0);
      const double c = -std::log(1.0 - uniform01(rng)) * 150.0;
      data.x(i, 0) = g;
      data.duration[i] = std::min(t, c);
      data.event[static_cast<std::size_t>(i)] = t <= c ? 1 : 0;
    }
    const auto model = survival::fit_cox(data);
    const double b = model.beta[0];
    sum_abs += std::abs(b - truth);
    worst = std::max(worst, std::abs(b - truth));
    out << seed << ',' << csv::format_double(b) << ',' << csv::format_double(model.log_likelihood) << '\n';
  }
  const double mean_abs = sum_abs / 20.0;
  const double secs = seconds_since(t0);
  return {mean_abs <= 0.05 && worst <= 0.15 && secs < 30.0,
          fmt::format("mean |beta - ln 2| {:.4f}, worst {:.4f} over 20 seeds; {:.2f}s", mean_abs, worst, secs)};
}

// ----------------------------------------------------------- 3: gradient

Outcome deepsurv_gradient() {
  const auto t0 = Clock::now();
  const Eigen::VectorXd beta = (Eigen::VectorXd(3) << 0.6, -0.4, 0.2).finished();
  const auto data = testing::synthetic_survival(20, beta, 31, 0.02);
  survival::DeepSurvConfig cfg;
  cfg.hidden = {16, 8};
  cfg.epochs = 0;
  cfg.l2 = 1e-3;
  cfg.seed = 4;
  auto model = survival::fit_deepsurv(data, cfg);
  auto rng = make_rng(9);
  for (Eigen::Index i = 0; i < model.params.size(); ++i) model.params[i] += 0.3 * standard_normal(rng);
  Eigen::VectorXd analytic;
  survival::deepsurv_objective(model, data, &analytic);
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < model.params.size(); ++i) {
    const double saved = model.params[i];
    model.params[i] = saved + h;
    const double up = survival::deepsurv_objective(model, data, nullptr);
    model.params[i] = saved - h;
    const double down = survival::deepsurv_objective(model, data, nullptr);
    model.params[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 5.0,
          fmt::format("max relative error {:.2e} over {} parameters; {:.3f}s", worst, model.params.size(), secs)};
}

// --------------------------------------------------------------- 4: MTLR

std::vector<double> enumerate_sequences(const Eigen::VectorXd& psi) {
  const auto m = static_cast<int>(psi.size());
  std::vector<double> weight(static_cast<std::size_t>(m) + 1, 0.0);
  double total = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    int first = m;
    bool admissible = true;
    double score = 0.0;
    for (int k = 0; k < m; ++k) {
      const bool on = (mask >> k) & 1u;
      if (on && first == m) first = k;
      if (!on && first < m) admissible = false;
      if (on) score += psi[k];
    }
    if (!admissible) continue;
    weight[static_cast<std::size_t>(first)] += std::exp(score);
    total += std::exp(score);
  }
  for (auto& w : weight) w /= total;
  return weight;
}

Outcome mtlr_normalization() {
  auto rng = make_rng(77, 4);
  double worst_sum = 0.0, worst_oracle = 0.0;
  for (int m = 1; m <= 20; ++m) {
    const int d = 1 + static_cast<int>(uniform_index(rng, 6));
    survival::MtlrModel model;
    model.weights.resize(m, d);
    model.bias.resize(m);
    for (Eigen::Index i = 0; i < model.weights.size(); ++i) model.weights.data()[i] = standard_normal(rng);
    for (Eigen::Index k = 0; k < m; ++k) model.bias[k] = standard_normal(rng);
    model.mean = Eigen::VectorXd::Zero(d);
    model.scale = Eigen::VectorXd::Ones(d);
    model.set_intervals(m, 100.0);
    Eigen::MatrixXd x(2, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    const Eigen::MatrixXd p = model.sequence_probabilities(x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      worst_sum = std::max(worst_sum, std::abs(p.row(i).sum() - 1.0));
      const Eigen::VectorXd psi = model.weights * x.row(i).transpose() + model.bias;
      const auto oracle = enumerate_sequences(psi);
      for (int j = 0; j <= m; ++j) {
        worst_oracle = std::max(worst_oracle, std::abs(p(i, j) - oracle[static_cast<std::size_t>(j)]));
      }
    }
  }

  const auto cfg = testing::small_sim_config(17);
  const auto data = testing::units_from_bundle(sim::simulate_fleet(cfg), "brake_pads", cfg.window).attached.dataset;
  const auto x = testing::fuzzed_inputs(data, 1000, 9);
  std::size_t violations = 0;
  std::vector<std::string> per_family;
  for (auto f : {survival::Family::kCph, survival::Family::kMtlr, survival::Family::kCsf,
                 survival::Family::kDeepSurv}) {
    auto mc = survival::default_config(f);
    survival::set_seed(mc, 3);
    const auto model = survival::fit_model(mc, data);
    const auto v = testing::curve_violations(*model, x);
    violations += v;
    per_family.push_back(fmt::format("{} {}", survival::to_string(f), v));
  }
  return {worst_sum <= 1e-9 && worst_oracle <= 1e-9 && violations == 0,
          fmt::format("m=1..20: max |sum-1| {:.1e}, max enumeration gap {:.1e}; curve violations over 1000 "
                      "fuzzed inputs: {}",
                      worst_sum, worst_oracle, fmt::join(per_family, ", "))};
}

// --------------------------------------------------------------- 5: SHAP

Outcome shap_exactness() {
  const auto t0 = Clock::now();
  const int d = 8;
  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(d, -2.0, 3.0);
  const explain::PredictFn f = [&](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return (x * w).array() + 4.0; };
  auto rng = make_rng(5, 5);
  Eigen::MatrixXd src(300, d);
  for (Eigen::Index i = 0; i < src.size(); ++i) src.data()[i] = 2.0 * standard_normal(rng) + 1.0;
  const auto background = explain::kmeans_background(src, 25, 2);
  const Eigen::VectorXd ex = (background.rows.transpose() * background.weights) / background.weights.sum();
  double worst_phi = 0.0, worst_eff = 0.0;
  bool all_exact = true;
  for (int r = 0; r < 20; ++r) {
    std::vector<double> x(d);
    for (auto& v : x) v = 2.0 * standard_normal(rng) + 1.0;
    const auto e = explain::kernel_shap(f, x, background);
    all_exact = all_exact && e.exact;
    for (int i = 0; i < d; ++i) worst_phi = std::max(worst_phi, std::abs(e.phi[i] - w[i] * (x[i] - ex[i])));
    worst_eff = std::max(worst_eff, std::abs(e.base + e.phi.sum() - e.prediction));
  }
  const double secs = seconds_since(t0);
  return {all_exact && worst_phi <= 1e-8 && worst_eff <= 1e-6 && secs < 10.0,
          fmt::format("20 exact explanations: max phi gap {:.1e}, max efficiency gap {:.1e}; {:.2f}s", worst_phi,
                      worst_eff, secs)};
}

// ------------------------------------------------- 6, 7, 9: the pipeline

struct PipelineResult {
  Outcome ordering;
  Outcome censoring;
  Outcome ranking;
};

SurvivalDataset load_units(const fs::path& dir) { return read_survival_csv((dir / "units/survival.csv").string()); }

PipelineResult pipeline(const fs::path& dir) {
  PipelineResult r;
  const auto t0 = Clock::now();
  cli({"simulate", "--seed", "7", "--out", (dir / "data").string()});
  cli({"build-units", "--data", (dir / "data").string(), "--component", "brake_pads", "--out",
       (dir / "units").string()});
  const auto units = load_units(dir);
  const double right_share = 1.0 - static_cast<double>(units.event_count()) / static_cast<double>(units.rows());

  std::map<std::string, double> test_rmse;
  for (const char* family : {"cph", "mtlr", "deepsurv"}) {
    cli({"tune", "--data", (dir / "units/survival.csv").string(), "--model", family, "--trials", "50", "--seed",
         "11", "--out", (dir / fmt::format("tune_{}", family)).string()});
    const auto m = read_json(dir / fmt::format("tune_{}/metrics.json", family));
    test_rmse[family] = m["metrics"][2]["rmse"].get<double>();
  }
  const auto ds = read_json(dir / "tune_deepsurv/metrics.json")["metrics"][2];
  const double r2 = ds["r2"].is_null() ? NAN : ds["r2"].get<double>();
  cli({"analyze-predictions", "--predictions", (dir / "tune_deepsurv/predictions_test.csv").string(), "--out",
       (dir / "analysis_deepsurv").string()});
  const auto analysis = read_json(dir / "analysis_deepsurv/analysis.json");
  const double pearson = analysis["uncensored"]["pearson"].get<double>();
  const double secs = seconds_since(t0);

  const bool sized = units.rows() >= 5000 && right_share >= 0.10 && right_share <= 0.20;
  const bool ordered = test_rmse["deepsurv"] <= test_rmse["mtlr"] && test_rmse["mtlr"] <= test_rmse["cph"];
  r.ordering.pass = sized && ordered && r2 >= 0.7 && pearson >= 0.9 && secs < 900.0;
  r.ordering.detail = fmt::format(
      "{} units, {:.1f}% right-censored; test RMSE deepsurv {:.3f} <= mtlr {:.3f} <= cph {:.3f}; deepsurv R2 "
      "{:.3f}, pearson {:.3f}; {:.0f}s",
      units.rows(), 100.0 * right_share, test_rmse["deepsurv"], test_rmse["mtlr"], test_rmse["cph"], r2, pearson,
      secs);

  const auto& rc = analysis["right_censored"];
  const double above = rc["share_predicted_above_duration"].is_null()
                           ? NAN
                           : rc["share_predicted_above_duration"].get<double>();
  r.censoring.pass = above > 0.6;
  r.censoring.detail = fmt::format("{:.1f}% of {} right-censored test predictions exceed their durations",
                                   100.0 * above, rc["n"].get<std::size_t>());

  const auto t1 = Clock::now();
  cli({"explain", "--model", (dir / "tune_deepsurv/model.json").string(), "--data",
       (dir / "units/survival.csv").string(), "--seed", "13", "--out", (dir / "shap").string()});
  std::vector<std::string> ranked;
  {
    csv::LineReader reader((dir / "shap/ranking.csv").string());
    csv::expect_header(reader, "rank,feature,mean_abs_shap");
    std::string line;
    while (reader.next(line)) {
      if (!line.empty()) ranked.emplace_back(csv::split(line).at(1));
    }
  }
  const auto pos = std::find(ranked.begin(), ranked.end(), "bike_model") - ranked.begin();
  r.ranking.pass = !ranked.empty() && ranked.front() == "cumulative_distance" && pos < 3;
  r.ranking.detail = fmt::format("top three: {}; {:.0f}s",
                                 fmt::join(ranked.begin(), ranked.begin() + std::min<std::ptrdiff_t>(3, ranked.size()),
                                           ", "),
                                 seconds_since(t1));
  return r;
}

// ------------------------------------------------------ 8: unit identity

Outcome unit_accounting() {
  std::vector<sim::SimConfig> configs;
  auto full = sim::SimConfig::defaults();
  full.seed = 7;
  configs.push_back(full);
  for (std::uint64_t s = 1; s <= 6; ++s) configs.push_back(testing::small_sim_config(s, 20 + 10 * s));
  std::size_t checked = 0;
  std::vector<std::string> problems;
  for (const auto& cfg : configs) {
    const auto bundle = sim::simulate_fleet(cfg);
    for (const char* component : {"brake_pads", "wheel_spokes", "chain"}) {
      const auto u = testing::units_from_bundle(bundle, component, cfg.window);
      const auto where = fmt::format("seed {} {}", cfg.seed, component);
      ++checked;
      if (u.built.units.size() != u.built.repairs + u.built.bikes) problems.push_back(where + ": identity");
      if (!u.attached.counts.reconciles()) problems.push_back(where + ": exclusions");
      std::map<std::string, std::vector<const units::MOUnit*>> by_bike;
      for (const auto& unit : u.built.units) by_bike[unit.bike_id].push_back(&unit);
      bool tiles = by_bike.size() == u.built.bikes;
      for (const auto& [bike, list] : by_bike) {
        tiles = tiles && list.front()->start_date == cfg.window.start && list.back()->end_date == cfg.window.end;
        for (std::size_t i = 1; i < list.size(); ++i) tiles = tiles && list[i]->start_date == list[i - 1]->end_date;
      }
      if (!tiles) problems.push_back(where + ": tiling");
    }
  }
  return {problems.empty(),
          problems.empty() ? fmt::format("{} bundle/component pairs: identity, tiling and exclusion counts hold", checked)
                           : fmt::format("{}", fmt::join(problems, "; "))};
}

// -------------------------------------------------------------- 10: stats

Outcome statistics_battery() {
  const auto ref = json::parse(testing::read_file(testing::fixture_path("stats_reference.json")));
  double worst = 0.0;
  const auto gap = [&](double got, const json& want) { worst = std::max(worst, std::abs(got - want.get<double>())); };
  for (const auto& f : ref["fixtures"]) {
    const auto a = f["a"].get<std::vector<double>>();
    const auto b = f["b"].get<std::vector<double>>();
    const auto swa = stats::shapiro_wilk(a), swb = stats::shapiro_wilk(b);
    gap(swa.statistic, f["shapiro_a"][0]);
    gap(swa.p_value, f["shapiro_a"][1]);
    gap(swb.statistic, f["shapiro_b"][0]);
    gap(swb.p_value, f["shapiro_b"][1]);
    const auto ks = stats::ks_2samp(a, b);
    gap(ks.statistic, f["ks"][0]);
    gap(ks.p_value, f["ks"][1]);
    const auto tp = stats::t_test(a, b, true), tw = stats::t_test(a, b, false);
    gap(tp.statistic, f["t_pooled"][0]);
    gap(tp.p_value, f["t_pooled"][1]);
    gap(tw.statistic, f["t_welch"][0]);
    gap(tw.p_value, f["t_welch"][1]);
  }
  auto rng = make_rng(3, 10);
  std::vector<double> n1(3000), n2(3000), skew(3000);
  for (auto& v : n1) v = 10.0 + 2.0 * standard_normal(rng);
  for (auto& v : n2) v = 10.1 + 2.0 * standard_normal(rng);
  for (auto& v : skew) v = -5.0 * std::log(1.0 - uniform01(rng));
  const auto normal = stats::compare_distributions(n1, n2, 1000, 0.01, 1);
  const auto skewed = stats::compare_distributions(skew, n2, 1000, 0.01, 1);
  const bool routed = normal.comparison.test == "t-ind" && skewed.comparison.test == "ks-2sample";
  return {ref["fixtures"].size() == 20 && worst <= 1e-6 && routed,
          fmt::format("{} fixtures, max gap {:.1e}; normal pair -> {}, skewed pair -> {}", ref["fixtures"].size(),
                      worst, normal.comparison.test, skewed.comparison.test)};
}

// -------------------------------------------------------- 11: determinism

std::vector<std::string> differing_files(const fs::path& a, const fs::path& b) {
  std::vector<std::string> diff;
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    ++compared;
    if (!fs::exists(b / rel) || testing::read_file(entry.path()) != testing::read_file(b / rel)) {
      diff.push_back(rel.string());
    }
  }
  if (compared == 0) diff.push_back("(no files)");
  return diff;
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) n += entry.is_regular_file() ? 1 : 0;
  return n;
}

// Tuned DeepSurv from a finished run against the simulator's true expected
// lifetimes, relative to the grand-mean predictor.
int oracle_check(const fs::path& work) {
  Outcome o;
  try {
    const auto run = work / "run1";
    cli({"evaluate", "--predictions", (run / "tune_deepsurv/predictions_test.csv").string(), "--label", "deepsurv",
         "--ground-truth", (run / "data/ground_truth.csv").string(), "--out", (work / "oracle").string()});
    const auto r = read_json(work / "oracle/oracle.json")["deepsurv"];
    const double rmse = r["rmse"].get<double>();
    const double constant = r["constant_rmse"].get<double>();
    const double gain = 1.0 - rmse / constant;
    o = {gain >= 0.30, fmt::format("test RMSE vs true expected lifetimes {:.3f}, constant predictor {:.3f}, "
                                   "improvement {:.1f}% (n={})",
                                   rmse, constant, 100.0 * gain, r["n"].get<std::size_t>())};
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::cout << fmt::format("[{}] simulator oracle: deepsurv beats constant by 30%: {}", o.pass ? "PASS" : "FAIL",
                           o.detail)
            << std::endl;
  return o.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "fleetsurv_acceptance";
  bool oracle_only = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--work" && i + 1 < argc) work = argv[i + 1];
    if (std::string(argv[i]) == "--oracle") oracle_only = true;
  }
  if (oracle_only) return oracle_check(work);
  fs::remove_all(work);
  fs::create_directories(work);

  std::map<int, std::pair<std::string, Outcome>> results;
  const auto record = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    results[id] = {name, o};
    std::cout << fmt::format("[{}] criterion {}: {}: {}", o.pass ? "PASS" : "FAIL", id, name, o.detail) << std::endl;
  };

  record(1, "Kaplan-Meier product-limit", kaplan_meier_check);
  record(2, "Cox hazard-ratio recovery", [&] { return cox_recovery(work / "run1"); });
  record(3, "DeepSurv gradient check", deepsurv_gradient);
  record(4, "MTLR normalization and monotone curves", mtlr_normalization);
  record(5, "Kernel SHAP exactness", shap_exactness);

  PipelineResult first;
  bool pipeline_ok = true;
  try {
    first = pipeline(work / "run1");
  } catch (const std::exception& e) {
    pipeline_ok = false;
    first.ordering = first.censoring = first.ranking = {false, std::string("exception: ") + e.what()};
  }
  record(6, "synthetic model ordering", [&] { return first.ordering; });
  record(7, "right-censoring direction", [&] { return first.censoring; });
  record(8, "MO-unit accounting", unit_accounting);
  record(9, "SHAP ranking sanity", [&] { return first.ranking; });
  record(10, "statistics battery", statistics_battery);
  record(11, "determinism", [&]() -> Outcome {
    if (!pipeline_ok) return {false, "first run did not complete"};
    cox_recovery(work / "run2");
    pipeline(work / "run2");
    const auto diff = differing_files(work / "run1", work / "run2");
    const auto extra = differing_files(work / "run2", work / "run1");
    if (!diff.empty() || !extra.empty()) {
      return {false, fmt::format("differing files: {}", fmt::join(diff.empty() ? extra : diff, ", "))};
    }
    return {true, fmt::format("{} output files byte-identical across two runs", count_files(work / "run1"))};
  });

  std::size_t failed = 0;
  for (const auto& [id, r] : results) failed += r.second.pass ? 0 : 1;
  std::cout << fmt::format("{} of {} criteria passed", results.size() - failed, results.size()) << std::endl;
  return failed == 0 ? 0 : 1;
}
