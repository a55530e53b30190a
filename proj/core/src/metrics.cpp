#include "fleetsurv/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include "json.hpp"

#include "fleetsurv/errors.hpp"
#include "fleetsurv/stats.hpp"

namespace fleetsurv::tuning {
namespace {

using Json = nlohmann::ordered_json;

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

Json describe_json(const Descriptive& d) {
  Json j;
  j["n"] = d.n;
  j["mean"] = d.mean;
  j["std"] = d.std;
  j["min"] = d.min;
  for (std::size_t i = 0; i < kPercentiles.size(); ++i) j[fmt::format("{}%", kPercentiles[i])] = d.percentiles[i];
  j["max"] = d.max;
  return j;
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  m.n = v.size();
  if (!v.empty()) {
    m.mean = stats::mean(v);
    m.std = std::sqrt(stats::variance(v));
  }
  return m;
}

}  // namespace

MetricsReport evaluate(std::span<const double> predicted, std::span<const double> actual, MetricOptions options,
                       std::string label) {
  if (predicted.size() != actual.size()) {
    throw DataError(fmt::format("predicted ({}) and actual ({}) differ in length", predicted.size(), actual.size()));
  }
  if (actual.empty()) throw DataError("no rows to evaluate");
  MetricsReport r;
  r.label = std::move(label);
  r.n = actual.size();
  const double n = static_cast<double>(r.n);
  double sse = 0.0;
  double ape = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const double e = actual[i] - predicted[i];
    sse += e * e;
    if (options.mape) {
      if (actual[i] == 0.0) throw DataError(fmt::format("row {}: MAPE undefined for a zero actual value", i));
      ape += std::abs(e / actual[i]);
    }
  }
  r.rmse = std::sqrt(sse / n);
  if (options.mape) r.mape = 100.0 * ape / n;
  if (options.r2) {
    if (r.n < 2) throw DataError("R^2 needs at least two rows");
    const double mean = stats::mean(actual);
    double sst = 0.0;
    for (double y : actual) sst += (y - mean) * (y - mean);
    if (sst > 0.0) r.r2 = 1.0 - sse / sst;
  }
  return r;
}

Descriptive describe(std::span<const double> values) {
  Descriptive d;
  d.n = values.size();
  if (values.empty()) return d;
  std::vector<double> v(values.begin(), values.end());
  d.mean = stats::mean(v);
  d.std = std::sqrt(stats::variance(v));
  d.min = *std::min_element(v.begin(), v.end());
  d.max = *std::max_element(v.begin(), v.end());
  for (std::size_t i = 0; i < kPercentiles.size(); ++i) d.percentiles[i] = stats::quantile(v, kPercentiles[i] / 100.0);
  return d;
}

PredictionAnalysis prediction_analysis(std::span<const double> predicted, std::span<const double> actual,
                                       std::span<const std::uint8_t> event) {
  if (predicted.size() != actual.size() || event.size() != actual.size()) {
    throw DataError("predicted, actual and event vectors are misaligned");
  }
  PredictionAnalysis a;
  std::vector<double> up;
  std::vector<double> ua;
  std::vector<double> ratio;
  std::vector<double> diff;
  std::vector<double> cp;
  std::vector<double> ca;
  std::vector<double> all_p(predicted.begin(), predicted.end());
  std::vector<double> all_a(actual.begin(), actual.end());
  std::size_t early = 0;
  std::size_t late = 0;
  std::size_t above = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (event[i]) {
      up.push_back(predicted[i]);
      ua.push_back(actual[i]);
      if (actual[i] == 0.0) throw DataError(fmt::format("row {}: ratio undefined for a zero actual value", i));
      ratio.push_back(predicted[i] / actual[i]);
      diff.push_back(std::abs(predicted[i] - actual[i]));
      early += predicted[i] < actual[i];
      late += predicted[i] > actual[i];
    } else {
      cp.push_back(predicted[i]);
      ca.push_back(actual[i]);
      above += predicted[i] > actual[i];
    }
  }
  if (up.size() < 2) throw DataError("prediction analysis needs at least two uncensored rows");
  a.ratio = describe(ratio);
  a.abs_difference = describe(diff);
  a.pearson = stats::pearson(up, ua);
  const auto nu = static_cast<double>(up.size());
  a.share_early = static_cast<double>(early) / nu;
  a.share_late = static_cast<double>(late) / nu;
  a.share_exact = 1.0 - a.share_early - a.share_late;
  a.censored = cp.size();
  if (!cp.empty()) a.censored_share_above = static_cast<double>(above) / static_cast<double>(cp.size());
  a.actual = {mean_std(all_a), mean_std(ua), mean_std(ca)};
  a.predicted = {mean_std(all_p), mean_std(up), mean_std(cp)};
  return a;
}

std::string metrics_json(std::span<const MetricsReport> reports) {
  Json rows = Json::array();
  for (const auto& r : reports) {
    rows.push_back({{"subset", r.label}, {"n", r.n}, {"rmse", r.rmse}, {"r2", opt(r.r2)}, {"mape", opt(r.mape)}});
  }
  return Json{{"metrics", rows}}.dump(2);
}

std::string analysis_json(const PredictionAnalysis& a) {
  Json j;
  Json unc;
  unc["predicted_to_actual_ratio"] = describe_json(a.ratio);
  unc["absolute_difference"] = describe_json(a.abs_difference);
  unc["pearson"] = a.pearson;
  unc["share_predicted_before"] = a.share_early;
  unc["share_predicted_after"] = a.share_late;
  unc["share_exact"] = a.share_exact;
  j["uncensored"] = unc;
  j["right_censored"] = {{"n", a.censored}, {"share_predicted_above_duration", opt(a.censored_share_above)}};
  Json table = Json::array();
  const char* names[] = {"all", "uncensored", "right_censored"};
  for (std::size_t k = 0; k < 3; ++k) {
    table.push_back({{"subset", names[k]},
                     {"n", a.actual[k].n},
                     {"actual_mean", a.actual[k].mean},
                     {"actual_std", a.actual[k].std},
                     {"predicted_mean", a.predicted[k].mean},
                     {"predicted_std", a.predicted[k].std}});
  }
  j["actual_vs_predicted"] = table;
  return j.dump(2);
}

}  // namespace fleetsurv::tuning
