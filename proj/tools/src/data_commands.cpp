#include <fmt/format.h>

#include <fstream>
#include <memory>
#include <set>

#include "common.hpp"
#include "fleetsurv/config.hpp"
#include "fleetsurv/errors.hpp"
#include "fleetsurv/ingestion.hpp"
#include "fleetsurv/mo_units.hpp"
#include "fleetsurv/mobility.hpp"
#include "fleetsurv/simgen.hpp"
#include "fleetsurv/stats.hpp"
#include "json.hpp"

namespace fleetsurv::cli {

namespace {

using Json = nlohmann::ordered_json;

Json test_json(const stats::TestResult& r) { return Json::parse(mobility::test_result_json(r)); }

std::ofstream open(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  CommonOptions common;
};

void run_simulate(const SimulateOptions& o, Context& ctx) {
  KeyValueConfig cfg;
  if (!o.common.config.empty()) cfg = KeyValueConfig::load(o.common.config);
  cfg.set("seed", std::to_string(o.common.seed));
  cfg.set("threads", std::to_string(o.common.threads));
  const auto config = sim::sim_config_from(cfg);
  const auto bundle = sim::simulate_fleet(config);
  sim::write_bundle(bundle, o.common.out);
  std::size_t repairs = 0;
  for (const auto& op : bundle.maintenance) {
    for (const auto& h : config.hazards) repairs += op.subcategory == h.subcategory ? 1 : 0;
  }
  ctx.out << fmt::format("simulated {} bikes, {} stations, {} trips, {} maintenance rows ({} component repairs)\n",
                         bundle.fleet.size(), bundle.stations.size(), bundle.trips.size(),
                         bundle.maintenance.size(), repairs);
}

// ---------------------------------------------------------------- mobility

struct MobilityOptions {
  CommonOptions common;
  BundlePaths paths;
  double min_minutes = 2.0;
  double max_minutes = 60.0;
  bool unfiltered = false;
  std::string buckets = "-inf:-50,-50:50,50:100,100:inf";
  std::size_t draws = 5000;
  double alpha = 0.01;
};

void run_mobility(const MobilityOptions& o, Context& ctx) {
  if (o.min_minutes > o.max_minutes) throw UsageError("--min-duration exceeds --max-duration");
  const auto buckets = mobility::parse_buckets(o.buckets);
  const auto providers = ingest::load_providers(o.paths.resolve(o.paths.stations, "stations.csv"),
                                                o.paths.resolve(o.paths.distances, "distances.csv"),
                                                o.paths.resolve(o.paths.weather, "weather.csv"));
  const auto loaded = ingest::load_trips(o.paths.resolve(o.paths.trips, "trips.csv"));
  const auto filtered = mobility::filter_trips(loaded.trips, {o.min_minutes, o.max_minutes});
  const auto enriched = mobility::enrich_trips(filtered.trips, providers.distances, providers.stations);
  const auto dir = ensure_dir(o.common.out);

  std::vector<ingest::Trip> enriched_trips;
  enriched_trips.reserve(enriched.metrics.size());
  for (const auto& m : enriched.metrics) enriched_trips.push_back(filtered.trips[m.trip_index]);

  Json summary;
  summary["input_trips"] = loaded.trips.size();
  summary["rejected_rows"] = loaded.report.rejected;
  summary["retained_trips"] = filtered.trips.size();
  summary["retained_fraction"] = filtered.retained_fraction();
  summary["enriched_trips"] = enriched.metrics.size();
  summary["skipped_trips"] = enriched.skipped.size();

  // Per-model samples of each trip metric.
  struct Metric {
    const char* name;
    double mobility::TripMetrics::*field;
  };
  const Metric metrics[] = {{"duration_min", &mobility::TripMetrics::duration_min},
                            {"distance_m", &mobility::TripMetrics::distance_m},
                            {"speed_kmh", &mobility::TripMetrics::speed_kmh},
                            {"elevation_m", &mobility::TripMetrics::elevation_m}};
  Json tests = Json::object();
  std::vector<std::string> warnings;
  for (std::size_t k = 0; k < std::size(metrics); ++k) {
    std::array<std::vector<double>, mobility::kModels> samples;
    for (const auto& m : enriched.metrics) {
      samples[mobility::index_of(filtered.trips[m.trip_index].bike_model)].push_back(m.*(metrics[k].field));
    }
    const auto& mech = samples[0];
    const auto& elec = samples[1];
    if (mech.size() < 3 || elec.size() < 3) {
      warnings.push_back(fmt::format("{}: fewer than 3 trips for a bike model, test skipped", metrics[k].name));
      continue;
    }
    const auto cmp = stats::compare_distributions(mech, elec, o.draws, o.alpha, derive_seed(o.common.seed, k));
    Json entry;
    entry["mechanical"] = {{"n", mech.size()}, {"mean", stats::mean(mech)},
                           {"std", std::sqrt(stats::variance(mech))}, {"median", stats::quantile(mech, 0.5)}};
    entry["electric"] = {{"n", elec.size()}, {"mean", stats::mean(elec)},
                         {"std", std::sqrt(stats::variance(elec))}, {"median", stats::quantile(elec, 0.5)}};
    entry["draws"] = cmp.draws;
    entry["normality_mechanical"] = test_json(cmp.normality_a);
    entry["normality_electric"] = test_json(cmp.normality_b);
    entry["comparison"] = test_json(cmp.comparison);
    tests[metrics[k].name] = entry;
    for (const auto& w : cmp.warnings) warnings.push_back(std::string(metrics[k].name) + ": " + w);
  }
  summary["tests"] = tests;
  summary["warnings"] = warnings;
  write_text(dir / "mobility_summary.json", summary.dump(2));

  // Flows over the filtered trips unless told otherwise.
  const auto flow_source = o.unfiltered ? std::span<const ingest::Trip>(loaded.trips)
                                        : std::span<const ingest::Trip>(filtered.trips);
  {
    auto out = open(dir / "flows.csv");
    const std::vector<mobility::FlowTable> tables{mobility::station_flows(flow_source, providers.stations)};
    mobility::write_flow_csv(out, tables);
  }
  {
    auto out = open(dir / "elevation_flows.csv");
    const auto tables = mobility::elevation_flows(enriched_trips, [&] {
      std::vector<mobility::TripMetrics> m = enriched.metrics;
      for (std::size_t i = 0; i < m.size(); ++i) m[i].trip_index = i;
      return m;
    }(), providers.stations, buckets);
    mobility::write_flow_csv(out, tables);
  }
  const auto profile = mobility::temporal_profile(flow_source);
  {
    auto out = open(dir / "hourly_profile.csv");
    mobility::write_profile_csv(out, profile);
  }
  {
    auto out = open(dir / "weekly.csv");
    mobility::write_weekly_csv(out, profile);
  }
  {
    auto out = open(dir / "daily.csv");
    mobility::write_daily_csv(out, profile);
  }
  print_warnings(ctx, warnings);
  ctx.out << fmt::format("{} trips, {} retained ({:.2f}%), {} enriched\n", loaded.trips.size(),
                         filtered.trips.size(), 100.0 * filtered.retained_fraction(), enriched.metrics.size());
}

// ------------------------------------------------------------- build-units

struct BuildOptions {
  CommonOptions common;
  BundlePaths paths;
  WindowOptions window;
  std::string component;
  double min_minutes = 2.0;
  double max_minutes = 60.0;
  std::string speed_mean = "trip";
  bool include_wind = false;
  std::vector<std::string> counts;
};

void run_build_units(const BuildOptions& o, Context& ctx) {
  const auto component = units::component_from_name(o.component);
  units::CovariateOptions cov;
  if (o.speed_mean == "distance-weighted") {
    cov.speed_mean = units::SpeedMean::kDistanceWeighted;
  } else if (o.speed_mean != "trip") {
    throw UsageError("--speed-mean must be trip or distance-weighted");
  }
  cov.include_wind = o.include_wind;
  if (!o.counts.empty()) cov.count_subcategories = o.counts;
  for (const auto& s : cov.count_subcategories) {
    if (s == component.subcategory) throw UsageError("the target subcategory cannot be a count covariate");
  }

  auto window = o.window.window();
  ingest::IngestOptions ingest_options;
  ingest_options.study_window = window;
  const auto providers = ingest::load_providers(o.paths.resolve(o.paths.stations, "stations.csv"),
                                                o.paths.resolve(o.paths.distances, "distances.csv"),
                                                o.paths.resolve(o.paths.weather, "weather.csv"), ingest_options);
  if (!window) {
    if (providers.weather.empty()) throw DataError("weather series is empty; pass --start and --end");
    window = DateWindow{providers.weather.first(), providers.weather.last() + 1};
    ingest_options.study_window = window;
  }
  const auto trips = ingest::load_trips(o.paths.resolve(o.paths.trips, "trips.csv"));
  const auto mos = ingest::load_maintenance(o.paths.resolve(o.paths.maintenance, "maintenance.csv"), ingest_options);

  const auto filtered = mobility::filter_trips(trips.trips, {o.min_minutes, o.max_minutes});
  const auto enriched = mobility::enrich_trips(filtered.trips, providers.distances, providers.stations);
  std::set<std::string> fleet_set;
  for (const auto& t : trips.trips) {
    if (window->contains(t.start_time.date())) fleet_set.insert(t.bike_id);
  }
  const std::vector<std::string> fleet(fleet_set.begin(), fleet_set.end());

  auto built = units::build_mo_units(mos.ops, component, *window, fleet);
  auto attached = units::attach_covariates(built.units, filtered.trips, enriched.metrics, providers.weather, mos.ops,
                                           *window, cov);
  if (!attached.counts.reconciles()) throw NumericalError("unit exclusion counters do not reconcile");

  const auto dir = ensure_dir(o.common.out);
  write_survival_csv((dir / "survival.csv").string(), attached.dataset, true);
  units::write_units_csv((dir / "units.csv").string(), built.units, attached.status);
  const auto summary = units::dataset_summary(built.units, attached.status);
  write_text(dir / "manifest.json", units::manifest_json(summary, *window, attached.dataset.feature_names, cov));

  print_warnings(ctx, built.warnings);
  ctx.out << fmt::format("{}: {} units from {} repairs on {} bikes; {} retained ({} events, {} right-censored)\n",
                         component.name, built.units.size(), built.repairs, built.bikes,
                         attached.dataset.rows(), attached.dataset.event_count(),
                         attached.dataset.rows() - attached.dataset.event_count());
}

}  // namespace

void add_simulate(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<SimulateOptions>();
  auto* sub = app.add_subcommand("simulate", "Generate a synthetic fleet data bundle with known hazards");
  sub->add_option("--config", o->common.config, "simulator configuration (key = value)");
  sub->add_option("--out", o->common.out, "output directory")->required();
  add_seed_flag(*sub, o->common);
  add_threads_flag(*sub, o->common);
  sub->callback([o, &ctx] { run_simulate(*o, ctx); });
}

void add_mobility(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<MobilityOptions>();
  auto* sub = app.add_subcommand("mobility", "Trip filtering, metric tests, station flows and usage profiles");
  add_config_flag(*sub, o->common);
  add_bundle_flags(*sub, o->paths, false);
  sub->add_option("--out", o->common.out, "output directory")->required();
  add_seed_flag(*sub, o->common);
  add_threads_flag(*sub, o->common);
  sub->add_option("--min-duration", o->min_minutes, "shortest kept trip, minutes (inclusive)")->default_val(2.0);
  sub->add_option("--max-duration", o->max_minutes, "longest kept trip, minutes (inclusive)")->default_val(60.0);
  sub->add_flag("--unfiltered", o->unfiltered, "build flows and profiles from all trips");
  sub->add_option("--buckets", o->buckets, "elevation buckets lo:hi,... in meters, half-open")
      ->default_val(o->buckets);
  sub->add_option("--draws", o->draws, "values drawn per bike model for each test")->default_val(5000);
  sub->add_option("--alpha", o->alpha, "significance level")->default_val(0.01);
  sub->callback([o, &ctx] { run_mobility(*o, ctx); });
}

void add_build_units(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<BuildOptions>();
  auto* sub = app.add_subcommand("build-units", "Build the per-component survival dataset");
  add_config_flag(*sub, o->common);
  add_bundle_flags(*sub, o->paths, true);
  add_window_flags(*sub, o->window);
  sub->add_option("--component", o->component, "brake_pads, wheel_spokes or chain")->required();
  sub->add_option("--out", o->common.out, "output directory")->required();
  add_threads_flag(*sub, o->common);
  sub->add_option("--min-duration", o->min_minutes, "shortest trip counted, minutes")->default_val(2.0);
  sub->add_option("--max-duration", o->max_minutes, "longest trip counted, minutes")->default_val(60.0);
  sub->add_option("--speed-mean", o->speed_mean, "trip or distance-weighted")->default_val("trip");
  sub->add_flag("--include-wind", o->include_wind, "add mean wind speed and direction covariates");
  sub->add_option("--count", o->counts, "maintenance subcategory counted as a covariate (repeatable)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->delimiter(',');
  sub->callback([o, &ctx] { run_build_units(*o, ctx); });
}

}  // namespace fleetsurv::cli
