#include "fleetsurv/simgen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <thread>
#include <unordered_map>

#include "json.hpp"

#include "fleetsurv/csv.hpp"
#include "fleetsurv/errors.hpp"

namespace fleetsurv::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::array<double, 24> bumps(std::initializer_list<std::pair<double, double>> peaks, double width,
                             double floor) {
  std::array<double, 24> out{};
  for (int h = 0; h < 24; ++h) {
    double v = h < 6 ? floor * 0.3 : floor;
    for (const auto& [at, height] : peaks) {
      const double z = (h - at) / width;
      v += height * std::exp(-0.5 * z * z);
    }
    out[static_cast<std::size_t>(h)] = v;
  }
  return out;
}

double lognormal_factor(Rng& rng, double cv) {
  if (cv <= 0.0) return 1.0;
  const double s2 = std::log1p(cv * cv);
  return std::exp(std::sqrt(s2) * standard_normal(rng) - 0.5 * s2);
}

int poisson(Rng& rng, double mean) {
  const double limit = std::exp(-mean);
  double p = 1.0;
  int k = 0;
  do {
    ++k;
    p *= uniform01(rng);
  } while (p > limit);
  return k - 1;
}

std::size_t pick(const std::vector<double>& cumulative, Rng& rng) {
  const double u = uniform01(rng) * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

double round_to(double v, double step) { return std::round(v / step) * step; }

struct Geography {
  std::vector<ingest::Station> stations;
  std::vector<double> popularity_cdf;
  std::vector<double> distance;  // n x n, row-major, 0 on the diagonal
  std::array<std::vector<std::vector<double>>, 2> dest_cdf;
  std::array<double, 2> mean_trip_km{};
};

const ModelProfile& profile(const SimConfig& c, BikeModel m) {
  return m == BikeModel::kElectric ? c.electric : c.mechanical;
}

Geography build_geography(const SimConfig& c) {
  Rng rng = make_rng(c.seed, 2);
  Geography g;
  const std::size_t n = c.stations;
  std::vector<double> xs(n), ys(n), pop(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = uniform01(rng) * c.area_m;
    ys[i] = uniform01(rng) * c.area_m;
    pop[i] = lognormal_factor(rng, 0.5);
    ingest::Station s;
    s.station_id = fmt::format("S{:03}", i + 1);
    s.lat = round_to(41.36 + ys[i] / 111320.0, 1e-6);
    s.lon = round_to(2.14 + xs[i] / (111320.0 * std::cos(41.37 * std::numbers::pi / 180.0)), 1e-6);
    s.altitude_m = round_to(std::max(1.0, 5.0 + c.altitude_slope * ys[i] + 4.0 * standard_normal(rng)), 0.1);
    g.stations.push_back(std::move(s));
  }
  g.distance.assign(n * n, 0.0);
  for (std::size_t o = 0; o < n; ++o) {
    for (std::size_t d = 0; d < n; ++d) {
      if (o == d) continue;
      const double euclid = std::hypot(xs[o] - xs[d], ys[o] - ys[d]);
      const double noise = 1.0 + 0.05 * (2.0 * uniform01(rng) - 1.0);
      g.distance[o * n + d] = round_to(std::max(100.0, euclid * 1.3 * noise), 0.1);
    }
  }
  double acc = 0.0;
  for (double p : pop) g.popularity_cdf.push_back(acc += p);

  for (int m = 0; m < 2; ++m) {
    const auto& prof = profile(c, static_cast<BikeModel>(m));
    auto& cdfs = g.dest_cdf[static_cast<std::size_t>(m)];
    double expected = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
      std::vector<double> cdf(n);
      double total = 0.0;
      double weighted = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        double w = 0.0;
        if (d != o) {
          const double dist = g.distance[o * n + d];
          const double climb = g.stations[d].altitude_m - g.stations[o].altitude_m;
          w = pop[d] * std::exp(-dist / prof.distance_scale_m + prof.uphill_preference * climb / 50.0);
        }
        total += w;
        weighted += w * g.distance[o * n + d];
        cdf[d] = total;
      }
      expected += pop[o] / acc * weighted / total;
      cdfs.push_back(std::move(cdf));
    }
    g.mean_trip_km[static_cast<std::size_t>(m)] = expected / 1000.0;
  }
  return g;
}

std::vector<ingest::WeatherDay> build_weather(const SimConfig& c) {
  Rng rng = make_rng(c.seed, 1);
  const auto& w = c.weather;
  std::vector<ingest::WeatherDay> out;
  double temp_dev = 0.0;
  double pressure_dev = 0.0;
  for (Date d = c.window.start; d < c.window.end; d = d + 1) {
    const double doy = d.day_of_year();
    temp_dev = 0.6 * temp_dev + w.temp_noise * 0.8 * standard_normal(rng);
    pressure_dev = 0.8 * pressure_dev + w.pressure_noise * 0.6 * standard_normal(rng);
    ingest::WeatherDay day;
    day.date = d;
    day.temp_c = round_to(w.temp_mean + w.temp_amplitude * std::sin(kTwoPi * (doy - 105.0) / 365.25) + temp_dev, 0.1);
    const double rain_p = std::min(1.0, w.rain_probability * (1.0 + 0.5 * std::cos(kTwoPi * (doy - 290.0) / 365.25)));
    const double u = uniform01(rng);
    const double amount = -w.rain_mean_mm * std::log(1.0 - uniform01(rng));
    day.precip_mm = u < rain_p ? round_to(amount, 0.1) : 0.0;
    day.wind_speed_kmh = round_to(w.wind_mean_kmh * lognormal_factor(rng, 0.35), 0.1);
    day.wind_dir_deg = static_cast<double>(uniform_index(rng, 360));
    day.pressure_hpa = round_to(w.pressure_mean + pressure_dev, 0.1);
    out.push_back(day);
  }
  return out;
}

struct BikeOutput {
  std::vector<ingest::Trip> trips;
  std::vector<ingest::MaintenanceOp> maintenance;
  std::vector<GroundTruth> truth;
  std::vector<std::size_t> failures;  // per hazard
};

class BikeSimulator {
 public:
  BikeSimulator(const SimConfig& c, const Geography& g, const std::vector<ingest::WeatherDay>& weather)
      : c_(c), g_(g), weather_(weather) {
    for (int h = 0; h < 24; ++h) {
      weekday_cdf_.push_back((weekday_cdf_.empty() ? 0.0 : weekday_cdf_.back()) + c.weekday_profile[h]);
      weekend_cdf_.push_back((weekend_cdf_.empty() ? 0.0 : weekend_cdf_.back()) + c.weekend_profile[h]);
    }
  }

  BikeOutput run(std::size_t index, const std::string& bike_id, BikeModel initial) const {
    const std::uint64_t bike_seed = derive_seed(c_.seed, 100 + index);
    Rng attr = make_rng(bike_seed, 0);
    const double usage = lognormal_factor(attr, c_.usage_cv);
    const double speed_factor = lognormal_factor(attr, c_.speed_cv);
    std::optional<Date> upgraded;
    if (initial == BikeModel::kMechanical && uniform01(attr) < c_.upgrade_fraction) {
      const auto span = static_cast<std::uint64_t>(std::max(1, c_.window.length() - 60));
      upgraded = c_.window.start + 30 + static_cast<std::int32_t>(uniform_index(attr, span));
    }
    const auto model_at = [&](Date d) {
      return upgraded && d >= *upgraded ? BikeModel::kElectric : initial;
    };
    const auto daily_km = [&](BikeModel m) {
      return profile(c_, m).trips_per_day * usage * g_.mean_trip_km[static_cast<std::size_t>(m)];
    };

    BikeOutput out;
    simulate_trips(bike_seed, bike_id, usage, speed_factor, model_at, out);

    for (std::size_t h = 0; h < c_.hazards.size(); ++h) {
      const auto& hz = c_.hazards[h];
      Rng rng = make_rng(bike_seed, 20 + h);
      const auto scale_for = [&](BikeModel m) {
        const double electric = m == BikeModel::kElectric ? 1.0 : 0.0;
        return hz.scale * std::exp(-hz.distance_coef * daily_km(m) -
                                   hz.speed_coef * profile(c_, m).speed_kmh * speed_factor -
                                   hz.electric_coef * electric);
      };
      const double expected_factor = std::tgamma(1.0 + 1.0 / hz.shape);
      const double phase = std::max(1.0, std::round(scale_for(initial)));
      Date installed = c_.window.start - c_.burn_in_days -
                       static_cast<std::int32_t>(uniform_index(rng, static_cast<std::uint64_t>(phase)));
      std::size_t k = 0;
      std::size_t failures = 0;
      while (true) {
        const BikeModel m = model_at(installed);
        const double lambda = scale_for(m);
        const std::int32_t life = draw_lifetime(rng, hz.shape, lambda);
        const Date failed = installed + life;
        if (failed < c_.window.start) {
          installed = failed;
          continue;
        }
        GroundTruth gt;
        gt.unit_id = fmt::format("{}:{}:{}", bike_id, hz.component, k++);
        gt.bike_id = bike_id;
        gt.component = hz.component;
        gt.true_scale = lambda;
        gt.true_shape = hz.shape;
        gt.true_expected_days = lambda * expected_factor;
        gt.installed = installed;
        gt.lifetime_days = life;
        out.truth.push_back(std::move(gt));
        if (failed >= c_.window.end) break;
        out.maintenance.push_back({"", failed, hz.category, hz.subcategory, bike_id, model_at(failed)});
        ++failures;
        installed = failed;
      }
      out.failures.push_back(failures);
    }

    for (std::size_t o = 0; o < c_.operations.size(); ++o) {
      const auto& op = c_.operations[o];
      Rng rng = make_rng(bike_seed, 60 + o);
      for (Date d = c_.window.start; d < c_.window.end; d = d + 1) {
        const BikeModel m = model_at(d);
        const double p = std::min(1.0, op.rate_per_day * (op.usage_scaled ? daily_km(m) / 5.0 : 1.0));
        if (uniform01(rng) < p) out.maintenance.push_back({"", d, op.category, op.subcategory, bike_id, m});
      }
    }
    return out;
  }

 private:
  template <typename ModelAt>
  void simulate_trips(std::uint64_t bike_seed, const std::string& bike_id, double usage, double speed_factor,
                      const ModelAt& model_at, BikeOutput& out) const {
    Rng rng = make_rng(bike_seed, 1);
    const std::size_t n = g_.stations.size();
    for (const auto& day : weather_) {
      const Date d = day.date;
      const BikeModel m = model_at(d);
      const auto& prof = profile(c_, m);
      const bool weekend = d.weekday() >= 5;
      double rate = prof.trips_per_day * usage;
      rate *= 1.0 + c_.season_amplitude * std::sin(kTwoPi * (d.day_of_year() - 105.0) / 365.25);
      if (weekend) rate *= c_.weekend_factor;
      if (day.precip_mm >= 1.0) rate *= c_.rain_factor;
      const int count = poisson(rng, rate);
      const std::size_t first = out.trips.size();
      for (int t = 0; t < count; ++t) {
        const auto hour = static_cast<std::int64_t>(pick(weekend ? weekend_cdf_ : weekday_cdf_, rng));
        const std::size_t origin = pick(g_.popularity_cdf, rng);
        const std::size_t dest = pick(g_.dest_cdf[static_cast<std::size_t>(m)][origin], rng);
        const double meters = g_.distance[origin * n + dest];
        const double speed = prof.speed_kmh * speed_factor * lognormal_factor(rng, c_.trip_speed_cv);
        std::int64_t seconds = std::max<std::int64_t>(1, std::llround(meters / 1000.0 / speed * 3600.0));
        if (uniform01(rng) < c_.outlier_fraction) {
          seconds = uniform01(rng) < 0.5 ? 10 + static_cast<std::int64_t>(uniform_index(rng, 100))
                                         : 3661 + static_cast<std::int64_t>(uniform_index(rng, 7200));
        }
        ingest::Trip trip;
        trip.bike_id = bike_id;
        trip.bike_model = m;
        if (uniform01(rng) >= 0.03) trip.user_id = fmt::format("U{:05}", 1 + uniform_index(rng, 20000));
        trip.start_station = g_.stations[origin].station_id;
        trip.end_station = g_.stations[dest].station_id;
        trip.start_time.seconds = std::int64_t{d.days} * 86400 + hour * 3600 +
                                  static_cast<std::int64_t>(uniform_index(rng, 3600));
        trip.end_time.seconds = trip.start_time.seconds + seconds;
        out.trips.push_back(std::move(trip));
      }
      std::sort(out.trips.begin() + static_cast<std::ptrdiff_t>(first), out.trips.end(),
                [](const ingest::Trip& a, const ingest::Trip& b) { return a.start_time < b.start_time; });
    }
  }

  const SimConfig& c_;
  const Geography& g_;
  const std::vector<ingest::WeatherDay>& weather_;
  std::vector<double> weekday_cdf_;
  std::vector<double> weekend_cdf_;
};

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw UsageError(what + " must be finite");
}

void check_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw UsageError(what + " must be positive");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

std::int32_t draw_lifetime(Rng& rng, double shape, double scale) {
  const double u = 1.0 - uniform01(rng);  // (0, 1]
  const double t = scale * std::pow(-std::log(u), 1.0 / shape);
  return static_cast<std::int32_t>(std::max(1.0, std::round(std::min(t, 1e8))));
}

SimConfig SimConfig::defaults() {
  SimConfig c;
  c.weekday_profile = bumps({{8.0, 3.0}, {14.0, 2.0}, {18.0, 2.6}}, 1.2, 0.25);
  c.weekend_profile = bumps({{14.0, 1.8}, {19.0, 1.6}}, 2.0, 0.25);
  c.hazards = {
      {"brake_pads", "brake_pads_change", "brakes", 2.0, 160.0, 0.1, 0.03, 0.2},
      {"wheel_spokes", "wheel_spokes_change", "wheels", 1.5, 420.0, 0.08, 0.02, 0.1},
      {"chain", "chain_change", "transmission", 2.5, 520.0, 0.06, 0.02, 0.15},
  };
  c.operations = {
      {"brake_tension_adjust", "brakes", 1.0 / 40.0, true},
      {"front_tube_change", "wheels", 1.0 / 150.0, true},
      {"rear_tube_change", "wheels", 1.0 / 120.0, true},
      {"front_cover_change", "wheels", 1.0 / 250.0, false},
      {"cleaning", "general", 1.0 / 45.0, false},
      {"greasing", "general", 1.0 / 70.0, false},
  };
  return c;
}

void SimConfig::validate() const {
  if (stations < 2) throw UsageError(fmt::format("infeasible config: {} stations, at least 2 required", stations));
  if (mechanical.bikes + electric.bikes == 0) throw UsageError("infeasible config: empty fleet");
  if (window.length() < 30) throw UsageError("study window must span at least 30 days");
  if (burn_in_days < 0) throw UsageError("burn_in_days must be non-negative");
  check_positive(area_m, "area_m");
  check_finite(altitude_slope, "altitude_slope");
  for (const auto* p : {&mechanical, &electric}) {
    const std::string name = p == &mechanical ? "mechanical" : "electric";
    check_positive(p->trips_per_day, name + ".trips_per_day");
    check_positive(p->speed_kmh, name + ".speed_kmh");
    check_positive(p->distance_scale_m, name + ".distance_scale_m");
    check_finite(p->uphill_preference, name + ".uphill_preference");
  }
  for (double f : {usage_cv, speed_cv, trip_speed_cv}) {
    if (!(f >= 0.0 && f < 2.0)) throw UsageError("coefficients of variation must lie in [0, 2)");
  }
  for (double f : {outlier_fraction, upgrade_fraction}) {
    if (!(f >= 0.0 && f < 1.0)) throw UsageError("fractions must lie in [0, 1)");
  }
  check_positive(weekend_factor, "weekend_factor");
  check_positive(rain_factor, "rain_factor");
  if (!(season_amplitude >= 0.0 && season_amplitude < 1.0)) throw UsageError("season_amplitude must lie in [0, 1)");
  for (const auto* prof : {&weekday_profile, &weekend_profile}) {
    double total = 0.0;
    for (double v : *prof) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError("hourly profile weights must be non-negative");
      total += v;
    }
    if (total <= 0.0) throw UsageError("hourly profile has no positive weight");
  }
  for (const auto& h : hazards) {
    check_positive(h.shape, "hazard." + h.component + ".shape");
    check_positive(h.scale, "hazard." + h.component + ".scale");
    check_finite(h.distance_coef, "hazard." + h.component + ".distance_coef");
    check_finite(h.speed_coef, "hazard." + h.component + ".speed_coef");
    check_finite(h.electric_coef, "hazard." + h.component + ".electric_coef");
  }
  for (const auto& o : operations) {
    check_positive(o.rate_per_day, "operation." + o.subcategory + ".rate_per_day");
  }
  check_positive(weather.rain_mean_mm, "weather.rain_mean_mm");
  check_positive(weather.wind_mean_kmh, "weather.wind_mean_kmh");
  if (!(weather.rain_probability >= 0.0 && weather.rain_probability <= 1.0)) {
    throw UsageError("weather.rain_probability must lie in [0, 1]");
  }
}

SimConfig sim_config_from(const KeyValueConfig& cfg) {
  SimConfig c = SimConfig::defaults();
  c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(c.seed)));
  c.stations = static_cast<std::size_t>(cfg.get_int("stations", static_cast<long long>(c.stations)));
  c.area_m = cfg.get_double("area_m", c.area_m);
  c.altitude_slope = cfg.get_double("altitude_slope", c.altitude_slope);
  if (auto v = cfg.find("start")) c.window.start = Date::parse(*v);
  if (auto v = cfg.find("end")) c.window.end = Date::parse(*v);
  c.burn_in_days = static_cast<std::int32_t>(cfg.get_int("burn_in_days", c.burn_in_days));
  for (auto* p : {&c.mechanical, &c.electric}) {
    const std::string s = p == &c.mechanical ? "mechanical." : "electric.";
    p->bikes = static_cast<std::size_t>(cfg.get_int(s + "bikes", static_cast<long long>(p->bikes)));
    p->trips_per_day = cfg.get_double(s + "trips_per_day", p->trips_per_day);
    p->speed_kmh = cfg.get_double(s + "speed_kmh", p->speed_kmh);
    p->distance_scale_m = cfg.get_double(s + "distance_scale_m", p->distance_scale_m);
    p->uphill_preference = cfg.get_double(s + "uphill_preference", p->uphill_preference);
  }
  c.usage_cv = cfg.get_double("usage_cv", c.usage_cv);
  c.speed_cv = cfg.get_double("speed_cv", c.speed_cv);
  c.trip_speed_cv = cfg.get_double("trip_speed_cv", c.trip_speed_cv);
  c.outlier_fraction = cfg.get_double("outlier_fraction", c.outlier_fraction);
  c.upgrade_fraction = cfg.get_double("upgrade_fraction", c.upgrade_fraction);
  c.weekend_factor = cfg.get_double("weekend_factor", c.weekend_factor);
  c.season_amplitude = cfg.get_double("season_amplitude", c.season_amplitude);
  c.rain_factor = cfg.get_double("rain_factor", c.rain_factor);
  c.threads = static_cast<unsigned>(cfg.get_int("threads", c.threads));
  for (auto* prof : {&c.weekday_profile, &c.weekend_profile}) {
    const std::string key = prof == &c.weekday_profile ? "weekday_profile" : "weekend_profile";
    if (!cfg.contains(key)) continue;
    const auto values = cfg.get_doubles(key, {});
    if (values.size() != 24) throw UsageError(key + " needs 24 hourly weights");
    std::copy(values.begin(), values.end(), prof->begin());
  }
  for (auto& h : c.hazards) {
    const std::string s = "hazard." + h.component + ".";
    h.shape = cfg.get_double(s + "shape", h.shape);
    h.scale = cfg.get_double(s + "scale", h.scale);
    h.distance_coef = cfg.get_double(s + "distance_coef", h.distance_coef);
    h.speed_coef = cfg.get_double(s + "speed_coef", h.speed_coef);
    h.electric_coef = cfg.get_double(s + "electric_coef", h.electric_coef);
  }
  for (auto& o : c.operations) {
    o.rate_per_day = cfg.get_double("operation." + o.subcategory + ".rate_per_day", o.rate_per_day);
  }
  auto& w = c.weather;
  w.temp_mean = cfg.get_double("weather.temp_mean", w.temp_mean);
  w.temp_amplitude = cfg.get_double("weather.temp_amplitude", w.temp_amplitude);
  w.temp_noise = cfg.get_double("weather.temp_noise", w.temp_noise);
  w.rain_probability = cfg.get_double("weather.rain_probability", w.rain_probability);
  w.rain_mean_mm = cfg.get_double("weather.rain_mean_mm", w.rain_mean_mm);
  w.wind_mean_kmh = cfg.get_double("weather.wind_mean_kmh", w.wind_mean_kmh);
  w.pressure_mean = cfg.get_double("weather.pressure_mean", w.pressure_mean);
  w.pressure_noise = cfg.get_double("weather.pressure_noise", w.pressure_noise);
  c.validate();
  return c;
}

Bundle simulate_fleet(const SimConfig& config) {
  config.validate();
  const Geography geo = build_geography(config);
  Bundle bundle;
  bundle.weather = build_weather(config);
  bundle.stations = geo.stations;
  const std::size_t n = geo.stations.size();
  for (std::size_t o = 0; o < n; ++o) {
    for (std::size_t d = 0; d < n; ++d) {
      if (o != d) bundle.distances.push_back({geo.stations[o].station_id, geo.stations[d].station_id,
                                              geo.distance[o * n + d]});
    }
  }

  const std::size_t bikes = config.mechanical.bikes + config.electric.bikes;
  for (std::size_t i = 0; i < bikes; ++i) bundle.fleet.push_back(fmt::format("B{:04}", i + 1));
  const BikeSimulator simulator(config, geo, bundle.weather);
  std::vector<BikeOutput> outputs(bikes);
  const auto work = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t i = worker; i < bikes; i += stride) {
      const auto model = i < config.mechanical.bikes ? BikeModel::kMechanical : BikeModel::kElectric;
      outputs[i] = simulator.run(i, bundle.fleet[i], model);
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(config.threads, 1, bikes);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < bikes; ++i) {
    auto& out = outputs[i];
    std::move(out.trips.begin(), out.trips.end(), std::back_inserter(bundle.trips));
    std::move(out.maintenance.begin(), out.maintenance.end(), std::back_inserter(bundle.maintenance));
    std::move(out.truth.begin(), out.truth.end(), std::back_inserter(bundle.ground_truth));
    for (std::size_t h = 0; h < config.hazards.size(); ++h) {
      bundle.failures[config.hazards[h].component][bundle.fleet[i]] = out.failures[h];
    }
    out = {};
  }
  std::stable_sort(bundle.trips.begin(), bundle.trips.end(),
                   [](const ingest::Trip& a, const ingest::Trip& b) { return a.start_time < b.start_time; });
  for (std::size_t i = 0; i < bundle.trips.size(); ++i) bundle.trips[i].trip_id = fmt::format("T{:07}", i + 1);
  std::stable_sort(bundle.maintenance.begin(), bundle.maintenance.end(),
                   [](const ingest::MaintenanceOp& a, const ingest::MaintenanceOp& b) {
                     if (a.date != b.date) return a.date < b.date;
                     if (a.bike_id != b.bike_id) return a.bike_id < b.bike_id;
                     return a.subcategory < b.subcategory;
                   });
  for (std::size_t i = 0; i < bundle.maintenance.size(); ++i) {
    bundle.maintenance[i].mo_id = fmt::format("MO{:07}", i + 1);
  }
  return bundle;
}

void write_bundle(const Bundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
  const auto num = [](double v) { return csv::format_double(v); };

  {
    auto out = open_out(root / "stations.csv");
    out << ingest::kStationsHeader << '\n';
    for (const auto& s : bundle.stations) {
      out << s.station_id << ',' << num(s.lat) << ',' << num(s.lon) << ',' << num(s.altitude_m) << '\n';
    }
  }
  {
    auto out = open_out(root / "distances.csv");
    out << ingest::kDistancesHeader << '\n';
    for (const auto& d : bundle.distances) out << d.origin << ',' << d.dest << ',' << num(d.meters) << '\n';
  }
  {
    auto out = open_out(root / "weather.csv");
    out << ingest::kWeatherHeader << '\n';
    for (const auto& w : bundle.weather) {
      out << w.date.to_string() << ',' << num(w.temp_c) << ',' << num(w.precip_mm) << ',' << num(w.wind_dir_deg)
          << ',' << num(w.wind_speed_kmh) << ',' << num(w.pressure_hpa) << '\n';
    }
  }
  {
    auto out = open_out(root / "trips.csv");
    out << ingest::kTripsHeader << '\n';
    std::string line;
    for (const auto& t : bundle.trips) {
      line = fmt::format("{},{},{},{},{},{},{},{}\n", t.trip_id, t.bike_id, ingest::to_token(t.bike_model),
                         t.user_id, t.start_station, t.end_station, t.start_time.to_string(), t.end_time.to_string());
      out << line;
    }
  }
  {
    auto out = open_out(root / "maintenance.csv");
    out << ingest::kMaintenanceHeader << '\n';
    for (const auto& m : bundle.maintenance) {
      out << m.mo_id << ',' << m.date.to_string() << ',' << m.category << ',' << m.subcategory << ',' << m.bike_id
          << ',' << ingest::to_token(m.bike_model) << '\n';
    }
  }
  {
    auto out = open_out(root / "ground_truth.csv");
    out << "unit_id,bike_id,component,true_scale,true_shape,true_expected_days\n";
    for (const auto& g : bundle.ground_truth) {
      out << g.unit_id << ',' << g.bike_id << ',' << g.component << ',' << num(g.true_scale) << ','
          << num(g.true_shape) << ',' << num(g.true_expected_days) << '\n';
    }
  }
}

std::vector<GroundTruth> read_ground_truth(const std::string& path) {
  csv::LineReader reader(path);
  csv::expect_header(reader, "unit_id,bike_id,component,true_scale,true_shape,true_expected_days");
  std::vector<GroundTruth> out;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 6) throw DataError(fmt::format("{}:{}: expected 6 fields", path, reader.line_number()));
    GroundTruth g;
    g.unit_id = std::string(f[0]);
    g.bike_id = std::string(f[1]);
    g.component = std::string(f[2]);
    try {
      g.true_scale = csv::parse_double(f[3]);
      g.true_shape = csv::parse_double(f[4]);
      g.true_expected_days = csv::parse_double(f[5]);
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path, reader.line_number(), e.what()));
    }
    out.push_back(std::move(g));
  }
  return out;
}

OracleReport oracle_report(const std::vector<GroundTruth>& truth, const std::map<std::string, double>& predictions) {
  if (predictions.empty()) throw DataError("no predictions to compare");
  std::unordered_map<std::string_view, double> expected;
  for (const auto& g : truth) expected.emplace(g.unit_id, g.true_expected_days);
  std::vector<std::pair<double, double>> pairs;  // predicted, true
  for (const auto& [id, value] : predictions) {
    const auto it = expected.find(id);
    if (it == expected.end()) throw DataError("prediction for unknown unit " + id);
    pairs.emplace_back(value, it->second);
  }
  OracleReport r;
  r.n = pairs.size();
  double mean_true = 0.0;
  for (const auto& p : pairs) mean_true += p.second;
  mean_true /= static_cast<double>(r.n);
  double sse = 0.0;
  double sst = 0.0;
  for (const auto& [pred, actual] : pairs) {
    sse += (pred - actual) * (pred - actual);
    sst += (actual - mean_true) * (actual - mean_true);
  }
  r.rmse = std::sqrt(sse / static_cast<double>(r.n));
  r.constant_rmse = std::sqrt(sst / static_cast<double>(r.n));
  r.r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);

  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t b = 0; b < 10; ++b) {
    const std::size_t lo = b * r.n / 10;
    const std::size_t hi = (b + 1) * r.n / 10;
    if (hi == lo) continue;
    CalibrationBin bin;
    bin.count = hi - lo;
    for (std::size_t i = lo; i < hi; ++i) {
      bin.mean_predicted += pairs[i].first;
      bin.mean_true += pairs[i].second;
    }
    bin.mean_predicted /= static_cast<double>(bin.count);
    bin.mean_true /= static_cast<double>(bin.count);
    r.deciles.push_back(bin);
  }
  return r;
}

std::string oracle_json(const OracleReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.n;
  j["rmse"] = report.rmse;
  j["r2"] = report.r2;
  j["constant_rmse"] = report.constant_rmse;
  auto& bins = j["deciles"] = nlohmann::ordered_json::array();
  for (const auto& b : report.deciles) {
    bins.push_back({{"count", b.count}, {"mean_predicted", b.mean_predicted}, {"mean_true", b.mean_true}});
  }
  return j.dump(2);
}

}  // namespace fleetsurv::sim
