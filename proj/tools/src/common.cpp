#include "common.hpp"

#include <fmt/format.h>

#include <fstream>

#include "fleetsurv/csv.hpp"
#include "fleetsurv/errors.hpp"

namespace fleetsurv::cli {

void add_config_flag(CLI::App& sub, CommonOptions& o) {
  sub.add_option("--config", o.config, "key = value file; keys fill flags not given on the command line");
}

void add_seed_flag(CLI::App& sub, CommonOptions& o) {
  sub.add_option("--seed", o.seed, "master seed for every random draw")->required();
}

void add_threads_flag(CLI::App& sub, CommonOptions& o) {
  sub.add_option("--threads", o.threads, "worker threads; outputs do not depend on it")
      ->default_val(1)
      ->check(CLI::Range(1u, 256u));
}

std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

std::string BundlePaths::resolve(const std::string& given, const std::string& file) const {
  if (!given.empty()) return given;
  if (data.empty()) throw UsageError(fmt::format("--data or an explicit path to {} is required", file));
  return (std::filesystem::path(data) / file).string();
}

void add_bundle_flags(CLI::App& sub, BundlePaths& p, bool maintenance) {
  sub.add_option("--data", p.data, "directory holding the input CSV files");
  sub.add_option("--trips", p.trips, "trips.csv (default <data>/trips.csv)");
  sub.add_option("--stations", p.stations, "stations.csv");
  sub.add_option("--distances", p.distances, "distances.csv");
  sub.add_option("--weather", p.weather, "weather.csv");
  if (maintenance) sub.add_option("--maintenance", p.maintenance, "maintenance.csv");
}

std::optional<DateWindow> WindowOptions::window() const {
  if (start.empty() && end.empty()) return std::nullopt;
  if (start.empty() || end.empty()) throw UsageError("--start and --end must be given together");
  DateWindow w{Date::parse(start), Date::parse(end)};
  if (w.length() <= 0) throw UsageError("--end must be after --start");
  return w;
}

void add_window_flags(CLI::App& sub, WindowOptions& w) {
  sub.add_option("--start", w.start, "study window start, inclusive (YYYY-MM-DD)");
  sub.add_option("--end", w.end, "study window end, exclusive (YYYY-MM-DD)");
}

void write_predictions(const std::filesystem::path& path, const PredictionTable& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "unit_id,duration_days,event,predicted\n";
  for (std::size_t i = 0; i < t.predicted.size(); ++i) {
    out << (i < t.ids.size() ? t.ids[i] : std::to_string(i)) << ',' << csv::format_double(t.duration[i]) << ','
        << int(t.event[i]) << ',' << csv::format_double(t.predicted[i]) << '\n';
  }
}

PredictionTable read_predictions(const std::string& path) {
  csv::LineReader reader(path);
  csv::expect_header(reader, "unit_id,duration_days,event,predicted");
  PredictionTable t;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    try {
      if (f.size() != 4) throw DataError("expected 4 fields");
      const auto event = csv::parse_int(f[2]);
      if (event != 0 && event != 1) throw DataError("event must be 0 or 1");
      t.ids.emplace_back(f[0]);
      t.duration.push_back(csv::parse_double(f[1]));
      t.event.push_back(static_cast<std::uint8_t>(event));
      t.predicted.push_back(csv::parse_double(f[3]));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path, reader.line_number(), e.what()));
    }
  }
  return t;
}

std::vector<double> read_column(const std::string& path) {
  csv::LineReader reader(path);
  std::string line;
  if (!reader.next(line)) throw DataError(path + ": missing header");
  std::vector<double> out;
  while (reader.next(line)) {
    if (line.empty()) continue;
    try {
      out.push_back(csv::parse_double(csv::split(line).front()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path, reader.line_number(), e.what()));
    }
  }
  return out;
}

void print_warnings(Context& ctx, const std::vector<std::string>& warnings, std::size_t limit) {
  for (std::size_t i = 0; i < warnings.size() && i < limit; ++i) ctx.err << "warning: " << warnings[i] << '\n';
  if (warnings.size() > limit) ctx.err << fmt::format("warning: {} more not shown\n", warnings.size() - limit);
}

}  // namespace fleetsurv::cli
