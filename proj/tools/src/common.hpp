#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fleetsurv/dataset.hpp"
#include "fleetsurv/dates.hpp"

namespace fleetsurv::cli {

struct Context {
  std::ostream& out;
  std::ostream& err;
};

void add_simulate(CLI::App& app, Context& ctx);
void add_mobility(CLI::App& app, Context& ctx);
void add_build_units(CLI::App& app, Context& ctx);
void add_fit(CLI::App& app, Context& ctx);
void add_tune(CLI::App& app, Context& ctx);
void add_evaluate(CLI::App& app, Context& ctx);
void add_analyze(CLI::App& app, Context& ctx);
void add_explain(CLI::App& app, Context& ctx);

/// --config, --out, --seed and --threads as shared by the subcommands.
struct CommonOptions {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

void add_config_flag(CLI::App& sub, CommonOptions& o);
void add_seed_flag(CLI::App& sub, CommonOptions& o);
void add_threads_flag(CLI::App& sub, CommonOptions& o);

std::filesystem::path ensure_dir(const std::string& dir);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Input paths for a data bundle directory with per-file overrides.
struct BundlePaths {
  std::string data;
  std::string trips;
  std::string stations;
  std::string distances;
  std::string weather;
  std::string maintenance;

  [[nodiscard]] std::string resolve(const std::string& given, const std::string& file) const;
};

void add_bundle_flags(CLI::App& sub, BundlePaths& p, bool maintenance);

/// Optional --start/--end study window.
struct WindowOptions {
  std::string start;
  std::string end;
  [[nodiscard]] std::optional<DateWindow> window() const;
};

void add_window_flags(CLI::App& sub, WindowOptions& w);

/// unit_id,duration_days,event,predicted
struct PredictionTable {
  std::vector<std::string> ids;
  std::vector<double> duration;
  std::vector<std::uint8_t> event;
  std::vector<double> predicted;
};

void write_predictions(const std::filesystem::path& path, const PredictionTable& table);
PredictionTable read_predictions(const std::string& path);

/// First column of a one-header CSV as numbers.
std::vector<double> read_column(const std::string& path);

void print_warnings(Context& ctx, const std::vector<std::string>& warnings, std::size_t limit = 10);

}  // namespace fleetsurv::cli
