#include "fleetsurv/dataset.hpp"

#include <cmath>
#include <fstream>

#include "fleetsurv/csv.hpp"
#include "fleetsurv/errors.hpp"

namespace fleetsurv {

std::size_t SurvivalDataset::event_count() const {
  std::size_t n = 0;
  for (auto e : event) n += e != 0;
  return n;
}

double SurvivalDataset::event_rate() const {
  return rows() == 0 ? 0.0 : static_cast<double>(event_count()) / static_cast<double>(rows());
}

SurvivalDataset SurvivalDataset::subset(std::span<const std::size_t> idx) const {
  SurvivalDataset out;
  out.feature_names = feature_names;
  const auto n = static_cast<Eigen::Index>(idx.size());
  out.x.resize(n, x.cols());
  out.duration.resize(n);
  out.event.resize(idx.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto src = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]);
    out.x.row(r) = x.row(src);
    out.duration[r] = duration[src];
    out.event[static_cast<std::size_t>(r)] = event[static_cast<std::size_t>(src)];
    if (!row_ids.empty()) out.row_ids.push_back(row_ids[static_cast<std::size_t>(src)]);
  }
  return out;
}

void SurvivalDataset::validate() const {
  if (static_cast<std::size_t>(x.rows()) != rows() || event.size() != rows()) {
    throw DataError("dataset row count mismatch");
  }
  if (static_cast<std::size_t>(x.cols()) != feature_names.size()) {
    throw DataError("dataset has " + std::to_string(x.cols()) + " columns but " +
                    std::to_string(feature_names.size()) + " feature names");
  }
  if (!row_ids.empty() && row_ids.size() != rows()) throw DataError("row id count mismatch");
  if (!x.allFinite()) throw DataError("dataset contains non-finite covariates");
  for (Eigen::Index i = 0; i < duration.size(); ++i) {
    if (!std::isfinite(duration[i]) || duration[i] < 0) {
      throw DataError("row " + std::to_string(i) + ": invalid duration");
    }
  }
}

SurvivalDataset concat(const SurvivalDataset& a, const SurvivalDataset& b) {
  if (a.feature_names != b.feature_names) throw DataError("cannot concatenate datasets with different features");
  SurvivalDataset out;
  out.feature_names = a.feature_names;
  out.x.resize(a.x.rows() + b.x.rows(), a.x.cols());
  out.x << a.x, b.x;
  out.duration.resize(a.duration.size() + b.duration.size());
  out.duration << a.duration, b.duration;
  out.event = a.event;
  out.event.insert(out.event.end(), b.event.begin(), b.event.end());
  if (!a.row_ids.empty() && !b.row_ids.empty()) {
    out.row_ids = a.row_ids;
    out.row_ids.insert(out.row_ids.end(), b.row_ids.begin(), b.row_ids.end());
  }
  return out;
}

void write_survival_csv(const std::string& path, const SurvivalDataset& data, bool with_ids) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  with_ids = with_ids && !data.row_ids.empty();
  if (with_ids) out << "unit_id,";
  out << "duration_days,event";
  for (const auto& f : data.feature_names) out << ',' << f;
  out << '\n';
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    if (with_ids) out << data.row_ids[static_cast<std::size_t>(i)] << ',';
    out << csv::format_double(data.duration[i]) << ',' << int(data.event[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) out << ',' << csv::format_double(data.x(i, j));
    out << '\n';
  }
}

SurvivalDataset read_survival_csv(const std::string& path) {
  csv::LineReader reader(path);
  std::string line;
  if (!reader.next(line)) throw DataError(path + ":1: malformed header");
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  auto header = csv::split(line);
  std::size_t offset = 0;
  if (!header.empty() && header[0] == "unit_id") offset = 1;
  if (header.size() < offset + 2 || header[offset] != "duration_days" || header[offset + 1] != "event") {
    throw DataError(path + ":1: malformed header");
  }
  SurvivalDataset data;
  for (std::size_t i = offset + 2; i < header.size(); ++i) data.feature_names.emplace_back(header[i]);
  const std::size_t width = header.size();
  std::vector<double> values;
  std::vector<double> durations;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    const std::string where = path + ":" + std::to_string(reader.line_number()) + ": ";
    if (fields.size() != width) throw DataError(where + "expected " + std::to_string(width) + " fields");
    try {
      if (offset) data.row_ids.emplace_back(fields[0]);
      durations.push_back(csv::parse_double(fields[offset]));
      const auto e = csv::parse_int(fields[offset + 1]);
      if (e != 0 && e != 1) throw DataError("event must be 0 or 1");
      data.event.push_back(static_cast<std::uint8_t>(e));
      for (std::size_t j = offset + 2; j < width; ++j) values.push_back(csv::parse_double(fields[j]));
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  const auto n = static_cast<Eigen::Index>(durations.size());
  const auto d = static_cast<Eigen::Index>(data.feature_names.size());
  data.duration = Eigen::Map<Eigen::VectorXd>(durations.data(), n);
  data.x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), n, d);
  data.validate();
  return data;
}

}  // namespace fleetsurv
