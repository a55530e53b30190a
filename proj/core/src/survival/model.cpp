#include "fleetsurv/survival/model.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

#include "fleetsurv/errors.hpp"

namespace fleetsurv::survival {
namespace {

using Json = nlohmann::ordered_json;

template <class... F>
struct Overloaded : F... {
  using F::operator()...;
};
template <class... F>
Overloaded(F...) -> Overloaded<F...>;

Json to_json(const ModelConfig& config) {
  return std::visit(
      Overloaded{
          [](const CoxConfig& c) {
            return Json{{"baseline", to_string(c.baseline)},
                        {"max_iter", c.max_iter},
                        {"tol", c.tol},
                        {"ridge", c.ridge},
                        {"piecewise_intervals", c.piecewise_intervals}};
          },
          [](const MtlrConfig& c) {
            return Json{{"intervals", c.intervals},       {"learning_rate", c.learning_rate},
                        {"epochs", c.epochs},             {"l2", c.l2},
                        {"init", to_string(c.init)},      {"optimizer", to_string(c.optimizer)},
                        {"seed", c.seed}};
          },
          [](const ForestConfig& c) {
            return Json{{"num_trees", c.num_trees}, {"max_depth", c.max_depth}, {"min_node_size", c.min_node_size},
                        {"bootstrap", c.bootstrap}, {"mtry", c.mtry},           {"thresholds", c.thresholds},
                        {"seed", c.seed}};
          },
          [](const DeepSurvConfig& c) {
            return Json{{"hidden", c.hidden},
                        {"learning_rate", c.learning_rate},
                        {"epochs", c.epochs},
                        {"l2", c.l2},
                        {"batchnorm", c.batchnorm},
                        {"dropout", c.dropout},
                        {"dropout_rate", c.dropout_rate},
                        {"init", to_string(c.init)},
                        {"optimizer", to_string(c.optimizer)},
                        {"seed", c.seed}};
          },
      },
      config);
}

CoxConfig cox_config(const Json& j) {
  CoxConfig c;
  c.baseline = parse_cox_baseline(j.at("baseline").get<std::string>());
  c.max_iter = j.at("max_iter").get<int>();
  c.tol = j.at("tol").get<double>();
  c.ridge = j.at("ridge").get<double>();
  c.piecewise_intervals = j.at("piecewise_intervals").get<int>();
  return c;
}

MtlrConfig mtlr_config(const Json& j) {
  MtlrConfig c;
  c.intervals = j.at("intervals").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.l2 = j.at("l2").get<double>();
  c.init = parse_init(j.at("init").get<std::string>());
  c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

ForestConfig forest_config(const Json& j) {
  ForestConfig c;
  c.num_trees = j.at("num_trees").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.min_node_size = j.at("min_node_size").get<int>();
  c.bootstrap = j.at("bootstrap").get<bool>();
  c.mtry = j.at("mtry").get<int>();
  c.thresholds = j.at("thresholds").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

DeepSurvConfig deepsurv_config(const Json& j) {
  DeepSurvConfig c;
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.l2 = j.at("l2").get<double>();
  c.batchnorm = j.at("batchnorm").get<bool>();
  c.dropout = j.at("dropout").get<bool>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.init = parse_init(j.at("init").get<std::string>());
  c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Row-major nested arrays.
Json mat(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows.back()[static_cast<std::size_t>(j)] = m(i, j);
  }
  return rows;
}

Eigen::MatrixXd mat(const Json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("model matrix has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::kCph: return "cph";
    case Family::kMtlr: return "mtlr";
    case Family::kCsf: return "csf";
    case Family::kDeepSurv: return "deepsurv";
  }
  return "?";
}

Family parse_family(const std::string& token) {
  if (token == "cph" || token == "cox") return Family::kCph;
  if (token == "mtlr") return Family::kMtlr;
  if (token == "csf" || token == "forest") return Family::kCsf;
  if (token == "deepsurv") return Family::kDeepSurv;
  throw UsageError("unknown model '" + token + "' (cph|mtlr|csf|deepsurv)");
}

Family family_of(const ModelConfig& config) { return static_cast<Family>(config.index()); }

ModelConfig default_config(Family family) {
  switch (family) {
    case Family::kCph: return CoxConfig{};
    case Family::kMtlr: return MtlrConfig{};
    case Family::kCsf: return ForestConfig{};
    case Family::kDeepSurv: return DeepSurvConfig{};
  }
  return CoxConfig{};
}

void set_seed(ModelConfig& config, std::uint64_t seed) {
  std::visit(Overloaded{[](CoxConfig&) {}, [&](auto& c) { c.seed = seed; }}, config);
}

int epochs_of(const ModelConfig& config) {
  if (const auto* m = std::get_if<MtlrConfig>(&config)) return m->epochs;
  if (const auto* d = std::get_if<DeepSurvConfig>(&config)) return d->epochs;
  return 0;
}

std::unique_ptr<SurvivalModel> fit_model(const ModelConfig& config, const SurvivalDataset& data,
                                         const TrainingMonitor* monitor) {
  return std::visit(Overloaded{
                        [&](const CoxConfig& c) -> std::unique_ptr<SurvivalModel> {
                          return std::make_unique<CoxModel>(fit_cox(data, c));
                        },
                        [&](const MtlrConfig& c) -> std::unique_ptr<SurvivalModel> {
                          return std::make_unique<MtlrModel>(fit_mtlr(data, c, monitor));
                        },
                        [&](const ForestConfig& c) -> std::unique_ptr<SurvivalModel> {
                          return std::make_unique<SurvivalForest>(fit_csf(data, c));
                        },
                        [&](const DeepSurvConfig& c) -> std::unique_ptr<SurvivalModel> {
                          return std::make_unique<DeepSurvModel>(fit_deepsurv(data, c, monitor));
                        },
                    },
                    config);
}

Eigen::VectorXd predict_points(const SurvivalModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x, PointRule rule,
                               std::vector<std::uint8_t>* undefined) {
  constexpr Eigen::Index kChunk = 2048;
  Eigen::VectorXd out(x.rows());
  if (undefined) undefined->assign(static_cast<std::size_t>(x.rows()), 0);
  const auto& grid = model.grid();
  Eigen::MatrixXd curves;
  std::vector<double> row(grid.size());
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const auto len = std::min(kChunk, x.rows() - start);
    model.predict_curves(x.middleRows(start, len), curves);
    for (Eigen::Index i = 0; i < len; ++i) {
      for (std::size_t g = 0; g < grid.size(); ++g) row[g] = curves(i, static_cast<Eigen::Index>(g));
      const auto p = point_predict(grid, row, rule);
      out[start + i] = p.days;
      if (undefined && p.undefined_median) (*undefined)[static_cast<std::size_t>(start + i)] = 1;
    }
  }
  return out;
}

std::string config_json(const ModelConfig& config) { return to_json(config).dump(); }

std::string serialize_model(const SurvivalModel& model) {
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["family"] = model.family();
  j["feature_names"] = model.feature_names;
  j["time_grid"] = model.grid();
  Json p;
  if (const auto* m = dynamic_cast<const CoxModel*>(&model)) {
    j["config"] = to_json(m->config);
    p["beta"] = vec(m->beta);
    p["means"] = vec(m->means);
    p["cumulative_hazard"] = m->cumulative_hazard;
    p["breakpoints"] = m->breakpoints;
    p["rates"] = m->rates;
  } else if (const auto* m = dynamic_cast<const MtlrModel*>(&model)) {
    j["config"] = to_json(m->config);
    p["mean"] = vec(m->mean);
    p["scale"] = vec(m->scale);
    p["boundaries"] = m->boundaries;
    p["weights"] = mat(m->weights);
    p["bias"] = vec(m->bias);
  } else if (const auto* m = dynamic_cast<const SurvivalForest*>(&model)) {
    j["config"] = to_json(m->config);
    p["feature_count"] = m->feature_count;
    Json trees = Json::array();
    for (const auto& t : m->trees) {
      Json nodes = Json::array();
      for (const auto& n : t.nodes) {
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf, n.size});
      }
      trees.push_back({{"nodes", nodes}, {"leaves", mat(t.leaves)}});
    }
    p["trees"] = trees;
  } else if (const auto* m = dynamic_cast<const DeepSurvModel*>(&model)) {
    j["config"] = to_json(m->config);
    p["mean"] = vec(m->mean);
    p["scale"] = vec(m->scale);
    p["params"] = vec(m->params);
    Json running = Json::array();
    for (const auto& l : m->layers) {
      running.push_back(l.batchnorm ? Json{{"mean", vec(l.running_mean)}, {"var", vec(l.running_var)}} : Json());
    }
    p["batchnorm_running"] = running;
    p["cumulative_hazard"] = m->cumulative_hazard;
  } else {
    throw UsageError("cannot serialize model family " + std::string(model.family()));
  }
  j["parameters"] = p;
  return j.dump();
}

std::unique_ptr<SurvivalModel> deserialize_model(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.contains("format_version") || j["format_version"] != kModelFormatVersion) {
      throw DataError(fmt::format("unsupported model format version {} (expected {})",
                                  j.contains("format_version") ? j["format_version"].dump() : "missing",
                                  kModelFormatVersion));
    }
    const auto family = parse_family(j.at("family").get<std::string>());
    const auto names = j.at("feature_names").get<std::vector<std::string>>();
    const auto grid = j.at("time_grid").get<std::vector<double>>();
    const auto& p = j.at("parameters");
    const auto d = static_cast<Eigen::Index>(names.size());
    std::unique_ptr<SurvivalModel> out;
    switch (family) {
      case Family::kCph: {
        auto m = std::make_unique<CoxModel>();
        m->config = cox_config(j.at("config"));
        m->beta = vec(p.at("beta"));
        m->means = vec(p.at("means"));
        m->cumulative_hazard = p.at("cumulative_hazard").get<std::vector<double>>();
        m->breakpoints = p.at("breakpoints").get<std::vector<double>>();
        m->rates = p.at("rates").get<std::vector<double>>();
        m->time_grid = grid;
        if (m->beta.size() != d || m->cumulative_hazard.size() != grid.size()) throw DataError("inconsistent Cox model");
        out = std::move(m);
        break;
      }
      case Family::kMtlr: {
        auto m = std::make_unique<MtlrModel>();
        m->config = mtlr_config(j.at("config"));
        m->mean = vec(p.at("mean"));
        m->scale = vec(p.at("scale"));
        m->boundaries = p.at("boundaries").get<std::vector<double>>();
        m->weights = mat(p.at("weights"), d);
        m->bias = vec(p.at("bias"));
        m->time_grid = grid;
        if (m->weights.rows() != static_cast<Eigen::Index>(m->boundaries.size()) || m->bias.size() != m->weights.rows() ||
            grid.size() != m->boundaries.size() + 1) {
          throw DataError("inconsistent MTLR model");
        }
        out = std::move(m);
        break;
      }
      case Family::kCsf: {
        auto m = std::make_unique<SurvivalForest>();
        m->config = forest_config(j.at("config"));
        m->feature_count = p.at("feature_count").get<std::size_t>();
        m->time_grid = grid;
        for (const auto& t : p.at("trees")) {
          SurvivalForest::Tree tree;
          for (const auto& n : t.at("nodes")) {
            SurvivalForest::Node node;
            node.feature = n.at(0).get<int>();
            node.threshold = n.at(1).get<double>();
            node.left = n.at(2).get<int>();
            node.right = n.at(3).get<int>();
            node.leaf = n.at(4).get<int>();
            node.size = n.at(5).get<std::size_t>();
            tree.nodes.push_back(node);
          }
          tree.leaves = mat(t.at("leaves"), static_cast<Eigen::Index>(grid.size()));
          m->trees.push_back(std::move(tree));
        }
        out = std::move(m);
        break;
      }
      case Family::kDeepSurv: {
        auto m = std::make_unique<DeepSurvModel>();
        m->config = deepsurv_config(j.at("config"));
        m->mean = vec(p.at("mean"));
        m->scale = vec(p.at("scale"));
        Rng unused(0);
        auto cfg = m->config;
        cfg.init = InitScheme::kZeros;
        std::swap(m->config, cfg);
        m->build(static_cast<int>(d), unused);
        std::swap(m->config, cfg);
        const auto params = vec(p.at("params"));
        if (params.size() != m->params.size()) throw DataError("inconsistent DeepSurv parameter count");
        m->params = params;
        const auto& running = p.at("batchnorm_running");
        for (std::size_t i = 0; i < m->layers.size(); ++i) {
          if (m->layers[i].batchnorm) {
            m->layers[i].running_mean = vec(running.at(i).at("mean"));
            m->layers[i].running_var = vec(running.at(i).at("var"));
          }
        }
        m->cumulative_hazard = p.at("cumulative_hazard").get<std::vector<double>>();
        m->time_grid = grid;
        out = std::move(m);
        break;
      }
    }
    out->feature_names = names;
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const SurvivalModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << serialize_model(model) << '\n';
}

std::unique_ptr<SurvivalModel> load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

SurvivalCurve SurvivalModel::predict_curve(std::span<const double> x) const {
  Eigen::MatrixXd row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::MatrixXd out;
  predict_curves(row, out);
  SurvivalCurve c;
  c.grid = grid();
  c.values.assign(out.data(), out.data() + out.size());
  return c;
}

void SurvivalModel::check_dimension(Eigen::Index cols) const {
  if (static_cast<std::size_t>(cols) != features()) {
    throw UsageError(fmt::format("expected {} features, got {}", features(), cols));
  }
}

}  // namespace fleetsurv::survival
