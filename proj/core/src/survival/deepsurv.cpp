#include "fleetsurv/survival/deepsurv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "fleetsurv/errors.hpp"
#include "fleetsurv/survival/cox.hpp"
#include "fleetsurv/survival/kaplan_meier.hpp"

namespace fleetsurv::survival {
namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

using Matrix = Eigen::MatrixXd;

struct LayerCache {
  Matrix input;   // n x in
  Matrix pre;     // after linear (and batch norm), before ReLU
  Matrix xhat;    // normalized linear output (batch norm only)
  Eigen::RowVectorXd inv_std;
  Matrix mask;    // dropout multipliers
};

struct Forward {
  std::vector<LayerCache> cache;
  Eigen::VectorXd eta;
};

Eigen::Map<const Matrix> weight(const DeepSurvModel& m, const DeepSurvModel::Layer& l) {
  return {m.params.data() + l.weight, l.out, l.in};
}

// training: batch statistics for batch norm; `rng` non-null enables dropout.
Forward forward(const DeepSurvModel& model, const Matrix& z, bool training, Rng* rng,
                std::vector<DeepSurvModel::Layer>* update_running) {
  Forward f;
  f.cache.resize(model.layers.size());
  Matrix a = z;
  const auto n = static_cast<double>(z.rows());
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const auto& l = model.layers[li];
    auto& c = f.cache[li];
    const bool output = li + 1 == model.layers.size();
    c.input = a;
    Matrix h = a * weight(model, l).transpose();
    h.rowwise() += model.params.segment(l.bias, l.out).transpose();
    if (l.batchnorm) {
      Eigen::RowVectorXd mu;
      Eigen::RowVectorXd var;
      if (training) {
        mu = h.colwise().mean();
        var = (h.rowwise() - mu).array().square().colwise().sum() / n;
        if (update_running) {
          auto& r = (*update_running)[li];
          const double unbiased = n > 1 ? n / (n - 1) : 1.0;
          r.running_mean = (1 - kBnMomentum) * r.running_mean + kBnMomentum * mu.transpose();
          r.running_var = (1 - kBnMomentum) * r.running_var + kBnMomentum * unbiased * var.transpose();
        }
      } else {
        mu = l.running_mean.transpose();
        var = l.running_var.transpose();
      }
      c.inv_std = (var.array() + kBnEps).rsqrt();
      c.xhat = (h.rowwise() - mu).array().rowwise() * c.inv_std.array();
      h = (c.xhat.array().rowwise() * model.params.segment(l.gamma, l.out).transpose().array()).matrix();
      h.rowwise() += model.params.segment(l.beta, l.out).transpose();
    }
    c.pre = h;
    if (output) {
      f.eta = h.col(0);
      break;
    }
    a = h.cwiseMax(0.0);
    if (rng && model.config.dropout) {
      const double keep = 1.0 - model.config.dropout_rate;
      c.mask.resize(a.rows(), a.cols());
      for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) c.mask(i, j) = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
      a = a.cwiseProduct(c.mask);
    }
  }
  return f;
}

void backward(const DeepSurvModel& model, const Forward& f, const Eigen::VectorXd& d_eta, Eigen::VectorXd& grad) {
  grad.setZero(model.params.size());
  Matrix d = d_eta;  // n x 1
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const auto& l = model.layers[li];
    const auto& c = f.cache[li];
    const bool output = li + 1 == model.layers.size();
    if (!output) {
      if (c.mask.size()) d = d.cwiseProduct(c.mask);
      d = d.cwiseProduct((c.pre.array() > 0.0).cast<double>().matrix());
    }
    if (l.batchnorm) {
      const auto n = static_cast<double>(d.rows());
      grad.segment(l.gamma, l.out) = (d.cwiseProduct(c.xhat)).colwise().sum().transpose();
      grad.segment(l.beta, l.out) = d.colwise().sum().transpose();
      const Matrix dxhat = d.array().rowwise() * model.params.segment(l.gamma, l.out).transpose().array();
      const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
      const Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(c.xhat).colwise().sum();
      Matrix dh = (n * dxhat).rowwise() - sum_d;
      dh -= (c.xhat.array().rowwise() * sum_dx.array()).matrix();
      d = (dh.array().rowwise() * (c.inv_std.array() / n)).matrix();
    }
    Eigen::Map<Matrix>(grad.data() + l.weight, l.out, l.in) = d.transpose() * c.input;
    grad.segment(l.bias, l.out) = d.colwise().sum().transpose();
    if (li > 0) d = d * weight(model, l);
  }
}

struct RiskSets {
  std::vector<std::size_t> order;  // descending duration
  double events = 0.0;
};

RiskSets risk_sets(const SurvivalDataset& data) {
  RiskSets r;
  r.order.resize(data.rows());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    return data.duration[static_cast<Eigen::Index>(a)] > data.duration[static_cast<Eigen::Index>(b)];
  });
  r.events = static_cast<double>(data.event_count());
  return r;
}

// Mean negative Breslow partial likelihood and its derivative in eta.
double partial_likelihood_loss(const SurvivalDataset& data, const RiskSets& rs, const Eigen::VectorXd& eta,
                               Eigen::VectorXd* d_eta) {
  const std::size_t n = rs.order.size();
  const double shift = eta.maxCoeff();
  double s0 = 0.0;
  double ll = 0.0;
  // Groups of tied durations in descending order; cumulative d_g / RS_g is
  // then accumulated in ascending order for the gradient.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  std::vector<double> ratio;
  for (std::size_t i = 0; i < n;) {
    const double t = data.duration[static_cast<Eigen::Index>(rs.order[i])];
    std::size_t j = i;
    double deaths = 0.0;
    double eta_sum = 0.0;
    for (; j < n && data.duration[static_cast<Eigen::Index>(rs.order[j])] == t; ++j) {
      const auto r = static_cast<Eigen::Index>(rs.order[j]);
      s0 += std::exp(eta[r] - shift);
      if (data.event[rs.order[j]]) {
        deaths += 1.0;
        eta_sum += eta[r];
      }
    }
    if (deaths > 0) ll += eta_sum - deaths * (std::log(s0) + shift);
    groups.emplace_back(i, j);
    ratio.push_back(deaths / s0);
    i = j;
  }
  if (d_eta) {
    d_eta->resize(static_cast<Eigen::Index>(n));
    double acc = 0.0;
    for (std::size_t g = groups.size(); g-- > 0;) {
      acc += ratio[g];
      for (std::size_t k = groups[g].first; k < groups[g].second; ++k) {
        const auto r = static_cast<Eigen::Index>(rs.order[k]);
        const double e = data.event[rs.order[k]] ? 1.0 : 0.0;
        (*d_eta)[r] = -(e - std::exp(eta[r] - shift) * acc) / rs.events;
      }
    }
  }
  return -ll / rs.events;
}

Matrix standardize(const DeepSurvModel& m, const Eigen::Ref<const Matrix>& x) {
  return (x.rowwise() - m.mean.transpose()).array().rowwise() / m.scale.transpose().array();
}

double l2_term(const DeepSurvModel& m, Eigen::VectorXd* grad) {
  double sum = 0.0;
  for (const auto& l : m.layers) {
    const auto w = m.params.segment(l.weight, static_cast<Eigen::Index>(l.in) * l.out);
    sum += w.squaredNorm();
    if (grad) grad->segment(l.weight, w.size()) += m.config.l2 * w;
  }
  return 0.5 * m.config.l2 * sum;
}

}  // namespace

void DeepSurvModel::build(int d, Rng& rng) {
  layers.clear();
  Eigen::Index offset = 0;
  int in = d;
  std::vector<int> sizes = config.hidden;
  sizes.push_back(1);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    Layer l;
    l.in = in;
    l.out = sizes[i];
    l.weight = offset;
    offset += static_cast<Eigen::Index>(l.in) * l.out;
    l.bias = offset;
    offset += l.out;
    l.batchnorm = config.batchnorm && i + 1 < sizes.size();
    if (l.batchnorm) {
      l.gamma = offset;
      offset += l.out;
      l.beta = offset;
      offset += l.out;
      l.running_mean = Eigen::VectorXd::Zero(l.out);
      l.running_var = Eigen::VectorXd::Ones(l.out);
    }
    layers.push_back(l);
    in = l.out;
  }
  params = Eigen::VectorXd::Zero(offset);
  for (const auto& l : layers) {
    Eigen::Map<Matrix> w(params.data() + l.weight, l.out, l.in);
    Matrix tmp(l.out, l.in);
    initialize(tmp, config.init, rng);
    w = tmp;
    if (l.batchnorm) params.segment(l.gamma, l.out).setOnes();
  }
}

Eigen::VectorXd DeepSurvModel::risk(const Eigen::Ref<const Matrix>& x) const {
  check_dimension(x.cols());
  return forward(*this, standardize(*this, x), false, nullptr, nullptr).eta;
}

void DeepSurvModel::fit_baseline(const SurvivalDataset& data) {
  time_grid = survival::time_grid(std::span<const double>(data.duration.data(), data.rows()));
  const Eigen::VectorXd eta = risk(data.x);
  cumulative_hazard = breslow_baseline(std::span<const double>(data.duration.data(), data.rows()), data.event,
                                       std::span<const double>(eta.data(), data.rows()), time_grid);
}

void DeepSurvModel::predict_curves(const Eigen::Ref<const Matrix>& x, Matrix& out) const {
  const Eigen::VectorXd r = risk(x).array().exp();
  const Eigen::Map<const Eigen::RowVectorXd> h(cumulative_hazard.data(), static_cast<Eigen::Index>(cumulative_hazard.size()));
  out = (-(r * h)).array().exp();
}

double deepsurv_objective(const DeepSurvModel& model, const SurvivalDataset& data, Eigen::VectorXd* gradient) {
  const auto rs = risk_sets(data);
  if (rs.events == 0) throw DataError("DeepSurv needs at least one event");
  const Matrix z = standardize(model, data.x);
  const auto f = forward(model, z, true, nullptr, nullptr);
  Eigen::VectorXd d_eta;
  double loss = partial_likelihood_loss(data, rs, f.eta, gradient ? &d_eta : nullptr);
  if (gradient) backward(model, f, d_eta, *gradient);
  return loss + l2_term(model, gradient);
}

DeepSurvModel fit_deepsurv(const SurvivalDataset& data, const DeepSurvConfig& config, const TrainingMonitor* monitor) {
  data.validate();
  if (data.event_count() < 1) throw DataError("DeepSurv needs at least one event");
  if (config.epochs < 0) throw UsageError("epochs must be non-negative");
  if (config.dropout && !(config.dropout_rate > 0.0 && config.dropout_rate < 1.0)) {
    throw UsageError("dropout rate must lie in (0, 1)");
  }
  for (int h : config.hidden) {
    if (h < 1) throw UsageError("hidden layer sizes must be positive");
  }
  DeepSurvModel model;
  model.config = config;
  model.feature_names = data.feature_names;
  const auto d = data.x.cols();
  model.mean = data.x.colwise().mean();
  model.scale.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt((data.x.col(j).array() - model.mean[j]).square().sum() /
                                static_cast<double>(std::max<Eigen::Index>(1, data.x.rows() - 1)));
    model.scale[j] = sd > 0 ? sd : 1.0;
  }
  auto init_rng = make_rng(config.seed, 1);
  model.build(static_cast<int>(d), init_rng);
  auto dropout_rng = make_rng(config.seed, 2);

  const Matrix z = standardize(model, data.x);
  const auto rs = risk_sets(data);
  Optimizer opt(config.optimizer, config.learning_rate, model.params.size());
  Eigen::VectorXd grad;
  Eigen::VectorXd d_eta;
  std::size_t next_checkpoint = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto f = forward(model, z, true, config.dropout ? &dropout_rng : nullptr, &model.layers);
    const double loss = partial_likelihood_loss(data, rs, f.eta, &d_eta) + l2_term(model, nullptr);
    if (!std::isfinite(loss)) throw NumericalError(fmt::format("DeepSurv loss became non-finite at epoch {}", epoch));
    backward(model, f, d_eta, grad);
    l2_term(model, &grad);
    if (!grad.allFinite()) throw NumericalError(fmt::format("DeepSurv gradient is NaN at epoch {}", epoch));
    model.loss_trace.push_back(loss);
    opt.step(model.params, grad);
    if (monitor && next_checkpoint < monitor->checkpoints.size() && epoch + 1 == monitor->checkpoints[next_checkpoint]) {
      DeepSurvModel snapshot = model;
      snapshot.fit_baseline(data);
      if (!monitor->on_checkpoint(next_checkpoint++, snapshot)) break;
    }
  }
  if (!model.params.allFinite()) throw NumericalError("DeepSurv parameters are not finite");
  model.fit_baseline(data);
  return model;
}

}  // namespace fleetsurv::survival
