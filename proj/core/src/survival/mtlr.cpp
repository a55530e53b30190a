#include "fleetsurv/survival/mtlr.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fleetsurv/errors.hpp"

namespace fleetsurv::survival {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// scores(i, j) for j = 0..m (0-based; column m is the survive-beyond sequence).
RowMatrix sequence_scores(const MtlrModel& model, const Eigen::Ref<const Eigen::MatrixXd>& z) {
  const auto m = model.weights.rows();
  RowMatrix a = (z * model.weights.transpose()).rowwise() + model.bias.transpose();
  RowMatrix s(z.rows(), m + 1);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double acc = 0.0;
    s(i, m) = 0.0;
    for (Eigen::Index k = m - 1; k >= 0; --k) {
      acc += a(i, k);
      s(i, k) = acc;
    }
  }
  return s;
}

struct RowTargets {
  std::vector<Eigen::Index> first;  // first admissible sequence index
  std::vector<Eigen::Index> last;   // last admissible sequence index (inclusive)
};

RowTargets targets(const MtlrModel& model, const SurvivalDataset& data) {
  RowTargets t;
  const auto m = static_cast<Eigen::Index>(model.boundaries.size());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const double d = data.duration[static_cast<Eigen::Index>(i)];
    if (data.event[i]) {
      auto j = static_cast<Eigen::Index>(std::lower_bound(model.boundaries.begin(), model.boundaries.end(), d) -
                                         model.boundaries.begin());
      t.first.push_back(j);
      t.last.push_back(j);
    } else {
      auto j = static_cast<Eigen::Index>(std::upper_bound(model.boundaries.begin(), model.boundaries.end(), d) -
                                         model.boundaries.begin());
      t.first.push_back(j);
      t.last.push_back(m);
    }
  }
  return t;
}

Eigen::MatrixXd standardize(const MtlrModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  return (x.rowwise() - model.mean.transpose()).array().rowwise() / model.scale.transpose().array();
}

// Buffers reused across epochs; rows are processed in cache-sized blocks.
struct Workspace {
  static constexpr Eigen::Index kBlock = 128;
  RowMatrix s;
  RowMatrix p;
  RowMatrix g;
};

// Loss and (optionally) its gradient with respect to the weights and biases.
double evaluate(const MtlrModel& model, const Eigen::MatrixXd& z, const RowTargets& t, Eigen::MatrixXd* grad_w,
                Eigen::VectorXd* grad_b, Workspace& w) {
  const auto n = z.rows();
  const auto m = model.weights.rows();
  double nll = 0.0;
  if (grad_w) {
    grad_w->setZero(m, z.cols());
    grad_b->setZero(m);
  }
  for (Eigen::Index r0 = 0; r0 < n; r0 += Workspace::kBlock) {
    const auto rows = std::min(Workspace::kBlock, n - r0);
    const auto zb = z.middleRows(r0, rows);
    w.s.resize(rows, m + 1);
    // Column k < m first holds a_k, then the suffix sums s_k = sum_{j >= k} a_j.
    w.s.leftCols(m).noalias() = zb * model.weights.transpose();
    w.s.leftCols(m).rowwise() += model.bias.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      double* si = w.s.row(i).data();
      si[m] = 0.0;
      for (Eigen::Index k = m - 1; k >= 0; --k) si[k] += si[k + 1];
    }
    w.p.resize(rows, m + 1);
    for (Eigen::Index i = 0; i < rows; ++i) w.p.row(i) = w.s.row(i).array() - w.s.row(i).maxCoeff();
    Eigen::Map<Eigen::ArrayXd> flat(w.p.data(), w.p.size());
    flat = flat.exp();
    if (grad_w) w.g.resize(rows, m);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double* p = w.p.row(i).data();
      double all = 0.0;
      for (Eigen::Index j = 0; j <= m; ++j) all += p[j];
      double allowed = 0.0;
      const auto lo = t.first[static_cast<std::size_t>(r0 + i)];
      const auto hi = t.last[static_cast<std::size_t>(r0 + i)];
      for (Eigen::Index j = lo; j <= hi; ++j) allowed += p[j];
      nll -= std::log(allowed) - std::log(all);
      if (!grad_w) continue;
      // d nll / d a_k = sum_{j <= k} (p_j - q_j)
      double* g = w.g.row(i).data();
      const double inv_all = 1.0 / all;
      const double inv_allowed = 1.0 / allowed;
      const Eigen::Index mid = std::min(hi + 1, m);
      double cum = 0.0;
      for (Eigen::Index j = 0; j < lo; ++j) g[j] = cum += p[j] * inv_all;
      for (Eigen::Index j = lo; j < mid; ++j) g[j] = cum += p[j] * (inv_all - inv_allowed);
      for (Eigen::Index j = mid; j < m; ++j) g[j] = cum += p[j] * inv_all;
    }
    if (grad_w) {
      grad_w->noalias() += w.g.transpose() * zb;
      *grad_b += w.g.colwise().sum().transpose();
    }
  }
  return nll / static_cast<double>(n) + 0.5 * model.config.l2 * model.weights.squaredNorm();
}

}  // namespace

void MtlrModel::set_intervals(int m, double horizon) {
  boundaries.resize(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) boundaries[static_cast<std::size_t>(k)] = horizon * (k + 1) / m;
  time_grid = {0.0};
  time_grid.insert(time_grid.end(), boundaries.begin(), boundaries.end());
}

Eigen::MatrixXd MtlrModel::sequence_probabilities(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  check_dimension(x.cols());
  RowMatrix s = sequence_scores(*this, standardize(*this, x));
  Eigen::MatrixXd p(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double top = s.row(i).maxCoeff();
    p.row(i) = (s.row(i).array() - top).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

void MtlrModel::predict_curves(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::MatrixXd& out) const {
  const Eigen::MatrixXd p = sequence_probabilities(x);
  const auto m = weights.rows();
  out.resize(x.rows(), m + 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    // S(0) = 1; S(tau_k) = sum_{j > k} P(j). Accumulate from the tail.
    double acc = 0.0;
    for (Eigen::Index k = m; k >= 1; --k) {
      acc += p(i, k);
      out(i, k) = std::min(1.0, acc);
    }
    out(i, 0) = 1.0;
  }
}

double MtlrModel::loss(const SurvivalDataset& data) const {
  const Eigen::MatrixXd z = standardize(*this, data.x);
  Workspace w;
  return evaluate(*this, z, targets(*this, data), nullptr, nullptr, w);
}

MtlrModel fit_mtlr(const SurvivalDataset& data, const MtlrConfig& config, const TrainingMonitor* monitor) {
  data.validate();
  if (data.rows() == 0) throw DataError("MTLR needs at least one row");
  const double horizon = data.duration.maxCoeff();
  int m = config.intervals > 0 ? config.intervals : static_cast<int>(std::min(std::ceil(horizon), 300.0));
  if (m < 2) throw UsageError("MTLR needs at least 2 intervals");
  if (config.epochs < 0) throw UsageError("epochs must be non-negative");

  MtlrModel model;
  model.config = config;
  model.feature_names = data.feature_names;
  model.set_intervals(m, horizon);
  const auto d = data.x.cols();
  model.mean = data.x.colwise().mean();
  model.scale.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt((data.x.col(j).array() - model.mean[j]).square().sum() /
                                static_cast<double>(std::max<Eigen::Index>(1, data.x.rows() - 1)));
    model.scale[j] = sd > 0 ? sd : 1.0;
  }
  model.weights.resize(m, d);
  auto rng = make_rng(config.seed, 1);
  initialize(model.weights, config.init, rng);
  model.bias = Eigen::VectorXd::Zero(m);

  const Eigen::MatrixXd z = standardize(model, data.x);
  const auto t = targets(model, data);
  const auto n = static_cast<double>(data.rows());
  Optimizer opt(config.optimizer, config.learning_rate, m * d + m);
  Eigen::VectorXd params(m * d + m);
  Eigen::VectorXd grad(m * d + m);
  Eigen::MatrixXd grad_w;
  Eigen::VectorXd grad_b;
  Workspace work;
  std::size_t next_checkpoint = 0;

  for (int epoch = 0; epoch <= config.epochs; ++epoch) {
    const bool last = epoch == config.epochs;
    const double loss = evaluate(model, z, t, last ? nullptr : &grad_w, &grad_b, work);
    if (!std::isfinite(loss)) {
      throw NumericalError(fmt::format("MTLR loss became non-finite at epoch {}", epoch));
    }
    model.loss_trace.push_back(loss);
    if (monitor && next_checkpoint < monitor->checkpoints.size() && epoch == monitor->checkpoints[next_checkpoint]) {
      if (!monitor->on_checkpoint(next_checkpoint++, model)) break;
    }
    if (last) break;
    Eigen::Map<Eigen::MatrixXd> gw(grad.data(), m, d);
    gw = grad_w / n + config.l2 * model.weights;
    grad.tail(m) = grad_b / n;
    params.head(m * d) = Eigen::Map<const Eigen::VectorXd>(model.weights.data(), m * d);
    params.tail(m) = model.bias;
    opt.step(params, grad);
    model.weights = Eigen::Map<const Eigen::MatrixXd>(params.data(), m, d);
    model.bias = params.tail(m);
  }
  return model;
}

}  // namespace fleetsurv::survival
