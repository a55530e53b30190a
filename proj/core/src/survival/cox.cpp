#include "fleetsurv/survival/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "fleetsurv/errors.hpp"
#include "fleetsurv/stats.hpp"
#include "fleetsurv/survival/kaplan_meier.hpp"

namespace fleetsurv::survival {
namespace {

std::vector<std::size_t> descending_order(const Eigen::VectorXd& durations) {
  std::vector<std::size_t> order(static_cast<std::size_t>(durations.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return durations[static_cast<Eigen::Index>(a)] > durations[static_cast<Eigen::Index>(b)];
  });
  return order;
}

struct Derivatives {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// Breslow log partial likelihood of z * b with optional derivatives; rows
// visited in descending duration so risk sets accumulate.
Derivatives partial_likelihood(const Eigen::MatrixXd& z, const Eigen::VectorXd& durations,
                               std::span<const std::uint8_t> events, const std::vector<std::size_t>& order,
                               const Eigen::VectorXd& b, bool derivatives) {
  const auto d = z.cols();
  const Eigen::VectorXd eta = z * b;
  const double shift = eta.size() ? eta.maxCoeff() : 0.0;
  Derivatives out;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd s2;
  if (derivatives) {
    out.gradient = Eigen::VectorXd::Zero(d);
    out.hessian = Eigen::MatrixXd::Zero(d, d);
    s2 = Eigen::MatrixXd::Zero(d, d);
  }
  double s0 = 0.0;
  std::size_t i = 0;
  const std::size_t n = order.size();
  while (i < n) {
    const double t = durations[static_cast<Eigen::Index>(order[i])];
    std::size_t j = i;
    double deaths = 0.0;
    Eigen::VectorXd xsum = Eigen::VectorXd::Zero(d);
    double eta_sum = 0.0;
    for (; j < n && durations[static_cast<Eigen::Index>(order[j])] == t; ++j) {
      const auto r = static_cast<Eigen::Index>(order[j]);
      const double w = std::exp(eta[r] - shift);
      s0 += w;
      if (derivatives) {
        s1.noalias() += w * z.row(r).transpose();
        s2.noalias() += w * z.row(r).transpose() * z.row(r);
      }
      if (events[order[j]]) {
        deaths += 1.0;
        eta_sum += eta[r];
        if (derivatives) xsum += z.row(r).transpose();
      }
    }
    if (deaths > 0) {
      out.loglik += eta_sum - deaths * (std::log(s0) + shift);
      if (derivatives) {
        const Eigen::VectorXd mean = s1 / s0;
        out.gradient += xsum - deaths * mean;
        out.hessian -= deaths * (s2 / s0 - mean * mean.transpose());
      }
    }
    i = j;
  }
  return out;
}

std::vector<double> piecewise_baseline(const Eigen::VectorXd& durations, std::span<const std::uint8_t> events,
                                       const Eigen::VectorXd& eta, int intervals, std::vector<double>& breakpoints,
                                       std::vector<double>& rates, std::span<const double> grid) {
  std::vector<double> event_times;
  for (Eigen::Index i = 0; i < durations.size(); ++i) {
    if (events[static_cast<std::size_t>(i)]) event_times.push_back(durations[i]);
  }
  breakpoints = {0.0};
  for (int k = 1; k < intervals; ++k) {
    const double q = stats::quantile(event_times, static_cast<double>(k) / intervals);
    if (q > breakpoints.back()) breakpoints.push_back(q);
  }
  const double horizon = durations.maxCoeff();
  if (horizon > breakpoints.back()) breakpoints.push_back(horizon);
  const std::size_t m = breakpoints.size() - 1;
  std::vector<double> events_in(m, 0.0);
  std::vector<double> exposure(m, 0.0);
  auto interval_of = [&](double t) {
    // interval k covers (breakpoints[k], breakpoints[k+1]]; t = 0 joins the first.
    const auto it = std::lower_bound(breakpoints.begin() + 1, breakpoints.end(), t);
    return std::min<std::size_t>(static_cast<std::size_t>(it - breakpoints.begin()) - 1, m - 1);
  };
  for (Eigen::Index i = 0; i < durations.size(); ++i) {
    const double t = durations[i];
    const double w = std::exp(eta[i]);
    for (std::size_t k = 0; k < m && breakpoints[k] < t; ++k) {
      exposure[k] += w * (std::min(t, breakpoints[k + 1]) - breakpoints[k]);
    }
    if (events[static_cast<std::size_t>(i)]) events_in[interval_of(t)] += 1.0;
  }
  rates.assign(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) rates[k] = exposure[k] > 0 ? events_in[k] / exposure[k] : 0.0;
  std::vector<double> h(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (std::size_t k = 0; k < m && breakpoints[k] < grid[g]; ++k) {
      acc += rates[k] * (std::min(grid[g], breakpoints[k + 1]) - breakpoints[k]);
    }
    if (grid[g] > breakpoints.back()) acc += rates.back() * (grid[g] - breakpoints.back());
    h[g] = acc;
  }
  return h;
}

}  // namespace

std::string_view to_string(CoxBaseline b) { return b == CoxBaseline::kBreslow ? "breslow" : "piecewise"; }

CoxBaseline parse_cox_baseline(const std::string& token) {
  if (token == "breslow") return CoxBaseline::kBreslow;
  if (token == "piecewise") return CoxBaseline::kPiecewise;
  throw UsageError("unknown baseline '" + token + "' (breslow|piecewise)");
}

std::vector<double> breslow_baseline(std::span<const double> durations, std::span<const std::uint8_t> events,
                                     std::span<const double> eta, std::span<const double> grid) {
  const std::size_t n = durations.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return durations[a] > durations[b]; });
  const double shift = n ? *std::max_element(eta.begin(), eta.end()) : 0.0;
  // Hazard increments at each distinct event time, collected descending.
  std::vector<std::pair<double, double>> jumps;
  double s0 = 0.0;
  for (std::size_t i = 0; i < n;) {
    const double t = durations[order[i]];
    double deaths = 0.0;
    std::size_t j = i;
    for (; j < n && durations[order[j]] == t; ++j) {
      s0 += std::exp(eta[order[j]] - shift);
      deaths += events[order[j]] ? 1.0 : 0.0;
    }
    if (deaths > 0) jumps.emplace_back(t, deaths / s0 * std::exp(-shift));
    i = j;
  }
  std::reverse(jumps.begin(), jumps.end());
  std::vector<double> h(grid.size(), 0.0);
  double acc = 0.0;
  std::size_t k = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    while (k < jumps.size() && jumps[k].first <= grid[g]) acc += jumps[k++].second;
    h[g] = acc;
  }
  return h;
}

Eigen::VectorXd CoxModel::risk(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  check_dimension(x.cols());
  return (x.rowwise() - means.transpose()) * beta;
}

void CoxModel::predict_curves(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::MatrixXd& out) const {
  const Eigen::VectorXd r = risk(x).array().exp();
  const Eigen::Map<const Eigen::RowVectorXd> h(cumulative_hazard.data(), static_cast<Eigen::Index>(cumulative_hazard.size()));
  out = (-(r * h)).array().exp();
}

double cox_log_partial_likelihood(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd means = data.x.colwise().mean();
  const Eigen::MatrixXd z = data.x.rowwise() - means.transpose();
  return partial_likelihood(z, data.duration, data.event, descending_order(data.duration), beta, false).loglik;
}

CoxModel fit_cox(const SurvivalDataset& data, const CoxConfig& config) {
  data.validate();
  if (data.event_count() < 2) throw DataError("insufficient events to fit a Cox model");
  const auto d = data.x.cols();
  CoxModel model;
  model.config = config;
  model.feature_names = data.feature_names;
  model.means = data.x.colwise().mean();
  Eigen::MatrixXd z = data.x.rowwise() - model.means.transpose();
  Eigen::VectorXd scale(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    scale[j] = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, z.rows() - 1)));
    if (!(scale[j] > 0.0)) {
      throw DataError("feature '" + data.feature_names[static_cast<std::size_t>(j)] + "' has zero variance");
    }
    z.col(j) /= scale[j];
  }
  const auto order = descending_order(data.duration);

  auto solve = [&](double ridge, CoxModel& m) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    auto eval = [&](const Eigen::VectorXd& v, bool deriv) {
      auto r = partial_likelihood(z, data.duration, data.event, order, v, deriv);
      r.loglik -= 0.5 * ridge * v.squaredNorm();
      if (deriv) {
        r.gradient -= ridge * v;
        r.hessian.diagonal().array() -= ridge;
      }
      return r;
    };
    auto cur = eval(b, true);
    m.log_likelihood_trace = {cur.loglik};
    m.converged = false;
    m.iterations = 0;
    for (int it = 0; it < config.max_iter; ++it) {
      if (cur.gradient.lpNorm<Eigen::Infinity>() < config.tol) {
        m.converged = true;
        break;
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(-cur.hessian);
      Eigen::VectorXd step = ldlt.info() == Eigen::Success ? Eigen::VectorXd(ldlt.solve(cur.gradient))
                                                           : Eigen::VectorXd(cur.gradient);
      if (!step.allFinite()) step = cur.gradient;
      double ll = 0.0;
      Eigen::VectorXd next;
      bool improved = false;
      for (int half = 0; half < 40; ++half) {
        next = b + step;
        ll = eval(next, false).loglik;
        if (std::isfinite(ll) && ll >= cur.loglik - 1e-12 * std::abs(cur.loglik)) {
          improved = true;
          break;
        }
        step *= 0.5;
      }
      ++m.iterations;
      if (!improved) break;
      b = next;
      cur = eval(b, true);
      m.log_likelihood_trace.push_back(cur.loglik);
    }
    if (!m.converged && cur.gradient.lpNorm<Eigen::Infinity>() < config.tol) m.converged = true;
    m.log_likelihood = cur.loglik;
    return b;
  };

  Eigen::VectorXd b = solve(config.ridge, model);
  const bool separated = !model.converged || b.lpNorm<Eigen::Infinity>() > 20.0;
  if (separated && config.ridge == 0.0) {
    model.warnings.push_back("Cox fit did not converge (possible separation); refitting with ridge penalty 1");
    b = solve(1.0, model);
  }
  if (!b.allFinite()) throw NumericalError("Cox coefficients are not finite");
  if (!model.converged) {
    model.warnings.push_back(fmt::format("Cox fit stopped after {} iterations without convergence", model.iterations));
  }
  model.beta = b.array() / scale.array();

  model.time_grid = time_grid(std::span<const double>(data.duration.data(), data.rows()));
  const Eigen::VectorXd eta = (data.x.rowwise() - model.means.transpose()) * model.beta;
  if (config.baseline == CoxBaseline::kBreslow) {
    model.cumulative_hazard = breslow_baseline(std::span<const double>(data.duration.data(), data.rows()), data.event,
                                               std::span<const double>(eta.data(), data.rows()), model.time_grid);
  } else {
    model.cumulative_hazard = piecewise_baseline(data.duration, data.event, eta, std::max(1, config.piecewise_intervals),
                                                 model.breakpoints, model.rates, model.time_grid);
  }
  return model;
}

}  // namespace fleetsurv::survival
