#include "fleetsurv/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "fleetsurv/csv.hpp"
#include "fleetsurv/errors.hpp"
#include "fleetsurv/rng.hpp"
#include "fleetsurv/survival/model.hpp"

namespace fleetsurv::explain {
namespace {

struct Clustering {
  Eigen::MatrixXd centers;
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
};

Clustering lloyd(const Eigen::MatrixXd& x, std::size_t k, Rng& rng, int max_iter) {
  const auto n = static_cast<std::size_t>(x.rows());
  Clustering c;
  c.centers.resize(static_cast<Eigen::Index>(k), x.cols());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  // k-means++ seeding
  std::size_t first = static_cast<std::size_t>(uniform_index(rng, n));
  c.centers.row(0) = x.row(static_cast<Eigen::Index>(first));
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (x.row(static_cast<Eigen::Index>(i)) - c.centers.row(static_cast<Eigen::Index>(j - 1))).squaredNorm());
      total += dist[i];
    }
    std::size_t pick = n - 1;
    if (total > 0) {
      double u = uniform01(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        u -= dist[i];
        if (u < 0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(uniform_index(rng, n));
    }
    c.centers.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(pick));
  }
  c.assignment.assign(n, k);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    c.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double d = (x.row(static_cast<Eigen::Index>(i)) - c.centers.row(static_cast<Eigen::Index>(j))).squaredNorm();
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      dist[i] = bd;
      c.inertia += bd;
      if (c.assignment[i] != best) {
        c.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(c.assignment[i])) += x.row(static_cast<Eigen::Index>(i));
      ++counts[c.assignment[i]];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] > 0) {
        c.centers.row(static_cast<Eigen::Index>(j)) = sums.row(static_cast<Eigen::Index>(j)) / static_cast<double>(counts[j]);
      } else {
        // Re-seed an empty cluster at the worst-served point.
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        c.centers.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(far));
        dist[far] = 0.0;
      }
    }
  }
  return c;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Distinct random k-subsets of {0..d-1} as bit masks.
std::vector<std::uint64_t> sample_masks(int d, int size, std::size_t count, Rng& rng) {
  std::vector<std::uint64_t> out;
  std::vector<int> items(static_cast<std::size_t>(d));
  std::vector<std::uint64_t> seen;
  std::size_t attempts = 0;
  while (out.size() < count && attempts < count * 100) {
    ++attempts;
    std::iota(items.begin(), items.end(), 0);
    std::uint64_t m = 0;
    for (int i = 0; i < size; ++i) {
      const auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(uniform_index(rng, static_cast<std::uint64_t>(d - i)));
      std::swap(items[static_cast<std::size_t>(i)], items[j]);
      m |= std::uint64_t{1} << items[static_cast<std::size_t>(i)];
    }
    if (std::find(seen.begin(), seen.end(), m) != seen.end()) continue;
    seen.push_back(m);
    out.push_back(m);
  }
  return out;
}

}  // namespace

BackgroundSet kmeans_background(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed, int restarts,
                                int max_iter) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k == 0) throw UsageError("background size must be positive");
  if (k > n) throw UsageError(fmt::format("background size {} exceeds the {} available rows", k, n));
  BackgroundSet bg;
  if (k == n) {
    bg.rows = x;
    bg.weights = Eigen::VectorXd::Ones(x.rows());
    return bg;
  }
  Clustering best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(r));
    auto c = lloyd(x, k, rng, max_iter);
    if (c.inertia < best.inertia) best = std::move(c);
  }
  bg.rows = best.centers;
  bg.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  for (auto a : best.assignment) bg.weights[static_cast<Eigen::Index>(a)] += 1.0;
  bg.inertia = best.inertia;
  return bg;
}

PredictFn point_predictor(const survival::SurvivalModel& model, survival::PointRule rule) {
  return [&model, rule](const Eigen::MatrixXd& x) { return survival::predict_points(model, x, rule); };
}

Explanation kernel_shap(const PredictFn& f, std::span<const double> instance, const BackgroundSet& background,
                        const ShapOptions& options) {
  const int d = static_cast<int>(instance.size());
  if (d < 1) throw UsageError("instance has no features");
  if (background.rows.cols() != d) throw UsageError("background and instance dimensions differ");
  if (d > 62) throw UsageError("kernel SHAP supports at most 62 features");
  const Eigen::Map<const Eigen::RowVectorXd> x(instance.data(), d);
  const auto nb = background.rows.rows();
  const double wsum = background.weights.sum();

  Explanation ex;
  ex.prediction = f(Eigen::MatrixXd(x))[0];
  const Eigen::VectorXd bg_pred = f(background.rows);
  ex.base = background.weights.dot(bg_pred) / wsum;
  ex.phi = Eigen::VectorXd::Zero(d);
  if (d == 1) {
    ex.phi[0] = ex.prediction - ex.base;
    ex.exact = true;
    return ex;
  }

  // Coalitions (excluding empty and full) with their regression weights.
  std::vector<std::uint64_t> masks;
  std::vector<double> weights;
  const double full = std::ldexp(1.0, d);
  if (d <= 12 && static_cast<double>(options.nsamples) >= full) {
    ex.exact = true;
    for (std::uint64_t m = 1; m + 1 < (std::uint64_t{1} << d); ++m) {
      const int s = std::popcount(m);
      masks.push_back(m);
      weights.push_back((d - 1) / (binomial(d, s) * s * (d - s)));
    }
  } else {
    if (options.nsamples < static_cast<std::size_t>(d) + 2) throw UsageError("nsamples must be at least d + 2");
    auto rng = make_rng(options.seed, 0);
    double budget = static_cast<double>(options.nsamples);
    std::vector<int> remaining;
    for (int s = 1; s < d; ++s) remaining.push_back(s);
    // Enumerate whole sizes, smallest/largest first as they carry the most weight.
    std::sort(remaining.begin(), remaining.end(), [&](int a, int b) {
      const double ka = std::min(a, d - a);
      const double kb = std::min(b, d - b);
      return ka != kb ? ka < kb : a < b;
    });
    std::vector<int> sampled;
    for (int s : remaining) {
      const double count = binomial(d, s);
      if (count <= budget) {
        budget -= count;
        const double w = (d - 1.0) / (s * (d - s)) / count;
        // Gosper's hack: successive masks with the same popcount.
        const std::uint64_t end = std::uint64_t{1} << d;
        for (std::uint64_t m = (std::uint64_t{1} << s) - 1; m < end;) {
          masks.push_back(m);
          weights.push_back(w);
          const std::uint64_t c = m & (~m + 1);
          const std::uint64_t r = m + c;
          m = (((r ^ m) >> 2) / c) | r;
        }
      } else {
        sampled.push_back(s);
      }
    }
    double total_kernel = 0.0;
    for (int s : sampled) total_kernel += (d - 1.0) / (s * (d - s));
    for (int s : sampled) {
      const double size_weight = (d - 1.0) / (s * (d - s));
      const auto count = static_cast<std::size_t>(std::max(1.0, std::floor(budget * size_weight / total_kernel)));
      const auto picked = sample_masks(d, s, count, rng);
      for (auto m : picked) {
        masks.push_back(m);
        weights.push_back(size_weight / static_cast<double>(picked.size()));
      }
    }
  }
  ex.coalitions = masks.size();

  // v(z): weighted background mean with features in z taken from x.
  const auto nm = static_cast<Eigen::Index>(masks.size());
  Eigen::VectorXd v(nm);
  constexpr Eigen::Index kBlock = 64;
  for (Eigen::Index start = 0; start < nm; start += kBlock) {
    const auto len = std::min(kBlock, nm - start);
    Eigen::MatrixXd batch(len * nb, d);
    for (Eigen::Index c = 0; c < len; ++c) {
      const auto m = masks[static_cast<std::size_t>(start + c)];
      batch.middleRows(c * nb, nb) = background.rows;
      for (int j = 0; j < d; ++j) {
        if (m >> j & 1) batch.block(c * nb, j, nb, 1).setConstant(x[j]);
      }
    }
    const Eigen::VectorXd pred = f(batch);
    for (Eigen::Index c = 0; c < len; ++c) v[start + c] = background.weights.dot(pred.segment(c * nb, nb)) / wsum;
  }

  // Efficiency imposed by eliminating the last feature:
  // v - base - z_d * delta = sum_{i<d} (z_i - z_d) phi_i.
  const double delta = ex.prediction - ex.base;
  Eigen::MatrixXd a(nm, d - 1);
  Eigen::VectorXd y(nm);
  for (Eigen::Index r = 0; r < nm; ++r) {
    const auto m = masks[static_cast<std::size_t>(r)];
    const double zd = static_cast<double>(m >> (d - 1) & 1);
    const double sw = std::sqrt(weights[static_cast<std::size_t>(r)]);
    for (int j = 0; j < d - 1; ++j) a(r, j) = sw * (static_cast<double>(m >> j & 1) - zd);
    y[r] = sw * (v[r] - ex.base - zd * delta);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::VectorXd head;
  if (qr.rank() < d - 1) {
    ex.warnings.push_back("singular coalition system; using a ridge-stabilized solve");
    const Eigen::MatrixXd ata = a.transpose() * a;
    const double ridge = 1e-8 * std::max(1.0, ata.trace());
    head = (ata + ridge * Eigen::MatrixXd::Identity(d - 1, d - 1)).ldlt().solve(a.transpose() * y);
  } else {
    head = qr.solve(y);
  }
  ex.phi.head(d - 1) = head;
  ex.phi[d - 1] = delta - head.sum();
  return ex;
}

std::vector<RankedFeature> rank_features(std::span<const Explanation> explanations, std::span<const std::string> names) {
  if (explanations.empty()) return {};
  const auto d = explanations.front().phi.size();
  std::vector<RankedFeature> out(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    double s = 0.0;
    for (const auto& e : explanations) s += std::abs(e.phi[j]);
    auto& r = out[static_cast<std::size_t>(j)];
    r.index = static_cast<std::size_t>(j);
    r.name = static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)] : fmt::format("f{}", j + 1);
    r.mean_abs = s / static_cast<double>(explanations.size());
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedFeature& a, const RankedFeature& b) { return a.mean_abs > b.mean_abs; });
  return out;
}

void write_explanations_csv(std::ostream& out, std::span<const std::string> ids, std::span<const std::string> names,
                            std::span<const Explanation> explanations) {
  out << "instance_id,base,prediction";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    const auto& e = explanations[i];
    out << (i < ids.size() ? ids[i] : std::to_string(i)) << ',' << csv::format_double(e.base) << ','
        << csv::format_double(e.prediction);
    for (Eigen::Index j = 0; j < e.phi.size(); ++j) out << ',' << csv::format_double(e.phi[j]);
    out << '\n';
  }
}

}  // namespace fleetsurv::explain
