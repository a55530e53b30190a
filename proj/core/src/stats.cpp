#include "fleetsurv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "fleetsurv/errors.hpp"
#include "fleetsurv/rng.hpp"

namespace fleetsurv::stats {
namespace {

double poly(const double* cc, int nord, double x) {
  double result = cc[0];
  if (nord > 1) {
    double p = x * cc[nord - 1];
    for (int j = nord - 2; j > 0; --j) p = (p + cc[j]) * x;
    result += p;
  }
  return result;
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_sf(double z) {
  return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), z));
}

TestResult finish(TestResult r) {
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  r.significant = r.p_value < r.alpha;
  return r;
}

// Pr(D_{n,n} >= h/n), Horner-style alternating sum.
double prob_outside_square(long n, long h) {
  double p = 0.0;
  for (long k = n / h; k >= 0; --k) {
    double p1 = 1.0;
    for (long j = 0; j < h; ++j) {
      p1 = static_cast<double>(n - k * h - j) * p1 / static_cast<double>(n + k * h + j + 1);
    }
    p = p1 * (1.0 - p);
  }
  return 2.0 * p;
}

// Fraction of lattice paths from (0,0) to (m,n) staying strictly inside
// |x/m - y/n| < h/lcm(m,n); one column at a time with exponent tracking.
double prob_inside(long m, long n, long g, long h) {
  if (m < n) std::swap(m, n);
  const long mg = m / g;
  const long ng = n / g;
  long minj = 0;
  long maxj = std::min(static_cast<long>(std::ceil(static_cast<double>(h) / mg)), n + 1);
  long curlen = maxj - minj;
  const long len = std::min(2 * maxj + 2, n + 1);
  std::vector<double> column(static_cast<std::size_t>(std::max(len, n + 1) + 1), 0.0);
  std::fill(column.begin() + minj, column.begin() + maxj, 1.0);
  int exponent = 0;
  std::vector<double> scratch(column.size());
  for (long i = 1; i <= m; ++i) {
    const long lastminj = minj;
    const long lastlen = curlen;
    minj = std::max(static_cast<long>(std::floor(static_cast<double>(ng * i - h) / mg)) + 1, 0L);
    minj = std::min(minj, n);
    maxj = std::min(static_cast<long>(std::ceil(static_cast<double>(ng * i + h) / mg)), n + 1);
    if (maxj <= minj) return 0.0;
    double running = 0.0;
    for (long k = 0; k < maxj - minj; ++k) {
      const long src = minj - lastminj + k;
      running += (src >= 0 && src < static_cast<long>(column.size())) ? column[static_cast<std::size_t>(src)] : 0.0;
      scratch[static_cast<std::size_t>(k)] = running;
    }
    std::copy(scratch.begin(), scratch.begin() + (maxj - minj), column.begin());
    curlen = maxj - minj;
    if (lastlen > curlen) {
      std::fill(column.begin() + curlen, column.begin() + std::min<long>(lastlen, static_cast<long>(column.size())), 0.0);
    }
    int e = 0;
    std::frexp(column[static_cast<std::size_t>(curlen - 1)], &e);
    if (e > 900) {
      e -= 800;
      for (auto& v : column) v = std::ldexp(v, -e);
      exponent += e;
    }
  }
  double value = column[static_cast<std::size_t>(maxj - minj - 1)];
  for (long i = 1; i <= n; ++i) {
    value = value * static_cast<double>(i) / static_cast<double>(m + i);
    int e = 0;
    std::frexp(value, &e);
    if (e < -128) {
      value = std::ldexp(value, exponent);
      exponent = 0;
    }
  }
  return std::ldexp(value, exponent);
}

// Limiting Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
double kolmogorov_sf(double lambda) {
  if (lambda < 1e-3) return 1.0;
  if (lambda < 1.18) {
    // Small-lambda series converges faster in the Jacobi-theta form.
    const double y = std::exp(-M_PI * M_PI / (8.0 * lambda * lambda));
    double sum = 0.0;
    for (int k = 1; k <= 50; k += 2) sum += std::pow(y, k * k);
    return 1.0 - std::sqrt(2.0 * M_PI) / lambda * sum;
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return 2.0 * sum;
}

std::vector<double> draw_without_replacement(std::span<const double> x, std::size_t k, Rng& rng) {
  std::vector<double> pool(x.begin(), x.end());
  // Partial Fisher-Yates: the first k slots become the sample.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

double mean(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (const double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw UsageError("pearson: length mismatch");
  if (x.size() < 2) throw UsageError("pearson: needs at least 2 pairs");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw UsageError("quantile of empty sample");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, x.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return x[lo] + (x[hi] - x[lo]) * frac;
}

TestResult shapiro_wilk(std::span<const double> sample, double alpha) {
  static constexpr double g[2] = {-2.273, 0.459};
  static constexpr double c1[6] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[4] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[3] = {-0.4803, -0.082676, 0.0030302};

  const std::size_t n = sample.size();
  if (n < 3) throw UsageError("shapiro-wilk needs at least 3 values");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (range < 1e-19) throw UsageError("shapiro-wilk undefined for a sample with zero range");

  const auto an = static_cast<double>(n);
  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    const double an25 = an + 0.25;
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = normal_quantile((static_cast<double>(i + 1) - 0.375) / an25);
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, 6, rsn) - m[0] / ssumm2;
    std::size_t first_scaled = 1;
    double fac = 0.0;
    if (n > 5) {
      first_scaled = 2;
      const double a2 = -m[1] / ssumm2 + poly(c2, 6, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
                      (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
  }

  // W as the squared correlation between the antisymmetric coefficient
  // vector and the range-scaled order statistics.
  std::vector<double> coef(n, 0.0);
  for (std::size_t i = 0; i < half; ++i) {
    coef[i] = -a[i];
    coef[n - 1 - i] = a[i];
  }
  const double ca = mean(coef);
  double cx = 0.0;
  for (const double v : x) cx += v / range;
  cx /= an;
  double ssa = 0.0, ssx = 0.0, sax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double asa = coef[i] - ca;
    const double xsx = x[i] / range - cx;
    ssa += asa * asa;
    ssx += xsx * xsx;
    sax += asa * xsx;
  }
  const double ssassx = std::sqrt(ssa * ssx);
  const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
  const double w = 1.0 - w1;

  TestResult r;
  r.test = "shapiro-wilk";
  r.statistic = w;
  r.alpha = alpha;
  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;
    constexpr double stqr = 1.04719755119660;
    r.p_value = std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
    return finish(r);
  }
  double y = std::log(w1);
  const double xx = std::log(an);
  double mu = 0.0, sigma = 1.0;
  if (n <= 11) {
    const double gamma = poly(g, 2, an);
    if (y >= gamma) {
      r.p_value = 1e-99;
      return finish(r);
    }
    y = -std::log(gamma - y);
    mu = poly(c3, 4, an);
    sigma = std::exp(poly(c4, 4, an));
  } else {
    mu = poly(c5, 4, xx);
    sigma = std::exp(poly(c6, 3, xx));
  }
  r.p_value = normal_sf((y - mu) / sigma);
  return finish(r);
}

TestResult ks_2samp(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.empty() || b.empty()) throw UsageError("ks_2samp needs non-empty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto n1 = static_cast<long>(x.size());
  const auto n2 = static_cast<long>(y.size());

  // Walk the merged order statistics; ties advance both ECDFs together.
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    const double diff = std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2);
    d = std::max(d, diff);
  }
  d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));

  TestResult r;
  r.test = "ks-2sample";
  r.alpha = alpha;
  r.statistic = d;

  const long g = std::gcd(n1, n2);
  bool exact = std::max(n1, n2) <= 10000;
  double p = std::numeric_limits<double>::quiet_NaN();
  if (exact) {
    const long lcm = (n1 / g) * n2;
    const long h = std::lround(d * static_cast<double>(lcm));
    r.statistic = static_cast<double>(h) / static_cast<double>(lcm);
    if (h == 0) {
      p = 1.0;
    } else if (n1 == n2) {
      p = prob_outside_square(n1, h);
    } else {
      p = 1.0 - prob_inside(n1, n2, g, h);
    }
    if (!(p >= 0.0 && p <= 1.0)) exact = false;
  }
  if (!exact) {
    const double en = static_cast<double>(n1) * n2 / static_cast<double>(n1 + n2);
    const double root = std::sqrt(en);
    p = kolmogorov_sf((root + 0.12 + 0.11 / root) * r.statistic);
  }
  r.p_value = p;
  return finish(r);
}

TestResult t_test(std::span<const double> a, std::span<const double> b, bool equal_variance,
                  double alpha) {
  if (a.size() < 2 || b.size() < 2) throw UsageError("t-test needs at least 2 values per sample");
  const auto n1 = static_cast<double>(a.size());
  const auto n2 = static_cast<double>(b.size());
  const double m1 = mean(a);
  const double m2 = mean(b);
  const double v1 = variance(a);
  const double v2 = variance(b);

  TestResult r;
  r.test = equal_variance ? "t-ind" : "t-welch";
  r.alpha = alpha;
  double se2 = 0.0;
  if (equal_variance) {
    r.df = n1 + n2 - 2.0;
    const double pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / r.df;
    se2 = pooled * (1.0 / n1 + 1.0 / n2);
  } else {
    const double q1 = v1 / n1;
    const double q2 = v2 / n2;
    se2 = q1 + q2;
    r.df = se2 > 0.0 ? se2 * se2 / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0)) : n1 + n2 - 2.0;
  }
  if (se2 <= 0.0) {
    if (m1 == m2) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = m1 > m2 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return finish(r);
  }
  r.statistic = (m1 - m2) / std::sqrt(se2);
  const boost::math::students_t_distribution<double> dist(r.df);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic)));
  return finish(r);
}

TestResult variance_ratio_test(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() < 2 || b.size() < 2) throw UsageError("variance test needs at least 2 values per sample");
  const double v1 = variance(a);
  const double v2 = variance(b);
  TestResult r;
  r.test = "f-variance";
  r.alpha = alpha;
  r.df = static_cast<double>(a.size() - 1);
  if (v1 == 0.0 && v2 == 0.0) {
    r.statistic = 1.0;
    r.p_value = 1.0;
    return finish(r);
  }
  if (v2 == 0.0 || v1 == 0.0) {
    r.statistic = v2 == 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    r.p_value = 0.0;
    return finish(r);
  }
  r.statistic = v1 / v2;
  const boost::math::fisher_f_distribution<double> dist(static_cast<double>(a.size() - 1),
                                                        static_cast<double>(b.size() - 1));
  const double lower = boost::math::cdf(dist, r.statistic);
  const double upper = boost::math::cdf(boost::math::complement(dist, r.statistic));
  r.p_value = 2.0 * std::min(lower, upper);
  return finish(r);
}

DistributionComparison compare_distributions(std::span<const double> a, std::span<const double> b,
                                             std::size_t draws, double alpha, std::uint64_t seed) {
  DistributionComparison out;
  std::size_t k = draws;
  if (a.size() < k || b.size() < k) {
    k = std::min(a.size(), b.size());
    out.warnings.push_back("draw size clamped from " + std::to_string(draws) + " to " + std::to_string(k));
  }
  if (k < 3) throw UsageError("compare_distributions needs at least 3 values per group");
  out.draws = k;
  Rng rng_a = make_rng(seed, 0);
  Rng rng_b = make_rng(seed, 1);
  const auto sa = draw_without_replacement(a, k, rng_a);
  const auto sb = draw_without_replacement(b, k, rng_b);
  out.normality_a = shapiro_wilk(sa, alpha);
  out.normality_b = shapiro_wilk(sb, alpha);
  if (!out.normality_a.significant && !out.normality_b.significant) {
    out.comparison = t_test(sa, sb, true, alpha);
  } else {
    out.comparison = ks_2samp(sa, sb, alpha);
  }
  return out;
}

MeanComparison mean_comparison(std::span<const double> a, std::span<const double> b, double alpha,
                               double variance_alpha) {
  MeanComparison out;
  out.variance_test = variance_ratio_test(a, b, variance_alpha);
  out.comparison = t_test(a, b, !out.variance_test.significant, alpha);
  return out;
}

}  // namespace fleetsurv::stats
