#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace depsketch::stats {

// Pairwise summation keeps aggregation independent of trial ordering and
// worker count to well below 1e-12 relative error.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty sample");
  return pairwise_sum(xs) / static_cast<double>(xs.size());
}

inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("variance: need >= 2 samples");
  double m = mean(xs);
  std::vector<double> dev(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) dev[i] = (xs[i] - m) * (xs[i] - m);
  return pairwise_sum(dev) / static_cast<double>(xs.size() - 1);
}

inline double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

inline double standard_error(std::span<const double> xs) {
  return stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q outside [0,1]");
  std::sort(xs.begin(), xs.end());
  double pos = q * static_cast<double>(xs.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, xs.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// E||g||_2 for g ~ N(0, I_p): sqrt(2) * Gamma((p+1)/2) / Gamma(p/2).
inline double chi_mean(int p) {
  if (p < 1) throw std::invalid_argument("chi_mean: p must be positive");
  return std::sqrt(2.0) *
         std::exp(std::lgamma((p + 1) / 2.0) - std::lgamma(p / 2.0));
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    // Step past ties in both samples together so equal values never
    // contribute a spurious gap.
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// Asymptotic two-sample KS p-value (Kolmogorov distribution tail).
inline double ks_pvalue(double d, std::size_t n, std::size_t m) {
  double ne = static_cast<double>(n) * static_cast<double>(m) /
              static_cast<double>(n + m);
  double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  if (lambda < 1e-12) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) *
                  std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

// E[max of k iid N(0,1)] by quadrature; used for conditional centering of
// greedily selected Gaussian perturbations.
inline double expected_max_gaussian(int k, int grid = 20000) {
  if (k < 1) throw std::invalid_argument("expected_max_gaussian: k must be positive");
  if (k == 1) return 0.0;
  const double lo = -10.0, hi = 10.0;
  double h = (hi - lo) / grid;
  double sum = 0.0;
  for (int i = 0; i <= grid; ++i) {
    double x = lo + i * h;
    double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    double Phi = 0.5 * std::erfc(-x / std::sqrt(2.0));
    double f = x * k * phi * std::pow(Phi, k - 1);
    double w = (i == 0 || i == grid) ? 0.5 : 1.0;
    sum += w * f;
  }
  return sum * h;
}

}  // namespace depsketch::stats
