#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>

namespace epitrace::sim::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Unbiased (n - 1) sample variance; 0 for fewer than two samples.
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  // Shifted by the first sample so identical inputs give exactly zero.
  const double k = xs.front();
  double s = 0.0, ss = 0.0;
  for (double x : xs) s += x - k;
  const double m = s / static_cast<double>(xs.size());
  for (double x : xs) ss += (x - k - m) * (x - k - m);
  return ss / static_cast<double>(xs.size() - 1);
}

inline double sample_stddev(std::span<const double> xs) { return std::sqrt(sample_variance(xs)); }

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept. R^2 is 1 when y is constant
/// and the fit is exact.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  LinearFit f;
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return f;
  const double mx = mean(x.first(n)), my = mean(y.first(n));
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    sse += r * r;
  }
  f.r2 = syy == 0.0 ? (sse == 0.0 ? 1.0 : 0.0) : 1.0 - sse / syy;
  return f;
}

}  // namespace epitrace::sim::stats
