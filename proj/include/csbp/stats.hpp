#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "csbp/error.hpp"

namespace csbp {

struct MeanCI {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanCI mc_mean_ci(const std::vector<double>& v) {
  if (v.size() < 2) fail(ErrorKind::InsufficientReplicas, "need at least 2 values");
  const double n = double(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) fail(ErrorKind::EmptySample, "KS needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(double(i) / na - double(j) / nb));
  }
  return d;
}

// Asymptotic two-sample KS critical value at level alpha.
inline double ks_critical(std::size_t na, std::size_t nb, double alpha = 0.05) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(double(na + nb) / (double(na) * double(nb)));
}

}  // namespace csbp
