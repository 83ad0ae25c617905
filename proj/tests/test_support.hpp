#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "csbp/limit_sim.hpp"

namespace csbp::testing {

// Direct O(n^2 atoms) evaluation of c H_j over the grid; post-jump levels are
// rebuilt from scratch here rather than taken from the library.
inline std::vector<double> brute_height(const Path& y, double c) {
  const std::size_t n = y.values.size();
  std::vector<double> post(y.atoms.size());
  for (std::size_t i = 0; i < y.atoms.size(); ++i) {
    double lvl = y.values[y.atoms[i].node - 1];
    for (std::size_t k = 0; k <= i; ++k)
      if (y.atoms[k].node == y.atoms[i].node) lvl += y.atoms[k].size;
    post[i] = lvl;
  }
  std::vector<double> h(n);
  for (std::size_t j = 0; j < n; ++j) {
    double inf = y.values[0];
    for (std::size_t i = 0; i <= j; ++i) inf = std::min(inf, y.values[i]);
    double sum = 0.0;
    for (std::size_t a = 0; a < y.atoms.size(); ++a) {
      const std::size_t r = y.atoms[a].node;
      if (r > j) continue;
      double m = 0.0;
      for (std::size_t u = r; u <= j; ++u) m = std::min(m, y.values[u] - post[a]);
      sum += std::max(y.atoms[a].size + m, 0.0);
    }
    h[j] = (y.values[j] - inf - sum) / c;
  }
  return h;
}

// sup over the pooled sample points of |F_a - F_b|, by counting.
inline double brute_ks(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  double d = 0.0;
  for (double x : pts) {
    const double fa = double(std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; })) / double(a.size());
    const double fb = double(std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; })) / double(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

// Kind of the csbp::Error thrown by f, if any.
template <class F>
std::optional<ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Random path: Gaussian steps plus up to max_atoms positive jumps at random nodes.
inline Path random_path(std::mt19937_64& g, std::size_t n, std::size_t max_atoms) {
  std::normal_distribution<double> Z(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> node(1, n - 1), cnt(0, max_atoms);
  std::exponential_distribution<double> size(2.0);
  const double dt = 1.0 / double(n - 1);
  std::vector<std::size_t> nodes(cnt(g));
  for (auto& x : nodes) x = node(g);
  std::sort(nodes.begin(), nodes.end());
  Path p;
  p.dt = dt;
  p.values.assign(n, 0.0);
  std::size_t a = 0;
  for (std::size_t j = 1; j < n; ++j) {
    double inc = -0.3 * dt + std::sqrt(dt) * Z(g);
    while (a < nodes.size() && nodes[a] == j) {
      const double z = size(g);
      p.atoms.push_back({dt * double(j), z, j});
      inc += z;
      ++a;
    }
    p.values[j] = p.values[j - 1] + inc;
  }
  return p;
}

}  // namespace csbp::testing
