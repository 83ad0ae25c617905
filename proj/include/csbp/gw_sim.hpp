#pragma once

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <cstdint>
#include <vector>

#include "csbp/error.hpp"
#include "csbp/mechanism.hpp"
#include "csbp/offspring.hpp"
#include "csbp/rng.hpp"
#include "csbp/stats.hpp"

namespace csbp {

struct PopulationPath {
  std::vector<double> times;          // event times, strictly increasing
  std::vector<std::int64_t> sizes;    // size after each event
  std::int64_t initial = 0;
  double N = 1.0;
  double horizon = 0.0;
  std::uint64_t events = 0;
  bool exploded = false;

  std::int64_t size_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return initial;
    return sizes[std::size_t(it - times.begin()) - 1];
  }
  double mass_at(double t) const { return double(size_at(t)) / N; }
};

struct GwOptions {
  std::uint64_t event_budget = 10'000'000;
};

// Records every event.
struct FullPathRecorder {
  PopulationPath* path;
  void on_event(double t, std::int64_t z) {
    path->times.push_back(t);
    path->sizes.push_back(z);
  }
};

// Records Z at fixed times only (no per-event storage).
struct SnapshotRecorder {
  std::vector<double> at;
  std::vector<std::int64_t> values;
  void on_event(double, std::int64_t) {}
};

struct GwRun {
  std::int64_t final_size = 0;
  std::uint64_t events = 0;
  bool exploded = false;
};

template <class Recorder>
GwRun run_gw(const OffspringDecomposition& d, double x, double T, RandomStream& rng, Recorder& rec,
             GwOptions opt = {}) {
  if (!(x > 0.0) || !(T >= 0.0)) fail(ErrorKind::DomainError, "x > 0 and T >= 0 required");
  const double N = d.k.p.N;
  std::int64_t z = std::int64_t(std::floor(N * x + 1e-9));
  const double dN = d.k.dN;
  double t = 0.0;
  GwRun out;
  constexpr bool snap = std::is_same_v<Recorder, SnapshotRecorder>;
  std::size_t next_snap = 0;
  if constexpr (snap) rec.values.assign(rec.at.size(), 0);
  while (z > 0) {
    const double dt = rng.exponential() / (dN * double(z));
    if constexpr (snap) {
      while (next_snap < rec.at.size() && rec.at[next_snap] < t + dt) rec.values[next_snap++] = z;
    }
    if (t + dt > T) break;
    t += dt;
    z += sample_eta(d, rng) - 1;
    ++out.events;
    rec.on_event(t, z);
    if (out.events >= opt.event_budget) {
      out.exploded = true;
      break;
    }
  }
  if constexpr (snap) {
    while (next_snap < rec.at.size()) rec.values[next_snap++] = z;
  }
  out.final_size = z;
  return out;
}

inline PopulationPath simulate_gw(const OffspringDecomposition& d, double x, double T, RandomStream& rng,
                                  GwOptions opt = {}) {
  PopulationPath p;
  p.N = d.k.p.N;
  p.initial = std::int64_t(std::floor(p.N * x + 1e-9));
  p.horizon = T;
  FullPathRecorder rec{&p};
  const GwRun r = run_gw(d, x, T, rng, rec, opt);
  p.events = r.events;
  p.exploded = r.exploded;
  return p;
}

inline PopulationPath simulate_gw(const JumpMeasure& mu, const RescaleParams& params, double x, double T,
                                  RandomStream& rng, GwOptions opt = {}) {
  DecompositionOptions dopt;
  dopt.allow_binary_only = true;
  return simulate_gw(build_decomposition(mu, params, dopt), x, T, rng, opt);
}

// w_t(s) solving dw/dt = Phi_N(w), w_0 = s.
inline LaplaceSolution solve_wtN_path(const JumpMeasure& mu, const RescaleParams& params, double s, double T,
                                      double h, SolverOptions opt = {}) {
  if (!(s >= 0.0 && s <= 1.0)) fail(ErrorKind::DomainError, "s must lie in [0,1]");
  const FiniteN k = finite_n(mu, params);
  return solve_flow([&](double w) { return -PhiN(mu, k, w); }, s, s, T, h, 1.0, opt);
}

inline double solve_wtN(const JumpMeasure& mu, const RescaleParams& params, double s, double T, double h,
                        SolverOptions opt = {}) {
  return solve_wtN_path(mu, params, s, T, h, opt).back();
}

// Mean and SE of exp(-lambda X_t) across replicas.
inline MeanCI empirical_laplace(const std::vector<double>& masses, double lambda) {
  if (masses.size() < 2) fail(ErrorKind::InsufficientReplicas, "need at least 2 paths");
  std::vector<double> v;
  v.reserve(masses.size());
  for (double x : masses) v.push_back(std::exp(-lambda * x));
  return mc_mean_ci(v);
}

inline MeanCI empirical_laplace(const std::vector<PopulationPath>& paths, double lambda, double t) {
  std::vector<double> m;
  for (const auto& p : paths) {
    if (t > p.horizon) fail(ErrorKind::DomainError, "t beyond simulated horizon");
    m.push_back(p.mass_at(t));
  }
  return empirical_laplace(m, lambda);
}

}  // namespace csbp
