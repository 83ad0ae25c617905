#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "csbp/error.hpp"
#include "csbp/mechanism.hpp"
#include "csbp/offspring.hpp"
#include "csbp/rng.hpp"

namespace csbp {

// A retained jump; `node` is the first grid index whose value includes it.
struct LevyAtom {
  double time = 0.0;
  double size = 0.0;
  std::size_t node = 0;
};

inline std::size_t node_of(double time, double dt) {
  const double x = time / dt;
  const double n = std::round(x);
  if (std::abs(x - n) < 1e-9) return std::size_t(n);
  return std::size_t(std::ceil(x));
}

struct Path {
  double dt = 0.0;
  std::vector<double> values;
  std::vector<LevyAtom> atoms;
  double small_jump_variance = 0.0;  // integral of z^2 over (0, delta) per unit time (times X for the CSBP)
  std::size_t clamp_count = 0;

  double T() const { return dt * double(values.size() - 1); }
  double time(std::size_t i) const { return dt * double(i); }
};

// Jumps of mu restricted to [delta, inf): rate, compensator and size sampling.
class JumpSizeSampler {
 public:
  JumpSizeSampler() = default;
  JumpSizeSampler(const JumpMeasure& mu, double delta) : delta_(delta) {
    if (mu.is_empty()) return;
    const Interval keep = Interval::at_least(delta);
    if (!(delta > 0.0) && !mu.is_atomic())
      fail(ErrorKind::DomainError, "a positive cutoff is required for infinite-mass measures");
    rate_ = integrate(mu, Integrand::monomial(0.0), keep);
    mean_ = integrate(mu, Integrand::monomial(1.0), keep);
    deficit_ = delta > 0.0 ? integrate(mu, Integrand::monomial(2.0), Interval::below(delta)) : 0.0;
    if (rate_ <= 0.0) return;
    if (mu.is_atomic()) {
      std::vector<double> w;
      for (const auto& a : mu.atoms())
        if (keep.contains(a.location)) {
          sizes_.push_back(a.location);
          w.push_back(a.mass);
        }
      atoms_ = DiscreteLaw(std::move(w), 0.0, 0);
    } else if (const auto* s = std::get_if<StableFamily>(&mu.family())) {
      pareto_lo_ = std::max(delta, s->lower);
      pareto_gamma_ = s->gamma;
    } else {
      build_table(mu, keep);
    }
  }

  double rate() const { return rate_; }
  double compensator() const { return mean_; }
  double variance_deficit() const { return deficit_; }
  double delta() const { return delta_; }

  double sample(RandomStream& rng) const {
    if (atoms_) return sizes_[std::size_t(atoms_->sample(rng))];
    const double u = rng.uniform();
    if (pareto_lo_ > 0.0) return pareto_lo_ * std::pow(u, -1.0 / pareto_gamma_);
    const double target = u * cdf_.back();
    const std::size_t j = std::size_t(std::upper_bound(cdf_.begin(), cdf_.end(), target) - cdf_.begin());
    const std::size_t i = std::min(std::max<std::size_t>(j, 1), grid_.size() - 1);
    const double w = (target - cdf_[i - 1]) / std::max(cdf_[i] - cdf_[i - 1], 1e-300);
    return grid_[i - 1] + std::clamp(w, 0.0, 1.0) * (grid_[i] - grid_[i - 1]);
  }

 private:
  void build_table(const JumpMeasure& mu, const Interval& keep) {
    const double lo = std::max(keep.lo, mu.support_lo());
    double hi = mu.support_hi();
    if (std::isinf(hi)) {
      hi = std::max(2.0 * lo, 1.0);
      while (integrate(mu, Integrand::monomial(0.0), Interval::at_least(hi)) > 1e-13 * rate_) hi *= 2.0;
    }
    const int n = 4096;
    grid_.resize(n + 1);
    cdf_.assign(n + 1, 0.0);
    for (int i = 0; i <= n; ++i) grid_[std::size_t(i)] = lo * std::pow(hi / lo, double(i) / n);
    for (int i = 1; i <= n; ++i)
      cdf_[std::size_t(i)] = cdf_[std::size_t(i) - 1] +
                             integrate(mu, Integrand::monomial(0.0),
                                       Interval{grid_[std::size_t(i) - 1], grid_[std::size_t(i)], true, false});
  }

  double delta_ = 0.0;
  double rate_ = 0.0, mean_ = 0.0, deficit_ = 0.0;
  std::optional<DiscreteLaw> atoms_;
  std::vector<double> sizes_;
  double pareto_lo_ = 0.0, pareto_gamma_ = 1.5;
  std::vector<double> grid_, cdf_;
};

inline std::size_t grid_steps(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0)) fail(ErrorKind::DomainError, "T > 0 and dt > 0 required");
  return std::max<std::size_t>(1, std::size_t(std::llround(T / dt)));
}

// Jump-adapted Euler scheme for the CSBP SDE.
inline Path simulate_csbp(const BranchingMechanism& m, double x, double T, double dt, double delta,
                          RandomStream& rng) {
  if (x < 0.0) fail(ErrorKind::DomainError, "x must be >= 0");
  const std::size_t n = grid_steps(T, dt);
  Path p;
  p.dt = T / double(n);
  p.values.assign(n + 1, 0.0);
  p.values[0] = x;
  if (x == 0.0) return p;
  const JumpSizeSampler jumps(m.mu, delta);
  p.small_jump_variance = jumps.variance_deficit();
  const double lam = jumps.rate(), comp = jumps.compensator();
  double X = x;
  auto diffuse = [&](double h) {
    X += -m.b * X * h - comp * X * h + std::sqrt(2.0 * m.c * X * h) * rng.normal();
    if (X < 0.0) {
      X = 0.0;
      ++p.clamp_count;
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (X > 0.0) {
      if (p.dt * X * lam > 0.1) fail(ErrorKind::StepTooCoarse, "dt * jump rate = " + num(p.dt * X * lam));
      double remaining = p.dt;
      const double t0 = p.time(i);
      while (X > 0.0) {
        const double rate = X * lam;
        const double tau = rate > 0.0 ? rng.exponential() / rate : kInf;
        if (tau >= remaining) {
          diffuse(remaining);
          break;
        }
        diffuse(tau);
        remaining -= tau;
        if (X > 0.0) {
          const double z = jumps.sample(rng);
          X += z;
          p.atoms.push_back({t0 + (p.dt - remaining), z, i + 1});
        }
      }
    }
    p.values[i + 1] = X;
  }
  return p;
}

// Y_s = -b s + sqrt(2c) B_s + compensated jumps of size >= delta.
inline Path simulate_levy(const BranchingMechanism& m, double T, double dt, double delta, RandomStream& rng) {
  const std::size_t n = grid_steps(T, dt);
  Path p;
  p.dt = T / double(n);
  p.values.assign(n + 1, 0.0);
  const JumpSizeSampler jumps(m.mu, delta);
  p.small_jump_variance = jumps.variance_deficit();
  const double lam = jumps.rate(), comp = jumps.compensator();
  if (p.dt * lam > 0.1) fail(ErrorKind::StepTooCoarse, "dt * jump rate = " + num(p.dt * lam));
  const double sd = std::sqrt(2.0 * m.c * p.dt);
  double next_jump = lam > 0.0 ? rng.exponential() / lam : kInf;
  double y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t1 = p.time(i + 1);
    double inc = -m.b * p.dt - comp * p.dt;
    if (sd > 0.0) inc += sd * rng.normal();
    while (next_jump <= t1) {
      const double z = jumps.sample(rng);
      inc += z;
      p.atoms.push_back({next_jump, z, i + 1});
      next_jump += rng.exponential() / lam;
    }
    y += inc;
    p.values[i + 1] = y;
  }
  return p;
}

// Removes retained jumps below new_delta and restores their compensator, giving
// the coupled cutoff path Y^k from a finer path.
inline Path apply_cutoff(const Path& fine, const JumpMeasure& mu, double fine_delta, double new_delta) {
  if (!(new_delta >= fine_delta)) fail(ErrorKind::DomainError, "new cutoff must not be finer");
  Path p = fine;
  p.atoms.clear();
  const double extra = integrate(mu, Integrand::monomial(1.0), Interval{fine_delta, new_delta, true, false});
  std::vector<double> removed(fine.values.size(), 0.0);
  for (const auto& a : fine.atoms) {
    if (a.size >= new_delta) p.atoms.push_back(a);
    else removed[a.node] += a.size;
  }
  double shift = 0.0;
  for (std::size_t i = 1; i < p.values.size(); ++i) {
    shift += extra * p.dt - removed[i];
    p.values[i] = fine.values[i] + shift;
  }
  p.small_jump_variance = fine.small_jump_variance +
                          integrate(mu, Integrand::monomial(2.0), Interval{fine_delta, new_delta, true, false});
  return p;
}

struct HeightPath {
  double dt = 0.0;
  double c = 1.0;
  std::vector<double> values;
  std::vector<double> atom_min;             // running infimum m_i at retirement (or at the end)
  std::vector<std::size_t> atom_retired;    // retirement node, or values.size() if alive at the end
  std::size_t max_active = 0;
};

// Pre-jump level of each atom.  Within a grid step all jumps are placed at the
// start of the step, in time order, before the continuous increment.
inline std::vector<double> atom_pre_levels(const Path& y) {
  std::vector<double> pre(y.atoms.size());
  std::size_t last_node = 0;
  double level = 0.0;
  for (std::size_t i = 0; i < y.atoms.size(); ++i) {
    const auto& a = y.atoms[i];
    if (a.node == 0 || a.node >= y.values.size()) fail(ErrorKind::DomainError, "atom node outside the grid");
    if (i > 0 && a.node < last_node) fail(ErrorKind::DomainError, "atoms must be sorted by node");
    if (i == 0 || a.node != last_node) level = y.values[a.node - 1];
    pre[i] = level;
    level += a.size;
    last_node = a.node;
  }
  return pre;
}

// c H_s = Y_s - inf Y - sum_i (z_i + inf_{r_i<=u<=s}(Y_u - Y_{r_i}))^+ by one sweep.
inline HeightPath height_from_levy(const Path& y, double c) {
  if (!(c > 0.0)) fail(ErrorKind::DomainError, "height process needs c > 0");
  HeightPath h;
  h.dt = y.dt;
  h.c = c;
  const std::size_t n = y.values.size();
  h.values.assign(n, 0.0);
  const std::vector<double> pre = atom_pre_levels(y);
  h.atom_min.assign(y.atoms.size(), 0.0);
  h.atom_retired.assign(y.atoms.size(), n);
  struct Live {
    std::size_t idx;
    double post;
    double z;
    double m;
  };
  std::vector<Live> live;
  std::size_t next = 0;
  double runmin = y.values[0];
  for (std::size_t j = 0; j < n; ++j) {
    const double Y = y.values[j];
    runmin = std::min(runmin, Y);
    while (next < y.atoms.size() && y.atoms[next].node == j) {
      live.push_back({next, pre[next] + y.atoms[next].size, y.atoms[next].size, 0.0});
      ++next;
    }
    double sum = 0.0;
    std::size_t keep = 0;
    for (std::size_t q = 0; q < live.size(); ++q) {
      Live a = live[q];
      a.m = std::min(a.m, Y - a.post);
      if (a.z + a.m <= 0.0) {
        h.atom_min[a.idx] = a.m;
        h.atom_retired[a.idx] = j;
        continue;
      }
      sum += a.z + a.m;
      live[keep++] = a;
    }
    live.resize(keep);
    h.max_active = std::max(h.max_active, live.size());
    double v = (Y - runmin - sum) / c;
    if (v < -1e-6) fail(ErrorKind::NegativeHeight, "H = " + num(v) + " at node " + std::to_string(j));
    h.values[j] = std::max(v, 0.0);
  }
  for (const auto& a : live) h.atom_min[a.idx] = a.m;
  return h;
}

// (2/c) (1/eps) * occupation of [t, t+eps), left Riemann sum over the grid.
inline double local_time(const HeightPath& H, double level, double eps, std::size_t upto = SIZE_MAX) {
  if (!(eps > 0.0)) fail(ErrorKind::DomainError, "eps > 0 required");
  const double c = H.c;
  const std::size_t n = std::min(upto, H.values.size() - 1);
  std::size_t count = 0;
  for (std::size_t j = 0; j < n; ++j)
    if (H.values[j] >= level && H.values[j] < level + eps) ++count;
  if (count > 0 && count < 10) fail(ErrorKind::BandUnresolved, "fewer than 10 grid points in the band");
  return 2.0 / c / eps * H.dt * double(count);
}

// Expected overshoot of a Gaussian walk below its running minimum, in step sd units.
inline constexpr double kLadderOvershoot = 0.5825971579390106;

struct InfIdentity {
  double occupation = 0.0;            // (1/eps) * grid time with H <= eps
  double occupation_corrected = 0.0;  // band shrunk by the walk's ladder overshoot
  double inf_y = 0.0;
  double residual_raw = 0.0;
  double residual = 0.0;              // uses the corrected occupation
  double half_local_time = 0.0;       // (1/2) L(0) from the corrected occupation
  double remark_residual = 0.0;       // |L(0)/2 + inf Y / c|
};

// sigma2 is the Gaussian variance rate of Y (2c); pass 0 for no correction.
inline InfIdentity inf_identity_check(const Path& y, const HeightPath& H, double eps, double sigma2) {
  if (!(eps > 0.0)) fail(ErrorKind::DomainError, "eps > 0 required");
  if (H.values.size() != y.values.size()) fail(ErrorKind::DomainError, "grids differ");
  const double shift = kLadderOvershoot * std::sqrt(std::max(sigma2, 0.0) * H.dt) / H.c;
  const std::size_t n = H.values.size() - 1;
  std::size_t raw = 0, corr = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (H.values[j] <= eps) ++raw;
    if (H.values[j] <= eps - shift) ++corr;
  }
  if (raw > 0 && raw < 10) fail(ErrorKind::BandUnresolved, "fewer than 10 grid points in the band");
  InfIdentity r;
  r.occupation = H.dt * double(raw) / eps;
  r.occupation_corrected = H.dt * double(corr) / eps;
  r.inf_y = *std::min_element(y.values.begin(), y.values.end());
  r.residual_raw = std::abs(r.occupation + r.inf_y);
  r.residual = std::abs(r.occupation_corrected + r.inf_y);
  r.half_local_time = r.occupation_corrected / H.c;
  r.remark_residual = std::abs(r.half_local_time + r.inf_y / H.c);
  return r;
}
inline InfIdentity inf_identity_check(const Path& y, const HeightPath& H, double eps) {
  return inf_identity_check(y, H, eps, 2.0 * H.c);
}

struct LampertiReport {
  double clock_horizon = 0.0;
  double clock_step = 0.0;
  std::vector<double> tau;       // tau at clock nodes k * clock_step
  std::vector<double> y;         // X at tau
  double increment_mean = 0.0;
  double increment_variance_per_clock = 0.0;
  std::size_t increments = 0;
};

inline LampertiReport lamperti_check(const Path& x, double clock_step) {
  if (!(clock_step > 0.0)) fail(ErrorKind::DomainError, "clock step must be > 0");
  const std::size_t n = x.values.size();
  if (x.values[0] <= 0.0) fail(ErrorKind::DegeneratePath, "X starts at 0");
  std::vector<double> A(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) A[i] = A[i - 1] + 0.5 * (x.values[i - 1] + x.values[i]) * x.dt;
  LampertiReport r;
  r.clock_step = clock_step;
  r.clock_horizon = A.back();
  const std::size_t K = std::size_t(std::floor(A.back() / clock_step));
  if (K < 2) fail(ErrorKind::DegeneratePath, "additive clock too short");
  std::size_t j = 0;
  for (std::size_t k = 0; k <= K; ++k) {
    const double s = double(k) * clock_step;
    while (j + 2 < n && A[j + 1] <= s) ++j;
    const double span = A[j + 1] - A[j];
    const double w = span > 0.0 ? std::clamp((s - A[j]) / span, 0.0, 1.0) : 0.0;
    r.tau.push_back(x.dt * (double(j) + w));
    r.y.push_back(x.values[j] + w * (x.values[j + 1] - x.values[j]));
  }
  double sum = 0.0, sq = 0.0;
  for (std::size_t k = 0; k + 1 < r.y.size(); ++k) {
    const double d = r.y[k + 1] - r.y[k];
    sum += d;
    sq += d * d;
  }
  r.increments = r.y.size() - 1;
  r.increment_mean = sum / double(r.increments);
  r.increment_variance_per_clock =
      (sq / double(r.increments) - r.increment_mean * r.increment_mean) / clock_step;
  return r;
}

}  // namespace csbp
