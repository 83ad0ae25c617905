#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "csbp/error.hpp"
#include "csbp/measures.hpp"
#include "csbp/mechanism.hpp"
#include "csbp/rng.hpp"

namespace csbp {

// Finite law on {offset, ..., offset + size - 1} with a declared tail mass bound,
// sampled in O(1) through Walker's alias table (Vose construction).
class DiscreteLaw {
 public:
  DiscreteLaw() = default;
  DiscreteLaw(std::vector<double> weights, double tail_bound, int offset = 0)
      : weights_(std::move(weights)), tail_(tail_bound), offset_(offset) {
    if (weights_.empty()) fail(ErrorKind::DomainError, "empty law");
    for (double w : weights_)
      if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorKind::DomainError, "negative or non-finite weight");
    build_alias();
  }

  int offset() const { return offset_; }
  int cutoff() const { return offset_ + int(weights_.size()) - 1; }
  double tail_bound() const { return tail_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(int k) const {
    const int i = k - offset_;
    return (i < 0 || i >= int(weights_.size())) ? 0.0 : weights_[std::size_t(i)];
  }
  double mass() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }
  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) m += double(offset_ + int(i)) * weights_[i];
    return m;
  }
  double pgf(double s) const {
    double v = 0.0, p = std::pow(s, offset_);
    for (double w : weights_) {
      v += w * p;
      p *= s;
    }
    return v;
  }

  int sample(RandomStream& rng) const { return sample_u(rng.uniform()); }

  int sample_u(double u) const {
    const double x = u * double(prob_.size());
    std::size_t i = std::min(std::size_t(x), prob_.size() - 1);
    const double frac = x - double(i);
    return offset_ + int(frac < prob_[i] ? i : alias_[i]);
  }

 private:
  void build_alias() {
    const std::size_t n = weights_.size();
    const double total = mass();
    if (!(total > 0.0)) fail(ErrorKind::DomainError, "law has zero mass");
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = weights_[i] * double(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back(), l = large.back();
      small.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (std::size_t i : large) prob_[i] = 1.0, alias_[i] = i;
    for (std::size_t i : small) prob_[i] = 1.0, alias_[i] = i;
  }

  std::vector<double> weights_;
  double tail_ = 0.0;
  int offset_ = 0;
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

struct DecompositionOptions {
  double tail_tol = 1e-13;
  int budget = 5'000'000;
  bool allow_binary_only = false;
};

struct OffspringDecomposition {
  FiniteN k;
  // Laws of the jump components q^{-,N}, q^{+,N}, q^{1,N} on {0,...,K}.
  std::optional<DiscreteLaw> q_minus, q_plus, q1;
  std::optional<DiscreteLaw> q2;  // {0,2}-valued binary law
  double p_eps1 = 0.0;            // P(eps_N = 1) = d1/dN
  double p_eps_tilde1 = 0.0;      // alpha_+/d1
  double p_eps_hat1 = 0.0;        // alpha_+(1-q0^+)/(d1(1-q0))
  std::optional<DiscreteLaw> p1, p_minus, p_plus;  // Lambda laws on {1,...}
  double q0 = 0.0, q0_minus = 0.0, q0_plus = 0.0;
  double m1 = 0.0, gamma1 = 0.0;
  double tail_q1 = 0.0;           // certified bound on sum_{k>K} q_k^{1,N}
  int K = 0;
  JumpMeasure mu;

  bool has_jumps() const { return q1.has_value(); }
};

namespace detail {

inline int find_cutoff(const std::function<double(int)>& tail, double tol, int budget) {
  if (tail(2) < tol) return 2;
  int lo = 2, hi = 4;
  while (tail(hi) >= tol) {
    if (hi >= budget) fail(ErrorKind::TailBoundFailure, "support cutoff exceeds budget");
    lo = hi;
    hi = std::min(2 * hi, budget);
  }
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    (tail(mid) < tol ? hi : lo) = mid;
  }
  return hi;
}

inline DiscreteLaw lambda_law(const DiscreteLaw& q, double q0) {
  const auto& w = q.weights();
  std::vector<double> p;
  for (std::size_t j = 2; j < w.size(); ++j) p.push_back(w[j] / (1.0 - q0));
  if (p.empty()) p.push_back(0.0);
  return DiscreteLaw(std::move(p), q.tail_bound() / (1.0 - q0), 1);
}

}  // namespace detail

inline OffspringDecomposition build_decomposition(const JumpMeasure& mu, const RescaleParams& params,
                                                  DecompositionOptions opt = {}) {
  if (!(opt.tail_tol > 0.0)) fail(ErrorKind::DomainError, "tail_tol must be > 0");
  OffspringDecomposition d;
  d.mu = mu;
  d.k = finite_n(mu, params);
  const FiniteN& k = d.k;
  const double N = params.N;
  if (k.has_binary()) d.q2 = DiscreteLaw({k.mu_N / k.d2, 0.0, k.lambda_N / k.d2}, 0.0, 0);
  if (!k.has_jumps()) {
    if (!opt.allow_binary_only) fail(ErrorKind::DegenerateMeasure, "d1N = 0: no jump component");
    if (!k.has_binary()) fail(ErrorKind::DegenerateMeasure, "dN = 0");
    return d;
  }
  d.p_eps1 = k.d1 / k.dN;
  d.p_eps_tilde1 = k.alpha_plus / k.d1;

  const Interval minus = Interval::unit(), plus = Interval::above_one();
  // sum_{k>K} k q_k^{side} = int r P(Poisson(N r) > K - 1) mu(dr) / alpha_side
  auto side_tail = [&](const Interval& dom, double alpha) {
    return [&, dom, alpha](int K) { return poisson_tail_moment(mu, N, K - 1, dom) / alpha; };
  };
  int K = 2;
  if (k.alpha_minus > 0.0) K = std::max(K, detail::find_cutoff(side_tail(minus, k.alpha_minus), opt.tail_tol, opt.budget));
  if (k.alpha_plus > 0.0) K = std::max(K, detail::find_cutoff(side_tail(plus, k.alpha_plus), opt.tail_tol, opt.budget));
  d.K = K;

  std::vector<double> wm(std::size_t(K) + 1, 0.0), wp(std::size_t(K) + 1, 0.0);
  for (int j = 2; j <= K; ++j) {
    if (k.alpha_minus > 0.0) wm[std::size_t(j)] = poisson_weight(mu, N, j, minus);
    if (k.alpha_plus > 0.0) wp[std::size_t(j)] = poisson_weight(mu, N, j, plus);
  }

  if (k.alpha_minus > 0.0) {
    const double Lm = big_L_minus(mu, N);
    d.q0_minus = Lm / (N * k.alpha_minus);
    std::vector<double> q(std::size_t(K) + 1, 0.0);
    q[0] = d.q0_minus;
    for (int j = 2; j <= K; ++j) q[std::size_t(j)] = wm[std::size_t(j)] / (N * k.alpha_minus);
    const double tail = poisson_tail_weight(mu, N, K, minus) / (N * k.alpha_minus);
    d.q_minus = DiscreteLaw(std::move(q), tail, 0);
    d.p_minus = detail::lambda_law(*d.q_minus, d.q0_minus);
  }
  if (k.alpha_plus > 0.0) {
    const double Lp = big_L_plus(mu, N);
    d.q0_plus = Lp / (N * k.alpha_plus);
    std::vector<double> q(std::size_t(K) + 1, 0.0);
    q[0] = d.q0_plus;
    for (int j = 2; j <= K; ++j) q[std::size_t(j)] = wp[std::size_t(j)] / (N * k.alpha_plus);
    const double tail = poisson_tail_weight(mu, N, K, plus) / (N * k.alpha_plus);
    d.q_plus = DiscreteLaw(std::move(q), tail, 0);
    d.p_plus = detail::lambda_law(*d.q_plus, d.q0_plus);
  }

  d.q0 = k.q0;
  d.m1 = k.m1;
  d.gamma1 = k.gamma1;
  std::vector<double> q(std::size_t(K) + 1, 0.0);
  q[0] = k.q0;
  for (int j = 2; j <= K; ++j) q[std::size_t(j)] = (wm[std::size_t(j)] + wp[std::size_t(j)]) / (N * k.d1);
  d.tail_q1 = poisson_tail_weight(mu, N, K) / (N * k.d1);
  d.q1 = DiscreteLaw(std::move(q), d.tail_q1, 0);
  d.p1 = detail::lambda_law(*d.q1, k.q0);
  d.p_eps_hat1 = k.alpha_plus > 0.0 ? k.alpha_plus * (1.0 - d.q0_plus) / (k.d1 * (1.0 - k.q0)) : 0.0;
  return d;
}

// Draw of eta_N: the indicator and the binary component share one uniform.
inline int sample_eta(const OffspringDecomposition& d, RandomStream& rng) {
  const double u = rng.uniform();
  if (d.has_jumps() && u < d.p_eps1) return d.q1->sample(rng);
  const double v = d.has_jumps() ? (u - d.p_eps1) / (1.0 - d.p_eps1) : u;
  return v < d.k.mu_N / d.k.d2 ? 0 : 2;
}

inline int sample_lambda(const OffspringDecomposition& d, RandomStream& rng) {
  if (!d.p1) fail(ErrorKind::DegenerateMeasure, "no jump component");
  return d.p1->sample(rng);
}

// Same law through the (eps_hat, Gamma^+, Gamma^-) representation.
inline int sample_lambda_mixture(const OffspringDecomposition& d, RandomStream& rng) {
  if (!d.p1) fail(ErrorKind::DegenerateMeasure, "no jump component");
  const double u = rng.uniform();
  if (u < d.p_eps_hat1) return d.p_plus->sample(rng);
  return d.p_minus->sample(rng);
}

struct PiTilde {
  double N = 1.0;
  std::vector<double> locations;  // k/N
  std::vector<double> masses;     // N gamma1 p_k
  double moment_tail = 0.0;       // bound on the omitted part of int z dpi
  double total_mass() const { return std::accumulate(masses.begin(), masses.end(), 0.0); }
};

inline PiTilde pi_tilde(const OffspringDecomposition& d) {
  if (!d.p1) fail(ErrorKind::DegenerateMeasure, "no jump component");
  PiTilde pt;
  const double N = d.k.p.N;
  pt.N = N;
  const auto& w = d.p1->weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    pt.locations.push_back(double(d.p1->offset() + int(i)) / N);
    pt.masses.push_back(N * d.gamma1 * w[i]);
  }
  pt.moment_tail = poisson_tail_moment(d.mu, N, d.p1->cutoff());
  return pt;
}

struct TailedValue {
  double value = 0.0;
  double tail_bound = 0.0;
};

// Sum of phi(k/N) mass_k; |phi(z)| <= growth * z is required for the tail bound.
inline TailedValue pi_tilde_apply(const PiTilde& pt, const std::function<double(double)>& phi,
                                  double growth = 1.0) {
  TailedValue r;
  for (std::size_t i = 0; i < pt.masses.size(); ++i) {
    const double z = pt.locations[i], v = phi(z);
    if (std::abs(v) > growth * z * (1.0 + 1e-12))
      fail(ErrorKind::TailBoundFailure, "phi grows faster than the declared linear bound");
    r.value += v * pt.masses[i];
  }
  r.tail_bound = growth * pt.moment_tail;
  return r;
}

}  // namespace csbp
