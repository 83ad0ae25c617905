#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "csbp/error.hpp"
#include "csbp/measures.hpp"

namespace csbp {

using wide = boost::multiprecision::cpp_bin_float_quad;

struct BranchingMechanism {
  double b = 0.0;
  double c = 0.0;
  JumpMeasure mu;

  BranchingMechanism() = default;
  BranchingMechanism(double b_, double c_, JumpMeasure mu_ = JumpMeasure::empty())
      : b(b_), c(c_), mu(std::move(mu_)) {
    if (!(c >= 0.0)) fail(ErrorKind::DomainError, "c must be >= 0");
  }
};

inline double psi(const BranchingMechanism& m, double lambda) {
  if (lambda < 0.0) fail(ErrorKind::DomainError, "psi requires lambda >= 0");
  return m.b * lambda + m.c * lambda * lambda + big_L(m.mu, lambda);
}

struct RescaleParams {
  int N = 1;
  double alpha = 0.0;
  double beta = 0.0;
  double c = 1.0;

  double lambda_N() const { return c * N + alpha; }
  double mu_N() const { return c * N + beta; }
  double d2() const { return lambda_N() + mu_N(); }
  double b() const { return beta - alpha; }
};

// Every finite-N constant derived from (mu, params).
struct FiniteN {
  RescaleParams p;
  double lambda_N = 0, mu_N = 0, d2 = 0, b = 0;
  double d1 = 0, dN = 0;
  double alpha_minus = 0, alpha_plus = 0;
  double L_N = 0;      // L(N)
  double d1q0 = 0;     // L(N)/N
  double q0 = 0;       // q_0^{1,N}
  double gamma1 = 0;   // d1 (1 - q0)
  double m1 = 0;       // q0 / (1 - q0)
  double aN = 0;       // N + d1 q0 / c

  bool has_jumps() const { return d1 > 0.0; }
  bool has_binary() const { return d2 > 0.0; }
};

inline FiniteN finite_n(const JumpMeasure& mu, const RescaleParams& p) {
  if (p.N < 1) fail(ErrorKind::DomainError, "N must be >= 1");
  if (!(p.alpha >= 0.0 && p.beta >= 0.0 && p.c >= 0.0))
    fail(ErrorKind::DomainError, "alpha, beta, c must be >= 0");
  FiniteN f;
  f.p = p;
  const double N = p.N;
  f.lambda_N = p.lambda_N();
  f.mu_N = p.mu_N();
  f.d2 = p.d2();
  f.b = p.b();
  if (!mu.is_empty()) {
    f.alpha_minus = alpha_minus(mu, N);
    f.alpha_plus = alpha_plus(mu, N);
    f.d1 = d1N(mu, N);
    f.L_N = big_L(mu, N);
  }
  f.dN = f.d1 + f.d2;
  if (f.d1 > 0.0) {
    f.d1q0 = f.L_N / N;
    f.q0 = f.L_N / (N * f.d1);
    f.gamma1 = f.d1 * (1.0 - f.q0);
    f.m1 = f.q0 / (1.0 - f.q0);
  }
  f.aN = p.c > 0.0 ? N + f.d1q0 / p.c : kInf;
  return f;
}

inline double f1N(const JumpMeasure& mu, int N, double s) {
  if (std::abs(s) > 1.0) fail(ErrorKind::DomainError, "|s| must be <= 1");
  const double d1 = d1N(mu, N);
  if (!(d1 > 0.0)) fail(ErrorKind::DegenerateMeasure, "d1N = 0: f1N undefined");
  if (s == 1.0) return 1.0;
  return s + big_L(mu, N * (1.0 - s)) / (N * d1);
}

inline double f2N(const RescaleParams& p, double s) {
  if (std::abs(s) > 1.0) fail(ErrorKind::DomainError, "|s| must be <= 1");
  if (!(p.d2() > 0.0)) fail(ErrorKind::DegenerateMeasure, "d2N = 0: f2N undefined");
  return (p.mu_N() + p.lambda_N() * s * s) / p.d2();
}

namespace detail {

inline wide hN_wide(const JumpMeasure& mu, const FiniteN& k, const wide& s) {
  const wide N = k.p.N;
  wide num = 0;
  if (k.has_jumps()) {
    const double Lv = big_L(mu, static_cast<double>(N * (1 - s)));
    const wide f1 = s + wide(Lv) / (N * wide(k.d1));
    num += wide(k.d1) * f1;
  }
  if (k.has_binary()) num += wide(k.mu_N) + wide(k.lambda_N) * s * s;
  return num / wide(k.dN);
}

}  // namespace detail

inline double hN(const JumpMeasure& mu, const FiniteN& k, double s) {
  if (std::abs(s) > 1.0) fail(ErrorKind::DomainError, "|s| must be <= 1");
  if (!(k.dN > 0.0)) fail(ErrorKind::DegenerateMeasure, "dN = 0");
  if (s == 1.0) return 1.0;
  return static_cast<double>(detail::hN_wide(mu, k, wide(s)));
}
inline double hN(const JumpMeasure& mu, const RescaleParams& p, double s) { return hN(mu, finite_n(mu, p), s); }

inline double PhiN(const JumpMeasure& mu, const FiniteN& k, double s) {
  if (s == 1.0) return 0.0;
  const wide ws(s);
  return static_cast<double>(wide(k.dN) * (detail::hN_wide(mu, k, ws) - ws));
}
inline double PhiN(const JumpMeasure& mu, const RescaleParams& p, double s) {
  return PhiN(mu, finite_n(mu, p), s);
}

// Generating-function route: N d_N (h_N(1 - u/N) - (1 - u/N)).
inline double psiN_generating(const JumpMeasure& mu, const FiniteN& k, double u) {
  const double N = k.p.N;
  if (u < 0.0 || u > N) fail(ErrorKind::DomainError, "psiN requires 0 <= u <= N");
  if (u == 0.0) return 0.0;
  const wide s = 1 - wide(u) / wide(N);
  return static_cast<double>(wide(N) * wide(k.dN) * (detail::hN_wide(mu, k, s) - s));
}

// Closed route: L(u) + b u + c u^2 + alpha u^2 / N.
inline double psiN_closed(const JumpMeasure& mu, const FiniteN& k, double u) {
  const double N = k.p.N;
  if (u < 0.0 || u > N) fail(ErrorKind::DomainError, "psiN requires 0 <= u <= N");
  return big_L(mu, u) + k.b * u + k.p.c * u * u + k.p.alpha * u * u / N;
}

struct PsiNValue {
  double generating = 0.0;
  double closed = 0.0;
  double relative_gap() const {
    const double scale = std::max(std::abs(closed), 1e-300);
    return std::abs(generating - closed) / scale;
  }
};

inline PsiNValue psiN(const JumpMeasure& mu, const FiniteN& k, double u) {
  return {psiN_generating(mu, k, u), psiN_closed(mu, k, u)};
}
inline PsiNValue psiN(const JumpMeasure& mu, const RescaleParams& p, double u) {
  return psiN(mu, finite_n(mu, p), u);
}

// ---------------------------------------------------------------------------
// Stable-mixture special case.

struct MixtureAtom {
  double gamma = 1.5;
  double weight = 1.0;
  double C = 1.0;
};

class SpecialCase {
 public:
  static constexpr double C2 = 0.5;

  explicit SpecialCase(std::vector<MixtureAtom> m) : m_(std::move(m)) {
    if (m_.empty()) fail(ErrorKind::DomainError, "special case needs at least one gamma");
    double wsum = 0.0;
    for (const auto& a : m_) {
      if (!(a.gamma > 1.0 && a.gamma < 2.0)) fail(ErrorKind::DomainError, "gamma must lie in (1,2)");
      if (!(a.weight > 0.0 && a.C > 0.0)) fail(ErrorKind::DomainError, "weights and C must be positive");
      wsum += a.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12) fail(ErrorKind::DomainError, "weights must sum to 1");
    condition_ = 0.0;
    for (const auto& a : m_)
      condition_ += a.C * a.gamma * (a.gamma - 1.0) / ((2.0 - a.gamma) * std::tgamma(2.0 - a.gamma)) * a.weight;
    if (!std::isfinite(condition_)) fail(ErrorKind::ConditionViolation, "mixture condition diverges");
  }

  double condition_integral() const { return condition_; }

  double rho(double N) const {
    double s = 0.0;
    for (const auto& a : m_) s += a.C * a.gamma * std::pow(N, a.gamma - 1.0) * a.weight;
    return s + C2 * 2.0 * N;
  }

  static double f_gamma(double g, double s) { return s + std::pow(1.0 - s, g) / g; }
  static double f_two(double s) { return (1.0 + s * s) / 2.0; }

  double hbar(double N, double s) const { return static_cast<double>(hbar_wide(N, wide(s))); }

  // Generating-function route N rho_N (hbar_N(1-u/N) - (1-u/N)).
  double psibar(double N, double u) const {
    if (u < 0.0 || u > N) fail(ErrorKind::DomainError, "psibar requires 0 <= u <= N");
    const wide s = 1 - wide(u) / wide(N);
    return static_cast<double>(wide(N) * wide(rho(N)) * (hbar_wide(N, s) - s));
  }

  // Jump component by its own algebra: N sum C gamma N^{gamma-1} w (u/N)^gamma / gamma.
  double psibar1(double N, double u) const {
    double s = 0.0;
    for (const auto& a : m_)
      s += N * a.C * a.gamma * std::pow(N, a.gamma - 1.0) * a.weight * std::pow(u / N, a.gamma) / a.gamma;
    return s;
  }

  // Binary component: N * (C2 2 N) * (f2(s) - s) = N^2 (1-s)^2 / 2.
  double psibar2(double N, double u) const {
    const double x = u / N;
    return N * (C2 * 2.0 * N) * (x * x / 2.0);
  }

  double psibar1_limit(double u) const {
    double s = 0.0;
    for (const auto& a : m_) s += a.C * std::pow(u, a.gamma) * a.weight;
    return s;
  }

  JumpMeasure mu_mix(QuadratureSpec q = {}) const {
    std::vector<MixtureComponent> comps;
    for (const auto& a : m_) comps.push_back({a.gamma, a.weight, a.C});
    return JumpMeasure::stable_mixture(std::move(comps), q);
  }

  const std::vector<MixtureAtom>& components() const { return m_; }

 private:
  wide hbar_wide(double N, const wide& s) const {
    wide num = 0;
    for (const auto& a : m_) {
      const wide one_minus = 1 - s;
      const double pw = std::pow(static_cast<double>(one_minus), a.gamma);
      num += wide(a.C * a.gamma * std::pow(N, a.gamma - 1.0) * a.weight) * (s + wide(pw) / wide(a.gamma));
    }
    num += wide(C2 * 2.0 * N) * (1 + s * s) / 2;
    return num / wide(rho(N));
  }

  std::vector<MixtureAtom> m_;
  double condition_ = 0.0;
};

// ---------------------------------------------------------------------------
// Laplace-functional ODE.

struct LaplaceSolution {
  double lambda = 0.0;
  double h = 0.0;
  std::vector<double> values;
  double internal_step = 0.0;
  double error_estimate = 0.0;

  double T() const { return h * double(values.size() - 1); }
  double at_node(std::size_t i) const { return values.at(i); }
  double at(double t) const {
    const double x = t / h;
    const double n = std::round(x);
    if (std::abs(x - n) < 1e-9) return values.at(std::size_t(n));
    const std::size_t i = std::min(std::size_t(x), values.size() - 2);
    const double w = x - double(i);
    return values[i] * (1.0 - w) + values[i + 1] * w;
  }
  double back() const { return values.back(); }
};

struct SolverOptions {
  double tolerance = 1e-8;
  int max_halvings = 14;
};

// Classical RK4 for du/dt = -rate(u) on [0,T] with Richardson step halving.
template <class Rate>
LaplaceSolution solve_flow(Rate&& rate, double u0, double lambda, double T, double h, double upper,
                           SolverOptions opt = {}) {
  if (!(T >= 0.0) || !(h > 0.0)) fail(ErrorKind::DomainError, "T >= 0 and h > 0 required");
  const std::size_t n = T == 0.0 ? 0 : std::max<std::size_t>(1, std::size_t(std::llround(std::ceil(T / h - 1e-9))));
  LaplaceSolution sol;
  sol.lambda = lambda;
  sol.h = n == 0 ? h : T / double(n);
  if (n == 0) {
    sol.values = {u0};
    return sol;
  }
  auto clamp = [&](double u) {
    if (u < -opt.tolerance) fail(ErrorKind::NegativeExcursion, "iterate below zero: " + num(u));
    return std::clamp(u, 0.0, upper);
  };
  auto run = [&](int sub) {
    const double dt = sol.h / double(sub);
    std::vector<double> out(n + 1);
    double u = u0;
    out[0] = u;
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < sub; ++j) {
        const double k1 = -rate(clamp(u));
        const double k2 = -rate(clamp(u + 0.5 * dt * k1));
        const double k3 = -rate(clamp(u + 0.5 * dt * k2));
        const double k4 = -rate(clamp(u + dt * k3));
        u = clamp(u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
      }
      out[i + 1] = u;
    }
    return out;
  };
  int sub = 1;
  std::vector<double> coarse = run(sub);
  for (int level = 0; level <= opt.max_halvings; ++level) {
    std::vector<double> fine = run(2 * sub);
    double err = 0.0;
    for (std::size_t i = 0; i <= n; ++i) err = std::max(err, std::abs(fine[i] - coarse[i]) / 15.0);
    if (err <= opt.tolerance) {
      sol.values = std::move(fine);
      sol.internal_step = sol.h / double(2 * sub);
      sol.error_estimate = err;
      return sol;
    }
    coarse = std::move(fine);
    sub *= 2;
  }
  fail(ErrorKind::StepFailure, "Richardson estimate above tolerance after max halvings");
}

inline LaplaceSolution solve_ut(const BranchingMechanism& m, double lambda, double T, double h,
                                SolverOptions opt = {}) {
  if (lambda < 0.0) fail(ErrorKind::DomainError, "lambda must be >= 0");
  const double upper = lambda * std::exp(std::abs(m.b) * T);
  return solve_flow([&](double u) { return psi(m, u); }, lambda, lambda, T, h, upper, opt);
}

inline LaplaceSolution solve_utN(const JumpMeasure& mu, const RescaleParams& p, double lambda, double T,
                                 double h, SolverOptions opt = {}) {
  if (lambda < 0.0) fail(ErrorKind::DomainError, "lambda must be >= 0");
  const FiniteN k = finite_n(mu, p);
  const double N = p.N;
  const double u0 = -N * std::expm1(-lambda / N);
  return solve_flow([&](double u) { return psiN_generating(mu, k, u); }, u0, lambda, T, h, N, opt);
}

inline double csbp_laplace(const BranchingMechanism& m, double x, double lambda, double t, double h = 1e-3) {
  if (x < 0.0) fail(ErrorKind::DomainError, "x must be >= 0");
  if (x == 0.0) return 1.0;
  if (t == 0.0) return std::exp(-x * lambda);
  return std::exp(-x * solve_ut(m, lambda, t, std::min(h, t)).back());
}

}  // namespace csbp
