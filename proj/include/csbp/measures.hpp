#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "csbp/error.hpp"

namespace csbp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QuadratureSpec {
  double rel_tol = 1e-10;
  double abs_tol = 1e-16;
  int max_subdivisions = 15;
  double split = 1.0;
};

// Interval with explicit endpoint closure; atoms exactly at an endpoint are
// included only when that end is closed.
struct Interval {
  double lo = 0.0;
  double hi = kInf;
  bool lo_closed = false;
  bool hi_closed = false;

  static Interval positive() { return {0.0, kInf, false, false}; }
  static Interval unit() { return {0.0, 1.0, false, true}; }
  static Interval above_one() { return {1.0, kInf, false, false}; }
  static Interval at_least(double a) { return {a, kInf, true, false}; }
  static Interval below(double a) { return {0.0, a, false, false}; }

  bool contains(double r) const {
    const bool lo_ok = lo_closed ? r >= lo : r > lo;
    const bool hi_ok = hi_closed ? r <= hi : r < hi;
    return lo_ok && hi_ok;
  }
  bool empty() const { return hi < lo || (hi == lo && !(lo_closed && hi_closed)); }
};

// e^{-x} - 1 + x, accurate for small x.
inline double lkernel(double x) {
  if (std::abs(x) < 1e-2) {
    double term = x * x / 2.0, sum = 0.0;
    for (int n = 2; n < 12; ++n) {
      sum += term;
      term *= -x / double(n + 1);
    }
    return sum;
  }
  return std::expm1(-x) + x;
}

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

struct AtomicFamily {
  std::vector<Atom> atoms;
};

// density scale * r^{-gamma-1} on (lower, inf)
struct StableFamily {
  double gamma = 1.5;
  double scale = 1.0;
  double lower = 0.0;
};

// density scale * r^{-gamma-1} e^{-tilt r} on (lower, inf)
struct TemperedStableFamily {
  double gamma = 1.5;
  double tilt = 1.0;
  double scale = 1.0;
  double lower = 0.0;
};

struct MixtureComponent {
  double gamma = 1.5;
  double weight = 1.0;
  double coefficient = 1.0;
};

// density sum_j C_j gamma_j (gamma_j - 1) / Gamma(2 - gamma_j) w_j r^{-gamma_j-1}
struct StableMixtureFamily {
  std::vector<MixtureComponent> components;
};

// piecewise-linear density on [r.front(), r.back()], zero elsewhere
struct TabulatedFamily {
  std::vector<double> r;
  std::vector<double> density;
};

using Family = std::variant<AtomicFamily, StableFamily, TemperedStableFamily, StableMixtureFamily,
                            TabulatedFamily>;

inline double unit_stable_scale(double gamma) {
  return gamma * (gamma - 1.0) / std::tgamma(2.0 - gamma);
}

struct Integrand {
  enum class Kind { Generic, Monomial, Exponential, LKernel, D1Kernel, PoissonKernel, PoissonTail, PoissonTailMoment, MinR, MaxR };

  Kind kind = Kind::Generic;
  double a = 0.0;  // exponent, rate u, or N
  int k = 0;
  double log_norm = 0.0;
  std::function<double(double)> fn;

  static Integrand make(Kind kind, double a, int k = 0) {
    Integrand g;
    g.kind = kind;
    g.a = a;
    g.k = k;
    return g;
  }
  static Integrand generic(std::function<double(double)> f) {
    Integrand g;
    g.fn = std::move(f);
    return g;
  }
  static Integrand monomial(double p) { return make(Kind::Monomial, p); }
  static Integrand exponential(double u) { return make(Kind::Exponential, u); }
  static Integrand l_kernel(double u) { return make(Kind::LKernel, u); }
  static Integrand d1_kernel(double n) { return make(Kind::D1Kernel, n); }
  static Integrand min_r() { return make(Kind::MinR, 0.0); }
  static Integrand max_r(double p) { return make(Kind::MaxR, p); }
  // (N r)^k e^{-N r} / k!
  static Integrand poisson_kernel(double n, int k) {
    Integrand g = make(Kind::PoissonKernel, n, k);
    g.log_norm = std::lgamma(double(k) + 1.0);
    return g;
  }

  // P(Poisson(N r) > K) and r P(Poisson(N r) > K)
  static Integrand poisson_tail(double n, int K) { return make(Kind::PoissonTail, n, K); }
  static Integrand poisson_tail_moment(double n, int K) { return make(Kind::PoissonTailMoment, n, K); }

  double operator()(double r) const {
    switch (kind) {
      case Kind::PoissonTail: return r > 0.0 ? boost::math::gamma_p(double(k) + 1.0, a * r) : 0.0;
      case Kind::PoissonTailMoment: return r > 0.0 ? r * boost::math::gamma_p(double(k) + 1.0, a * r) : 0.0;
      case Kind::Generic: return fn(r);
      case Kind::Monomial: return std::pow(r, a);
      case Kind::Exponential: return std::exp(-a * r);
      case Kind::LKernel: return lkernel(a * r);
      case Kind::D1Kernel: return -r * std::expm1(-a * r);
      case Kind::PoissonKernel: {
        if (r <= 0.0) return 0.0;
        const double x = a * r;
        return std::exp(double(k) * std::log(x) - x - log_norm);
      }
      case Kind::MinR: return r < 1.0 ? r * r : r;
      case Kind::MaxR: return r < 1.0 ? r : std::pow(r, a);
    }
    return 0.0;
  }

  // Points where the integrand changes scale; used to split quadrature pieces.
  std::vector<double> scale_points() const {
    switch (kind) {
      case Kind::Exponential:
      case Kind::LKernel:
      case Kind::D1Kernel:
        if (a > 0.0) return {1.0 / a, 10.0 / a, 100.0 / a};
        return {};
      case Kind::PoissonKernel: {
        const double m = double(k) + 1.0, sd = std::sqrt(m);
        return {std::max(0.0, m - 3.0 * sd) / a, m / a, (m + 3.0 * sd) / a};
      }
      case Kind::PoissonTail:
      case Kind::PoissonTailMoment: {
        const double m = double(k) + 1.0, sd = std::sqrt(m);
        return {std::max(0.0, m - 3.0 * sd) / a, m / a, (m + 3.0 * sd) / a, (m + 10.0 * sd) / a};
      }
      default: return {};
    }
  }

  // Finite window outside which the integrand is negligible, if any.
  std::optional<Interval> window() const {
    const double m = double(k) + 1.0, sd = std::sqrt(m);
    if (kind == Kind::PoissonTail || kind == Kind::PoissonTailMoment)
      return Interval{std::max(0.0, m - 14.0 * sd - 60.0) / a, kInf, true, false};
    if (kind != Kind::PoissonKernel) return std::nullopt;
    return Interval{std::max(0.0, m - 14.0 * sd) / a, (m + 14.0 * sd + 60.0) / a, true, true};
  }
};

class JumpMeasure;
double integrate(const JumpMeasure& mu, const Integrand& phi, Interval domain);
double integrate_quadrature(const JumpMeasure& mu, const Integrand& phi, Interval domain);

class JumpMeasure {
 public:
  JumpMeasure() : family_(AtomicFamily{}) {}
  explicit JumpMeasure(Family family, QuadratureSpec quad = {})
      : family_(std::move(family)), quad_(quad) {
    validate();
    if (!is_empty()) {
      admissibility_ = integrate(*this, Integrand::min_r(), Interval::positive());
      if (!std::isfinite(admissibility_))
        fail(ErrorKind::NonIntegrable, "integral of min(r, r^2) diverges");
    }
  }

  static JumpMeasure empty() { return JumpMeasure(); }
  static JumpMeasure atomic(std::vector<Atom> atoms, QuadratureSpec q = {}) {
    return JumpMeasure(AtomicFamily{std::move(atoms)}, q);
  }
  static JumpMeasure stable(double gamma, double scale, double lower = 0.0, QuadratureSpec q = {}) {
    return JumpMeasure(StableFamily{gamma, scale, lower}, q);
  }
  // Normalized so that L(u) = u^gamma.
  static JumpMeasure unit_stable(double gamma, QuadratureSpec q = {}) {
    return stable(gamma, unit_stable_scale(gamma), 0.0, q);
  }
  static JumpMeasure tempered_stable(double gamma, double tilt, double scale, double lower = 0.0,
                                     QuadratureSpec q = {}) {
    return JumpMeasure(TemperedStableFamily{gamma, tilt, scale, lower}, q);
  }
  static JumpMeasure stable_mixture(std::vector<MixtureComponent> c, QuadratureSpec q = {}) {
    return JumpMeasure(StableMixtureFamily{std::move(c)}, q);
  }
  static JumpMeasure tabulated(std::vector<double> r, std::vector<double> d, QuadratureSpec q = {}) {
    return JumpMeasure(TabulatedFamily{std::move(r), std::move(d)}, q);
  }

  const Family& family() const { return family_; }
  const QuadratureSpec& quadrature() const { return quad_; }

  bool is_atomic() const { return std::holds_alternative<AtomicFamily>(family_); }
  bool is_empty() const {
    const auto* a = std::get_if<AtomicFamily>(&family_);
    return a && a->atoms.empty();
  }
  const std::vector<Atom>& atoms() const { return std::get<AtomicFamily>(family_).atoms; }

  double support_lo() const {
    return std::visit(
        [](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, AtomicFamily>) {
            double m = kInf;
            for (const auto& a : f.atoms) m = std::min(m, a.location);
            return m;
          } else if constexpr (std::is_same_v<F, StableFamily> ||
                               std::is_same_v<F, TemperedStableFamily>) {
            return f.lower;
          } else if constexpr (std::is_same_v<F, StableMixtureFamily>) {
            return 0.0;
          } else {
            return f.r.front();
          }
        },
        family_);
  }
  double support_hi() const {
    if (const auto* t = std::get_if<TabulatedFamily>(&family_)) return t->r.back();
    if (const auto* a = std::get_if<AtomicFamily>(&family_)) {
      double m = 0.0;
      for (const auto& x : a->atoms) m = std::max(m, x.location);
      return m;
    }
    return kInf;
  }
  // Density with a non-integrable r^{-gamma-1} singularity reaching 0.
  bool singular_at_zero() const { return !is_atomic() && !is_tabulated() && support_lo() == 0.0; }
  bool is_tabulated() const { return std::holds_alternative<TabulatedFamily>(family_); }

  double density(double r) const {
    return std::visit(
        [r](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, AtomicFamily>) {
            return 0.0;
          } else if constexpr (std::is_same_v<F, StableFamily>) {
            return r > f.lower ? f.scale * std::pow(r, -f.gamma - 1.0) : 0.0;
          } else if constexpr (std::is_same_v<F, TemperedStableFamily>) {
            return r > f.lower ? f.scale * std::pow(r, -f.gamma - 1.0) * std::exp(-f.tilt * r) : 0.0;
          } else if constexpr (std::is_same_v<F, StableMixtureFamily>) {
            double s = 0.0;
            for (const auto& c : f.components)
              s += c.coefficient * unit_stable_scale(c.gamma) * c.weight * std::pow(r, -c.gamma - 1.0);
            return s;
          } else {
            if (r < f.r.front() || r > f.r.back()) return 0.0;
            auto it = std::upper_bound(f.r.begin(), f.r.end(), r);
            if (it == f.r.end()) return f.density.back();
            const std::size_t j = std::size_t(it - f.r.begin());
            const double t = (r - f.r[j - 1]) / (f.r[j] - f.r[j - 1]);
            return f.density[j - 1] + t * (f.density[j] - f.density[j - 1]);
          }
        },
        family_);
  }

  // log density for the power-law families, used where the density overflows.
  double log_density(double r) const {
    return std::visit(
        [r](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          const double lr = std::log(r);
          if constexpr (std::is_same_v<F, StableFamily>) {
            return r > f.lower ? std::log(f.scale) - (f.gamma + 1.0) * lr : -kInf;
          } else if constexpr (std::is_same_v<F, TemperedStableFamily>) {
            return r > f.lower ? std::log(f.scale) - (f.gamma + 1.0) * lr - f.tilt * r : -kInf;
          } else if constexpr (std::is_same_v<F, StableMixtureFamily>) {
            std::vector<double> t;
            for (const auto& c : f.components)
              t.push_back(std::log(c.coefficient * unit_stable_scale(c.gamma) * c.weight) - (c.gamma + 1.0) * lr);
            const double m = *std::max_element(t.begin(), t.end());
            double s = 0.0;
            for (double x : t) s += std::exp(x - m);
            return m + std::log(s);
          } else {
            return std::log(0.0);
          }
        },
        family_);
  }

  // Interior nodes where the density is only piecewise smooth.
  std::vector<double> density_nodes() const {
    if (const auto* t = std::get_if<TabulatedFamily>(&family_)) return t->r;
    return {};
  }

  // The integral of min(r, r^2), computed at construction.
  double admissibility() const { return admissibility_; }

  double first_moment() const { return integrate(*this, Integrand::monomial(1.0), Interval::positive()); }

  // Integral of max(r, r^p); throws HypothesisViolation when infinite.
  double requires_H(double p) const {
    if (!(p > 1.0 && p < 2.0)) fail(ErrorKind::DomainError, "p must lie in (1,2)");
    double v = kInf;
    try {
      v = integrate(*this, Integrand::max_r(p), Interval::positive());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonIntegrable) throw;
    }
    if (!std::isfinite(v))
      fail(ErrorKind::HypothesisViolation, "integral of max(r, r^p) diverges for p=" + num(p));
    return v;
  }

  // For tabulated densities: estimated first moment omitted beyond the last node,
  // from a power-law fit through the last two nodes (infinite if the fit decays
  // slower than r^{-2}).
  double truncation_bound() const {
    const auto* t = std::get_if<TabulatedFamily>(&family_);
    if (!t) return 0.0;
    const std::size_t n = t->r.size();
    const double d1 = t->density[n - 2], d2 = t->density[n - 1];
    if (d2 <= 0.0) return 0.0;
    const double kappa = -std::log(d2 / d1) / std::log(t->r[n - 1] / t->r[n - 2]);
    if (!(kappa > 2.0)) return kInf;
    return d2 * t->r[n - 1] * t->r[n - 1] / (kappa - 2.0);
  }

 private:
  void validate() const {
    auto gamma_ok = [](double g) { return g > 1.0 && g < 2.0; };
    std::visit(
        [&](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, AtomicFamily>) {
            for (const auto& a : f.atoms)
              if (!(a.location > 0.0 && a.mass > 0.0 && std::isfinite(a.location) && std::isfinite(a.mass)))
                fail(ErrorKind::DomainError, "atoms need positive finite location and mass");
          } else if constexpr (std::is_same_v<F, StableFamily>) {
            if (!gamma_ok(f.gamma) || !(f.scale > 0.0) || !(f.lower >= 0.0))
              fail(ErrorKind::DomainError, "stable: gamma in (1,2), scale > 0, lower >= 0");
          } else if constexpr (std::is_same_v<F, TemperedStableFamily>) {
            if (!gamma_ok(f.gamma) || !(f.tilt > 0.0) || !(f.scale > 0.0) || !(f.lower >= 0.0))
              fail(ErrorKind::DomainError, "tempered_stable: gamma in (1,2), tilt > 0, scale > 0");
          } else if constexpr (std::is_same_v<F, StableMixtureFamily>) {
            if (f.components.empty()) fail(ErrorKind::DomainError, "stable_mixture: no components");
            for (const auto& c : f.components)
              if (!gamma_ok(c.gamma) || !(c.weight > 0.0) || !(c.coefficient > 0.0))
                fail(ErrorKind::DomainError, "stable_mixture: gamma in (1,2), weight and C positive");
          } else {
            if (f.r.size() < 2 || f.r.size() != f.density.size())
              fail(ErrorKind::DomainError, "tabulated: need >= 2 matching nodes");
            if (!(f.r.front() > 0.0)) fail(ErrorKind::DomainError, "tabulated: nodes must be > 0");
            for (std::size_t i = 0; i < f.r.size(); ++i) {
              if (!(f.density[i] > 0.0)) fail(ErrorKind::DomainError, "tabulated: density must be > 0");
              if (i > 0 && !(f.r[i] > f.r[i - 1]))
                fail(ErrorKind::DomainError, "tabulated: nodes must increase");
            }
          }
        },
        family_);
    if (!(quad_.rel_tol > 0.0 && quad_.abs_tol > 0.0 && quad_.max_subdivisions >= 2 && quad_.split > 0.0))
      fail(ErrorKind::DomainError, "invalid quadrature spec");
  }

  Family family_;
  QuadratureSpec quad_{};
  double admissibility_ = 0.0;
};

namespace detail {

// C * int_a^b r^{e} dr with e = p - gamma - 1
inline double power_integral(double C, double e, double a, double b) {
  const double q = e + 1.0;
  if (a == 0.0 && q <= 0.0) fail(ErrorKind::NonIntegrable, "power singularity at 0");
  if (std::isinf(b) && q >= 0.0) fail(ErrorKind::NonIntegrable, "power tail at infinity");
  if (q == 0.0) return C * std::log(b / a);
  const double hb = std::isinf(b) ? 0.0 : std::pow(b, q);
  const double ha = a == 0.0 ? 0.0 : std::pow(a, q);
  return C * (hb - ha) / q;
}

// (1+x)^g - 1 - g x
inline double binomial_remainder(double g, double x) {
  if (std::abs(x) < 1e-3) {
    double term = g * (g - 1.0) / 2.0 * x * x, sum = 0.0;
    for (int n = 2; n < 12; ++n) {
      sum += term;
      term *= (g - double(n)) / double(n + 1) * x;
    }
    return sum;
  }
  return std::expm1(g * std::log1p(x)) - g * x;
}

inline std::optional<double> stable_closed_form(double C, double g, double r0, const Integrand& phi,
                                                const Interval& dom) {
  const double lo = std::max(dom.lo, r0), hi = dom.hi;
  if (lo >= hi) return 0.0;
  const bool full = dom.lo <= r0 && std::isinf(hi);
  using K = Integrand::Kind;
  switch (phi.kind) {
    case K::Monomial: return power_integral(C, phi.a - g - 1.0, lo, hi);
    case K::MinR: {
      double s = 0.0;
      if (lo < 1.0) s += power_integral(C, 1.0 - g, lo, std::min(hi, 1.0));
      if (hi > 1.0) s += power_integral(C, -g, std::max(lo, 1.0), hi);
      return s;
    }
    case K::MaxR: {
      double s = 0.0;
      if (lo < 1.0) s += power_integral(C, -g, lo, std::min(hi, 1.0));
      if (hi > 1.0) s += power_integral(C, phi.a - g - 1.0, std::max(lo, 1.0), hi);
      return s;
    }
    case K::LKernel:
      if (full && r0 == 0.0) return C * std::tgamma(-g) * std::pow(phi.a, g);
      return std::nullopt;
    case K::D1Kernel:
      if (full && r0 == 0.0) return C * std::pow(phi.a, g - 1.0) * std::tgamma(2.0 - g) / (g - 1.0);
      return std::nullopt;
    case K::PoissonKernel:
      if (full && r0 == 0.0)
        return std::exp(std::log(C) + g * std::log(phi.a) + std::lgamma(double(phi.k) - g) - phi.log_norm);
      return std::nullopt;
    case K::Exponential:
      if (lo == 0.0) fail(ErrorKind::NonIntegrable, "infinite total mass");
      return std::nullopt;
    default: return std::nullopt;
  }
}

inline std::optional<double> tempered_closed_form(const TemperedStableFamily& f, const Integrand& phi,
                                                  const Interval& dom) {
  if (!(f.lower == 0.0 && dom.lo == 0.0 && std::isinf(dom.hi))) return std::nullopt;
  const double s = f.scale, g = f.gamma, th = f.tilt;
  using K = Integrand::Kind;
  switch (phi.kind) {
    case K::Monomial:
      if (phi.a <= g) fail(ErrorKind::NonIntegrable, "tempered stable moment diverges at 0");
      return s * std::tgamma(phi.a - g) * std::pow(th, g - phi.a);
    case K::LKernel:
      return s * std::tgamma(-g) * std::pow(th, g) * binomial_remainder(g, phi.a / th);
    case K::D1Kernel:
      return s * std::tgamma(1.0 - g) * (std::pow(th, g - 1.0) - std::pow(th + phi.a, g - 1.0));
    case K::PoissonKernel:
      return std::exp(std::log(s) + double(phi.k) * std::log(phi.a) + std::lgamma(double(phi.k) - g) -
                      (double(phi.k) - g) * std::log(phi.a + th) - phi.log_norm);
    case K::Exponential:
    case K::MaxR: fail(ErrorKind::NonIntegrable, "tempered stable: divergence at 0");
    default: return std::nullopt;
  }
}

}  // namespace detail

// Registered closed forms keyed by (family, integrand pattern).
inline std::optional<double> closed_form(const JumpMeasure& mu, const Integrand& phi, Interval dom) {
  if (phi.kind == Integrand::Kind::Generic) return std::nullopt;
  return std::visit(
      [&](const auto& f) -> std::optional<double> {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, StableFamily>) {
          return detail::stable_closed_form(f.scale, f.gamma, f.lower, phi, dom);
        } else if constexpr (std::is_same_v<F, TemperedStableFamily>) {
          return detail::tempered_closed_form(f, phi, dom);
        } else if constexpr (std::is_same_v<F, StableMixtureFamily>) {
          double s = 0.0;
          for (const auto& c : f.components) {
            const double C = c.coefficient * unit_stable_scale(c.gamma) * c.weight;
            auto v = detail::stable_closed_form(C, c.gamma, 0.0, phi, dom);
            if (!v) return std::nullopt;
            s += *v;
          }
          return s;
        } else {
          return std::nullopt;
        }
      },
      mu.family());
}

namespace detail {

inline boost::math::quadrature::tanh_sinh<double>& tanh_sinh_engine(int levels) {
  thread_local boost::math::quadrature::tanh_sinh<double> engine(std::max(levels, 4));
  return engine;
}
inline boost::math::quadrature::exp_sinh<double>& exp_sinh_engine(int levels) {
  thread_local boost::math::quadrature::exp_sinh<double> engine(std::max(levels, 4));
  return engine;
}

struct PieceResult {
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;
};

template <class F>
PieceResult integrate_piece(F&& f, double a, double b, bool singular_left, const QuadratureSpec& q) {
  PieceResult r;
  const double tol = q.rel_tol;
  if (singular_left && a == 0.0 && std::isfinite(b)) {
    r.value = tanh_sinh_engine(q.max_subdivisions).integrate(f, a, b, tol, &r.error, &r.l1);
  } else if (std::isinf(b)) {
    r.value = exp_sinh_engine(q.max_subdivisions).integrate(f, a, b, tol, &r.error, &r.l1);
  } else {
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    r.value = GK::integrate(f, a, b, 0, tol, &r.error, &r.l1);
    if (r.error > tol * r.l1)
      r.value = GK::integrate(f, a, b, unsigned(q.max_subdivisions), tol, &r.error, &r.l1);
  }
  return r;
}

}  // namespace detail

// Numeric route; exact summation for atomic measures.
inline double integrate_quadrature(const JumpMeasure& mu, const Integrand& phi, Interval dom) {
  if (dom.empty()) return 0.0;
  if (mu.is_atomic()) {
    double s = 0.0;
    for (const auto& a : mu.atoms())
      if (dom.contains(a.location)) s += a.mass * phi(a.location);
    return s;
  }
  double lo = std::max(dom.lo, mu.support_lo());
  double hi = std::min(dom.hi, mu.support_hi());
  if (auto w = phi.window()) {
    lo = std::max(lo, w->lo);
    hi = std::min(hi, w->hi);
  }
  if (!(lo < hi)) return 0.0;
  const QuadratureSpec& q = mu.quadrature();

  std::vector<double> cuts{lo, hi};
  auto add = [&](double x) {
    if (x > lo && x < hi) cuts.push_back(x);
  };
  add(q.split);
  for (double x : mu.density_nodes()) add(x);
  for (double x : phi.scale_points()) add(x);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  // Narrow pieces far from 0 only add abscissa roundoff; merge them.
  {
    std::vector<double> kept{cuts.front()};
    for (std::size_t i = 1; i + 1 < cuts.size(); ++i)
      if (cuts[i] - kept.back() >= 1e-2 * std::abs(cuts[i]) && cuts.back() - cuts[i] >= 1e-2 * std::abs(cuts[i]))
        kept.push_back(cuts[i]);
    kept.push_back(cuts.back());
    cuts = std::move(kept);
  }

  auto f = [&](double r) -> double {
    if (r <= 0.0) return 0.0;
    const double d = mu.density(r);
    if (d == 0.0) return 0.0;
    const double v = phi(r);
    if (v == 0.0) return 0.0;
    if (std::isfinite(d)) return v * d;
    const double lv = std::log(std::abs(v)) + mu.log_density(r);
    return std::copysign(std::exp(lv), v);
  };
  const bool singular = mu.singular_at_zero();
  double total = 0.0, l1 = 0.0, err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    detail::PieceResult p;
    try {
      p = detail::integrate_piece(f, cuts[i], cuts[i + 1], singular, q);
    } catch (const std::exception& e) {
      fail(ErrorKind::NonIntegrable, std::string("quadrature diverged: ") + e.what());
    }
    if (!std::isfinite(p.value)) fail(ErrorKind::NonIntegrable, "non-finite quadrature value");
    total += p.value;
    l1 += p.l1;
    err += p.error;
  }
  if (err > std::max(q.abs_tol, 10.0 * q.rel_tol * l1))
    fail(ErrorKind::QuadratureFailure,
         "error estimate " + num(err) + " above tolerance for |f|-integral " + num(l1));
  return total;
}

inline double integrate(const JumpMeasure& mu, const Integrand& phi, Interval dom) {
  if (dom.empty() || mu.is_empty()) return 0.0;
  if (auto v = closed_form(mu, phi, dom)) return *v;
  return integrate_quadrature(mu, phi, dom);
}

inline double integrate(const JumpMeasure& mu, std::function<double(double)> phi, Interval dom) {
  return integrate(mu, Integrand::generic(std::move(phi)), dom);
}

// L(u) over the given domain.
inline double big_L(const JumpMeasure& mu, double u, Interval dom) {
  if (u < 0.0) fail(ErrorKind::DomainError, "L requires u >= 0");
  if (u == 0.0) return 0.0;
  return integrate(mu, Integrand::l_kernel(u), dom);
}
inline double big_L_minus(const JumpMeasure& mu, double u) { return big_L(mu, u, Interval::unit()); }
inline double big_L_plus(const JumpMeasure& mu, double u) { return big_L(mu, u, Interval::above_one()); }
inline double big_L(const JumpMeasure& mu, double u) {
  if (u < 0.0) fail(ErrorKind::DomainError, "L requires u >= 0");
  if (u == 0.0 || mu.is_empty()) return 0.0;
  if (auto v = closed_form(mu, Integrand::l_kernel(u), Interval::positive())) return *v;
  return big_L_minus(mu, u) + big_L_plus(mu, u);
}

inline double d1N(const JumpMeasure& mu, double N, Interval dom) {
  if (N < 1.0) fail(ErrorKind::DomainError, "N must be >= 1");
  return integrate(mu, Integrand::d1_kernel(N), dom);
}
inline double alpha_minus(const JumpMeasure& mu, double N) { return d1N(mu, N, Interval::unit()); }
inline double alpha_plus(const JumpMeasure& mu, double N) { return d1N(mu, N, Interval::above_one()); }
inline double d1N(const JumpMeasure& mu, double N) {
  if (N < 1.0) fail(ErrorKind::DomainError, "N must be >= 1");
  if (mu.is_empty()) return 0.0;
  if (auto v = closed_form(mu, Integrand::d1_kernel(N), Interval::positive())) return *v;
  return alpha_minus(mu, N) + alpha_plus(mu, N);
}

// (1/k!) * integral over dom of (N r)^k e^{-N r} mu(dr)
inline double poisson_weight(const JumpMeasure& mu, double N, int k, Interval dom = Interval::positive()) {
  if (k < 2) fail(ErrorKind::DomainError, "poisson_weight requires k >= 2");
  return integrate(mu, Integrand::poisson_kernel(N, k), dom);
}

// integral over dom of P(Poisson(N r) > K) mu(dr)
inline double poisson_tail_weight(const JumpMeasure& mu, double N, int K, Interval dom = Interval::positive()) {
  return integrate(mu, Integrand::poisson_tail(N, K), dom);
}

// integral over dom of r P(Poisson(N r) > K) mu(dr)
inline double poisson_tail_moment(const JumpMeasure& mu, double N, int K, Interval dom = Interval::positive()) {
  return integrate(mu, Integrand::poisson_tail_moment(N, K), dom);
}

}  // namespace csbp
