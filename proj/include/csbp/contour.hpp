#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "csbp/error.hpp"
#include "csbp/mechanism.hpp"
#include "csbp/offspring.hpp"
#include "csbp/rng.hpp"
#include "csbp/stats.hpp"

namespace csbp {

struct ContourConstants {
  double N = 1.0, c = 1.0, alpha = 0.0, beta = 0.0;
  double aN = 1.0;
  double gamma1 = 0.0, d1q0 = 0.0, m1 = 0.0;
  double lambda_N = 0.0, mu_N = 0.0;

  double rate_down() const { return 2.0 * N * (gamma1 + lambda_N); }
  double rate_up() const { return 2.0 * N * (d1q0 + mu_N); }
  double slope() const { return 2.0 * aN; }
};

inline ContourConstants contour_constants(const FiniteN& k) {
  if (!(k.p.c > 0.0)) fail(ErrorKind::DomainError, "exploration process needs c > 0");
  ContourConstants cc;
  cc.N = k.p.N;
  cc.c = k.p.c;
  cc.alpha = k.p.alpha;
  cc.beta = k.p.beta;
  cc.aN = k.aN;
  cc.gamma1 = k.gamma1;
  cc.d1q0 = k.d1q0;
  cc.m1 = k.m1;
  cc.lambda_N = k.lambda_N;
  cc.mu_N = k.mu_N;
  return cc;
}

enum class ContourEventKind {
  DownUpJump,     // P^{1,N} while descending; carries Lambda
  DownUpBinary,   // P^N
  UpDownJump,     // P'^{1,N}
  UpDownBinary,   // P'^N
  MarkReflection,
  ZeroReflection,
};

inline const char* to_string(ContourEventKind k) {
  switch (k) {
    case ContourEventKind::DownUpJump: return "down_up_jump";
    case ContourEventKind::DownUpBinary: return "down_up_binary";
    case ContourEventKind::UpDownJump: return "up_down_jump";
    case ContourEventKind::UpDownBinary: return "up_down_binary";
    case ContourEventKind::MarkReflection: return "mark_reflection";
    case ContourEventKind::ZeroReflection: return "zero_reflection";
  }
  return "?";
}

inline bool is_down_up(ContourEventKind k) {
  return k != ContourEventKind::UpDownJump && k != ContourEventKind::UpDownBinary;
}

struct ContourEvent {
  double time = 0.0;
  double level = 0.0;
  ContourEventKind kind = ContourEventKind::DownUpBinary;
  int lambda = 0;
};

struct EventLog {
  std::vector<ContourEvent> events;
  double horizon = 0.0;       // the log covers [0, horizon]
  double final_height = 0.0;
  int final_sign = 1;
  int initial_lambda = 0;     // Lambda of the first P^{1,N} event, drawn at start
  int pending_lambda = 0;     // drawn for the next P^{1,N} event, never used
  bool complete = false;
  StreamId stream{};
  std::uint64_t blocks_used = 0;
};

struct ContourPath {
  double aN = 1.0;
  double c = 1.0;
  std::vector<double> times;
  std::vector<double> heights;
  std::vector<int> signs;  // V on [times[i], times[i+1])

  double height_at(double t) const {
    if (times.empty()) return 0.0;
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return heights.front();
    const std::size_t i = std::size_t(it - times.begin()) - 1;
    return heights[i] + 2.0 * aN * double(signs[i]) * (t - times[i]);
  }
};

struct Mark {
  double level = 0.0;
  int remaining = 0;
};

class MarkStack {
 public:
  void push(double level, int remaining) {
    if (remaining < 0) fail(ErrorKind::MarkStackViolation, "negative reflection count");
    if (!marks_.empty() && !(level > marks_.back().level))
      fail(ErrorKind::MarkStackViolation, "new mark at " + num(level) + " not above top " + num(marks_.back().level));
    marks_.push_back({level, remaining});
  }
  bool empty() const { return marks_.empty(); }
  std::size_t size() const { return marks_.size(); }
  Mark& top() { return marks_.back(); }
  const Mark& top() const { return marks_.back(); }
  void pop() { marks_.pop_back(); }
  const std::vector<Mark>& marks() const { return marks_; }

 private:
  std::vector<Mark> marks_;
};

struct ContourStop {
  double horizon = kInf;
  std::uint64_t zero_reflections = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t event_budget = 500'000'000;
};

struct ContourRun {
  double end_time = 0.0;
  double height = 0.0;
  int sign = 1;
  std::uint64_t events = 0;
  std::uint64_t zero_reflections = 0;
  std::uint64_t marks_created = 0;
  std::size_t max_marks = 0;
  double time_up = 0.0, time_down = 0.0;
  bool budget_exceeded = false;
};

struct RandomDriver {
  RandomStream* rng;
  const OffspringDecomposition* d;
  double wait(double rate) { return rate > 0.0 ? rng->exponential() / rate : kInf; }
  bool pick(double p) { return rng->uniform() < p; }
  int lambda() { return sample_lambda(*d, *rng); }
};

// Replays fixed waiting times, source choices and Lambda values.  An exhausted
// wait queue means no further Poisson events; an exhausted Lambda queue yields 1.
struct ScriptedDriver {
  std::deque<double> waits;
  std::deque<int> picks;
  std::deque<int> lambdas;
  double wait(double) {
    if (waits.empty()) return kInf;
    const double w = waits.front();
    waits.pop_front();
    return w;
  }
  bool pick(double) {
    if (picks.empty()) fail(ErrorKind::ConfigError, "script ran out of source choices");
    const int p = picks.front();
    picks.pop_front();
    return p != 0;
  }
  int lambda() {
    if (lambdas.empty()) return 1;
    const int l = lambdas.front();
    lambdas.pop_front();
    return l;
  }
};

struct NullContourObserver {
  void on_start(int) {}
  void on_event(const ContourEvent&, int) {}
  void on_end(double, double, int) {}
};

template <class Driver, class Observer>
ContourRun run_contour(const ContourConstants& k, Driver& drv, Observer& obs, const ContourStop& stop) {
  if (!std::isfinite(stop.horizon) && stop.zero_reflections == std::numeric_limits<std::uint64_t>::max())
    fail(ErrorKind::ConfigError, "contour needs a finite horizon or a zero-reflection count");
  const double slope = k.slope();
  const double up_rate = k.rate_up(), down_rate = k.rate_down();
  const double p_up_jump = up_rate > 0.0 ? 2.0 * k.N * k.d1q0 / up_rate : 0.0;
  const double p_down_jump = down_rate > 0.0 ? 2.0 * k.N * k.gamma1 / down_rate : 0.0;
  const bool jumps = k.gamma1 > 0.0;
  int lambda_next = jumps ? drv.lambda() : 0;
  obs.on_start(lambda_next);

  ContourRun run;
  MarkStack stack;
  double t = 0.0, H = 0.0;
  int V = 1;
  const double S = stop.horizon;
  auto emit = [&](ContourEventKind kind, int lambda) {
    ++run.events;
    obs.on_event(ContourEvent{t, H, kind, lambda}, lambda_next);
  };
  for (;;) {
    if (run.events >= stop.event_budget) {
      run.budget_exceeded = true;
      break;
    }
    if (V == 1) {
      const double tau = drv.wait(up_rate);
      if (t + tau >= S) {
        run.time_up += S - t;
        H += slope * (S - t);
        t = S;
        break;
      }
      const double t1 = t + tau, step = t1 - t;  // realized step keeps H and t consistent
      run.time_up += step;
      t = t1;
      H += slope * step;
      V = -1;
      emit(drv.pick(p_up_jump) ? ContourEventKind::UpDownJump : ContourEventKind::UpDownBinary, 0);
      continue;
    }
    const double barrier = stack.empty() ? 0.0 : stack.top().level;
    const double hit = (H - barrier) / slope;
    double tau = drv.wait(down_rate);
    while (tau == hit) tau = drv.wait(down_rate);
    if (t + std::min(tau, hit) >= S) {
      run.time_down += S - t;
      H = std::max(H - slope * (S - t), barrier);
      t = S;
      break;
    }
    if (tau < hit) {
      const double t1 = t + tau, step = t1 - t;
      run.time_down += step;
      t = t1;
      H = std::max(H - slope * step, barrier);
      V = 1;
      if (jumps && drv.pick(p_down_jump)) {
        const int lambda = lambda_next;
        lambda_next = drv.lambda();
        stack.push(H, lambda - 1);
        ++run.marks_created;
        run.max_marks = std::max(run.max_marks, stack.size());
        emit(ContourEventKind::DownUpJump, lambda);
      } else {
        emit(ContourEventKind::DownUpBinary, 0);
      }
      continue;
    }
    run.time_down += hit;
    t += hit;
    H = barrier;
    if (!stack.empty()) {
      Mark& m = stack.top();
      if (m.remaining > 0) {
        --m.remaining;
        V = 1;
        emit(ContourEventKind::MarkReflection, 0);
      } else {
        stack.pop();
      }
      continue;
    }
    V = 1;
    ++run.zero_reflections;
    emit(ContourEventKind::ZeroReflection, 0);
    if (run.zero_reflections >= stop.zero_reflections) break;
  }
  run.end_time = t;
  run.height = H;
  run.sign = V;
  obs.on_end(t, H, V);
  return run;
}

// Full breakpoint path and event log.
struct ContourRecorder {
  ContourPath* path;
  EventLog* log;
  void on_start(int lambda_next) {
    path->times.assign(1, 0.0);
    path->heights.assign(1, 0.0);
    path->signs.assign(1, 1);
    log->events.clear();
    log->initial_lambda = lambda_next;
  }
  void on_event(const ContourEvent& e, int lambda_next) {
    log->events.push_back(e);
    log->pending_lambda = lambda_next;
    path->times.push_back(e.time);
    path->heights.push_back(e.level);
    path->signs.push_back(is_down_up(e.kind) ? 1 : -1);
  }
  void on_end(double t, double H, int V) {
    if (path->times.back() < t) {
      path->times.push_back(t);
      path->heights.push_back(H);
      path->signs.push_back(V);
    }
    log->horizon = t;
    log->final_height = H;
    log->final_sign = V;
    log->complete = true;
    if (log->events.empty()) log->pending_lambda = log->initial_lambda;
  }
};

// Every term of the decomposition at one instant.
struct LedgerTerms {
  double t = 0.0, H = 0.0;
  int V = 1;
  double T_up = 0.0, T_down = 0.0;
  double M_N = 0.0, Mt_N = 0.0, Mt_1 = 0.0, M_1 = 0.0;
  double K_1 = 0.0, K_2 = 0.0, Phi_1 = 0.0, J = 0.0;
  double G_1 = 0.0, G_2 = 0.0, G_3 = 0.0;
  double L0 = 0.0;  // ledger normalization: 2/(cN) per contact, starting at L_{0+}
  double Y = 0.0, eps = 0.0, pushed = 0.0;
  std::uint64_t R0 = 0;

  double lhs57(double c, double N) const { return H + double(V) / (2.0 * c * N); }
  double rhs57(double c, double N) const {
    return 1.0 / (2.0 * c * N) + M_1 + M_N - Mt_1 - Mt_N - K_2 + double(R0) / (c * N) + Phi_1 + J;
  }
  double scale57() const {
    double s = 1.0;
    for (double v : {H, M_N, Mt_N, Mt_1, M_1, K_1, K_2, Phi_1, J}) s = std::max(s, std::abs(v));
    return s;
  }
  double lhs79(double c) const { return c * H; }
  double rhs79(double c) const { return Y + 0.5 * c * L0 - pushed; }
  double scale79(double c) const {
    double s = 1.0;
    for (double v : {c * H, Y, eps, 0.5 * c * L0, pushed, c * M_N, c * Mt_N, c * J}) s = std::max(s, std::abs(v));
    return s;
  }
};

// Rebuilds the decomposition incrementally from the event stream alone.
class LedgerAccumulator {
 public:
  explicit LedgerAccumulator(const ContourConstants& k) : k_(k) {}

  void on_start(int lambda_next) {
    *this = LedgerAccumulator(k_);
    lambda_next_ = lambda_next;
  }

  void on_event(const ContourEvent& e, int lambda_next) {
    if (e.time < t_) fail(ErrorKind::IncompleteLog, "event times decrease");
    advance(e.time);
    track_sup(true);
    H_ = e.level;
    using K = ContourEventKind;
    if (is_down_up(e.kind) && V_ != -1) fail(ErrorKind::MarkStackViolation, "down-up flip while ascending");
    if (!is_down_up(e.kind) && V_ != 1) fail(ErrorKind::MarkStackViolation, "up-down flip while descending");
    switch (e.kind) {
      case K::DownUpJump:
        clear_passed(e.level, false);
        ++nP1_;
        sum_lambda_ += e.lambda;
        remaining_ += e.lambda - 1;
        stack_.push(e.level, e.lambda - 1);
        lambda_next_ = lambda_next;
        break;
      case K::DownUpBinary:
        clear_passed(e.level, false);
        ++nPN_;
        break;
      case K::UpDownJump: ++nP1p_; break;
      case K::UpDownBinary: ++nPNp_; break;
      case K::MarkReflection:
        clear_passed(e.level, true);
        if (stack_.empty() || stack_.top().level != e.level || stack_.top().remaining <= 0)
          fail(ErrorKind::MarkStackViolation, "reflection at " + num(e.level) + " without a live mark");
        --stack_.top().remaining;
        --remaining_;
        break;
      case K::ZeroReflection:
        clear_passed(0.0, false);
        ++R0_;
        break;
    }
    V_ = is_down_up(e.kind) ? 1 : -1;
    ++events_;
    track_sup(false);
  }

  void on_end(double t, double H, int V) {
    advance(t);
    H_ = H;
    if (V != V_) fail(ErrorKind::IncompleteLog, "final sign disagrees with the event stream");
    track_sup(false);
  }

  LedgerTerms terms() const {
    const ContourConstants& k = k_;
    const double cN = k.c * k.N, N = k.N, c = k.c;
    LedgerTerms r;
    r.t = t_;
    r.H = H_;
    r.V = V_;
    r.T_up = Tup_;
    r.T_down = Tdown_;
    r.M_N = (double(nPN_) - 2.0 * N * k.lambda_N * Tdown_) / cN;
    r.Mt_N = (double(nPNp_) - 2.0 * N * k.mu_N * Tup_) / cN;
    r.Mt_1 = (double(nP1p_) - 2.0 * N * k.d1q0 * Tup_) / cN;
    r.K_1 = double(sum_lambda_) / cN;
    r.K_2 = double(remaining_) / cN;
    r.M_1 = r.K_1 - 2.0 * k.gamma1 / c * I_lambda_;
    r.Phi_1 = 2.0 * k.gamma1 / c * (I_lambda_ - k.m1 * Tdown_);
    r.J = 2.0 * k.alpha / c * Tdown_ - 2.0 * k.beta / c * Tup_;
    r.G_1 = double(nP1_) / cN;
    r.G_2 = double(sum_lambda_ - std::int64_t(nP1_) - remaining_) / cN;
    r.G_3 = 2.0 / c * k.m1 * k.gamma1 * Tdown_;
    r.R0 = R0_;
    r.L0 = 2.0 / cN * double(1 + R0_);
    r.eps = 1.0 / (2.0 * N) - double(V_) / (2.0 * N) + c * r.G_1 - c * r.Mt_1 - 1.0 / N;
    r.Y = r.eps + c * r.J + c * (r.M_N - r.Mt_N) + double(sum_lambda_ - std::int64_t(nP1_)) / N -
          2.0 * k.d1q0 * Tdown_;
    r.pushed = double(remaining_) / N;
    return r;
  }

  double sup_abs_Mt1() const { return sup_Mt1_; }
  double sup_K2() const { return sup_K2_; }
  double sup_abs_MN() const { return sup_MN_; }
  std::uint64_t events() const { return events_; }
  const ContourConstants& constants() const { return k_; }

 private:
  void advance(double t) {
    const long double dt = (long double)t - (long double)t_;
    if (V_ == 1) {
      Tup_ += dt;
    } else {
      Tdown_ += dt;
      I_lambda_ += dt * (long double)lambda_next_;
    }
    t_ = t;
  }
  // Descending to `level` passes every mark above it; those must be exhausted.
  void clear_passed(double level, bool reflection) {
    while (!stack_.empty()) {
      const Mark& m = stack_.top();
      if (reflection && m.level == level) break;
      if (!(m.level >= level)) break;
      if (m.remaining > 0)
        fail(ErrorKind::MarkStackViolation, "descent crossed a live mark at " + num(m.level));
      stack_.pop();
    }
  }
  void track_sup(bool before) {
    const double cN = k_.c * k_.N;
    const double mt1 = (double(nP1p_) - 2.0 * k_.N * k_.d1q0 * Tup_) / cN;
    const double mn = (double(nPN_) - 2.0 * k_.N * k_.lambda_N * Tdown_) / cN;
    sup_Mt1_ = std::max(sup_Mt1_, std::abs(mt1));
    sup_MN_ = std::max(sup_MN_, std::abs(mn));
    if (!before) sup_K2_ = std::max(sup_K2_, double(remaining_) / cN);
  }

  ContourConstants k_;
  double t_ = 0.0, H_ = 0.0;
  int V_ = 1;
  long double Tup_ = 0.0L, Tdown_ = 0.0L, I_lambda_ = 0.0L;
  int lambda_next_ = 0;
  std::uint64_t nP1_ = 0, nPN_ = 0, nP1p_ = 0, nPNp_ = 0, R0_ = 0, events_ = 0;
  std::int64_t sum_lambda_ = 0, remaining_ = 0;
  MarkStack stack_;
  double sup_Mt1_ = 0.0, sup_K2_ = 0.0, sup_MN_ = 0.0;
};

struct DecompositionLedger {
  ContourConstants k;
  std::vector<LedgerTerms> series;  // after every event, then at the horizon
};

inline DecompositionLedger ledger(const EventLog& log, const ContourConstants& k) {
  if (!log.complete) fail(ErrorKind::IncompleteLog, "event log does not cover its horizon");
  DecompositionLedger out;
  out.k = k;
  LedgerAccumulator acc(k);
  acc.on_start(log.initial_lambda);
  out.series.reserve(log.events.size() + 1);
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const ContourEvent& e = log.events[i];
    int lambda_after = 0;
    if (e.kind == ContourEventKind::DownUpJump) {
      // Lambda for the following jump event, or the undrawn pending one.
      lambda_after = log.pending_lambda;
      for (std::size_t j = i + 1; j < log.events.size(); ++j)
        if (log.events[j].kind == ContourEventKind::DownUpJump) {
          lambda_after = log.events[j].lambda;
          break;
        }
    }
    if (e.time > log.horizon) fail(ErrorKind::IncompleteLog, "event beyond the log horizon");
    acc.on_event(e, lambda_after);
    out.series.push_back(acc.terms());
  }
  acc.on_end(log.horizon, log.final_height, log.final_sign);
  out.series.push_back(acc.terms());
  return out;
}

struct IdentityResiduals {
  double eq57 = 0.0, eq57_scale = 1.0;
  double eq79 = 0.0, eq79_scale = 1.0;
  double path_height = 0.0;  // max |H(ledger) - H(path)| at the ledger times
  double relative57() const { return eq57 / eq57_scale; }
  double relative79() const { return eq79 / eq79_scale; }
};

inline IdentityResiduals identity_check(const DecompositionLedger& L, const ContourPath& path) {
  IdentityResiduals r;
  const double c = L.k.c, N = L.k.N;
  for (const auto& x : L.series) {
    r.eq57 = std::max(r.eq57, std::abs(x.lhs57(c, N) - x.rhs57(c, N)));
    r.eq57_scale = std::max(r.eq57_scale, x.scale57());
    r.eq79 = std::max(r.eq79, std::abs(x.lhs79(c) - x.rhs79(c)));
    r.eq79_scale = std::max(r.eq79_scale, x.scale79(c));
    r.path_height = std::max(r.path_height, std::abs(x.H - path.height_at(x.t)));
  }
  return r;
}

// 2/(c a_N) per up-crossing of `level` up to time s.
inline double local_time_N(const ContourPath& p, double level, double s = kInf) {
  if (!(level >= 0.0)) fail(ErrorKind::DomainError, "level must be >= 0");
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < p.times.size(); ++i) {
    if (p.signs[i] != 1 || p.times[i] > s) continue;
    const double t1 = i + 1 < p.times.size() ? std::min(p.times[i + 1], s) : p.times[i];
    const double h0 = p.heights[i];
    const double h1 = h0 + 2.0 * p.aN * (t1 - p.times[i]);
    if (h0 <= level && level < h1) ++n;
  }
  return 2.0 / (p.c * p.aN) * double(n);
}

struct ContourOptions {
  double hypothesis_exponent = 1.1;  // p in (1,2) used to check (H)
  ContourStop stop{};
  DecompositionOptions decomposition{};
};

struct ContourSimulation {
  ContourConstants k;
  ContourPath path;
  EventLog log;
  ContourRun run;
};

inline OffspringDecomposition contour_decomposition(const JumpMeasure& mu, const RescaleParams& params,
                                                    const ContourOptions& opt) {
  if (!(params.c > 0.0)) fail(ErrorKind::DomainError, "exploration process needs c > 0");
  if (params.beta < params.alpha) fail(ErrorKind::DomainError, "exploration process needs beta >= alpha");
  if (!mu.is_empty()) mu.requires_H(opt.hypothesis_exponent);
  DecompositionOptions dopt = opt.decomposition;
  dopt.allow_binary_only = true;
  return build_decomposition(mu, params, dopt);
}

inline ContourSimulation simulate_contour(const OffspringDecomposition& d, double S, RandomStream& rng,
                                          ContourOptions opt = {}) {
  ContourSimulation out;
  out.k = contour_constants(d.k);
  out.path.aN = out.k.aN;
  out.path.c = out.k.c;
  RandomDriver drv{&rng, &d};
  ContourRecorder rec{&out.path, &out.log};
  ContourStop stop = opt.stop;
  stop.horizon = S;
  out.run = run_contour(out.k, drv, rec, stop);
  out.log.complete = !out.run.budget_exceeded;
  out.log.stream = rng.id();
  out.log.blocks_used = rng.blocks_used();
  return out;
}

inline ContourSimulation simulate_contour(const JumpMeasure& mu, const RescaleParams& params, double S,
                                          RandomStream& rng, ContourOptions opt = {}) {
  return simulate_contour(contour_decomposition(mu, params, opt), S, rng, opt);
}

struct LedgerSummary {
  double sup_abs_Mt1 = 0.0, sup_K2 = 0.0, sup_abs_MN = 0.0;
  double M_N_end = 0.0, J_end = 0.0, H_end = 0.0;
  double T_up = 0.0, T_down = 0.0;
  double residual57 = 0.0, residual79 = 0.0;
  std::uint64_t events = 0;
  bool budget_exceeded = false;
};

// Streaming run: no path storage, ledger maintained on the fly.
inline LedgerSummary contour_summary(const OffspringDecomposition& d, double S, RandomStream& rng,
                                     ContourStop stop = {}) {
  const ContourConstants k = contour_constants(d.k);
  RandomDriver drv{&rng, &d};
  LedgerAccumulator acc(k);
  stop.horizon = S;
  const ContourRun run = run_contour(k, drv, acc, stop);
  const LedgerTerms x = acc.terms();
  LedgerSummary s;
  s.sup_abs_Mt1 = acc.sup_abs_Mt1();
  s.sup_K2 = acc.sup_K2();
  s.sup_abs_MN = acc.sup_abs_MN();
  s.M_N_end = x.M_N;
  s.J_end = x.J;
  s.H_end = x.H;
  s.T_up = x.T_up;
  s.T_down = x.T_down;
  s.residual57 = std::abs(x.lhs57(k.c, k.N) - x.rhs57(k.c, k.N)) / x.scale57();
  s.residual79 = std::abs(x.lhs79(k.c) - x.rhs79(k.c)) / x.scale79(k.c);
  s.events = run.events;
  s.budget_exceeded = run.budget_exceeded;
  return s;
}

struct MartingaleRung {
  double N = 0.0;
  std::vector<LedgerSummary> replicas;
};

struct MartingaleRungReport {
  double N = 0.0;
  MeanCI sup_Mt1, sup_K2, M_N_end;
};

struct MartingaleReport {
  std::vector<MartingaleRungReport> rungs;
  std::vector<double> decay_ratios;  // sup|Mt1| at rung i over rung i+1
  double k2_bound = 0.0;             // (2/c) T int z mu
  bool k2_within_bound = true;
  bool mn_mean_zero = true;
};

inline MartingaleReport martingale_stats(const std::vector<MartingaleRung>& ladder, double c, double first_moment,
                                         double T) {
  if (ladder.size() < 3) fail(ErrorKind::InsufficientReplicas, "need an N-ladder with at least 3 rungs");
  MartingaleReport rep;
  rep.k2_bound = 2.0 / c * first_moment * T;
  for (const auto& rung : ladder) {
    if (rung.replicas.size() < 50) fail(ErrorKind::InsufficientReplicas, "need at least 50 replicas per rung");
    std::vector<double> a, b, m;
    for (const auto& r : rung.replicas) {
      a.push_back(r.sup_abs_Mt1);
      b.push_back(r.sup_K2);
      m.push_back(r.M_N_end);
    }
    MartingaleRungReport x{rung.N, mc_mean_ci(a), mc_mean_ci(b), mc_mean_ci(m)};
    rep.k2_within_bound = rep.k2_within_bound && x.sup_K2.mean <= rep.k2_bound + 4.0 * x.sup_K2.se;
    rep.mn_mean_zero = rep.mn_mean_zero && std::abs(x.M_N_end.mean) <= 4.0 * x.M_N_end.se;
    rep.rungs.push_back(x);
  }
  for (std::size_t i = 0; i + 1 < rep.rungs.size(); ++i)
    rep.decay_ratios.push_back(rep.rungs[i].sup_Mt1.mean / rep.rungs[i + 1].sup_Mt1.mean);
  return rep;
}

}  // namespace csbp
