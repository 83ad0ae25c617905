#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "csbp/contour.hpp"
#include "csbp/parallel.hpp"
#include "test_support.hpp"

using namespace csbp;
using csbp::testing::error_kind;

namespace {
unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }
RescaleParams rp(int N, double c = 1.0, double alpha = 0.0, double beta = 0.0) { return {N, alpha, beta, c}; }
JumpMeasure atom() { return JumpMeasure::atomic({{1.0, 0.5}}); }

struct Scripted {
  ContourPath path;
  EventLog log;
  ContourRun run;
};

Scripted replay(const ContourConstants& k, ScriptedDriver drv, std::uint64_t zero_stop = 1) {
  Scripted s;
  ContourRecorder rec{&s.path, &s.log};
  ContourStop stop;
  stop.horizon = 10.0;
  stop.zero_reflections = zero_stop;
  s.path.aN = k.aN;
  s.path.c = k.c;
  s.run = run_contour(k, drv, rec, stop);
  return s;
}
}  // namespace

TEST(Contour, FirstExcursionSlope) {
  RandomStream rng = make_stream(1, 3, 0, 0);
  const ContourSimulation s = simulate_contour(atom(), rp(50, 0.5), 0.5, rng);
  ASSERT_GE(s.path.times.size(), 2u);
  EXPECT_EQ(s.path.signs[0], 1);
  EXPECT_EQ(s.path.heights[0], 0.0);
  EXPECT_NEAR(s.path.heights[1], 2.0 * s.k.aN * s.path.times[1], 1e-12);
  EXPECT_NEAR(s.k.aN, 50.0 + s.k.d1q0 / 0.5, 1e-12);
}

TEST(Contour, PathInvariants) {
  RandomStream rng = make_stream(2, 3, 0, 0);
  const ContourSimulation s = simulate_contour(atom(), rp(100, 0.5), 1.0, rng);
  EXPECT_GT(s.run.marks_created, 0u);
  for (std::size_t i = 0; i + 1 < s.path.times.size(); ++i) {
    EXPECT_GE(s.path.heights[i], 0.0);
    EXPECT_LT(s.path.times[i], s.path.times[i + 1] + 1e-15);
    const double slope = (s.path.heights[i + 1] - s.path.heights[i]) / (s.path.times[i + 1] - s.path.times[i]);
    EXPECT_NEAR(slope, 2.0 * s.k.aN * s.path.signs[i], 1e-6 * s.k.aN);
    if (i > 0) {
      EXPECT_NE(s.path.signs[i], s.path.signs[i - 1]);
    }
  }
  for (std::size_t i = 1; i < s.log.events.size(); ++i) EXPECT_GT(s.log.events[i].time, s.log.events[i - 1].time);
}

TEST(Contour, ScriptedLambdaThreeGivesTwoReflections) {
  const ContourConstants k = contour_constants(finite_n(atom(), rp(10)));
  const double sl = k.slope();
  ScriptedDriver drv;
  // up 0.1, down 0.05 (jump, Lambda = 3), then three short climbs back to the mark, then down to 0
  drv.waits = {0.1, 0.05, 0.02, 1.0, 0.01, 1.0, 0.01, 1.0, 1.0};
  drv.picks = {0, 1, 0, 0, 0};
  drv.lambdas = {3};
  const Scripted s = replay(k, drv);
  const double h = sl * 0.1 - sl * 0.05;
  using K = ContourEventKind;
  struct Want {
    double t, level;
    K kind;
  };
  const std::vector<Want> want = {
      {0.1, sl * 0.1, K::UpDownBinary},   {0.15, h, K::DownUpJump},          {0.17, h + sl * 0.02, K::UpDownBinary},
      {0.19, h, K::MarkReflection},       {0.2, h + sl * 0.01, K::UpDownBinary}, {0.21, h, K::MarkReflection},
      {0.22, h + sl * 0.01, K::UpDownBinary}, {0.23 + h / sl, 0.0, K::ZeroReflection}};
  ASSERT_EQ(s.log.events.size(), want.size());
  int reflections = 0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_NEAR(s.log.events[i].time, want[i].t, 1e-12) << i;
    EXPECT_NEAR(s.log.events[i].level, want[i].level, 1e-12) << i;
    EXPECT_EQ(s.log.events[i].kind, want[i].kind) << i;
    reflections += s.log.events[i].kind == K::MarkReflection;
  }
  EXPECT_EQ(reflections, 2);
  EXPECT_EQ(s.log.events[1].lambda, 3);
  EXPECT_EQ(s.run.max_marks, 1u);

  const IdentityResiduals r = identity_check(ledger(s.log, k), s.path);
  EXPECT_LE(r.relative57(), 1e-12);
  EXPECT_LE(r.relative79(), 1e-12);
  EXPECT_LE(r.path_height, 1e-12);
}

TEST(Contour, LambdaOneMarkIsNoOp) {
  const ContourConstants k = contour_constants(finite_n(atom(), rp(10)));
  ScriptedDriver drv;
  drv.waits = {0.1, 0.05, 0.02, 1.0, 1.0};
  drv.picks = {0, 1, 0};
  drv.lambdas = {1};
  const Scripted s = replay(k, drv);
  ASSERT_EQ(s.log.events.size(), 4u);
  EXPECT_EQ(s.log.events[1].kind, ContourEventKind::DownUpJump);
  EXPECT_EQ(s.log.events[3].kind, ContourEventKind::ZeroReflection);
  const LedgerTerms end = ledger(s.log, k).series.back();
  EXPECT_EQ(end.K_2, 0.0);
  EXPECT_LE(identity_check(ledger(s.log, k), s.path).relative57(), 1e-12);
}

TEST(Contour, MarkStackDiscipline) {
  MarkStack st;
  st.push(0.5, 2);
  st.push(0.7, 0);
  EXPECT_EQ(error_kind([&] { st.push(0.6, 1); }), ErrorKind::MarkStackViolation);
  EXPECT_EQ(error_kind([&] { st.push(0.9, -1); }), ErrorKind::MarkStackViolation);
  EXPECT_EQ(st.size(), 2u);
  // crossing a live mark without a reflection is rejected by the ledger replay
  const ContourConstants k = contour_constants(finite_n(atom(), rp(10)));
  EventLog bad;
  bad.initial_lambda = 3;
  const double sl = k.slope();
  bad.events = {{0.1, 0.1 * sl, ContourEventKind::UpDownBinary, 0},
                {0.15, 0.05 * sl, ContourEventKind::DownUpJump, 3},
                {0.16, 0.06 * sl, ContourEventKind::UpDownBinary, 0},
                {0.18, 0.04 * sl, ContourEventKind::DownUpBinary, 0}};
  bad.horizon = 0.2;
  bad.final_sign = 1;
  bad.complete = true;
  EXPECT_EQ(error_kind([&] { ledger(bad, k); }), ErrorKind::MarkStackViolation);
  bad.complete = false;
  EXPECT_EQ(error_kind([&] { ledger(bad, k); }), ErrorKind::IncompleteLog);
}

TEST(LocalTimeN, Examples) {
  RandomStream rng = make_stream(3, 3, 0, 0);
  const ContourSimulation s = simulate_contour(atom(), rp(50, 0.5), 1.0, rng);
  const double unit = 2.0 / (0.5 * s.k.aN);
  EXPECT_NEAR(local_time_N(s.path, 0.0, 0.5 * s.path.times[1]), unit, 1e-15);
  double hmax = 0.0;
  for (double h : s.path.heights) hmax = std::max(hmax, h);
  EXPECT_EQ(local_time_N(s.path, hmax + 1.0), 0.0);
  // at level 0 only zero reflections add, one unit each
  std::uint64_t zeros = 0;
  for (const auto& e : s.log.events) {
    if (e.kind == ContourEventKind::ZeroReflection) ++zeros;
    EXPECT_NEAR(local_time_N(s.path, 0.0, e.time + 1e-13), unit * double(1 + zeros), 1e-12);
  }

  ContourPath p;
  p.aN = 1.0;
  p.c = 1.0;
  p.times = {0.0, 0.5, 0.9, 1.2, 1.45, 1.75};
  p.heights = {0.0, 1.0, 0.2, 0.8, 0.3, 0.9};
  p.signs = {1, -1, 1, -1, 1, 1};
  EXPECT_DOUBLE_EQ(local_time_N(p, 0.5), 6.0);
  EXPECT_DOUBLE_EQ(local_time_N(p, 0.95), 2.0);
}

TEST(Ledger, BinaryCaseJumpTermsVanish) {
  RandomStream rng = make_stream(4, 3, 0, 0);
  const ContourSimulation s = simulate_contour(JumpMeasure::empty(), rp(100), 1.0, rng);
  const DecompositionLedger L = ledger(s.log, s.k);
  for (const auto& x : L.series) {
    EXPECT_EQ(x.K_1, 0.0);
    EXPECT_EQ(x.K_2, 0.0);
    EXPECT_EQ(x.Phi_1, 0.0);
    EXPECT_EQ(x.Mt_1, 0.0);
  }
  const IdentityResiduals r = identity_check(L, s.path);
  EXPECT_LE(r.relative57(), 1e-12);
  EXPECT_LE(r.relative79(), 1e-12);
}

TEST(Ledger, IdentitiesOnRandomRuns) {
  for (int N : {50, 300}) {
    for (std::uint32_t rep = 0; rep < 3; ++rep) {
      RandomStream rng = make_stream(5, 3, std::uint32_t(N), rep);
      const ContourSimulation s =
          simulate_contour(JumpMeasure::atomic({{0.5, 1.0}, {2.0, 0.3}}), rp(N, 0.5, 0.2, 0.4), 1.0, rng);
      const IdentityResiduals r = identity_check(ledger(s.log, s.k), s.path);
      EXPECT_LE(r.relative57(), 1e-9);
      EXPECT_LE(r.relative79(), 1e-9);
      EXPECT_LE(r.path_height, 1e-9 * std::max(1.0, r.eq57_scale));
    }
  }
}

TEST(Ledger, OccupationBalance) {
  const OffspringDecomposition d = contour_decomposition(atom(), rp(200, 0.5), {});
  const double aN = d.k.aN;
  for (std::uint32_t rep = 0; rep < 20; ++rep) {
    RandomStream rng = make_stream(6, 3, 0, rep);
    const LedgerSummary s = contour_summary(d, 1.0, rng);
    EXPECT_NEAR(s.T_up + s.T_down, 1.0, 1e-12);
    EXPECT_NEAR(s.T_up - s.T_down, s.H_end / (2.0 * aN), 1e-9);
  }
}

TEST(Ledger, CompensatorConstantTiesToOffspring) {
  for (int N : {10, 100, 1000}) {
    const JumpMeasure mu = JumpMeasure::atomic({{0.5, 1.0}, {2.0, 0.3}});
    const OffspringDecomposition d = build_decomposition(mu, rp(N, 0.5));
    const ContourConstants k = contour_constants(d.k);
    EXPECT_NEAR(k.m1 * k.gamma1, big_L(mu, N) / N, 1e-12);
    EXPECT_NEAR(pi_tilde_apply(pi_tilde(d), [](double z) { return z; }).value, k.m1 * k.gamma1, 1e-10);
  }
}

TEST(Ledger, SymmetricDriftTerm) {
  const double alpha = 1.0, c = 1.0;
  const OffspringDecomposition d = contour_decomposition(atom(), rp(200, c, alpha, alpha), {});
  const auto rows = parallel_map<LedgerSummary>(200, workers(), [&](std::size_t i) {
    RandomStream rng = make_stream(7, 3, 0, std::uint32_t(i));
    return contour_summary(d, 1.0, rng);
  });
  std::vector<double> J;
  for (const auto& r : rows) {
    // with alpha = beta, J = (2 alpha / c)(T_down - T_up) = -(alpha / c) H / a_N
    EXPECT_NEAR(r.J_end, -alpha / c * r.H_end / d.k.aN, 1e-9);
    J.push_back(r.J_end);
  }
  const MeanCI m = mc_mean_ci(J);
  EXPECT_LE(std::abs(m.mean - (alpha - alpha) / c), 0.01);
}

TEST(Occupation, BinaryHalf) {
  const OffspringDecomposition d = contour_decomposition(JumpMeasure::empty(), rp(500), {});
  const auto up = parallel_map<double>(200, workers(), [&](std::size_t i) {
    RandomStream rng = make_stream(8, 3, 0, std::uint32_t(i));
    return contour_summary(d, 1.0, rng).T_up;
  });
  double s = 0.0;
  for (double x : up) s += x;
  EXPECT_LE(std::abs(s / double(up.size()) - 0.5), 0.02);
}

TEST(MartingaleStats, InsufficientReplicas) {
  std::vector<MartingaleRung> two(2, MartingaleRung{10.0, std::vector<LedgerSummary>(60)});
  EXPECT_EQ(error_kind([&] { martingale_stats(two, 1.0, 1.0, 1.0); }), ErrorKind::InsufficientReplicas);
  std::vector<MartingaleRung> thin(3, MartingaleRung{10.0, std::vector<LedgerSummary>(10)});
  EXPECT_EQ(error_kind([&] { martingale_stats(thin, 1.0, 1.0, 1.0); }), ErrorKind::InsufficientReplicas);
}

TEST(Contour, RequiresStandingAssumptions) {
  EXPECT_THROW(contour_decomposition(atom(), rp(10, 0.0), {}), Error);
  EXPECT_THROW(contour_decomposition(atom(), rp(10, 1.0, 1.0, 0.0), {}), Error);
  EXPECT_EQ(error_kind([&] { contour_decomposition(JumpMeasure::unit_stable(1.5), rp(10), {}); }),
            ErrorKind::HypothesisViolation);
}
