#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "csbp/mechanism.hpp"
#include "test_support.hpp"

using namespace csbp;
using csbp::testing::rel;

namespace {
const double E1 = std::exp(-1.0);
JumpMeasure unit_atom() { return JumpMeasure::atomic({{1.0, 1.0}}); }
RescaleParams rp(int N, double c = 1.0, double alpha = 0.0, double beta = 0.0) { return {N, alpha, beta, c}; }
}  // namespace

TEST(Psi, Examples) {
  EXPECT_DOUBLE_EQ(psi(BranchingMechanism(1.0, 2.0), 3.0), 21.0);
  EXPECT_NEAR(psi(BranchingMechanism(0.0, 0.0, unit_atom()), 1.0), E1, 1e-15);
  EXPECT_NEAR(psi(BranchingMechanism(0.0, 0.0, JumpMeasure::unit_stable(1.5)), 2.0), std::pow(2.0, 1.5), 1e-12);
  EXPECT_THROW(psi(BranchingMechanism(0.0, 1.0), -1.0), Error);
  EXPECT_THROW(BranchingMechanism(0.0, -1.0), Error);
}

TEST(Psi, ConvexForNonnegativeDrift) {
  const BranchingMechanism m(0.3, 0.5, JumpMeasure::tempered_stable(1.5, 1.0, 1.0));
  EXPECT_EQ(psi(m, 0.0), 0.0);
  const double h = 0.05;
  for (double u = h; u < 10.0; u += 0.37) EXPECT_GE(psi(m, u + h) - 2 * psi(m, u) + psi(m, u - h), -1e-9);
}

TEST(F1N, Examples) {
  EXPECT_EQ(f1N(unit_atom(), 1, 1.0), 1.0);
  EXPECT_NEAR(f1N(unit_atom(), 1, 0.0), E1 / (1.0 - E1), 1e-14);
  EXPECT_NEAR(f1N(unit_atom(), 1, 0.0), 0.5819767, 1e-7);
  const double expect = 0.5 + E1 / (2.0 * (1.0 - std::exp(-2.0)));
  EXPECT_NEAR(f1N(unit_atom(), 2, 0.5), expect, 1e-14);
  EXPECT_NEAR(f1N(unit_atom(), 2, 0.5), 0.7127, 1e-4);
}

TEST(F1N, EmptyMeasureIsDegenerate) {
  try {
    f1N(JumpMeasure::empty(), 3, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateMeasure);
  }
}

TEST(F2N, Examples) {
  EXPECT_DOUBLE_EQ(f2N(rp(2), 0.0), 0.5);
  EXPECT_DOUBLE_EQ(f2N(rp(1, 1.0, 1.0, 0.0), 1.0), 1.0);
  EXPECT_DOUBLE_EQ(f2N(rp(1, 1.0, 1.0, 0.0), 0.5), 0.5);
  EXPECT_THROW(f2N(rp(1, 0.0), 0.5), Error);
}

TEST(HN, Examples) {
  const JumpMeasure mu = unit_atom();
  EXPECT_EQ(hN(mu, rp(1), 1.0), 1.0);
  EXPECT_EQ(PhiN(mu, rp(1), 1.0), 0.0);
  EXPECT_NEAR(hN(JumpMeasure::empty(), rp(1), 0.0), 0.5, 1e-15);
  const double d1 = 1.0 - E1, d2 = 2.0;
  const double mix = (d1 * (E1 / (1.0 - E1)) + d2 * 0.5) / (d1 + d2);
  EXPECT_NEAR(hN(mu, rp(1), 0.0), mix, 1e-14);
  EXPECT_NEAR(PhiN(mu, rp(1), 0.0), (d1 + d2) * mix, 1e-13);
}

TEST(HN, GeneratingFunctionShape) {
  const JumpMeasure mu = JumpMeasure::atomic({{0.4, 2.0}, {2.0, 0.3}});
  const RescaleParams p = rp(7, 0.8, 0.2, 0.5);
  const FiniteN k = finite_n(mu, p);
  const double h = 0.02;
  for (int i = 1; i < 50; ++i) {
    const double s = h * i;
    for (double v : {f1N(mu, 7, s), f2N(p, s), hN(mu, k, s)}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    auto d2 = [&](auto f) { return f(s + h) - 2 * f(s) + f(s - h); };
    EXPECT_GE(d2([&](double x) { return f1N(mu, 7, x); }), -1e-9);
    EXPECT_GE(d2([&](double x) { return f2N(p, x); }), -1e-9);
    EXPECT_GE(d2([&](double x) { return hN(mu, k, x); }), -1e-9);
  }
  EXPECT_EQ(f2N(p, 1.0), 1.0);
}

TEST(PsiN, Examples) {
  for (int N : {2, 5, 100}) {
    const PsiNValue v = psiN(JumpMeasure::empty(), rp(N, 1.0, 0.0, 1.0), 2.0);
    EXPECT_DOUBLE_EQ(v.closed, 6.0);
    EXPECT_LT(v.relative_gap(), 1e-9);
  }
  const PsiNValue a = psiN(unit_atom(), rp(10), 1.0);
  EXPECT_NEAR(a.closed, E1 + 1.0, 1e-14);
  EXPECT_LT(a.relative_gap(), 1e-9);
  const PsiNValue f = psiN(JumpMeasure::empty(), rp(100, 1.0, 1.0, 1.0), 1.0);
  EXPECT_NEAR(f.closed, 1.01, 1e-14);
  EXPECT_LT(f.relative_gap(), 1e-9);
  EXPECT_NEAR(psi(BranchingMechanism(0.0, 1.0), 1.0), 1.0, 0.0);
  EXPECT_THROW(psiN(unit_atom(), rp(3), 3.5), Error);
}

TEST(PsiN, DualPathRandom) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> NN(1, 5000);
  const std::vector<JumpMeasure> ms = {unit_atom(), JumpMeasure::atomic({{0.2, 3.0}, {1.7, 0.5}}),
                                       JumpMeasure::tempered_stable(1.5, 1.0, 1.0, 0.1), JumpMeasure::empty()};
  for (int i = 0; i < 50; ++i) {
    const int N = NN(gen);
    const RescaleParams p = rp(N, 0.2 + U(gen), U(gen), U(gen));
    const JumpMeasure& mu = ms[std::size_t(i) % ms.size()];
    const double u = U(gen) * N;
    const PsiNValue v = psiN(mu, p, u);
    EXPECT_LT(v.relative_gap(), 1e-9) << "N=" << N << " u=" << u;
  }
}

TEST(PsiN, ExactQuadraticGap) {
  const JumpMeasure mu = JumpMeasure::atomic({{0.5, 1.0}, {2.0, 0.25}});
  for (int N : {10, 100, 1000})
    for (double u : {0.5, 1.0, 3.0}) {
      const RescaleParams p = rp(N, 0.7, 0.6, 0.9);
      const BranchingMechanism m(p.b(), p.c, mu);
      const double gap = psiN_closed(mu, finite_n(mu, p), u) - psi(m, u);
      EXPECT_LE(std::abs(gap - p.alpha * u * u / N), 1e-13 * psi(m, u));
    }
}

TEST(SpecialCase, Examples) {
  const SpecialCase sc({{1.5, 1.0, 1.0}});
  EXPECT_DOUBLE_EQ(sc.rho(4.0), 7.0);
  for (double N : {4.0, 10.0, 100.0, 1e4}) {
    EXPECT_NEAR(sc.psibar1(N, 4.0), 8.0, 1e-12 * 8.0);
    for (double u : {0.5, 1.0, 2.0, 4.0}) {
      EXPECT_NEAR(sc.psibar2(N, u), u * u / 2.0, 1e-14 * u * u);
      EXPECT_LT(rel(sc.psibar(N, u), sc.psibar1(N, u) + sc.psibar2(N, u)), 1e-9);
    }
  }
  EXPECT_THROW(SpecialCase({{1.5, 0.5, 1.0}}), Error);
  EXPECT_THROW(SpecialCase({{2.5, 1.0, 1.0}}), Error);
}

TEST(SpecialCase, MixtureMeasureGivesLimit) {
  const SpecialCase sc({{1.3, 0.5, 1.0}, {1.8, 0.5, 2.0}});
  const JumpMeasure mu = sc.mu_mix();
  for (double u : {0.5, 2.0}) {
    EXPECT_LT(rel(big_L(mu, u), sc.psibar1_limit(u)), 1e-10);
    EXPECT_LT(rel(integrate_quadrature(mu, Integrand::l_kernel(u), Interval::positive()), sc.psibar1_limit(u)), 1e-7);
  }
}

TEST(SolveUt, ClosedForms) {
  EXPECT_NEAR(solve_ut(BranchingMechanism(0.0, 1.0), 1.0, 1.0, 0.01).back(), 0.5, 1e-8);
  EXPECT_NEAR(solve_ut(BranchingMechanism(1.0, 0.0), 2.0, std::log(2.0), 0.01).back(), 1.0, 1e-8);
  const BranchingMechanism st(0.0, 0.0, JumpMeasure::unit_stable(1.5));
  const LaplaceSolution s = solve_ut(st, 4.0, 1.0, 0.05);
  EXPECT_NEAR(s.back(), 1.0, 1e-7);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double t = s.h * double(i);
    EXPECT_NEAR(s.values[i], std::pow(0.5 + t / 2.0, -2.0), 1e-7);
  }
  const LaplaceSolution z = solve_ut(BranchingMechanism(0.2, 1.0, unit_atom()), 3.0, 0.0, 0.1);
  ASSERT_EQ(z.values.size(), 1u);
  EXPECT_EQ(z.values[0], 3.0);
}

TEST(SolveUt, MonotoneNonnegative) {
  const LaplaceSolution s = solve_ut(BranchingMechanism(0.0, 0.5, JumpMeasure::atomic({{1.0, 0.5}})), 2.0, 3.0, 0.01);
  EXPECT_EQ(s.values.front(), 2.0);
  for (std::size_t i = 1; i < s.values.size(); ++i) {
    EXPECT_LE(s.values[i], s.values[i - 1]);
    EXPECT_GE(s.values[i], 0.0);
  }
}

TEST(SolveUt, FlowProperty) {
  const BranchingMechanism m(0.1, 0.5, JumpMeasure::atomic({{1.0, 0.5}, {0.3, 2.0}}));
  const SolverOptions opt{1e-10, 14};
  const double lam = 2.0, h = 0.01;
  for (double t : {0.1, 0.2, 0.3, 0.4, 0.5})
    for (double s : {0.1, 0.2, 0.3, 0.4, 0.5}) {
      const double direct = solve_ut(m, lam, t + s, h, opt).back();
      const double us = solve_ut(m, lam, s, h, opt).back();
      const double composed = solve_ut(m, us, t, h, opt).back();
      EXPECT_LE(std::abs(direct - composed), 10.0 * opt.tolerance) << t << " " << s;
    }
}

TEST(SolveUtN, Examples) {
  EXPECT_NEAR(solve_utN(unit_atom(), rp(1), 1.0, 0.0, 0.1).back(), 1.0 - E1, 1e-15);
  const LaplaceSolution z = solve_utN(unit_atom(), rp(5), 0.0, 1.0, 0.1);
  for (double v : z.values) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(solve_utN(JumpMeasure::empty(), rp(1000), 1.0, 1.0, 0.01).back(), 0.5, 2e-3);
}

TEST(SolveUtN, ConvergenceMonotoneInN) {
  for (const JumpMeasure& mu : {JumpMeasure::empty(), JumpMeasure::atomic({{1.0, 0.5}})}) {
    const BranchingMechanism m(0.0, 0.5, mu);
    const LaplaceSolution u = solve_ut(m, 1.0, 2.0, 0.02);
    double prev = kInf;
    for (int N : {10, 100, 1000, 10000}) {
      const LaplaceSolution uN = solve_utN(mu, rp(N, 0.5), 1.0, 2.0, 0.02);
      double sup = 0.0;
      for (std::size_t i = 0; i < u.values.size(); ++i) sup = std::max(sup, std::abs(uN.values[i] - u.values[i]));
      EXPECT_LE(sup, prev) << "N=" << N;
      prev = sup;
    }
    EXPECT_LT(prev, 1e-3);
  }
}

TEST(CsbpLaplace, Examples) {
  const BranchingMechanism f(0.0, 1.0);
  EXPECT_EQ(csbp_laplace(f, 0.0, 1.0, 1.0), 1.0);
  EXPECT_NEAR(csbp_laplace(f, 2.0, 1.0, 1.0), E1, 1e-8);
  EXPECT_DOUBLE_EQ(csbp_laplace(f, 2.0, 1.5, 0.0), std::exp(-3.0));
  EXPECT_THROW(csbp_laplace(f, -1.0, 1.0, 1.0), Error);
}
