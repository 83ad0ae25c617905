#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "csbp/offspring.hpp"
#include "csbp/stats.hpp"

using namespace csbp;

namespace {
const double E1 = std::exp(-1.0);
JumpMeasure unit_atom() { return JumpMeasure::atomic({{1.0, 1.0}}); }
RescaleParams rp(int N, double c = 1.0, double alpha = 0.0, double beta = 0.0) { return {N, alpha, beta, c}; }
}  // namespace

TEST(Decomposition, AtomicWeights) {
  const OffspringDecomposition d = build_decomposition(unit_atom(), rp(1));
  const DiscreteLaw& q = *d.q1;
  const double z = 1.0 - E1;
  EXPECT_NEAR(q.weight(0), E1 / z, 1e-14);
  EXPECT_NEAR(q.weight(0), 0.5819767, 1e-7);
  EXPECT_EQ(q.weight(1), 0.0);
  EXPECT_NEAR(q.weight(2), E1 / (2.0 * z), 1e-14);
  EXPECT_NEAR(q.weight(2), 0.2909884, 1e-7);
  EXPECT_NEAR(q.weight(3), E1 / (6.0 * z), 1e-14);
  EXPECT_NEAR(q.weight(3), 0.0969961, 1e-7);
  // sum_{k>=2} q_k = e^{-1}(e-2)/(1-e^{-1})
  EXPECT_NEAR(q.mass() - q.weight(0), E1 * (std::exp(1.0) - 2.0) / z, 1e-13);
  EXPECT_NEAR(q.mass(), 1.0, 1e-12);
}

TEST(Decomposition, LambdaLawAndMean) {
  const OffspringDecomposition d = build_decomposition(unit_atom(), rp(1));
  const double q0 = d.q1->weight(0), q2 = d.q1->weight(2);
  EXPECT_NEAR(d.p1->weight(1), q2 / (1.0 - q0), 1e-14);
  EXPECT_NEAR(d.m1, q0 / (1.0 - q0), 1e-14);
  for (int k = 1; k <= d.p1->cutoff(); ++k) EXPECT_NEAR(d.p1->weight(k), d.q1->weight(k + 1) / (1.0 - q0), 1e-15);
  EXPECT_EQ(d.p1->offset(), 1);
  EXPECT_NEAR(d.p1->mass(), 1.0, 1e-12);
  EXPECT_NEAR(d.p1->mean(), d.m1, 1e-10);
}

TEST(Decomposition, InvariantsAcrossMeasures) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::vector<JumpMeasure> ms = {unit_atom(), JumpMeasure::atomic({{0.3, 2.0}, {1.5, 0.7}, {4.0, 0.1}}),
                                       JumpMeasure::tempered_stable(1.5, 1.0, 1.0, 0.1)};
  for (const auto& mu : ms)
    for (int N : {1, 3, 20}) {
      const OffspringDecomposition d = build_decomposition(mu, rp(N, 0.5, 0.1, 0.2));
      const double total = d.q1->mass() + d.q1->tail_bound();
      EXPECT_GE(total, 1.0 - 1e-12);
      EXPECT_LE(d.q1->mass(), 1.0 + 1e-12);
      EXPECT_EQ(d.q1->weight(1), 0.0);
      EXPECT_NEAR(d.gamma1, d.k.d1 * (1.0 - d.q0), 1e-15);
      EXPECT_NEAR(d.m1, d.q0 / (1.0 - d.q0), 1e-15);
      EXPECT_NEAR(d.k.b, 0.2 - 0.1, 1e-15);
      for (int k = 0; k <= d.K; ++k) {
        double mix = 0.0;
        if (d.q_minus) mix += d.q_minus->weight(k) * d.k.alpha_minus;
        if (d.q_plus) mix += d.q_plus->weight(k) * d.k.alpha_plus;
        EXPECT_NEAR(d.q1->weight(k), mix / d.k.d1, 1e-12) << "k=" << k;
      }
      for (int i = 0; i < 20; ++i) {
        const double s = U(gen);
        EXPECT_NEAR(d.q1->pgf(s), f1N(mu, N, s), 1e-9 + d.tail_q1);
      }
    }
}

TEST(Decomposition, BinaryOnlyAndDegenerate) {
  try {
    build_decomposition(JumpMeasure::empty(), rp(4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateMeasure);
  }
  DecompositionOptions o;
  o.allow_binary_only = true;
  const OffspringDecomposition d = build_decomposition(JumpMeasure::empty(), rp(4), o);
  EXPECT_FALSE(d.has_jumps());
  RandomStream rng = make_stream(1, 0, 0, 0);
  for (int i = 0; i < 2000; ++i) {
    const int e = sample_eta(d, rng);
    EXPECT_TRUE(e == 0 || e == 2);
  }
  EXPECT_THROW(sample_lambda(d, rng), Error);
}

TEST(SampleEta, ZeroMassAtOneAndPgf) {
  const JumpMeasure mu = unit_atom();
  const RescaleParams p = rp(1);
  const OffspringDecomposition d = build_decomposition(mu, p);
  RandomStream rng = make_stream(2, 0, 0, 0);
  const int n = 100000;
  std::vector<double> x(n), a(n), b(n);
  int ones = 0;
  for (int i = 0; i < n; ++i) {
    const int e = sample_eta(d, rng);
    ones += e == 1;
    x[std::size_t(i)] = e;
    a[std::size_t(i)] = std::pow(0.3, e);
    b[std::size_t(i)] = std::pow(0.7, e);
  }
  EXPECT_EQ(ones, 0);
  const MeanCI ca = mc_mean_ci(a), cb = mc_mean_ci(b), cm = mc_mean_ci(x);
  EXPECT_LE(std::abs(ca.mean - hN(mu, p, 0.3)), 4 * ca.se);
  EXPECT_LE(std::abs(cb.mean - hN(mu, p, 0.7)), 4 * cb.se);
  const double delta = 1e-6, slope = (1.0 - hN(mu, p, 1.0 - delta)) / delta;
  EXPECT_LE(std::abs(cm.mean - slope), 4 * cm.se);
}

TEST(SampleLambda, SupportMeanAndMixturePath) {
  const OffspringDecomposition d = build_decomposition(JumpMeasure::atomic({{0.5, 1.0}, {2.0, 0.5}}), rp(3));
  RandomStream r1 = make_stream(3, 0, 0, 0), r2 = make_stream(3, 0, 1, 0);
  const int n = 100000;
  std::vector<double> v(n);
  std::map<int, double> direct, mix;
  for (int i = 0; i < n; ++i) {
    const int a = sample_lambda(d, r1), b = sample_lambda_mixture(d, r2);
    ASSERT_GE(a, 1);
    ASSERT_GE(b, 1);
    v[std::size_t(i)] = a;
    direct[std::min(a, 12)] += 1;
    mix[std::min(b, 12)] += 1;
  }
  const MeanCI c = mc_mean_ci(v);
  EXPECT_LE(std::abs(c.mean - d.m1), 4 * c.se);
  // two-sample chi-square on pooled cells
  double chi = 0.0;
  int cells = 0;
  for (int k = 1; k <= 12; ++k) {
    const double o1 = direct[k], o2 = mix[k];
    if (o1 + o2 == 0) continue;
    chi += (o1 - o2) * (o1 - o2) / (o1 + o2);
    ++cells;
  }
  const double pval = boost::math::cdf(boost::math::complement(boost::math::chi_squared(cells - 1), chi));
  EXPECT_GT(pval, 1e-3);
}

TEST(SampleLambda, AtomicMean) {
  const OffspringDecomposition d = build_decomposition(unit_atom(), rp(1));
  RandomStream rng = make_stream(4, 0, 0, 0);
  std::vector<double> v(100000);
  for (auto& x : v) x = sample_lambda(d, rng);
  const MeanCI c = mc_mean_ci(v);
  const double q0 = E1 / (1.0 - E1);
  EXPECT_LE(std::abs(c.mean - q0 / (1.0 - q0)), 4 * c.se);
}

TEST(PiTilde, Examples) {
  auto id = [](double z) { return z; };
  const PiTilde p1 = pi_tilde(build_decomposition(unit_atom(), rp(1)));
  EXPECT_NEAR(pi_tilde_apply(p1, id).value, E1, 1e-10);
  const PiTilde p100 = pi_tilde(build_decomposition(unit_atom(), rp(100)));
  EXPECT_NEAR(pi_tilde_apply(p100, id).value, (std::exp(-100.0) - 1.0 + 100.0) / 100.0, 1e-10);
  EXPECT_NEAR(pi_tilde_apply(p100, id).value, 0.99, 1e-10);
  EXPECT_EQ(pi_tilde_apply(p100, [](double) { return 0.0; }).value, 0.0);
  EXPECT_THROW(pi_tilde_apply(p100, [](double z) { return z * z; }), Error);
}

TEST(PiTilde, ConvergesMonotonically) {
  const JumpMeasure mu = JumpMeasure::atomic({{0.5, 1.0}, {2.0, 0.5}});
  const double m_id = mu.first_moment();
  const double m_min = 0.5 * 1.0 + 1.0 * 0.5;
  double prev_id = kInf, prev_min = kInf;
  for (int N : {10, 100, 1000}) {
    const PiTilde pt = pi_tilde(build_decomposition(mu, rp(N)));
    const double vid = pi_tilde_apply(pt, [](double z) { return z; }).value;
    const double vmin = pi_tilde_apply(pt, [](double z) { return std::min(z, 1.0); }).value;
    EXPECT_NEAR(vid, big_L(mu, N) / N, 1e-10);
    EXPECT_LE(vid, m_id);
    EXPECT_LT(std::abs(vid - m_id), prev_id);
    EXPECT_LT(std::abs(vmin - m_min), prev_min);
    prev_id = std::abs(vid - m_id);
    prev_min = std::abs(vmin - m_min);
  }
}
