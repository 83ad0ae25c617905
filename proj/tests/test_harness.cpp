#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <set>

#include "csbp/experiments.hpp"
#include "csbp/stats.hpp"
#include "test_support.hpp"

using namespace csbp;
using csbp::testing::error_kind;

namespace {
RunOptions quiet(unsigned threads = 1) {
  RunOptions o;
  o.threads = threads;
  o.write_artifacts = false;
  return o;
}
Config one(const std::string& k, const std::string& v) { return Config(std::map<std::string, std::string>{{k, v}}); }
struct EnvGuard {
  EnvGuard() { unsetenv(kSeedEnv); }
  ~EnvGuard() { unsetenv(kSeedEnv); }
};
}  // namespace

TEST(Ks, Examples) {
  EXPECT_EQ(ks_two_sample({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}), 0.0);
  EXPECT_EQ(ks_two_sample({0.0, 0.1}, {5.0, 6.0, 7.0}), 1.0);
  EXPECT_DOUBLE_EQ(ks_two_sample({0.0, 1.0}, {0.5}), 0.5);
  EXPECT_EQ(error_kind([] { ks_two_sample({}, {1.0}); }), ErrorKind::EmptySample);
  EXPECT_EQ(error_kind([] { ks_two_sample({1.0}, {}); }), ErrorKind::EmptySample);
}

TEST(Ks, MatchesBruteForce) {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> len(1, 60), val(0, 15);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(std::size_t(len(gen))), b(std::size_t(len(gen)));
    for (auto& x : a) x = 0.25 * val(gen);
    for (auto& x : b) x = 0.25 * val(gen) + 0.5;
    const double d = ks_two_sample(a, b);
    EXPECT_NEAR(d, csbp::testing::brute_ks(a, b), 1e-15);
    EXPECT_DOUBLE_EQ(d, ks_two_sample(b, a));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
  EXPECT_LT(ks_critical(2000, 2000), 0.05);
}

TEST(MeanCi, Examples) {
  MeanCI m = mc_mean_ci({1, 1, 1, 1});
  EXPECT_EQ(m.mean, 1.0);
  EXPECT_EQ(m.se, 0.0);
  m = mc_mean_ci({0, 2});
  EXPECT_EQ(m.mean, 1.0);
  EXPECT_DOUBLE_EQ(m.se, 1.0);
  m = mc_mean_ci({1, 2, 3});
  EXPECT_EQ(m.mean, 2.0);
  EXPECT_NEAR(m.se, 0.5774, 1e-4);
  EXPECT_EQ(error_kind([] { mc_mean_ci({1.0}); }), ErrorKind::InsufficientReplicas);
  EXPECT_EQ(error_kind([] { mc_mean_ci({}); }), ErrorKind::InsufficientReplicas);
}

TEST(Philox, KnownAnswers) {
  using A = std::array<std::uint32_t, 4>;
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}), (A{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (A{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (A{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
  RandomStream a = make_stream(5, 1, 2, 3), b = make_stream(5, 1, 2, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
  std::set<std::uint64_t> seen;
  for (std::uint32_t exp : {1u, 2u})
    for (std::uint32_t rung : {0u, 1u})
      for (std::uint32_t rep : {0u, 1u}) {
        RandomStream s = make_stream(5, exp, rung, rep);
        for (int i = 0; i < 64; ++i) seen.insert(s());
      }
  EXPECT_EQ(seen.size(), 8u * 64u);
  RandomStream u = make_stream(6, 1, 0, 0);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = u.uniform();
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sum += x;
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(sum / 1e5, 0.5, 4 * std::sqrt(1.0 / 12.0 / 1e5));
}

TEST(Seed, Precedence) {
  EnvGuard g;
  const Config cfg = one("experiment.seed", "7");
  RunOptions o = quiet();
  EXPECT_EQ(resolve_seed(Config{}, o), kDefaultSeed);
  EXPECT_EQ(resolve_seed(cfg, o), 7u);
  setenv(kSeedEnv, "11", 1);
  EXPECT_EQ(resolve_seed(cfg, o), 11u);
  o.seed = 13;
  EXPECT_EQ(resolve_seed(cfg, o), 13u);
  o.seed.reset();
  setenv(kSeedEnv, "xyz", 1);
  EXPECT_EQ(error_kind([&] { resolve_seed(cfg, o); }), ErrorKind::ConfigError);
}

TEST(Config, ParsingAndErrors) {
  const Config ini = parse_config("[mechanism]\nfamily = atomic\natoms = 1:0.5, 2:1\n[rescale]\nN = 10,20\n", false);
  EXPECT_EQ(ini.str("mechanism.family"), "atomic");
  EXPECT_EQ(ini.integers("rescale.N"), (std::vector<std::int64_t>{10, 20}));
  const JumpMeasure mu = measure_from_config(ini);
  EXPECT_DOUBLE_EQ(mu.first_moment(), 0.5 + 2.0);
  const Config js = parse_config(R"({"rescale": {"N": [5, 6]}, "e1": {"T": 2.5}})", true);
  EXPECT_EQ(js.integers("rescale.N"), (std::vector<std::int64_t>{5, 6}));
  EXPECT_EQ(js.real("e1.T"), 2.5);

  const auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return exit_code_for(e);
    }
    return 0;
  };
  EXPECT_EQ(code([] { parse_config("{ not json", true); }), 2);
  EXPECT_EQ(code([] { one("a", "1.5x").real("a"); }), 2);
  EXPECT_EQ(code([] { Config{}.str("missing"); }), 2);
  EXPECT_EQ(code([] { run_experiment("no_such_experiment", Config{}, quiet()); }), 2);
  EXPECT_EQ(code([] { run_experiment("e7_occupation", one("experiment.replicas", "0"), quiet()); }), 2);
  EXPECT_EQ(code([] { fail(ErrorKind::EventBudgetExceeded, "x"); }), 3);
  EXPECT_EQ(code([] { fail(ErrorKind::StepTooCoarse, "x"); }), 3);
}

TEST(Experiments, RegistryNamesAndIds) {
  std::set<std::uint32_t> ids;
  for (const auto& e : experiments()) {
    EXPECT_TRUE(ids.insert(e.id).second);
    EXPECT_EQ(&find_experiment(e.name), &e);
  }
  EXPECT_EQ(experiments().size(), 10u);
  EXPECT_FALSE(find_experiment("e10_rayknight_optional").enabled_by_default);
}

TEST(Experiments, BinaryLedgerSingleReplica) {
  const Report r = run_experiment(
      "e6_contour_identities", Config({{"experiment.replicas", "1"}, {"rescale.N", "100"}, {"e6.binary_N", "100"}}),
      quiet());
  const Check* c = r.find("binary_jump_terms_vanish");
  ASSERT_NE(c, nullptr);
  EXPECT_TRUE(c->pass);
  for (const auto& x : r.checks())
    if (x.name.find("identity_57") != std::string::npos) {
      EXPECT_LE(x.value, 1e-12) << x.name;
    }
  EXPECT_TRUE(r.pass());
}

TEST(Experiments, FellerLadder) {
  const Report r = run_experiment("e1_ut_convergence",
                                  Config({{"mechanism.family", "empty"}, {"rescale.N", "10,100,1000"}}), quiet());
  EXPECT_TRUE(r.find("sup_error_strictly_decreasing")->pass);
  EXPECT_LE(r.find("final_sup_error")->value, 2e-3);
}

TEST(Experiments, AtomicPiTilde) {
  const Report r = run_experiment("e4_pitilde", one("e4.measures", "atomic_measure"), quiet());
  EXPECT_TRUE(r.pass());
  EXPECT_LE(r.find("atomic_measure_pitilde_id_equals_L_N_over_N")->value, 1e-10);
}

TEST(Experiments, ReportIndependentOfThreads) {
  EnvGuard g;
  const Config cfg({{"rescale.N", "60"}, {"experiment.replicas", "60"}});
  const std::string a = run_experiment("e7_occupation", cfg, quiet(1)).dump();
  const std::string b = run_experiment("e7_occupation", cfg, quiet(3)).dump();
  EXPECT_EQ(a, b);
  RunOptions o = quiet(1);
  o.seed = 99;
  const std::string c = run_experiment("e7_occupation", cfg, o).dump();
  EXPECT_NE(a, c);
}
