#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "csbp/config.hpp"
#include "csbp/contour.hpp"
#include "csbp/experiments.hpp"
#include "csbp/gw_sim.hpp"
#include "csbp/limit_sim.hpp"
#include "csbp/mechanism.hpp"

namespace {

using namespace csbp;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

Config gather(const Common& a) {
  Config c;
  if (!a.config.empty()) c = load_config(a.config);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::ConfigError, "--set expects key=value, got '" + kv + "'");
    c.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  return c;
}

void emit(const Common& a, const CsvWriter& w) {
  if (a.out.empty()) std::cout << w.str();
  else w.write(a.out);
}

int cmd_list() {
  for (const auto& e : experiments())
    std::printf("e%-2u %-24s %s%s\n", e.id, e.name.c_str(), e.summary.c_str(),
                e.enabled_by_default ? "" : " (optional)");
  return 0;
}

int cmd_experiment(const Common& a, const std::string& name, std::optional<std::int64_t> replicas, unsigned threads,
                   bool no_artifacts) {
  RunOptions opt;
  opt.seed = a.seed;
  opt.replicas = replicas;
  opt.threads = threads;
  if (!a.out.empty()) opt.out_dir = a.out;
  opt.write_artifacts = !no_artifacts;
  const Config user = gather(a);
  std::vector<std::string> names;
  if (name == "all") {
    for (const auto& e : experiments())
      if (e.enabled_by_default) names.push_back(e.name);
  } else {
    names.push_back(name);
  }
  bool ok = true;
  for (const auto& n : names) {
    const Report rep = run_experiment(n, user, opt);
    for (const auto& c : rep.checks())
      std::printf("%s  %-44s %s %s %s\n", c.pass ? "PASS" : "FAIL", (rep.name() + "." + c.name).c_str(),
                  fmt(c.value).c_str(), c.rule.c_str(), fmt(c.tolerance).c_str());
    std::printf("%s %s (seed %llu, %.1fs)\n", rep.pass() ? "PASSED" : "FAILED", rep.name().c_str(),
                static_cast<unsigned long long>(rep.seed()), rep.runtime_seconds);
    ok = ok && rep.pass();
  }
  return ok ? 0 : 1;
}

int cmd_solve(const Common& a) {
  const Config c = gather(a);
  const BranchingMechanism m = mechanism_from_config(c);
  const double lambda = c.real("solve.lambda", 1.0), T = c.real("solve.T", 1.0), h = c.real("solve.h", 0.01);
  const LaplaceSolution u = solve_ut(m, lambda, T, h);
  CsvWriter w("u_t", {"t", "u"});
  if (c.has("solve.N")) {
    const LaplaceSolution uN = solve_utN(m.mu, rescale_from_config(c, int(c.integer("solve.N"))), lambda, T, h);
    CsvWriter w2("u_t_N", {"t", "u", "u_N"});
    for (std::size_t i = 0; i < u.values.size(); ++i) w2.row({u.h * double(i), u.values[i], uN.values[i]});
    emit(a, w2);
    return 0;
  }
  for (std::size_t i = 0; i < u.values.size(); ++i) w.row({u.h * double(i), u.values[i]});
  emit(a, w);
  return 0;
}

int cmd_simulate(const Common& a, const std::string& what) {
  const Config c = gather(a);
  const BranchingMechanism m = mechanism_from_config(c);
  const std::uint64_t seed = resolve_seed(c, RunOptions{a.seed, {}, 1, {}, false});
  RandomStream rng = make_stream(seed, 0, 0, 0);
  const double T = c.real("simulate.T", 1.0), x = c.real("simulate.x", 1.0);
  const double dt = c.real("simulate.dt", 1e-3), delta = c.real("simulate.delta", 0.0);
  if (what == "gw") {
    const PopulationPath p = simulate_gw(m.mu, rescale_from_config(c, int(c.integer("simulate.N", 100))), x, T, rng);
    CsvWriter w("gw_path", {"time", "size", "mass"});
    w.row({0.0, double(p.initial), double(p.initial) / p.N});
    for (std::size_t i = 0; i < p.times.size(); ++i)
      w.row({p.times[i], double(p.sizes[i]), double(p.sizes[i]) / p.N});
    emit(a, w);
    return 0;
  }
  if (what == "csbp" || what == "levy" || what == "height") {
    const Path y = what == "csbp" ? simulate_csbp(m, x, T, dt, delta, rng) : simulate_levy(m, T, dt, delta, rng);
    if (what == "height") {
      const HeightPath H = height_from_levy(y, m.c);
      CsvWriter w("height_path", {"t", "Y", "H"});
      for (std::size_t i = 0; i < y.values.size(); ++i) w.row({y.time(i), y.values[i], H.values[i]});
      emit(a, w);
      return 0;
    }
    CsvWriter w(what + "_path", {"t", what == "csbp" ? "X" : "Y"});
    for (std::size_t i = 0; i < y.values.size(); ++i) w.row({y.time(i), y.values[i]});
    emit(a, w);
    return 0;
  }
  if (what == "contour") {
    const ContourSimulation s =
        simulate_contour(m.mu, rescale_from_config(c, int(c.integer("simulate.N", 100))), T, rng);
    CsvWriter w("contour_path", {"time", "H", "V", "event"});
    for (std::size_t i = 0; i < s.path.times.size(); ++i)
      w.row_text({fmt(s.path.times[i]), fmt(s.path.heights[i]), std::to_string(s.path.signs[i]),
                  i == 0 ? "start" : (i <= s.log.events.size() ? to_string(s.log.events[i - 1].kind) : "end")});
    emit(a, w);
    return 0;
  }
  fail(ErrorKind::ConfigError, "unknown simulation '" + what + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous-state branching processes: solvers, simulators and experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  std::optional<std::int64_t> replicas;
  unsigned threads = 1;
  bool no_artifacts = false;
  app.add_option("--config", common.config, "INI or JSON config file");
  app.add_option("--set", common.sets, "override a config key (key=value), repeatable");
  app.add_option("--seed", common.seed, "master seed (beats $CSBP_SEED and experiment.seed)");
  app.add_option("--out", common.out, "output directory (experiment) or CSV file (solve-u, simulate)");
  app.add_option("--replicas", replicas, "replica count override")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  app.add_flag("--no-artifacts", no_artifacts, "experiment: skip writing report and CSV files");

  auto* list = app.add_subcommand("list-experiments", "list registered experiments");
  auto* exp = app.add_subcommand("experiment", "run an experiment by name, id (e3) or 'all'");
  std::string exp_name;
  exp->add_option("name", exp_name)->required();
  auto* solve = app.add_subcommand("solve-u", "solve the Laplace-exponent ODE (keys solve.*)");
  auto* sim = app.add_subcommand("simulate", "simulate one path: gw | csbp | levy | height | contour");
  std::string what;
  sim->add_option("kind", what)->required()->check(CLI::IsMember({"gw", "csbp", "levy", "height", "contour"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (*list) return cmd_list();
    if (*exp) return cmd_experiment(common, exp_name, replicas, threads, no_artifacts);
    if (*solve) return cmd_solve(common);
    if (*sim) return cmd_simulate(common, what);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
