#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csbp/config.hpp"
#include "csbp/report.hpp"
#include "csbp/rng.hpp"

namespace csbp {

inline constexpr std::uint64_t kDefaultSeed = 20240917;
inline constexpr const char* kSeedEnv = "CSBP_SEED";

struct RunOptions {
  std::optional<std::uint64_t> seed;      // command line; beats the environment and the config
  std::optional<std::int64_t> replicas;
  unsigned threads = 1;
  std::filesystem::path out_dir = "results";
  bool write_artifacts = true;
};

class ExperimentContext {
 public:
  ExperimentContext(std::string name, std::uint32_t id, Config cfg, std::uint64_t seed, const RunOptions& opt,
                    Report& rep)
      : name_(std::move(name)), id_(id), cfg_(std::move(cfg)), seed_(seed), opt_(opt), rep_(rep) {}

  const Config& cfg() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  unsigned threads() const { return opt_.threads; }
  Report& report() { return rep_; }
  RandomStream stream(std::uint32_t rung, std::uint32_t replica) const {
    return make_stream(seed_, id_, rung, replica);
  }
  std::int64_t replicas(std::int64_t dflt) const {
    const std::int64_t r = cfg_.integer("experiment.replicas", dflt);
    if (r < 1) fail(ErrorKind::ConfigError, "experiment.replicas must be >= 1");
    return r;
  }
  void csv(const std::string& file, const CsvWriter& w) {
    const std::string rel = name_ + "/" + file;
    rep_.artifact(rel);
    if (opt_.write_artifacts) w.write(opt_.out_dir / rel);
  }

 private:
  std::string name_;
  std::uint32_t id_;
  Config cfg_;
  std::uint64_t seed_;
  const RunOptions& opt_;
  Report& rep_;
};

struct ExperimentInfo {
  std::string name;
  std::uint32_t id;
  std::string summary;
  bool enabled_by_default;
  Config defaults;
  std::function<void(ExperimentContext&)> run;
};

const std::vector<ExperimentInfo>& experiments();
const ExperimentInfo& find_experiment(const std::string& name);

// Precedence: RunOptions::seed, then $CSBP_SEED, then experiment.seed, then kDefaultSeed.
std::uint64_t resolve_seed(const Config& cfg, const RunOptions& opt);

// Merges defaults with `user`, runs, writes <out>/<name>/report.json.
Report run_experiment(const std::string& name, const Config& user, const RunOptions& opt);

// Exit status: 0 pass, 1 assertion failure, 2 config error, 3 runtime or budget error.
int exit_code_for(const Error& e);

}  // namespace csbp
