#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "csbp/error.hpp"

namespace csbp {

using ordered_json = nlohmann::ordered_json;

// Shortest decimal that round-trips to the same double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// JSON has no inf/nan; those become strings.
inline ordered_json jnum(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

struct Check {
  std::string name;
  double value = 0.0;
  std::string rule;  // "<=", ">=", "<", "true"
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

class Report {
 public:
  Report(std::string experiment, std::uint64_t seed) : name_(std::move(experiment)), seed_(seed) {}

  const std::string& name() const { return name_; }
  std::uint64_t seed() const { return seed_; }

  void set_config(ordered_json c) { config_ = std::move(c); }
  ordered_json& results() { return results_; }
  const ordered_json& results() const { return results_; }

  bool check_le(const std::string& name, double value, double tol, std::string note = "") {
    return add({name, value, "<=", tol, value <= tol, std::move(note)});
  }
  bool check_ge(const std::string& name, double value, double tol, std::string note = "") {
    return add({name, value, ">=", tol, value >= tol, std::move(note)});
  }
  bool check_true(const std::string& name, bool ok, std::string note = "") {
    return add({name, ok ? 1.0 : 0.0, "true", 1.0, ok, std::move(note)});
  }
  void note(const std::string& text) { notes_.push_back(text); }
  void artifact(const std::string& relpath) { artifacts_.push_back(relpath); }

  const std::vector<Check>& checks() const { return checks_; }
  const Check* find(const std::string& name) const {
    for (const auto& c : checks_)
      if (c.name == name) return &c;
    return nullptr;
  }
  bool pass() const {
    for (const auto& c : checks_)
      if (!c.pass) return false;
    return true;
  }

  double runtime_seconds = 0.0;  // not serialized: reports stay byte-stable

  ordered_json to_json() const {
    ordered_json j;
    j["experiment"] = name_;
    j["seed"] = seed_;
    j["config"] = config_;
    ordered_json cs = ordered_json::array();
    for (const auto& c : checks_) {
      ordered_json x;
      x["name"] = c.name;
      x["value"] = jnum(c.value);
      x["rule"] = c.rule;
      x["tolerance"] = jnum(c.tolerance);
      x["pass"] = c.pass;
      if (!c.note.empty()) x["note"] = c.note;
      cs.push_back(x);
    }
    j["checks"] = cs;
    j["results"] = results_.is_null() ? ordered_json::object() : results_;
    j["notes"] = notes_;
    j["artifacts"] = artifacts_;
    j["pass"] = pass();
    return j;
  }
  std::string dump() const { return to_json().dump(2) + "\n"; }

 private:
  bool add(Check c) {
    checks_.push_back(std::move(c));
    return checks_.back().pass;
  }

  std::string name_;
  std::uint64_t seed_;
  ordered_json config_ = ordered_json::object();
  ordered_json results_ = ordered_json::object();
  std::vector<Check> checks_;
  std::vector<std::string> notes_;
  std::vector<std::string> artifacts_;
};

// "# schema: <name>" line, then a header row, then rows.
class CsvWriter {
 public:
  CsvWriter(std::string schema, std::vector<std::string> header)
      : schema_(std::move(schema)), header_(std::move(header)) {}

  void row(const std::vector<double>& values) {
    if (values.size() != header_.size()) fail(ErrorKind::DomainError, "csv row width mismatch");
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) line += (i ? "," : "") + fmt(values[i]);
    rows_.push_back(std::move(line));
  }
  void row_text(const std::vector<std::string>& values) {
    if (values.size() != header_.size()) fail(ErrorKind::DomainError, "csv row width mismatch");
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) line += (i ? "," : "") + values[i];
    rows_.push_back(std::move(line));
  }

  std::string str() const {
    std::string out = "# schema: " + schema_ + "\n";
    for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
    out += "\n";
    for (const auto& r : rows_) out += r + "\n";
    return out;
  }

  void write(const std::filesystem::path& path) const {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::ConfigError, "cannot write " + path.string());
    out << str();
  }

 private:
  std::string schema_;
  std::vector<std::string> header_;
  std::vector<std::string> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::ConfigError, "cannot write " + path.string());
  out << text;
}

}  // namespace csbp
