#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/json_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "csbp/error.hpp"
#include "csbp/measures.hpp"
#include "csbp/mechanism.hpp"

namespace csbp {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& key) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size())
    fail(ErrorKind::ConfigError, key + ": not a number: '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& s, const std::string& key) {
  const std::string t = trim(s);
  std::int64_t v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size())
    fail(ErrorKind::ConfigError, key + ": not an integer: '" + s + "'");
  return v;
}

// Flat "section.key" = value store; lists are comma separated.
class Config {
 public:
  Config() = default;
  explicit Config(std::map<std::string, std::string> v) : values_(std::move(v)) {}

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  // Keys of `over` replace ours.
  void merge(const Config& over) {
    for (const auto& [k, v] : over.values_) values_[k] = v;
  }

  std::string str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorKind::ConfigError, "missing key " + key);
    return it->second;
  }
  std::string str(const std::string& key, const std::string& dflt) const { return has(key) ? str(key) : dflt; }
  double real(const std::string& key) const { return parse_double(str(key), key); }
  double real(const std::string& key, double dflt) const { return has(key) ? real(key) : dflt; }
  std::int64_t integer(const std::string& key) const { return parse_int(str(key), key); }
  std::int64_t integer(const std::string& key, std::int64_t dflt) const { return has(key) ? integer(key) : dflt; }
  bool flag(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    const std::string v = trim(str(key));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(ErrorKind::ConfigError, key + ": not a boolean: '" + v + "'");
  }
  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : split(str(key), ',')) out.push_back(parse_double(s, key));
    return out;
  }
  std::vector<std::int64_t> integers(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const auto& s : split(str(key), ',')) out.push_back(parse_int(s, key));
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

namespace detail {
inline void flatten(const boost::property_tree::ptree& t, const std::string& prefix,
                    std::map<std::string, std::string>& out) {
  if (t.empty()) {
    if (!prefix.empty()) out[prefix] = t.data();
    return;
  }
  bool list = true;
  for (const auto& kv : t) list = list && kv.first.empty();
  if (list) {
    std::string joined;
    for (const auto& kv : t) joined += (joined.empty() ? "" : ",") + kv.second.data();
    out[prefix] = joined;
    return;
  }
  for (const auto& kv : t) flatten(kv.second, prefix.empty() ? kv.first : prefix + "." + kv.first, out);
}
}  // namespace detail

inline Config parse_config(const std::string& text, bool json) {
  boost::property_tree::ptree t;
  std::istringstream in(text);
  try {
    if (json) boost::property_tree::read_json(in, t);
    else boost::property_tree::read_ini(in, t);
  } catch (const std::exception& e) {
    fail(ErrorKind::ConfigError, std::string("cannot parse config: ") + e.what());
  }
  std::map<std::string, std::string> flat;
  detail::flatten(t, "", flat);
  return Config(std::move(flat));
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ConfigError, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool json = path.extension() == ".json" || (first != std::string::npos && text[first] == '{');
  return parse_config(text, json);
}

// [mechanism] family = empty | atomic | stable | unit_stable | tempered_stable | stable_mixture | tabulated
inline JumpMeasure measure_from_config(const Config& c, const std::string& sec = "mechanism") {
  const std::string fam = c.str(sec + ".family", "empty");
  QuadratureSpec q;
  q.rel_tol = c.real(sec + ".rel_tol", q.rel_tol);
  try {
    if (fam == "empty") return JumpMeasure::empty();
    if (fam == "atomic") {
      std::vector<Atom> atoms;
      for (const auto& item : split(c.str(sec + ".atoms"), ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) fail(ErrorKind::ConfigError, sec + ".atoms: expected location:mass");
        atoms.push_back({parse_double(parts[0], sec + ".atoms"), parse_double(parts[1], sec + ".atoms")});
      }
      return JumpMeasure::atomic(std::move(atoms), q);
    }
    if (fam == "stable")
      return JumpMeasure::stable(c.real(sec + ".gamma"), c.real(sec + ".scale", 1.0), c.real(sec + ".lower", 0.0), q);
    if (fam == "unit_stable") return JumpMeasure::unit_stable(c.real(sec + ".gamma"), q);
    if (fam == "tempered_stable")
      return JumpMeasure::tempered_stable(c.real(sec + ".gamma"), c.real(sec + ".tilt", 1.0),
                                          c.real(sec + ".scale", 1.0), c.real(sec + ".lower", 0.0), q);
    if (fam == "stable_mixture") {
      std::vector<MixtureComponent> comps;
      for (const auto& item : split(c.str(sec + ".components"), ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 3) fail(ErrorKind::ConfigError, sec + ".components: expected gamma:weight:coefficient");
        comps.push_back({parse_double(parts[0], sec), parse_double(parts[1], sec), parse_double(parts[2], sec)});
      }
      return JumpMeasure::stable_mixture(std::move(comps), q);
    }
    if (fam == "tabulated") return JumpMeasure::tabulated(c.reals(sec + ".r"), c.reals(sec + ".density"), q);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    fail(ErrorKind::ConfigError, sec + ": invalid measure: " + e.what());
  }
  fail(ErrorKind::ConfigError, sec + ".family: unknown family '" + fam + "'");
}

// b defaults to beta - alpha; an inconsistent explicit b is rejected.
inline BranchingMechanism mechanism_from_config(const Config& c) {
  const double alpha = c.real("rescale.alpha", 0.0), beta = c.real("rescale.beta", 0.0);
  const double b = c.real("mechanism.b", beta - alpha);
  if ((c.has("rescale.alpha") || c.has("rescale.beta")) && std::abs(b - (beta - alpha)) > 1e-15)
    fail(ErrorKind::ConfigError, "mechanism.b must equal rescale.beta - rescale.alpha");
  const double cc = c.real("mechanism.c", 0.0);
  if (cc < 0.0) fail(ErrorKind::ConfigError, "mechanism.c must be >= 0");
  return BranchingMechanism{b, cc, measure_from_config(c)};
}

inline std::vector<int> ladder_from_config(const Config& c, const std::string& key = "rescale.N") {
  std::vector<int> out;
  for (auto v : c.integers(key)) {
    if (v < 1) fail(ErrorKind::ConfigError, key + ": N must be >= 1");
    if (!out.empty() && v <= out.back()) fail(ErrorKind::ConfigError, key + ": ladder must be strictly increasing");
    out.push_back(int(v));
  }
  if (out.empty()) fail(ErrorKind::ConfigError, key + ": empty ladder");
  return out;
}

inline RescaleParams rescale_from_config(const Config& c, int N) {
  const double alpha = c.real("rescale.alpha", 0.0), beta = c.real("rescale.beta", 0.0);
  if (alpha < 0.0 || beta < 0.0) fail(ErrorKind::ConfigError, "alpha and beta must be >= 0");
  return RescaleParams{N, alpha, beta, c.real("mechanism.c", 0.0)};
}

}  // namespace csbp
