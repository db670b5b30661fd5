#pragma once

// Plain-text experiment configuration:
//
//   experiment = rate1d
//   [field]
//   name = sin_bump
//   [integrand]
//   name = quadratic
//   [sweep]
//   h = 0.2, 0.1, 0.05
//
// Lines starting with '#' or ';' are comments. Keys before the first section
// header belong to the section "run".

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nonlocal_rate/quadrature.hpp"

namespace nonlocal_rate {

/// Invalid configuration or input (exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IniFile {
 public:
  using Section = std::map<std::string, std::string>;

  static IniFile parse(std::istream& in, const std::string& origin = "<config>") {
    IniFile ini;
    std::string line, section = "run";
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError(where(origin, lineno) + "unterminated section header");
        section = trim(t.substr(1, t.size() - 2));
        if (section.empty()) throw ConfigError(where(origin, lineno) + "empty section name");
        ini.sections_[section];
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError(where(origin, lineno) + "expected 'key = value'");
      const std::string key = trim(t.substr(0, eq));
      if (key.empty()) throw ConfigError(where(origin, lineno) + "empty key");
      auto& sec = ini.sections_[section];
      if (sec.count(key)) throw ConfigError(where(origin, lineno) + "duplicate key '" + key + "'");
      sec[key] = trim(t.substr(eq + 1));
    }
    return ini;
  }

  static IniFile load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse(in, path.string());
  }

  bool has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key);
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    used_.insert(section + "." + key);
    auto it = sections_.find(section);
    if (it == sections_.end()) return std::nullopt;
    auto kt = it->second.find(key);
    if (kt == it->second.end()) return std::nullopt;
    return kt->second;
  }

  /// Keys present in the file that were never read.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [s, kv] : sections_)
      for (const auto& [k, v] : kv)
        if (!used_.count(s + "." + k)) out.push_back(s + "." + k);
    return out;
  }

  const std::map<std::string, Section>& sections() const { return sections_; }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  static std::string where(const std::string& origin, int line) {
    return origin + ":" + std::to_string(line) + ": ";
  }

  std::map<std::string, Section> sections_;
  mutable std::set<std::string> used_;
};

namespace detail {

inline double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto t = IniFile::trim(s);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError(key + ": not a number: '" + s + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& s, const std::string& key) {
  Int v = 0;
  const auto t = IniFile::trim(s);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError(key + ": not an integer: '" + s + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, key));
  return out;
}

}  // namespace detail

struct FieldSpec {
  std::string name = "smooth_bump";  ///< smooth_bump, poly_bump, sin_bump, hat, random_bumps, zero, csv
  int dim = 1;
  std::vector<double> center;        ///< default: 0.5 in every coordinate
  double radius = 0.5;
  double amplitude = 1.0;
  int power = 4;
  std::uint64_t seed = 1;            ///< random_bumps
  double domain_lo = -1.0, domain_hi = 1.0;
  std::string path;                  ///< csv
  int derivative_order = 1;          ///< csv
};

struct KernelSpec {
  std::string name = "ball";
  double param = -1.0;               ///< gaussian cutoff or annulus inner radius
  double odd_perturbation = 0.0;     ///< nonzero: K(z)(1 + eps z_0), rejected by validation
};

struct ExperimentConfig {
  std::string experiment;
  FieldSpec field;
  std::string integrand = "quadratic";
  KernelSpec kernel;
  std::vector<double> h_list;
  QuadratureScheme quadrature;
  std::string method = "direct";     ///< F_h backend: direct or monte_carlo
  std::filesystem::path output_dir = "out";
  std::optional<std::uint64_t> seed;
  std::filesystem::path source;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"rate1d",        "ratend",  "slice-check",
                                              "kernel-report", "h2-probe", "bounds-audit"};
  return names;
}

/// Builds a config from an INI file. Unknown keys are rejected.
inline ExperimentConfig parse_config(const IniFile& ini) {
  using detail::parse_double;
  using detail::parse_int;
  ExperimentConfig c;
  if (auto v = ini.get("run", "experiment")) c.experiment = *v;
  if (auto v = ini.get("run", "seed")) c.seed = parse_int<std::uint64_t>(*v, "run.seed");
  if (auto v = ini.get("run", "threads")) c.quadrature.threads = parse_int<int>(*v, "run.threads");
  if (auto v = ini.get("run", "method")) c.method = *v;
  if (auto v = ini.get("output", "dir")) c.output_dir = *v;

  auto& f = c.field;
  if (auto v = ini.get("field", "name")) f.name = *v;
  if (auto v = ini.get("field", "dim")) f.dim = parse_int<int>(*v, "field.dim");
  if (auto v = ini.get("field", "center")) f.center = detail::parse_list(*v, "field.center");
  if (auto v = ini.get("field", "radius")) f.radius = parse_double(*v, "field.radius");
  if (auto v = ini.get("field", "amplitude")) f.amplitude = parse_double(*v, "field.amplitude");
  if (auto v = ini.get("field", "power")) f.power = parse_int<int>(*v, "field.power");
  if (auto v = ini.get("field", "seed")) f.seed = parse_int<std::uint64_t>(*v, "field.seed");
  if (auto v = ini.get("field", "domain_lo")) f.domain_lo = parse_double(*v, "field.domain_lo");
  if (auto v = ini.get("field", "domain_hi")) f.domain_hi = parse_double(*v, "field.domain_hi");
  if (auto v = ini.get("field", "path")) f.path = *v;
  if (auto v = ini.get("field", "derivative_order")) f.derivative_order = parse_int<int>(*v, "field.derivative_order");

  if (auto v = ini.get("integrand", "name")) c.integrand = *v;
  if (auto v = ini.get("kernel", "name")) c.kernel.name = *v;
  if (auto v = ini.get("kernel", "param")) c.kernel.param = parse_double(*v, "kernel.param");
  if (auto v = ini.get("kernel", "odd_perturbation"))
    c.kernel.odd_perturbation = parse_double(*v, "kernel.odd_perturbation");
  if (auto v = ini.get("sweep", "h")) c.h_list = detail::parse_list(*v, "sweep.h");

  auto& q = c.quadrature;
  auto qi = [&](const char* key, int& dst) {
    if (auto v = ini.get("quadrature", key)) dst = parse_int<int>(*v, std::string("quadrature.") + key);
  };
  auto qd = [&](const char* key, double& dst) {
    if (auto v = ini.get("quadrature", key)) dst = parse_double(*v, std::string("quadrature.") + key);
  };
  qi("gauss_order", q.gauss_order);
  qi("inner_order", q.inner_order);
  qi("theta_order", q.theta_order);
  qd("tol", q.tol);
  qi("max_refinements", q.max_refinements);
  qi("nd_x_panels", q.nd_x_panels);
  qi("nd_x_order", q.nd_x_order);
  qi("nd_max_refinements", q.nd_max_refinements);
  qd("nd_tol", q.nd_tol);
  qi("radial_order", q.radial_order);
  qi("radial_panels", q.radial_panels);
  qi("radial_graded", q.radial_graded);
  qi("angular", q.angular);
  qd("slice_dx", q.slice_dx);
  qi("slice_panels", q.slice_panels);
  qi("slice_order", q.slice_order);
  qd("kernel_tol", q.kernel_tol);
  qi("kernel_grid", q.kernel_grid);
  qi("mc_strata", q.mc_strata);
  if (auto v = ini.get("quadrature", "mc_samples"))
    q.mc_samples = detail::parse_int<std::size_t>(*v, "quadrature.mc_samples");
  if (auto v = ini.get("quadrature", "x_rule")) {
    if (*v == "auto") q.nd_x_rule = XRule::automatic;
    else if (*v == "gauss") q.nd_x_rule = XRule::gauss;
    else if (*v == "trapezoid") q.nd_x_rule = XRule::trapezoid;
    else throw ConfigError("quadrature.x_rule: expected auto, gauss or trapezoid");
  }

  const auto unused = ini.unused();
  if (!unused.empty()) throw ConfigError("unknown config key '" + unused.front() + "'");
  return c;
}

/// Checks the invariants of a config; throws ConfigError.
inline void validate_config(const ExperimentConfig& c) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end())
    throw ConfigError("unknown experiment '" + c.experiment + "'");
  if (c.field.dim < 1 || c.field.dim > 3) throw ConfigError("field.dim must be 1, 2 or 3");
  if (c.experiment == "rate1d" && c.field.dim != 1) throw ConfigError("rate1d requires field.dim = 1");
  if (c.experiment == "slice-check" && c.field.dim == 1) throw ConfigError("slice-check requires field.dim >= 2");
  if (c.experiment != "kernel-report") {
    if (c.h_list.empty()) throw ConfigError("sweep.h must list at least one step");
    for (std::size_t i = 0; i < c.h_list.size(); ++i) {
      if (!(c.h_list[i] > 0.0)) throw ConfigError("sweep.h entries must be positive");
      if (i > 0 && !(c.h_list[i] < c.h_list[i - 1])) throw ConfigError("sweep.h must be strictly decreasing");
    }
  }
  if (!c.field.center.empty() && static_cast<int>(c.field.center.size()) != c.field.dim)
    throw ConfigError("field.center must have field.dim entries");
  if (c.method != "direct" && c.method != "monte_carlo") throw ConfigError("run.method must be direct or monte_carlo");
  if (c.method == "monte_carlo") {
    if (!c.seed) throw ConfigError("run.seed is required with the monte_carlo method");
    if (c.quadrature.mc_samples == 0) throw ConfigError("quadrature.mc_samples must be positive for monte_carlo");
  }
  if (c.field.name == "csv" && c.field.path.empty()) throw ConfigError("field.path is required for csv fields");
  const auto& q = c.quadrature;
  if (q.gauss_order < 1 || q.inner_order < 1 || q.theta_order < 1 || q.nd_x_order < 1 || q.radial_order < 1 ||
      q.slice_order < 1 || q.nd_x_panels < 1 || q.slice_panels < 1 || q.radial_panels < 1 || q.angular < 1)
    throw ConfigError("quadrature orders and panel counts must be positive");
  if (!(q.tol > 0.0) || !(q.nd_tol > 0.0) || !(q.slice_dx > 0.0)) throw ConfigError("tolerances must be positive");
  if (q.threads < 0) throw ConfigError("run.threads must be non-negative");
}

}  // namespace nonlocal_rate
