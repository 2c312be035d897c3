#pragma once

// Flat `key = value` scenario files. `#` starts a comment; blank lines are
// ignored; unknown keys are errors. Omitted keys keep their defaults.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "provisim/errors.hpp"
#include "provisim/provisioner.hpp"
#include "provisim/simcluster.hpp"

namespace provisim {

struct Scenario {
  WorkloadSpec workload = WorkloadSpec::wl1();
  ServerModel model;
  ControllerSpec controller;
  std::size_t steps = 50;
  std::string out_dir = "out";
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& msg)
      : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + msg),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, std::string_view key) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw UsageError(std::string(key) + ": expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(std::string_view s, std::string_view key) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw UsageError(std::string(key) + ": expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

inline Vec parse_list(std::string_view s, std::string_view key) {
  Vec out;
  for (auto item : split(s, ',')) out.push_back(parse_double(item, key));
  return out;
}

// none | gaussian:<stddev> | uniform:<half-width>
inline NoiseLaw parse_noise(std::string_view s, std::string_view key) {
  s = trim(s);
  if (s == "none") return NoiseLaw::none();
  const auto colon = s.find(':');
  const auto kind = s.substr(0, colon);
  if (colon == std::string_view::npos) throw UsageError(std::string(key) + ": expected kind:scale");
  const double scale = parse_double(s.substr(colon + 1), key);
  if (kind == "gaussian") return NoiseLaw::gaussian(scale);
  if (kind == "uniform") return NoiseLaw::uniform(scale);
  throw UsageError(std::string(key) + ": unknown noise law '" + std::string(kind) + "'");
}

// start:clients[:think_multiplier],...
inline std::vector<Phase> parse_phases(std::string_view s, std::string_view key) {
  std::vector<Phase> out;
  for (auto item : split(s, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() < 2 || parts.size() > 3) {
      throw UsageError(std::string(key) + ": phase must be start:clients[:multiplier]");
    }
    Phase p;
    p.start = parse_uint(parts[0], key);
    p.clients = parse_double(parts[1], key);
    if (parts.size() == 3) p.think_multiplier = parse_double(parts[2], key);
    out.push_back(p);
  }
  return out;
}

}  // namespace detail

inline FilterKind parse_filter_kind(std::string_view s) {
  if (s == "kalman") return FilterKind::kalman;
  if (s == "hinf") return FilterKind::hinf;
  if (s == "mcc") return FilterKind::mcc;
  throw UsageError("unknown filter '" + std::string(s) + "' (kalman|hinf|mcc)");
}

inline Topology parse_topology(std::string_view s) {
  if (s == "siso") return Topology::siso;
  if (s == "mimo") return Topology::mimo;
  throw UsageError("unknown topology '" + std::string(s) + "' (siso|mimo)");
}

// Applies one key. Throws UsageError for unknown keys or malformed values.
inline void set_key(Scenario& sc, std::string_view key, std::string_view raw) {
  using detail::parse_double;
  using detail::parse_uint;
  const std::string_view v = detail::trim(raw);
  auto& w = sc.workload;
  auto& m = sc.model;
  auto& c = sc.controller;

  if (key == "workload.preset") {
    if (v == "wl1") w.phases = WorkloadSpec::wl1().phases;
    else if (v == "wl2") w.phases = WorkloadSpec::wl2().phases;
    else throw UsageError("workload.preset: expected wl1 or wl2");
  } else if (key == "workload.phases") w.phases = detail::parse_phases(v, key);
  else if (key == "workload.think") w.think = parse_double(v, key);
  else if (key == "workload.gains") w.gains = detail::parse_list(v, key);
  else if (key == "workload.noise") w.demand_noise = detail::parse_noise(v, key);
  else if (key == "workload.seed") w.seed = parse_uint(v, key);
  else if (key == "model.r_base") m.r_base = parse_double(v, key);
  else if (key == "model.alpha") m.alpha = parse_double(v, key);
  else if (key == "model.gamma") m.gamma = parse_double(v, key);
  else if (key == "model.beta") m.beta = parse_double(v, key);
  else if (key == "model.epsilon") m.epsilon = parse_double(v, key);
  else if (key == "model.kappa") m.kappa = parse_double(v, key);
  else if (key == "model.slo") m.slo = parse_double(v, key);
  else if (key == "model.noise") m.measurement_noise = detail::parse_noise(v, key);
  else if (key == "controller.filter") c.filter = parse_filter_kind(v);
  else if (key == "controller.topology") c.topology = parse_topology(v);
  else if (key == "controller.theta") c.theta = parse_double(v, key);
  else if (key == "controller.sigma") c.sigma = parse_double(v, key);
  else if (key == "controller.D") c.allowable_error = parse_double(v, key);
  else if (key == "controller.c") {
    const double ratio = parse_double(v, key);
    if (!(ratio > 0.5 && ratio < 1.0)) throw UsageError("controller.c must be in (0.5, 1)");
    c.policy.h = 1.0 / ratio - 1.0;
  } else if (key == "controller.h") c.policy.h = parse_double(v, key);
  else if (key == "controller.T") c.window = parse_uint(v, key);
  else if (key == "controller.a_min") c.policy.a_min = parse_double(v, key);
  else if (key == "controller.a_max") c.policy.a_max = parse_double(v, key);
  else if (key == "controller.W0") c.W0 = parse_double(v, key);
  else if (key == "controller.V") c.V = parse_double(v, key);
  else if (key == "controller.P0") c.P0 = parse_double(v, key);
  else if (key == "controller.interval") c.interval = parse_double(v, key);
  else if (key == "controller.subinterval") c.subinterval = parse_double(v, key);
  else if (key == "controller.x0") {
    if (v == "first") c.x0.reset();
    else c.x0 = parse_double(v, key);
  } else if (key == "run.steps") sc.steps = parse_uint(v, key);
  else if (key == "run.out") sc.out_dir = std::string(v);
  else throw UsageError("unknown key '" + std::string(key) + "'");
}

inline void validate(const Scenario& sc) {
  sc.workload.validate();
  sc.model.validate();
  sc.controller.validate();
  if (sc.steps < sc.controller.window) throw UsageError("run.steps must be >= controller.T");
}

inline Scenario parse_scenario(std::istream& in, const std::string& source = "<scenario>") {
  Scenario sc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, lineno, "expected key = value");
    const auto key = detail::trim(s.substr(0, eq));
    try {
      set_key(sc, key, s.substr(eq + 1));
    } catch (const UsageError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open scenario file");
  return parse_scenario(in, path);
}

// `key=value` as given on the command line.
inline void apply_override(Scenario& sc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ParseError("--set", 0, "expected key=value, got '" + std::string(assignment) + "'");
  try {
    set_key(sc, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
  } catch (const UsageError& e) {
    throw ParseError("--set", 0, e.what());
  }
}

}  // namespace provisim
