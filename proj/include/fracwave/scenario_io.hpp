#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fracwave/errors.hpp"
#include "fracwave/evolution.hpp"
#include "fracwave/verification.hpp"

namespace fracwave {

/// Closed vocabulary of initial-data and obstacle profiles: named analytic
/// shapes with parameters, plus tabulated piecewise-linear data.
struct ProfileSpec {
  enum class Kind { constant, sine, table };
  Kind kind = Kind::constant;
  double value = 0.0;      // constant
  double amplitude = 1.0;  // sine: amplitude * sin(frequency x + phase) + offset
  double frequency = 1.0;
  double phase = 0.0;
  double offset = 0.0;
  std::vector<double> xs;  // table knots, strictly increasing
  std::vector<double> ys;

  bool operator==(const ProfileSpec&) const = default;
};

inline double evaluate(const ProfileSpec& p, double x) {
  switch (p.kind) {
    case ProfileSpec::Kind::constant:
      return p.value;
    case ProfileSpec::Kind::sine:
      return p.amplitude * std::sin(p.frequency * x + p.phase) + p.offset;
    case ProfileSpec::Kind::table: {
      if (x <= p.xs.front()) return p.ys.front();
      if (x >= p.xs.back()) return p.ys.back();
      const auto it = std::upper_bound(p.xs.begin(), p.xs.end(), x);
      const std::size_t k = static_cast<std::size_t>(it - p.xs.begin());
      const double t = (x - p.xs[k - 1]) / (p.xs[k] - p.xs[k - 1]);
      return (1.0 - t) * p.ys[k - 1] + t * p.ys[k];
    }
  }
  return 0.0;
}

struct ObstacleSpec {
  enum class Kind { none, lower, lower_upper };
  Kind kind = Kind::none;
  std::optional<ProfileSpec> lower;
  std::optional<ProfileSpec> upper;

  bool operator==(const ObstacleSpec&) const = default;
};

struct SolverSpec {
  double grad_tol = 0.0;  // 0: derived from the step system scale at build time
  int max_iters = 500000;
  double step_grow = 1.2;
  double step_shrink = 0.5;

  bool operator==(const SolverSpec&) const = default;
};

struct OutputSpec {
  int stride = 1;  // thins persisted snapshots, never the computation

  bool operator==(const OutputSpec&) const = default;
};

/// External representation of a run; parses from and serializes to JSON.
struct ScenarioConfig {
  double a = 0.0;
  double b = 1.0;
  int n_cells = 100;
  double s = 1.0;
  double T = 1.0;
  int n_steps = 100;
  double bc_left = 0.0;
  double bc_right = 0.0;
  ProfileSpec u0;
  ProfileSpec v0;
  ObstacleSpec obstacle;
  SolverSpec solver;
  OutputSpec output;
  bool experimental = false;

  bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline const json& require_field(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError("config: missing field '" + ctx + key + "'");
  return j.at(key);
}

inline double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError("config: '" + where + "' must be a number");
  return j.get<double>();
}

inline int as_integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError("config: '" + where + "' must be an integer");
  return j.get<int>();
}

inline double number_or(const json& j, const std::string& key, double fallback,
                        const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  return as_number(j.at(key), ctx + key);
}

inline ProfileSpec parse_profile(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("config: '" + ctx + "' must be an object");
  const std::string kind = require_field(j, "profile", ctx + ".").get<std::string>();
  ProfileSpec p;
  if (kind == "constant") {
    p.kind = ProfileSpec::Kind::constant;
    p.value = as_number(require_field(j, "value", ctx + "."), ctx + ".value");
  } else if (kind == "sine") {
    p.kind = ProfileSpec::Kind::sine;
    p.amplitude = number_or(j, "amplitude", 1.0, ctx + ".");
    p.frequency = number_or(j, "frequency", 1.0, ctx + ".");
    p.phase = number_or(j, "phase", 0.0, ctx + ".");
    p.offset = number_or(j, "offset", 0.0, ctx + ".");
  } else if (kind == "table") {
    p.kind = ProfileSpec::Kind::table;
    for (const auto& v : require_field(j, "x", ctx + ".")) p.xs.push_back(as_number(v, ctx + ".x"));
    for (const auto& v : require_field(j, "y", ctx + ".")) p.ys.push_back(as_number(v, ctx + ".y"));
    if (p.xs.size() < 2 || p.xs.size() != p.ys.size())
      throw ConfigError("config: '" + ctx + "': table needs matching x/y lists with >= 2 knots");
    for (std::size_t k = 1; k < p.xs.size(); ++k)
      if (!(p.xs[k] > p.xs[k - 1]))
        throw ConfigError("config: '" + ctx + ".x' must be strictly increasing");
  } else {
    throw ConfigError("config: '" + ctx + ".profile': unknown profile '" + kind +
                      "' (expected constant, sine or table)");
  }
  return p;
}

inline ordered_json serialize_profile(const ProfileSpec& p) {
  ordered_json j;
  switch (p.kind) {
    case ProfileSpec::Kind::constant:
      j["profile"] = "constant";
      j["value"] = p.value;
      break;
    case ProfileSpec::Kind::sine:
      j["profile"] = "sine";
      j["amplitude"] = p.amplitude;
      j["frequency"] = p.frequency;
      j["phase"] = p.phase;
      j["offset"] = p.offset;
      break;
    case ProfileSpec::Kind::table:
      j["profile"] = "table";
      j["x"] = p.xs;
      j["y"] = p.ys;
      break;
  }
  return j;
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& j) {
  using detail::as_integer;
  using detail::as_number;
  using detail::require_field;
  ScenarioConfig cfg;
  const auto& domain = require_field(j, "domain", "");
  cfg.a = as_number(require_field(domain, "a", "domain."), "domain.a");
  cfg.b = as_number(require_field(domain, "b", "domain."), "domain.b");
  if (!(cfg.b > cfg.a)) throw ConfigError("config: 'domain': b must exceed a");
  cfg.n_cells = as_integer(require_field(j, "n_cells", ""), "n_cells");
  if (cfg.n_cells < 2) throw ConfigError("config: 'n_cells' must be at least 2");
  cfg.s = as_number(require_field(j, "s", ""), "s");
  if (!(cfg.s > 0.0 && cfg.s <= 1.0)) throw ConfigError("config: 's' must lie in (0, 1]");
  cfg.T = as_number(require_field(j, "T", ""), "T");
  if (!(cfg.T > 0.0)) throw ConfigError("config: 'T' must be positive");
  cfg.n_steps = as_integer(require_field(j, "n_steps", ""), "n_steps");
  if (cfg.n_steps < 1) throw ConfigError("config: 'n_steps' must be at least 1");

  const auto& bc = require_field(j, "bc", "");
  cfg.bc_left = as_number(require_field(bc, "left", "bc."), "bc.left");
  cfg.bc_right = as_number(require_field(bc, "right", "bc."), "bc.right");
  if (cfg.s < 1.0 && (cfg.bc_left != 0.0 || cfg.bc_right != 0.0))
    throw ConfigError("config: 'bc': fractional order s < 1 requires zero boundary values; "
                      "the solution is extended by zero outside the domain");

  cfg.u0 = detail::parse_profile(require_field(j, "u0", ""), "u0");
  cfg.v0 = detail::parse_profile(require_field(j, "v0", ""), "v0");

  const auto& obstacle = require_field(j, "obstacle", "");
  const std::string kind = require_field(obstacle, "kind", "obstacle.").get<std::string>();
  if (kind == "none") {
    cfg.obstacle.kind = ObstacleSpec::Kind::none;
  } else if (kind == "lower") {
    cfg.obstacle.kind = ObstacleSpec::Kind::lower;
    cfg.obstacle.lower =
        detail::parse_profile(require_field(obstacle, "lower", "obstacle."), "obstacle.lower");
  } else if (kind == "lower_upper") {
    cfg.obstacle.kind = ObstacleSpec::Kind::lower_upper;
    cfg.obstacle.lower =
        detail::parse_profile(require_field(obstacle, "lower", "obstacle."), "obstacle.lower");
    cfg.obstacle.upper =
        detail::parse_profile(require_field(obstacle, "upper", "obstacle."), "obstacle.upper");
  } else {
    throw ConfigError("config: 'obstacle.kind': expected none, lower or lower_upper");
  }

  if (j.contains("solver")) {
    const auto& solver = j.at("solver");
    cfg.solver.grad_tol = detail::number_or(solver, "grad_tol", 0.0, "solver.");
    if (solver.contains("max_iters"))
      cfg.solver.max_iters = as_integer(solver.at("max_iters"), "solver.max_iters");
    cfg.solver.step_grow = detail::number_or(solver, "step_grow", 1.2, "solver.");
    cfg.solver.step_shrink = detail::number_or(solver, "step_shrink", 0.5, "solver.");
    if (cfg.solver.grad_tol < 0.0) throw ConfigError("config: 'solver.grad_tol' must be >= 0");
    if (cfg.solver.max_iters < 1) throw ConfigError("config: 'solver.max_iters' must be >= 1");
    if (!(cfg.solver.step_grow > 1.0))
      throw ConfigError("config: 'solver.step_grow' must exceed 1");
    if (!(cfg.solver.step_shrink > 0.0 && cfg.solver.step_shrink < 1.0))
      throw ConfigError("config: 'solver.step_shrink' must lie in (0, 1)");
  }
  if (j.contains("output")) {
    const auto& output = j.at("output");
    if (output.contains("stride"))
      cfg.output.stride = as_integer(output.at("stride"), "output.stride");
    if (cfg.output.stride < 1) throw ConfigError("config: 'output.stride' must be >= 1");
  }
  if (j.contains("experimental")) {
    if (!j.at("experimental").is_boolean())
      throw ConfigError("config: 'experimental' must be a boolean");
    cfg.experimental = j.at("experimental").get<bool>();
  }
  return cfg;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline nlohmann::ordered_json serialize_config(const ScenarioConfig& cfg) {
  using detail::ordered_json;
  ordered_json j;
  j["domain"] = {{"a", cfg.a}, {"b", cfg.b}};
  j["n_cells"] = cfg.n_cells;
  j["s"] = cfg.s;
  j["T"] = cfg.T;
  j["n_steps"] = cfg.n_steps;
  j["bc"] = {{"left", cfg.bc_left}, {"right", cfg.bc_right}};
  j["u0"] = detail::serialize_profile(cfg.u0);
  j["v0"] = detail::serialize_profile(cfg.v0);
  ordered_json obstacle;
  switch (cfg.obstacle.kind) {
    case ObstacleSpec::Kind::none:
      obstacle["kind"] = "none";
      break;
    case ObstacleSpec::Kind::lower:
      obstacle["kind"] = "lower";
      obstacle["lower"] = detail::serialize_profile(*cfg.obstacle.lower);
      break;
    case ObstacleSpec::Kind::lower_upper:
      obstacle["kind"] = "lower_upper";
      obstacle["lower"] = detail::serialize_profile(*cfg.obstacle.lower);
      obstacle["upper"] = detail::serialize_profile(*cfg.obstacle.upper);
      break;
  }
  j["obstacle"] = obstacle;
  j["solver"] = {{"grad_tol", cfg.solver.grad_tol},
                 {"max_iters", cfg.solver.max_iters},
                 {"step_grow", cfg.solver.step_grow},
                 {"step_shrink", cfg.solver.step_shrink}};
  j["output"] = {{"stride", cfg.output.stride}};
  j["experimental"] = cfg.experimental;
  return j;
}

inline std::vector<std::string> preset_names() {
  return {"paper-fig1", "free-sine", "fractional-free", "double-obstacle-demo"};
}

/// Built-in scenarios. "paper-fig1" is a string over (0, 2 pi) pushed onto a
/// flat obstacle at zero with constant downward velocity; the free presets
/// are plucked-string runs without an obstacle.
inline ScenarioConfig preset(const std::string& name) {
  const double pi = std::numbers::pi;
  ScenarioConfig cfg;
  if (name == "paper-fig1") {
    cfg.a = 0.0;
    cfg.b = 2.0 * pi;
    cfg.n_cells = 200;
    cfg.s = 1.0;
    cfg.T = 10.0;
    cfg.n_steps = 1000;
    cfg.bc_left = cfg.bc_right = 1.2;
    cfg.u0.kind = ProfileSpec::Kind::sine;
    cfg.u0.offset = 1.2;
    cfg.v0.kind = ProfileSpec::Kind::constant;
    cfg.v0.value = -2.0;
    cfg.obstacle.kind = ObstacleSpec::Kind::lower;
    cfg.obstacle.lower = ProfileSpec{};
    cfg.obstacle.lower->kind = ProfileSpec::Kind::constant;
    cfg.obstacle.lower->value = 0.0;
    cfg.output.stride = 10;
    return cfg;
  }
  if (name == "free-sine") {
    cfg.a = 0.0;
    cfg.b = pi;
    cfg.n_cells = 100;
    cfg.s = 1.0;
    cfg.T = 3.0;
    cfg.n_steps = 300;
    cfg.u0.kind = ProfileSpec::Kind::sine;
    cfg.v0.kind = ProfileSpec::Kind::constant;
    cfg.v0.value = 0.0;
    cfg.obstacle.kind = ObstacleSpec::Kind::none;
    return cfg;
  }
  if (name == "fractional-free") {
    cfg = preset("free-sine");
    cfg.s = 0.5;
    return cfg;
  }
  if (name == "double-obstacle-demo") {
    cfg.a = 0.0;
    cfg.b = 2.0 * pi;
    cfg.n_cells = 200;
    cfg.s = 1.0;
    cfg.T = 4.0;
    cfg.n_steps = 400;
    cfg.u0.kind = ProfileSpec::Kind::sine;
    cfg.u0.amplitude = 0.6;
    cfg.v0.kind = ProfileSpec::Kind::constant;
    cfg.v0.value = -1.5;
    cfg.obstacle.kind = ObstacleSpec::Kind::lower_upper;
    cfg.obstacle.lower = ProfileSpec{};
    cfg.obstacle.lower->kind = ProfileSpec::Kind::constant;
    cfg.obstacle.lower->value = -0.8;
    cfg.obstacle.upper = ProfileSpec{};
    cfg.obstacle.upper->kind = ProfileSpec::Kind::constant;
    cfg.obstacle.upper->value = 0.8;
    cfg.output.stride = 4;
    cfg.experimental = true;
    return cfg;
  }
  std::string names;
  for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
  throw UnknownPresetError("unknown preset '" + name + "'; valid presets: " + names);
}

/// Materializes a config into a runnable Scenario, optionally refined by an
/// integer factor in space and time. Solver defaults are resolved here.
inline Scenario build_scenario(const ScenarioConfig& cfg, int refine = 1) {
  if (cfg.s < 1.0 && (cfg.bc_left != 0.0 || cfg.bc_right != 0.0))
    throw ConfigError("config: 'bc': fractional order s < 1 requires zero boundary values; "
                      "the solution is extended by zero outside the domain");
  const Grid1D grid = build_grid(cfg.a, cfg.b, cfg.n_cells * refine);
  const FractionalOrder order(cfg.s);

  const ProfileSpec u0p = cfg.u0;
  const ProfileSpec v0p = cfg.v0;
  auto u0_fn = [u0p](double x) { return evaluate(u0p, x); };
  auto v0_fn = [v0p](double x) { return evaluate(v0p, x); };

  SolverConfig solver;
  solver.max_iters = cfg.solver.max_iters;
  solver.step_grow = cfg.solver.step_grow;
  solver.step_shrink = cfg.solver.step_shrink;
  const double tau = cfg.T / (cfg.n_steps * refine);
  solver.grad_tol = cfg.solver.grad_tol > 0.0
                        ? cfg.solver.grad_tol
                        : 1e-12 * (1.0 / (tau * tau) + stiffness_inf_norm(grid, order));

  Scenario sc{grid,
              order,
              cfg.T,
              cfg.n_steps * refine,
              interpolate_function(grid, u0_fn, cfg.bc_left, cfg.bc_right),
              interpolate_function(grid, v0_fn, 0.0, 0.0),
              {},
              {},
              solver,
              1e-9,
              u0_fn,
              v0_fn,
              {},
              {}};
  if (cfg.obstacle.lower) {
    const ProfileSpec lp = *cfg.obstacle.lower;
    auto lower_fn = [lp](double x) { return evaluate(lp, x); };
    sc.lower = interpolate_function(grid, lower_fn, lower_fn(grid.a), lower_fn(grid.b));
    sc.lower_fn = lower_fn;
  }
  if (cfg.obstacle.upper) {
    const ProfileSpec up = *cfg.obstacle.upper;
    auto upper_fn = [up](double x) { return evaluate(up, x); };
    sc.upper = interpolate_function(grid, upper_fn, upper_fn(grid.a), upper_fn(grid.b));
    sc.upper_fn = upper_fn;
  }
  try {
    validate_scenario(sc);
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return sc;
}

namespace detail {

inline void append_float(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream stream(path, std::ios::binary);
  if (!stream) throw IoError("cannot open '" + path.string() + "' for writing");
  stream << content;
  if (!stream) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace detail

/// Serializes a finished run: energy.csv, snapshots.csv, contacts.csv,
/// impacts.json and run_meta.json. All floats are written with 17 significant
/// digits; rows are ordered by increasing t, then increasing x. Identical
/// runs produce byte-identical files.
inline std::vector<std::filesystem::path> write_outputs(const TrajectoryRecord& rec,
                                                        const StabilizationReport& report,
                                                        const std::filesystem::path& dir,
                                                        int stride = 1,
                                                        const ScenarioConfig* config_echo = nullptr) {
  namespace fs = std::filesystem;
  if (stride < 1) throw IoError("write_outputs: stride must be >= 1");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

  std::vector<fs::path> written;
  const int n = rec.n();
  const Grid1D& grid = rec.scenario.grid;

  {
    std::string out = "t,E,kinetic,seminorm_sq\n";
    for (int i = 0; i <= n; ++i) {
      detail::append_float(out, rec.time(i));
      out += ',';
      detail::append_float(out, rec.energies[i]);
      out += ',';
      detail::append_float(out, rec.kinetic[i]);
      out += ',';
      detail::append_float(out, rec.elastic[i]);
      out += '\n';
    }
    detail::write_text_file(dir / "energy.csv", out);
    written.push_back(dir / "energy.csv");
  }

  {
    std::string out = "t,x,u,v\n";
    int i = 0;
    while (true) {
      for (int j = 0; j <= grid.n_cells; ++j) {
        detail::append_float(out, rec.time(i));
        out += ',';
        detail::append_float(out, grid.node(j));
        out += ',';
        detail::append_float(out, rec.u(i).value(j));
        out += ',';
        const double v = (j == 0 || j == grid.n_cells) ? 0.0 : rec.velocities[i](j - 1);
        detail::append_float(out, v);
        out += '\n';
      }
      if (i == n) break;
      i = std::min(i + stride, n);
    }
    detail::write_text_file(dir / "snapshots.csv", out);
    written.push_back(dir / "snapshots.csv");
  }

  {
    std::string out = "t,j_min,j_max\n";
    for (int i = 0; i <= n; ++i) {
      if (rec.contacts[i].empty()) continue;
      detail::append_float(out, rec.time(i));
      out += ',' + std::to_string(rec.contacts[i].front());
      out += ',' + std::to_string(rec.contacts[i].back());
      out += '\n';
    }
    detail::write_text_file(dir / "contacts.csv", out);
    written.push_back(dir / "contacts.csv");
  }

  {
    nlohmann::ordered_json j;
    if (report.t_bar)
      j["t_bar"] = *report.t_bar;
    else
      j["t_bar"] = nullptr;
    j["post_t_bar_energy_oscillation"] = report.oscillation;
    j["osc_tol"] = report.osc_tol;
    j["impacts"] = nlohmann::ordered_json::array();
    for (const auto& impact : report.impacts)
      j["impacts"].push_back({{"t_start", impact.t_start},
                              {"t_end", impact.t_end},
                              {"energy_drop", impact.energy_drop}});
    detail::write_text_file(dir / "impacts.json", j.dump(2) + "\n");
    written.push_back(dir / "impacts.json");
  }

  {
    nlohmann::ordered_json j;
    if (config_echo) j["config"] = serialize_config(*config_echo);
    j["derived"] = {{"h", grid.h},
                    {"tau", rec.tau},
                    {"interior_nodes", grid.interior_count()},
                    {"grad_tol", rec.scenario.solver.grad_tol},
                    {"contact_tol", rec.scenario.contact_tol},
                    {"stride", stride}};
    detail::write_text_file(dir / "run_meta.json", j.dump(2) + "\n");
    written.push_back(dir / "run_meta.json");
  }

  return written;
}

}  // namespace fracwave
