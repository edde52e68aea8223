#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fracwave/scenario_io.hpp"
#include "fracwave/verification.hpp"

namespace fracwave {

namespace detail {

inline ScenarioConfig load_config(const std::string& preset_name, const std::string& config_path) {
  if (!preset_name.empty() && !config_path.empty())
    throw ConfigError("give either --preset or --config, not both");
  if (!preset_name.empty()) return preset(preset_name);
  if (config_path.empty()) throw ConfigError("one of --preset or --config is required");
  std::ifstream stream(config_path);
  if (!stream) throw ConfigError("cannot read config file '" + config_path + "'");
  std::stringstream buffer;
  buffer << stream.rdbuf();
  return parse_config_text(buffer.str());
}

struct CheckLine {
  std::string name;
  bool pass = true;
  double value = 0.0;
  double tol = 0.0;
};

inline void print_check_table(const std::vector<CheckLine>& lines) {
  std::printf("%-28s %-6s %-14s %s\n", "check", "status", "worst", "tolerance");
  for (const auto& line : lines)
    std::printf("%-28s %-6s %-14.4g %.4g\n", line.name.c_str(),
                line.pass ? "PASS" : "FAIL", line.value, line.tol);
}

/// Full verification sweep over a fresh run of the given scenario.
inline int cmd_verify(const ScenarioConfig& cfg) {
  const Scenario sc = build_scenario(cfg);
  const TrajectoryRecord rec = run_evolution(sc);
  const double e0 = rec.energies.front();
  const double energy_tol = 1e-8 * std::max(e0, 1.0);
  std::vector<CheckLine> lines;

  {
    const MonotoneCheck c = check_energy_monotone(rec, energy_tol);
    lines.push_back({"energy-monotone", c.pass, c.worst_increase, energy_tol});
  }
  {
    const BoundCheck c = check_key_estimate(rec, energy_tol);
    lines.push_back({"energy-bound", c.pass, c.max_energy - e0, energy_tol});
  }
  {
    double worst = 0.0;
    for (int i = 0; i <= rec.n(); ++i) {
      const Eigen::VectorXd v = (rec.u(i).interior - rec.u(i - 1).interior) / rec.tau;
      worst = std::max(worst, (v - rec.velocities[i]).lpNorm<Eigen::Infinity>());
    }
    lines.push_back({"velocity-consistency", worst <= 1e-12, worst, 1e-12});
  }
  {
    // ||u_i - u_j|| <= max_k ||v_k|| |t_i - t_j| follows from the telescoping
    // sum over steps; checked with a small rounding allowance.
    double vmax = 0.0;
    for (const auto& v : rec.velocities)
      vmax = std::max(vmax, std::sqrt(std::max(v.dot(rec.ops.mass * v), 0.0)));
    const int stride = rec.n() > 256 ? rec.n() / 128 : 1;
    double worst_excess = 0.0;
    for (int i = 0; i <= rec.n(); i += stride)
      for (int j = i + stride; j <= rec.n(); j += stride) {
        const Eigen::VectorXd d = rec.u(j).interior - rec.u(i).interior;
        const double dist = std::sqrt(std::max(d.dot(rec.ops.mass * d), 0.0));
        worst_excess = std::max(worst_excess, dist - vmax * (rec.time(j) - rec.time(i)));
      }
    const double tol = 1e-9 * std::max(vmax * rec.scenario.T, 1.0);
    lines.push_back({"lipschitz-in-time", worst_excess <= tol, worst_excess, tol});
  }
  if (sc.lower) {
    double worst = 0.0;
    for (int i = 0; i <= rec.n(); ++i)
      worst = std::max(worst, (sc.lower->interior - rec.u(i).interior).maxCoeff());
    lines.push_back({"feasibility", worst <= 1e-9, worst, 1e-9});

    const double a_norm = rec.ops.stiffness.cwiseAbs().rowwise().sum().maxCoeff();
    const double vi_tol =
        100.0 * sc.solver.grad_tol * (1.0 / (rec.tau * rec.tau) + a_norm);
    const ViCheck c = check_variational_inequality(rec, vi_tol);
    lines.push_back({"variational-inequality", c.pass,
                     std::max(c.worst_negative, c.worst_complementarity_ratio), vi_tol});
  } else {
    std::mt19937_64 rng(20240817);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<WeakTestFunction> tests;
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd phi(sc.grid.interior_count());
      for (Eigen::Index j = 0; j < phi.size(); ++j) phi(j) = unif(rng);
      const double center = 0.5 * sc.T * (1.0 + 0.8 * unif(rng));
      const double width = 0.3 * sc.T * (1.0 + 0.5 * unif(rng));
      tests.push_back({FieldP1(sc.grid, std::move(phi)), [center, width, T = sc.T](double t) {
                         if (t <= 0.0 || t >= T) return 0.0;
                         const double z = (t - center) / width;
                         return std::exp(-z * z) * std::sin(std::numbers::pi * t / T);
                       }});
    }
    const WeakFormResult c = check_weak_form_free(rec, tests);
    lines.push_back({"weak-form", c.passes(1e-8), c.worst_ratio, 1e-8});
  }

  print_check_table(lines);

  const StabilizationReport report = detect_stabilization(rec, 0.02);
  if (report.t_bar)
    std::printf("stabilization: energy settles at t = %.6g (oscillation %.3g), %zu impact(s)\n",
                *report.t_bar, report.oscillation, report.impacts.size());

  for (const auto& line : lines)
    if (!line.pass) return 1;
  return 0;
}

inline int cmd_run(const ScenarioConfig& cfg, const std::string& out_dir, double osc_tol) {
  if (cfg.experimental)
    std::cerr << "note: this scenario is experimental; variational-inequality "
                 "guarantees do not apply\n";
  const Scenario sc = build_scenario(cfg);
  const TrajectoryRecord rec = run_evolution(sc);
  const StabilizationReport report = detect_stabilization(rec, osc_tol);
  const auto files = write_outputs(rec, report, out_dir, cfg.output.stride, &cfg);
  std::printf("wrote %zu files to %s (final energy %.6g, initial %.6g)\n", files.size(),
              out_dir.c_str(), rec.energies.back(), rec.energies.front());
  return 0;
}

inline int cmd_convergence(const ScenarioConfig& cfg, int levels, const std::string& out_path) {
  const Scenario sc = build_scenario(cfg);

  // A closed-form reference exists for the classical free string with a pure
  // sine pluck and zero boundary data; otherwise the finest level is the
  // reference.
  std::function<double(double, double)> exact;
  const bool sine_mode = cfg.s == 1.0 && cfg.bc_left == 0.0 && cfg.bc_right == 0.0 &&
                         cfg.obstacle.kind == ObstacleSpec::Kind::none &&
                         cfg.u0.kind == ProfileSpec::Kind::sine && cfg.u0.offset == 0.0 &&
                         cfg.u0.phase == 0.0 && cfg.a == 0.0 &&
                         cfg.v0.kind == ProfileSpec::Kind::constant && cfg.v0.value == 0.0 &&
                         std::abs(std::sin(cfg.u0.frequency * cfg.b)) < 1e-12;
  if (sine_mode) {
    const double amp = cfg.u0.amplitude;
    const double freq = cfg.u0.frequency;
    exact = [amp, freq](double t, double x) { return amp * std::sin(freq * x) * std::cos(freq * t); };
  }

  const ConvergenceTable table = convergence_study(sc, sine_mode ? &exact : nullptr, levels);

  std::string out = "n_cells,n_steps,err_max_l2,err_at_T,rate\n";
  for (const auto& row : table.rows) {
    out += std::to_string(row.n_cells) + ',' + std::to_string(row.n_steps) + ',';
    if (row.has_error) {
      detail::append_float(out, row.err_max_l2);
      out += ',';
      detail::append_float(out, row.err_final);
    } else {
      out += "reference,reference";
    }
    out += ',';
    if (row.has_rate)
      detail::append_float(out, row.rate);
    else
      out += "n/a";
    out += '\n';
  }
  std::fputs(out.c_str(), stdout);
  if (!out_path.empty()) detail::write_text_file(out_path, out);
  return 0;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"1D finite element solver for wave dynamics with obstacles and the "
               "fractional Laplacian"};
  app.require_subcommand(1);

  std::string preset_name, config_path, out_dir = ".", out_path;
  double osc_tol = 0.02;
  int levels = 3;

  CLI::App* cmd_run = app.add_subcommand("run", "run a scenario and write outputs");
  cmd_run->add_option("--preset", preset_name, "built-in scenario name");
  cmd_run->add_option("--config", config_path, "path to a JSON scenario config");
  cmd_run->add_option("--out", out_dir, "output directory (default: current directory)");
  cmd_run->add_option("--osc-tol", osc_tol, "energy oscillation tolerance for stabilization");

  CLI::App* cmd_verify = app.add_subcommand("verify", "run a scenario and check its invariants");
  cmd_verify->add_option("--preset", preset_name, "built-in scenario name");
  cmd_verify->add_option("--config", config_path, "path to a JSON scenario config");

  CLI::App* cmd_conv = app.add_subcommand("convergence", "refinement study for a scenario");
  cmd_conv->add_option("--preset", preset_name, "built-in scenario name");
  cmd_conv->add_option("--config", config_path, "path to a JSON scenario config");
  cmd_conv->add_option("--levels", levels, "number of refinement levels")->check(CLI::PositiveNumber);
  cmd_conv->add_option("--out", out_path, "also write the table to this CSV file");

  CLI::App* cmd_presets = app.add_subcommand("presets", "list built-in scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*cmd_presets) {
      for (const auto& name : preset_names()) {
        const ScenarioConfig cfg = preset(name);
        std::printf("%-22s n_cells=%-5d n_steps=%-5d s=%-4g %s\n", name.c_str(), cfg.n_cells,
                    cfg.n_steps, cfg.s, cfg.experimental ? "(experimental)" : "");
      }
      return 0;
    }
    const ScenarioConfig cfg = detail::load_config(preset_name, config_path);
    if (*cmd_run) return detail::cmd_run(cfg, out_dir, osc_tol);
    if (*cmd_verify) return detail::cmd_verify(cfg);
    if (*cmd_conv) return detail::cmd_convergence(cfg, levels, out_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UnknownPresetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

inline int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("fracwave");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace fracwave
