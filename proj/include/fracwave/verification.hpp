#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/evolution.hpp"

namespace fracwave {

struct MonotoneCheck {
  bool pass = true;
  int first_violation = -1;     // step index of the first energy increase beyond tol
  double worst_increase = 0.0;  // max over i of E_i - E_{i-1}
};

/// Discrete energies must be non-increasing up to the given slack.
inline MonotoneCheck check_energy_monotone(const TrajectoryRecord& rec, double tol) {
  MonotoneCheck out;
  for (std::size_t i = 1; i < rec.energies.size(); ++i) {
    const double increase = rec.energies[i] - rec.energies[i - 1];
    out.worst_increase = std::max(out.worst_increase, increase);
    if (increase > tol && out.pass) {
      out.pass = false;
      out.first_violation = static_cast<int>(i);
    }
  }
  return out;
}

struct BoundCheck {
  bool pass = true;
  double max_energy = 0.0;
  double bound = 0.0;
};

/// Uniform-in-time bound: every E_i stays below E_0 + tol.
inline BoundCheck check_key_estimate(const TrajectoryRecord& rec, double tol) {
  BoundCheck out;
  out.bound = rec.energies.front() + tol;
  for (double e : rec.energies) out.max_energy = std::max(out.max_energy, e);
  out.pass = out.max_energy <= out.bound;
  return out;
}

struct ViStepResidual {
  double negative_part = 0.0;
  double complementarity = 0.0;
  double complementarity_scale = 1.0;
};

struct ViCheck {
  bool pass = true;
  double worst_negative = 0.0;
  double worst_complementarity_ratio = 0.0;
  std::vector<ViStepResidual> per_step;  // index 0 corresponds to step i = 1
};

/// Per-step variational-inequality residuals of an obstacle run:
/// r_i = M (u_i - 2 u_{i-1} + u_{i-2}) / tau^2 + A u_i (+ boundary coupling)
/// must be >= -tol componentwise, and r_i' (u_i - g) must vanish to tol.
inline ViCheck check_variational_inequality(const TrajectoryRecord& rec, double tol) {
  if (!rec.scenario.lower)
    throw InvalidProblemError("check_variational_inequality: not an obstacle run");
  const OperatorSet& ops = rec.ops;
  const Eigen::VectorXd& g = rec.scenario.lower->interior;
  const Eigen::VectorXd gbc =
      ops.boundary_coupling(rec.scenario.u0.bc_left, rec.scenario.u0.bc_right);
  const double inv_tau2 = 1.0 / (rec.tau * rec.tau);

  ViCheck out;
  out.per_step.reserve(rec.n());
  for (int i = 1; i <= rec.n(); ++i) {
    const Eigen::VectorXd accel =
        rec.u(i).interior - 2.0 * rec.u(i - 1).interior + rec.u(i - 2).interior;
    const Eigen::VectorXd r = inv_tau2 * (ops.mass * accel) + ops.stiffness * rec.u(i).interior + gbc;
    ViStepResidual step;
    step.negative_part = (-r).cwiseMax(0.0).maxCoeff();
    const Eigen::VectorXd d = rec.u(i).interior - g;
    step.complementarity = std::abs(r.dot(d));
    step.complementarity_scale = 1.0 + r.norm() * d.norm();
    out.per_step.push_back(step);
    out.worst_negative = std::max(out.worst_negative, step.negative_part);
    out.worst_complementarity_ratio =
        std::max(out.worst_complementarity_ratio, step.complementarity / step.complementarity_scale);
    if (step.negative_part > tol || step.complementarity > tol * step.complementarity_scale)
      out.pass = false;
  }
  return out;
}

/// Separable space-time test function phi(x) eta(t).
struct WeakTestFunction {
  FieldP1 space;
  std::function<double(double)> time_profile;
};

struct WeakFormResult {
  double max_residual = 0.0;  // worst |sum_i eta(t_i) (phi' M (v_i - v_{i-1}) + tau phi' A u_i)|
  double scale = 0.0;         // magnitude of the summed terms before cancellation
  double worst_ratio = 0.0;

  bool passes(double tol) const { return worst_ratio <= tol; }
};

/// The discrete evolution satisfies the time-summed weak identity exactly
/// (up to solver tolerance) for every separable test function; this checks
/// the accumulated residual against the size of its constituent terms.
inline WeakFormResult check_weak_form_free(const TrajectoryRecord& rec,
                                           const std::vector<WeakTestFunction>& tests) {
  const OperatorSet& ops = rec.ops;
  const Eigen::VectorXd gbc =
      ops.boundary_coupling(rec.scenario.u0.bc_left, rec.scenario.u0.bc_right);
  WeakFormResult out;
  for (const auto& test : tests) {
    if (!(test.space.grid == rec.scenario.grid))
      throw GridMismatchError("check_weak_form_free: test function incompatible with grid");
    if (!test.space.zero_boundary())
      throw InvalidProblemError("check_weak_form_free: test function must vanish on the boundary");
    const Eigen::VectorXd mphi = ops.mass * test.space.interior;
    double residual = 0.0;
    double scale = 0.0;
    for (int i = 1; i <= rec.n(); ++i) {
      const double eta = test.time_profile(rec.time(i));
      const double mass_term = eta * (rec.velocities[i] - rec.velocities[i - 1]).dot(mphi);
      const double stiff_term =
          eta * rec.tau *
          test.space.interior.dot(ops.stiffness * rec.u(i).interior + gbc);
      residual += mass_term + stiff_term;
      scale += std::abs(mass_term) + std::abs(stiff_term);
    }
    out.max_residual = std::max(out.max_residual, std::abs(residual));
    out.scale = std::max(out.scale, scale);
    out.worst_ratio = std::max(out.worst_ratio, std::abs(residual) / std::max(scale, 1e-300));
  }
  return out;
}

struct ConvergenceRow {
  int n_cells = 0;
  int n_steps = 0;
  double err_max_l2 = 0.0;   // max over steps of the discrete L2 error
  double err_final = 0.0;    // error at t = T
  double rate = 0.0;         // log2(e_prev / e_this), valid when has_rate
  bool has_rate = false;
  bool has_error = true;     // false for the reference level of a self-study
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  bool self_reference = false;
};

namespace detail {

inline double mass_norm(const Eigen::MatrixXd& m, const Eigen::VectorXd& w) {
  return std::sqrt(std::max(w.dot(m * w), 0.0));
}

}  // namespace detail

/// Runs the scenario at (h, tau), (h/2, tau/2), ... and measures the discrete
/// L2 error against the exact solution, or against the finest level when no
/// exact solution is available.
inline ConvergenceTable convergence_study(const Scenario& base,
                                          const std::function<double(double, double)>* exact,
                                          int levels) {
  if (exact ? levels < 1 : levels < 2)
    throw InvalidProblemError("convergence_study: need at least one level with an exact "
                              "solution, two without");
  std::vector<Scenario> scenarios;
  std::vector<TrajectoryRecord> records;
  scenarios.reserve(levels);
  records.reserve(levels);
  int factor = 1;
  for (int level = 0; level < levels; ++level, factor *= 2) {
    scenarios.push_back(refine_scenario(base, factor));
    records.push_back(run_evolution(scenarios.back()));
  }

  ConvergenceTable table;
  table.self_reference = exact == nullptr;
  for (int level = 0; level < levels; ++level) {
    const TrajectoryRecord& rec = records[level];
    ConvergenceRow row;
    row.n_cells = scenarios[level].grid.n_cells;
    row.n_steps = scenarios[level].n_steps;
    if (exact) {
      for (int i = 0; i <= rec.n(); ++i) {
        const double t = rec.time(i);
        const FieldP1 reference = interpolate_function(
            scenarios[level].grid, [&](double x) { return (*exact)(t, x); },
            rec.u(i).bc_left, rec.u(i).bc_right);
        const double err =
            detail::mass_norm(rec.ops.mass, rec.u(i).interior - reference.interior);
        row.err_max_l2 = std::max(row.err_max_l2, err);
        if (i == rec.n()) row.err_final = err;
      }
    } else if (level + 1 < levels) {
      const TrajectoryRecord& fine = records.back();
      const int space_factor = scenarios.back().grid.n_cells / scenarios[level].grid.n_cells;
      const int time_factor = scenarios.back().n_steps / scenarios[level].n_steps;
      for (int i = 0; i <= rec.n(); ++i) {
        const FieldP1& coarse_u = rec.u(i);
        const FieldP1& fine_u = fine.u(i * time_factor);
        Eigen::VectorXd diff(coarse_u.interior.size());
        for (Eigen::Index j = 0; j < diff.size(); ++j)
          diff(j) = coarse_u.interior(j) - fine_u.interior((j + 1) * space_factor - 1);
        const double err = detail::mass_norm(rec.ops.mass, diff);
        row.err_max_l2 = std::max(row.err_max_l2, err);
        if (i == rec.n()) row.err_final = err;
      }
    } else {
      row.has_error = false;
    }
    table.rows.push_back(row);
  }
  for (std::size_t k = 1; k < table.rows.size(); ++k) {
    ConvergenceRow& row = table.rows[k];
    const ConvergenceRow& prev = table.rows[k - 1];
    if (row.has_error && prev.has_error && row.err_max_l2 > 0.0) {
      row.rate = std::log2(prev.err_max_l2 / row.err_max_l2);
      row.has_rate = true;
    }
  }
  return table;
}

struct ImpactInterval {
  double t_start = 0.0;
  double t_end = 0.0;
  double energy_drop = 0.0;
};

struct StabilizationReport {
  std::optional<double> t_bar;
  double oscillation = 0.0;  // max_{i >= k} |E_i - E_k| at the reported k
  std::vector<ImpactInterval> impacts;
  double osc_tol = 0.0;
};

/// Finds the earliest grid time after which the energy stays within
/// osc_tol * E_0 of its value there, and lists the maximal contact intervals
/// with the energy lost across each.
inline StabilizationReport detect_stabilization(const TrajectoryRecord& rec, double osc_tol) {
  const std::vector<double>& e = rec.energies;
  const int count = static_cast<int>(e.size());
  StabilizationReport report;
  report.osc_tol = osc_tol;

  std::vector<double> suffix_max(count), suffix_min(count);
  suffix_max[count - 1] = suffix_min[count - 1] = e[count - 1];
  for (int i = count - 2; i >= 0; --i) {
    suffix_max[i] = std::max(e[i], suffix_max[i + 1]);
    suffix_min[i] = std::min(e[i], suffix_min[i + 1]);
  }
  const double budget = osc_tol * e.front();
  for (int k = 0; k < count; ++k) {
    const double osc = std::max(suffix_max[k] - e[k], e[k] - suffix_min[k]);
    if (osc <= budget) {
      report.t_bar = rec.time(k);
      report.oscillation = osc;
      break;
    }
  }

  int start = -1;
  for (int i = 0; i < count; ++i) {
    const bool touching = !rec.contacts[i].empty();
    if (touching && start < 0) start = i;
    if ((!touching || i == count - 1) && start >= 0) {
      const int last = touching ? i : i - 1;
      ImpactInterval impact;
      impact.t_start = rec.time(start);
      impact.t_end = rec.time(last);
      impact.energy_drop = e[std::max(start - 1, 0)] - e[last];
      report.impacts.push_back(impact);
      start = -1;
    }
  }
  return report;
}

}  // namespace fracwave
