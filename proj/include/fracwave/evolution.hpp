#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/grid.hpp"
#include "fracwave/operators.hpp"
#include "fracwave/step_solver.hpp"

namespace fracwave {

/// A fully specified run: discretization, initial data, obstacles, solver
/// policy. The optional analytic profiles back grid refinement (convergence
/// studies); the nodal fields are what the run actually uses.
struct Scenario {
  Grid1D grid;
  FractionalOrder order;
  double T;
  int n_steps;
  FieldP1 u0;
  FieldP1 v0;
  std::optional<FieldP1> lower;
  std::optional<FieldP1> upper;
  SolverConfig solver;
  double contact_tol = 1e-9;
  std::function<double(double)> u0_fn;
  std::function<double(double)> v0_fn;
  std::function<double(double)> lower_fn;
  std::function<double(double)> upper_fn;

  double tau() const { return T / n_steps; }
};

inline void validate_scenario(const Scenario& sc) {
  if (!std::isfinite(sc.T) || !(sc.T > 0.0))
    throw InvalidProblemError("scenario: final time must be positive");
  if (sc.n_steps < 1) throw InvalidProblemError("scenario: need at least one time step");
  if (!(sc.u0.grid == sc.grid) || !(sc.v0.grid == sc.grid))
    throw GridMismatchError("scenario: initial data on a different grid");
  if (!sc.v0.zero_boundary())
    throw InvalidProblemError("scenario: initial velocity must vanish on the boundary");
  if (!sc.order.classical() && !sc.u0.zero_boundary())
    throw InvalidProblemError("scenario: s < 1 requires zero boundary values");
  if (sc.lower) {
    if (!(sc.lower->grid == sc.grid))
      throw GridMismatchError("scenario: obstacle on a different grid");
    if ((sc.u0.interior - sc.lower->interior).minCoeff() < 0.0)
      throw InvalidProblemError("scenario: initial state must lie above the obstacle");
    if (!(sc.lower->bc_left < sc.u0.bc_left) || !(sc.lower->bc_right < sc.u0.bc_right))
      throw InvalidProblemError("scenario: obstacle must be strictly below the boundary data");
  }
  if (sc.upper) {
    if (!sc.lower) throw InvalidProblemError("scenario: upper obstacle requires a lower obstacle");
    if (!(sc.upper->grid == sc.grid))
      throw GridMismatchError("scenario: upper obstacle on a different grid");
    if ((sc.upper->interior - sc.lower->interior).minCoeff() <= 0.0)
      throw InvalidProblemError("scenario: upper obstacle must lie strictly above the lower one");
    if ((sc.upper->interior - sc.u0.interior).minCoeff() < 0.0)
      throw InvalidProblemError("scenario: initial state must lie below the upper obstacle");
    if (!(sc.upper->bc_left > sc.u0.bc_left) || !(sc.upper->bc_right > sc.u0.bc_right))
      throw InvalidProblemError("scenario: upper obstacle must be strictly above the boundary data");
  }
  if (!(sc.solver.grad_tol > 0.0) || sc.solver.max_iters < 1)
    throw InvalidProblemError("scenario: invalid solver configuration");
  if (!(sc.contact_tol > 0.0)) throw InvalidProblemError("scenario: invalid contact tolerance");
}

/// Nodes where u touches the lower obstacle: u_j - g_j <= tol (1 + |g_j|).
/// Returned as global node indices.
inline std::vector<int> contact_set(const FieldP1& u, const FieldP1& g, double tol) {
  require_same_grid(u, g, "contact_set");
  std::vector<int> out;
  for (Eigen::Index j = 0; j < u.interior.size(); ++j)
    if (u.interior(j) - g.interior(j) <= tol * (1.0 + std::abs(g.interior(j))))
      out.push_back(static_cast<int>(j) + 1);
  return out;
}

/// Discrete energy ||v||_{L2}^2 + [u]_s^2 with the assembled operators.
inline double energy(const FieldP1& u, const FieldP1& v, const OperatorSet& ops) {
  if (!(u.grid == ops.grid) || !(v.grid == ops.grid))
    throw GridMismatchError("energy: fields and operators on different grids");
  if (!v.zero_boundary())
    throw InvalidProblemError("energy: velocity must vanish on the boundary");
  return v.interior.dot(ops.mass * v.interior) + gagliardo_seminorm_sq(u, ops);
}

struct StepStats {
  int iterations = 0;
  double residual = 0.0;
};

/// Complete discrete evolution: snapshots u_{-1}..u_n, velocities
/// v_i = (u_i - u_{i-1}) / tau, energies and contact diagnostics.
struct TrajectoryRecord {
  Scenario scenario;
  OperatorSet ops;
  double tau = 0.0;
  std::vector<FieldP1> snapshots;            // slot i+1 holds u_i, starting at u_{-1}
  std::vector<Eigen::VectorXd> velocities;   // i = 0..n
  std::vector<double> energies;              // i = 0..n
  std::vector<double> kinetic;               // ||v_i||^2 component
  std::vector<double> elastic;               // [u_i]_s^2 component
  std::vector<StepStats> stats;              // i = 1..n
  std::vector<std::vector<int>> contacts;    // i = 0..n, empty sets for free runs

  int n() const { return static_cast<int>(snapshots.size()) - 2; }
  double time(int i) const { return i * tau; }
  const FieldP1& u(int i) const { return snapshots[i + 1]; }
};

inline TrajectoryRecord run_evolution(const Scenario& sc) {
  validate_scenario(sc);
  TrajectoryRecord rec{sc, assemble_operators(sc.grid, sc.order), sc.tau(),
                       {}, {}, {}, {}, {}, {}, {}};
  const OperatorSet& ops = rec.ops;
  const double tau = rec.tau;
  const int n = sc.n_steps;
  const bool constrained = sc.lower.has_value();

  // capacity fixed up front; references into snapshots stay valid below
  rec.snapshots.reserve(n + 2);
  rec.snapshots.emplace_back(sc.grid, (sc.u0.interior - tau * sc.v0.interior).eval(),
                             sc.u0.bc_left, sc.u0.bc_right);
  rec.snapshots.push_back(sc.u0);

  const double inv_tau2 = 1.0 / (tau * tau);
  Eigen::MatrixXd h;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> llt;
  Eigen::VectorXd gbc;
  if (!constrained) {
    h = inv_tau2 * ops.mass + ops.stiffness;
    llt.emplace(h);
    if (llt->info() != Eigen::Success)
      throw SingularSystemError("run_evolution: step system is not SPD; assembly is broken");
    gbc = ops.boundary_coupling(sc.u0.bc_left, sc.u0.bc_right);
  }

  for (int i = 1; i <= n; ++i) {
    const FieldP1& prev = rec.snapshots[i];
    const FieldP1& prev2 = rec.snapshots[i - 1];
    if (constrained) {
      StepProblem problem(ops, tau, prev, prev2, sc.lower, sc.upper);
      try {
        StepResult res = solve_constrained(problem, sc.solver);
        rec.stats.push_back({res.iterations, res.final_residual});
        rec.snapshots.push_back(std::move(res.u_new));
      } catch (MaxIterationsError& e) {
        throw MaxIterationsError("time step " + std::to_string(i) + ": " + e.what(),
                                 std::move(e.best));
      }
    } else {
      const Eigen::VectorXd b = 2.0 * prev.interior - prev2.interior;
      const Eigen::VectorXd rhs = inv_tau2 * (ops.mass * b) - gbc;
      Eigen::VectorXd w = llt->solve(rhs);
      const double residual = (h * w - rhs).lpNorm<Eigen::Infinity>();
      rec.stats.push_back({0, residual});
      rec.snapshots.emplace_back(sc.grid, std::move(w), prev.bc_left, prev.bc_right);
    }
  }

  rec.velocities.reserve(n + 1);
  rec.energies.reserve(n + 1);
  rec.kinetic.reserve(n + 1);
  rec.elastic.reserve(n + 1);
  rec.contacts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    Eigen::VectorXd v = (rec.u(i).interior - rec.u(i - 1).interior) / tau;
    const double kin = v.dot(ops.mass * v);
    const double ela = gagliardo_seminorm_sq(rec.u(i), ops);
    rec.velocities.push_back(std::move(v));
    rec.kinetic.push_back(kin);
    rec.elastic.push_back(ela);
    rec.energies.push_back(kin + ela);
    rec.contacts.push_back(constrained ? contact_set(rec.u(i), *sc.lower, sc.contact_tol)
                                       : std::vector<int>{});
  }
  return rec;
}

enum class InterpolantKind { piecewise_constant, piecewise_linear };

/// Time reconstruction of the step sequence on [-tau, T]: the piecewise
/// constant interpolant returns u_i on (t_{i-1}, t_i]; the piecewise linear
/// one blends u_{i-1} and u_i on the same interval.
inline FieldP1 interpolant_eval(const TrajectoryRecord& rec, double t, InterpolantKind kind) {
  const double tau = rec.tau;
  const int n = rec.n();
  const double t_end = n * tau;
  const double slack = 1e-12 * (t_end + tau);
  if (t < -tau - slack || t > t_end + slack)
    throw TimeRangeError("interpolant_eval: time outside [-tau, T]");
  if (t <= -tau) return rec.u(-1);

  int i = static_cast<int>(std::ceil(t / tau));
  if (i < 0) i = 0;
  while (i > 0 && (i - 1) * tau >= t) --i;
  while (i < n && i * tau < t) ++i;
  if (i > n) i = n;

  if (kind == InterpolantKind::piecewise_constant) return rec.u(i);
  if (t == i * tau) return rec.u(i);
  const double weight = (t - (i - 1) * tau) / tau;
  const FieldP1& hi = rec.u(i);
  const FieldP1& lo = rec.u(i - 1);
  return FieldP1(rec.scenario.grid,
                 (weight * hi.interior + (1.0 - weight) * lo.interior).eval(),
                 weight * hi.bc_left + (1.0 - weight) * lo.bc_left,
                 weight * hi.bc_right + (1.0 - weight) * lo.bc_right);
}

/// Same scenario at a grid refined by an integer factor in space and time.
/// Analytic profiles are re-sampled when available; otherwise the coarse P1
/// fields are prolonged exactly.
inline Scenario refine_scenario(const Scenario& base, int factor) {
  if (factor < 1) throw InvalidProblemError("refine_scenario: factor must be positive");
  if (factor == 1) return base;
  Scenario fine = base;
  fine.grid = build_grid(base.grid.a, base.grid.b, base.grid.n_cells * factor);
  fine.n_steps = base.n_steps * factor;
  auto resample = [&](const FieldP1& coarse, const std::function<double(double)>& fn) {
    if (fn) return interpolate_function(fine.grid, fn, coarse.bc_left, coarse.bc_right);
    return interpolate_function(
        fine.grid, [&](double x) { return eval_p1(coarse, x); }, coarse.bc_left, coarse.bc_right);
  };
  fine.u0 = resample(base.u0, base.u0_fn);
  fine.v0 = resample(base.v0, base.v0_fn);
  if (base.lower) fine.lower = resample(*base.lower, base.lower_fn);
  if (base.upper) fine.upper = resample(*base.upper, base.upper_fn);
  return fine;
}

}  // namespace fracwave
