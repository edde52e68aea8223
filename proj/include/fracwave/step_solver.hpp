#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/grid.hpp"
#include "fracwave/operators.hpp"

namespace fracwave {

/// Data of one implicit time step: minimize
///   J(u) = 1/(2 tau^2) ||u - (2 u_prev - u_prev2)||_{L2}^2 + 1/2 [u]_s^2
/// over the P1 space, restricted to u >= lower (and u <= upper when present).
struct StepProblem {
  const OperatorSet& ops;
  double tau;
  FieldP1 u_prev;
  FieldP1 u_prev2;
  std::optional<FieldP1> lower;
  std::optional<FieldP1> upper;

  StepProblem(const OperatorSet& operators, double time_step, FieldP1 prev, FieldP1 prev2,
              std::optional<FieldP1> lower_obstacle = {}, std::optional<FieldP1> upper_obstacle = {})
      : ops(operators),
        tau(time_step),
        u_prev(std::move(prev)),
        u_prev2(std::move(prev2)),
        lower(std::move(lower_obstacle)),
        upper(std::move(upper_obstacle)) {
    if (!std::isfinite(tau) || !(tau > 0.0))
      throw InvalidProblemError("StepProblem: time step must be positive");
    if (!(u_prev.grid == ops.grid) || !(u_prev2.grid == ops.grid))
      throw GridMismatchError("StepProblem: history fields must live on the operator grid");
    if (!u_prev.same_boundary(u_prev2))
      throw InvalidProblemError("StepProblem: history fields carry different boundary data");
    if (!ops.order.classical() && !u_prev.zero_boundary())
      throw InvalidProblemError("StepProblem: s < 1 requires zero boundary values");
    if (lower) {
      if (!(lower->grid == ops.grid))
        throw GridMismatchError("StepProblem: obstacle on a different grid");
      if ((u_prev.interior - lower->interior).minCoeff() < -1e-12)
        throw InvalidProblemError("StepProblem: previous state lies below the obstacle");
      if (!(lower->bc_left < u_prev.bc_left) || !(lower->bc_right < u_prev.bc_right))
        throw InvalidProblemError("StepProblem: obstacle must be strictly below the boundary data");
    }
    if (upper) {
      if (!lower)
        throw InvalidProblemError("StepProblem: upper obstacle requires a lower obstacle");
      if (!(upper->grid == ops.grid))
        throw GridMismatchError("StepProblem: upper obstacle on a different grid");
      if ((upper->interior - lower->interior).minCoeff() <= 0.0)
        throw InvalidProblemError("StepProblem: upper obstacle must lie strictly above the lower one");
      if ((upper->interior - u_prev.interior).minCoeff() < -1e-12)
        throw InvalidProblemError("StepProblem: previous state lies above the upper obstacle");
      if (!(upper->bc_left > u_prev.bc_left) || !(upper->bc_right > u_prev.bc_right))
        throw InvalidProblemError("StepProblem: upper obstacle must be strictly above the boundary data");
    }
  }
};

/// Stopping and step-size policy of the projected gradient solver.
struct SolverConfig {
  double grad_tol = 1e-10;
  int max_iters = 500000;
  double step_init = 0.0;  // 0: use 1 / (||M||_inf / tau^2 + ||A||_inf)
  double step_grow = 1.2;
  double step_shrink = 0.5;
};

/// grad_tol tied to the scale of the step system so the stopping test bounds
/// the KKT violation uniformly across resolutions.
inline SolverConfig default_solver_config(const OperatorSet& ops, double tau) {
  SolverConfig cfg;
  const double a_norm = ops.stiffness.cwiseAbs().rowwise().sum().maxCoeff();
  cfg.grad_tol = 1e-12 * (1.0 / (tau * tau) + a_norm);
  return cfg;
}

struct StepResult {
  FieldP1 u_new;
  int iterations = 0;
  double final_residual = 0.0;
  std::vector<int> active_set;            // global node indices where u_new sits on the lower obstacle
  std::vector<double> objective_trace;    // objective value at the start and after each accepted iterate
};

class MaxIterationsError : public Error {
 public:
  MaxIterationsError(const std::string& message, StepResult best_iterate)
      : Error(message), best(std::move(best_iterate)) {}
  StepResult best;
};

struct KktResidual {
  double stationarity = 0.0;
  double infeasibility = 0.0;
  double complementarity = 0.0;
};

namespace detail {

struct QuadraticSystem {
  Eigen::MatrixXd h;       // M / tau^2 + A
  Eigen::VectorXd rhs;     // (M b) / tau^2 - boundary coupling, b = 2 u_prev - u_prev2
  double constant = 0.0;   // J(u) = 1/2 w' H w - rhs' w + constant
};

inline QuadraticSystem build_step_system(const StepProblem& p) {
  const double inv_tau2 = 1.0 / (p.tau * p.tau);
  const Eigen::VectorXd b = 2.0 * p.u_prev.interior - p.u_prev2.interior;
  const Eigen::VectorXd gbc = p.ops.boundary_coupling(p.u_prev.bc_left, p.u_prev.bc_right);
  QuadraticSystem sys;
  sys.h = inv_tau2 * p.ops.mass + p.ops.stiffness;
  sys.rhs = inv_tau2 * (p.ops.mass * b) - gbc;
  double bc_cells = 0.0;
  if (!p.u_prev.zero_boundary())
    bc_cells = (p.u_prev.bc_left * p.u_prev.bc_left + p.u_prev.bc_right * p.u_prev.bc_right) /
               p.ops.grid.h;
  sys.constant = 0.5 * inv_tau2 * b.dot(p.ops.mass * b) + 0.5 * bc_cells;
  return sys;
}

inline void clamp_to_box(Eigen::VectorXd& w, const Eigen::VectorXd* lo, const Eigen::VectorXd* up) {
  if (lo) w = w.cwiseMax(*lo);
  if (up) w = w.cwiseMin(*up);
}

// inf-norm of w - P(w - grad) with P the projection onto the box; zero
// exactly at a KKT point of the box-constrained problem
inline double projected_gradient_residual(const Eigen::VectorXd& w, const Eigen::VectorXd& grad,
                                          const Eigen::VectorXd* lo, const Eigen::VectorXd* up) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    double target = w(i) - grad(i);
    if (lo) target = std::max(target, (*lo)(i));
    if (up) target = std::min(target, (*up)(i));
    worst = std::max(worst, std::abs(w(i) - target));
  }
  return worst;
}

inline std::vector<int> lower_active_set(const Eigen::VectorXd& w, const Eigen::VectorXd& g) {
  std::vector<int> active;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w(i) - g(i) <= 1e-9 * (1.0 + std::abs(g(i)))) active.push_back(static_cast<int>(i) + 1);
  return active;
}

}  // namespace detail

inline void require_compatible(const StepProblem& p, const FieldP1& u, const char* what) {
  if (!(u.grid == p.ops.grid))
    throw GridMismatchError(std::string(what) + ": field on a different grid");
  if (!u.same_boundary(p.u_prev))
    throw InvalidProblemError(std::string(what) + ": field carries different boundary data");
}

inline double objective(const StepProblem& p, const FieldP1& u) {
  require_compatible(p, u, "objective");
  const Eigen::VectorXd d = u.interior - (2.0 * p.u_prev.interior - p.u_prev2.interior);
  const double mass_term = d.dot(p.ops.mass * d) / (2.0 * p.tau * p.tau);
  return mass_term + 0.5 * gagliardo_seminorm_sq(u, p.ops);
}

inline StepResult solve_unconstrained(const StepProblem& p) {
  if (p.lower || p.upper)
    throw InvalidProblemError("solve_unconstrained: problem carries an obstacle");
  const auto sys = detail::build_step_system(p);
  Eigen::LLT<Eigen::MatrixXd> llt(sys.h);
  if (llt.info() != Eigen::Success)
    throw SingularSystemError("solve_unconstrained: step system is not SPD; assembly is broken");
  Eigen::VectorXd w = llt.solve(sys.rhs);
  const double h_norm = sys.h.cwiseAbs().rowwise().sum().maxCoeff();
  const double scale = sys.rhs.lpNorm<Eigen::Infinity>() + h_norm * w.lpNorm<Eigen::Infinity>();
  const double residual = (sys.h * w - sys.rhs).lpNorm<Eigen::Infinity>();
  if (residual > 1e-10 * std::max(scale, 1e-300))
    throw SingularSystemError("solve_unconstrained: direct solve residual too large; assembly is broken");
  StepResult result{FieldP1(p.ops.grid, std::move(w), p.u_prev.bc_left, p.u_prev.bc_right)};
  result.final_residual = residual;
  return result;
}

/// Projected gradient descent with multiplicative step adaptation: grow the
/// step after an accepted (non-increasing) trial, shrink and retry after a
/// rejected one. Warm-started at u_prev unless an explicit start is given.
inline StepResult solve_constrained(const StepProblem& p, const SolverConfig& cfg,
                                    const FieldP1* start = nullptr) {
  if (!(cfg.grad_tol > 0.0))
    throw InvalidProblemError("solve_constrained: grad_tol must be positive");
  if (cfg.max_iters < 1)
    throw InvalidProblemError("solve_constrained: max_iters must be at least 1");
  if (!(cfg.step_grow > 1.0) || !(cfg.step_shrink > 0.0 && cfg.step_shrink < 1.0))
    throw InvalidProblemError("solve_constrained: invalid step adaptation factors");
  if (start) require_compatible(p, *start, "solve_constrained start");

  const auto sys = detail::build_step_system(p);
  const Eigen::VectorXd* lo = p.lower ? &p.lower->interior : nullptr;
  const Eigen::VectorXd* up = p.upper ? &p.upper->interior : nullptr;

  Eigen::VectorXd w = start ? start->interior : p.u_prev.interior;
  detail::clamp_to_box(w, lo, up);

  const double h_norm = sys.h.cwiseAbs().rowwise().sum().maxCoeff();
  double alpha = cfg.step_init > 0.0 ? cfg.step_init : 1.0 / h_norm;

  double q = 0.5 * w.dot(sys.h * w) - sys.rhs.dot(w);
  Eigen::VectorXd grad = sys.h * w - sys.rhs;

  StepResult result{FieldP1(p.ops.grid, w, p.u_prev.bc_left, p.u_prev.bc_right)};
  result.objective_trace.push_back(q + sys.constant);

  double residual = detail::projected_gradient_residual(w, grad, lo, up);
  int accepted = 0;
  long trials = 0;
  int stalled = 0;
  while (residual > cfg.grad_tol) {
    if (trials >= cfg.max_iters || stalled > 100) {
      result.u_new.interior = w;
      result.iterations = accepted;
      result.final_residual = residual;
      result.active_set = lo ? detail::lower_active_set(w, *lo) : std::vector<int>{};
      throw MaxIterationsError("solve_constrained: no convergence within " +
                                   std::to_string(trials) + " trials (residual " +
                                   std::to_string(residual) + ")",
                               std::move(result));
    }
    ++trials;
    Eigen::VectorXd w_try = w - alpha * grad;
    detail::clamp_to_box(w_try, lo, up);
    const Eigen::VectorXd d = w_try - w;
    const Eigen::VectorXd hd = sys.h * d;
    // exact objective change of the quadratic along d; evaluating the change
    // instead of two near-equal objective values avoids the cancellation
    // floor that would otherwise stop progress before grad_tol is reached
    const double decrease = grad.dot(d) + 0.5 * d.dot(hd);
    if (decrease <= 0.0) {
      stalled = d.lpNorm<Eigen::Infinity>() == 0.0 ? stalled + 1 : 0;
      w.swap(w_try);
      q += decrease;
      ++accepted;
      if (accepted % 64 == 0)
        grad = sys.h * w - sys.rhs;  // wash out accumulated update drift
      else
        grad += hd;
      result.objective_trace.push_back(q + sys.constant);
      alpha *= cfg.step_grow;
      residual = detail::projected_gradient_residual(w, grad, lo, up);
    } else {
      alpha *= cfg.step_shrink;
    }
  }

  result.u_new.interior = w;
  result.iterations = accepted;
  result.final_residual = residual;
  result.active_set = lo ? detail::lower_active_set(w, *lo) : std::vector<int>{};
  return result;
}

/// Sign decomposition of the discrete stationarity residual
///   r = M (u - 2 u_prev + u_prev2) / tau^2 + A u (+ boundary coupling):
/// at a constrained minimizer r >= 0, u >= g and r' (u - g) = 0.
inline KktResidual kkt_residual(const StepProblem& p, const FieldP1& u) {
  require_compatible(p, u, "kkt_residual");
  const auto sys = detail::build_step_system(p);
  const Eigen::VectorXd r = sys.h * u.interior - sys.rhs;
  KktResidual out;
  if (!p.lower) {
    out.stationarity = r.lpNorm<Eigen::Infinity>();
    return out;
  }
  const Eigen::VectorXd& g = p.lower->interior;
  out.stationarity = (-r).cwiseMax(0.0).maxCoeff();
  out.infeasibility = (g - u.interior).cwiseMax(0.0).maxCoeff();
  const Eigen::VectorXd d = u.interior - g;
  out.complementarity = std::abs(r.dot(d)) / (1.0 + r.norm() * d.norm());
  return out;
}

/// Brute-force reference solver: enumerate every candidate active set, solve
/// the reduced stationarity system, and return the unique candidate that is
/// feasible with a nonnegative residual on its active set. Exponential in the
/// node count; intended for cross-checking small problems only.
inline FieldP1 oracle_active_set_solve(const StepProblem& p) {
  if (!p.lower || p.upper)
    throw InvalidProblemError("oracle_active_set_solve: exactly a lower obstacle is required");
  const int n = p.ops.grid.interior_count();
  if (n > 12)
    throw InvalidProblemError("oracle_active_set_solve: at most 12 interior nodes supported");
  const auto sys = detail::build_step_system(p);
  const Eigen::VectorXd& g = p.lower->interior;

  const double h_norm = sys.h.cwiseAbs().rowwise().sum().maxCoeff();
  const double value_scale = 1.0 + g.lpNorm<Eigen::Infinity>() +
                             sys.rhs.lpNorm<Eigen::Infinity>() / std::max(h_norm, 1e-300);
  const double residual_scale = sys.rhs.lpNorm<Eigen::Infinity>() + h_norm * value_scale;

  Eigen::VectorXd best_w;
  double best_violation = std::numeric_limits<double>::infinity();

  std::vector<int> free_idx, active_idx;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    free_idx.clear();
    active_idx.clear();
    for (int i = 0; i < n; ++i)
      (mask & (1u << i)) ? active_idx.push_back(i) : free_idx.push_back(i);

    Eigen::VectorXd w(n);
    for (int i : active_idx) w(i) = g(i);
    if (!free_idx.empty()) {
      const int nf = static_cast<int>(free_idx.size());
      Eigen::MatrixXd hff(nf, nf);
      Eigen::VectorXd rhs_f(nf);
      for (int a = 0; a < nf; ++a) {
        rhs_f(a) = sys.rhs(free_idx[a]);
        for (int i : active_idx) rhs_f(a) -= sys.h(free_idx[a], i) * g(i);
        for (int b = 0; b < nf; ++b) hff(a, b) = sys.h(free_idx[a], free_idx[b]);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(hff);
      if (llt.info() != Eigen::Success) continue;
      const Eigen::VectorXd wf = llt.solve(rhs_f);
      for (int a = 0; a < nf; ++a) w(free_idx[a]) = wf(a);
    }

    const Eigen::VectorXd r = sys.h * w - sys.rhs;
    double feasibility_violation = 0.0;
    for (int i : free_idx) feasibility_violation = std::max(feasibility_violation, g(i) - w(i));
    double sign_violation = 0.0;
    for (int i : active_idx) sign_violation = std::max(sign_violation, -r(i));
    const double violation =
        std::max(feasibility_violation / value_scale, sign_violation / residual_scale);
    if (violation < best_violation) {
      best_violation = violation;
      best_w = w;
    }
  }

  if (!(best_violation <= 1e-8))
    throw NoValidActiveSetError("oracle_active_set_solve: no active set passed the optimality "
                                "checks; the problem data is inconsistent");
  return FieldP1(p.ops.grid, std::move(best_w), p.u_prev.bc_left, p.u_prev.bc_right);
}

}  // namespace fracwave
