#pragma once

// Shared test fixtures: a hand-rolled dense solver used as an independent
// reference for the direct step solve, and random constrained problems for
// oracle cross-checks.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

#include <fracwave/fracwave.hpp>

namespace fixtures {

/// Gaussian elimination with partial pivoting; deliberately independent of
/// the factorization used by the library.
inline Eigen::VectorXd gaussian_elimination_solve(Eigen::MatrixXd a, Eigen::VectorXd b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (a(pivot, col) == 0.0) throw std::runtime_error("singular matrix in reference solver");
    if (pivot != col) {
      a.row(pivot).swap(a.row(col));
      std::swap(b(pivot), b(col));
    }
    for (Eigen::Index r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      a.row(r).tail(n - col) -= f * a.row(col).tail(n - col);
      b(r) -= f * b(col);
    }
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    double acc = b(r);
    for (Eigen::Index c = r + 1; c < n; ++c) acc -= a(r, c) * x(c);
    x(r) = acc / a(r, r);
  }
  return x;
}

/// A random obstacle step problem with O(1) data on (0, 1), zero boundary
/// values, and a feasible previous state.
struct ConstrainedFixture {
  fracwave::OperatorSet ops;
  double tau;
  fracwave::FieldP1 u_prev;
  fracwave::FieldP1 u_prev2;
  fracwave::FieldP1 lower;

  fracwave::StepProblem problem() const {
    return fracwave::StepProblem(ops, tau, u_prev, u_prev2, lower);
  }
};

inline ConstrainedFixture random_constrained(std::mt19937_64& rng, double s,
                                             int max_cells = 13) {
  std::uniform_int_distribution<int> cells(5, max_cells);
  std::uniform_real_distribution<double> tau_d(0.05, 0.3);
  std::uniform_real_distribution<double> g_d(-1.2, 0.3);
  std::uniform_real_distribution<double> lift_d(0.0, 0.8);
  std::uniform_real_distribution<double> prev2_d(-1.0, 1.0);

  const fracwave::Grid1D grid = fracwave::build_grid(0.0, 1.0, cells(rng));
  const int n = grid.interior_count();
  Eigen::VectorXd g(n), up(n), up2(n);
  for (int i = 0; i < n; ++i) {
    g(i) = g_d(rng);
    up(i) = g(i) + lift_d(rng);
    up2(i) = prev2_d(rng);
  }
  return ConstrainedFixture{
      fracwave::assemble_operators(grid, fracwave::FractionalOrder(s)),
      tau_d(rng),
      fracwave::FieldP1(grid, std::move(up)),
      fracwave::FieldP1(grid, std::move(up2)),
      fracwave::FieldP1(grid, std::move(g), -1.0, -1.0)};
}

}  // namespace fixtures
