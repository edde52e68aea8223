#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "fracwave/errors.hpp"

namespace fracwave {

/// Uniform partition of the interval (a, b) into n_cells cells of width h.
/// Nodes are x_j = a + j*h, j = 0..n_cells; nodes 1..n_cells-1 carry the
/// interior degrees of freedom of the P1 space.
struct Grid1D {
  double a = 0.0;
  double b = 1.0;
  int n_cells = 2;
  double h = 0.5;

  int interior_count() const { return n_cells - 1; }
  double node(int j) const { return a + j * h; }

  bool operator==(const Grid1D&) const = default;
};

inline Grid1D build_grid(double a, double b, int n_cells) {
  if (!std::isfinite(a) || !std::isfinite(b))
    throw InvalidDomainError("build_grid: endpoints must be finite");
  if (!(b > a))
    throw InvalidDomainError("build_grid: right endpoint must exceed left endpoint");
  if (n_cells < 2)
    throw InvalidDomainError("build_grid: at least 2 cells required");
  Grid1D g;
  g.a = a;
  g.b = b;
  g.n_cells = n_cells;
  g.h = (b - a) / n_cells;
  return g;
}

/// Piecewise linear function on a Grid1D, stored as interior nodal values
/// plus the two Dirichlet boundary values. A zero boundary value together
/// with extension by zero outside (a, b) realizes the zero-exterior
/// condition required by the nonlocal operator for s < 1.
struct FieldP1 {
  Grid1D grid;
  Eigen::VectorXd interior;
  double bc_left = 0.0;
  double bc_right = 0.0;

  FieldP1(const Grid1D& g, Eigen::VectorXd values, double left = 0.0, double right = 0.0)
      : grid(g), interior(std::move(values)), bc_left(left), bc_right(right) {
    if (interior.size() != grid.interior_count())
      throw GridMismatchError("FieldP1: expected " + std::to_string(grid.interior_count()) +
                              " interior values, got " + std::to_string(interior.size()));
  }

  static FieldP1 zero(const Grid1D& g, double left = 0.0, double right = 0.0) {
    return FieldP1(g, Eigen::VectorXd::Zero(g.interior_count()), left, right);
  }

  /// Nodal value at global node index j (0 and n_cells are the boundary nodes).
  double value(int j) const {
    if (j <= 0) return bc_left;
    if (j >= grid.n_cells) return bc_right;
    return interior(j - 1);
  }

  bool zero_boundary() const { return bc_left == 0.0 && bc_right == 0.0; }
  bool same_boundary(const FieldP1& other) const {
    return bc_left == other.bc_left && bc_right == other.bc_right;
  }
};

inline void require_same_grid(const FieldP1& u, const FieldP1& v, const char* what) {
  if (!(u.grid == v.grid))
    throw GridMismatchError(std::string(what) + ": fields live on different grids");
}

/// Pointwise evaluation of the P1 function (boundary values outside [a, b]).
inline double eval_p1(const FieldP1& u, double x) {
  const Grid1D& g = u.grid;
  if (x <= g.a) return u.bc_left;
  if (x >= g.b) return u.bc_right;
  int cell = static_cast<int>((x - g.a) / g.h);
  if (cell >= g.n_cells) cell = g.n_cells - 1;
  const double t = (x - g.node(cell)) / g.h;
  return (1.0 - t) * u.value(cell) + t * u.value(cell + 1);
}

inline FieldP1 interpolate_function(const Grid1D& grid, const std::function<double(double)>& f,
                                    double bc_left, double bc_right) {
  if (!std::isfinite(bc_left) || !std::isfinite(bc_right))
    throw NonFiniteValueError("interpolate_function: non-finite boundary value");
  Eigen::VectorXd values(grid.interior_count());
  for (int j = 1; j < grid.n_cells; ++j) {
    const double y = f(grid.node(j));
    if (!std::isfinite(y))
      throw NonFiniteValueError("interpolate_function: non-finite value at x = " +
                                std::to_string(grid.node(j)));
    values(j - 1) = y;
  }
  return FieldP1(grid, std::move(values), bc_left, bc_right);
}

}  // namespace fracwave
