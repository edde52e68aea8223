#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/grid.hpp"

namespace fracwave {

/// Exponent s of the nonlocal operator. s = 1 selects the classical Laplacian.
struct FractionalOrder {
  double s;

  explicit FractionalOrder(double order) : s(order) {
    if (!std::isfinite(s) || !(s > 0.0) || s > 1.0)
      throw OrderRangeError("fractional order must lie in (0, 1]");
  }

  bool classical() const { return s == 1.0; }
};

namespace detail {

// Autocorrelation of the unit hat function (half-width 1, peak 1):
//   rho(u) = \int hat(x) hat(x - u) dx
// Piecewise cubic, even, supported on |u| < 2. rho(0) = 2/3 and rho(1) = 1/6
// are the familiar P1 mass-matrix values per unit cell width.
inline constexpr std::array<double, 4> kOverlapNear{2.0 / 3.0, 0.0, -1.0, 0.5};        // 0 <= u <= 1
inline constexpr std::array<double, 4> kOverlapFar{4.0 / 3.0, -2.0, 1.0, -1.0 / 6.0};  // 1 <= u <= 2

inline double hat_overlap(double u) {
  u = std::abs(u);
  if (u >= 2.0) return 0.0;
  const auto& c = u < 1.0 ? kOverlapNear : kOverlapFar;
  return ((c[3] * u + c[2]) * u + c[1]) * u + c[0];
}

// which polynomial piece of rho contains u >= 0; -1 means rho == 0 there
inline int overlap_piece(double u) { return u < 1.0 ? 0 : (u < 2.0 ? 1 : -1); }

struct Cubic {
  std::array<double, 4> c{};
};

// coefficients of p(alpha + beta * w) as a cubic in w, beta in {-1, +1}
inline Cubic compose_affine(const std::array<double, 4>& p, double alpha, double beta) {
  static constexpr int binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
  Cubic out;
  const double apow[4] = {1.0, alpha, alpha * alpha, alpha * alpha * alpha};
  for (int k = 0; k < 4; ++k) {
    if (p[k] == 0.0) continue;
    double bpow = 1.0;
    for (int j = 0; j <= k; ++j) {
      out.c[j] += p[k] * binom[k][j] * apow[k - j] * bpow;
      bpow *= beta;
    }
  }
  return out;
}

// \int_a^b w^{e-1} dw with a stable path for small e and the exact
// logarithmic case e == 0 (reached at 2s = p, e.g. s = 1/2).
inline double power_primitive_integral(double e, double a, double b) {
  if (e == 0.0) return std::log(b / a);
  if (a == 0.0) return std::pow(b, e) / e;
  return (std::expm1(e * std::log(b)) - std::expm1(e * std::log(a))) / e;
}

// Scaled interaction of two interior hats m cells apart under the singular
// kernel |x - y|^{-1-2s}. Substituting x - y = h w collapses the double
// integral over R x R of the hat-difference product to
//   I(m, s) = \int_0^inf (2 rho(m) - rho(|m - w|) - rho(m + w)) w^{-1-2s} dw,
// and the matrix entry is 2 h^{1-2s} I(m, s). The bracket is piecewise cubic
// in w with breakpoints where |m - w| or m + w crosses a piece boundary of
// rho; it vanishes to second order at w = 0, which tames the singularity.
inline double hat_interaction_scaled(int m, double s) {
  const double twos = 2.0 * s;
  const double rho_m = hat_overlap(static_cast<double>(m));
  const double w_end = m + 2.0;

  std::vector<double> breaks;
  const double cand[] = {m - 2.0, m - 1.0, static_cast<double>(m), m + 1.0, 1.0 - m, 2.0 - m};
  for (double c : cand)
    if (c > 0.0 && c < w_end) breaks.push_back(c);
  breaks.push_back(w_end);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  double total = 0.0;
  double wa = 0.0;
  for (double wb : breaks) {
    const double wm = 0.5 * (wa + wb);
    Cubic bracket;
    bracket.c[0] = 2.0 * rho_m;
    {
      const int pc = overlap_piece(std::abs(m - wm));
      if (pc >= 0) {
        const auto& piece = pc == 0 ? kOverlapNear : kOverlapFar;
        const Cubic t = wm < m ? compose_affine(piece, static_cast<double>(m), -1.0)
                               : compose_affine(piece, -static_cast<double>(m), 1.0);
        for (int p = 0; p < 4; ++p) bracket.c[p] -= t.c[p];
      }
    }
    {
      const int pc = overlap_piece(m + wm);
      if (pc >= 0) {
        const auto& piece = pc == 0 ? kOverlapNear : kOverlapFar;
        const Cubic t = compose_affine(piece, static_cast<double>(m), 1.0);
        for (int p = 0; p < 4; ++p) bracket.c[p] -= t.c[p];
      }
    }
    if (wa == 0.0) {
      // the constant and linear coefficients cancel exactly at w = 0
      bracket.c[0] = 0.0;
      bracket.c[1] = 0.0;
    }
    for (int p = 0; p < 4; ++p)
      if (bracket.c[p] != 0.0) total += bracket.c[p] * power_primitive_integral(p - twos, wa, wb);
    wa = wb;
  }
  // beyond w_end both overlap terms vanish and the bracket is constant
  if (rho_m > 0.0) total += 2.0 * rho_m * std::pow(w_end, -twos) / twos;
  return total;
}

// first row of the Toeplitz interaction matrix: band[m] = A(j, j+m)
inline std::vector<double> fractional_band(const Grid1D& grid, double s) {
  const int n = grid.interior_count();
  const double scale = 2.0 * std::pow(grid.h, 1.0 - 2.0 * s);
  std::vector<double> band(n);
  for (int m = 0; m < n; ++m) band[m] = scale * hat_interaction_scaled(m, s);
  return band;
}

}  // namespace detail

inline Eigen::MatrixXd assemble_mass(const Grid1D& grid) {
  const int n = grid.interior_count();
  const double h = grid.h;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    m(j, j) = 2.0 * h / 3.0;
    if (j + 1 < n) {
      m(j, j + 1) = h / 6.0;
      m(j + 1, j) = h / 6.0;
    }
  }
  return m;
}

inline Eigen::MatrixXd assemble_stiffness_local(const Grid1D& grid) {
  const int n = grid.interior_count();
  const double h = grid.h;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    a(j, j) = 2.0 / h;
    if (j + 1 < n) {
      a(j, j + 1) = -1.0 / h;
      a(j + 1, j) = -1.0 / h;
    }
  }
  return a;
}

/// Dense symmetric Toeplitz matrix of the bilinear form
///   A_jk = \int\int (phi_j(x)-phi_j(y)) (phi_k(x)-phi_k(y)) |x-y|^{-1-2s} dx dy
/// for interior hats extended by zero outside (a, b); normalization constant 1.
inline Eigen::MatrixXd assemble_stiffness_fractional(const Grid1D& grid, FractionalOrder order) {
  if (!(order.s < 1.0))
    throw OrderRangeError("assemble_stiffness_fractional: requires s in (0, 1); "
                          "use assemble_stiffness_local for s = 1");
  const std::vector<double> band = detail::fractional_band(grid, order.s);
  const int n = grid.interior_count();
  Eigen::MatrixXd a(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) a(j, k) = band[std::abs(j - k)];
  return a;
}

/// Mass and stiffness matrices on the interior nodes of one grid.
struct OperatorSet {
  Grid1D grid;
  FractionalOrder order;
  Eigen::MatrixXd mass;
  Eigen::MatrixXd stiffness;

  /// Gradient contribution of the Dirichlet lift to the stiffness form;
  /// nonzero data is only meaningful for s = 1 (local operator).
  Eigen::VectorXd boundary_coupling(double bc_left, double bc_right) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(grid.interior_count());
    if (bc_left == 0.0 && bc_right == 0.0) return g;
    if (!order.classical())
      throw InvalidProblemError("nonzero boundary data requires s = 1; "
                                "the nonlocal operator uses a zero exterior extension");
    g(0) = -bc_left / grid.h;
    g(grid.interior_count() - 1) = -bc_right / grid.h;
    return g;
  }
};

inline OperatorSet assemble_operators(const Grid1D& grid, FractionalOrder order) {
  Eigen::MatrixXd stiffness =
      order.classical() ? assemble_stiffness_local(grid) : assemble_stiffness_fractional(grid, order);
  return OperatorSet{grid, order, assemble_mass(grid), std::move(stiffness)};
}

/// Max row sum norm of the stiffness matrix, computable without the dense fill.
inline double stiffness_inf_norm(const Grid1D& grid, FractionalOrder order) {
  if (order.classical()) return 4.0 / grid.h;
  const std::vector<double> band = detail::fractional_band(grid, order.s);
  const int n = grid.interior_count();
  double best = 0.0;
  for (int j = 0; j < n; ++j) {
    double row = 0.0;
    for (int k = 0; k < n; ++k) row += std::abs(band[std::abs(j - k)]);
    best = std::max(best, row);
  }
  return best;
}

/// Squared Gagliardo seminorm of u realized through the assembled stiffness.
/// For s = 1 with nonzero Dirichlet data the boundary cells of the lifted
/// function contribute as well.
inline double gagliardo_seminorm_sq(const FieldP1& u, const OperatorSet& ops) {
  if (!(u.grid == ops.grid))
    throw GridMismatchError("gagliardo_seminorm_sq: field and operators on different grids");
  if (!ops.order.classical() && !u.zero_boundary())
    throw InvalidProblemError("gagliardo_seminorm_sq: s < 1 requires zero boundary values");
  double value = u.interior.dot(ops.stiffness * u.interior);
  if (!u.zero_boundary()) {
    value += 2.0 * u.interior.dot(ops.boundary_coupling(u.bc_left, u.bc_right));
    value += (u.bc_left * u.bc_left + u.bc_right * u.bc_right) / ops.grid.h;
  }
  return std::max(value, 0.0);
}

}  // namespace fracwave
