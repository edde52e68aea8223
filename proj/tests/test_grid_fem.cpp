#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include <fracwave/grid.hpp>
#include <fracwave/operators.hpp>

#include "support/quadrature_oracle.hpp"

using namespace fracwave;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

FieldP1 hat_field(const Grid1D& g, int interior_idx) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(g.interior_count());
  w(interior_idx) = 1.0;
  return FieldP1(g, std::move(w));
}
}  // namespace

TEST_CASE("build_grid produces uniform nodes") {
  const Grid1D g = build_grid(0.0, 2.0 * kPi, 200);
  CHECK(g.h == Approx(2.0 * kPi / 200).epsilon(1e-15));
  CHECK(g.interior_count() == 199);

  const Grid1D tiny = build_grid(0.0, 1.0, 2);
  CHECK(tiny.node(0) == 0.0);
  CHECK(tiny.node(1) == Approx(0.5));
  CHECK(tiny.node(2) == Approx(1.0));
  CHECK(tiny.interior_count() == 1);

  const Grid1D sym = build_grid(-1.0, 1.0, 4);
  CHECK(sym.h == Approx(0.5));
  CHECK(sym.node(1) == Approx(-0.5));
  CHECK(sym.node(2) == Approx(0.0).margin(1e-16));
  CHECK(sym.node(3) == Approx(0.5));

  for (int j = 1; j <= sym.n_cells; ++j)
    CHECK(sym.node(j) - sym.node(j - 1) == Approx(sym.h).epsilon(1e-14));

  CHECK_THROWS_AS(build_grid(1.0, 0.0, 4), InvalidDomainError);
  CHECK_THROWS_AS(build_grid(0.0, 0.0, 4), InvalidDomainError);
  CHECK_THROWS_AS(build_grid(0.0, 1.0, 1), InvalidDomainError);
}

TEST_CASE("mass matrix entries and row sums") {
  const Grid1D g = build_grid(0.0, 2.0, 4);  // h = 0.5
  const Eigen::MatrixXd m = assemble_mass(g);
  REQUIRE(m.rows() == 3);
  CHECK(m(1, 1) == Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(m(0, 1) == Approx(1.0 / 12.0).epsilon(1e-15));
  CHECK(m(1, 0) == Approx(1.0 / 12.0).epsilon(1e-15));
  CHECK(m(0, 2) == 0.0);

  const Grid1D fine = build_grid(0.0, 1.0, 16);
  const Eigen::MatrixXd mf = assemble_mass(fine);
  for (int j = 1; j < fine.interior_count() - 1; ++j)
    CHECK(mf.row(j).sum() == Approx(fine.h).epsilon(1e-14));

  const Grid1D single = build_grid(0.0, 1.0, 2);
  const Eigen::MatrixXd ms = assemble_mass(single);
  REQUIRE(ms.rows() == 1);
  CHECK(ms(0, 0) == Approx(2.0 * single.h / 3.0).epsilon(1e-15));
}

TEST_CASE("local stiffness entries") {
  const Grid1D g = build_grid(0.0, 2.0, 4);  // h = 0.5
  const Eigen::MatrixXd a = assemble_stiffness_local(g);
  CHECK(a(1, 1) == Approx(4.0).epsilon(1e-15));
  CHECK(a(0, 1) == Approx(-2.0).epsilon(1e-15));

  const OperatorSet ops = assemble_operators(g, FractionalOrder(1.0));
  SECTION("constant field lifted by its own boundary value has zero energy") {
    FieldP1 c(g, Eigen::VectorXd::Constant(g.interior_count(), 3.7), 3.7, 3.7);
    CHECK(gagliardo_seminorm_sq(c, ops) == Approx(0.0).margin(1e-12));
  }
  SECTION("hat function energy equals the diagonal") {
    CHECK(gagliardo_seminorm_sq(hat_field(g, 1), ops) == Approx(2.0 / g.h).epsilon(1e-14));
  }
}

TEST_CASE("operator symmetry and positivity") {
  const Grid1D g = build_grid(0.0, 1.0, 24);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (double s : {0.5, 1.0}) {
    const OperatorSet ops = assemble_operators(g, FractionalOrder(s));
    const double a_scale = ops.stiffness.cwiseAbs().maxCoeff();
    CHECK((ops.stiffness - ops.stiffness.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * a_scale);
    const double m_scale = ops.mass.cwiseAbs().maxCoeff();
    CHECK((ops.mass - ops.mass.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * m_scale);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd w(g.interior_count());
      for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = normal(rng);
      if (w.norm() == 0.0) continue;
      CHECK(w.dot(ops.stiffness * w) > 0.0);
      CHECK(w.dot(ops.mass * w) > 0.0);
    }
  }
}

TEST_CASE("fractional stiffness is Toeplitz with decaying off-diagonal band") {
  const Grid1D g = build_grid(0.0, 1.0, 32);
  for (double s : {0.3, 0.9}) {
    const Eigen::MatrixXd a = assemble_stiffness_fractional(g, FractionalOrder(s));
    const int n = g.interior_count();
    for (int j = 0; j + 1 < n; ++j)
      for (int k = 0; k + 1 < n; ++k)
        CHECK(a(j, k) == Approx(a(j + 1, k + 1)).epsilon(1e-12));
    for (int m = 2; m + 1 < n; ++m)
      CHECK(std::abs(a(0, m)) > std::abs(a(0, m + 1)));
  }
  CHECK_THROWS_AS(assemble_stiffness_fractional(g, FractionalOrder(1.0)), OrderRangeError);
  CHECK_THROWS_AS(FractionalOrder(0.0), OrderRangeError);
  CHECK_THROWS_AS(FractionalOrder(1.5), OrderRangeError);
  CHECK_THROWS_AS(FractionalOrder(-0.2), OrderRangeError);
}

TEST_CASE("fractional entries match the quadrature oracle") {
  const Grid1D g = build_grid(0.0, 1.0, 8);
  for (double s : {0.5, 0.7}) {
    const Eigen::MatrixXd a = assemble_stiffness_fractional(g, FractionalOrder(s));
    for (int m = 0; m < g.interior_count(); ++m) {
      const double reference = oracle::gagliardo_entry(g, s, 1, 1 + m);
      CHECK_THAT(a(0, m), Catch::Matchers::WithinRel(reference, 1e-6));
    }
  }
}

TEST_CASE("fractional energy stays finite as s approaches 1") {
  const Grid1D g = build_grid(0.0, 1.0, 16);
  const OperatorSet ops = assemble_operators(g, FractionalOrder(0.999));
  const double e = gagliardo_seminorm_sq(hat_field(g, 7), ops);
  CHECK(std::isfinite(e));
  CHECK(e > 0.0);
}

TEST_CASE("gagliardo seminorm examples") {
  SECTION("zero field") {
    const Grid1D g = build_grid(0.0, 1.0, 8);
    const OperatorSet ops = assemble_operators(g, FractionalOrder(0.5));
    CHECK(gagliardo_seminorm_sq(FieldP1::zero(g), ops) == 0.0);
  }
  SECTION("interpolated sine against the exact Dirichlet energy") {
    const Grid1D g = build_grid(0.0, kPi, 64);
    const OperatorSet ops = assemble_operators(g, FractionalOrder(1.0));
    const FieldP1 u = interpolate_function(g, [](double x) { return std::sin(x); }, 0.0, 0.0);
    CHECK(gagliardo_seminorm_sq(u, ops) == Approx(kPi / 2.0).epsilon(0.02));
  }
  SECTION("grid mismatch is rejected") {
    const Grid1D g = build_grid(0.0, 1.0, 8);
    const Grid1D other = build_grid(0.0, 1.0, 10);
    const OperatorSet ops = assemble_operators(g, FractionalOrder(1.0));
    CHECK_THROWS_AS(gagliardo_seminorm_sq(FieldP1::zero(other), ops), GridMismatchError);
  }
  SECTION("nonzero boundary data is rejected for s < 1") {
    const Grid1D g = build_grid(0.0, 1.0, 8);
    const OperatorSet ops = assemble_operators(g, FractionalOrder(0.5));
    CHECK_THROWS_AS(gagliardo_seminorm_sq(FieldP1::zero(g, 1.0, 0.0), ops), InvalidProblemError);
  }
}

TEST_CASE("nodal interpolation") {
  SECTION("shifted sine matches nodal values") {
    const Grid1D g = build_grid(0.0, 2.0 * kPi, 200);
    const FieldP1 u =
        interpolate_function(g, [](double x) { return std::sin(x) + 1.2; }, 1.2, 1.2);
    for (int j = 1; j < g.n_cells; j += 17)
      CHECK(u.value(j) == Approx(std::sin(g.node(j)) + 1.2).epsilon(1e-15));
    CHECK(u.bc_left == 1.2);
    CHECK(u.bc_right == 1.2);
  }
  SECTION("zero function") {
    const Grid1D g = build_grid(0.0, 1.0, 4);
    const FieldP1 u = interpolate_function(g, [](double) { return 0.0; }, 0.0, 0.0);
    CHECK(u.interior.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("linear function reproduced exactly") {
    const Grid1D g = build_grid(0.0, 1.0, 4);
    const FieldP1 u = interpolate_function(g, [](double x) { return x; }, 0.0, 1.0);
    CHECK(u.interior(0) == Approx(0.25).epsilon(1e-15));
    CHECK(u.interior(1) == Approx(0.5).epsilon(1e-15));
    CHECK(u.interior(2) == Approx(0.75).epsilon(1e-15));
  }
  SECTION("non-finite values are rejected") {
    const Grid1D g = build_grid(0.0, 1.0, 4);
    CHECK_THROWS_AS(
        interpolate_function(g, [](double x) { return 1.0 / (x - 0.5); }, 0.0, 0.0),
        NonFiniteValueError);
  }
}

TEST_CASE("s = 1 assembly routes to the local operator") {
  const Grid1D g = build_grid(0.0, 1.0, 12);
  const OperatorSet ops = assemble_operators(g, FractionalOrder(1.0));
  CHECK((ops.stiffness - assemble_stiffness_local(g)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(stiffness_inf_norm(g, FractionalOrder(1.0)) == Approx(4.0 / g.h));
  const double frac_norm = stiffness_inf_norm(g, FractionalOrder(0.5));
  const Eigen::MatrixXd a = assemble_stiffness_fractional(g, FractionalOrder(0.5));
  CHECK(frac_norm == Approx(a.cwiseAbs().rowwise().sum().maxCoeff()).epsilon(1e-14));
}
