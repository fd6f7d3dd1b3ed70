#include <random>

#include <gtest/gtest.h>

#include "nearopt/conic_solver.h"

namespace nearopt {
namespace {

TEST(ConicSolver, ScalarLmi) {
  ConicProgram prog(1);
  prog.set_objective(0, 1.0);
  auto& blk = prog.add_lmi(1);
  blk.add_entry(0, 0, 0, 1.0);
  blk.constant()(0, 0) = -1.0;
  const auto sol = solve(prog);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.x(0), 1.0, 1e-7);
  EXPECT_NEAR(sol.lmi_duals[0](0, 0), 1.0, 1e-6);
}

TEST(ConicSolver, TwoByTwoLmi) {
  ConicProgram prog(1);
  prog.set_objective(0, 1.0);
  auto& blk = prog.add_lmi(2);
  blk.add_entry(0, 0, 0, 1.0);
  blk.add_entry(0, 1, 1, 1.0);
  blk.constant()(0, 1) = blk.constant()(1, 0) = 3.0;
  const auto sol = solve(prog);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.x(0), 3.0, 1e-7);
}

// min sigma^2 h^2 + lam  s.t. [[lam, 1-h],[1-h, 1]] >= 0, sigma = 1; u >= h^2 via LMI.
TEST(ConicSolver, SchurScalarOracle) {
  ConicProgram prog(3);  // h, lam, u
  prog.set_objective(1, 1.0);
  prog.set_objective(2, 1.0);
  auto& a = prog.add_lmi(2);
  a.add_entry(1, 0, 0, 1.0);
  a.add_entry(0, 0, 1, -1.0);
  a.constant()(0, 1) = a.constant()(1, 0) = 1.0;
  a.constant()(1, 1) = 1.0;
  auto& b = prog.add_lmi(2);
  b.add_entry(2, 0, 0, 1.0);
  b.add_entry(0, 0, 1, 1.0);
  b.constant()(1, 1) = 1.0;
  const auto sol = solve(prog);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.primal_objective, 0.5, 1e-7);
  EXPECT_NEAR(sol.x(0), 0.5, 1e-6);
}

TEST(ConicSolver, SocAndLinear) {
  // min t s.t. ||(x - 1, y - 2)|| <= t, x + y == 0
  ConicProgram prog(3);
  prog.set_objective(2, 1.0);
  SocConstraint soc;
  soc.head = LinearExpr::var(2);
  soc.tail.push_back(LinearExpr(-1.0).add(0, 1.0));
  soc.tail.push_back(LinearExpr(-2.0).add(1, 1.0));
  prog.add_soc(soc);
  prog.add_eq(LinearExpr().add(0, 1.0).add(1, 1.0));
  const auto sol = solve(prog);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.primal_objective, 3.0 / std::sqrt(2.0), 1e-7);
  EXPECT_NEAR(sol.x(0), -0.5, 1e-6);
  EXPECT_NEAR(sol.x(1), 0.5, 1e-6);
}

TEST(ConicSolver, RotatedSoc) {
  // min u s.t. u * 1 >= (x-3)^2 with x free, plus x <= 1 -> u = 4
  ConicProgram prog(2);
  prog.set_objective(0, 1.0);
  prog.add_rotated_soc(LinearExpr::var(0), LinearExpr(1.0), {LinearExpr(-3.0).add(1, 1.0)});
  prog.add_le(LinearExpr(-1.0).add(1, 1.0));
  const auto sol = solve(prog);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.primal_objective, 4.0, 1e-7);
}

TEST(ConicSolver, InfeasibleLinear) {
  ConicProgram prog(1);
  prog.set_objective(0, 1.0);
  prog.add_ge(LinearExpr(-2.0).add(0, 1.0));  // x >= 2
  prog.add_le(LinearExpr(-1.0).add(0, 1.0));  // x <= 1
  const auto sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::kInfeasible);
  const auto chk = check_certificate(prog, sol);
  EXPECT_LT(chk.farkas_value, -0.5);
  EXPECT_LT(chk.dual_infeasibility, 1e-7);
  EXPECT_LT(chk.dual_cone_violation, 1e-9);
}

TEST(ConicSolver, InfeasibleLmi) {
  // [[x, 1],[1, -x]] >= 0 is infeasible.
  ConicProgram prog(1);
  auto& blk = prog.add_lmi(2);
  blk.add_entry(0, 0, 0, 1.0);
  blk.add_entry(0, 1, 1, -1.0);
  blk.constant()(0, 1) = blk.constant()(1, 0) = 1.0;
  const auto sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::kInfeasible);
  const auto chk = check_certificate(prog, sol);
  EXPECT_LT(chk.farkas_value, -0.5);
  EXPECT_LT(chk.dual_infeasibility, 1e-7);
}

TEST(ConicSolver, Unbounded) {
  ConicProgram prog(1);
  prog.set_objective(0, -1.0);
  prog.add_nonneg(0);
  const auto sol = solve(prog);
  EXPECT_EQ(sol.status, SolveStatus::kUnbounded);
}

ConicProgram random_program(std::mt19937_64& rng, int d, int n) {
  std::normal_distribution<double> g;
  // Strictly feasible at x0 = 0 with F0 = I; bounded because the dual has
  // a strictly feasible point Z0 (we set c = F^T Z0 with Z0 > 0).
  ConicProgram prog(d);
  auto& blk = prog.add_lmi(n);
  blk.constant().setIdentity();
  Matrix Z0 = Matrix::Random(n, n);
  Z0 = Z0 * Z0.transpose() + Matrix::Identity(n, n);
  for (int i = 0; i < d; ++i) {
    Matrix F(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) F(r, c) = g(rng);
    F = 0.5 * (F + F.transpose());
    blk.add_dense(i, F);
    prog.set_objective(i, F.cwiseProduct(Z0).sum());
  }
  return prog;
}

TEST(ConicSolver, RandomSuiteDualityGap) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 5 + trial * 3;
    const int n = 4 + trial * 3;
    ConicProgram prog = random_program(rng, d, n);
    const auto sol = solve(prog);
    ASSERT_TRUE(sol.optimal()) << "trial " << trial << " status " << to_string(sol.status);
    const auto chk = check_certificate(prog, sol);
    const double rel = std::abs(sol.primal_objective - chk.dual_bound) / std::max(1.0, std::abs(sol.primal_objective));
    EXPECT_LT(rel, 1e-6);
    EXPECT_LT(chk.primal_infeasibility, 1e-7);
    EXPECT_LT(chk.dual_infeasibility, 1e-7);
  }
}

TEST(ConicSolver, EqualityRowScalingInvariance) {
  auto build = [](double scale) {
    ConicProgram prog(3);
    prog.set_objective(0, 1.0);
    prog.set_objective(1, 2.0);
    prog.set_objective(2, 0.5);
    auto& blk = prog.add_lmi(2);
    blk.add_entry(0, 0, 0, 1.0);
    blk.add_entry(1, 1, 1, 1.0);
    blk.add_entry(2, 0, 1, 1.0);
    prog.add_eq(LinearExpr(-scale).add(0, scale).add(1, scale));
    return prog;
  };
  const auto a = solve(build(1.0));
  const auto b = solve(build(1e3));
  ASSERT_TRUE(a.optimal());
  ASSERT_TRUE(b.optimal());
  EXPECT_LT((a.x - b.x).norm(), 1e-6);
}

TEST(ConicSolver, BasisEntriesMatchDense) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const int n = 5, p = 3;
  Matrix L(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) L(i, j) = g(rng);
  ConicProgram a(p * (p + 1) / 2 + 1), b(p * (p + 1) / 2 + 1);
  auto& la = a.add_lmi(n);
  auto& lb = b.add_lmi(n);
  const int basis = lb.add_basis(L);
  la.constant().setIdentity();
  lb.constant().setIdentity();
  int v = 0;
  for (int c = 0; c < p; ++c)
    for (int r = 0; r <= c; ++r, ++v) {
      Matrix E = Matrix::Zero(p, p);
      E(r, c) = E(c, r) = 1.0;
      la.add_dense(v, L * E * L.transpose());
      lb.add_entry(v, r, c, 1.0, basis);
      const double cost = g(rng);
      a.set_objective(v, cost);
      b.set_objective(v, cost);
    }
  // keep the problem bounded
  for (ConicProgram* prog : {&a, &b}) {
    SocConstraint soc;
    soc.head = LinearExpr(10.0);
    for (int i = 0; i < v; ++i) soc.tail.push_back(LinearExpr::var(i));
    prog->add_soc(soc);
  }
  const auto sa = solve(a);
  const auto sb = solve(b);
  ASSERT_TRUE(sa.optimal());
  ASSERT_TRUE(sb.optimal());
  EXPECT_NEAR(sa.primal_objective, sb.primal_objective, 1e-7);
}

// Several LMI blocks with a random interior point x0, an SOC ball around x0,
// and a pinned coordinate; strictly feasible on both sides.
TEST(ConicSolver, MixedConesRandom) {
  for (int seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    const int d = 3 + seed % 13;
    ConicProgram prog(d);
    Vector x0(d);
    for (int i = 0; i < d; ++i) x0(i) = g(rng);
    Vector c = Vector::Zero(d);
    for (int b = 0; b < 1 + seed % 3; ++b) {
      const int n = 2 + (seed * 7 + b * 5) % 11;
      auto& blk = prog.add_lmi(n);
      Matrix Z0 = Matrix::Random(n, n);
      Z0 = Z0 * Z0.transpose() / n + Matrix::Identity(n, n);
      Matrix S = Matrix::Random(n, n);
      Matrix F0 = S * S.transpose() + 0.1 * Matrix::Identity(n, n);
      for (int i = 0; i < d; ++i) {
        Matrix F(n, n);
        for (int r = 0; r < n; ++r)
          for (int q = 0; q < n; ++q) F(r, q) = g(rng);
        F = 0.5 * (F + F.transpose());
        blk.add_dense(i, F);
        F0 -= x0(i) * F;
        c(i) += F.cwiseProduct(Z0).sum();
      }
      blk.add_constant(F0);
    }
    SocConstraint ball;
    ball.head = LinearExpr(5.0);
    for (int i = 0; i < d; ++i) ball.tail.push_back(LinearExpr(-x0(i)).add(i, 1.0));
    prog.add_soc(ball);
    prog.add_eq(LinearExpr(-x0(0)).add(0, 1.0));
    prog.add_ge(LinearExpr(1.0 - x0(d - 1)).add(d - 1, 1.0));
    prog.objective() = c;
    const auto sol = solve(prog);
    ASSERT_TRUE(sol.optimal()) << "seed " << seed << " status " << to_string(sol.status);
    const auto chk = check_certificate(prog, sol);
    const double rel = std::abs(sol.primal_objective - chk.dual_bound) / (1.0 + std::abs(sol.primal_objective));
    EXPECT_LT(rel, 1e-6) << "seed " << seed;
    EXPECT_LT(chk.primal_infeasibility, 1e-6) << "seed " << seed;
    EXPECT_LT(chk.dual_infeasibility, 1e-6) << "seed " << seed;
    EXPECT_LT(sol.iterations, 60);
  }
}

TEST(ConicSolver, InfeasibleSoc) {
  // ||(x1, x2)|| <= 1 and x1 + x2 >= 2 cannot both hold.
  ConicProgram prog(2);
  SocConstraint soc;
  soc.head = LinearExpr(1.0);
  soc.tail = {LinearExpr::var(0), LinearExpr::var(1)};
  prog.add_soc(soc);
  prog.add_ge(LinearExpr(-2.0).add(0, 1.0).add(1, 1.0));
  const auto sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::kInfeasible);
  const auto chk = check_certificate(prog, sol);
  EXPECT_NEAR(chk.farkas_value, -1.0, 1e-6);
  EXPECT_LT(chk.dual_infeasibility, 1e-7);
  EXPECT_LT(chk.dual_cone_violation, 1e-9);
}

TEST(ConicSolver, EnvToleranceOverride) {
  setenv("ESTIMATOR_SOLVER_TOL", "1e-5", 1);
  const auto opts = SolverOptions::from_env();
  unsetenv("ESTIMATOR_SOLVER_TOL");
  EXPECT_DOUBLE_EQ(opts.tol_gap, 1e-5);
  EXPECT_DOUBLE_EQ(opts.tol_feas, 1e-5);
  EXPECT_DOUBLE_EQ(SolverOptions::from_env().tol_gap, 1e-8);
}

}  // namespace
}  // namespace nearopt
