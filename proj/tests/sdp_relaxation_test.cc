#include "nearopt/sdp_relaxation.h"

#include <gtest/gtest.h>

#include <cmath>

#include "nearopt/linalg.h"

namespace nearopt {
namespace {

Matrix random_psd(int n, Rng& rng) {
  const Matrix g = gaussian_matrix(n, n, rng);
  return g * g.transpose();
}

TEST(RelaxQuadraticMax, EllipsoidWithOwnForm) {
  Rng rng = make_rng(1);
  const Matrix S = random_psd(4, rng) + 0.1 * Matrix::Identity(4, 4);
  const RelaxationResult r = relax_quadratic_max(S, Ellitope::ellipsoid(S));
  EXPECT_NEAR(r.opt, 1.0, 1e-7);
  EXPECT_NEAR(r.dual_opt, 1.0, 1e-7);
  EXPECT_NEAR(r.lam_star(0), 1.0, 1e-5);
}

TEST(RelaxQuadraticMax, NegativeFormGivesZero) {
  Rng rng = make_rng(2);
  const Matrix C = -random_psd(3, rng);
  const RelaxationResult r = relax_quadratic_max(C, Ellitope::box(Vector::Ones(3)));
  EXPECT_NEAR(r.opt, 0.0, 1e-7);
  EXPECT_LE(r.Q_star.norm(), 1e-5);
}

TEST(RelaxQuadraticMax, SymmetrizesInput) {
  Matrix C = Matrix::Identity(2, 2);
  C(0, 1) = 1.0;
  const RelaxationResult r = relax_quadratic_max(C, Ellitope::box(Vector::Ones(2)));
  EXPECT_TRUE(r.symmetrized);
  Matrix Cs = Matrix::Identity(2, 2);
  Cs(0, 1) = Cs(1, 0) = 0.5;
  EXPECT_NEAR(r.opt, brute_force_box_max(Cs, Vector::Ones(2)), 1e-6);
}

TEST(RelaxQuadraticMax, BoxSandwichAndRounding) {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 4 + trial;
    Vector a(n);
    for (int i = 0; i < n; ++i) a(i) = 0.5 + std::abs(gaussian_vector(1, rng)(0));
    const Ellitope box = Ellitope::box(a);
    const Matrix C = random_psd(n, rng);
    const RelaxationResult r = relax_quadratic_max(C, box);
    const double vmax = brute_force_box_max(C, a);
    const double f = rounding_factor(n);
    EXPECT_LE(vmax, r.opt * (1 + 1e-7)) << n;
    EXPECT_GE(vmax, r.opt / f) << n;
    const RoundingResult rr = round_rademacher(C, box, r.Q_star, r.t_star, 10 + trial, 200);
    ASSERT_TRUE(rr.accepted);
    EXPECT_TRUE(box.contains(rr.x_hat, 1e-9));
    EXPECT_GE(rr.val_hat, r.opt / f) << n;
    EXPECT_LE(rr.val_hat, vmax * (1 + 1e-9));
    // the construction gives y^T C y = Tr(CQ) / s_* exactly
    EXPECT_NEAR(rr.val_unscaled * f, r.opt, 1e-6 * (1 + r.opt));
    EXPECT_GE(rr.scale, 1.0);
  }
}

TEST(RoundRademacher, OneDimensional) {
  const Ellitope seg = Ellitope::box(Vector::Constant(1, 2.0));
  const Matrix C = Matrix::Constant(1, 1, 3.0);
  const RelaxationResult r = relax_quadratic_max(C, seg);
  EXPECT_NEAR(r.opt, 0.75, 1e-7);
  const RoundingResult a = round_rademacher(C, seg, r.Q_star, r.t_star, 1);
  const RoundingResult b = round_rademacher(C, seg, r.Q_star, r.t_star, 2);
  EXPECT_NEAR(a.val_unscaled, r.opt / rounding_factor(1), 1e-7);
  EXPECT_NEAR(a.val_unscaled, b.val_unscaled, 1e-15);
  EXPECT_NEAR(a.val_hat, 0.75, 1e-6);
}

TEST(RoundRademacher, EllipsoidTight) {
  Rng rng = make_rng(4);
  const Matrix S = random_psd(5, rng) + 0.2 * Matrix::Identity(5, 5);
  const Matrix C = random_psd(5, rng);
  const Ellitope ell = Ellitope::ellipsoid(S);
  const RelaxationResult r = relax_quadratic_max(C, ell);
  // max x^T C x on the ellipsoid is the top generalized eigenvalue
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(C, S);
  EXPECT_NEAR(r.opt, ges.eigenvalues().maxCoeff(), 1e-6);
  const RoundingResult rr = round_rademacher(C, ell, r.Q_star, r.t_star, 5, 100);
  EXPECT_TRUE(rr.accepted);
  EXPECT_GE(rr.val_hat, 0.99 * r.opt);
}

TEST(RademacherMoment, Cases) {
  Matrix e1 = Matrix::Zero(4, 4);
  e1(0, 0) = 1.0;
  const MomentCheck a = check_rademacher_moment(e1, 1000, 1);
  EXPECT_NEAR(a.mc_estimate, std::exp(0.25), 1e-12);
  EXPECT_TRUE(a.pass);
  EXPECT_TRUE(check_rademacher_moment(Matrix::Identity(16, 16) / 16.0, 100000, 2).pass);
  Rng rng = make_rng(3);
  const Vector g = gaussian_vector(10, rng);
  EXPECT_TRUE(check_rademacher_moment(g * g.transpose() / g.squaredNorm(), 100000, 3).pass);
  EXPECT_THROW(check_rademacher_moment(Matrix::Identity(2, 2), 10, 1), DomainError);
}

TEST(BruteForceBoxMax, Simple) {
  Matrix C = Matrix::Identity(2, 2);
  Vector a(2);
  a << 1.0, 0.5;
  EXPECT_DOUBLE_EQ(brute_force_box_max(C, a), 5.0);
}

}  // namespace
}  // namespace nearopt
