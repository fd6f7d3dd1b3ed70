#include "nearopt/robust.h"

#include <gtest/gtest.h>

#include <cmath>

#include "nearopt/estimator.h"
#include "nearopt/linalg.h"
#include "nearopt/s_risk.h"

namespace nearopt {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

UncertaintyModel scalar_model(double r) {
  Matrix E(1, 2);
  E << 1, 1;
  return {scalar(1), scalar(1), E, scalar(1), r};
}

struct Instance {
  UncertaintyModel um;
  Matrix S;
  Ellitope ell;
};

Instance random_instance(int seed, double r) {
  Rng rng = make_rng(seed);
  const int n = 4, m = 5, nu = 2;
  const Matrix g = gaussian_matrix(n, n, rng);
  UncertaintyModel um{gaussian_matrix(m, n, rng), gaussian_matrix(nu, n, rng), 0.3 * gaussian_matrix(2, m + nu, rng),
                      gaussian_matrix(3, n, rng), r};
  std::vector<Matrix> S;
  for (int k = 0; k < 2; ++k) {
    const Matrix h = gaussian_matrix(n, n, rng);
    S.push_back(h * h.transpose() + 0.1 * Matrix::Identity(n, n));
  }
  return {um, 0.1 * g * g.transpose() / n, Ellitope(S, TSet::unit_box(2))};
}

TEST(BuildRobustEstimate, ZeroRadiusMatchesNominal) {
  for (int seed = 1; seed <= 3; ++seed) {
    const Instance in = random_instance(seed, 0.0);
    const RobustEstimate rob = build_robust_estimate(in.um, 0.4, in.S, in.ell);
    ASSERT_TRUE(rob.feasible);
    const SRiskProblem sp{{in.um.A_star, in.um.B_star, 0.4, in.ell}, in.S};
    EXPECT_NEAR(rob.rob_opt, build_srisk_estimate(sp).tau, 1e-6 * (1 + rob.rob_opt)) << seed;
  }
}

TEST(BuildRobustEstimate, ZeroEMatchesNominal) {
  Instance in = random_instance(4, 0.7);
  in.um.E.setZero();
  const RobustEstimate rob = build_robust_estimate(in.um, 0.4, in.S, in.ell);
  const SRiskProblem sp{{in.um.A_star, in.um.B_star, 0.4, in.ell}, in.S};
  EXPECT_NEAR(rob.rob_opt, build_srisk_estimate(sp).tau, 1e-6 * (1 + rob.rob_opt));
}

TEST(BuildRobustEstimate, MonotoneInRadius) {
  const Instance in0 = random_instance(5, 0.0);
  double prev = 0.0;
  for (int i = 0; i <= 10; ++i) {
    UncertaintyModel um = in0.um;
    um.r = 0.1 * i;
    const double v = build_robust_estimate(um, 0.3, in0.S, in0.ell).rob_opt;
    EXPECT_GE(v, prev * (1 - 1e-7)) << um.r;
    prev = v;
  }
}

TEST(BuildRobustEstimate, ScalarDominatesPerturbedDesigns) {
  const Ellitope seg = Ellitope::ellipsoid(scalar(1));
  const RobustEstimate rob = build_robust_estimate(scalar_model(0.5), 1.0, Matrix(), seg);
  const double nominal = build_linear_estimate({scalar(1), scalar(1), 1.0, seg}).opt;
  EXPECT_GE(rob.rob_opt, nominal);
  double worst = 0.0;
  for (int i = 0; i <= 20; ++i) {
    const double d = -0.5 + 0.05 * i;
    worst = std::max(worst, build_linear_estimate({scalar(1 + d), scalar(1 + d), 1.0, seg}).opt);
  }
  EXPECT_GE(rob.rob_opt, worst * (1 - 1e-7));
}

TEST(VerifyRobustFeasibility, RobustSolutionPasses) {
  const Instance in = random_instance(6, 0.5);
  const RobustEstimate rob = build_robust_estimate(in.um, 0.3, in.S, in.ell);
  EXPECT_EQ(verify_robust_feasibility(rob.H, rob.lam, rob.rob_opt, in.um, in.S, in.ell, 1000, 1), 1.0);
  const RobustEstimate s = build_robust_estimate(scalar_model(0.5), 1.0, Matrix(), Ellitope::ellipsoid(scalar(1)));
  EXPECT_EQ(verify_robust_feasibility(s.H, s.lam, s.rob_opt, scalar_model(0.5), Matrix(),
                                      Ellitope::ellipsoid(scalar(1)), 1000, 2),
            1.0);
}

TEST(VerifyRobustFeasibility, NominalSolutionFailsAdversarialInstance) {
  const Ellitope seg = Ellitope::ellipsoid(scalar(1));
  const LinearEstimate nom = build_linear_estimate({scalar(1), scalar(1), 1.0, seg});
  const UncertaintyModel um = scalar_model(0.5);
  EXPECT_LT(verify_robust_feasibility(nom.H, nom.lam, 0.0, um, Matrix(), seg, 200, 3), 1.0);
  UncertaintyModel none = um;
  none.r = 0.0;
  EXPECT_EQ(verify_robust_feasibility(nom.H, nom.lam, 0.0, none, Matrix(), seg, 50, 3), 1.0);
}

TEST(UncertaintyModel, Validation) {
  UncertaintyModel um = scalar_model(-1.0);
  EXPECT_THROW(um.validate(), DomainError);
  um = scalar_model(0.1);
  um.E = Matrix::Ones(1, 3);
  EXPECT_THROW(um.validate(), DomainError);
  const auto [A, B] = scalar_model(0.1).perturbed(scalar(0.2));
  EXPECT_DOUBLE_EQ(A(0, 0), 1.2);
  EXPECT_DOUBLE_EQ(B(0, 0), 1.2);
}

}  // namespace
}  // namespace nearopt
