#include "nearopt/ellitope.h"

#include <gtest/gtest.h>

#include <cmath>

#include "nearopt/linalg.h"

namespace nearopt {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<long>(v.size()));
  long i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Matrix diag(std::initializer_list<double> v) { return vec(v).asDiagonal(); }

RawEllitope interval() { return RawEllitope::identity(Ellitope::ellipsoid(Matrix::Identity(1, 1))); }

TEST(TSet, SupportClosedForms) {
  EXPECT_DOUBLE_EQ(TSet::unit_box(3).support(vec({1, 2, 3})), 6.0);
  EXPECT_DOUBLE_EQ(TSet::unit_segment().support(vec({5})), 5.0);
  EXPECT_NEAR(TSet::pnorm_ball(2, 4.0).support(vec({3, 4})), 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(TSet::pnorm_ball(3, 2.0).support(vec({1, 7, 2})), 7.0);
}

TEST(TSet, PNormSupportMatchesGridSearch) {
  // Quarter disk t1^2 + t2^2 <= 1, brute force over its boundary.
  const Vector lam = vec({3, 4});
  double best = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double a = 0.5 * M_PI * i / 200000.0;
    best = std::max(best, lam(0) * std::cos(a) + lam(1) * std::sin(a));
  }
  EXPECT_NEAR(TSet::pnorm_ball(2, 4.0).support(lam), best, 1e-4);
}

TEST(TSet, NegativeLambdaRejected) {
  EXPECT_THROW(TSet::unit_box(2).support(vec({1, -1})), DomainError);
  EXPECT_THROW(TSet::pnorm_ball(2, 1.5), DomainError);
}

TEST(TSet, SupportHomogeneousAndMonotone) {
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<TSet> sets = {TSet::unit_box(4), TSet::pnorm_ball(4, 2.0), TSet::pnorm_ball(4, 3.0),
                                  TSet::pnorm_ball(4, 8.0),
                                  TSet::product({TSet::unit_segment(), TSet::pnorm_ball(3, 4.0)})};
  for (const auto& T : sets) {
    for (int trial = 0; trial < 50; ++trial) {
      Vector a(4), d(4);
      for (int k = 0; k < 4; ++k) {
        a(k) = u(rng);
        d(k) = u(rng);
      }
      const double c = 3.0 * u(rng);
      EXPECT_NEAR(T.support(c * a), c * T.support(a), 1e-12 * (1 + T.support(a)));
      EXPECT_LE(T.support(a), T.support(a + d) + 1e-14);
    }
  }
}

TEST(TSet, CondValues) {
  EXPECT_NEAR(TSet::unit_box(5).cond(), std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(TSet::unit_segment().cond(), 1.0, 1e-12);
  EXPECT_NEAR(TSet::pnorm_ball(6, 4.0).cond(), std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(TSet::pnorm_ball(6, 2.0).cond(), std::sqrt(6.0), 1e-12);
}

TEST(Ellitope, ContainsExamples) {
  const Ellitope ell = Ellitope::ellipsoid(diag({1, 4}));
  EXPECT_TRUE(ell.contains(vec({1, 0}), 0.0));
  EXPECT_FALSE(ell.contains(vec({1, 0.1}), 0.0));
  const Ellitope box = Ellitope::box(vec({1, 1}));
  EXPECT_TRUE(box.contains(vec({0.9, -1.0}), 0.0));
  EXPECT_THROW(box.contains(vec({1, 2, 3})), DomainError);
}

TEST(Ellitope, RelativeTolerance) {
  const Ellitope ell = Ellitope::ellipsoid(Matrix::Identity(1, 1));
  EXPECT_TRUE(ell.contains(vec({std::sqrt(1.0 + 1e-3)}), 1e-3));
  EXPECT_FALSE(ell.contains(vec({std::sqrt(1.0 + 2e-3)}), 1e-3));
}

TEST(Ellitope, Validation) {
  EXPECT_THROW(Ellitope({diag({1, -1})}, TSet::unit_segment()), DomainError);
  EXPECT_THROW(Ellitope({diag({1, 0})}, TSet::unit_segment()), DomainError);
  EXPECT_THROW(Ellitope({diag({1, 1})}, TSet::unit_box(2)), DomainError);
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(Ellitope({asym}, TSet::unit_segment()), DomainError);
}

TEST(Ellitope, KappaMatchesIndependentEigensolve) {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Matrix> S;
    Matrix sum = Matrix::Zero(5, 5);
    for (int k = 0; k < 3; ++k) {
      const Matrix g = gaussian_matrix(5, 3, rng);
      S.push_back(g * g.transpose());
      sum += S.back();
    }
    const Ellitope ell(S, TSet::pnorm_ball(3, 4.0));
    const double ref = Eigen::EigenSolver<Matrix>(sum).eigenvalues().real().minCoeff();
    EXPECT_NEAR(ell.kappa(), ref, 1e-10 * (1 + sum.norm()));
  }
}

TEST(Ellitope, BoundingInequality) {
  Rng rng = make_rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Matrix> S;
  for (int k = 0; k < 3; ++k) {
    const Matrix g = gaussian_matrix(4, 4, rng);
    S.push_back(g * g.transpose());
  }
  for (const TSet& T : {TSet::unit_box(3), TSet::pnorm_ball(3, 3.0), TSet::pnorm_ball(3, 2.0)}) {
    const Ellitope ell(S, T);
    for (int trial = 0; trial < 200; ++trial) {
      Vector x = gaussian_vector(4, rng);
      x *= u(rng) / ell.gauge(x);
      ASSERT_TRUE(ell.contains(x));
      const Vector lam = Vector::Random(3).cwiseAbs();
      EXPECT_LE(lam.dot(ell.loads(x)), T.support(lam) + 1e-12);
    }
  }
}

TEST(Ellitope, GaugeScalesToBoundary) {
  const Ellitope ell(std::vector<Matrix>{diag({1, 0}), diag({0, 1})}, TSet::pnorm_ball(2, 6.0));
  const Vector x = vec({0.3, 2.0});
  const Vector b = x / ell.gauge(x);
  EXPECT_NEAR(TSet::pnorm_ball(2, 6.0).gauge(ell.loads(b)), 1.0, 1e-12);
}

TEST(Calculus, DirectProductOfIntervals) {
  const RawEllitope box = direct_product({interval(), interval()});
  EXPECT_EQ(box.core.K(), 2);
  EXPECT_TRUE(box.contains(vec({0.5, -0.5})));
  EXPECT_FALSE(box.contains(vec({0.5, -1.1})));
}

TEST(Calculus, ImageOfUnitBall) {
  const RawEllitope ball = RawEllitope::identity(Ellitope::ellipsoid(Matrix::Identity(2, 2)));
  const RawEllitope big = linear_image(ball, 2.0 * Matrix::Identity(2, 2));
  EXPECT_TRUE(big.contains(vec({1.9, 0})));
  EXPECT_FALSE(big.contains(vec({2.1, 0})));
}

TEST(Calculus, MinkowskiSumOfIntervals) {
  const RawEllitope sum = minkowski_sum({interval(), interval()});
  EXPECT_EQ(sum.core.K(), 2);
  EXPECT_TRUE(sum.contains(vec({1.99})));
  EXPECT_FALSE(sum.contains(vec({2.01})));
}

TEST(Calculus, IntersectionMatchesBothOperands) {
  const RawEllitope a = RawEllitope::identity(Ellitope::ellipsoid(diag({1, 4})));
  const RawEllitope b = RawEllitope::identity(Ellitope::ellipsoid(diag({4, 1})));
  const RawEllitope both = intersect({a, b});
  EXPECT_EQ(both.core.K(), 2);
  Rng rng = make_rng(7);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  int judged = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const Vector x = vec({u(rng), u(rng)});
    // skip points too close to the boundary to judge
    if (std::abs(std::max(a.core.gauge(x), b.core.gauge(x)) - 1.0) < 1e-3) continue;
    ++judged;
    EXPECT_EQ(both.contains(x), a.core.contains(x) && b.core.contains(x)) << x.transpose();
  }
  EXPECT_GT(judged, 40);
}

TEST(Calculus, LinearImageContainsImages) {
  Rng rng = make_rng(9);
  const Ellitope ell(std::vector<Matrix>{diag({1, 0, 0}), diag({0, 1, 0}), diag({0, 0, 1})},
                     TSet::pnorm_ball(3, 4.0));
  const RawEllitope raw = RawEllitope::identity(ell);
  const Matrix R = gaussian_matrix(2, 3, rng);
  const RawEllitope img = linear_image(raw, R);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x = gaussian_vector(3, rng);
    x /= ell.gauge(x);
    EXPECT_TRUE(img.contains(R * x));
    EXPECT_LE(img.gauge(R * x), 1.0 + 1e-6);
  }
}

TEST(Calculus, InverseImage) {
  // {z : 2 z in [-1, 1]^2} = [-0.5, 0.5]^2
  const RawEllitope box = direct_product({interval(), interval()});
  const RawEllitope pre = inverse_image(box, 2.0 * Matrix::Identity(2, 2));
  EXPECT_TRUE(pre.contains(vec({0.49, -0.49})));
  EXPECT_FALSE(pre.contains(vec({0.51, 0})));
  // Line through the box: {z : (z, z) in box} = [-1, 1]
  const RawEllitope line = inverse_image(box, Matrix::Ones(2, 1));
  EXPECT_TRUE(line.contains(vec({0.99})));
  EXPECT_FALSE(line.contains(vec({1.01})));
  EXPECT_THROW(inverse_image(box, Matrix::Ones(2, 2)), DomainError);
}

TEST(Calculus, EmptyListRejected) {
  EXPECT_THROW(intersect({}), DomainError);
  EXPECT_THROW(direct_product({}), DomainError);
  EXPECT_THROW(minkowski_sum({}), DomainError);
}

TEST(Canonicalize, Examples) {
  const Ellitope ball = Ellitope::ellipsoid(Matrix::Identity(2, 2));
  const Matrix I = Matrix::Identity(2, 2);
  auto same = canonicalize(RawEllitope::identity(ball), I, I);
  EXPECT_TRUE(same.A.isApprox(I));
  auto two = canonicalize(RawEllitope{ball, 2 * I}, I, I);
  EXPECT_TRUE(two.A.isApprox(2 * I));
  EXPECT_TRUE(two.B.isApprox(2 * I));
  EXPECT_TRUE(two.ell.S()[0].isApprox(I));
  Matrix P(3, 2);
  P << 1, 0, 0, 1, 0, 0;
  auto lifted = canonicalize(RawEllitope{ball, P}, Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  EXPECT_EQ(lifted.ell.n(), 2);
  EXPECT_EQ(lifted.A.rows(), 3);
  EXPECT_EQ(lifted.A.cols(), 2);
}

TEST(ConicEncoding, TSetConeMatchesGauge) {
  // min s s.t. t fixed, [t; s] in cone(T) gives gauge(t).
  for (const TSet& T : {TSet::unit_box(3), TSet::pnorm_ball(3, 2.0), TSet::pnorm_ball(3, 4.0),
                        TSet::pnorm_ball(3, 8.0), TSet::pnorm_ball(3, 8.0 / 3.0),
                        TSet::product({TSet::unit_segment(), TSet::pnorm_ball(2, 16.0)})}) {
    const Vector g = vec({0.3, 0.7, 0.2});
    ConicProgram prog(4);
    std::vector<LinearExpr> t;
    for (int k = 0; k < 3; ++k) {
      t.push_back(LinearExpr::var(k));
      prog.add_eq(LinearExpr(-g(k)).add(k, 1.0));
    }
    add_tset_cone(prog, T, t, LinearExpr::var(3));
    prog.set_objective(3, 1.0);
    const ConicSolution sol = solve(prog);
    ASSERT_TRUE(sol.optimal()) << T.describe();
    EXPECT_NEAR(sol.x(3), T.gauge(g), 1e-7) << T.describe();
  }
}

TEST(ConicEncoding, SupportEpigraphMatchesClosedForm) {
  for (const TSet& T : {TSet::unit_box(3), TSet::pnorm_ball(3, 2.0), TSet::pnorm_ball(3, 4.0),
                        TSet::pnorm_ball(3, 8.0), TSet::pnorm_ball(3, 8.0 / 3.0),
                        TSet::product({TSet::unit_segment(), TSet::pnorm_ball(2, 16.0)})}) {
    const Vector lam = vec({0.3, 1.7, 0.9});
    ConicProgram prog(4);
    std::vector<LinearExpr> l;
    for (int k = 0; k < 3; ++k) {
      l.push_back(LinearExpr::var(k));
      prog.add_eq(LinearExpr(-lam(k)).add(k, 1.0));
    }
    add_support_epigraph(prog, T, l, LinearExpr::var(3));
    prog.set_objective(3, 1.0);
    const ConicSolution sol = solve(prog);
    ASSERT_TRUE(sol.optimal()) << T.describe();
    EXPECT_NEAR(sol.x(3), T.support(lam), 1e-7) << T.describe();
  }
}

TEST(ConicEncoding, NonDyadicRejected) {
  const TSet T = TSet::pnorm_ball(2, 3.0);
  EXPECT_FALSE(T.conic_representable());
  ConicProgram prog(3);
  EXPECT_THROW(add_tset_cone(prog, T, {LinearExpr::var(0), LinearExpr::var(1)}, LinearExpr::var(2)), DomainError);
  EXPECT_NEAR(T.support(vec({1, 1})), std::pow(2.0, 1.0 / 3.0), 1e-12);
}

}  // namespace
}  // namespace nearopt
