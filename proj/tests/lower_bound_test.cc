#include "nearopt/lower_bound.h"

#include <gtest/gtest.h>

#include <cmath>

#include "nearopt/linalg.h"

namespace nearopt {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

EstimationProblem scalar_problem(double sigma) {
  return {scalar(1.0), scalar(1.0), sigma, Ellitope::ellipsoid(scalar(1.0))};
}

EstimationProblem random_problem(int seed, int n, int m, int nu, double sigma, bool box) {
  Rng rng = make_rng(seed);
  const Matrix A = gaussian_matrix(m, n, rng);
  const Matrix B = gaussian_matrix(nu, n, rng);
  if (box) {
    Vector a(n);
    for (int i = 0; i < n; ++i) a(i) = 0.5 + i;
    return {A, B, sigma, Ellitope::box(a)};
  }
  const Matrix g = gaussian_matrix(n, n, rng);
  return {A, B, sigma, Ellitope::ellipsoid(g * g.transpose() + 0.2 * Matrix::Identity(n, n))};
}

TEST(GaussianQuantile, KnownValues) {
  EXPECT_NEAR(gaussian_quantile(0.5), 0.0, 1e-14);
  EXPECT_NEAR(gaussian_quantile(0.975), 1.959963984540054, 1e-10);
  EXPECT_NEAR(gaussian_quantile(0.1), -1.2815515655446004, 1e-10);
  for (double a : {1e-12, 1e-6, 0.01, 0.3, 0.7, 0.99, 1 - 1e-9}) EXPECT_NEAR(normal_cdf(gaussian_quantile(a)), a, 1e-12 * (1 + 1 / a));
  EXPECT_THROW(gaussian_quantile(0.0), DomainError);
  EXPECT_THROW(gaussian_quantile(1.0), DomainError);
}

TEST(DeltaRho, Values) {
  EXPECT_DOUBLE_EQ(delta_rho(1.0, 1), 1.0);
  EXPECT_NEAR(delta_rho(0.1, 1), 0.03512973157977151, 1e-14);
  EXPECT_NEAR(delta_rho(0.05, 5), 0.0016737377986914923, 1e-15);
  // decreasing as rho shrinks
  double prev = 1.0;
  for (double rho = 0.9; rho > 1e-3; rho *= 0.7) {
    const double d = delta_rho(rho, 3);
    EXPECT_LE(d, prev);
    prev = d;
  }
  EXPECT_THROW(delta_rho(0.0, 1), DomainError);
}

TEST(DeltaRho, InverseByBisection) {
  for (int K : {1, 4, 16})
    for (double d : {0.01, 0.05, 0.2}) {
      const double rho = rho_for_delta(d, K);
      EXPECT_LE(delta_rho(rho, K), d);
      EXPECT_GT(delta_rho(std::min(1.0, rho + 1e-9), K), d * (1 - 1e-6));
    }
}

TEST(Chi2TailBound, Endpoints) {
  const Matrix Q = Matrix::Identity(3, 3);
  EXPECT_EQ(chi2_tail_bound(Q, Matrix::Zero(3, 3)), 0.0);
  EXPECT_EQ(chi2_tail_bound(Q, Matrix::Identity(3, 3) / 3.0), 1.0);
  EXPECT_THROW(chi2_tail_bound(Q, Matrix::Identity(3, 3)), DomainError);
}

TEST(Chi2TailBound, DominatesExactTwoDimensionalTail) {
  // eta^T (s/2) I eta with eta ~ N(0, I_2): Prob{chi2_2 > 2/s} = exp(-1/s)
  for (double s : {0.05, 0.1, 0.2, 0.5, 0.9}) {
    const double bound = chi2_tail_bound(Matrix::Identity(2, 2), Matrix::Identity(2, 2) * (s / 2));
    const double closed = std::exp(-(1 - s + s * std::log(s)) / (2 * s));
    EXPECT_GE(bound, std::exp(-1.0 / s)) << s;
    EXPECT_LE(bound, closed * (1 + 1e-12)) << s;
  }
}

TEST(Chi2TailBound, MonteCarlo) {
  Rng rng = make_rng(11);
  const int n = 4;
  const Matrix g = gaussian_matrix(n, n, rng);
  const Matrix Q = g * g.transpose();
  Matrix S = Matrix::Identity(n, n);
  S *= 0.2 / (Q * S).trace();
  const Matrix R = psd_sqrt(Q);
  const int N = 200000;
  int hits = 0;
  for (int i = 0; i < N; ++i) {
    const Vector eta = R * gaussian_vector(n, rng);
    hits += eta.dot(S * eta) > 1.0;
  }
  const double p = static_cast<double>(hits) / N;
  EXPECT_LE(p - 4 * std::sqrt(p * (1 - p) / N), chi2_tail_bound(Q, S));
}

TEST(PhiGauss, ClosedForms) {
  EXPECT_NEAR(phi_gauss(scalar(1.0), scalar(1.0), scalar(1.0), 1.0), 0.5, 1e-15);
  EXPECT_EQ(phi_gauss(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2), 1.0), 0.0);
  Rng rng = make_rng(3);
  const Matrix A = gaussian_matrix(3, 4, rng);
  const Matrix B = gaussian_matrix(2, 4, rng);
  const Matrix g = gaussian_matrix(4, 4, rng);
  const Matrix Q = g * g.transpose() + 0.1 * Matrix::Identity(4, 4);
  const double sigma = 0.7;
  // posterior covariance form
  const Matrix P = (Q.inverse() + A.transpose() * A / (sigma * sigma)).inverse();
  EXPECT_NEAR(phi_gauss(Q, A, B, sigma), (B * P * B.transpose()).trace(), 1e-10);
}

TEST(PhiGauss, Concave) {
  Rng rng = make_rng(5);
  const Matrix A = gaussian_matrix(3, 3, rng);
  const Matrix B = gaussian_matrix(2, 3, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix g1 = gaussian_matrix(3, 3, rng), g2 = gaussian_matrix(3, 3, rng);
    const Matrix Q1 = g1 * g1.transpose(), Q2 = g2 * g2.transpose();
    const double mid = phi_gauss(0.5 * (Q1 + Q2), A, B, 0.5);
    EXPECT_GE(mid, 0.5 * (phi_gauss(Q1, A, B, 0.5) + phi_gauss(Q2, A, B, 0.5)) - 1e-12);
  }
}

TEST(BayesianSdp, ScalarValues) {
  EXPECT_NEAR(solve_bayesian_sdp(scalar_problem(1.0)).opt_star, 0.5, 1e-7);
  EXPECT_NEAR(solve_bayesian_sdp(scalar_problem(1e3)).opt_star, 1.0 / (1.0 + 1e-6), 1e-6);
}

TEST(BayesianSdp, MatchesDesignOptimum) {
  for (int seed = 1; seed <= 4; ++seed) {
    const EstimationProblem p = random_problem(seed, 5, 4, 3, 0.5, seed % 2 == 0);
    const double opt = build_linear_estimate(p).opt;
    const BayesianSolution b = solve_bayesian_sdp(p);
    EXPECT_LE(std::abs(opt - b.opt_star) / (1 + opt), 1e-5) << seed;
    EXPECT_NEAR(phi_gauss(b.Q, p.A, p.B, p.sigma), b.opt_star, 1e-5 * (1 + opt)) << seed;
    for (int k = 0; k < p.ell.K(); ++k) EXPECT_LE((b.Q * p.ell.S()[k]).trace(), b.t(k) + 1e-6);
    EXPECT_TRUE(p.ell.tset().contains(b.t, 1e-6));
  }
}

TEST(MStar, ClosedForms) {
  Vector a(3);
  a << 0.5, 2.0, 4.0;
  EXPECT_NEAR(m_star(Matrix::Identity(3, 3), Ellitope::ellipsoid(Matrix(a.array().square().matrix().asDiagonal()))),
              1.0 / 0.5, 1e-6);
  EXPECT_NEAR(m_star(Matrix::Identity(3, 3), Ellitope::box(a)), std::sqrt(a.array().inverse().square().sum()), 1e-6);
  EXPECT_EQ(m_star(Matrix::Zero(2, 3), Ellitope::box(a)), 0.0);
}

TEST(RhoFamily, Behaviour) {
  // tiny M_* makes the penalty negligible; the bound tends to sqrt(rho_max Opt)
  const LowerBoundReport r = lower_bound_rho_family(1.0, 1e-6, 1);
  EXPECT_GT(r.lb, 0.0);
  EXPECT_LE(r.lb, r.upper);
  EXPECT_LE(r.delta, 0.2);
  EXPECT_NEAR(r.lb * r.lb, r.rho * 1.0, 1e-9);
  // huge M_* pushes the best rho towards zero
  const LowerBoundReport h = lower_bound_rho_family(1.0, 1e6, 1);
  EXPECT_LT(h.lb, 0.5 * r.lb);
  EXPECT_LT(h.rho, 0.2 * r.rho);
  // rho = 1 has delta = 1 and is skipped
  EXPECT_EQ(lower_bound_rho_family(1.0, 1.0, 1, {1.0}).lb, 0.0);
}

TEST(RhoFamily, PenaltyChain) {
  // [1 + sqrt(2 rho) q_{1 - delta/2}]^2 delta <= 8 K exp(-1 / (3 rho)) whenever delta <= 1/5
  for (int K : {1, 2, 8, 64})
    for (double rho : default_rho_grid()) {
      const double d = delta_rho(rho, K);
      if (d > 0.2 || d == 0.0) continue;
      const double c = 1 - std::sqrt(2 * rho) * gaussian_quantile(d / 2);
      EXPECT_LE(c * c * d, 8 * K * std::exp(-1 / (3 * rho))) << K << " " << rho;
    }
}

TEST(RefinedLowerBound, ParallelotopeScalarConstant) {
  // K = 1, S = 1: Q <= 1 / q_{0.9}^2 at delta = 0.2
  const EstimationProblem p = scalar_problem(1.0);
  const LowerBoundReport r = refined_lower_bound(p, LowerBoundMethod::kParallelotope, 0.2, 0.5, 1.0);
  const double qmax = 1.0 / 1.642374415149816;
  EXPECT_NEAR(qmax, 0.6088, 1e-4);
  const double phi = qmax / (1 + qmax);
  EXPECT_NEAR(r.opt_delta, phi, 1e-6);
  EXPECT_NEAR(r.delta_refined, 0.2, 1e-6);
  EXPECT_LE(r.lb, r.upper);
}

TEST(RefinedLowerBound, SandwichAllMethods) {
  for (int seed = 1; seed <= 3; ++seed) {
    const EstimationProblem ell = random_problem(seed, 4, 4, 2, 0.2, false);
    const EstimationProblem box = random_problem(seed, 4, 4, 2, 0.2, true);
    for (const auto* p : {&ell, &box}) {
      const double opt = build_linear_estimate(*p).opt;
      const double ms = m_star(p->B, p->ell);
      std::vector<LowerBoundMethod> methods{LowerBoundMethod::kContractionSet, LowerBoundMethod::kParallelotope};
      if (p->ell.K() == 1) methods = {LowerBoundMethod::kContractionSet, LowerBoundMethod::kQuadraticApprox};
      for (auto m : methods) {
        const LowerBoundReport r = best_refined_lower_bound(*p, m, opt, ms);
        EXPECT_GE(r.lb, 0.0);
        EXPECT_LE(r.lb, std::sqrt(opt) * (1 + 1e-6)) << to_string(m);
        EXPECT_LE(r.delta_refined, r.delta);
      }
      EXPECT_LE(lower_bound_rho_family(opt, ms, p->ell.K()).lb, std::sqrt(opt));
    }
  }
}

TEST(RefinedLowerBound, RejectsBadInput) {
  const EstimationProblem p = scalar_problem(1.0);
  EXPECT_THROW(refined_lower_bound(p, LowerBoundMethod::kContractionSet, 0.3, 0.5, 1.0), DomainError);
  EXPECT_THROW(refined_lower_bound(p, LowerBoundMethod::kRhoFamily, 0.1, 0.5, 1.0), DomainError);
  const EstimationProblem e{Matrix::Identity(2, 2), Matrix::Identity(2, 2), 1.0,
                            Ellitope::ellipsoid(Matrix::Identity(2, 2))};
  EXPECT_THROW(refined_lower_bound(e, LowerBoundMethod::kParallelotope, 0.1, 0.5, 1.0), DomainError);
  EXPECT_EQ(lower_bound_method_from_string("quadratic_approx"), LowerBoundMethod::kQuadraticApprox);
  EXPECT_THROW(lower_bound_method_from_string("bogus"), DomainError);
}

TEST(NearOptimalityFactor, Example) {
  // 17 K M^2 / Opt = e gives sqrt(12)
  const NearOptimalityFactor f = near_optimality_factor(17.0, std::sqrt(std::exp(1.0)), 1);
  EXPECT_NEAR(f.factor_computable, std::sqrt(12.0), 1e-12);
  EXPECT_NEAR(f.factor_computable_sq, 12.0, 1e-12);
  EXPECT_TRUE(std::isnan(f.factor_theorem));
  EXPECT_NEAR(near_optimality_factor(1.0, 1.0, 1, 1.0).factor_theorem, std::sqrt(6 * std::log(8.0)), 1e-12);
}

TEST(SimplifiedFactor, BoxAndEllipsoid) {
  Vector a = Vector::Ones(4);
  const EstimationProblem p{Matrix::Identity(4, 4), Matrix::Identity(4, 4), 1.0, Ellitope::box(a)};
  const SimplifiedFactor f = simplified_factor(p);
  EXPECT_NEAR(f.cond_B, 1.0, 1e-12);
  EXPECT_NEAR(f.cond_T, 2.0, 1e-12);
  EXPECT_GE(f.value, std::sqrt(std::log(4.0)));
  EXPECT_TRUE(std::isfinite(f.value));
}

TEST(TwoPointHeuristic, BelowUpperBound) {
  const EstimationProblem p = random_problem(2, 4, 4, 2, 0.3, false);
  const double h = two_point_heuristic_bound(p);
  EXPECT_GT(h, 0.0);
  EXPECT_TRUE(std::isfinite(h));
}

}  // namespace
}  // namespace nearopt
