#pragma once

#include <cstdint>

#include "nearopt/conic_solver.h"
#include "nearopt/ellitope.h"

namespace nearopt {

/// Observation omega = A x + sigma xi, target B x, x in ell.
struct EstimationProblem {
  Matrix A;
  Matrix B;
  double sigma;
  Ellitope ell;

  int n() const { return static_cast<int>(A.cols()); }
  int m() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.rows()); }
  /// Throws DomainError on inconsistent dimensions, sigma <= 0 or B = 0.
  void validate() const;
};

struct LinearEstimate {
  Matrix H;  // m x nu, estimate H^T omega
  Vector lam;
  double opt = 0.0;
  double risk_bound = 0.0;  // sqrt(opt)
  // Feasibility residuals recomputed from (H, lam).
  double lmi_residual = 0.0;       // max(0, -lambda_min of the design LMI)
  double epigraph_residual = 0.0;  // max(0, sigma^2 |H|_F^2 + phi(lam) - opt)
  SolveStatus status = SolveStatus::kOptimal;
  int iterations = 0;
};

LinearEstimate build_linear_estimate(const EstimationProblem& prob,
                                     const SolverOptions& opts = SolverOptions::from_env(),
                                     const std::string& dump_path = "");
Vector apply(const LinearEstimate& est, const Vector& omega);

struct MonteCarloRisk {
  double mean = 0.0;  // estimate of E |H^T(Ax + sigma xi) - Bx|^2
  double se = 0.0;
};

/// Deterministic in seed; noise is drawn in batches.
MonteCarloRisk empirical_risk(const Matrix& H, const EstimationProblem& prob, const Vector& x, int N,
                              std::uint64_t seed);
MonteCarloRisk empirical_risk(const Matrix& H, const Matrix& A, const Matrix& B, double sigma, const Vector& x,
                              int N, std::uint64_t seed);
/// Squared risk of H^T omega on an ellipsoid {x^T S_1 x <= 1}; exact, not a bound.
double exact_risk_on_ellipsoid(const Matrix& H, const EstimationProblem& prob);
/// Boundary point of the ellipsoid where the bias term of H is largest.
Vector worst_case_x_ellipsoid(const Matrix& H, const EstimationProblem& prob);

}  // namespace nearopt
