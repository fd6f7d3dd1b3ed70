#pragma once

#include <limits>
#include <string>
#include <vector>

#include "nearopt/estimator.h"
#include "nearopt/lower_bound.h"

namespace nearopt {

/// Risk measured relative to the scale 1 + x^T S x.
struct SRiskProblem {
  EstimationProblem core;
  Matrix S;
  void validate() const;
};

struct SRiskEstimate {
  Matrix H;
  Vector lam;
  double tau = 0.0;          // optimal value of the design problem
  double srisk_bound = 0.0;  // sqrt(tau)
  double lmi_residual = 0.0;
  double epigraph_residual = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
  int iterations = 0;
};

SRiskEstimate build_srisk_estimate(const SRiskProblem& sp, const SolverOptions& opts = SolverOptions::from_env(),
                                   const std::string& dump_path = "");

struct SRiskLowerBound {
  LowerBoundReport report;  // lb bounds the minimax S-risk; upper = sqrt(tau)
  double opt_star = 0.0;    // value of the dual (W, G, s) program
  double tau = 0.0;         // value of the design problem
  double s = 0.0;
  Matrix W;
  double mstar = 0.0;
  /// sqrt(6 ln(8 K M_*^2 / lb^2)); an upper bound on the near-optimality factor, inf when lb = 0.
  double factor_theorem = std::numeric_limits<double>::infinity();
};

/// Throws SolverError when the dual optimum has s <= 1e-8 or the two optimal values disagree.
SRiskLowerBound srisk_lower_bound(const SRiskProblem& sp, const SolverOptions& opts = SolverOptions::from_env(),
                                  const std::vector<double>& rho_grid = default_rho_grid());

struct WholeSpaceEstimate {
  bool feasible = false;
  SRiskEstimate est;
  double dual_value = std::numeric_limits<double>::quiet_NaN();
  double certificate_gap = std::numeric_limits<double>::quiet_NaN();  // |tau - dual| / (1 + tau)
  SolveStatus status = SolveStatus::kOptimal;
};

/// Minimax-optimal linear estimate over the whole space; an infeasible design is reported, not thrown.
WholeSpaceEstimate whole_space_estimate(const Matrix& A, const Matrix& B, double sigma, const Matrix& S,
                                        const SolverOptions& opts = SolverOptions::from_env());

struct SOptimization {
  Matrix S;  // Tr(S) <= trace_cap
  Matrix H;
  double tau = 0.0;       // feasible upper end of the final bracket
  double tau_lo = 0.0;    // certified infeasible (or 0)
  double lo_certificate = 0.0;  // dual lower bound on min Tr(tau S) at tau_lo, exceeds trace_cap * tau_lo
  int iterations = 0;
  Vector S_eigenvalues;   // descending
  double bayesian_risk = 0.0;  // sqrt(2 tau)
};

/// Bisection on tau; each step minimises Tr(tau S) at fixed tau, feasible iff it is <= trace_cap * tau.
/// A finite tau_hint (e.g. from optimize_S_joint) is tried first as a bracket of width 0.9 tol_tau.
SOptimization optimize_S_bisection(const Matrix& A, const Matrix& B, double sigma, double trace_cap,
                                   double tol_tau = 1e-7, const SolverOptions& opts = SolverOptions::from_env(),
                                   double tau_hint = std::numeric_limits<double>::quiet_NaN());
/// The same problem solved in one program (tau S as a variable), used to cross-check the bisection.
SOptimization optimize_S_joint(const Matrix& A, const Matrix& B, double sigma, double trace_cap,
                               const SolverOptions& opts = SolverOptions::from_env());

/// E |H^T(Ax + sigma xi) - Bx|^2 <= tau (1 + x^T S x) with a Monte-Carlo margin of 4 standard errors.
bool srisk_inequality_holds(const Matrix& H, const Matrix& A, const Matrix& B, double sigma, const Matrix& S,
                            double tau, const Vector& x, int N, std::uint64_t seed);

}  // namespace nearopt
