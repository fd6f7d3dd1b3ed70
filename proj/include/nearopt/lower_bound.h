#pragma once

#include <limits>
#include <string>
#include <vector>

#include "nearopt/estimator.h"

namespace nearopt {

double normal_cdf(double x);
/// Standard normal quantile, rational approximation polished by Newton steps.
double gaussian_quantile(double alpha);

/// min[K exp{-(1 - rho + rho ln rho) / (2 rho)}, 1]
double delta_rho(double rho, int K);
/// Largest rho with delta_rho(rho, K) <= delta, by bisection.
double rho_for_delta(double delta, int K);
/// Upper bound on Prob{eta^T S eta > 1}, eta ~ N(0, Q), requires Tr(SQ) <= 1.
double chi2_tail_bound(const Matrix& Q, const Matrix& S);

/// Expected squared error of the best recovery of B eta from sigma xi + A eta, eta ~ N(0, Q).
double phi_gauss(const Matrix& Q, const Matrix& A, const Matrix& B, double sigma);

struct BayesianSolution {
  Matrix Q;
  Vector t;
  Matrix G;
  double opt_star = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
};

BayesianSolution solve_bayesian_sdp(const EstimationProblem& prob,
                                    const SolverOptions& opts = SolverOptions::from_env());

/// sqrt(max Tr(B Q B^T)) over Q >= 0 with (Tr(Q S_k))_k dominated by some t in T.
double m_star(const Matrix& B, const Ellitope& ell, const SolverOptions& opts = SolverOptions::from_env());

enum class LowerBoundMethod { kRhoFamily, kContractionSet, kQuadraticApprox, kParallelotope };
std::string to_string(LowerBoundMethod method);
LowerBoundMethod lower_bound_method_from_string(const std::string& name);

struct LowerBoundReport {
  LowerBoundMethod method = LowerBoundMethod::kRhoFamily;
  double lb = 0.0;          // lower bound on the minimax risk
  double upper = 0.0;       // sqrt(Opt)
  double rho = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double delta_refined = std::numeric_limits<double>::quiet_NaN();
  double opt_delta = std::numeric_limits<double>::quiet_NaN();  // phi at the restricted optimum
  double factor_numeric = std::numeric_limits<double>::infinity();  // upper / lb
  double factor_computable = 0.0;
};

/// 40 log-spaced points in [1e-3, 1].
std::vector<double> default_rho_grid();
/// {0.05, 0.1, 0.15, 0.2}
std::vector<double> default_delta_grid();

/// lb^2 = max over rho with delta_rho <= 1/5 of rho Opt - [1 + sqrt(2 rho) q_{1-delta_rho/2}]^2 M_*^2 delta_rho.
LowerBoundReport lower_bound_rho_family(double opt, double mstar, int K,
                                        const std::vector<double>& rho_grid = default_rho_grid());

/// Restricted Bayesian problem over a convex set of covariances Q with Prob{eta not in X} <= delta.
LowerBoundReport refined_lower_bound(const EstimationProblem& prob, LowerBoundMethod method, double delta,
                                     double opt, double mstar,
                                     const SolverOptions& opts = SolverOptions::from_env());
/// Best refined bound over a delta grid.
LowerBoundReport best_refined_lower_bound(const EstimationProblem& prob, LowerBoundMethod method, double opt,
                                          double mstar, const std::vector<double>& delta_grid = default_delta_grid(),
                                          const SolverOptions& opts = SolverOptions::from_env());

struct NearOptimalityFactor {
  /// sqrt(12 ln(17 K M_*^2 / Opt)): Risk_opt >= sqrt(Opt) / factor_computable.
  double factor_computable = 0.0;
  /// 12 ln(17 K M_*^2 / Opt), the squared factor.
  double factor_computable_sq = 0.0;
  /// sqrt(6 ln(8 K M_*^2 / risk_opt^2)), NaN unless a risk estimate is supplied.
  double factor_theorem = std::numeric_limits<double>::quiet_NaN();
};

NearOptimalityFactor near_optimality_factor(double opt, double mstar, int K,
                                            double risk_opt = std::numeric_limits<double>::quiet_NaN());

struct SimplifiedFactor {
  double argument = 0.0;  // K Cond^2(B) [Cond^2(T) + |A|^2 T / (sigma^2 kappa)]
  double value = 0.0;     // sqrt(ln(argument))
  double cond_B = 0.0;
  double cond_T = 0.0;
};

SimplifiedFactor simplified_factor(const EstimationProblem& prob);

/// Two-point bound min over candidate directions with c = q_{0.75}. The absolute constant is
/// not known, so this is a diagnostic and not a certified bound.
double two_point_heuristic_bound(const EstimationProblem& prob);

}  // namespace nearopt
