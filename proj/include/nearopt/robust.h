#pragma once

#include <cstdint>

#include "nearopt/conic_solver.h"
#include "nearopt/ellitope.h"

namespace nearopt {

/// [A; B] = [A_star; B_star] + E^T Delta F with spectral norm |Delta| <= r.
struct UncertaintyModel {
  Matrix A_star;  // m x n
  Matrix B_star;  // nu x n
  Matrix E;       // p x (m + nu), split as [E_A, E_B]
  Matrix F;       // q x n
  double r = 0.0;

  int m() const { return static_cast<int>(A_star.rows()); }
  int nu() const { return static_cast<int>(B_star.rows()); }
  Matrix EA() const { return E.leftCols(m()); }
  Matrix EB() const { return E.rightCols(nu()); }
  void validate() const;
  /// Perturbed (A, B) for a given Delta (p x q).
  std::pair<Matrix, Matrix> perturbed(const Matrix& Delta) const;
};

struct RobustEstimate {
  bool feasible = false;
  Matrix H;
  Vector lam;
  double mu = 0.0;
  double rob_opt = 0.0;  // tau of the robust design; the robust S-risk is at most sqrt(rob_opt)
  SolveStatus status = SolveStatus::kOptimal;
};

/// S may be empty (treated as zero).
RobustEstimate build_robust_estimate(const UncertaintyModel& um, double sigma, const Matrix& S, const Ellitope& ell,
                                     const SolverOptions& opts = SolverOptions::from_env());

/// Fraction of N sampled Delta (|Delta| = u r, u uniform, each also checked at |Delta| = r) for which
/// [[sum lam_k S_k + tau S, B^T - A^T H], [B - H^T A, I]] has smallest eigenvalue >= -margin.
double verify_robust_feasibility(const Matrix& H, const Vector& lam, double tau, const UncertaintyModel& um,
                                 const Matrix& S, const Ellitope& ell, int N, std::uint64_t seed,
                                 double margin = 1e-7);

}  // namespace nearopt
