#include "nearopt/robust.h"

#include <cmath>

#include "nearopt/linalg.h"
#include "programs.h"

namespace nearopt {

void UncertaintyModel::validate() const {
  require(A_star.cols() == B_star.cols() && A_star.rows() >= 1 && B_star.rows() >= 1, "nominal A and B mismatch");
  require(E.cols() == A_star.rows() + B_star.rows(), "E must have m + nu columns");
  require(F.cols() == A_star.cols(), "F must have n columns");
  require(E.rows() >= 1 && F.rows() >= 1, "E and F must be nonempty");
  require(std::isfinite(r) && r >= 0.0, "radius must be nonnegative");
}

std::pair<Matrix, Matrix> UncertaintyModel::perturbed(const Matrix& Delta) const {
  require(Delta.rows() == E.rows() && Delta.cols() == F.rows(), "Delta must be p x q");
  const Matrix D = Delta * F;
  return {A_star + EA().transpose() * D, B_star + EB().transpose() * D};
}

namespace {

Matrix zero_if_empty(const Matrix& S, int n) { return S.size() ? symmetrize(S) : Matrix::Zero(n, n); }

}  // namespace

RobustEstimate build_robust_estimate(const UncertaintyModel& um, double sigma, const Matrix& S, const Ellitope& ell,
                                     const SolverOptions& opts) {
  um.validate();
  require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive");
  require(um.B_star.cwiseAbs().maxCoeff() > 0.0, "B must be nonzero");
  const int n = ell.n();
  require(um.A_star.cols() == n, "A must have n = ellitope dimension columns");
  const Matrix Sreg = zero_if_empty(S, n);
  require(Sreg.rows() == n, "S must be n x n");
  require(min_eigenvalue(Sreg) >= -1e-9 * (1.0 + std::abs(Sreg.trace())), "S must be positive semidefinite");

  detail::RobustTerms rt{um.EA(), um.EB(), um.F, um.r};
  ConicProgram prog;
  detail::DesignInput in;
  in.A = &um.A_star;
  in.B = &um.B_star;
  in.sigma = sigma;
  in.S = &ell.S();
  in.tset = &ell.tset();
  in.Sreg = &Sreg;
  in.robust = &rt;
  const detail::DesignLayout lay = detail::build_design(prog, in);
  const ConicSolution sol = solve(prog, opts);
  RobustEstimate out;
  out.status = sol.status;
  if (sol.status == SolveStatus::kInfeasible) return out;
  if (!sol.optimal()) throw SolverError("robust design: solver status " + to_string(sol.status));
  out.feasible = true;
  out.H = detail::extract_H(sol.x, lay);
  out.lam = detail::extract_lambda(sol.x, lay);
  out.mu = std::max(0.0, sol.x(lay.mu));
  out.rob_opt = sol.primal_objective;
  return out;
}

double verify_robust_feasibility(const Matrix& H, const Vector& lam, double tau, const UncertaintyModel& um,
                                 const Matrix& S, const Ellitope& ell, int N, std::uint64_t seed, double margin) {
  um.validate();
  require(N >= 1, "verify_robust_feasibility: N must be positive");
  require(lam.size() == ell.K(), "lambda must have K entries");
  const int n = ell.n(), nu = um.nu();
  Matrix top = zero_if_empty(S, n) * tau;
  for (int k = 0; k < ell.K(); ++k) top += lam(k) * ell.S()[k];

  auto feasible = [&](const Matrix& Delta) {
    const auto [A, B] = um.perturbed(Delta);
    const Matrix R = B - H.transpose() * A;
    Matrix M(n + nu, n + nu);
    M << top, R.transpose(), R, Matrix::Identity(nu, nu);
    return min_eigenvalue(M) >= -margin;
  };

  const int p = static_cast<int>(um.E.rows()), q = static_cast<int>(um.F.rows());
  Rng rng = make_rng(seed, 0xde17a);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int ok = 0;
  for (int i = 0; i < N; ++i) {
    const Matrix G = gaussian_matrix(p, q, rng);
    const double u = unif(rng);
    const double nrm = Eigen::JacobiSVD<Matrix>(G).singularValues()(0);
    const Matrix dir = nrm > 0.0 ? Matrix(G / nrm) : G;
    ok += feasible(dir * (u * um.r)) && feasible(dir * um.r);
  }
  return static_cast<double>(ok) / N;
}

}  // namespace nearopt
