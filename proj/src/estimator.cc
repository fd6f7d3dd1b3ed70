#include "nearopt/estimator.h"

#include <cmath>

#include "nearopt/linalg.h"
#include "programs.h"

namespace nearopt {

void EstimationProblem::validate() const {
  require(A.cols() == B.cols(), "A and B must have the same number of columns");
  require(A.cols() == ell.n(), "A must have n = ellitope dimension columns");
  require(A.rows() >= 1 && B.rows() >= 1, "A and B must be nonempty");
  require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive");
  require(B.cwiseAbs().maxCoeff() > 0.0, "B must be nonzero");
  require(A.allFinite() && B.allFinite(), "A and B must be finite");
}

LinearEstimate build_linear_estimate(const EstimationProblem& prob, const SolverOptions& opts,
                                     const std::string& dump_path) {
  prob.validate();
  ConicProgram prog;
  detail::DesignInput in;
  in.A = &prob.A;
  in.B = &prob.B;
  in.sigma = prob.sigma;
  in.S = &prob.ell.S();
  in.tset = &prob.ell.tset();
  const detail::DesignLayout lay = detail::build_design(prog, in);
  if (!dump_path.empty()) prog.dump_json(dump_path);
  const ConicSolution sol = solve(prog, opts);
  if (!sol.optimal())
    throw SolverError("estimate design: solver status " + to_string(sol.status) +
                      ", relative gap " + std::to_string(sol.relative_gap));

  LinearEstimate est;
  est.H = detail::extract_H(sol.x, lay);
  est.lam = detail::extract_lambda(sol.x, lay);
  est.opt = sol.primal_objective;
  est.risk_bound = std::sqrt(std::max(0.0, est.opt));
  est.status = sol.status;
  est.iterations = sol.iterations;
  est.lmi_residual = std::max(0.0, -min_eigenvalue(prog.lmis()[lay.lmi].evaluate(sol.x)));
  const double sig2 = prob.sigma * prob.sigma;
  est.epigraph_residual =
      std::max(0.0, sig2 * est.H.squaredNorm() + prob.ell.tset().support(est.lam) - est.opt);
  return est;
}

Vector apply(const LinearEstimate& est, const Vector& omega) {
  require(omega.size() == est.H.rows(), "apply: observation length differs from m");
  return est.H.transpose() * omega;
}

MonteCarloRisk empirical_risk(const Matrix& H, const EstimationProblem& prob, const Vector& x, int N,
                              std::uint64_t seed) {
  return empirical_risk(H, prob.A, prob.B, prob.sigma, x, N, seed);
}

MonteCarloRisk empirical_risk(const Matrix& H, const Matrix& A, const Matrix& B, double sigma, const Vector& x,
                              int N, std::uint64_t seed) {
  require(x.size() == A.cols() && B.cols() == A.cols(), "empirical_risk: dimension mismatch");
  require(N >= 2, "empirical_risk: need at least two samples");
  require(H.rows() == A.rows() && H.cols() == B.rows(), "empirical_risk: H has wrong shape");
  // error = (H^T A - B) x + sigma H^T xi
  const Vector bias = H.transpose() * (A * x) - B * x;
  const Matrix Ht = sigma * H.transpose();
  Rng rng = make_rng(seed, 0x5eed);
  constexpr int kBatch = 1024;
  double sum = 0.0, sumsq = 0.0;
  for (int done = 0; done < N; done += kBatch) {
    const int b = std::min(kBatch, N - done);
    const Matrix xi = gaussian_matrix(static_cast<int>(A.rows()), b, rng);
    const Matrix err = (Ht * xi).colwise() + bias;
    const Vector e2 = err.colwise().squaredNorm();
    sum += e2.sum();
    sumsq += e2.squaredNorm();
  }
  MonteCarloRisk r;
  r.mean = sum / N;
  const double var = std::max(0.0, (sumsq - N * r.mean * r.mean) / (N - 1));
  r.se = std::sqrt(var / N);
  return r;
}

namespace {

Matrix inverse_sqrt_spd(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S));
  require(es.eigenvalues().minCoeff() > 0.0, "ellipsoid matrix must be positive definite");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

void require_ellipsoid(const EstimationProblem& prob) {
  // Every basic set with K = 1 is the segment [0, 1].
  require(prob.ell.K() == 1, "exact ellipsoid risk needs K = 1");
}

}  // namespace

double exact_risk_on_ellipsoid(const Matrix& H, const EstimationProblem& prob) {
  require_ellipsoid(prob);
  const Matrix Si = inverse_sqrt_spd(prob.ell.S()[0]);
  const Matrix D = (prob.B - H.transpose() * prob.A) * Si;
  const double sig2 = prob.sigma * prob.sigma;
  return sig2 * H.squaredNorm() + max_eigenvalue(D.transpose() * D);
}

Vector worst_case_x_ellipsoid(const Matrix& H, const EstimationProblem& prob) {
  require_ellipsoid(prob);
  const Matrix Si = inverse_sqrt_spd(prob.ell.S()[0]);
  const Matrix D = (prob.B - H.transpose() * prob.A) * Si;
  Eigen::SelfAdjointEigenSolver<Matrix> es(D.transpose() * D);
  const Vector x = Si * es.eigenvectors().col(prob.n() - 1);
  return x / prob.ell.gauge(x);
}

}  // namespace nearopt
