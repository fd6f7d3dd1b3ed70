#include "nearopt/s_risk.h"

#include <cmath>

#include "nearopt/linalg.h"
#include "programs.h"

namespace nearopt {

void SRiskProblem::validate() const {
  core.validate();
  require(S.rows() == core.n() && S.cols() == core.n(), "S must be n x n");
  require((S - S.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + S.cwiseAbs().maxCoeff()), "S must be symmetric");
  require(min_eigenvalue(S) >= -1e-9 * (1.0 + std::abs(S.trace())), "S must be positive semidefinite");
}

namespace {

void check_ws_inputs(const Matrix& A, const Matrix& B, double sigma, const Matrix& S) {
  require(A.cols() == B.cols() && S.rows() == A.cols() && S.cols() == A.cols(), "whole-space: dimension mismatch");
  require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive");
  require(B.cwiseAbs().maxCoeff() > 0.0, "B must be nonzero");
  require(min_eigenvalue(symmetrize(S)) >= -1e-9 * (1.0 + std::abs(S.trace())), "S must be positive semidefinite");
}

SRiskEstimate finish_design(const ConicProgram& prog, const ConicSolution& sol, const detail::DesignLayout& lay,
                            double sigma, const TSet* tset) {
  SRiskEstimate est;
  est.H = detail::extract_H(sol.x, lay);
  est.lam = detail::extract_lambda(sol.x, lay);
  est.tau = sol.primal_objective;
  est.srisk_bound = std::sqrt(std::max(0.0, est.tau));
  est.status = sol.status;
  est.iterations = sol.iterations;
  est.lmi_residual = std::max(0.0, -min_eigenvalue(prog.lmis()[lay.lmi].evaluate(sol.x)));
  const double phi = tset ? tset->support(est.lam) : 0.0;
  est.epigraph_residual = std::max(0.0, sigma * sigma * est.H.squaredNorm() + phi - est.tau);
  return est;
}

// min over (H, S') of Tr(S') (fixed tau) or of tau (joint), with
// [[S', B^T - A^T H], [B - H^T A, I]] >= 0 and sigma^2 |H|_F^2 <= tau.
struct SOptLayout {
  int h0 = 0;
  detail::SymVar Sp;
  int tau = -1;
  int nu = 0;
};

SOptLayout build_s_opt(ConicProgram& prog, const Matrix& A, const Matrix& B, double sigma, double cap,
                       double fixed_tau) {
  const int m = static_cast<int>(A.rows()), n = static_cast<int>(A.cols()), nu = static_cast<int>(B.rows());
  SOptLayout lay;
  lay.nu = nu;
  lay.h0 = prog.add_variables(m * nu);
  lay.Sp = {prog.add_variables(n * (n + 1) / 2), n};
  const bool joint = std::isnan(fixed_tau);
  if (joint) lay.tau = prog.add_variable();

  LmiBlock& lmi = prog.add_lmi(n + nu);
  Matrix L = Matrix::Zero(n + nu, m + nu);
  L.topLeftCorner(n, m) = A.transpose();
  L.block(n, m, nu, nu).setIdentity();
  const int basis = lmi.add_basis(L);
  for (int l = 0; l < m; ++l)
    for (int j = 0; j < nu; ++j) lmi.add_entry(lay.h0 + l * nu + j, l, m + j, -1.0, basis);
  Matrix& F0 = lmi.constant();
  F0.block(n, 0, nu, n) = B;
  F0.block(0, n, n, nu) = B.transpose();
  F0.block(n, n, nu, nu).setIdentity();
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) lmi.add_entry(lay.Sp.idx(i, j), i, j, 1.0);
  // S' >= 0 is implied by the LMI

  std::vector<LinearExpr> tail;
  for (int k = 0; k < m * nu; ++k) tail.push_back(LinearExpr::var(lay.h0 + k, sigma));
  const LinearExpr tau_expr = joint ? LinearExpr::var(lay.tau) : LinearExpr(fixed_tau);
  prog.add_rotated_soc(tau_expr, LinearExpr(1.0), tail);

  const LinearExpr tr = lay.Sp.trace_with(Matrix::Identity(n, n));
  if (joint) {
    LinearExpr budget = tr;
    budget.add(lay.tau, -cap);
    prog.add_le(budget);
    prog.set_objective(lay.tau, 1.0);
  } else {
    for (const auto& [v, c] : tr.terms) prog.set_objective(v, c);
  }
  return lay;
}

Matrix extract_h(const Vector& x, const SOptLayout& lay, int m) {
  Matrix H(m, lay.nu);
  for (int l = 0; l < m; ++l)
    for (int j = 0; j < lay.nu; ++j) H(l, j) = x(lay.h0 + l * lay.nu + j);
  return H;
}

void fill_spectrum(SOptimization& out) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(out.S), Eigen::EigenvaluesOnly);
  out.S_eigenvalues = es.eigenvalues().reverse();
  out.bayesian_risk = std::sqrt(2.0 * std::max(0.0, out.tau));
}

void check_s_opt_inputs(const Matrix& A, const Matrix& B, double sigma, double cap) {
  require(A.cols() == B.cols(), "A and B must have the same number of columns");
  require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive");
  require(cap > 0.0, "trace cap must be positive");
  require(B.cwiseAbs().maxCoeff() > 0.0, "B must be nonzero");
}

}  // namespace

SRiskEstimate build_srisk_estimate(const SRiskProblem& sp, const SolverOptions& opts, const std::string& dump_path) {
  sp.validate();
  const EstimationProblem& p = sp.core;
  ConicProgram prog;
  detail::DesignInput in;
  in.A = &p.A;
  in.B = &p.B;
  in.sigma = p.sigma;
  in.S = &p.ell.S();
  in.tset = &p.ell.tset();
  in.Sreg = &sp.S;
  const detail::DesignLayout lay = detail::build_design(prog, in);
  if (!dump_path.empty()) prog.dump_json(dump_path);
  const ConicSolution sol = solve(prog, opts);
  if (!sol.optimal()) throw SolverError("S-risk design: solver status " + to_string(sol.status));
  return finish_design(prog, sol, lay, p.sigma, &p.ell.tset());
}

SRiskLowerBound srisk_lower_bound(const SRiskProblem& sp, const SolverOptions& opts,
                                  const std::vector<double>& rho_grid) {
  sp.validate();
  const EstimationProblem& p = sp.core;
  SRiskLowerBound out;
  out.tau = build_srisk_estimate(sp, opts).tau;

  ConicProgram prog;
  detail::BayesInput in;
  in.A = &p.A;
  in.B = &p.B;
  in.sigma = p.sigma;
  in.ell = &p.ell;
  in.Sreg = &sp.S;
  const detail::BayesLayout lay = detail::build_bayes(prog, in);
  const ConicSolution sol = solve(prog, opts);
  if (!sol.optimal()) throw SolverError("S-risk dual program: solver status " + to_string(sol.status));
  out.opt_star = -sol.primal_objective;
  out.s = sol.x(lay.s);
  out.W = lay.Q.extract(sol.x);
  if (!(out.s > 1e-8)) throw SolverError("S-risk dual program: optimal s is not positive");
  const double agree = 1e-4 * (1.0 + out.tau);
  if (std::abs(out.opt_star - out.tau) > agree)
    throw SolverError("S-risk design and dual values disagree: " + std::to_string(out.tau) + " vs " +
                      std::to_string(out.opt_star));

  out.mstar = m_star(p.B, p.ell, opts);
  const int K = p.ell.K();
  const double trWS = std::max(0.0, (out.W * sp.S).trace());
  LowerBoundReport& rep = out.report;
  rep.method = LowerBoundMethod::kRhoFamily;
  rep.upper = std::sqrt(std::max(0.0, out.tau));
  double best = -std::numeric_limits<double>::infinity();
  for (double rho : rho_grid) {
    const double d = delta_rho(rho, K);
    if (d > 0.2) continue;
    const double r = rho / out.s;
    double num = r * out.opt_star;
    if (d > 0.0) {
      const double c = 1.0 - std::sqrt(2.0 * rho) * gaussian_quantile(d / 2.0);
      num -= c * c * out.mstar * out.mstar * d;
    }
    const double val = num / (1.0 + r * trWS);
    if (val > best) {
      best = val;
      rep.rho = rho;
      rep.delta = d;
    }
  }
  rep.lb = std::sqrt(std::max(0.0, best));
  rep.opt_delta = out.opt_star;
  rep.factor_numeric = rep.lb > 0.0 ? rep.upper / rep.lb : std::numeric_limits<double>::infinity();
  if (out.tau > 0.0 && out.mstar > 0.0)
    rep.factor_computable = near_optimality_factor(out.tau, out.mstar, K).factor_computable;
  if (rep.lb > 0.0 && out.mstar > 0.0)
    out.factor_theorem = near_optimality_factor(1.0, out.mstar, K, rep.lb).factor_theorem;
  return out;
}

WholeSpaceEstimate whole_space_estimate(const Matrix& A, const Matrix& B, double sigma, const Matrix& S,
                                        const SolverOptions& opts) {
  check_ws_inputs(A, B, sigma, S);
  const Matrix Ss = symmetrize(S);
  WholeSpaceEstimate out;
  ConicProgram prog;
  detail::DesignInput in;
  in.A = &A;
  in.B = &B;
  in.sigma = sigma;
  in.Sreg = &Ss;
  const detail::DesignLayout lay = detail::build_design(prog, in);
  const ConicSolution sol = solve(prog, opts);
  out.status = sol.status;
  if (sol.status == SolveStatus::kInfeasible) {
    out.est.tau = std::numeric_limits<double>::infinity();
    out.est.srisk_bound = out.est.tau;
    out.est.status = sol.status;
    return out;
  }
  if (!sol.optimal()) throw SolverError("whole-space design: solver status " + to_string(sol.status));
  out.feasible = true;
  out.est = finish_design(prog, sol, lay, sigma, nullptr);

  ConicProgram dual;
  detail::BayesInput bin;
  bin.A = &A;
  bin.B = &B;
  bin.sigma = sigma;
  bin.Sreg = &Ss;
  detail::build_bayes(dual, bin);
  const ConicSolution dsol = solve(dual, opts);
  if (dsol.optimal()) {
    out.dual_value = -dsol.primal_objective;
    out.certificate_gap = std::abs(out.est.tau - out.dual_value) / (1.0 + std::abs(out.est.tau));
  }
  return out;
}

SOptimization optimize_S_bisection(const Matrix& A, const Matrix& B, double sigma, double trace_cap, double tol_tau,
                                   const SolverOptions& opts, double tau_hint) {
  check_s_opt_inputs(A, B, sigma, trace_cap);
  require(tol_tau > 0.0, "tol_tau must be positive");
  const int m = static_cast<int>(A.rows());

  // H = 0 and tau S = B^T B is feasible once Tr(B^T B) <= trace_cap * tau.
  double hi = B.squaredNorm() / trace_cap;
  double lo = 0.0;
  SOptimization out;
  auto attempt = [&](double tau, SOptimization* keep) {
    ConicProgram prog;
    const SOptLayout lay = build_s_opt(prog, A, B, sigma, trace_cap, tau);
    const ConicSolution sol = solve(prog, opts);
    if (!sol.optimal()) throw SolverError("S-optimization step: solver status " + to_string(sol.status));
    const double budget = trace_cap * tau;
    const bool ok = sol.primal_objective <= budget * (1.0 + 1e-9);
    if (ok && keep) {
      keep->H = extract_h(sol.x, lay, m);
      keep->S = lay.Sp.extract(sol.x) / tau;
      // trace slightly above the cap within tolerance is projected back
      const double tr = keep->S.trace();
      if (tr > trace_cap) keep->S *= trace_cap / tr;
    }
    if (!ok) out.lo_certificate = sol.dual_objective;
    return ok;
  };
  require(attempt(hi, &out), "S-optimization: no feasible upper bracket found");
  int it = 0;
  if (std::isfinite(tau_hint) && tau_hint > 0.0 && tau_hint < hi) {
    // each end of the narrow bracket is still decided by its own solve
    const double up = std::min(hi, tau_hint + 0.45 * tol_tau);
    const double down = std::max(0.0, tau_hint - 0.45 * tol_tau);
    SOptimization cand;
    if (attempt(up, &cand)) {
      hi = up;
      out.H = std::move(cand.H);
      out.S = std::move(cand.S);
      if (down > 0.0 && !attempt(down, nullptr)) lo = down;
    } else {
      lo = up;
    }
    it = 2;
  }
  for (; it < 62 && hi - lo > tol_tau; ++it) {
    const double mid = 0.5 * (lo + hi);
    SOptimization cand;
    if (attempt(mid, &cand)) {
      hi = mid;
      out.H = std::move(cand.H);
      out.S = std::move(cand.S);
    } else {
      lo = mid;
    }
  }
  out.tau = hi;
  out.tau_lo = lo;
  out.iterations = it;
  fill_spectrum(out);
  return out;
}

SOptimization optimize_S_joint(const Matrix& A, const Matrix& B, double sigma, double trace_cap,
                               const SolverOptions& opts) {
  check_s_opt_inputs(A, B, sigma, trace_cap);
  ConicProgram prog;
  const SOptLayout lay = build_s_opt(prog, A, B, sigma, trace_cap, std::numeric_limits<double>::quiet_NaN());
  const ConicSolution sol = solve(prog, opts);
  if (!sol.optimal()) throw SolverError("joint S-optimization: solver status " + to_string(sol.status));
  SOptimization out;
  out.tau = sol.primal_objective;
  out.tau_lo = sol.dual_objective;
  out.H = extract_h(sol.x, lay, static_cast<int>(A.rows()));
  out.S = out.tau > 0.0 ? Matrix(lay.Sp.extract(sol.x) / out.tau) : Matrix::Zero(A.cols(), A.cols());
  out.iterations = sol.iterations;
  fill_spectrum(out);
  return out;
}

bool srisk_inequality_holds(const Matrix& H, const Matrix& A, const Matrix& B, double sigma, const Matrix& S,
                            double tau, const Vector& x, int N, std::uint64_t seed) {
  const MonteCarloRisk r = empirical_risk(H, A, B, sigma, x, N, seed);
  return r.mean <= tau * (1.0 + x.dot(S * x)) + 4.0 * r.se;
}

}  // namespace nearopt
