#include "nearopt/lower_bound.h"

#include <cmath>

#include "nearopt/linalg.h"
#include "programs.h"

namespace nearopt {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gaussian_quantile(double alpha) {
  require(alpha > 0.0 && alpha < 1.0, "gaussian_quantile: alpha must lie in (0, 1)");
  // Acklam's rational approximation
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double lo = 0.02425;
  double x;
  if (alpha < lo) {
    const double q = std::sqrt(-2.0 * std::log(alpha));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (alpha <= 1.0 - lo) {
    const double q = alpha - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-alpha));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Newton on the tail that is computed accurately
  for (int it = 0; it < 3; ++it) {
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    if (pdf <= 0.0) break;
    const double err = (alpha < 0.5) ? normal_cdf(x) - alpha : (1.0 - alpha) - normal_cdf(-x);
    x -= err / pdf;
  }
  return x;
}

namespace {

// q_{1 - tail}, accurate for tiny tails.
double upper_quantile(double tail) { return -gaussian_quantile(tail); }

Matrix clamp_psd(const Matrix& Q) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(Q));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double delta_rho(double rho, int K) {
  require(rho > 0.0 && rho <= 1.0, "delta_rho: rho must lie in (0, 1]");
  require(K >= 1, "delta_rho: K must be positive");
  const double expo = (1.0 - rho + rho * std::log(rho)) / (2.0 * rho);
  return std::min(K * std::exp(-expo), 1.0);
}

double rho_for_delta(double delta, int K) {
  require(delta > 0.0 && delta <= 1.0, "rho_for_delta: delta must lie in (0, 1]");
  double lo = 1e-9, hi = 1.0;
  if (delta_rho(lo, K) > delta) return lo;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (delta_rho(mid, K) <= delta ? lo : hi) = mid;
  }
  return lo;
}

double chi2_tail_bound(const Matrix& Q, const Matrix& S) {
  require(Q.rows() == S.rows() && Q.cols() == S.cols() && Q.rows() == Q.cols(), "chi2_tail_bound: shape mismatch");
  const Matrix R = psd_sqrt(Q);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(R * S * R), Eigen::EigenvaluesOnly);
  const Vector s = es.eigenvalues().cwiseMax(0.0);
  const double rho = s.sum();
  require(rho <= 1.0 + 1e-8, "chi2_tail_bound: Tr(SQ) exceeds 1");
  if (rho <= 0.0) return 0.0;
  if (rho >= 1.0) return 1.0;
  const double closed = std::exp(-(1.0 - rho + rho * std::log(rho)) / (2.0 * rho));
  // f(g) = -1/2 sum ln(1 - 2 g s_i) - g is convex; its derivative sum s_i / (1 - 2 g s_i) - 1
  // starts at rho - 1 < 0 and blows up at 1 / (2 s_max).
  const double gmax = 0.5 / s.maxCoeff();
  auto deriv = [&](double g) { return (s.array() / (1.0 - 2.0 * g * s.array())).sum() - 1.0; };
  double lo = 0.0, hi = gmax;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * gmax; ++it) {
    const double mid = 0.5 * (lo + hi);
    (deriv(mid) < 0.0 ? lo : hi) = mid;
  }
  const double g = lo;
  const double f = -0.5 * (1.0 - 2.0 * g * s.array()).log().sum() - g;
  return std::min({std::exp(f), closed, 1.0});
}

double phi_gauss(const Matrix& Q, const Matrix& A, const Matrix& B, double sigma) {
  require(Q.rows() == A.cols() && Q.cols() == A.cols() && B.cols() == A.cols(), "phi_gauss: shape mismatch");
  require(sigma > 0.0, "phi_gauss: sigma must be positive");
  const Matrix Qs = symmetrize(Q);
  require(min_eigenvalue(Qs) >= -1e-9 * (1.0 + std::abs(Qs.trace())), "phi_gauss: Q is not positive semidefinite");
  const Matrix M = sigma * sigma * Matrix::Identity(A.rows(), A.rows()) + A * Qs * A.transpose();
  const Matrix AQB = A * Qs * B.transpose();
  const Matrix X = M.ldlt().solve(AQB);
  return (B * Qs * B.transpose()).trace() - (AQB.transpose() * X).trace();
}

BayesianSolution solve_bayesian_sdp(const EstimationProblem& prob, const SolverOptions& opts) {
  prob.validate();
  ConicProgram prog;
  detail::BayesInput in;
  in.A = &prob.A;
  in.B = &prob.B;
  in.sigma = prob.sigma;
  in.ell = &prob.ell;
  const detail::BayesLayout lay = detail::build_bayes(prog, in);
  const ConicSolution sol = solve(prog, opts);
  if (!sol.optimal()) throw SolverError("Bayesian program: solver status " + to_string(sol.status));
  BayesianSolution out;
  out.Q = lay.Q.extract(sol.x);
  out.t = sol.x.segment(lay.t0, prob.ell.K());
  out.G = lay.G.extract(sol.x) + prob.B * out.Q * prob.B.transpose();
  out.opt_star = -sol.primal_objective;
  out.status = sol.status;
  return out;
}

double m_star(const Matrix& B, const Ellitope& ell, const SolverOptions& opts) {
  require(B.cols() == ell.n(), "m_star: B must have n columns");
  if (B.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  ConicProgram prog;
  const Matrix C = B.transpose() * B;
  detail::BayesInput in;
  in.ell = &ell;
  in.C = &C;
  detail::build_bayes(prog, in);
  const ConicSolution sol = solve(prog, opts);
  if (!sol.optimal()) throw SolverError("M_* program: solver status " + to_string(sol.status));
  return std::sqrt(std::max(0.0, -sol.primal_objective));
}

std::string to_string(LowerBoundMethod method) {
  switch (method) {
    case LowerBoundMethod::kRhoFamily: return "rho_family";
    case LowerBoundMethod::kContractionSet: return "contraction";
    case LowerBoundMethod::kQuadraticApprox: return "quadratic_approx";
    case LowerBoundMethod::kParallelotope: return "parallelotope";
  }
  return "unknown";
}

LowerBoundMethod lower_bound_method_from_string(const std::string& name) {
  for (auto m : {LowerBoundMethod::kRhoFamily, LowerBoundMethod::kContractionSet, LowerBoundMethod::kQuadraticApprox,
                 LowerBoundMethod::kParallelotope})
    if (to_string(m) == name) return m;
  throw DomainError("unknown lower-bound method '" + name + "'");
}

std::vector<double> default_rho_grid() {
  std::vector<double> g;
  for (int i = 0; i < 40; ++i) g.push_back(std::pow(10.0, -3.0 + 3.0 * i / 39.0));
  return g;
}

std::vector<double> default_delta_grid() { return {0.05, 0.1, 0.15, 0.2}; }

LowerBoundReport lower_bound_rho_family(double opt, double mstar, int K, const std::vector<double>& rho_grid) {
  require(opt >= 0.0 && mstar >= 0.0, "lower_bound_rho_family: negative input");
  LowerBoundReport rep;
  rep.method = LowerBoundMethod::kRhoFamily;
  rep.upper = std::sqrt(opt);
  double best = -std::numeric_limits<double>::infinity();
  for (double rho : rho_grid) {
    const double d = delta_rho(rho, K);
    if (d > 0.2) continue;  // the lemma needs delta <= 1/5
    double val = rho * opt;
    if (d > 0.0) {
      const double c = 1.0 + std::sqrt(2.0 * rho) * upper_quantile(d / 2.0);
      val -= c * c * mstar * mstar * d;
    }
    if (val > best) {
      best = val;
      rep.rho = rho;
      rep.delta = d;
    }
  }
  rep.lb = std::sqrt(std::max(0.0, best));
  rep.factor_numeric = rep.lb > 0.0 ? rep.upper / rep.lb : std::numeric_limits<double>::infinity();
  if (opt > 0.0 && mstar > 0.0) rep.factor_computable = near_optimality_factor(opt, mstar, K).factor_computable;
  return rep;
}

LowerBoundReport refined_lower_bound(const EstimationProblem& prob, LowerBoundMethod method, double delta,
                                     double opt, double mstar, const SolverOptions& opts) {
  prob.validate();
  require(delta > 0.0 && delta <= 0.2, "refined_lower_bound: delta must lie in (0, 1/5]");
  const Ellitope& ell = prob.ell;
  const int K = ell.K();
  detail::BayesInput in;
  in.A = &prob.A;
  in.B = &prob.B;
  in.sigma = prob.sigma;
  in.ell = &ell;
  double rho = std::numeric_limits<double>::quiet_NaN();
  switch (method) {
    case LowerBoundMethod::kContractionSet:
      rho = rho_for_delta(delta, K);
      in.scale = Vector::Constant(K, 1.0 / rho);
      break;
    case LowerBoundMethod::kQuadraticApprox:
      require(K == 1, "quadratic-approximation bound needs an ellipsoid (K = 1)");
      in.quad_delta = delta;
      break;
    case LowerBoundMethod::kParallelotope: {
      for (const auto& Sk : ell.S())
        require(numerical_rank(Sk, 1e-10) <= 1, "parallelotope bound needs rank-one S_k");
      const double q = upper_quantile(delta / (2.0 * K));
      in.scale = Vector::Constant(K, q * q);
      break;
    }
    case LowerBoundMethod::kRhoFamily:
      throw DomainError("refined_lower_bound: use lower_bound_rho_family for the rho family");
  }
  ConicProgram prog;
  const detail::BayesLayout lay = detail::build_bayes(prog, in);
  const ConicSolution sol = solve(prog, opts);
  // A stalled iterate still yields a valid bound once the tail is evaluated at it directly.
  const bool converged = sol.optimal();
  const bool usable = sol.status == SolveStatus::kMaxIter || sol.status == SolveStatus::kInaccurate;
  if (!converged && !usable) throw SolverError("restricted Bayesian program: solver status " + to_string(sol.status));
  const Matrix Q = clamp_psd(lay.Q.extract(sol.x));

  // Effective t: box factors may always use t_k = 1.
  Vector t = Vector::Ones(K);
  if (!converged) {
    for (const auto& f : ell.tset().factors())
      if (f.kind == TSetKind::kPNormBall && f.K > 1)
        throw SolverError("restricted Bayesian program: solver status " + to_string(sol.status));
  } else if (lay.t0 >= 0) {
    int off = 0;
    for (const auto& f : ell.tset().factors()) {
      if (f.kind == TSetKind::kPNormBall)
        for (int k = off; k < off + f.K; ++k) t(k) = std::max(0.0, sol.x(lay.t0 + k));
      off += f.K;
    }
  }
  // Probability that eta leaves the set, evaluated at the computed Q.
  double tail = 0.0;
  for (int k = 0; k < K; ++k) {
    const double load = (Q * ell.S()[k]).trace();
    if (load <= 1e-300) continue;
    if (load > t(k)) {
      tail = 1.0;
      break;
    }
    if (method == LowerBoundMethod::kParallelotope)
      tail += 2.0 * normal_cdf(-std::sqrt(t(k) / load));
    else
      tail += chi2_tail_bound(Q, ell.S()[k] / t(k));
  }
  const double dref = converged ? std::min(delta, tail) : std::min(1.0, tail);

  LowerBoundReport rep;
  rep.method = method;
  rep.upper = std::sqrt(opt);
  rep.rho = rho;
  rep.delta = delta;
  rep.delta_refined = dref;
  rep.opt_delta = phi_gauss(Q, prob.A, prob.B, prob.sigma);
  double lb2 = rep.opt_delta;
  if (dref > 0.2) {
    lb2 = 0.0;  // the tail inequality needs delta <= 1/5
  } else if (dref > 0.0) {
    const double bq = std::sqrt(std::max(0.0, (prob.B * Q * prob.B.transpose()).trace()));
    const double c = mstar + std::sqrt(2.0) * upper_quantile(dref / 2.0) * bq;
    lb2 -= c * c * dref;
  }
  rep.lb = std::sqrt(std::max(0.0, lb2));
  rep.factor_numeric = rep.lb > 0.0 ? rep.upper / rep.lb : std::numeric_limits<double>::infinity();
  if (opt > 0.0 && mstar > 0.0) rep.factor_computable = near_optimality_factor(opt, mstar, K).factor_computable;
  return rep;
}

LowerBoundReport best_refined_lower_bound(const EstimationProblem& prob, LowerBoundMethod method, double opt,
                                          double mstar, const std::vector<double>& delta_grid,
                                          const SolverOptions& opts) {
  require(!delta_grid.empty(), "best_refined_lower_bound: empty delta grid");
  LowerBoundReport best;
  bool first = true;
  for (double d : delta_grid) {
    LowerBoundReport r = refined_lower_bound(prob, method, d, opt, mstar, opts);
    if (first || r.lb > best.lb) best = r;
    first = false;
  }
  return best;
}

NearOptimalityFactor near_optimality_factor(double opt, double mstar, int K, double risk_opt) {
  require(opt > 0.0 && mstar > 0.0 && K >= 1, "near_optimality_factor: arguments must be positive");
  NearOptimalityFactor f;
  f.factor_computable_sq = 12.0 * std::log(17.0 * K * mstar * mstar / opt);
  f.factor_computable = std::sqrt(std::max(0.0, f.factor_computable_sq));
  if (!std::isnan(risk_opt)) {
    require(risk_opt > 0.0, "near_optimality_factor: risk estimate must be positive");
    f.factor_theorem = std::sqrt(std::max(0.0, 6.0 * std::log(8.0 * K * mstar * mstar / (risk_opt * risk_opt))));
  }
  return f;
}

SimplifiedFactor simplified_factor(const EstimationProblem& prob) {
  prob.validate();
  Eigen::JacobiSVD<Matrix> svdB(prob.B);
  const Vector& sb = svdB.singularValues();
  require(prob.B.rows() >= prob.B.cols() && sb(sb.size() - 1) > 1e-14 * sb(0),
          "simplified_factor: B must have trivial kernel");
  SimplifiedFactor f;
  f.cond_B = sb(0) / sb(sb.size() - 1);
  const TSet& T = prob.ell.tset();
  f.cond_T = T.cond();
  const double normA = Eigen::JacobiSVD<Matrix>(prob.A).singularValues()(0);
  const double sig2 = prob.sigma * prob.sigma;
  f.argument = prob.ell.K() * f.cond_B * f.cond_B *
               (f.cond_T * f.cond_T + normA * normA * T.max_sum() / (sig2 * prob.ell.kappa()));
  f.value = std::sqrt(std::log(f.argument));
  return f;
}

double two_point_heuristic_bound(const EstimationProblem& prob) {
  prob.validate();
  const double c = gaussian_quantile(0.75);
  Eigen::JacobiSVD<Matrix> svd(prob.A, Eigen::ComputeFullV);
  const int n = prob.n();
  Matrix dirs(n, 2 * n);
  dirs << Matrix::Identity(n, n), svd.matrixV();
  double best = 0.0;
  for (int j = 0; j < dirs.cols(); ++j) {
    const Vector x = dirs.col(j) / prob.ell.gauge(dirs.col(j));
    const double ax = (prob.A * x).norm();
    const double scale = ax > 0.0 ? std::min(1.0, c * prob.sigma / ax) : 1.0;
    best = std::max(best, scale * (prob.B * x).norm());
  }
  return best;
}

}  // namespace nearopt
