#include "nearopt/sdp_relaxation.h"

#include <cmath>

#include "nearopt/linalg.h"
#include "programs.h"

namespace nearopt {

RelaxationResult relax_quadratic_max(const Matrix& C, const Ellitope& ell, const SolverOptions& opts) {
  require(C.rows() == ell.n() && C.cols() == ell.n(), "C must be n x n");
  require(C.allFinite(), "C must be finite");
  RelaxationResult res;
  const Matrix Cs = symmetrize(C);
  res.symmetrized = (C - Cs).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + C.cwiseAbs().maxCoeff());
  const int K = ell.K();

  ConicProgram primal;
  detail::BayesInput in;
  in.ell = &ell;
  in.C = &Cs;
  const detail::BayesLayout lay = detail::build_bayes(primal, in);
  const ConicSolution ps = solve(primal, opts);
  if (!ps.optimal()) throw SolverError("relaxation primal: solver status " + to_string(ps.status));
  res.opt = -ps.primal_objective;
  res.Q_star = lay.Q.extract(ps.x);
  res.t_star = ps.x.segment(lay.t0, K);

  ConicProgram dual;
  const int lam0 = dual.add_variables(K);
  const int w = dual.add_variable();
  LmiBlock& lmi = dual.add_lmi(ell.n());
  lmi.add_constant(Cs, -1.0);
  std::vector<LinearExpr> lam;
  for (int k = 0; k < K; ++k) {
    lmi.add_dense(lam0 + k, ell.S()[k]);
    dual.add_nonneg(lam0 + k);
    lam.push_back(LinearExpr::var(lam0 + k));
  }
  add_support_epigraph(dual, ell.tset(), lam, LinearExpr::var(w));
  dual.set_objective(w, 1.0);
  const ConicSolution ds = solve(dual, opts);
  if (!ds.optimal()) throw SolverError("relaxation dual: solver status " + to_string(ds.status));
  res.dual_opt = ds.primal_objective;
  res.lam_star = ds.x.segment(lam0, K).cwiseMax(0.0);
  if (std::abs(res.opt - res.dual_opt) > 1e-6 * (1.0 + std::abs(res.opt)))
    throw SolverError("relaxation primal and dual values differ: " + std::to_string(res.opt) + " vs " +
                      std::to_string(res.dual_opt));
  return res;
}

double rounding_factor(int K) {
  require(K >= 1, "rounding_factor: K must be positive");
  return 4.0 * std::log(5.0 * K);
}

RoundingResult round_rademacher(const Matrix& C, const Ellitope& ell, const Matrix& Q_star, const Vector& t_star,
                                std::uint64_t seed, int budget) {
  const int n = ell.n(), K = ell.K();
  require(C.rows() == n && Q_star.rows() == n && t_star.size() == K, "round_rademacher: dimension mismatch");
  require(budget >= 1, "round_rademacher: budget must be positive");
  const Matrix Cs = symmetrize(C);
  const Matrix R = psd_sqrt(Q_star);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(R * Cs * R));
  const Matrix RU = R * es.eigenvectors() / std::sqrt(rounding_factor(K));

  Rng rng = make_rng(seed, 0x7ade);
  std::bernoulli_distribution coin(0.5);
  RoundingResult out;
  Vector y(n);
  for (int trial = 1; trial <= budget; ++trial) {
    Vector xi(n);
    for (int i = 0; i < n; ++i) xi(i) = coin(rng) ? 1.0 : -1.0;
    y = RU * xi;
    out.trials_used = trial;
    bool ok = true;
    for (int k = 0; k < K && ok; ++k) ok = y.dot(ell.S()[k] * y) <= t_star(k) * (1.0 + 1e-12) + 1e-15;
    if (ok) {
      out.accepted = true;
      break;
    }
  }
  out.val_unscaled = y.dot(Cs * y);
  const double g = ell.gauge(y);
  out.scale = g > 0.0 ? 1.0 / g : 1.0;
  // an accepted point lies in the set; guard against rounding in the gauge
  if (out.accepted) out.scale = std::max(out.scale, 1.0);
  out.x_hat = y * out.scale;
  out.val_hat = out.x_hat.dot(Cs * out.x_hat);
  if (out.accepted && out.val_hat < out.val_unscaled) {
    // rescaling only helps when the form is positive at y
    out.x_hat = y;
    out.scale = 1.0;
    out.val_hat = out.val_unscaled;
  }
  return out;
}

MomentCheck check_rademacher_moment(const Matrix& S, int N, std::uint64_t seed) {
  require(S.rows() == S.cols() && S.rows() >= 1, "moment check: S must be square");
  require(std::abs(S.trace() - 1.0) <= 1e-10, "moment check: S must have unit trace");
  require(min_eigenvalue(symmetrize(S)) >= -1e-12, "moment check: S must be positive semidefinite");
  require(N >= 2, "moment check: need at least two samples");
  const int n = static_cast<int>(S.rows());
  Rng rng = make_rng(seed, 0x303e);
  std::bernoulli_distribution coin(0.5);
  double sum = 0.0, sumsq = 0.0;
  Vector xi(n);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < n; ++j) xi(j) = coin(rng) ? 1.0 : -1.0;
    const double v = std::exp(0.25 * xi.dot(S * xi));
    sum += v;
    sumsq += v * v;
  }
  MomentCheck mc;
  mc.mc_estimate = sum / N;
  mc.se = std::sqrt(std::max(0.0, (sumsq - N * mc.mc_estimate * mc.mc_estimate) / (N - 1)) / N);
  mc.pass = mc.mc_estimate <= 3.0 * std::sqrt(2.0) + 4.0 * mc.se;
  return mc;
}

double brute_force_box_max(const Matrix& C, const Vector& a) {
  const int n = static_cast<int>(a.size());
  require(C.rows() == n && C.cols() == n, "brute_force_box_max: dimension mismatch");
  require(n <= 24, "brute_force_box_max: dimension too large to enumerate");
  require((a.array() > 0.0).all(), "brute_force_box_max: a must be positive");
  const Matrix Cs = symmetrize(C);
  double best = -std::numeric_limits<double>::infinity();
  Vector x(n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    for (int i = 0; i < n; ++i) x(i) = ((mask >> i) & 1U ? 1.0 : -1.0) / a(i);
    best = std::max(best, x.dot(Cs * x));
  }
  return best;
}

}  // namespace nearopt
