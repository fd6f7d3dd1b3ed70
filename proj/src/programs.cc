#include "programs.h"

#include <cmath>

#include "nearopt/linalg.h"

namespace nearopt::detail {

DesignLayout build_design(ConicProgram& prog, const DesignInput& in) {
  const Matrix& A = *in.A;
  const Matrix& B = *in.B;
  DesignLayout lay;
  lay.m = static_cast<int>(A.rows());
  lay.n = static_cast<int>(A.cols());
  lay.nu = static_cast<int>(B.rows());
  lay.K = in.S ? static_cast<int>(in.S->size()) : 0;
  const int n = lay.n, m = lay.m, nu = lay.nu, K = lay.K;
  const int p = in.robust ? static_cast<int>(in.robust->EA.rows()) : 0;

  lay.h0 = prog.add_variables(m * nu);
  if (K > 0) lay.lam0 = prog.add_variables(K);
  lay.u = prog.add_variable();
  if (K > 0) lay.w = prog.add_variable();
  if (in.Sreg) lay.tau = prog.add_variable();
  if (in.robust) lay.mu = prog.add_variable();

  lay.lmi = static_cast<int>(prog.lmis().size());
  LmiBlock& lmi = prog.add_lmi(n + nu + p);
  Matrix L = Matrix::Zero(n + nu + p, m + nu);
  L.topLeftCorner(n, m) = A.transpose();
  L.block(n, m, nu, nu).setIdentity();
  if (p) L.block(n + nu, 0, p, m) = in.robust->EA;
  const int basis = lmi.add_basis(L);
  for (int l = 0; l < m; ++l)
    for (int j = 0; j < nu; ++j) lmi.add_entry(lay.h(l, j), l, m + j, -1.0, basis);

  Matrix& F0 = lmi.constant();
  F0.block(n, 0, nu, n) = B;
  F0.block(0, n, n, nu) = B.transpose();
  F0.block(n, n, nu, nu).setIdentity();
  if (p) {
    F0.block(n + nu, n, p, nu) = in.robust->EB;
    F0.block(n, n + nu, nu, p) = in.robust->EB.transpose();
  }

  auto add_top_left = [&](int var, const Matrix& M, double scale) {
    for (int c = 0; c < n; ++c)
      for (int r = 0; r <= c; ++r)
        if (M(r, c) != 0.0) lmi.add_entry(var, r, c, scale * M(r, c));
  };
  for (int k = 0; k < K; ++k) add_top_left(lay.lam0 + k, (*in.S)[k], 1.0);
  if (in.Sreg) add_top_left(lay.tau, *in.Sreg, 1.0);
  if (p) {
    const Matrix FtF = in.robust->F.transpose() * in.robust->F;
    add_top_left(lay.mu, FtF, -in.robust->r * in.robust->r);
    for (int a = 0; a < p; ++a) lmi.add_entry(lay.mu, n + nu + a, n + nu + a, 1.0);
    prog.add_nonneg(lay.mu);
  }

  std::vector<LinearExpr> tail;
  tail.reserve(static_cast<size_t>(m) * nu);
  for (int l = 0; l < m; ++l)
    for (int j = 0; j < nu; ++j) tail.push_back(LinearExpr::var(lay.h(l, j), in.sigma));
  prog.add_rotated_soc(LinearExpr::var(lay.u), LinearExpr(1.0), tail);

  if (K > 0) {
    std::vector<LinearExpr> lam;
    for (int k = 0; k < K; ++k) {
      prog.add_nonneg(lay.lam0 + k);
      lam.push_back(LinearExpr::var(lay.lam0 + k));
    }
    add_support_epigraph(prog, *in.tset, lam, LinearExpr::var(lay.w));
  }

  if (in.Sreg) {
    LinearExpr slack = LinearExpr::var(lay.tau).add(lay.u, -1.0);
    if (K > 0) slack.add(lay.w, -1.0);
    prog.add_ge(slack);
    prog.set_objective(lay.tau, 1.0);
  } else {
    prog.set_objective(lay.u, 1.0);
    if (K > 0) prog.set_objective(lay.w, 1.0);
  }
  return lay;
}

Matrix extract_H(const Vector& x, const DesignLayout& lay) {
  Matrix H(lay.m, lay.nu);
  for (int l = 0; l < lay.m; ++l)
    for (int j = 0; j < lay.nu; ++j) H(l, j) = x(lay.h(l, j));
  return H;
}

Vector extract_lambda(const Vector& x, const DesignLayout& lay) {
  Vector lam(lay.K);
  for (int k = 0; k < lay.K; ++k) lam(k) = std::max(0.0, x(lay.lam0 + k));
  return lam;
}

Matrix SymVar::extract(const Vector& x) const {
  Matrix Q(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) Q(i, j) = Q(j, i) = x(idx(i, j));
  return Q;
}

LinearExpr SymVar::trace_with(const Matrix& M) const {
  LinearExpr e;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double c = (i == j) ? M(i, i) : M(i, j) + M(j, i);
      if (c != 0.0) e.add(idx(i, j), c);
    }
  return e;
}

BayesLayout build_bayes(ConicProgram& prog, const BayesInput& in) {
  require(in.ell || (in.Sreg && in.A), "Bayesian program: whole-space variant needs A and S");
  const int n = in.ell ? in.ell->n() : static_cast<int>(in.A->cols());
  const int K = in.ell ? in.ell->K() : 0;
  BayesLayout lay;
  lay.Q = {prog.add_variables(n * (n + 1) / 2), n};

  LmiBlock& psd = prog.add_lmi(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) psd.add_entry(lay.Q.idx(i, j), i, j, 1.0);

  if (in.quad_delta > 0.0) {
    require(K == 1 && !in.Sreg, "quadratic-approximation set needs a single quadratic form");
    const Ellitope& ell = *in.ell;
    const double Ld = std::log(1.0 / in.quad_delta);
    const Matrix R = psd_sqrt(ell.S()[0]);
    const int f = prog.add_variable();
    const int g = prog.add_variable();
    // f >= ||R Q R||_F over the upper triangle
    SocConstraint soc;
    soc.head = LinearExpr::var(f);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double wgt = (i == j) ? 1.0 : std::sqrt(2.0);
        LinearExpr e;
        for (int a = 0; a < n; ++a)
          for (int b = a; b < n; ++b) {
            double c = R(i, a) * R(b, j);
            if (a != b) c += R(i, b) * R(a, j);
            if (c != 0.0) e.add(lay.Q.idx(a, b), wgt * c);
          }
        soc.tail.push_back(std::move(e));
      }
    prog.add_soc(std::move(soc));
    // g I - R Q R >= 0
    LmiBlock& top = prog.add_lmi(n);
    const int basis = top.add_basis(R);
    for (int i = 0; i < n; ++i) top.add_entry(g, i, i, 1.0);
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) top.add_entry(lay.Q.idx(a, b), a, b, -1.0, basis);
    LinearExpr budget = lay.Q.trace_with(ell.S()[0]);
    budget.add(f, 2.0 * std::sqrt(Ld)).add(g, 2.0 * Ld);
    budget.constant = -1.0;
    prog.add_le(budget);
  } else {
    if (K > 0) lay.t0 = prog.add_variables(K);
    std::vector<LinearExpr> t;
    for (int k = 0; k < K; ++k) {
      t.push_back(LinearExpr::var(lay.t0 + k));
      const double sc = in.scale.size() ? in.scale(k) : 1.0;
      LinearExpr load = lay.Q.trace_with(in.ell->S()[k]);
      for (auto& term : load.terms) term.second *= -sc;
      load.add(lay.t0 + k, 1.0);
      prog.add_ge(load);
    }
    if (in.Sreg) {
      lay.s = prog.add_variable();
      if (K > 0)
        add_tset_cone(prog, in.ell->tset(), t, LinearExpr::var(lay.s));
      else
        prog.add_nonneg(lay.s);
      LinearExpr budget = lay.Q.trace_with(*in.Sreg);
      budget.add(lay.s, 1.0);
      budget.constant = -1.0;
      prog.add_le(budget);
    } else {
      add_tset_cone(prog, in.ell->tset(), t, LinearExpr(1.0));
    }
  }

  if (in.C) {
    const LinearExpr obj = lay.Q.trace_with(*in.C);
    for (const auto& [v, c] : obj.terms) prog.objective()(v) -= c;
    return lay;
  }

  const Matrix& A = *in.A;
  const Matrix& B = *in.B;
  const int m = static_cast<int>(A.rows());
  const int nu = static_cast<int>(B.rows());
  lay.G = {prog.add_variables(nu * (nu + 1) / 2), nu};
  LmiBlock& lmi = prog.add_lmi(nu + m);
  Matrix L(nu + m, n);
  L << B, A;
  const int basis = lmi.add_basis(L);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) lmi.add_entry(lay.Q.idx(a, b), a, b, 1.0, basis);
  for (int a = 0; a < nu; ++a)
    for (int b = a; b < nu; ++b) lmi.add_entry(lay.G.idx(a, b), a, b, 1.0);
  const double s2 = in.sigma * in.sigma;
  for (int i = 0; i < m; ++i) {
    if (in.Sreg)
      lmi.add_entry(lay.s, nu + i, nu + i, s2);
    else
      lmi.constant()(nu + i, nu + i) = s2;
  }
  for (int a = 0; a < nu; ++a) prog.set_objective(lay.G.idx(a, a), 1.0);
  return lay;
}

}  // namespace nearopt::detail
