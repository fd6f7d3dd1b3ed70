#pragma once

// Conic programs shared by the estimation, lower-bound, S-risk, robust and
// relaxation modules.

#include <vector>

#include "nearopt/conic_solver.h"
#include "nearopt/ellitope.h"

namespace nearopt::detail {

struct RobustTerms {
  Matrix EA;  // p x m
  Matrix EB;  // p x nu
  Matrix F;   // q x n
  double r = 0.0;
};

struct DesignInput {
  const Matrix* A = nullptr;
  const Matrix* B = nullptr;
  double sigma = 1.0;
  const std::vector<Matrix>* S = nullptr;  // S_k; empty for whole space
  const TSet* tset = nullptr;              // null when S is empty
  const Matrix* Sreg = nullptr;            // regularity matrix; adds the tau S term
  const RobustTerms* robust = nullptr;
};

/// Variable layout of
///   min tau  s.t.  LMI(H, lam, tau, mu) >= 0, sigma^2 Tr(H^T H) <= u, phi(lam) <= w, u + w <= tau.
/// Without Sreg, tau is not a variable and the objective is u + w.
struct DesignLayout {
  int m = 0, nu = 0, n = 0, K = 0;
  int h0 = 0;     // H(l, j) at h0 + l * nu + j
  int lam0 = -1;  // lambda_k at lam0 + k
  int u = -1, w = -1, tau = -1, mu = -1;
  int lmi = 0;  // index of the main LMI block
  int h(int l, int j) const { return h0 + l * nu + j; }
};

DesignLayout build_design(ConicProgram& prog, const DesignInput& in);
Matrix extract_H(const Vector& x, const DesignLayout& lay);
Vector extract_lambda(const Vector& x, const DesignLayout& lay);

/// Index of the symmetric n x n matrix variable starting at q0 (upper triangle, row-major).
struct SymVar {
  int q0 = 0;
  int n = 0;
  int idx(int i, int j) const {
    if (i > j) std::swap(i, j);
    return q0 + i * n - i * (i - 1) / 2 + (j - i);
  }
  int count() const { return n * (n + 1) / 2; }
  Matrix extract(const Vector& x) const;
  /// Tr(M Q) as a linear expression, for symmetric M.
  LinearExpr trace_with(const Matrix& M) const;
};

struct BayesInput {
  const Matrix* A = nullptr;  // null: no observation block (objective must be linear)
  const Matrix* B = nullptr;
  double sigma = 1.0;
  const Ellitope* ell = nullptr;  // null: whole space (needs Sreg)
  /// Tr(Q S_k) * scale_k <= t_k (contraction sets); empty means all ones.
  Vector scale;
  /// Replace the T-constraint by the quadratic-approximation set with this delta (K = 1 only).
  double quad_delta = 0.0;
  /// Homogenised S-risk variant: [v; s] in cone(T), Tr(W Sreg) + s <= 1, sigma^2 s in the LMI.
  const Matrix* Sreg = nullptr;
  /// If set, maximise Tr(C Q) instead of phi(Q).
  const Matrix* C = nullptr;
};

struct BayesLayout {
  SymVar Q;
  SymVar G;   // G~ = G - B Q B^T, nu x nu (phi objective only)
  int t0 = -1;
  int s = -1;  // homogenised variant only
};

/// For the phi objective the program minimises Tr(G~), so Opt_* = -objective.
/// For the linear objective it minimises -Tr(C Q).
BayesLayout build_bayes(ConicProgram& prog, const BayesInput& in);

}  // namespace nearopt::detail
