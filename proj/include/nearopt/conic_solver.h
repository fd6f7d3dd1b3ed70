#pragma once

#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "nearopt/types.h"

namespace nearopt {

/// Sparse affine expression `constant + sum_i coef_i * x[var_i]`.
struct LinearExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinearExpr() = default;
  explicit LinearExpr(double c) : constant(c) {}

  LinearExpr& add(int var, double coef) {
    terms.emplace_back(var, coef);
    return *this;
  }
  static LinearExpr var(int v, double coef = 1.0) {
    LinearExpr e;
    e.terms.emplace_back(v, coef);
    return e;
  }
  double evaluate(const Vector& x) const;
};

/// One LMI block `F0 + sum_i x_i F_i >= 0`.
///
/// Coefficients F_i are stored as sparse symmetric matrices expressed in a
/// "basis": F_i = L * C_i * L^T with L one of the block's registered factor
/// matrices. Basis 0 is always the identity. Entry (r, c, v) with r != c
/// contributes v at both (r, c) and (c, r).
class LmiBlock {
 public:
  static constexpr int kIdentity = 0;

  explicit LmiBlock(int size);

  int size() const { return size_; }
  Matrix& constant() { return constant_; }
  const Matrix& constant() const { return constant_; }

  /// Registers a factor matrix L (size x p) and returns its basis index.
  int add_basis(Matrix factor);
  const Matrix& basis(int index) const { return bases_.at(index); }
  int num_bases() const { return static_cast<int>(bases_.size()); }
  bool basis_is_identity(int index) const { return index == kIdentity; }
  int basis_dim(int index) const;

  /// Adds v * (E_rc + E_cr) (or v * E_rr when r == c), scaled by x[var].
  void add_entry(int var, int row, int col, double value, int basis = kIdentity);
  /// Adds x[var] * M for a dense symmetric M in the identity basis.
  void add_dense(int var, const Matrix& m, double scale = 1.0);
  /// Adds the constant term `scale * M`.
  void add_constant(const Matrix& m, double scale = 1.0);

  struct Entry {
    int var;
    int basis;
    int row;
    int col;
    double value;
  };
  const std::vector<Entry>& entries() const { return entries_; }

  /// Evaluates F0 + sum_i x_i F_i.
  Matrix evaluate(const Vector& x) const;

 private:
  int size_;
  Matrix constant_;
  std::vector<Matrix> bases_;
  std::vector<Entry> entries_;
};

/// Second-order cone constraint `head >= || tail ||_2`.
struct SocConstraint {
  LinearExpr head;
  std::vector<LinearExpr> tail;
};

/// Dense conic program:
///   minimize c^T x
///   s.t. LMI blocks >= 0, second-order cones, linear inequalities
///        expr >= 0, linear equalities expr == 0.
class ConicProgram {
 public:
  explicit ConicProgram(int num_vars = 0);

  int num_vars() const { return num_vars_; }
  int add_variable();
  /// Returns the index of the first of `count` new variables.
  int add_variables(int count);

  Vector& objective() { return objective_; }
  const Vector& objective() const { return objective_; }
  void set_objective(int var, double coef) { objective_(var) = coef; }
  double objective_constant = 0.0;

  LmiBlock& add_lmi(int size);
  void add_soc(SocConstraint soc);
  /// head^2 <= ... convenience: sum_i tail_i^2 <= a * b with a, b >= 0.
  void add_rotated_soc(const LinearExpr& a, const LinearExpr& b,
                       const std::vector<LinearExpr>& tail);
  /// expr >= 0
  void add_ge(LinearExpr expr);
  /// expr <= 0
  void add_le(LinearExpr expr);
  /// expr == 0
  void add_eq(LinearExpr expr);
  void add_nonneg(int var);

  const std::deque<LmiBlock>& lmis() const { return lmis_; }
  std::deque<LmiBlock>& lmis() { return lmis_; }
  const std::vector<SocConstraint>& socs() const { return socs_; }
  const std::vector<LinearExpr>& inequalities() const { return inequalities_; }
  const std::vector<LinearExpr>& equalities() const { return equalities_; }

  /// Writes objective, block shapes and dense coefficient matrices as JSON.
  void dump_json(const std::string& path) const;

 private:
  void check_var(int v) const;

  int num_vars_;
  Vector objective_;
  std::deque<LmiBlock> lmis_;
  std::vector<SocConstraint> socs_;
  std::vector<LinearExpr> inequalities_;
  std::vector<LinearExpr> equalities_;
};

// kInaccurate: the iteration stalled with residuals and gap within
// SolverOptions::reduced_factor of the requested tolerances.
enum class SolveStatus { kOptimal, kInaccurate, kInfeasible, kUnbounded, kMaxIter };

std::string to_string(SolveStatus status);

struct SolverOptions {
  double tol_gap = 1e-8;
  double tol_feas = 1e-8;
  int max_iter = 200;
  double reduced_factor = 100.0;
  int stall_iters = 8;
  bool verbose = false;

  /// Defaults, overridden by ESTIMATOR_SOLVER_TOL when it is set.
  static SolverOptions from_env();
};

/// Primal/dual pair returned by `solve`.
///
/// For kOptimal, `x` is the primal solution and the dual fields hold the
/// Lagrange multipliers (lmi_duals are PSD, inequality duals >= 0, SOC duals
/// in the cone). For kInfeasible the dual fields hold a Farkas certificate
/// normalised to a dual objective of +1 with zero dual residual; for
/// kUnbounded `x` holds a primal improving ray with c^T x = -1.
struct ConicSolution {
  SolveStatus status = SolveStatus::kMaxIter;
  Vector x;
  std::vector<Matrix> lmi_duals;
  std::vector<Vector> soc_duals;
  Vector inequality_duals;
  Vector equality_duals;

  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;           // complementarity s^T z
  double relative_gap = 0.0;  // max(|primal - dual|, gap) / (1 + |primal| + |dual|)
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;

  bool optimal() const { return status == SolveStatus::kOptimal || status == SolveStatus::kInaccurate; }
};

ConicSolution solve(const ConicProgram& prog, const SolverOptions& options = {});

/// Residual checks recomputed from scratch on a returned solution.
struct CertificateCheck {
  double primal_infeasibility = 0.0;  // worst cone/equality violation of x
  double dual_infeasibility = 0.0;    // || c + G^T z + A^T y ||_inf (scaled)
  double dual_cone_violation = 0.0;   // most negative eigenvalue among duals
  double dual_bound = 0.0;            // objective bound reconstructed from duals
  double farkas_value = 0.0;          // for infeasibility certificates
};

CertificateCheck check_certificate(const ConicProgram& prog, const ConicSolution& sol);

}  // namespace nearopt
