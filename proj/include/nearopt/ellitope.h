#pragma once

#include <string>
#include <vector>

#include "nearopt/conic_solver.h"
#include "nearopt/types.h"

namespace nearopt {

enum class TSetKind { kUnitSegment, kUnitBox, kPNormBall };

struct TFactor {
  TSetKind kind;
  int K;
  double p;  // PNormBall only
};

/// Monotone convex set T in the nonnegative orthant. A basic set is one of
/// [0,1], [0,1]^K or {t >= 0 : sum t_k^{p/2} <= 1}; products of basic sets
/// arise from intersections and direct products of ellitopes.
class TSet {
 public:
  static TSet unit_segment();
  static TSet unit_box(int K);
  static TSet pnorm_ball(int K, double p);
  static TSet product(const std::vector<TSet>& parts);

  int K() const { return K_; }
  const std::vector<TFactor>& factors() const { return factors_; }
  bool is_basic() const { return factors_.size() == 1; }
  /// Kind of a basic set; throws for products.
  TSetKind kind() const;
  double p() const;

  /// Support function max_{t in T} lam^T t; lam must be nonnegative.
  double support(const Vector& lam) const;
  /// Gauge inf{c > 0 : g / c in T} of a nonnegative vector.
  double gauge(const Vector& g) const;
  /// g in T, tested as g / (1 + tol) in T.
  bool contains(const Vector& g, double tol = 0.0) const;
  /// max_{t in T} sum_k t_k
  double max_sum() const;
  /// max_{t in T} min_k t_k
  double max_min() const;
  /// sqrt(max_sum / max_min)
  double cond() const;
  /// True when every p-norm factor has 2/p dyadic, the case the conic encodings support.
  bool conic_representable() const;

  std::string describe() const;

 private:
  std::vector<TFactor> factors_;
  int K_ = 0;
};

/// Support function of a basic or product set.
double support_function(const TSet& tset, const Vector& lam);

/// Canonical ellitope {x : exists t in T, x^T S_k x <= t_k}.
class Ellitope {
 public:
  Ellitope(std::vector<Matrix> S, TSet tset);

  static Ellitope ellipsoid(const Matrix& S1);
  /// {x : |a_k x_k| <= 1}
  static Ellitope box(const Vector& a);

  int n() const { return n_; }
  int K() const { return static_cast<int>(S_.size()); }
  const std::vector<Matrix>& S() const { return S_; }
  const TSet& tset() const { return tset_; }
  /// Minimal eigenvalue of sum_k S_k.
  double kappa() const { return kappa_; }

  Vector loads(const Vector& x) const;
  bool contains(const Vector& x, double tol = 1e-9) const;
  /// Smallest c with x / c in the set (Minkowski functional).
  double gauge(const Vector& x) const;
  double psd_tolerance() const;

 private:
  int n_;
  std::vector<Matrix> S_;
  TSet tset_;
  double kappa_;
};

/// Ellitope image {P y : y in core}.
struct RawEllitope {
  Ellitope core;
  Matrix P;

  static RawEllitope identity(const Ellitope& ell);
  int n() const { return static_cast<int>(P.rows()); }
  /// Minkowski functional, computed by a conic program; +inf outside the range of P.
  double gauge(const Vector& x) const;
  bool contains(const Vector& x, double tol = 1e-6) const;
};

struct CanonicalProblem {
  Ellitope ell;
  Matrix A;
  Matrix B;
};

/// Moves the estimation problem to the lifted space: (core, A P, B P).
CanonicalProblem canonicalize(const RawEllitope& raw, const Matrix& A, const Matrix& B);

RawEllitope intersect(const std::vector<RawEllitope>& parts);
RawEllitope direct_product(const std::vector<RawEllitope>& parts);
RawEllitope linear_image(const RawEllitope& ell, const Matrix& R);
/// {z : R z in ell}; R must have full column rank.
RawEllitope inverse_image(const RawEllitope& ell, const Matrix& R);
RawEllitope minkowski_sum(const std::vector<RawEllitope>& parts);

// Conic encodings shared by the estimation programs.

/// [t; s] in the closed conic hull of T (s = 1 gives t in T). Adds t >= 0.
void add_tset_cone(ConicProgram& prog, const TSet& tset, const std::vector<LinearExpr>& t, const LinearExpr& s);
/// support(lam) <= u, for lam >= 0 enforced elsewhere.
void add_support_epigraph(ConicProgram& prog, const TSet& tset, const std::vector<LinearExpr>& lam,
                          const LinearExpr& u);
/// x^T S x <= t via a rotated cone on a factor of S.
void add_quadratic_le(ConicProgram& prog, const Matrix& S, const std::vector<LinearExpr>& x, const LinearExpr& t);

}  // namespace nearopt
