#include "nearopt/ellitope.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "nearopt/linalg.h"

namespace nearopt {

namespace {

// Returns L with w = num / 2^L in lowest terms, or -1 if 2/p is not dyadic with L <= 12.
int dyadic_level(double w, long* num) {
  for (int L = 0; L <= 12; ++L) {
    const double scaled = std::ldexp(w, L);
    const double r = std::round(scaled);
    if (std::abs(scaled - r) < 1e-9) {
      *num = static_cast<long>(r);
      return L;
    }
  }
  return -1;
}

bool pnorm_dyadic(double p) {
  long num = 0;
  return dyadic_level(2.0 / p, &num) >= 0;
}

LinearExpr minus(const LinearExpr& a, const LinearExpr& b) {
  LinearExpr out = a;
  out.constant -= b.constant;
  for (const auto& t : b.terms) out.terms.emplace_back(t.first, -t.second);
  return out;
}

LinearExpr sum_of(const std::vector<LinearExpr>& xs, size_t begin, size_t end) {
  LinearExpr out;
  for (size_t i = begin; i < end; ++i) {
    out.constant += xs[i].constant;
    out.terms.insert(out.terms.end(), xs[i].terms.begin(), xs[i].terms.end());
  }
  return out;
}

// t <= a^w b^(1-w) for a, b >= 0 and dyadic w in (0, 1); t is assumed >= 0.
void add_geo_mean(ConicProgram& prog, const LinearExpr& a, const LinearExpr& b, double w, const LinearExpr& t) {
  if (std::abs(w - 0.5) < 1e-12) {
    prog.add_rotated_soc(a, b, {t});
    return;
  }
  const LinearExpr v = LinearExpr::var(prog.add_variable());
  if (w < 0.5) {
    // t^2 <= b v, v <= a^(2w) b^(1-2w)
    prog.add_rotated_soc(b, v, {t});
    add_geo_mean(prog, a, b, 2.0 * w, v);
  } else {
    // t^2 <= a v, v <= a^(2w-1) b^(2-2w)
    prog.add_rotated_soc(a, v, {t});
    add_geo_mean(prog, a, b, 2.0 * w - 1.0, v);
  }
}

double factor_support(const TFactor& f, const Vector& lam) {
  switch (f.kind) {
    case TSetKind::kUnitSegment:
    case TSetKind::kUnitBox:
      return lam.sum();
    case TSetKind::kPNormBall: {
      if (f.p <= 2.0 + 1e-14) return lam.maxCoeff();
      const double q = f.p / (f.p - 2.0);
      const double m = lam.maxCoeff();
      if (m <= 0.0) return 0.0;
      return m * std::pow((lam / m).array().pow(q).sum(), 1.0 / q);
    }
  }
  return 0.0;
}

double factor_gauge(const TFactor& f, const Vector& g) {
  if (f.kind != TSetKind::kPNormBall) return g.maxCoeff();
  const double r = f.p / 2.0;
  const double m = g.maxCoeff();
  if (m <= 0.0) return 0.0;
  return m * std::pow((g / m).array().pow(r).sum(), 1.0 / r);
}

Matrix block_diag(const std::vector<Matrix>& blocks) {
  int rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += static_cast<int>(b.rows());
    cols += static_cast<int>(b.cols());
  }
  Matrix out = Matrix::Zero(rows, cols);
  int r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += static_cast<int>(b.rows());
    c += static_cast<int>(b.cols());
  }
  return out;
}

// Stacks the cores of `parts` over y = [y^1; ...] with each S_k lifted to its block.
std::pair<std::vector<Matrix>, TSet> stacked_core(const std::vector<RawEllitope>& parts, int total) {
  std::vector<Matrix> S;
  std::vector<TSet> sets;
  int off = 0;
  for (const auto& part : parts) {
    const int d = part.core.n();
    for (const auto& Sk : part.core.S()) {
      Matrix lifted = Matrix::Zero(total, total);
      lifted.block(off, off, d, d) = Sk;
      S.push_back(std::move(lifted));
    }
    sets.push_back(part.core.tset());
    off += d;
  }
  return {std::move(S), TSet::product(sets)};
}

}  // namespace

TSet TSet::unit_segment() {
  TSet t;
  t.factors_.push_back({TSetKind::kUnitSegment, 1, 0.0});
  t.K_ = 1;
  return t;
}

TSet TSet::unit_box(int K) {
  require(K >= 1, "unit_box: K must be positive");
  TSet t;
  t.factors_.push_back({TSetKind::kUnitBox, K, 0.0});
  t.K_ = K;
  return t;
}

TSet TSet::pnorm_ball(int K, double p) {
  require(K >= 1, "pnorm_ball: K must be positive");
  require(std::isfinite(p) && p >= 2.0, "pnorm_ball: p must be >= 2");
  TSet t;
  t.factors_.push_back({TSetKind::kPNormBall, K, p});
  t.K_ = K;
  return t;
}

TSet TSet::product(const std::vector<TSet>& parts) {
  require(!parts.empty(), "TSet::product: empty list");
  if (parts.size() == 1) return parts[0];
  TSet t;
  for (const auto& p : parts) {
    t.factors_.insert(t.factors_.end(), p.factors_.begin(), p.factors_.end());
    t.K_ += p.K_;
  }
  return t;
}

TSetKind TSet::kind() const {
  require(is_basic(), "TSet::kind: product set has no single kind");
  return factors_[0].kind;
}

double TSet::p() const {
  require(is_basic() && factors_[0].kind == TSetKind::kPNormBall, "TSet::p: not a p-norm ball");
  return factors_[0].p;
}

double TSet::support(const Vector& lam) const {
  require(lam.size() == K_, "support_function: length of lambda differs from K");
  for (int k = 0; k < K_; ++k) require(lam(k) >= 0.0, "support_function: negative component of lambda");
  double s = 0.0;
  int off = 0;
  for (const auto& f : factors_) {
    s += factor_support(f, lam.segment(off, f.K));
    off += f.K;
  }
  return s;
}

double TSet::gauge(const Vector& g) const {
  require(g.size() == K_, "TSet::gauge: length differs from K");
  const Vector gp = g.cwiseMax(0.0);
  double m = 0.0;
  int off = 0;
  for (const auto& f : factors_) {
    m = std::max(m, factor_gauge(f, gp.segment(off, f.K)));
    off += f.K;
  }
  return m;
}

bool TSet::contains(const Vector& g, double tol) const {
  require(tol >= 0.0, "TSet::contains: negative tolerance");
  if (g.size() != K_) throw DomainError("TSet::contains: length differs from K");
  if (g.minCoeff() < -tol) return false;
  return gauge(g) <= 1.0 + tol;
}

double TSet::max_sum() const {
  double s = 0.0;
  for (const auto& f : factors_) {
    if (f.kind == TSetKind::kPNormBall)
      s += std::pow(static_cast<double>(f.K), 1.0 - 2.0 / f.p);
    else
      s += f.K;
  }
  return s;
}

double TSet::max_min() const {
  double m = 1.0;
  for (const auto& f : factors_)
    if (f.kind == TSetKind::kPNormBall) m = std::min(m, std::pow(static_cast<double>(f.K), -2.0 / f.p));
  return m;
}

double TSet::cond() const { return std::sqrt(max_sum() / max_min()); }

bool TSet::conic_representable() const {
  for (const auto& f : factors_)
    if (f.kind == TSetKind::kPNormBall && !pnorm_dyadic(f.p)) return false;
  return true;
}

std::string TSet::describe() const {
  std::ostringstream os;
  for (size_t i = 0; i < factors_.size(); ++i) {
    if (i) os << " x ";
    const auto& f = factors_[i];
    switch (f.kind) {
      case TSetKind::kUnitSegment: os << "segment"; break;
      case TSetKind::kUnitBox: os << "box(" << f.K << ")"; break;
      case TSetKind::kPNormBall: os << "pnorm(" << f.K << ", p=" << f.p << ")"; break;
    }
  }
  return os.str();
}

double support_function(const TSet& tset, const Vector& lam) { return tset.support(lam); }

Ellitope::Ellitope(std::vector<Matrix> S, TSet tset) : S_(std::move(S)), tset_(std::move(tset)) {
  require(!S_.empty(), "Ellitope: no quadratic forms");
  require(static_cast<int>(S_.size()) == tset_.K(), "Ellitope: number of S_k differs from tset K");
  n_ = static_cast<int>(S_[0].rows());
  require(n_ >= 1, "Ellitope: empty dimension");
  Matrix sum = Matrix::Zero(n_, n_);
  for (auto& Sk : S_) {
    require(Sk.rows() == n_ && Sk.cols() == n_, "Ellitope: S_k must be n x n");
    require((Sk - Sk.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + Sk.cwiseAbs().maxCoeff()),
            "Ellitope: S_k not symmetric");
    Sk = symmetrize(Sk);
    const double tol = 1e-9 * (1.0 + std::abs(Sk.trace()));
    require(min_eigenvalue(Sk) >= -tol, "Ellitope: S_k not positive semidefinite");
    sum += Sk;
  }
  kappa_ = min_eigenvalue(sum);
  require(kappa_ > 1e-9 * (1.0 + std::abs(sum.trace())), "Ellitope: sum of S_k is singular");
}

double Ellitope::psd_tolerance() const {
  double tr = 0.0;
  for (const auto& Sk : S_) tr += Sk.trace();
  return 1e-9 * (1.0 + tr);
}

Ellitope Ellitope::ellipsoid(const Matrix& S1) { return Ellitope({S1}, TSet::unit_segment()); }

Ellitope Ellitope::box(const Vector& a) {
  const int n = static_cast<int>(a.size());
  std::vector<Matrix> S;
  for (int k = 0; k < n; ++k) {
    Matrix Sk = Matrix::Zero(n, n);
    Sk(k, k) = a(k) * a(k);
    S.push_back(std::move(Sk));
  }
  return Ellitope(std::move(S), TSet::unit_box(n));
}

Vector Ellitope::loads(const Vector& x) const {
  require(x.size() == n_, "Ellitope: dimension mismatch");
  Vector g(K());
  for (int k = 0; k < K(); ++k) g(k) = x.dot(S_[k] * x);
  return g;
}

bool Ellitope::contains(const Vector& x, double tol) const { return tset_.contains(loads(x), tol); }

double Ellitope::gauge(const Vector& x) const { return std::sqrt(tset_.gauge(loads(x))); }

RawEllitope RawEllitope::identity(const Ellitope& ell) {
  return RawEllitope{ell, Matrix::Identity(ell.n(), ell.n())};
}

double RawEllitope::gauge(const Vector& x) const {
  require(x.size() == n(), "RawEllitope: dimension mismatch");
  // min s : P y = x, y^T S_k y <= t_k, [t; s] in cone(T); the gauge is sqrt(s).
  const int d = core.n();
  const int K = core.K();
  ConicProgram prog(d + K + 1);
  const int s = d + K;
  std::vector<LinearExpr> y, t;
  for (int i = 0; i < d; ++i) y.push_back(LinearExpr::var(i));
  for (int k = 0; k < K; ++k) t.push_back(LinearExpr::var(d + k));
  for (int r = 0; r < n(); ++r) {
    LinearExpr e(-x(r));
    for (int i = 0; i < d; ++i)
      if (P(r, i) != 0.0) e.add(i, P(r, i));
    prog.add_eq(e);
  }
  for (int k = 0; k < K; ++k) add_quadratic_le(prog, core.S()[k], y, t[k]);
  add_tset_cone(prog, core.tset(), t, LinearExpr::var(s));
  prog.set_objective(s, 1.0);
  const ConicSolution sol = solve(prog, SolverOptions::from_env());
  if (sol.status == SolveStatus::kInfeasible) return std::numeric_limits<double>::infinity();
  if (!sol.optimal()) throw SolverError("RawEllitope::gauge: solver status " + to_string(sol.status));
  return std::sqrt(std::max(0.0, sol.x(s)));
}

bool RawEllitope::contains(const Vector& x, double tol) const { return gauge(x) <= std::sqrt(1.0 + tol); }

CanonicalProblem canonicalize(const RawEllitope& raw, const Matrix& A, const Matrix& B) {
  require(A.cols() == raw.n() && B.cols() == raw.n(), "canonicalize: A and B must have n columns");
  require(raw.P.cols() == raw.core.n(), "canonicalize: P must have one column per core coordinate");
  return CanonicalProblem{raw.core, A * raw.P, B * raw.P};
}

RawEllitope direct_product(const std::vector<RawEllitope>& parts) {
  require(!parts.empty(), "direct_product: empty operand list");
  int total = 0;
  std::vector<Matrix> Ps;
  for (const auto& p : parts) {
    total += p.core.n();
    Ps.push_back(p.P);
  }
  auto [S, tset] = stacked_core(parts, total);
  return RawEllitope{Ellitope(std::move(S), tset), block_diag(Ps)};
}

RawEllitope intersect(const std::vector<RawEllitope>& parts) {
  require(!parts.empty(), "intersect: empty operand list");
  if (parts.size() == 1) return parts[0];
  const int n = parts[0].n();
  int total = 0;
  for (const auto& p : parts) {
    require(p.n() == n, "intersect: operands live in different dimensions");
    total += p.core.n();
  }
  // Coupling P_i y^i = P_1 y^1 for i >= 2.
  const int d0 = parts[0].core.n();
  Matrix C = Matrix::Zero(n * (static_cast<int>(parts.size()) - 1), total);
  int off = d0;
  for (size_t i = 1; i < parts.size(); ++i) {
    const int r = n * static_cast<int>(i - 1);
    C.block(r, 0, n, d0) = -parts[0].P;
    C.block(r, off, n, parts[i].core.n()) = parts[i].P;
    off += parts[i].core.n();
  }
  const Matrix N = null_space(C);
  require(N.cols() > 0, "intersect: intersection is {0}");
  auto [S, tset] = stacked_core(parts, total);
  for (auto& Sk : S) Sk = symmetrize(N.transpose() * Sk * N);
  Matrix P1 = Matrix::Zero(n, total);
  P1.leftCols(d0) = parts[0].P;
  return RawEllitope{Ellitope(std::move(S), tset), P1 * N};
}

RawEllitope linear_image(const RawEllitope& ell, const Matrix& R) {
  require(R.cols() == ell.n(), "linear_image: R must have n columns");
  return RawEllitope{ell.core, R * ell.P};
}

RawEllitope inverse_image(const RawEllitope& ell, const Matrix& R) {
  require(R.rows() == ell.n(), "inverse_image: R must have n rows");
  require(numerical_rank(R) == R.cols(), "inverse_image: R is not injective");
  // Restrict y to {y : P y in range R}, then map back with the left inverse of R.
  const Matrix U = null_space(R.transpose());
  Matrix N;
  if (U.cols() == 0)
    N = Matrix::Identity(ell.core.n(), ell.core.n());
  else
    N = null_space(U.transpose() * ell.P);
  require(N.cols() > 0, "inverse_image: preimage is {0}");
  const Matrix Rpinv = R.completeOrthogonalDecomposition().pseudoInverse();
  std::vector<Matrix> S;
  for (const auto& Sk : ell.core.S()) S.push_back(symmetrize(N.transpose() * Sk * N));
  return RawEllitope{Ellitope(std::move(S), ell.core.tset()), Rpinv * ell.P * N};
}

RawEllitope minkowski_sum(const std::vector<RawEllitope>& parts) {
  require(!parts.empty(), "minkowski_sum: empty operand list");
  const int n = parts[0].n();
  for (const auto& p : parts) require(p.n() == n, "minkowski_sum: operands live in different dimensions");
  Matrix R(n, n * static_cast<long>(parts.size()));
  for (size_t i = 0; i < parts.size(); ++i) R.block(0, n * static_cast<long>(i), n, n).setIdentity();
  return linear_image(direct_product(parts), R);
}

void add_tset_cone(ConicProgram& prog, const TSet& tset, const std::vector<LinearExpr>& t, const LinearExpr& s) {
  require(static_cast<int>(t.size()) == tset.K(), "add_tset_cone: length differs from K");
  for (const auto& tk : t) prog.add_ge(tk);
  size_t off = 0;
  for (const auto& f : tset.factors()) {
    const size_t end = off + f.K;
    if (f.kind != TSetKind::kPNormBall) {
      for (size_t k = off; k < end; ++k) prog.add_ge(minus(s, t[k]));
    } else if (std::abs(f.p - 2.0) < 1e-12) {
      prog.add_ge(minus(s, sum_of(t, off, end)));
    } else if (std::abs(f.p - 4.0) < 1e-12) {
      prog.add_soc({s, std::vector<LinearExpr>(t.begin() + off, t.begin() + end)});
    } else {
      require(pnorm_dyadic(f.p), "add_tset_cone: p-norm ball needs 2/p dyadic for a conic encoding");
      // t_k^{p/2} <= z_k s^{p/2-1}, sum z <= s
      const int z0 = prog.add_variables(f.K);
      LinearExpr zsum;
      for (int k = 0; k < f.K; ++k) {
        add_geo_mean(prog, LinearExpr::var(z0 + k), s, 2.0 / f.p, t[off + k]);
        zsum.add(z0 + k, 1.0);
      }
      prog.add_ge(minus(s, zsum));
    }
    off = end;
  }
}

void add_support_epigraph(ConicProgram& prog, const TSet& tset, const std::vector<LinearExpr>& lam,
                          const LinearExpr& u) {
  require(static_cast<int>(lam.size()) == tset.K(), "add_support_epigraph: length differs from K");
  std::vector<LinearExpr> budgets;
  if (tset.is_basic()) {
    budgets.push_back(u);
  } else {
    const int u0 = prog.add_variables(static_cast<int>(tset.factors().size()));
    LinearExpr usum;
    for (size_t i = 0; i < tset.factors().size(); ++i) {
      budgets.push_back(LinearExpr::var(u0 + static_cast<int>(i)));
      usum.add(u0 + static_cast<int>(i), 1.0);
    }
    prog.add_ge(minus(u, usum));
  }
  size_t off = 0;
  for (size_t i = 0; i < tset.factors().size(); ++i) {
    const auto& f = tset.factors()[i];
    const LinearExpr& ui = budgets[i];
    const size_t end = off + f.K;
    if (f.kind != TSetKind::kPNormBall) {
      prog.add_ge(minus(ui, sum_of(lam, off, end)));
    } else if (std::abs(f.p - 2.0) < 1e-12) {
      for (size_t k = off; k < end; ++k) prog.add_ge(minus(ui, lam[k]));
    } else if (std::abs(f.p - 4.0) < 1e-12) {
      prog.add_soc({ui, std::vector<LinearExpr>(lam.begin() + off, lam.begin() + end)});
    } else {
      require(pnorm_dyadic(f.p), "add_support_epigraph: p-norm ball needs 2/p dyadic for a conic encoding");
      // ||lam||_q <= u with q = p/(p-2): lam_k <= r_k^{1/q} u^{1-1/q}, sum r <= u
      const int r0 = prog.add_variables(f.K);
      LinearExpr rsum;
      for (int k = 0; k < f.K; ++k) {
        add_geo_mean(prog, LinearExpr::var(r0 + k), ui, 1.0 - 2.0 / f.p, lam[off + k]);
        rsum.add(r0 + k, 1.0);
      }
      prog.add_ge(minus(ui, rsum));
    }
    off = end;
  }
}

void add_quadratic_le(ConicProgram& prog, const Matrix& S, const std::vector<LinearExpr>& x, const LinearExpr& t) {
  require(S.rows() == static_cast<long>(x.size()), "add_quadratic_le: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S));
  const double cut = 1e-13 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<LinearExpr> tail;
  for (int j = 0; j < S.rows(); ++j) {
    const double ev = es.eigenvalues()(j);
    if (ev <= cut) continue;
    LinearExpr e;
    const double w = std::sqrt(ev);
    for (size_t i = 0; i < x.size(); ++i) {
      const double c = w * es.eigenvectors()(static_cast<long>(i), j);
      if (c == 0.0) continue;
      e.constant += c * x[i].constant;
      for (const auto& term : x[i].terms) e.terms.emplace_back(term.first, c * term.second);
    }
    tail.push_back(std::move(e));
  }
  if (tail.empty()) {
    prog.add_ge(t);
    return;
  }
  prog.add_rotated_soc(t, LinearExpr(1.0), tail);
}

}  // namespace nearopt
