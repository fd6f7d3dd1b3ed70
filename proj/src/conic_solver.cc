// Homogeneous self-dual interior-point method for
//   minimize c^T x  s.t.  s = h + F x in K,  A x = b,
// with K a product of nonnegative orthants, second-order cones and PSD cones.
// Nesterov-Todd scaling, Mehrotra predictor-corrector.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <memory>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/Sparse>

#include "nearopt/conic_solver.h"

namespace nearopt {
namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct ConeVec {
  Vector lp;
  std::vector<Vector> soc;
  std::vector<Matrix> psd;
};

ConeVec zeros_like(const ConeVec& a) {
  ConeVec out;
  out.lp = Vector::Zero(a.lp.size());
  for (const auto& v : a.soc) out.soc.push_back(Vector::Zero(v.size()));
  for (const auto& m : a.psd) out.psd.push_back(Matrix::Zero(m.rows(), m.cols()));
  return out;
}

double dot(const ConeVec& a, const ConeVec& b) {
  double v = a.lp.dot(b.lp);
  for (std::size_t i = 0; i < a.soc.size(); ++i) v += a.soc[i].dot(b.soc[i]);
  for (std::size_t i = 0; i < a.psd.size(); ++i) v += a.psd[i].cwiseProduct(b.psd[i]).sum();
  return v;
}

double norm(const ConeVec& a) { return std::sqrt(std::max(0.0, dot(a, a))); }

// y += alpha * x
void axpy(double alpha, const ConeVec& x, ConeVec& y) {
  y.lp += alpha * x.lp;
  for (std::size_t i = 0; i < y.soc.size(); ++i) y.soc[i] += alpha * x.soc[i];
  for (std::size_t i = 0; i < y.psd.size(); ++i) y.psd[i] += alpha * x.psd[i];
}

ConeVec scaled(double alpha, const ConeVec& x) {
  ConeVec out = zeros_like(x);
  axpy(alpha, x, out);
  return out;
}

ConeVec identity_like(const ConeVec& a) {
  ConeVec e = zeros_like(a);
  e.lp.setOnes();
  for (auto& v : e.soc) v(0) = 1.0;
  for (auto& m : e.psd) m.setIdentity();
  return e;
}

double soc_det(const Vector& v) {
  const double t = v.tail(v.size() - 1).norm();
  return (v(0) - t) * (v(0) + t);
}

// Largest t such that x + t e is on the boundary, i.e. -min "eigenvalue" of x.
double max_violation(const ConeVec& x) {
  double v = -kInf;
  for (int i = 0; i < x.lp.size(); ++i) v = std::max(v, -x.lp(i));
  for (const auto& s : x.soc) v = std::max(v, s.tail(s.size() - 1).norm() - s(0));
  for (const auto& m : x.psd) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    v = std::max(v, -es.eigenvalues()(0));
  }
  return v;
}

ConeVec jordan_product(const ConeVec& a, const ConeVec& b) {
  ConeVec out = zeros_like(a);
  out.lp = a.lp.cwiseProduct(b.lp);
  for (std::size_t i = 0; i < a.soc.size(); ++i) {
    const Vector& x = a.soc[i];
    const Vector& y = b.soc[i];
    const int q = static_cast<int>(x.size());
    out.soc[i](0) = x.dot(y);
    out.soc[i].tail(q - 1) = x(0) * y.tail(q - 1) + y(0) * x.tail(q - 1);
  }
  for (std::size_t i = 0; i < a.psd.size(); ++i) {
    const Matrix p = a.psd[i] * b.psd[i];
    out.psd[i] = 0.5 * (p + p.transpose());
  }
  return out;
}

// Solves lambda o u = r for u where lambda is the scaled point (diagonal on
// the PSD blocks).
ConeVec jordan_divide(const ConeVec& lambda, const ConeVec& r) {
  ConeVec u = zeros_like(r);
  u.lp = r.lp.cwiseQuotient(lambda.lp);
  for (std::size_t i = 0; i < r.soc.size(); ++i) {
    const Vector& l = lambda.soc[i];
    const Vector& rr = r.soc[i];
    const int q = static_cast<int>(l.size());
    const double det = soc_det(l);
    const double u0 = (l(0) * rr(0) - l.tail(q - 1).dot(rr.tail(q - 1))) / det;
    u.soc[i](0) = u0;
    u.soc[i].tail(q - 1) = (rr.tail(q - 1) - u0 * l.tail(q - 1)) / l(0);
  }
  for (std::size_t i = 0; i < r.psd.size(); ++i) {
    const Vector d = lambda.psd[i].diagonal();
    const int n = static_cast<int>(d.size());
    for (int c = 0; c < n; ++c)
      for (int rI = 0; rI < n; ++rI) u.psd[i](rI, c) = 2.0 * r.psd[i](rI, c) / (d(rI) + d(c));
  }
  return u;
}

double soc_step(const Vector& l, const Vector& d) {
  const int q = static_cast<int>(l.size());
  const double a = d(0) * d(0) - d.tail(q - 1).squaredNorm();
  const double b = l(0) * d(0) - l.tail(q - 1).dot(d.tail(q - 1));
  const double c = soc_det(l);
  double best = kInf;
  auto consider = [&](double r) {
    if (r > 0 && std::isfinite(r)) best = std::min(best, r);
  };
  if (std::abs(a) < 1e-300) {
    if (b < 0) consider(-c / (2.0 * b));
  } else {
    const double disc = b * b - a * c;
    if (disc >= 0) {
      const double qv = -(b + std::copysign(std::sqrt(disc), b));
      if (qv != 0.0) {
        consider(qv / a);
        consider(c / qv);
      }
    }
  }
  // The head must stay positive as well.
  if (d(0) < 0) best = std::min(best, -l(0) / d(0));
  return best;
}

// Maximum step alpha with lambda + alpha * d in the cone (lambda interior,
// diagonal on PSD blocks).
double max_step(const ConeVec& lambda, const ConeVec& d) {
  double alpha = kInf;
  for (int i = 0; i < d.lp.size(); ++i)
    if (d.lp(i) < 0) alpha = std::min(alpha, -lambda.lp(i) / d.lp(i));
  for (std::size_t i = 0; i < d.soc.size(); ++i) alpha = std::min(alpha, soc_step(lambda.soc[i], d.soc[i]));
  for (std::size_t i = 0; i < d.psd.size(); ++i) {
    const Vector isq = lambda.psd[i].diagonal().cwiseSqrt().cwiseInverse();
    const Matrix m = isq.asDiagonal() * d.psd[i] * isq.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    const double mn = es.eigenvalues()(0);
    if (mn < 0) alpha = std::min(alpha, -1.0 / mn);
  }
  return alpha;
}

// One group of entries of a PSD block: same variable, same basis.
struct PsdPart {
  int var;
  int basis;
  std::vector<LmiBlock::Entry> entries;
  bool dense = false;
};

struct PsdBlock {
  const LmiBlock* blk;
  std::vector<PsdPart> parts;
  std::vector<Matrix> bases;  // bases[0] is empty (identity)
};

struct Problem {
  int d = 0;
  Vector c;
  SpMat A;  // equalities A x = b
  Vector b;
  SpMat Flp;  // s_lp = hlp + Flp x
  std::vector<SpMat> Fsoc;
  std::vector<SpMat> FsocTF;
  std::vector<PsdBlock> psd;
  ConeVec h;
  int degree = 0;
};

SpMat rows_to_sparse(const std::vector<const LinearExpr*>& rows, int d) {
  std::vector<Triplet> trip;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (const auto& [v, c] : rows[r]->terms) trip.emplace_back(static_cast<int>(r), v, c);
  SpMat m(static_cast<int>(rows.size()), d);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Problem compile(const ConicProgram& prog) {
  Problem p;
  p.d = prog.num_vars();
  p.c = prog.objective();

  std::vector<const LinearExpr*> eq;
  for (const auto& e : prog.equalities()) eq.push_back(&e);
  p.A = rows_to_sparse(eq, p.d);
  p.b.resize(static_cast<int>(eq.size()));
  for (std::size_t i = 0; i < eq.size(); ++i) p.b(i) = -eq[i]->constant;

  std::vector<const LinearExpr*> lp;
  for (const auto& e : prog.inequalities()) lp.push_back(&e);
  p.Flp = rows_to_sparse(lp, p.d);
  p.h.lp.resize(static_cast<int>(lp.size()));
  for (std::size_t i = 0; i < lp.size(); ++i) p.h.lp(i) = lp[i]->constant;
  p.degree = static_cast<int>(lp.size());

  for (const auto& soc : prog.socs()) {
    std::vector<const LinearExpr*> rows{&soc.head};
    for (const auto& t : soc.tail) rows.push_back(&t);
    SpMat f = rows_to_sparse(rows, p.d);
    Vector h(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) h(i) = rows[i]->constant;
    p.FsocTF.push_back(SpMat(f.transpose() * f));
    p.Fsoc.push_back(std::move(f));
    p.h.soc.push_back(std::move(h));
    p.degree += 1;
  }

  for (const auto& blk : prog.lmis()) {
    PsdBlock pb;
    pb.blk = &blk;
    for (int i = 0; i < blk.num_bases(); ++i) pb.bases.push_back(i == 0 ? Matrix() : blk.basis(i));
    std::map<std::pair<int, int>, int> index;
    for (const auto& e : blk.entries()) {
      require(e.var >= 0 && e.var < p.d, "LMI entry refers to an unknown variable");
      auto [it, inserted] = index.try_emplace({e.var, e.basis}, static_cast<int>(pb.parts.size()));
      if (inserted) pb.parts.push_back({e.var, e.basis, {}, false});
      pb.parts[it->second].entries.push_back(e);
    }
    // Parts with many entries are cheaper to handle through T F T products.
    std::size_t total = 0;
    for (const auto& part : pb.parts) total += part.entries.size();
    const double n = blk.size();
    const double threshold = 1.0 + 2.0 * n * n * n / std::max<double>(1.0, static_cast<double>(total));
    for (auto& part : pb.parts) part.dense = static_cast<double>(part.entries.size()) > threshold;
    p.h.psd.push_back(blk.constant());
    p.degree += blk.size();
    p.psd.push_back(std::move(pb));
  }
  return p;
}

double entry_weight(const LmiBlock::Entry& e) { return e.row == e.col ? 1.0 : 2.0; }

// Coefficient matrices C_basis(x) of a PSD block, then L C L^T summed.
Matrix psd_apply(const PsdBlock& pb, const Vector& x) {
  const int n = pb.blk->size();
  std::vector<Matrix> coeff(pb.bases.size());
  for (const auto& part : pb.parts) {
    const double xv = x(part.var);
    if (xv == 0.0) continue;
    Matrix& c = coeff[part.basis];
    if (c.size() == 0) c = Matrix::Zero(pb.blk->basis_dim(part.basis), pb.blk->basis_dim(part.basis));
    for (const auto& e : part.entries) {
      c(e.row, e.col) += e.value * xv;
      if (e.row != e.col) c(e.col, e.row) += e.value * xv;
    }
  }
  Matrix out = Matrix::Zero(n, n);
  for (std::size_t bI = 0; bI < coeff.size(); ++bI) {
    if (coeff[bI].size() == 0) continue;
    if (bI == 0)
      out += coeff[bI];
    else
      out.noalias() += pb.bases[bI] * coeff[bI] * pb.bases[bI].transpose();
  }
  return out;
}

// Adds F^T Z to out.
void psd_apply_t(const PsdBlock& pb, const Matrix& z, Vector& out) {
  std::vector<Matrix> proj(pb.bases.size());
  for (std::size_t bI = 0; bI < pb.bases.size(); ++bI)
    proj[bI] = bI == 0 ? z : Matrix(pb.bases[bI].transpose() * z * pb.bases[bI]);
  for (const auto& part : pb.parts) {
    const Matrix& zz = proj[part.basis];
    double v = 0.0;
    for (const auto& e : part.entries) v += entry_weight(e) * e.value * zz(e.row, e.col);
    out(part.var) += v;
  }
}

ConeVec apply_F(const Problem& p, const Vector& x) {
  ConeVec out;
  out.lp = p.Flp * x;
  for (const auto& f : p.Fsoc) out.soc.push_back(f * x);
  for (const auto& pb : p.psd) out.psd.push_back(psd_apply(pb, x));
  return out;
}

Vector apply_Ft(const Problem& p, const ConeVec& z) {
  Vector out = p.Flp.transpose() * z.lp;
  for (std::size_t i = 0; i < p.Fsoc.size(); ++i) out += p.Fsoc[i].transpose() * z.soc[i];
  for (std::size_t i = 0; i < p.psd.size(); ++i) psd_apply_t(p.psd[i], z.psd[i], out);
  return out;
}

// Nesterov-Todd scaling W with W z = W^{-T} s = lambda.
struct Scaling {
  Vector w;                   // LP: sqrt(s / z)
  std::vector<double> beta;   // SOC
  std::vector<Vector> v;      // SOC: W = beta (2 v v^T - J)
  std::vector<Matrix> R;      // PSD: W(Z) = R^T Z R
  std::vector<Matrix> Rinv;
};

Vector soc_reflect(const Vector& x) {  // J x
  Vector y = -x;
  y(0) = x(0);
  return y;
}

// W x = beta (2 v (v^T x) - J x)
Vector soc_w(double beta, const Vector& v, const Vector& x) {
  return beta * (2.0 * v.dot(x) * v - soc_reflect(x));
}

// W^{-1} x = (1/beta) (2 Jv (v^T J x) - J x)
Vector soc_winv(double beta, const Vector& v, const Vector& x) {
  const Vector jv = soc_reflect(v);
  const Vector jx = soc_reflect(x);
  return (2.0 * v.dot(jx) * jv - jx) / beta;
}

ConeVec apply_Wt(const Scaling& W, const ConeVec& z) {
  ConeVec out = zeros_like(z);
  out.lp = W.w.cwiseProduct(z.lp);
  for (std::size_t i = 0; i < z.soc.size(); ++i) out.soc[i] = soc_w(W.beta[i], W.v[i], z.soc[i]);
  for (std::size_t i = 0; i < z.psd.size(); ++i) out.psd[i] = W.R[i] * z.psd[i] * W.R[i].transpose();
  return out;
}

ConeVec apply_Winv_t(const Scaling& W, const ConeVec& s) {
  ConeVec out = zeros_like(s);
  out.lp = s.lp.cwiseQuotient(W.w);
  for (std::size_t i = 0; i < s.soc.size(); ++i) out.soc[i] = soc_winv(W.beta[i], W.v[i], s.soc[i]);
  for (std::size_t i = 0; i < s.psd.size(); ++i)
    out.psd[i] = W.Rinv[i] * s.psd[i] * W.Rinv[i].transpose();
  return out;
}

ConeVec apply_Winv(const Scaling& W, const ConeVec& v) {
  ConeVec out = zeros_like(v);
  out.lp = v.lp.cwiseQuotient(W.w);
  for (std::size_t i = 0; i < v.soc.size(); ++i) out.soc[i] = soc_winv(W.beta[i], W.v[i], v.soc[i]);
  for (std::size_t i = 0; i < v.psd.size(); ++i)
    out.psd[i] = W.Rinv[i].transpose() * v.psd[i] * W.Rinv[i];
  return out;
}

// Returns false if s or z is not strictly inside the SOC.
bool soc_scaling(const Vector& s, const Vector& z, double& beta, Vector& v) {
  const double ds = soc_det(s);
  const double dz = soc_det(z);
  if (!(ds > 0) || !(dz > 0) || s(0) <= 0 || z(0) <= 0) return false;
  const double ns = std::sqrt(ds);
  const double nz = std::sqrt(dz);
  const Vector sb = s / ns;
  const Vector zb = z / nz;
  const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
  Vector wb = (sb + soc_reflect(zb)) / (2.0 * gamma);
  wb(0) += 1.0;
  v = wb / std::sqrt(2.0 * wb(0));
  beta = std::sqrt(ns / nz);
  return true;
}

// Updates the SOC scaling (beta, v) given new scaled iterates st, zt in the
// current scaled coordinates; returns the new scaled point.
bool soc_update(double& beta, Vector& v, const Vector& st, const Vector& zt, Vector& lam) {
  const double ds = soc_det(st);
  const double dz = soc_det(zt);
  if (!(ds > 0) || !(dz > 0) || st(0) <= 0 || zt(0) <= 0) return false;
  const double aa = std::sqrt(ds);
  const double bb = std::sqrt(dz);
  const Vector sh = st / aa;
  const Vector zh = zt / bb;
  const int q = static_cast<int>(v.size());
  const double cc = std::sqrt(0.5 * (1.0 + sh.dot(zh)));
  const double vs = v.dot(sh);
  const double vz = v(0) * zh(0) - v.tail(q - 1).dot(zh.tail(q - 1));
  const double vq = (vs + vz) / (2.0 * cc);
  const double vu = vs - vz;
  const double wk0 = 2.0 * v(0) * vq - (sh(0) + zh(0)) / (2.0 * cc);
  const double dd = (v(0) * vu - 0.5 * sh(0) + 0.5 * zh(0)) / (wk0 + 1.0);
  lam.resize(q);
  lam(0) = cc;
  lam.tail(q - 1) = 2.0 * (-dd * vq + 0.5 * vu) * v.tail(q - 1) + 0.5 * (1.0 - dd / cc) * sh.tail(q - 1) +
                    0.5 * (1.0 + dd / cc) * zh.tail(q - 1);
  lam *= std::sqrt(aa * bb);
  // v <- normalized (W q + e) with q = (sh + J zh) / (2 cc)
  Vector w = 2.0 * vq * v;
  w(0) -= sh(0) / (2.0 * cc);
  w.tail(q - 1) += sh.tail(q - 1) / (2.0 * cc);
  w -= zh / (2.0 * cc);
  w(0) += 1.0;
  v = w / std::sqrt(2.0 * w(0));
  beta *= std::sqrt(aa / bb);
  return true;
}

// NT scaling of a PSD pair: returns R, R^{-1} and the diagonal lambda.
bool psd_scaling(const Matrix& s, const Matrix& z, Matrix& R, Matrix& Rinv, Vector& lam) {
  Eigen::LLT<Matrix> ls(s);
  Eigen::LLT<Matrix> lz(z);
  if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
  const Matrix Ls = ls.matrixL();
  const Matrix Lz = lz.matrixL();
  Eigen::JacobiSVD<Matrix> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
  lam = svd.singularValues();
  if (!(lam.minCoeff() > 0)) return false;
  const Vector isq = lam.cwiseSqrt().cwiseInverse();
  R = Ls * svd.matrixV() * isq.asDiagonal();
  Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
  return true;
}

// Factorization of the reduced KKT system.
class KktSolver {
 public:
  KktSolver(const Problem& p, const Scaling& W) : p_(p), W_(W) {
    const int d = p.d;
    Matrix H = Matrix::Zero(d, d);
    if (p.Flp.rows() > 0) {
      SpMat fw = W.w.cwiseInverse().asDiagonal() * p.Flp;
      H += Matrix(fw.transpose() * fw);
    }
    for (std::size_t i = 0; i < p.Fsoc.size(); ++i) {
      const double ib2 = 1.0 / (W.beta[i] * W.beta[i]);
      const Vector& v = W.v[i];
      const Vector a = soc_reflect(v);
      const Vector pv = p.Fsoc[i].transpose() * a;
      const Vector qv = p.Fsoc[i].transpose() * v;
      H += ib2 * Matrix(p.FsocTF[i]);
      H.noalias() += (ib2 * 4.0 * v.squaredNorm()) * pv * pv.transpose();
      H.noalias() -= (2.0 * ib2) * (pv * qv.transpose() + qv * pv.transpose());
    }
    for (std::size_t i = 0; i < p.psd.size(); ++i) add_psd(p.psd[i], W.Rinv[i], H);
    if (p.A.rows() > 0) H += Matrix(p.A.transpose() * p.A);
    factor(H, H_);
    if (p.A.rows() > 0) {
      const Matrix At = Matrix(p.A.transpose());
      HinvAt_ = H_.solve(At);
      Matrix S = p.A * HinvAt_;
      factor(S, S_);
    }
  }

  // Solves the scaled system
  //   [0 A^T G^T W^{-1}; A 0 0; W^{-T} G 0 -I] (ux, uy, uz) = (bx, by, bz)
  // with G = -F, where uz and bz live in the scaled space.
  void solve(const Vector& bx, const Vector& by, const ConeVec& bz, Vector& ux, Vector& uy, ConeVec& uz) const {
    solve_once(bx, by, bz, ux, uy, uz);
    // Iterative refinement against the exact operators, keeping the best iterate.
    Vector bx_best = ux, by_best = uy;
    ConeVec bz_best = uz;
    double best = kInf;
    for (int step = 0; step < 8; ++step) {
      const Vector ex = bx - (p_.A.transpose() * uy - apply_Ft(p_, apply_Winv(W_, uz)));
      const Vector ey = by - p_.A * ux;
      ConeVec ez = bz;
      axpy(1.0, apply_Winv_t(W_, apply_F(p_, ux)), ez);
      axpy(1.0, uz, ez);
      const double res = std::sqrt(ex.squaredNorm() + ey.squaredNorm() + dot(ez, ez));
      if (!(res < best)) break;
      const bool slow = res > 0.5 * best;
      best = res;
      bx_best = ux;
      by_best = uy;
      bz_best = uz;
      if (slow) break;
      Vector dx, dy;
      ConeVec dz;
      solve_once(ex, ey, ez, dx, dy, dz);
      ux += dx;
      uy += dy;
      axpy(1.0, dz, uz);
    }
    ux = std::move(bx_best);
    uy = std::move(by_best);
    uz = std::move(bz_best);
  }

 private:
  // Cholesky of D H D with D = diag(H)^{-1/2}; the equilibration keeps the
  // factor accurate when the cone scaling spreads the diagonal widely.
  struct ScaledLlt {
    Vector d;
    Eigen::LLT<Matrix> llt;
    template <typename Rhs>
    Matrix solve(const Rhs& b) const {
      return d.asDiagonal() * llt.solve(d.asDiagonal() * b);
    }
  };

  static void factor(Matrix& H, ScaledLlt& f) {
    f.d = H.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    H = f.d.asDiagonal() * H * f.d.asDiagonal();
    f.llt.compute(H);
    if (f.llt.info() == Eigen::Success) return;
    for (double reg = 1e-13; reg < 1.0; reg *= 100.0) {
      Matrix Hr = H;
      Hr.diagonal().array() += reg;
      f.llt.compute(Hr);
      if (f.llt.info() == Eigen::Success) return;
    }
    throw SolverError("KKT system is singular");
  }

  void solve_once(const Vector& bx, const Vector& by, const ConeVec& bz, Vector& ux, Vector& uy,
                  ConeVec& uz) const {
    Vector r = bx - apply_Ft(p_, apply_Winv(W_, bz));
    if (p_.A.rows() > 0) {
      r += p_.A.transpose() * by;
      const Vector hr = H_.solve(r);
      uy = S_.solve(p_.A * hr - by);
      ux = hr - HinvAt_ * uy;
    } else {
      uy = Vector::Zero(0);
      ux = H_.solve(r);
    }
    uz = apply_Winv_t(W_, apply_F(p_, ux));
    axpy(1.0, bz, uz);
    uz = scaled(-1.0, uz);
  }

  // H += F^T (W^T W)^{-1} F restricted to one PSD block, i.e.
  // H_ij += Tr(F_i T F_j T) with T = R^{-T} R^{-1}.
  static void add_psd(const PsdBlock& pb, const Matrix& Rinv, Matrix& H) {
    const Matrix T = Rinv.transpose() * Rinv;
    const int nb = static_cast<int>(pb.bases.size());
    std::vector<Matrix> TL(nb);
    for (int b = 0; b < nb; ++b) TL[b] = b == 0 ? T : Matrix(T * pb.bases[b]);
    // omega[a][b] = L_a^T T L_b
    std::vector<std::vector<Matrix>> omega(nb, std::vector<Matrix>(nb));
    std::vector<bool> used(nb, false);
    for (const auto& part : pb.parts) used[part.basis] = true;
    for (int a = 0; a < nb; ++a)
      for (int b = 0; b < nb; ++b) {
        if (!used[a] || !used[b]) continue;
        omega[a][b] = a == 0 ? TL[b] : Matrix(pb.bases[a].transpose() * TL[b]);
      }

    const int np = static_cast<int>(pb.parts.size());
    // Projections of T F_j T onto each basis, for dense parts.
    std::vector<std::vector<Matrix>> pi(np);
    for (int j = 0; j < np; ++j) {
      const PsdPart& part = pb.parts[j];
      if (!part.dense) continue;
      Vector x = Vector::Zero(part.var + 1);
      x(part.var) = 1.0;
      PsdBlock single{pb.blk, {part}, pb.bases};
      const Matrix F = psd_apply(single, x);
      const Matrix P = T * F * T;
      pi[j].resize(nb);
      for (int b = 0; b < nb; ++b) {
        if (!used[b]) continue;
        pi[j][b] = b == 0 ? P : Matrix(pb.bases[b].transpose() * P * pb.bases[b]);
      }
    }

    for (int i = 0; i < np; ++i) {
      const PsdPart& pi_part = pb.parts[i];
      for (int j = 0; j <= i; ++j) {
        const PsdPart& pj_part = pb.parts[j];
        double c = 0.0;
        if (pi_part.dense || pj_part.dense) {
          const bool use_i = pi_part.dense;
          const Matrix& proj = use_i ? pi[i][pj_part.basis] : pi[j][pi_part.basis];
          const PsdPart& other = use_i ? pj_part : pi_part;
          for (const auto& e : other.entries) c += entry_weight(e) * e.value * proj(e.row, e.col);
        } else {
          const Matrix& om = omega[pi_part.basis][pj_part.basis];
          for (const auto& e : pi_part.entries) {
            const int p = e.row, q = e.col;
            const double we = entry_weight(e) * e.value;
            for (const auto& f : pj_part.entries) {
              const int r = f.row, s = f.col;
              c += 0.5 * we * entry_weight(f) * f.value * (om(q, r) * om(p, s) + om(q, s) * om(p, r));
            }
          }
        }
        if (i == j) {
          H(pi_part.var, pi_part.var) += c;
        } else {
          H(pi_part.var, pj_part.var) += c;
          H(pj_part.var, pi_part.var) += c;
        }
      }
    }
  }

  const Problem& p_;
  const Scaling& W_;
  ScaledLlt H_;
  ScaledLlt S_;
  Matrix HinvAt_;
};

Scaling identity_scaling(const Problem& p) {
  Scaling W;
  W.w = Vector::Ones(p.h.lp.size());
  for (const auto& s : p.h.soc) {
    W.beta.push_back(1.0);
    Vector v = Vector::Zero(s.size());
    v(0) = 1.0;
    W.v.push_back(std::move(v));
  }
  for (const auto& m : p.h.psd) {
    W.R.push_back(Matrix::Identity(m.rows(), m.cols()));
    W.Rinv.push_back(Matrix::Identity(m.rows(), m.cols()));
  }
  return W;
}

// Recomputes LP and SOC scalings from (s, z) and fills lambda for them.
bool refresh_scaling(const ConeVec& s, const ConeVec& z, Scaling& W, ConeVec& lambda) {
  if ((s.lp.array() <= 0).any() || (z.lp.array() <= 0).any()) return false;
  W.w = s.lp.cwiseQuotient(z.lp).cwiseSqrt();
  lambda.lp = s.lp.cwiseProduct(z.lp).cwiseSqrt();
  for (std::size_t i = 0; i < s.soc.size(); ++i) {
    if (!soc_scaling(s.soc[i], z.soc[i], W.beta[i], W.v[i])) return false;
    lambda.soc[i] = soc_w(W.beta[i], W.v[i], z.soc[i]);
  }
  return true;
}

void shift_into_cone(ConeVec& x) {
  const double ts = max_violation(x);
  const double nrm = norm(x);
  if (ts >= -1e-8 * std::max(nrm, 1.0)) axpy(1.0 + ts, identity_like(x), x);
}

struct Iterate {
  Vector x, y;
  ConeVec s, z;
  double tau = 1.0, kappa = 1.0;
};

struct Metrics {
  double pcost = 0, dcost = 0, pres = kInf, dres = kInf, gap = 0, relgap = kInf;
};

}  // namespace

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts) {
  const Problem p = compile(prog);
  require(p.degree > 0, "program has no cone constraints");
  const int d = p.d;
  const int meq = static_cast<int>(p.b.size());

  const double resx0 = std::max(1.0, p.c.norm());
  const double resy0 = std::max(1.0, p.b.norm());
  const double resz0 = std::max(1.0, norm(p.h));

  Scaling W = identity_scaling(p);
  Iterate it;

  // Starting point from two least-squares solves with W = I.
  {
    KktSolver kkt(p, W);
    Vector ux, uy;
    ConeVec uz;
    kkt.solve(Vector::Zero(d), p.b, p.h, it.x, uy, uz);
    it.s = scaled(-1.0, uz);
    kkt.solve(-p.c, Vector::Zero(meq), zeros_like(p.h), ux, it.y, it.z);
  }
  shift_into_cone(it.s);
  shift_into_cone(it.z);

  ConeVec lambda = zeros_like(p.h);
  for (std::size_t i = 0; i < it.s.psd.size(); ++i) {
    Vector lam;
    if (!psd_scaling(it.s.psd[i], it.z.psd[i], W.R[i], W.Rinv[i], lam))
      throw SolverError("initial point is not interior");
    lambda.psd[i] = lam.asDiagonal();
  }
  if (!refresh_scaling(it.s, it.z, W, lambda)) throw SolverError("initial point is not interior");

  const double nu = p.degree;
  Metrics m;
  Iterate best = it;
  Metrics best_m;
  double best_merit = kInf;
  int stalled = 0;
  double best_comp[3] = {kInf, kInf, kInf};
  int iter = 0;
  SolveStatus status = SolveStatus::kMaxIter;

  for (;; ++iter) {
    Vector& x = it.x;
    Vector& y = it.y;
    ConeVec& s = it.s;
    ConeVec& z = it.z;
    double& tau = it.tau;
    double& kappa = it.kappa;

    const ConeVec Fx = apply_F(p, x);
    const Vector Ftz = apply_Ft(p, z);
    const Vector rx = p.A.transpose() * y - Ftz + tau * p.c;
    const Vector ry = p.A * x - tau * p.b;
    ConeVec rz = s;
    axpy(-1.0, Fx, rz);
    axpy(-tau, p.h, rz);
    const double cx = p.c.dot(x);
    const double by = p.b.dot(y);
    const double hz = dot(p.h, z);
    const double rt = kappa + cx + by + hz;
    m.gap = dot(s, z);
    const double mu = (m.gap + tau * kappa) / (nu + 1.0);

    m.pcost = cx / tau;
    m.dcost = -(by + hz) / tau;
    // Residuals are relative to the data and to the size of the terms they cancel.
    m.pres = std::max(ry.norm() / (tau * resy0 + (p.A * x).norm()), norm(rz) / (tau * resz0 + norm(Fx) + norm(s)));
    m.dres = rx.norm() / (tau * resx0 + (p.A.transpose() * y).norm() + Ftz.norm());
    m.relgap = std::max(std::abs(m.pcost - m.dcost), m.gap / (tau * tau)) / (1.0 + std::abs(m.pcost) + std::abs(m.dcost));

    const double pinfres = (by + hz < 0) ? (p.A.transpose() * y - Ftz).norm() / resx0 / -(by + hz) : kInf;
    double dinfres = kInf;
    if (cx < 0) {
      ConeVec gs = s;
      axpy(-1.0, Fx, gs);
      dinfres = std::max((p.A * x).norm() / resy0, norm(gs) / resz0) / -cx;
    }

    if (opts.verbose)
      std::fprintf(stderr, "%3d  p=% .8e  d=% .8e  gap=%.2e  pres=%.2e  dres=%.2e  tau=%.2e  kappa=%.2e\n", iter,
                   m.pcost, m.dcost, m.relgap, m.pres, m.dres, tau, kappa);

    const double merit = std::max({m.pres / opts.tol_feas, m.dres / opts.tol_feas, m.relgap / opts.tol_gap});
    // Stalled only when no residual has made real progress.
    const double comps[3] = {m.pres, m.dres, m.relgap};
    bool progressed = false;
    for (int c = 0; c < 3; ++c)
      if (comps[c] < 0.7 * best_comp[c]) {
        best_comp[c] = comps[c];
        progressed = true;
      }
    if (progressed) stalled = 0;
    else ++stalled;
    if (merit < best_merit) {
      best_merit = merit;
      best = it;
      best_m = m;
    }
    if (merit <= 1.0) {
      status = SolveStatus::kOptimal;
      break;
    }
    if (pinfres <= opts.tol_feas) {
      status = SolveStatus::kInfeasible;
      break;
    }
    if (dinfres <= opts.tol_feas) {
      status = SolveStatus::kUnbounded;
      break;
    }
    if (iter >= opts.max_iter || stalled >= opts.stall_iters) break;

    try {
      const KktSolver kkt(p, W);
      const ConeVec ht = apply_Winv_t(W, p.h);
      const ConeVec rzt = apply_Winv_t(W, rz);

      Vector u1x, u1y;
      ConeVec u1z;
      kkt.solve(-p.c, p.b, ht, u1x, u1y, u1z);
      // c^T u1x + b^T u1y + h^T u1z = -||W u1z||^2
      const double denom = -dot(u1z, u1z) - kappa / tau;

      struct Direction {
        Vector dx, dy;
        ConeVec dsa, dza;
        double dtau = 0, dkappa = 0;
      };
      auto direction = [&](double eta, const ConeVec& ds_rhs, double dk_rhs) {
        Direction D;
        const ConeVec v = jordan_divide(lambda, ds_rhs);
        ConeVec bz = scaled(-eta, rzt);
        axpy(-1.0, v, bz);
        Vector u0x, u0y;
        ConeVec u0z;
        kkt.solve(-eta * rx, -eta * ry, bz, u0x, u0y, u0z);
        D.dtau = (-eta * rt - dk_rhs / tau - (p.c.dot(u0x) + p.b.dot(u0y) + dot(ht, u0z))) / denom;
        D.dx = u0x + D.dtau * u1x;
        D.dy = u0y + D.dtau * u1y;
        D.dza = u0z;
        axpy(D.dtau, u1z, D.dza);
        D.dsa = v;
        axpy(-1.0, D.dza, D.dsa);
        D.dkappa = (dk_rhs - kappa * D.dtau) / tau;
        return D;
      };
      auto step_length = [&](const Direction& D) {
        double a = std::min(max_step(lambda, D.dsa), max_step(lambda, D.dza));
        if (D.dtau < 0) a = std::min(a, -tau / D.dtau);
        if (D.dkappa < 0) a = std::min(a, -kappa / D.dkappa);
        return a;
      };

      const ConeVec ll = jordan_product(lambda, lambda);
      const Direction aff = direction(1.0, scaled(-1.0, ll), -tau * kappa);
      const double alpha_aff = std::min(1.0, step_length(aff));
      const double sigma = std::pow(1.0 - alpha_aff, 3);

      ConeVec ds_rhs = scaled(-1.0, ll);
      axpy(-1.0, jordan_product(aff.dsa, aff.dza), ds_rhs);
      axpy(sigma * mu, identity_like(ds_rhs), ds_rhs);
      const double dk_rhs = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
      const Direction D = direction(1.0 - sigma, ds_rhs, dk_rhs);
      const double alpha = std::min(1.0, 0.99 * step_length(D));
      if (opts.verbose) std::fprintf(stderr, "     aff=%.3e sigma=%.3e alpha=%.3e dtau=%.3e dtau_aff=%.3e\n", alpha_aff, sigma, alpha, D.dtau, aff.dtau);

      x += alpha * D.dx;
      y += alpha * D.dy;
      tau += alpha * D.dtau;
      kappa += alpha * D.dkappa;

      // New scaled iterates; the unscaled s, z are recovered from them.
      ConeVec st = lambda;
      axpy(alpha, D.dsa, st);
      ConeVec zt = lambda;
      axpy(alpha, D.dza, zt);
      const ConeVec s_new = apply_Wt(W, st);
      const ConeVec z_new = apply_Winv(W, zt);
      s.lp = s_new.lp;
      z.lp = z_new.lp;
      s.soc = s_new.soc;
      z.soc = z_new.soc;
      if ((st.lp.array() <= 0).any() || (zt.lp.array() <= 0).any()) throw SolverError("iterate left the cone");
      W.w = W.w.cwiseProduct(st.lp.cwiseQuotient(zt.lp).cwiseSqrt());
      lambda.lp = st.lp.cwiseProduct(zt.lp).cwiseSqrt();
      for (std::size_t i = 0; i < s.soc.size(); ++i)
        if (!soc_update(W.beta[i], W.v[i], st.soc[i], zt.soc[i], lambda.soc[i]))
          throw SolverError("iterate left the cone");
      for (std::size_t i = 0; i < s.psd.size(); ++i) {
        Matrix Rt, Rtinv;
        Vector lam;
        if (!psd_scaling(0.5 * (st.psd[i] + st.psd[i].transpose()), 0.5 * (zt.psd[i] + zt.psd[i].transpose()), Rt,
                         Rtinv, lam))
          throw SolverError("PSD iterate left the cone");
        W.R[i] = W.R[i] * Rt;
        W.Rinv[i] = Rtinv * W.Rinv[i];
        lambda.psd[i] = lam.asDiagonal();
        // Linear updates keep the residual equations exact; rebuilding from the
        // scaling loses accuracy once it is ill-conditioned.
        s.psd[i] = 0.5 * (s_new.psd[i] + s_new.psd[i].transpose());
        z.psd[i] = 0.5 * (z_new.psd[i] + z_new.psd[i].transpose());
      }
    } catch (const SolverError&) {
      if (opts.verbose) std::fprintf(stderr, "numerical failure, returning best iterate\n");
      break;
    }
  }

  if (status == SolveStatus::kMaxIter) {
    it = best;
    m = best_m;
    if (best_merit <= opts.reduced_factor) status = SolveStatus::kInaccurate;
  }

  ConicSolution sol;
  sol.status = status;
  sol.iterations = iter;
  sol.primal_residual = m.pres;
  sol.dual_residual = m.dres;

  const double tau = it.tau;
  double sx = 1.0 / tau, sy = 1.0 / tau;
  if (status == SolveStatus::kInfeasible) {
    sx = 0.0;
    sy = 1.0 / -(p.b.dot(it.y) + dot(p.h, it.z));
  } else if (status == SolveStatus::kUnbounded) {
    sx = 1.0 / -p.c.dot(it.x);
    sy = 0.0;
  }
  sol.x = it.x * sx;
  const ConeVec zz = scaled(sy, it.z);
  sol.inequality_duals = zz.lp;
  sol.soc_duals = zz.soc;
  sol.lmi_duals = zz.psd;
  sol.equality_duals = -sy * it.y;
  if (status == SolveStatus::kInfeasible) {
    sol.x = Vector::Zero(d);
    sol.primal_objective = kInf;
    sol.dual_objective = 1.0;
  } else if (status == SolveStatus::kUnbounded) {
    sol.primal_objective = -1.0;
    sol.dual_objective = -kInf;
  } else {
    sol.primal_objective = m.pcost + prog.objective_constant;
    sol.dual_objective = m.dcost + prog.objective_constant;
    sol.gap = m.gap / (tau * tau);
    sol.relative_gap = m.relgap;
  }
  return sol;
}

CertificateCheck check_certificate(const ConicProgram& prog, const ConicSolution& sol) {
  CertificateCheck out;
  const bool farkas = sol.status == SolveStatus::kInfeasible;
  const Vector& x = sol.x;
  Vector grad = farkas ? Vector::Zero(prog.num_vars()) : Vector(prog.objective());
  double constant_sum = 0.0;

  const auto& lmis = prog.lmis();
  for (std::size_t j = 0; j < lmis.size(); ++j) {
    const LmiBlock& blk = lmis[j];
    if (!farkas) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(blk.evaluate(x), Eigen::EigenvaluesOnly);
      out.primal_infeasibility = std::max(out.primal_infeasibility, -es.eigenvalues()(0));
    }
    const Matrix& Z = sol.lmi_duals.at(j);
    Eigen::SelfAdjointEigenSolver<Matrix> ez(Z, Eigen::EigenvaluesOnly);
    out.dual_cone_violation = std::max(out.dual_cone_violation, -ez.eigenvalues()(0));
    std::vector<Matrix> proj(blk.num_bases());
    for (int b = 0; b < blk.num_bases(); ++b)
      proj[b] = b == 0 ? Z : Matrix(blk.basis(b).transpose() * Z * blk.basis(b));
    for (const auto& e : blk.entries())
      grad(e.var) -= (e.row == e.col ? 1.0 : 2.0) * e.value * proj[e.basis](e.row, e.col);
    constant_sum += blk.constant().cwiseProduct(Z).sum();
  }
  const auto& socs = prog.socs();
  for (std::size_t j = 0; j < socs.size(); ++j) {
    const Vector& zj = sol.soc_duals.at(j);
    const int q = static_cast<int>(zj.size());
    out.dual_cone_violation = std::max(out.dual_cone_violation, zj.tail(q - 1).norm() - zj(0));
    if (!farkas) {
      double tail = 0.0;
      for (const auto& t : socs[j].tail) tail += std::pow(t.evaluate(x), 2);
      out.primal_infeasibility = std::max(out.primal_infeasibility, std::sqrt(tail) - socs[j].head.evaluate(x));
    }
    for (int r = 0; r < q; ++r) {
      const LinearExpr& e = r == 0 ? socs[j].head : socs[j].tail[r - 1];
      for (const auto& [v, c] : e.terms) grad(v) -= c * zj(r);
      constant_sum += e.constant * zj(r);
    }
  }
  const auto& ineq = prog.inequalities();
  for (std::size_t l = 0; l < ineq.size(); ++l) {
    const double zl = sol.inequality_duals(l);
    out.dual_cone_violation = std::max(out.dual_cone_violation, -zl);
    if (!farkas) out.primal_infeasibility = std::max(out.primal_infeasibility, -ineq[l].evaluate(x));
    for (const auto& [v, c] : ineq[l].terms) grad(v) -= c * zl;
    constant_sum += ineq[l].constant * zl;
  }
  const auto& eq = prog.equalities();
  for (std::size_t k = 0; k < eq.size(); ++k) {
    const double yk = sol.equality_duals(k);
    if (!farkas) out.primal_infeasibility = std::max(out.primal_infeasibility, std::abs(eq[k].evaluate(x)));
    for (const auto& [v, c] : eq[k].terms) grad(v) -= c * yk;
    constant_sum += eq[k].constant * yk;
  }
  const double cscale = std::max(1.0, prog.objective().lpNorm<Eigen::Infinity>());
  out.dual_infeasibility = grad.size() ? grad.lpNorm<Eigen::Infinity>() / cscale : 0.0;
  out.dual_bound = -constant_sum + prog.objective_constant;
  out.farkas_value = constant_sum;
  return out;
}

}  // namespace nearopt
