#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>

#include "json.hpp"

#include "nearopt/conic_solver.h"

namespace nearopt {

double LinearExpr::evaluate(const Vector& x) const {
  double v = constant;
  for (const auto& [var, coef] : terms) v += coef * x(var);
  return v;
}

LmiBlock::LmiBlock(int size) : size_(size), constant_(Matrix::Zero(size, size)) {
  require(size > 0, "LMI block size must be positive");
  bases_.push_back(Matrix());  // identity placeholder
}

int LmiBlock::add_basis(Matrix factor) {
  require(factor.rows() == size_, "basis factor must have as many rows as the block");
  bases_.push_back(std::move(factor));
  return static_cast<int>(bases_.size()) - 1;
}

int LmiBlock::basis_dim(int index) const {
  return index == kIdentity ? size_ : static_cast<int>(bases_.at(index).cols());
}

void LmiBlock::add_entry(int var, int row, int col, double value, int basis) {
  require(basis >= 0 && basis < num_bases(), "unknown LMI basis");
  const int dim = basis_dim(basis);
  require(row >= 0 && col >= 0 && row < dim && col < dim, "LMI entry out of range");
  if (value == 0.0) return;
  if (row > col) std::swap(row, col);
  entries_.push_back({var, basis, row, col, value});
}

void LmiBlock::add_dense(int var, const Matrix& m, double scale) {
  require(m.rows() == size_ && m.cols() == size_, "dense LMI coefficient has wrong shape");
  for (int c = 0; c < size_; ++c)
    for (int r = 0; r <= c; ++r) {
      const double v = scale * 0.5 * (m(r, c) + m(c, r));
      if (v != 0.0) entries_.push_back({var, kIdentity, r, c, v});
    }
}

void LmiBlock::add_constant(const Matrix& m, double scale) {
  require(m.rows() == size_ && m.cols() == size_, "LMI constant has wrong shape");
  constant_ += scale * 0.5 * (m + m.transpose());
}

Matrix LmiBlock::evaluate(const Vector& x) const {
  Matrix out = constant_;
  std::vector<Matrix> coeff(bases_.size());
  for (const auto& e : entries_) {
    Matrix& c = coeff[e.basis];
    if (c.size() == 0) c = Matrix::Zero(basis_dim(e.basis), basis_dim(e.basis));
    const double v = e.value * x(e.var);
    c(e.row, e.col) += v;
    if (e.row != e.col) c(e.col, e.row) += v;
  }
  for (std::size_t b = 0; b < coeff.size(); ++b) {
    if (coeff[b].size() == 0) continue;
    if (b == kIdentity)
      out += coeff[b];
    else
      out += bases_[b] * coeff[b] * bases_[b].transpose();
  }
  return out;
}

ConicProgram::ConicProgram(int num_vars) : num_vars_(num_vars), objective_(Vector::Zero(num_vars)) {
  require(num_vars >= 0, "negative variable count");
}

int ConicProgram::add_variable() { return add_variables(1); }

int ConicProgram::add_variables(int count) {
  require(count >= 0, "negative variable count");
  const int first = num_vars_;
  num_vars_ += count;
  objective_.conservativeResize(num_vars_);
  objective_.tail(count).setZero();
  return first;
}

LmiBlock& ConicProgram::add_lmi(int size) {
  lmis_.emplace_back(size);
  return lmis_.back();
}

void ConicProgram::check_var(int v) const {
  require(v >= 0 && v < num_vars_, "variable index out of range");
}

void ConicProgram::add_soc(SocConstraint soc) {
  for (const auto& [v, c] : soc.head.terms) check_var(v);
  for (const auto& t : soc.tail)
    for (const auto& [v, c] : t.terms) check_var(v);
  socs_.push_back(std::move(soc));
}

void ConicProgram::add_rotated_soc(const LinearExpr& a, const LinearExpr& b,
                                   const std::vector<LinearExpr>& tail) {
  // sum tail^2 <= a b, a, b >= 0  <=>  || (2 tail, a - b) || <= a + b
  SocConstraint soc;
  soc.head = a;
  for (const auto& t : b.terms) soc.head.terms.push_back(t);
  soc.head.constant += b.constant;
  for (const auto& t : tail) {
    LinearExpr e = t;
    for (auto& term : e.terms) term.second *= 2.0;
    e.constant *= 2.0;
    soc.tail.push_back(std::move(e));
  }
  LinearExpr diff = a;
  for (const auto& [v, c] : b.terms) diff.terms.emplace_back(v, -c);
  diff.constant -= b.constant;
  soc.tail.push_back(std::move(diff));
  add_soc(std::move(soc));
}

void ConicProgram::add_ge(LinearExpr expr) {
  for (const auto& [v, c] : expr.terms) check_var(v);
  inequalities_.push_back(std::move(expr));
}

void ConicProgram::add_le(LinearExpr expr) {
  for (auto& t : expr.terms) t.second = -t.second;
  expr.constant = -expr.constant;
  add_ge(std::move(expr));
}

void ConicProgram::add_eq(LinearExpr expr) {
  for (const auto& [v, c] : expr.terms) check_var(v);
  equalities_.push_back(std::move(expr));
}

void ConicProgram::add_nonneg(int var) { add_ge(LinearExpr::var(var)); }

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json expr_json(const LinearExpr& e) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [v, c] : e.terms) terms.push_back({v, c});
  return {{"terms", terms}, {"constant", e.constant}};
}

}  // namespace

void ConicProgram::dump_json(const std::string& path) const {
  nlohmann::json j;
  j["num_vars"] = num_vars_;
  j["objective"] = std::vector<double>(objective_.data(), objective_.data() + objective_.size());
  j["objective_constant"] = objective_constant;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& blk : lmis_) {
    nlohmann::json b;
    b["size"] = blk.size();
    b["F0"] = matrix_json(blk.constant());
    // Expand every coefficient to a dense matrix in the original space.
    std::map<int, Matrix> dense;
    for (const auto& e : blk.entries()) {
      Matrix c = Matrix::Zero(blk.basis_dim(e.basis), blk.basis_dim(e.basis));
      c(e.row, e.col) += e.value;
      if (e.row != e.col) c(e.col, e.row) += e.value;
      Matrix full = e.basis == LmiBlock::kIdentity
                        ? c
                        : Matrix(blk.basis(e.basis) * c * blk.basis(e.basis).transpose());
      auto [it, inserted] = dense.try_emplace(e.var, Matrix::Zero(blk.size(), blk.size()));
      it->second += full;
    }
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& [var, m] : dense) coeffs.push_back({{"var", var}, {"F", matrix_json(m)}});
    b["coefficients"] = coeffs;
    blocks.push_back(std::move(b));
  }
  j["lmi_blocks"] = blocks;
  nlohmann::json socs = nlohmann::json::array();
  for (const auto& s : socs_) {
    nlohmann::json tail = nlohmann::json::array();
    for (const auto& t : s.tail) tail.push_back(expr_json(t));
    socs.push_back({{"head", expr_json(s.head)}, {"tail", tail}});
  }
  j["soc"] = socs;
  nlohmann::json ineq = nlohmann::json::array();
  for (const auto& e : inequalities_) ineq.push_back(expr_json(e));
  j["inequalities_ge_zero"] = ineq;
  nlohmann::json eq = nlohmann::json::array();
  for (const auto& e : equalities_) eq.push_back(expr_json(e));
  j["equalities"] = eq;
  std::ofstream out(path);
  if (!out) throw DomainError("cannot open " + path + " for writing");
  out << std::setprecision(17) << j.dump(1) << '\n';
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInaccurate:
      return "optimal_inaccurate";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kUnbounded:
      return "unbounded";
    case SolveStatus::kMaxIter:
      return "max_iter";
  }
  return "unknown";
}

SolverOptions SolverOptions::from_env() {
  SolverOptions opts;
  if (const char* env = std::getenv("ESTIMATOR_SOLVER_TOL")) {
    char* end = nullptr;
    const double tol = std::strtod(env, &end);
    if (end != env && tol > 0.0) {
      opts.tol_gap = tol;
      opts.tol_feas = tol;
    }
  }
  return opts;
}

}  // namespace nearopt
