#pragma once

#include <cstdint>

#include "nearopt/conic_solver.h"
#include "nearopt/ellitope.h"

namespace nearopt {

struct RelaxationResult {
  double opt = 0.0;       // max Tr(CQ) over Q >= 0, Tr(Q S_k) <= t_k, t in T
  double dual_opt = 0.0;  // min phi_T(lam) over sum lam_k S_k >= C, lam >= 0
  Matrix Q_star;
  Vector t_star;
  Vector lam_star;
  bool symmetrized = false;  // C was not symmetric on input
};

/// Upper bound on max x^T C x over the ellitope. Throws SolverError if primal and dual values differ by
/// more than 1e-6 relative.
RelaxationResult relax_quadratic_max(const Matrix& C, const Ellitope& ell,
                                     const SolverOptions& opts = SolverOptions::from_env());

/// 4 ln(5K)
double rounding_factor(int K);

struct RoundingResult {
  Vector x_hat;           // rescaled to the boundary of the ellitope
  double val_hat = 0.0;   // x_hat^T C x_hat
  double val_unscaled = 0.0;
  double scale = 1.0;     // boundary multiplier, >= 1 for an accepted point
  int trials_used = 0;
  bool accepted = false;  // false: budget exhausted, x_hat is the last candidate pushed to the boundary
};

/// y = R U xi / sqrt(4 ln(5K)) with R = Q^{1/2}, R C R = U D U^T and Rademacher xi; the first y with
/// y^T S_k y <= t_k for all k is accepted and rescaled to the boundary.
RoundingResult round_rademacher(const Matrix& C, const Ellitope& ell, const Matrix& Q_star, const Vector& t_star,
                                std::uint64_t seed, int budget = 200);

struct MomentCheck {
  double mc_estimate = 0.0;  // mean of exp(xi^T S xi / 4)
  double se = 0.0;
  bool pass = false;  // mc_estimate <= 3 sqrt(2) + 4 se
};

MomentCheck check_rademacher_moment(const Matrix& S_unit_trace, int N, std::uint64_t seed);

/// max x^T C x over the vertices of {|a_i x_i| <= 1}; exact for PSD C. Exponential in n.
double brute_force_box_max(const Matrix& C, const Vector& a);

}  // namespace nearopt
