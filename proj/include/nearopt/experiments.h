#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nearopt/conic_solver.h"
#include "nearopt/estimator.h"

namespace nearopt {

/// U diag(lambda) V^T with lambda geometric from lam_max to lam_min and Haar U, V.
Matrix gen_random_rotated_A(int n, std::uint64_t seed, double lam_max = 1.0, double lam_min = 0.01);

enum class Scenario { kEllipsoid, kBox, kPendulum };
std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

/// 8 log-spaced values in [1e-3, 1].
std::vector<double> default_sigma_grid();
std::vector<int> default_n_grid();

struct ScenarioConfig {
  Scenario scenario = Scenario::kEllipsoid;
  std::vector<int> n_grid = default_n_grid();
  std::vector<double> sigma_grid = default_sigma_grid();
  std::uint64_t seed = 1;
  SolverOptions solver = SolverOptions::from_env();
  /// Refined lower bounds are maximised over this delta grid.
  std::vector<double> delta_grid = {0.05, 0.1, 0.15, 0.2};
};

/// Ellipsoid {sum j^2 x_j^2 <= 1} or box {j |x_j| <= 1}, B = I, A from gen_random_rotated_A.
EstimationProblem suboptimality_instance(Scenario s, int n, double sigma, std::uint64_t seed);

struct ExperimentRecord {
  std::string scenario;
  int n = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double opt_upper = 0.0;  // sqrt(Opt)
  double mstar = 0.0;
  std::map<std::string, double> lb_by_method;
  double lb_best = 0.0;
  double factor_numeric = 0.0;        // opt_upper / lb_best
  double factor_computable = 0.0;     // sqrt(12 ln(17 K M_*^2 / Opt))
  double factor_computable_sq = 0.0;  // 12 ln(17 K M_*^2 / Opt)
  double wall_time_ms = 0.0;
  std::string error;  // empty on success
};

std::vector<ExperimentRecord> run_suboptimality_experiment(const ScenarioConfig& cfg);

/// Empty when every row is error-free and satisfies lb <= opt_upper for each method.
std::vector<std::string> check_suboptimality_invariants(const std::vector<ExperimentRecord>& records);

/// Deterministic CSV (no timings); wall times go to the JSON sidecar.
void write_records_csv(const std::string& path, const std::vector<ExperimentRecord>& records);
void write_records_json(const std::string& path, const ScenarioConfig& cfg,
                        const std::vector<ExperimentRecord>& records);

struct PendulumParams {
  double delta = 1.0;       // sampling interval
  double kappa = 0.05;      // friction
  double eigenfreq = 0.125;
  bool eigenfreq_in_hz = true;  // false: eigenfreq is the damped angular frequency
  int T = 32;
  double sigma = 0.075;
};

struct PendulumProblem {
  PendulumParams params;
  double nu = 0.0;  // undamped angular frequency
  Matrix theta;     // 2 x 2 generator
  Matrix P;         // exp(delta theta)
  Vector Q;         // int_0^delta exp(s theta) [0; 1] ds
  Matrix A;         // T x (T + 2), positions r_1..r_T from x = [z_0; w_1; ...; w_T]
  std::vector<Matrix> B_t;  // B_t x = w_t, t = 1..T (stored at index t - 1)
  Matrix B_last(int K) const;  // stacks w_{T-K+1}, ..., w_T
};

PendulumProblem build_pendulum_problem(const PendulumParams& params = {});
/// Positions r_1..r_T by running the recurrence z_t = P z_{t-1} + Q w_t.
Vector simulate_recurrence(const PendulumProblem& pp, const Vector& x);
/// Positions r_1..r_T by RK4 on the continuous dynamics with piecewise-constant input.
Vector simulate_rk4(const PendulumParams& params, const Vector& x, int substeps = 2000);

struct PendulumRecord {
  std::string target;  // "w_t" or "w^K"
  int index = 0;       // t or K
  double opt = 0.0;    // Opt[B] from the S-optimisation
  double tau_lo = 0.0;
  double bayesian_risk = 0.0;  // sqrt(2 Opt[B])
  double ball_risk = 0.0;      // worst-case risk over the ball of radius sqrt(T + 2)
  Vector S_eigenvalues;
  double rank_ratio = 0.0;  // lambda_2 / lambda_1 of S
  double wall_time_ms = 0.0;
  std::string error;
};

struct PendulumConfig {
  PendulumParams params;
  std::vector<int> K_grid = {1, 2, 4, 8, 16, 32};
  double trace_cap = 1.0;
  double tol_tau = 1e-7;  // relative to the initial bracket
  SolverOptions solver = SolverOptions::from_env();
};

std::vector<PendulumRecord> run_pendulum_experiment(const PendulumConfig& cfg);
/// Rank one for every single-input target, Opt[B^(K)] nondecreasing in K, no row errors.
std::vector<std::string> check_pendulum_invariants(const std::vector<PendulumRecord>& records, double tol_tau);
void write_pendulum_csv(const std::string& path, const std::vector<PendulumRecord>& records);
void write_pendulum_json(const std::string& path, const PendulumConfig& cfg,
                         const std::vector<PendulumRecord>& records);

}  // namespace nearopt
