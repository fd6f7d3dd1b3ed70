#include "nearopt/experiments.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "nearopt/linalg.h"
#include "nearopt/lower_bound.h"
#include "nearopt/s_risk.h"

namespace nearopt {

using json = nlohmann::ordered_json;

Matrix gen_random_rotated_A(int n, std::uint64_t seed, double lam_max, double lam_min) {
  require(n >= 2, "gen_random_rotated_A: n must be at least 2");
  require(lam_max > 0.0 && lam_min > 0.0, "gen_random_rotated_A: singular values must be positive");
  Rng rng = make_rng(seed, 0xa11ce);
  const Matrix U = haar_orthogonal(n, rng);
  const Matrix V = haar_orthogonal(n, rng);
  Vector lam(n);
  for (int j = 0; j < n; ++j) lam(j) = lam_max * std::pow(lam_min / lam_max, static_cast<double>(j) / (n - 1));
  return U * lam.asDiagonal() * V.transpose();
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kEllipsoid: return "ellipsoid";
    case Scenario::kBox: return "box";
    case Scenario::kPendulum: return "pendulum";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
  for (auto s : {Scenario::kEllipsoid, Scenario::kBox, Scenario::kPendulum})
    if (to_string(s) == name) return s;
  throw DomainError("unknown scenario '" + name + "'");
}

std::vector<double> default_sigma_grid() {
  std::vector<double> g;
  for (int i = 0; i < 8; ++i) g.push_back(std::pow(10.0, -3.0 + 3.0 * i / 7.0));
  return g;
}

std::vector<int> default_n_grid() { return {8, 16, 32, 64}; }

EstimationProblem suboptimality_instance(Scenario s, int n, double sigma, std::uint64_t seed) {
  require(s != Scenario::kPendulum, "suboptimality_instance: ellipsoid or box only");
  // A depends on (seed, n) only, so a sigma sweep shares one sensing matrix
  const Matrix A = gen_random_rotated_A(n, seed * 1000003ULL + static_cast<std::uint64_t>(n));
  const Matrix B = Matrix::Identity(n, n);
  Vector j(n);
  for (int i = 0; i < n; ++i) j(i) = i + 1;
  if (s == Scenario::kEllipsoid) return {A, B, sigma, Ellitope::ellipsoid(Matrix(j.array().square().matrix().asDiagonal()))};
  return {A, B, sigma, Ellitope::box(j)};
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw DomainError("cannot open '" + path + "' for writing");
  f << text;
}

const std::vector<std::string>& methods_for(Scenario s) {
  static const std::vector<std::string> ell{"rho_family", "contraction", "quadratic_approx"};
  static const std::vector<std::string> box{"rho_family", "parallelotope"};
  return s == Scenario::kEllipsoid ? ell : box;
}

}  // namespace

std::vector<ExperimentRecord> run_suboptimality_experiment(const ScenarioConfig& cfg) {
  require(cfg.scenario != Scenario::kPendulum, "run_suboptimality_experiment: use run_pendulum_experiment");
  require(!cfg.n_grid.empty() && !cfg.sigma_grid.empty(), "experiment grids must be nonempty");
  for (double s : cfg.sigma_grid) require(s > 0.0, "sigma grid entries must be positive");
  std::vector<ExperimentRecord> out;
  for (int n : cfg.n_grid) {
    double mstar = std::numeric_limits<double>::quiet_NaN();
    for (double sigma : cfg.sigma_grid) {
      const auto t0 = std::chrono::steady_clock::now();
      ExperimentRecord rec;
      rec.scenario = to_string(cfg.scenario);
      rec.n = n;
      rec.sigma = sigma;
      rec.seed = cfg.seed;
      try {
        const EstimationProblem p = suboptimality_instance(cfg.scenario, n, sigma, cfg.seed);
        if (std::isnan(mstar)) mstar = m_star(p.B, p.ell, cfg.solver);
        rec.mstar = mstar;
        const double opt = build_linear_estimate(p, cfg.solver).opt;
        rec.opt_upper = std::sqrt(std::max(0.0, opt));
        const int K = p.ell.K();
        rec.lb_by_method["rho_family"] = lower_bound_rho_family(opt, mstar, K).lb;
        for (const auto& name : methods_for(cfg.scenario)) {
          if (name == "rho_family") continue;
          const LowerBoundMethod m = lower_bound_method_from_string(name);
          rec.lb_by_method[name] = best_refined_lower_bound(p, m, opt, mstar, cfg.delta_grid, cfg.solver).lb;
        }
        for (const auto& [name, lb] : rec.lb_by_method) rec.lb_best = std::max(rec.lb_best, lb);
        rec.factor_numeric =
            rec.lb_best > 0.0 ? rec.opt_upper / rec.lb_best : std::numeric_limits<double>::infinity();
        const NearOptimalityFactor f = near_optimality_factor(opt, mstar, K);
        rec.factor_computable = f.factor_computable;
        rec.factor_computable_sq = f.factor_computable_sq;
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      rec.wall_time_ms = elapsed_ms(t0);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<std::string> check_suboptimality_invariants(const std::vector<ExperimentRecord>& records) {
  std::vector<std::string> bad;
  for (const auto& r : records) {
    const std::string where = r.scenario + " n=" + std::to_string(r.n) + " sigma=" + fmt(r.sigma);
    if (!r.error.empty()) {
      bad.push_back(where + ": " + r.error);
      continue;
    }
    for (const auto& [name, lb] : r.lb_by_method)
      if (!(lb <= r.opt_upper * (1.0 + 1e-9)))
        bad.push_back(where + ": " + name + " lower bound " + fmt(lb) + " exceeds " + fmt(r.opt_upper));
  }
  return bad;
}

void write_records_csv(const std::string& path, const std::vector<ExperimentRecord>& records) {
  std::vector<std::string> methods;
  for (const auto& r : records)
    for (const auto& [name, lb] : r.lb_by_method)
      if (std::find(methods.begin(), methods.end(), name) == methods.end()) methods.push_back(name);
  std::sort(methods.begin(), methods.end());
  std::ostringstream os;
  os << "scenario,n,sigma,seed,opt_upper,mstar";
  for (const auto& m : methods) os << ",lb_" << m;
  os << ",lb_best,factor_numeric,factor_computable,factor_computable_sq,error\n";
  for (const auto& r : records) {
    os << r.scenario << ',' << r.n << ',' << fmt(r.sigma) << ',' << r.seed << ',' << fmt(r.opt_upper) << ','
       << fmt(r.mstar);
    for (const auto& m : methods) {
      const auto it = r.lb_by_method.find(m);
      os << ',' << (it == r.lb_by_method.end() ? "" : fmt(it->second));
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << ',' << fmt(r.lb_best) << ',' << fmt(r.factor_numeric) << ',' << fmt(r.factor_computable) << ','
       << fmt(r.factor_computable_sq) << ',' << err << '\n';
  }
  write_text(path, os.str());
}

namespace {

json solver_json(const SolverOptions& s) {
  return {{"tol_gap", s.tol_gap}, {"tol_feas", s.tol_feas}, {"max_iter", s.max_iter}};
}

json environment_json() {
  json env;
  env["compiler"] = __VERSION__;
  env["cplusplus"] = static_cast<long>(__cplusplus);
  env["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
  const char* tol = std::getenv("ESTIMATOR_SOLVER_TOL");
  env["ESTIMATOR_SOLVER_TOL"] = tol ? tol : "";
  return env;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void write_records_json(const std::string& path, const ScenarioConfig& cfg,
                        const std::vector<ExperimentRecord>& records) {
  json j;
  j["config"] = {{"scenario", to_string(cfg.scenario)},
                 {"n_grid", cfg.n_grid},
                 {"sigma_grid", cfg.sigma_grid},
                 {"seed", cfg.seed},
                 {"delta_grid", cfg.delta_grid},
                 {"solver", solver_json(cfg.solver)}};
  j["environment"] = environment_json();
  json rows = json::array();
  for (const auto& r : records) {
    json row = {{"scenario", r.scenario},
                {"n", r.n},
                {"sigma", r.sigma},
                {"seed", r.seed},
                {"opt_upper", r.opt_upper},
                {"mstar", r.mstar}};
    json lbs = json::object();
    for (const auto& [name, lb] : r.lb_by_method) lbs[name] = lb;
    row["lb_by_method"] = lbs;
    row["lb_best"] = r.lb_best;
    row["factor_numeric"] = finite_or_null(r.factor_numeric);
    row["factor_computable"] = r.factor_computable;
    row["factor_computable_sq"] = r.factor_computable_sq;
    row["wall_time_ms"] = r.wall_time_ms;
    row["error"] = r.error;
    rows.push_back(row);
  }
  j["records"] = rows;
  const std::vector<std::string> bad = check_suboptimality_invariants(records);
  j["invariant_violations"] = bad;
  write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Pendulum

Matrix PendulumProblem::B_last(int K) const {
  const int T = params.T;
  require(K >= 1 && K <= T, "B_last: K must lie in [1, T]");
  Matrix B = Matrix::Zero(K, T + 2);
  for (int i = 0; i < K; ++i) B(i, 2 + (T - K) + i) = 1.0;
  return B;
}

namespace {

double undamped_frequency(const PendulumParams& p) {
  const double wd = p.eigenfreq_in_hz ? 2.0 * M_PI * p.eigenfreq : p.eigenfreq;
  return std::sqrt(wd * wd + 0.25 * p.kappa * p.kappa);
}

}  // namespace

PendulumProblem build_pendulum_problem(const PendulumParams& params) {
  require(params.delta > 0.0 && params.kappa > 0.0 && params.eigenfreq > 0.0 && params.sigma > 0.0,
          "pendulum parameters must be positive");
  require(params.T >= 1, "pendulum horizon must be positive");
  PendulumProblem pp;
  pp.params = params;
  pp.nu = undamped_frequency(params);
  pp.theta = Matrix(2, 2);
  pp.theta << 0.0, 1.0, -pp.nu * pp.nu, -params.kappa;

  // theta has eigenvalues a +- i w; exp(d theta) = e^{a d} [cos(w d) I + sin(w d) / w (theta - a I)]
  const double a = -0.5 * params.kappa;
  const double w2 = pp.nu * pp.nu - a * a;
  require(w2 > 0.0, "pendulum: only the oscillatory regime is supported");
  const double w = std::sqrt(w2);
  const double d = params.delta;
  const Matrix I = Matrix::Identity(2, 2);
  pp.P = std::exp(a * d) * (std::cos(w * d) * I + std::sin(w * d) / w * (pp.theta - a * I));
  Vector e2(2);
  e2 << 0.0, 1.0;
  pp.Q = pp.theta.partialPivLu().solve((pp.P - I) * e2);

  const int T = params.T;
  pp.A = Matrix::Zero(T, T + 2);
  // row t: e1^T (P^t z0 + sum_{s <= t} P^{t-s} Q w_s)
  std::vector<Vector> PkQ(T + 1);
  Matrix Pk = I;
  PkQ[0] = pp.Q;
  for (int k = 1; k <= T; ++k) PkQ[k] = pp.P * PkQ[k - 1];
  for (int t = 1; t <= T; ++t) {
    Pk = pp.P * Pk;
    pp.A.block(t - 1, 0, 1, 2) = Pk.row(0);
    for (int s = 1; s <= t; ++s) pp.A(t - 1, 1 + s) = PkQ[t - s](0);
  }
  for (int t = 1; t <= T; ++t) {
    Matrix B = Matrix::Zero(1, T + 2);
    B(0, 1 + t) = 1.0;
    pp.B_t.push_back(B);
  }
  return pp;
}

Vector simulate_recurrence(const PendulumProblem& pp, const Vector& x) {
  const int T = pp.params.T;
  require(x.size() == T + 2, "simulate_recurrence: x must have T + 2 entries");
  Vector z = x.head(2);
  Vector r(T);
  for (int t = 1; t <= T; ++t) {
    z = pp.P * z + pp.Q * x(1 + t);
    r(t - 1) = z(0);
  }
  return r;
}

Vector simulate_rk4(const PendulumParams& params, const Vector& x, int substeps) {
  const int T = params.T;
  require(x.size() == T + 2, "simulate_rk4: x must have T + 2 entries");
  require(substeps >= 1, "simulate_rk4: substeps must be positive");
  const double nu = undamped_frequency(params);
  const double kappa = params.kappa;
  const double h = params.delta / substeps;
  double r = x(0), v = x(1);
  Vector out(T);
  for (int t = 1; t <= T; ++t) {
    const double w = x(1 + t);
    auto f = [&](double rr, double vv) { return std::pair<double, double>{vv, -nu * nu * rr - kappa * vv + w}; };
    for (int s = 0; s < substeps; ++s) {
      const auto [k1r, k1v] = f(r, v);
      const auto [k2r, k2v] = f(r + 0.5 * h * k1r, v + 0.5 * h * k1v);
      const auto [k3r, k3v] = f(r + 0.5 * h * k2r, v + 0.5 * h * k2v);
      const auto [k4r, k4v] = f(r + h * k3r, v + h * k3v);
      r += h / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r);
      v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    }
    out(t - 1) = r;
  }
  return out;
}

std::vector<PendulumRecord> run_pendulum_experiment(const PendulumConfig& cfg) {
  const PendulumProblem pp = build_pendulum_problem(cfg.params);
  const int T = cfg.params.T;
  const double sigma = cfg.params.sigma;
  const Ellitope ball = Ellitope::ellipsoid(Matrix::Identity(T + 2, T + 2) / (T + 2));

  std::vector<std::pair<std::string, int>> targets;
  for (int t = 1; t <= T; ++t) targets.emplace_back("w_t", t);
  for (int K : cfg.K_grid) targets.emplace_back("w^K", K);

  std::vector<PendulumRecord> out;
  for (const auto& [kind, idx] : targets) {
    const auto t0 = std::chrono::steady_clock::now();
    PendulumRecord rec;
    rec.target = kind;
    rec.index = idx;
    try {
      const Matrix B = kind == "w_t" ? pp.B_t.at(idx - 1) : pp.B_last(idx);
      const double tol = cfg.tol_tau * B.squaredNorm() / cfg.trace_cap;
      const double hint = optimize_S_joint(pp.A, B, sigma, cfg.trace_cap, cfg.solver).tau;
      const SOptimization so = optimize_S_bisection(pp.A, B, sigma, cfg.trace_cap, tol, cfg.solver, hint);
      rec.opt = so.tau;
      rec.tau_lo = so.tau_lo;
      rec.bayesian_risk = so.bayesian_risk;
      rec.S_eigenvalues = so.S_eigenvalues;
      rec.rank_ratio = so.S_eigenvalues(0) > 0.0 ? std::max(0.0, so.S_eigenvalues(1)) / so.S_eigenvalues(0) : 0.0;
      rec.ball_risk = build_linear_estimate({pp.A, B, sigma, ball}, cfg.solver).risk_bound;
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    rec.wall_time_ms = elapsed_ms(t0);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::string> check_pendulum_invariants(const std::vector<PendulumRecord>& records, double tol_tau) {
  std::vector<std::string> bad;
  const PendulumRecord* prev = nullptr;
  for (const auto& r : records) {
    const std::string where = r.target + " " + std::to_string(r.index);
    if (!r.error.empty()) {
      bad.push_back(where + ": " + r.error);
      continue;
    }
    if (r.target == "w_t" && r.rank_ratio > 1e-6)
      bad.push_back(where + ": optimal S is not rank one (ratio " + fmt(r.rank_ratio) + ")");
    if (r.target == "w^K") {
      // the bracket [tau_lo, opt] contains the optimum, so monotonicity is checked on the brackets
      if (prev && r.index > prev->index && r.opt < prev->tau_lo - tol_tau * (1.0 + prev->opt))
        bad.push_back(where + ": Opt decreases in K (" + fmt(r.opt) + " < " + fmt(prev->tau_lo) + ")");
      prev = &r;
    }
  }
  return bad;
}

void write_pendulum_csv(const std::string& path, const std::vector<PendulumRecord>& records) {
  std::ostringstream os;
  os << "target,index,opt,tau_lo,bayesian_risk,ball_risk,s_lambda1,s_lambda2,rank_ratio,error\n";
  for (const auto& r : records) {
    const double l1 = r.S_eigenvalues.size() > 0 ? r.S_eigenvalues(0) : 0.0;
    const double l2 = r.S_eigenvalues.size() > 1 ? r.S_eigenvalues(1) : 0.0;
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    os << r.target << ',' << r.index << ',' << fmt(r.opt) << ',' << fmt(r.tau_lo) << ',' << fmt(r.bayesian_risk)
       << ',' << fmt(r.ball_risk) << ',' << fmt(l1) << ',' << fmt(l2) << ',' << fmt(r.rank_ratio) << ',' << err
       << '\n';
  }
  write_text(path, os.str());
}

void write_pendulum_json(const std::string& path, const PendulumConfig& cfg,
                         const std::vector<PendulumRecord>& records) {
  json j;
  const PendulumParams& p = cfg.params;
  j["config"] = {{"scenario", "pendulum"},
                 {"delta", p.delta},
                 {"kappa", p.kappa},
                 {"eigenfreq", p.eigenfreq},
                 {"eigenfreq_unit", p.eigenfreq_in_hz ? "cycles" : "radians"},
                 {"T", p.T},
                 {"sigma", p.sigma},
                 {"K_grid", cfg.K_grid},
                 {"trace_cap", cfg.trace_cap},
                 {"tol_tau", cfg.tol_tau},
                 {"solver", solver_json(cfg.solver)}};
  j["environment"] = environment_json();
  json rows = json::array();
  for (const auto& r : records) {
    std::vector<double> eig(r.S_eigenvalues.data(), r.S_eigenvalues.data() + r.S_eigenvalues.size());
    rows.push_back({{"target", r.target},
                    {"index", r.index},
                    {"opt", r.opt},
                    {"tau_lo", r.tau_lo},
                    {"bayesian_risk", r.bayesian_risk},
                    {"ball_risk", r.ball_risk},
                    {"S_eigenvalues", eig},
                    {"rank_ratio", r.rank_ratio},
                    {"wall_time_ms", r.wall_time_ms},
                    {"error", r.error}});
  }
  j["records"] = rows;
  j["invariant_violations"] = check_pendulum_invariants(records, cfg.tol_tau);
  write_text(path, j.dump(2) + "\n");
}

}  // namespace nearopt
