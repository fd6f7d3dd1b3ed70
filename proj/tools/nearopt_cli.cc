#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "nearopt/estimator.h"
#include "nearopt/experiments.h"
#include "nearopt/io.h"
#include "nearopt/lower_bound.h"
#include "nearopt/robust.h"
#include "nearopt/s_risk.h"
#include "nearopt/sdp_relaxation.h"

using namespace nearopt;
using json = nlohmann::ordered_json;

namespace {

// Exit codes
constexpr int kOk = 0;
constexpr int kInvariantFailure = 1;
constexpr int kBadInput = 2;
constexpr int kSolverFailure = 3;

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void emit(const json& report, const std::string& path) {
  const std::string text = report.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw DomainError("cannot write " + path);
  f << text;
}

// Canonical problem: the signal x = P y with y in the core ellitope.
EstimationProblem load_problem(const std::string& a, const std::string& b, const std::string& ell, double sigma) {
  const CanonicalProblem c = canonicalize(read_ellitope(ell), read_csv(a), read_csv(b));
  EstimationProblem p{c.A, c.B, sigma, c.ell};
  p.validate();
  return p;
}

json lower_bound_json(const LowerBoundReport& r) {
  return {{"method", to_string(r.method)},
          {"lb", r.lb},
          {"upper", r.upper},
          {"rho", finite_or_null(r.rho)},
          {"delta", finite_or_null(r.delta)},
          {"delta_refined", finite_or_null(r.delta_refined)},
          {"opt_delta", finite_or_null(r.opt_delta)},
          {"factor_numeric", finite_or_null(r.factor_numeric)},
          {"factor_theoretical", r.factor_computable}};
}

struct Common {
  std::string report;
  std::string dump;
};

void add_common(CLI::App* app, Common& c, bool dump) {
  app->add_option("-o,--report", c.report, "JSON report path (default: stdout)");
  if (dump) app->add_option("--dump-program", c.dump, "Write the conic program as JSON");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-optimal linear estimation over ellitopes"};
  app.require_subcommand(1);
  Common common;

  // estimate
  std::string a_csv, b_csv, ell_json, h_out;
  double sigma = 0.0;
  auto* est = app.add_subcommand("estimate", "Minimax linear estimate");
  est->add_option("A", a_csv, "Sensing matrix CSV")->required()->check(CLI::ExistingFile);
  est->add_option("B", b_csv, "Target matrix CSV")->required()->check(CLI::ExistingFile);
  est->add_option("ellitope", ell_json, "Ellitope descriptor JSON")->required()->check(CLI::ExistingFile);
  est->add_option("--sigma", sigma, "Noise level")->required();
  est->add_option("--H-out", h_out, "Write the estimate matrix H as CSV");
  add_common(est, common, true);

  // lower-bound
  std::string method = "all";
  std::vector<double> deltas, rhos;
  auto* lb = app.add_subcommand("lower-bound", "Lower bounds on the minimax risk");
  lb->add_option("A", a_csv, "Sensing matrix CSV")->required()->check(CLI::ExistingFile);
  lb->add_option("B", b_csv, "Target matrix CSV")->required()->check(CLI::ExistingFile);
  lb->add_option("ellitope", ell_json, "Ellitope descriptor JSON")->required()->check(CLI::ExistingFile);
  lb->add_option("--sigma", sigma, "Noise level")->required();
  lb->add_option("--method", method, "rho_family|contraction|quadratic_approx|parallelotope|all");
  lb->add_option("--delta", deltas, "Delta values for refined bounds")->delimiter(',');
  lb->add_option("--rho-grid", rhos, "Rho grid for the rho family")->delimiter(',');
  add_common(lb, common, false);

  // srisk
  std::string s_csv;
  bool whole_space = false, optimize_s = false;
  double trace_cap = 1.0, tol_tau = 1e-7;
  auto* sr = app.add_subcommand("srisk", "Risk relative to 1 + x^T S x");
  sr->add_option("A", a_csv, "Sensing matrix CSV")->required()->check(CLI::ExistingFile);
  sr->add_option("B", b_csv, "Target matrix CSV")->required()->check(CLI::ExistingFile);
  sr->add_option("ellitope", ell_json, "Ellitope descriptor (omit with --whole-space or --optimize-S)")
      ->check(CLI::ExistingFile);
  sr->add_option("--sigma", sigma, "Noise level")->required();
  sr->add_option("--S", s_csv, "S matrix CSV")->check(CLI::ExistingFile);
  sr->add_flag("--whole-space", whole_space, "Signal set is the whole space");
  sr->add_flag("--optimize-S", optimize_s, "Optimise S over Tr(S) <= trace cap (whole space)");
  sr->add_option("--trace-cap", trace_cap, "Trace cap for --optimize-S");
  sr->add_option("--tol-tau", tol_tau, "Bisection tolerance for --optimize-S");
  add_common(sr, common, true);

  // robust
  std::string e_csv, f_csv;
  double radius = 0.0;
  int samples = 1000;
  std::uint64_t seed = 1;
  auto* rb = app.add_subcommand("robust", "Estimate robust to [A; B] = nominal + E^T Delta F, |Delta| <= r");
  rb->add_option("A", a_csv, "Nominal A")->required()->check(CLI::ExistingFile);
  rb->add_option("B", b_csv, "Nominal B")->required()->check(CLI::ExistingFile);
  rb->add_option("E", e_csv, "Left uncertainty factor CSV, p x (m + nu)")->required()->check(CLI::ExistingFile);
  rb->add_option("F", f_csv, "Right uncertainty factor CSV, q x n")->required()->check(CLI::ExistingFile);
  rb->add_option("ellitope", ell_json, "Ellitope descriptor JSON")->required()->check(CLI::ExistingFile);
  rb->add_option("--sigma", sigma, "Noise level")->required();
  rb->add_option("--radius", radius, "Uncertainty radius r")->required();
  rb->add_option("--S", s_csv, "Optional S matrix CSV")->check(CLI::ExistingFile);
  rb->add_option("--samples", samples, "Sampled perturbations for the feasibility check");
  rb->add_option("--seed", seed, "Seed for the sampled check");
  add_common(rb, common, false);

  // sdprelax
  std::string c_csv;
  int budget = 200;
  auto* sd = app.add_subcommand("sdprelax", "Relaxation bound and rounding for max x^T C x");
  sd->add_option("C", c_csv, "Symmetric objective matrix CSV")->required()->check(CLI::ExistingFile);
  sd->add_option("ellitope", ell_json, "Ellitope descriptor JSON")->required()->check(CLI::ExistingFile);
  sd->add_option("--seed", seed, "Rounding seed");
  sd->add_option("--budget", budget, "Rounding trials");
  add_common(sd, common, false);

  // experiment
  std::string scenario, out_dir = ".";
  std::vector<int> n_grid, k_grid;
  std::vector<double> sigma_grid, delta_grid;
  int horizon = 32;
  auto* ex = app.add_subcommand("experiment", "Suboptimality and pendulum experiments");
  ex->add_option("scenario", scenario, "ellipsoid|box|pendulum")
      ->required()
      ->check(CLI::IsMember({"ellipsoid", "box", "pendulum"}));
  ex->add_option("--n", n_grid, "Dimensions")->delimiter(',');
  ex->add_option("--sigma-grid", sigma_grid, "Noise levels")->delimiter(',');
  ex->add_option("--delta-grid", delta_grid, "Deltas for refined bounds")->delimiter(',');
  ex->add_option("--seed", seed, "Instance seed");
  ex->add_option("--T", horizon, "Pendulum horizon");
  ex->add_option("--K-grid", k_grid, "Pendulum input-block sizes")->delimiter(',');
  ex->add_option("--trace-cap", trace_cap, "Pendulum trace cap");
  ex->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kBadInput;  // --help exits 0
  }

  try {
    const SolverOptions opts = SolverOptions::from_env();
    if (*est) {
      const EstimationProblem p = load_problem(a_csv, b_csv, ell_json, sigma);
      const LinearEstimate e = build_linear_estimate(p, opts, common.dump);
      if (!h_out.empty()) write_csv(h_out, e.H);
      emit({{"opt", e.opt},
            {"risk_bound", e.risk_bound},
            {"lambda", vec_json(e.lam)},
            {"residuals", {{"lmi", e.lmi_residual}, {"epigraph", e.epigraph_residual}}},
            {"status", to_string(e.status)},
            {"iterations", e.iterations}},
           common.report);
      return kOk;
    }

    if (*lb) {
      const EstimationProblem p = load_problem(a_csv, b_csv, ell_json, sigma);
      const double opt = build_linear_estimate(p, opts).opt;
      const double ms = m_star(p.B, p.ell, opts);
      const int K = p.ell.K();
      std::vector<LowerBoundReport> reps;
      const bool all = method == "all";
      const LowerBoundMethod only = all ? LowerBoundMethod::kRhoFamily : lower_bound_method_from_string(method);
      if (all || only == LowerBoundMethod::kRhoFamily)
        reps.push_back(lower_bound_rho_family(opt, ms, K, rhos.empty() ? default_rho_grid() : rhos));
      const std::vector<double> dg = deltas.empty() ? default_delta_grid() : deltas;
      for (auto m : {LowerBoundMethod::kContractionSet, LowerBoundMethod::kQuadraticApprox,
                     LowerBoundMethod::kParallelotope}) {
        if (!all && m != only) continue;
        try {
          reps.push_back(best_refined_lower_bound(p, m, opt, ms, dg, opts));
        } catch (const DomainError&) {
          if (!all) throw;  // method not applicable to this ellitope
        }
      }
      json out = {{"opt", opt}, {"upper", std::sqrt(opt)}, {"mstar", ms}};
      out["factor_computable"] = near_optimality_factor(opt, ms, K).factor_computable;
      json arr = json::array();
      double best = 0.0;
      for (const auto& r : reps) {
        arr.push_back(lower_bound_json(r));
        best = std::max(best, r.lb);
      }
      out["reports"] = arr;
      out["lb_best"] = best;
      emit(out, common.report);
      return kOk;
    }

    if (*sr) {
      const Matrix A = read_csv(a_csv), B = read_csv(b_csv);
      json out;
      if (optimize_s) {
        const SOptimization so = optimize_S_bisection(A, B, sigma, trace_cap, tol_tau, opts);
        out = {{"tau", so.tau},
               {"srisk_bound", std::sqrt(so.tau)},
               {"S_eigenvalues", vec_json(so.S_eigenvalues)},
               {"tau_lo", so.tau_lo},
               {"bayesian_risk", so.bayesian_risk},
               {"iterations", so.iterations}};
      } else {
        if (s_csv.empty()) throw DomainError("srisk: --S is required unless --optimize-S is given");
        const Matrix S = read_csv(s_csv);
        const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(S).eigenvalues().reverse();
        if (whole_space) {
          const WholeSpaceEstimate w = whole_space_estimate(A, B, sigma, S, opts);
          if (!w.feasible) {
            emit({{"feasible", false}, {"status", to_string(w.status)}}, common.report);
            return kSolverFailure;
          }
          out = {{"tau", w.est.tau},
                 {"srisk_bound", w.est.srisk_bound},
                 {"S_eigenvalues", vec_json(eig)},
                 {"certificate_gap", w.certificate_gap}};
        } else {
          if (ell_json.empty()) throw DomainError("srisk: an ellitope is required without --whole-space");
          const EstimationProblem p = load_problem(a_csv, b_csv, ell_json, sigma);
          // S lives in the signal space; pull it back to the core coordinates
          const RawEllitope raw = read_ellitope(ell_json);
          const SRiskEstimate e = build_srisk_estimate({p, raw.P.transpose() * S * raw.P}, opts, common.dump);
          out = {{"tau", e.tau},
                 {"srisk_bound", e.srisk_bound},
                 {"S_eigenvalues", vec_json(eig)},
                 {"residuals", {{"lmi", e.lmi_residual}, {"epigraph", e.epigraph_residual}}}};
        }
      }
      emit(out, common.report);
      return kOk;
    }

    if (*rb) {
      const RawEllitope raw = read_ellitope(ell_json);
      require(raw.P.rows() == raw.P.cols() && raw.P.isIdentity(0.0), "robust: ellitope with an injection P");
      UncertaintyModel um{read_csv(a_csv), read_csv(b_csv), read_csv(e_csv), read_csv(f_csv), radius};
      const Matrix S = s_csv.empty() ? Matrix() : read_csv(s_csv);
      const RobustEstimate r = build_robust_estimate(um, sigma, S, raw.core, opts);
      json out = {{"feasible", r.feasible}, {"status", to_string(r.status)}};
      if (!r.feasible) {
        emit(out, common.report);
        return kSolverFailure;
      }
      out["rob_opt"] = r.rob_opt;
      out["mu"] = r.mu;
      out["feasible_fraction"] = verify_robust_feasibility(r.H, r.lam, r.rob_opt, um, S, raw.core, samples, seed);
      emit(out, common.report);
      return kOk;
    }

    if (*sd) {
      const RawEllitope raw = read_ellitope(ell_json);
      const Matrix C = read_csv(c_csv);
      require(C.rows() == raw.n() && C.cols() == raw.n(), "sdprelax: C must be n x n");
      const Matrix Cc = raw.P.transpose() * C * raw.P;
      const RelaxationResult rel = relax_quadratic_max(Cc, raw.core, opts);
      const RoundingResult rr = round_rademacher(Cc, raw.core, rel.Q_star, rel.t_star, seed, budget);
      const double bound = rounding_factor(raw.core.K());
      emit({{"opt", rel.opt},
            {"val_hat", rr.val_hat},
            {"ratio", rr.val_hat > 0.0 ? json(rel.opt / rr.val_hat) : json(nullptr)},
            {"factor_bound", bound},
            {"x_hat", vec_json(raw.P * rr.x_hat)},
            {"accepted", rr.accepted},
            {"trials_used", rr.trials_used}},
           common.report);
      return kOk;
    }

    if (*ex) {
      std::filesystem::create_directories(out_dir);
      const std::filesystem::path dir(out_dir);
      std::vector<std::string> bad;
      if (scenario == "pendulum") {
        PendulumConfig cfg;
        cfg.params.T = horizon;
        if (!k_grid.empty()) cfg.K_grid = k_grid;
        cfg.trace_cap = trace_cap;
        cfg.solver = opts;
        const auto recs = run_pendulum_experiment(cfg);
        write_pendulum_csv((dir / "pendulum.csv").string(), recs);
        write_pendulum_json((dir / "pendulum.json").string(), cfg, recs);
        bad = check_pendulum_invariants(recs, cfg.tol_tau);
      } else {
        ScenarioConfig cfg;
        cfg.scenario = scenario_from_string(scenario);
        if (!n_grid.empty()) cfg.n_grid = n_grid;
        if (!sigma_grid.empty()) cfg.sigma_grid = sigma_grid;
        if (!delta_grid.empty()) cfg.delta_grid = delta_grid;
        cfg.seed = seed;
        cfg.solver = opts;
        const auto recs = run_suboptimality_experiment(cfg);
        write_records_csv((dir / (scenario + ".csv")).string(), recs);
        write_records_json((dir / (scenario + ".json")).string(), cfg, recs);
        bad = check_suboptimality_invariants(recs);
      }
      for (const auto& b : bad) std::cerr << "invariant violated: " << b << '\n';
      return bad.empty() ? kOk : kInvariantFailure;
    }
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
  return kOk;
}
