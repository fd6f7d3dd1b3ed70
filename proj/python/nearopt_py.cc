#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nearopt/estimator.h"
#include "nearopt/experiments.h"
#include "nearopt/io.h"
#include "nearopt/lower_bound.h"
#include "nearopt/robust.h"
#include "nearopt/s_risk.h"
#include "nearopt/sdp_relaxation.h"

namespace py = pybind11;
using namespace nearopt;

namespace {

SolverOptions options(py::object tol) {
  SolverOptions o = SolverOptions::from_env();
  if (!tol.is_none()) o.tol_gap = o.tol_feas = tol.cast<double>();
  return o;
}

EstimationProblem problem(const Matrix& A, const Matrix& B, double sigma, const Ellitope& ell) {
  EstimationProblem p{A, B, sigma, ell};
  p.validate();
  return p;
}

}  // namespace

PYBIND11_MODULE(_nearopt, m) {
  m.doc() = "Linear estimation over ellitopes with near-optimality certificates";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<TSet>(m, "TSet")
      .def_static("unit_segment", &TSet::unit_segment)
      .def_static("unit_box", &TSet::unit_box, py::arg("K"))
      .def_static("pnorm_ball", &TSet::pnorm_ball, py::arg("K"), py::arg("p"))
      .def_static("product", &TSet::product, py::arg("parts"))
      .def_property_readonly("K", &TSet::K)
      .def("contains", &TSet::contains, py::arg("g"), py::arg("tol") = 0.0)
      .def("support", &TSet::support, py::arg("lam"))
      .def("__repr__", &TSet::describe);

  py::class_<Ellitope>(m, "Ellitope")
      .def(py::init<std::vector<Matrix>, TSet>(), py::arg("S"), py::arg("tset"))
      .def_static("ellipsoid", &Ellitope::ellipsoid, py::arg("S"))
      .def_static("box", &Ellitope::box, py::arg("a"))
      .def_property_readonly("n", &Ellitope::n)
      .def_property_readonly("K", &Ellitope::K)
      .def_property_readonly("S", &Ellitope::S)
      .def_property_readonly("tset", &Ellitope::tset)
      .def("contains", &Ellitope::contains, py::arg("x"), py::arg("tol") = 1e-9)
      .def("gauge", &Ellitope::gauge, py::arg("x"));

  m.def(
      "load_ellitope",
      [](const std::string& path) {
        const RawEllitope raw = read_ellitope(path);
        require(raw.P.isIdentity(), "load_ellitope: descriptors with an injection P are not supported here");
        return raw.core;
      },
      py::arg("path"));

  py::class_<LinearEstimate>(m, "LinearEstimate")
      .def_readonly("H", &LinearEstimate::H)
      .def_readonly("lam", &LinearEstimate::lam)
      .def_readonly("opt", &LinearEstimate::opt)
      .def_readonly("risk_bound", &LinearEstimate::risk_bound)
      .def_property_readonly("status", [](const LinearEstimate& e) { return to_string(e.status); })
      .def_readonly("iterations", &LinearEstimate::iterations);

  m.def(
      "estimate",
      [](const Matrix& A, const Matrix& B, double sigma, const Ellitope& ell, py::object tol) {
        return build_linear_estimate(problem(A, B, sigma, ell), options(tol));
      },
      py::arg("A"), py::arg("B"), py::arg("sigma"), py::arg("ell"), py::arg("tol") = py::none());

  m.def(
      "bayesian_value",
      [](const Matrix& A, const Matrix& B, double sigma, const Ellitope& ell, py::object tol) {
        return solve_bayesian_sdp(problem(A, B, sigma, ell), options(tol)).opt_star;
      },
      py::arg("A"), py::arg("B"), py::arg("sigma"), py::arg("ell"), py::arg("tol") = py::none());

  m.def(
      "m_star", [](const Matrix& B, const Ellitope& ell, py::object tol) { return m_star(B, ell, options(tol)); },
      py::arg("B"), py::arg("ell"), py::arg("tol") = py::none());

  py::class_<LowerBoundReport>(m, "LowerBoundReport")
      .def_property_readonly("method", [](const LowerBoundReport& r) { return to_string(r.method); })
      .def_readonly("lb", &LowerBoundReport::lb)
      .def_readonly("upper", &LowerBoundReport::upper)
      .def_readonly("rho", &LowerBoundReport::rho)
      .def_readonly("delta", &LowerBoundReport::delta)
      .def_readonly("delta_refined", &LowerBoundReport::delta_refined)
      .def_readonly("factor_numeric", &LowerBoundReport::factor_numeric)
      .def_readonly("factor_computable", &LowerBoundReport::factor_computable);

  m.def("lower_bound_rho_family", &lower_bound_rho_family, py::arg("opt"), py::arg("mstar"), py::arg("K"),
        py::arg("rho_grid") = default_rho_grid());

  m.def(
      "refined_lower_bound",
      [](const Matrix& A, const Matrix& B, double sigma, const Ellitope& ell, const std::string& method,
         const std::vector<double>& deltas, py::object tol) {
        const EstimationProblem p = problem(A, B, sigma, ell);
        const SolverOptions o = options(tol);
        const double opt = build_linear_estimate(p, o).opt;
        return best_refined_lower_bound(p, lower_bound_method_from_string(method), opt, m_star(B, ell, o), deltas,
                                        o);
      },
      py::arg("A"), py::arg("B"), py::arg("sigma"), py::arg("ell"), py::arg("method"),
      py::arg("deltas") = default_delta_grid(), py::arg("tol") = py::none());

  py::class_<SRiskEstimate>(m, "SRiskEstimate")
      .def_readonly("H", &SRiskEstimate::H)
      .def_readonly("lam", &SRiskEstimate::lam)
      .def_readonly("tau", &SRiskEstimate::tau)
      .def_readonly("srisk_bound", &SRiskEstimate::srisk_bound)
      .def_property_readonly("status", [](const SRiskEstimate& e) { return to_string(e.status); });

  m.def(
      "srisk_estimate",
      [](const Matrix& A, const Matrix& B, double sigma, const Ellitope& ell, const Matrix& S, py::object tol) {
        const SRiskProblem sp{problem(A, B, sigma, ell), S};
        return build_srisk_estimate(sp, options(tol));
      },
      py::arg("A"), py::arg("B"), py::arg("sigma"), py::arg("ell"), py::arg("S"), py::arg("tol") = py::none());

  py::class_<WholeSpaceEstimate>(m, "WholeSpaceEstimate")
      .def_readonly("feasible", &WholeSpaceEstimate::feasible)
      .def_readonly("estimate", &WholeSpaceEstimate::est)
      .def_readonly("dual_value", &WholeSpaceEstimate::dual_value)
      .def_readonly("certificate_gap", &WholeSpaceEstimate::certificate_gap);

  m.def(
      "whole_space_estimate",
      [](const Matrix& A, const Matrix& B, double sigma, const Matrix& S, py::object tol) {
        return whole_space_estimate(A, B, sigma, S, options(tol));
      },
      py::arg("A"), py::arg("B"), py::arg("sigma"), py::arg("S"), py::arg("tol") = py::none());

  py::class_<SOptimization>(m, "SOptimization")
      .def_readonly("S", &SOptimization::S)
      .def_readonly("H", &SOptimization::H)
      .def_readonly("tau", &SOptimization::tau)
      .def_readonly("tau_lo", &SOptimization::tau_lo)
      .def_readonly("S_eigenvalues", &SOptimization::S_eigenvalues)
      .def_readonly("bayesian_risk", &SOptimization::bayesian_risk);

  m.def(
      "optimize_S",
      [](const Matrix& A, const Matrix& B, double sigma, double trace_cap, double tol_tau, py::object tol) {
        return optimize_S_bisection(A, B, sigma, trace_cap, tol_tau, options(tol));
      },
      py::arg("A"), py::arg("B"), py::arg("sigma"), py::arg("trace_cap") = 1.0, py::arg("tol_tau") = 1e-7,
      py::arg("tol") = py::none());

  py::class_<RobustEstimate>(m, "RobustEstimate")
      .def_readonly("feasible", &RobustEstimate::feasible)
      .def_readonly("H", &RobustEstimate::H)
      .def_readonly("lam", &RobustEstimate::lam)
      .def_readonly("mu", &RobustEstimate::mu)
      .def_readonly("rob_opt", &RobustEstimate::rob_opt)
      .def_property_readonly("status", [](const RobustEstimate& e) { return to_string(e.status); });

  m.def(
      "robust_estimate",
      [](const Matrix& A, const Matrix& B, const Matrix& E, const Matrix& F, double r, double sigma, const Matrix& S,
         const Ellitope& ell, py::object tol) {
        const UncertaintyModel um{A, B, E, F, r};
        return build_robust_estimate(um, sigma, S, ell, options(tol));
      },
      py::arg("A"), py::arg("B"), py::arg("E"), py::arg("F"), py::arg("r"), py::arg("sigma"), py::arg("S"),
      py::arg("ell"), py::arg("tol") = py::none());

  py::class_<RelaxationResult>(m, "RelaxationResult")
      .def_readonly("opt", &RelaxationResult::opt)
      .def_readonly("dual_opt", &RelaxationResult::dual_opt)
      .def_readonly("Q", &RelaxationResult::Q_star)
      .def_readonly("t", &RelaxationResult::t_star)
      .def_readonly("lam", &RelaxationResult::lam_star);

  m.def(
      "relax_quadratic_max",
      [](const Matrix& C, const Ellitope& ell, py::object tol) { return relax_quadratic_max(C, ell, options(tol)); },
      py::arg("C"), py::arg("ell"), py::arg("tol") = py::none());

  py::class_<RoundingResult>(m, "RoundingResult")
      .def_readonly("x_hat", &RoundingResult::x_hat)
      .def_readonly("val_hat", &RoundingResult::val_hat)
      .def_readonly("trials_used", &RoundingResult::trials_used)
      .def_readonly("accepted", &RoundingResult::accepted);

  m.def("round_rademacher", &round_rademacher, py::arg("C"), py::arg("ell"), py::arg("Q"), py::arg("t"),
        py::arg("seed"), py::arg("budget") = 200);
  m.def("rounding_factor", &rounding_factor, py::arg("K"));

  m.def("gen_random_rotated_A", &gen_random_rotated_A, py::arg("n"), py::arg("seed"), py::arg("lam_max") = 1.0,
        py::arg("lam_min") = 0.01);
  m.def("read_csv", &read_csv, py::arg("path"));
  m.def("write_csv", &write_csv, py::arg("path"), py::arg("matrix"));
}
