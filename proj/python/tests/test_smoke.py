import numpy as np
import pytest

import nearopt


def test_scalar_ellipsoid_matches_closed_form():
    for sigma in (0.1, 1.0, 10.0):
        est = nearopt.estimate(np.eye(1), np.eye(1), sigma, nearopt.Ellitope.ellipsoid(np.eye(1)))
        assert est.opt == pytest.approx(sigma**2 / (1 + sigma**2), abs=1e-6)
        assert est.risk_bound == pytest.approx(np.sqrt(est.opt))


def test_estimate_agrees_with_bayesian_value():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 5))
    B = rng.standard_normal((2, 5))
    ell = nearopt.Ellitope.box(np.arange(1.0, 6.0))
    est = nearopt.estimate(A, B, 0.3, ell)
    assert est.H.shape == (4, 2)
    assert nearopt.bayesian_value(A, B, 0.3, ell) == pytest.approx(est.opt, rel=1e-5)


def test_lower_bound_is_below_upper():
    A = nearopt.gen_random_rotated_A(6, 1)
    ell = nearopt.Ellitope.ellipsoid(np.diag(np.arange(1.0, 7.0) ** 2))
    est = nearopt.estimate(A, np.eye(6), 0.1, ell)
    rep = nearopt.lower_bound_rho_family(est.opt, nearopt.m_star(np.eye(6), ell), ell.K)
    assert 0.0 < rep.lb <= rep.upper
    ref = nearopt.refined_lower_bound(A, np.eye(6), 0.1, ell, "contraction")
    assert ref.lb <= ref.upper


def test_srisk_and_relaxation():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((3, 3))
    ws = nearopt.whole_space_estimate(A, np.eye(3), 0.5, np.eye(3))
    assert ws.feasible
    C = rng.standard_normal((4, 4))
    C = C @ C.T
    ell = nearopt.Ellitope.box(np.ones(4))
    rel = nearopt.relax_quadratic_max(C, ell)
    rnd = nearopt.round_rademacher(C, ell, rel.Q, rel.t, seed=3)
    assert rnd.val_hat <= rel.opt * (1 + 1e-6)


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        nearopt.estimate(np.eye(2), np.eye(3), 0.1, nearopt.Ellitope.ellipsoid(np.eye(2)))
    with pytest.raises(ValueError):
        nearopt.TSet.pnorm_ball(2, 0.5)
