"""Inner solver, proximal certificates, and gradient error bounds."""

import math

import numpy as np
import pytest

from proxsmooth.envelope import GridSpec, exact_envelope_oracle
from proxsmooth.objectives import absolute, double_well, quadratic
from proxsmooth.prox import (
    TIGHT_INNER,
    InnerSolverConfig,
    certify,
    default_mu,
    exact_gradient_bound_factor,
    grad_error_bound_delta,
    grad_error_bound_relative,
    hope_gradient,
    inexact_oracle,
    power_map,
    sg_inner_solve,
    subproblem_value,
)


def _exact_prox_quadratic(p, gamma, x):
    """prox of ||.||^2/2: radial root of gamma*u = (||x||-u)^{p-1}."""
    x = np.atleast_1d(np.asarray(x, float))
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        return np.zeros_like(x)
    lo, hi = 0.0, nx
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gamma * mid < (nx - mid) ** (p - 1.0):
            lo = mid
        else:
            hi = mid
    return (0.5 * (lo + hi) / nx) * x


def test_step_size_schedule():
    cfg = InnerSolverConfig(kind="decaying", alpha0=0.95)
    # first step equals alpha0, not alpha0^0 = 1
    assert cfg.step_size(0) == 0.95
    assert cfg.step_size(1) == 0.95
    assert cfg.step_size(2) == pytest.approx(0.95**2)
    assert cfg.step_size(10) == pytest.approx(0.95**10)
    const = InnerSolverConfig(kind="constant", alpha0=0.2)
    assert all(const.step_size(k) == 0.2 for k in range(5))


def test_inner_config_validation():
    with pytest.raises(ValueError):
        InnerSolverConfig(kind="nope")
    with pytest.raises(ValueError):
        InnerSolverConfig(kind="decaying", alpha0=1.0)
    with pytest.raises(ValueError):
        InnerSolverConfig(kind="constant", alpha0=0.0)
    with pytest.raises(ValueError):
        InnerSolverConfig(max_iters=0)


def test_default_mu_below_ceiling():
    for p in (1.1, 1.25, 1.5, 2.0):
        mu = default_mu(p)
        ceiling = (1.0 / 2.0 ** (2.0 - p)) ** (1.0 / (p - 1.0))
        assert 0.0 < mu < ceiling
        assert mu == pytest.approx(0.9 * ceiling)


def test_power_map_and_gradient_conventions():
    assert np.array_equal(power_map(np.zeros(3), 1.5), np.zeros(3))
    v = np.array([3.0, 4.0])
    out = power_map(v, 1.5)
    assert np.allclose(out, 5.0 ** (-0.5) * v)
    # gradient is zero exactly at y = x
    g = hope_gradient(1.5, 0.7, np.array([1.0, 2.0]), np.array([1.0, 2.0]))
    assert np.array_equal(g, np.zeros(2))


def test_quadratic_prox_closed_form_p2():
    f = quadratic(1)
    for gamma in (0.3, 1.0):
        for x0 in (-2.0, 0.5, 3.0):
            cert = sg_inner_solve(f, 2.0, gamma, np.array([x0]), TIGHT_INNER)
            assert cert.y_eps[0] == pytest.approx(x0 / (1.0 + gamma), abs=1e-7)
            # envelope value x^2 / (2 (1+gamma))
            assert cert.value == pytest.approx(x0 * x0 / (2 * (1 + gamma)), abs=1e-12)


def test_inner_solver_stationary_stop():
    # starting exactly at a subproblem-stationary point stops at once
    f = double_well()
    cert = sg_inner_solve(f, 1.5, 0.6, np.array([0.0]), TIGHT_INNER)
    assert cert.stop_reason == "stationary"
    assert cert.inner_iters == 0
    assert cert.y_eps[0] == 0.0


def test_double_well_prox_near_zero():
    # the subproblem at x = 0 has its global minimizer at 0 for p = 1.5,
    # gamma = 0.6; the inner solver must not drift into a well
    f = double_well()
    oracle = inexact_oracle(f, 1.5, 0.6, np.array([0.0]), TIGHT_INNER)
    assert abs(oracle.cert.y_eps[0]) < 5e-2
    assert oracle.grad_norm < 0.5


def test_best_iterate_beats_last():
    # loose constant steps oscillate; the certificate must report the
    # best subproblem value seen, never worse than the start
    f = quadratic(1)
    cfg = InnerSolverConfig(kind="constant", alpha0=0.5, max_iters=7, move_tol=0.0)
    x = np.array([2.0])
    cert = sg_inner_solve(f, 2.0, 1.0, x, cfg)
    assert cert.value <= subproblem_value(f, 2.0, 1.0, x, x)
    assert cert.value == pytest.approx(
        subproblem_value(f, 2.0, 1.0, x, cert.y_eps), rel=1e-15
    )


def test_tight_solve_delta_small():
    f = quadratic(2)
    rng = np.random.default_rng(4)
    for p in (1.25, 1.5, 2.0):
        for _ in range(10):
            x = rng.normal(size=2)
            x *= rng.uniform(0.5, 2.0) / np.linalg.norm(x)
            cert = sg_inner_solve(f, p, 0.5, x, TIGHT_INNER)
            y_star = _exact_prox_quadratic(p, 0.5, x)
            assert np.linalg.norm(cert.y_eps - y_star) < 1e-6
            assert cert.certified


def test_certify_frozen_example():
    # x=1, y_eps=0.6 on the p=2, gamma=1 quadratic: exact prox is 0.5,
    # so delta = 0.1 and the value gap is exactly 0.01
    f = quadratic(1)
    grid = GridSpec(radius=2.0)
    cert = certify(
        f, 2.0, 1.0, np.array([1.0]), np.array([0.6]),
        exact_oracle=lambda *a: exact_envelope_oracle(*a, grid=grid),
    )
    assert cert.delta == pytest.approx(0.1, abs=1e-7)
    assert cert.eps == pytest.approx(0.01, abs=1e-9)
    assert cert.stop_reason == "audit"
    # mu-compatibility: 0.1 <= 0.9 * |1 - 0.6| holds
    assert cert.certified


def test_certify_requires_oracle():
    with pytest.raises(ValueError):
        certify(quadratic(1), 2.0, 1.0, np.array([1.0]), np.array([0.6]))


def test_envelope_sandwich():
    # min phi <= F(x) <= phi(x): the envelope interpolates below phi
    f = double_well()
    grid = GridSpec(radius=2.0)
    rng = np.random.default_rng(8)
    for p in (1.25, 2.0):
        for _ in range(25):
            x = rng.uniform(-1.5, 1.5)
            value, _ = exact_envelope_oracle(f, p, 0.1, np.array([x]), grid)
            assert f.lower_bound - 1e-9 <= value <= f.value(np.array([x])) + 1e-9


def test_grad_error_bound_delta_holds():
    # perturb the exact prox by a known delta and check the bound
    f = quadratic(1)
    rng = np.random.default_rng(12)
    violations = 0
    for p in (1.25, 1.5, 2.0):
        for _ in range(200):
            x = np.array([rng.uniform(0.3, 3.0) * rng.choice([-1.0, 1.0])])
            y_star = _exact_prox_quadratic(p, 0.8, x)
            delta = rng.uniform(0.0, 0.2)
            y_eps = y_star + delta * rng.choice([-1.0, 1.0])
            g_eps = hope_gradient(p, 0.8, x, y_eps)
            g_star = hope_gradient(p, 0.8, x, y_star)
            err = float(np.linalg.norm(g_eps - g_star))
            if err > grad_error_bound_delta(p, 0.8, delta) + 1e-12:
                violations += 1
    assert violations == 0


def test_grad_error_bound_relative_holds():
    # construct mu-compatible perturbations: delta <= mu ||x - y_eps||
    f = quadratic(1)
    rng = np.random.default_rng(13)
    violations = 0
    for p in (1.25, 1.5, 2.0):
        mu = default_mu(p)
        factor = grad_error_bound_relative(p, mu)
        for _ in range(200):
            x = np.array([rng.uniform(0.3, 3.0) * rng.choice([-1.0, 1.0])])
            y_star = _exact_prox_quadratic(p, 0.8, x)
            gap = float(np.linalg.norm(x - y_star))
            # delta <= mu * gap / (1 + mu) guarantees mu-compatibility
            # also after the perturbation moves y
            delta = rng.uniform(0.0, 1.0) * mu * gap / (1.0 + mu)
            y_eps = y_star + delta * rng.choice([-1.0, 1.0])
            assert delta <= mu * float(np.linalg.norm(x - y_eps)) + 1e-15
            g_eps = hope_gradient(p, 0.8, x, y_eps)
            g_star = hope_gradient(p, 0.8, x, y_star)
            err = float(np.linalg.norm(g_eps - g_star))
            if err > factor * float(np.linalg.norm(g_eps)) + 1e-12:
                violations += 1
    assert violations == 0


def test_exact_gradient_bound_factor():
    for p in (1.25, 2.0):
        mu = default_mu(p)
        assert exact_gradient_bound_factor(p, mu) == pytest.approx(
            1.0 + 2.0 ** (2.0 - p) * mu ** (p - 1.0)
        )


def test_gradient_consistency_structured():
    # tight inner solves keep the oracle gradient within 1e-6 of the
    # exact envelope gradient away from the origin
    f = quadratic(3)
    rng = np.random.default_rng(21)
    worst = 0.0
    for p in (1.25, 1.5, 2.0):
        for _ in range(15):
            x = rng.normal(size=3)
            x *= rng.uniform(0.5, 2.0) / np.linalg.norm(x)
            oracle = inexact_oracle(f, p, 0.5, x, TIGHT_INNER)
            g_star = hope_gradient(p, 0.5, x, _exact_prox_quadratic(p, 0.5, x))
            worst = max(worst, float(np.linalg.norm(oracle.grad_eps - g_star)))
    assert worst < 1e-6


def test_absolute_prox_soft_threshold_p2():
    # Moreau envelope of |.| at p=2 is Huber: prox = shrink(x, gamma)
    f = absolute()
    for x0, gamma in ((2.0, 0.5), (-1.2, 0.3), (0.2, 0.5)):
        cert = sg_inner_solve(f, 2.0, gamma, np.array([x0]), TIGHT_INNER)
        expected = np.sign(x0) * max(abs(x0) - gamma, 0.0)
        assert cert.y_eps[0] == pytest.approx(expected, abs=1e-6)


def test_oracle_reports_inner_work():
    f = quadratic(1)
    cfg = InnerSolverConfig(kind="decaying", alpha0=0.95, max_iters=50, move_tol=1e-3)
    oracle = inexact_oracle(f, 1.5, 0.5, np.array([1.0]), cfg)
    assert 0 < oracle.cert.inner_iters <= 50
    assert oracle.cert.stop_reason in ("max-iters", "small-step")
    assert oracle.value_eps == oracle.cert.value
    assert oracle.grad_norm == pytest.approx(float(np.linalg.norm(oracle.grad_eps)))
