"""Self-contained invariant checks, runnable from the CLI.

Four groups, each reporting machine-readable pass/fail with details:

* ``basic_inequality``: sampled check of the power-map monotonicity
  bound behind all smoothness constants.
* ``grad_error_bound``: gradient error of perturbed proximal points
  against the delta- and mu-based bounds, using an exact 1-D reference.
* ``prox_map``: single-valuedness of the proximal map for p in (1, 2]
  with admissible gamma on the double well, and (with the p fixture)
  confirmation of the symmetric two-point map for p > 2.
* ``gradient_fd``: envelope gradient vs central differences of the
  exact envelope on quadratics in dimensions 1 to 5.

Fixtures exist to prove the checks can fail: injecting understated
accuracy claims must make ``grad_error_bound`` fail.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from proxsmooth.envelope import GridSpec, envelope_minima, exact_envelope_oracle, kappa
from proxsmooth.objectives import double_well, quadratic
from proxsmooth.prox import (
    TIGHT_INNER,
    default_mu,
    grad_error_bound_delta,
    grad_error_bound_relative,
    hope_gradient,
    inexact_oracle,
    power_map,
)

P_GRID = (1.1, 1.25, 1.5, 1.75, 2.0)


def exact_prox_quadratic(p: float, gamma: float, x: np.ndarray) -> np.ndarray:
    """Exact proximal point of phi = ||.||^2/2 by radial root solving.

    The minimizer lies on the segment [0, x] at radius u solving
    gamma * u = (||x|| - u)^{p-1}, whose left side increases and right
    side decreases in u; bisection to machine precision.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        return np.zeros_like(x)
    lo, hi = 0.0, nx
    for _ in range(200):
        u = 0.5 * (lo + hi)
        if gamma * u < (nx - u) ** (p - 1.0):
            lo = u
        else:
            hi = u
    return 0.5 * (lo + hi) * x / nx


def exact_envelope_quadratic(p: float, gamma: float, x: np.ndarray) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = exact_prox_quadratic(p, gamma, x)
    return 0.5 * float(np.dot(y, y)) + float(np.linalg.norm(x - y)) ** p / (p * gamma)


def _check_basic_inequality(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    worst = math.inf
    violations = 0
    checks = 0
    for p in P_GRID:
        kp = kappa(p)
        for r in (0.5, 2.0):
            for _ in range(2000):
                dim = int(rng.integers(1, 4))
                a = rng.normal(size=dim)
                b = rng.normal(size=dim)
                a *= r * rng.random() / np.linalg.norm(a)
                b *= r * rng.random() / np.linalg.norm(b)
                lhs = float(np.dot(power_map(a, p) - power_map(b, p), a - b))
                rhs = kp * r ** (p - 2.0) * float(np.dot(a - b, a - b))
                margin = lhs - rhs
                worst = min(worst, margin)
                checks += 1
                if margin < -1e-12 * max(1.0, abs(rhs)):
                    violations += 1
    return {"passed": violations == 0, "checks": checks,
            "violations": violations, "worst_margin": worst}


def _check_grad_error_bound(inject_delta_violation: bool = False, seed: int = 1) -> dict:
    rng = np.random.default_rng(seed)
    violations_abs = 0
    violations_rel = 0
    checks = 0
    for p in P_GRID:
        gamma = 0.9
        mu = default_mu(p)
        for _ in range(200):
            x = np.array([rng.uniform(0.3, 3.0) * rng.choice([-1.0, 1.0])])
            y_star = exact_prox_quadratic(p, gamma, x)
            g_exact = hope_gradient(p, gamma, x, y_star)
            # Absolute bound from the perturbation size delta.
            delta = 10.0 ** rng.uniform(-6, -0.5)
            y_eps = y_star + delta * rng.choice([-1.0, 1.0])
            claimed = delta / 10.0 if inject_delta_violation else delta
            err = float(np.linalg.norm(hope_gradient(p, gamma, x, y_eps) - g_exact))
            if err > grad_error_bound_delta(p, gamma, claimed) * (1.0 + 1e-9):
                violations_abs += 1
            # Relative bound for mu-compatible perturbations.
            gap = float(np.linalg.norm(x - y_star))
            if gap > 0.0:
                delta_c = rng.random() * mu * gap / (1.0 + mu)
                y_c = y_star + delta_c * rng.choice([-1.0, 1.0])
                g_eps = hope_gradient(p, gamma, x, y_c)
                assert delta_c <= mu * float(np.linalg.norm(x - y_c)) + 1e-15
                err_c = float(np.linalg.norm(g_eps - g_exact))
                bound = grad_error_bound_relative(p, mu) * float(np.linalg.norm(g_eps))
                if err_c > bound * (1.0 + 1e-9):
                    violations_rel += 1
            checks += 1
    passed = violations_abs == 0 and violations_rel == 0
    return {"passed": passed, "checks": checks,
            "violations_delta_bound": violations_abs,
            "violations_relative_bound": violations_rel}


def _check_prox_map(example_p: Optional[float] = None) -> dict:
    f = double_well()
    grid = GridSpec(radius=2.0, points=4001, refine=60)
    if example_p is not None and example_p > 2.0:
        # Above the supported exponent range the map can split: expect
        # two symmetric minimizers at x = 0.
        minima = envelope_minima(f, example_p, 0.6, np.array([0.0]), grid, window=1e-6)
        ys = sorted(m[1][0] for m in minima)
        sym = bool(len(ys) == 2 and abs(ys[0] + ys[1]) < 1e-6 and ys[1] > 0.1)
        return {"passed": sym, "p": example_p,
                "minimizers": [float(v) for v in ys]}
    cases = ((1.25, 0.6), (1.5, 0.6), (2.0, 0.5))
    ok = True
    details = []
    for p, gamma in cases:
        assert gamma <= 1.0 / p
        minima = envelope_minima(f, p, gamma, np.array([0.0]), grid, window=1e-6)
        _, y = exact_envelope_oracle(f, p, gamma, np.array([0.0]), grid)
        unique_zero = bool(
            len(minima) == 1 and abs(minima[0][1][0]) < 1e-6 and abs(y[0]) < 1e-6
        )
        ok = ok and unique_zero
        details.append({"p": p, "gamma": gamma, "count": len(minima),
                        "argmin": float(y[0])})
    return {"passed": ok, "cases": details}


def _check_gradient_fd(seed: int = 2) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    checks = 0
    violations = 0
    for p in (1.25, 1.5, 2.0):
        gamma = 0.9
        for dim in range(1, 6):
            f = quadratic(dim)
            for _ in range(20):
                x = rng.normal(size=dim)
                x *= rng.uniform(0.5, 2.0) / np.linalg.norm(x)
                o = inexact_oracle(f, p, gamma, x, TIGHT_INNER)
                fd = np.zeros(dim)
                h = 1e-6
                for i in range(dim):
                    e = np.zeros(dim)
                    e[i] = h
                    fd[i] = (
                        exact_envelope_quadratic(p, gamma, x + e)
                        - exact_envelope_quadratic(p, gamma, x - e)
                    ) / (2.0 * h)
                rel = float(
                    np.linalg.norm(o.grad_eps - fd) / max(np.linalg.norm(fd), 1e-12)
                )
                worst = max(worst, rel)
                checks += 1
                if rel > 1e-4:
                    violations += 1
    return {"passed": violations == 0, "checks": checks,
            "violations": violations, "worst_relative_error": worst}


def run_verification(
    inject_delta_violation: bool = False,
    example_p: Optional[float] = None,
    seed: int = 0,
) -> dict:
    """Run all groups; returns {"passed": bool, "groups": {...}}."""
    groups = {
        "basic_inequality": _check_basic_inequality(seed=seed),
        "grad_error_bound": _check_grad_error_bound(
            inject_delta_violation=inject_delta_violation, seed=seed + 1
        ),
        "prox_map": _check_prox_map(example_p=example_p),
        "gradient_fd": _check_gradient_fd(seed=seed + 2),
    }
    return {"passed": all(g["passed"] for g in groups.values()), "groups": groups}
