"""Constants and certified bounds for the high-order Moreau envelope.

For a rho-weakly convex function phi and p in (1, 2], the envelope

    F(x) = inf_y  phi(y) + (1/(p*gamma)) * ||x - y||^p

is a smooth surrogate of phi once gamma is small enough.  This module
collects the scalar machinery behind that statement:

* ``kappa(p)``: the constant kappa_p in the monotonicity inequality
  <||a||^{p-2} a - ||b||^{p-2} b, a - b> >= kappa_p * r^{p-2} * ||a-b||^2
  for a, b in the ball B(0; r).
* sublevel-set radii ``tau_lower_bounded`` / ``tau_prox_bounded`` that
  confine approximate proximal points to a ball.
* ``smoothness_constants``: Hoelder constants of the proximal map and of
  grad F on a ball, plus the admissible range of gamma.
* ``exact_envelope_oracle``: a brute-force grid minimizer used as an
  independent reference in tests and in the verification suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT3 = math.sqrt(3.0)


class AdmissibilityError(ValueError):
    """A parameter combination leaves the regime where the bounds hold."""


def _t_hat_residual(t: float) -> float:
    # Root function for t_hat: t(t-1)/2 - 1 + (1 + (2-sqrt(3)) t/(t-1))^(1-t).
    base = 1.0 + (2.0 - SQRT3) * t / (t - 1.0)
    return 0.5 * t * (t - 1.0) - 1.0 + base ** (1.0 - t)


@lru_cache(maxsize=1)
def solve_t_hat() -> float:
    """Breakpoint between the two branches of ``kappa`` on (1, 2).

    Solves t(t-1)/2 = 1 - (1 + (2-sqrt(3)) t/(t-1))^(1-t) by bisection.
    The residual changes sign on (1, 2): it is negative just right of 1
    and positive at 2, and the root is simple, so plain bisection to an
    interval of width 1e-12 is enough.  The value is approximately
    1.3214 and is cached after the first call.
    """
    lo, hi = 1.0 + 1e-6, 2.0
    flo = _t_hat_residual(lo)
    assert flo < 0.0 < _t_hat_residual(hi)
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if _t_hat_residual(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kappa(t: float) -> float:
    """Monotonicity constant kappa_t for exponents t in (1, 2].

    Piecewise closed form:

        (2+sqrt(3))/16 * (t-1)                      on (1, t_hat]
        (2+sqrt(3))/16 * (1 - (3-sqrt(3))^(1-t))    on (t_hat, 2)
        1                                           at t = 2

    The two branches do not meet continuously at t_hat, and the second
    branch does not tend to 1 as t -> 2; the jumps are intentional and
    the formula is implemented verbatim.  kappa(2) == 1.0 exactly.
    """
    if not 1.0 < t <= 2.0:
        raise AdmissibilityError(f"kappa requires t in (1, 2], got t={t}")
    if t == 2.0:
        return 1.0
    if t <= solve_t_hat():
        return (2.0 + SQRT3) / 16.0 * (t - 1.0)
    return (2.0 + SQRT3) / 16.0 * (1.0 - (3.0 - SQRT3) ** (1.0 - t))


@dataclass(frozen=True)
class KappaTable:
    """Resolved branch structure of ``kappa``: breakpoint and residual."""

    t_hat: float
    t_hat_residual: float
    t_lo: float = 1.0
    t_hi: float = 2.0

    def kappa(self, t: float) -> float:
        return kappa(t)


def kappa_table() -> KappaTable:
    th = solve_t_hat()
    return KappaTable(t_hat=th, t_hat_residual=_t_hat_residual(th))


def _check_p(p: float) -> None:
    if not 1.0 < p <= 2.0:
        raise AdmissibilityError(f"order p must lie in (1, 2], got p={p}")


def tau_lower_bounded(
    p: float, gamma: float, gamma_max: float, r: float, phi0: float, ell0: float
) -> float:
    """Radius confining proximal points of a lower-bounded function.

    If phi >= ell0 everywhere and x stays in B(0; r), every point y
    whose subproblem value at x does not exceed the value at y = 0
    satisfies ||y|| <= tau with

        tau = 2 r + (2^{p-1} * p * gamma_max * (phi(0) - ell0))^{1/p}.

    The bound uses the largest envelope parameter gamma_max that will be
    employed, so it is valid uniformly over gamma in (0, gamma_max].
    """
    _check_p(p)
    if gamma <= 0 or gamma_max <= 0 or gamma > gamma_max:
        raise AdmissibilityError(
            f"need 0 < gamma <= gamma_max, got gamma={gamma}, gamma_max={gamma_max}"
        )
    if r <= 0:
        raise AdmissibilityError(f"radius r must be positive, got r={r}")
    gap = phi0 - ell0
    if gap < 0:
        raise AdmissibilityError(
            f"phi(0)={phi0} lies below the declared lower bound ell0={ell0}"
        )
    return 2.0 * r + (2.0 ** (p - 1.0) * p * gamma_max * gap) ** (1.0 / p)


def tau_prox_bounded(
    p: float, gamma: float, gamma_hat: float, r: float, phi0: float, ell0_shifted: float
) -> float:
    """Radius for functions that are only bounded below after a shift.

    Assumes phi(y) + ell * ||y||^p >= ell0_shifted with
    ell = 2^{p-1} / (p * gamma_hat).  For gamma < 4^{1-p} * gamma_hat,

        tau = ( (2 r^p + p gamma (phi(0) - ell0_shifted))
                / (2^{1-p} - ell p gamma) )^{1/p}.

    The denominator vanishes as gamma -> 4^{1-p} * gamma_hat, so tau
    blows up at the admissibility boundary; beyond it the bound is void
    and an :class:`AdmissibilityError` is raised.
    """
    _check_p(p)
    if gamma <= 0 or gamma_hat <= 0:
        raise AdmissibilityError(
            f"gamma and gamma_hat must be positive, got {gamma}, {gamma_hat}"
        )
    if r <= 0:
        raise AdmissibilityError(f"radius r must be positive, got r={r}")
    ell = 2.0 ** (p - 1.0) / (p * gamma_hat)
    denom = 2.0 ** (1.0 - p) - ell * p * gamma
    if denom <= 0:
        raise AdmissibilityError(
            f"gamma={gamma} is not below 4^(1-p)*gamma_hat={4.0 ** (1.0 - p) * gamma_hat}"
        )
    num = 2.0 * r**p + p * gamma * (phi0 - ell0_shifted)
    if num < 0:
        raise AdmissibilityError("phi(0) lies below the shifted lower bound")
    return (num / denom) ** (1.0 / p)


@dataclass(frozen=True)
class SmoothnessBounds:
    """Hoelder constants of the proximal map and envelope gradient.

    Valid for envelope parameters gamma in (0, sigma) where
    sigma = min(gamma_max, (kappa_p / rho) * (r + tau)^{p-2}); the prox
    is single-valued and 1/2-Hoelder with constant ``prox_hoelder`` on
    B(0; r), and grad F is (p-1)/2-Hoelder with constant
    ``grad_hoelder``.
    """

    p: float
    gamma: float
    r: float
    tau: float
    gamma_max: float
    sigma: float
    prox_hoelder: float
    grad_hoelder: float


def smoothness_constants(
    p: float,
    gamma: float,
    rho: float,
    r: float,
    tau_bar: float,
    gamma_max: float = math.inf,
) -> SmoothnessBounds:
    """Compute the Hoelder constants of prox and grad F on B(0; r).

    ``tau_bar`` is a radius confining the relevant proximal points (see
    :func:`tau_lower_bounded`).  Requires

        kappa_p * (r + tau_bar)^{p-2} - rho * gamma > 0,

    i.e. gamma below the admissibility threshold; otherwise the
    subproblem may fail to be strongly convex on the ball and an
    :class:`AdmissibilityError` is raised (no silent clamping).
    """
    _check_p(p)
    if gamma <= 0 or r <= 0 or tau_bar <= 0 or rho < 0:
        raise AdmissibilityError(
            f"need gamma, r, tau_bar > 0 and rho >= 0; got gamma={gamma}, "
            f"r={r}, tau_bar={tau_bar}, rho={rho}"
        )
    kp = kappa(p)
    shell = (r + tau_bar) ** (p - 2.0)
    sigma = gamma_max if rho == 0.0 else min(gamma_max, kp * shell / rho)
    denom = kp * shell - rho * gamma
    if denom <= 0 or gamma >= sigma:
        raise AdmissibilityError(
            f"gamma={gamma} is outside the admissible range (0, {sigma}) "
            f"for p={p}, rho={rho}, r={r}, tau_bar={tau_bar}"
        )
    lp = math.sqrt((4.0 * kp * shell * tau_bar + 2.0 * (r + tau_bar) ** (p - 1.0)) / denom)
    cal_lp = 2.0 ** (2.0 - p) / gamma * (math.sqrt(2.0 * r) + lp) ** (p - 1.0)
    return SmoothnessBounds(
        p=p,
        gamma=gamma,
        r=r,
        tau=tau_bar,
        gamma_max=gamma_max,
        sigma=sigma,
        prox_hoelder=lp,
        grad_hoelder=cal_lp,
    )


def safeguarded_bounds(
    f, p: float, gamma: float, radius: float, gamma_max: float
) -> SmoothnessBounds:
    """Derive smoothness constants for a lower-bounded objective.

    Confines proximal points via :func:`tau_lower_bounded` using the
    objective's declared lower bound, then checks gamma admissibility
    and returns the constants.  Raises :class:`AdmissibilityError` when
    the objective declares no lower bound or gamma is out of range.
    """
    if f.lower_bound is None:
        raise AdmissibilityError(
            "safeguarded mode needs an objective with a declared lower bound"
        )
    phi0 = float(f.value(np.zeros(f.dim)))
    tau = tau_lower_bounded(p, gamma, gamma_max, radius, phi0, f.lower_bound)
    return smoothness_constants(p, gamma, f.rho, radius, tau, gamma_max)


@dataclass(frozen=True)
class GridSpec:
    """Search box [-radius, radius]^dim for the brute-force oracle.

    ``points`` grid nodes per axis, then ``refine`` ternary-search steps
    inside the winning cell.  The bracket width decays like (2/3)^refine,
    but value-comparison rounding caps the achievable argmin accuracy
    near sqrt(machine eps) ~ 1e-8; envelope values are accurate to ~1e-15
    since they are quadratically flat at the minimizer.
    """

    radius: float
    points: int = 4001
    refine: int = 60

    def axis(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.points)


def _subproblem_values(f, p: float, gamma: float, x: np.ndarray, ys: np.ndarray) -> np.ndarray:
    # ys has shape (N, dim); returns Phi(y) = f(y) + ||x-y||^p/(p*gamma) per row.
    dist = np.linalg.norm(ys - x[None, :], axis=1)
    if f.batch_value is not None:
        fv = f.batch_value(ys)
    else:
        fv = np.array([f.value(y) for y in ys])
    return fv + dist**p / (p * gamma)


def _ternary_axis(f, p, gamma, x, y, axis, lo, hi, iters):
    # Shrink [lo, hi] along one coordinate of y by ternary search.
    def val(c):
        z = y.copy()
        z[axis] = c
        return f.value(z) + np.linalg.norm(x - z) ** p / (p * gamma)

    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if val(m1) <= val(m2):
            hi = m2
        else:
            lo = m1
    y = y.copy()
    y[axis] = 0.5 * (lo + hi)
    return y


def exact_envelope_oracle(
    f, p: float, gamma: float, x: np.ndarray, grid: GridSpec
) -> tuple[float, np.ndarray]:
    """Brute-force envelope value and minimizer at ``x``.

    Evaluates the subproblem on a dense grid over [-radius, radius]^dim
    (dim <= 2) and refines the winning cell by per-axis ternary search.
    Intended as an independent reference implementation; cost grows as
    points^dim, so it is only usable for desk-scale checks.
    """
    if p <= 1.0:
        raise AdmissibilityError(f"order p must exceed 1, got p={p}")
    if gamma <= 0:
        raise AdmissibilityError(f"gamma must be positive, got gamma={gamma}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dim = x.shape[0]
    if dim > 2:
        raise ValueError("the grid oracle only supports dim <= 2")
    ax = grid.axis()
    if dim == 1:
        ys = ax[:, None]
    else:
        g0, g1 = np.meshgrid(ax, ax, indexing="ij")
        ys = np.column_stack([g0.ravel(), g1.ravel()])
    vals = _subproblem_values(f, p, gamma, x, ys)
    best = int(np.argmin(vals))
    y = ys[best].copy()
    h = ax[1] - ax[0]
    if dim == 1:
        y = _ternary_axis(f, p, gamma, x, y, 0, y[0] - h, y[0] + h, grid.refine)
    else:
        # Alternate axes, shrinking the per-axis bracket between sweeps;
        # a fixed re-centered bracket would stall at h * (2/3)^per.
        sweeps = 6
        per = max(grid.refine // (2 * sweeps), 4)
        width = h
        for _ in range(sweeps):
            for axis in range(2):
                y = _ternary_axis(
                    f, p, gamma, x, y, axis, y[axis] - width, y[axis] + width, per
                )
            width *= max((2.0 / 3.0) ** per, 0.02)
    value = f.value(y) + np.linalg.norm(x - y) ** p / (p * gamma)
    return float(value), y


def envelope_minima(
    f, p: float, gamma: float, x: np.ndarray, grid: GridSpec, window: float = 1e-8
) -> list[tuple[float, np.ndarray]]:
    """All near-global minimizers of the subproblem on a 1-D grid.

    Returns refined (value, y) pairs for every grid-local minimum whose
    value is within ``window`` (absolute, after refinement of the global
    one) of the best.  Used to detect non-single-valued proximal maps,
    e.g. symmetric double wells with p > 2.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != 1:
        raise ValueError("envelope_minima only supports dim == 1")
    ax = grid.axis()
    vals = _subproblem_values(f, p, gamma, x, ax[:, None])
    h = ax[1] - ax[0]
    interior = np.arange(1, len(ax) - 1)
    local = interior[
        (vals[interior] <= vals[interior - 1]) & (vals[interior] <= vals[interior + 1])
    ]
    out = []
    for idx in local:
        y = _ternary_axis(
            f, p, gamma, x, np.array([ax[idx]]), 0, ax[idx] - h, ax[idx] + h, grid.refine
        )
        v = f.value(y) + np.linalg.norm(x - y) ** p / (p * gamma)
        out.append((float(v), y))
    if not out:
        return out
    vbest = min(v for v, _ in out)
    keep = [(v, y) for v, y in out if v <= vbest + window]
    # Merge refined points that collapsed into the same basin.
    keep.sort(key=lambda t: t[1][0])
    merged: list[tuple[float, np.ndarray]] = []
    for v, y in keep:
        if merged and abs(y[0] - merged[-1][1][0]) < 2 * h:
            if v < merged[-1][0]:
                merged[-1] = (v, y)
        else:
            merged.append((v, y))
    return merged
