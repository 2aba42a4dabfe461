"""Approximate high-order proximal points and the inexact oracle built
from them.

For phi weakly convex, x fixed and p in (1, 2], the proximal subproblem

    min_y  Phi_x(y) = phi(y) + (1/(p*gamma)) * ||x - y||^p

is solved approximately by normalized subgradient descent started at
y0 = x.  The best iterate found gives the envelope estimates

    value_eps = Phi_x(y_eps)
    grad_eps  = (1/gamma) * ||x - y_eps||^{p-2} (x - y_eps)

with the convention 0/0 := 0, i.e. grad_eps = 0 when y_eps = x.  When
the accuracy delta = ||y_eps - prox(x)|| is mu-compatible in the sense
delta <= mu * ||x - y_eps||, the gradient error obeys a bound relative
to ||grad_eps|| itself (see :func:`grad_error_bound_relative`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

_INNER_KINDS = ("decaying", "constant")


def default_mu(p: float) -> float:
    """0.9 times the largest mu compatible with c1 = c2 = 1.

    The descent analysis requires mu < (c1 / (c2 * 2^{2-p}))^{1/(p-1)};
    with unit constants this default keeps a 10% safety margin.
    """
    return 0.9 * (1.0 / 2.0 ** (2.0 - p)) ** (1.0 / (p - 1.0))


@dataclass(frozen=True)
class InnerSolverConfig:
    """Normalized subgradient solver settings.

    ``decaying`` uses step alpha0 on the first iteration and alpha0^k
    afterwards; ``constant`` keeps alpha0 throughout.  The loop stops
    after ``max_iters`` steps or when the last movement (which equals
    the step size) drops below ``move_tol``.
    """

    kind: str = "decaying"
    alpha0: float = 0.95
    max_iters: int = 200
    move_tol: float = 1e-3

    def __post_init__(self):
        if self.kind not in _INNER_KINDS:
            raise ValueError(f"inner solver kind must be one of {_INNER_KINDS}")
        if not 0.0 < self.alpha0 < 1.0 and self.kind == "decaying":
            raise ValueError(f"decaying steps need alpha0 in (0, 1), got {self.alpha0}")
        if self.alpha0 <= 0.0:
            raise ValueError(f"alpha0 must be positive, got {self.alpha0}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def step_size(self, k: int) -> float:
        if self.kind == "constant":
            return self.alpha0
        return self.alpha0 if k == 0 else self.alpha0**k


# A configuration tight enough that the iterate error is dominated by
# the final geometric step size (~1e-9); used by tests and verify.
TIGHT_INNER = InnerSolverConfig(kind="decaying", alpha0=0.95, max_iters=800, move_tol=1e-14)


@dataclass(frozen=True)
class ProxCertificate:
    """What the inner solver can attest about its output.

    ``delta`` is a movement proxy (the last step length), not a proven
    distance to the exact proximal point; ``certified`` only records
    whether the mu-compatibility test delta <= mu * ||x - y_eps|| held
    for the recorded delta.  :func:`certify` recomputes both quantities
    against an exact reference when one is available.
    """

    y_eps: np.ndarray
    value: float
    eps: Optional[float]
    delta: float
    mu: float
    inner_iters: int
    certified: bool
    stop_reason: str = ""

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        if self.eps is not None and self.eps <= 0.0:
            raise ValueError("eps budget must be positive when given")


def subproblem_value(f, p: float, gamma: float, x: np.ndarray, y: np.ndarray) -> float:
    return float(f.value(y) + np.linalg.norm(x - y) ** p / (p * gamma))


def power_map(v: np.ndarray, p: float) -> np.ndarray:
    """||v||^{p-2} v with the convention 0 at v = 0 (p > 1)."""
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return np.zeros_like(v)
    return nv ** (p - 2.0) * v


def hope_gradient(p: float, gamma: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Envelope gradient formula (1/gamma) ||x-y||^{p-2} (x-y)."""
    return power_map(np.asarray(x, float) - np.asarray(y, float), p) / gamma


def sg_inner_solve(
    f,
    p: float,
    gamma: float,
    x: np.ndarray,
    cfg: InnerSolverConfig = InnerSolverConfig(),
    eps_budget: Optional[float] = None,
    mu: Optional[float] = None,
) -> ProxCertificate:
    """Minimize the proximal subproblem by normalized subgradient steps.

    Starts at y0 = x and tracks the best subproblem value seen; the
    returned point is the best iterate, not the last one (plain
    subgradient iterations are not monotone).  A zero subgradient stops
    the loop immediately: the current point is subproblem-stationary.
    """
    if not 1.0 < p <= 2.0:
        raise ValueError(f"order p must lie in (1, 2], got p={p}")
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got gamma={gamma}")
    x = np.asarray(x, dtype=float)
    if mu is None:
        mu = default_mu(p)
    y = x.copy()
    best_y = y.copy()
    best_val = math.inf
    last_move = 0.0
    stop_reason = "max-iters"
    iters = 0
    for k in range(cfg.max_iters):
        fv, fg = f.value_and_subgradient(y)
        diff = y - x
        dist = float(np.linalg.norm(diff))
        val = fv + dist**p / (p * gamma)
        if val < best_val:
            best_val = val
            best_y = y.copy()
        zeta = fg if dist == 0.0 else fg + dist ** (p - 2.0) * diff / gamma
        znorm = float(np.linalg.norm(zeta))
        if znorm == 0.0:
            stop_reason = "stationary"
            iters = k
            break
        alpha = cfg.step_size(k)
        y = y - (alpha / znorm) * zeta
        last_move = alpha
        iters = k + 1
        if last_move < cfg.move_tol:
            stop_reason = "small-step"
            break
    # The final iterate was never scored inside the loop.
    val = subproblem_value(f, p, gamma, x, y)
    if val < best_val:
        best_val = val
        best_y = y.copy()
    certified = last_move <= mu * float(np.linalg.norm(x - best_y))
    return ProxCertificate(
        y_eps=best_y,
        value=float(best_val),
        eps=eps_budget,
        delta=last_move,
        mu=mu,
        inner_iters=iters,
        certified=certified,
        stop_reason=stop_reason,
    )


def certify(
    f,
    p: float,
    gamma: float,
    x: np.ndarray,
    y_eps: np.ndarray,
    exact_oracle=None,
    mu: Optional[float] = None,
) -> ProxCertificate:
    """Audit a candidate proximal point against an exact reference.

    ``exact_oracle(f, p, gamma, x)`` must return (value, argmin) of the
    subproblem, e.g. :func:`proxsmooth.envelope.exact_envelope_oracle`
    with a suitable grid.  The resulting certificate carries the true
    distance delta = ||y_eps - prox(x)|| and the true value gap as eps.
    Without a reference the movement-free certificate only records the
    mu-compatibility of delta = 0 trivially, so a reference is required.
    """
    x = np.asarray(x, dtype=float)
    y_eps = np.asarray(y_eps, dtype=float)
    if mu is None:
        mu = default_mu(p)
    if exact_oracle is None:
        raise ValueError("certify needs an exact oracle to audit against")
    value_exact, y_exact = exact_oracle(f, p, gamma, x)
    delta = float(np.linalg.norm(y_eps - np.atleast_1d(y_exact)))
    val = subproblem_value(f, p, gamma, x, y_eps)
    gap = max(val - float(value_exact), 0.0)
    certified = delta <= mu * float(np.linalg.norm(x - y_eps))
    return ProxCertificate(
        y_eps=y_eps,
        value=val,
        eps=gap if gap > 0.0 else None,
        delta=delta,
        mu=mu,
        inner_iters=0,
        certified=certified,
        stop_reason="audit",
    )


@dataclass(frozen=True)
class InexactOracle:
    """Envelope value/gradient estimates at one point."""

    value_eps: float
    grad_eps: np.ndarray
    cert: ProxCertificate

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.grad_eps))


def inexact_oracle(
    f,
    p: float,
    gamma: float,
    x: np.ndarray,
    cfg: InnerSolverConfig = InnerSolverConfig(),
    eps_budget: Optional[float] = None,
    mu: Optional[float] = None,
) -> InexactOracle:
    """Inner-solve at ``x`` and assemble the envelope estimates."""
    x = np.asarray(x, dtype=float)
    cert = sg_inner_solve(f, p, gamma, x, cfg, eps_budget=eps_budget, mu=mu)
    grad = hope_gradient(p, gamma, x, cert.y_eps)
    return InexactOracle(value_eps=cert.value, grad_eps=grad, cert=cert)


def grad_error_bound_delta(p: float, gamma: float, delta: float) -> float:
    """Bound on ||grad_eps - grad_exact|| from delta = ||y_eps - prox(x)||.

    The map v -> ||v||^{p-2} v is (2^{2-p}, p-1)-Hoelder for p in (1, 2],
    giving ||grad_eps - grad_exact|| <= (2^{2-p}/gamma) * delta^{p-1}.
    """
    return 2.0 ** (2.0 - p) / gamma * delta ** (p - 1.0)


def grad_error_bound_relative(p: float, mu: float) -> float:
    """Factor in ||grad_eps - grad_exact|| <= factor * ||grad_eps||.

    Valid whenever delta <= mu * ||x - y_eps|| (a certified point):
    factor = 2^{2-p} * mu^{p-1}.
    """
    return 2.0 ** (2.0 - p) * mu ** (p - 1.0)


def exact_gradient_bound_factor(p: float, mu: float) -> float:
    """Conversion factor between inexact- and exact-gradient residual
    bounds: min_k ||grad F(x^k)|| <= (1 + 2^{2-p} mu^{p-1}) * B when
    min_k ||grad_eps_k|| <= B over certified iterates."""
    return 1.0 + grad_error_bound_relative(p, mu)
