"""Descent on the high-order Moreau envelope with inexact oracles.

All outer algorithms share one loop: query the inexact oracle at the
current point, form a search direction d = -||g||^omega g, pick a step
size, and accept a candidate.  They differ only in the step rule:

* ``higda_run``: a fixed step derived from the Hoelder constant of the
  envelope gradient (requires that constant up front).
* ``pf_higda_run``: parameter-free; probes a growing local-constant
  ladder Lbar = growth^i * base until a sufficient-decrease test holds.
  Scenarios S1/S2/S3 choose the ladder base.
* ``ideals_run``: backtracking line search from alpha = 1 with an
  Armijo-style test adapted to the inexact oracle.
* ``itsdeal_generic_run``: user-supplied direction and step rules; the
  per-iteration decrease inequality is reported per row, never
  asserted, since practical oracles cannot certify their accuracy.

Each outer iteration pays one inner solve per probed candidate, which
is what the wall-clock (or deterministic virtual) budget meters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from proxsmooth.envelope import AdmissibilityError
from proxsmooth.objectives import relative_error
from proxsmooth.prox import InexactOracle, InnerSolverConfig, default_mu, inexact_oracle
from proxsmooth.trace import RunTrace, TraceRow

_SCENARIOS = ("S1", "S2", "S3")

# One work unit = one inner subgradient iteration (the dominant cost).
# The default rate makes 1 virtual second roughly comparable to desk-
# scale hardware; it is recorded in every virtual-clock trace header.
DEFAULT_SECONDS_PER_UNIT = 2e-05


class WallClock:
    """Real elapsed time; `add` is a no-op."""

    mode = "wall"
    seconds_per_unit = None

    def __init__(self):
        self._t0 = time.perf_counter()

    def add(self, units: int) -> None:
        pass

    def now(self) -> float:
        return time.perf_counter() - self._t0


class VirtualClock:
    """Deterministic clock: time = work units done * seconds_per_unit.

    Used wherever byte-reproducible traces are required; wall-clock
    budgets cannot be bit-reproducible since the cutoff itself jitters.
    """

    mode = "virtual"

    def __init__(self, seconds_per_unit: float = DEFAULT_SECONDS_PER_UNIT):
        if seconds_per_unit <= 0:
            raise ValueError("seconds_per_unit must be positive")
        self.seconds_per_unit = seconds_per_unit
        self._units = 0

    def add(self, units: int) -> None:
        self._units += units

    def now(self) -> float:
        return self._units * self.seconds_per_unit


def make_clock(mode: str = "wall", seconds_per_unit: Optional[float] = None):
    if mode == "wall":
        return WallClock()
    if mode == "virtual":
        return VirtualClock(seconds_per_unit or DEFAULT_SECONDS_PER_UNIT)
    raise ValueError(f"unknown clock mode {mode!r}")


@dataclass
class SolverParams:
    """Shared parameters of the envelope descent methods.

    ``mu`` defaults to 0.9 times its admissible ceiling for the given
    c1, c2 (see :func:`proxsmooth.prox.default_mu`); ``omega`` is the
    direction exponent, fixed to (3-p)/(p-1) for the step-size methods
    and defaulting to (2-p)/(p-1) for the line-search method.  The
    oracle accuracy budget is eps_k = eps_scale / (k+1)^2, summable
    with total eps_scale * pi^2 / 6.
    """

    p: float = 1.25
    gamma: float = 0.9
    c1: float = 1.0
    c2: float = 1.0
    mu: Optional[float] = None
    omega: Optional[float] = None
    scenario: str = "S1"
    lbar_growth: float = 3.0
    lbar0: float = 1e-3
    armijo_lambda: float = 0.5
    armijo_upsilon: float = 0.4
    eps_scale: float = 1.0
    max_inner_trials: int = 60
    max_backtracks: int = 50

    def __post_init__(self):
        if not 1.0 < self.p <= 2.0:
            raise AdmissibilityError(f"order p must lie in (1, 2], got p={self.p}")
        if self.gamma <= 0.0:
            raise AdmissibilityError(f"gamma must be positive, got {self.gamma}")
        if self.c1 <= 0.0 or self.c2 <= 0.0:
            raise AdmissibilityError("c1 and c2 must be positive")
        if self.scenario not in _SCENARIOS:
            raise AdmissibilityError(f"scenario must be one of {_SCENARIOS}")
        if self.lbar_growth <= 1.0:
            raise AdmissibilityError("lbar_growth must exceed 1")
        if self.lbar0 <= 0.0:
            raise AdmissibilityError("lbar0 must be positive")
        if not 0.0 < self.armijo_lambda < 1.0:
            raise AdmissibilityError("armijo_lambda must lie in (0, 1)")
        if not 0.0 < self.armijo_upsilon < 1.0:
            raise AdmissibilityError("armijo_upsilon must lie in (0, 1)")
        if self.eps_scale <= 0.0:
            raise AdmissibilityError("eps_scale must be positive")
        if self.mu is None:
            self.mu = default_mu(self.p) * (self.c1 / self.c2) ** (1.0 / (self.p - 1.0))
        mu_max = (self.c1 / (self.c2 * 2.0 ** (2.0 - self.p))) ** (1.0 / (self.p - 1.0))
        if not 0.0 < self.mu < mu_max:
            raise AdmissibilityError(
                f"mu={self.mu} violates 0 < mu < {mu_max} required by c1={self.c1}, "
                f"c2={self.c2}, p={self.p}"
            )
        if self.omega is not None and self.omega < 0.0:
            raise AdmissibilityError("omega must be nonnegative")

    def eps(self, k: int) -> float:
        return self.eps_scale / (k + 1) ** 2

    def eps_total(self) -> float:
        return self.eps_scale * math.pi**2 / 6.0

    def ctilde(self) -> float:
        """c1 - 2^{2-p} mu^{p-1} c2, positive by the mu constraint."""
        return self.c1 - 2.0 ** (2.0 - self.p) * self.mu ** (self.p - 1.0) * self.c2

    def step_omega(self) -> float:
        """Direction exponent required by the fixed-step analysis."""
        return (3.0 - self.p) / (self.p - 1.0)

    def search_omega(self) -> float:
        """Direction exponent used by the line-search method."""
        if self.omega is not None:
            return self.omega
        return (2.0 - self.p) / (self.p - 1.0)


@dataclass(frozen=True)
class Budget:
    """Stopping rule: iteration cap, time cap, gradient tolerance."""

    max_iters: Optional[int] = None
    max_seconds: Optional[float] = None
    grad_tol: float = 1e-8

    def __post_init__(self):
        if self.max_iters is None and self.max_seconds is None:
            raise ValueError("budget needs max_iters or max_seconds")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ValueError("max_seconds must be positive")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be nonnegative")


class SolverAbort(RuntimeError):
    """A step-acceptance loop exhausted its cap.  Carries the partial trace."""

    def __init__(self, message: str, trace: Optional[RunTrace] = None):
        super().__init__(message)
        self.trace = trace


def direction_power(g: np.ndarray, omega: float) -> np.ndarray:
    """d = -||g||^omega g, with d = 0 when g = 0."""
    g = np.asarray(g, dtype=float)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return np.zeros_like(g)
    return -(gn**omega) * g


def check_direction_pair(
    g: np.ndarray, d: np.ndarray, c1: float, c2: float, vartheta: float
) -> bool:
    """Whether (g, d) is an admissible descent pair:

        <g, d> <= -c1 ||g||^{1+vartheta}   and   ||d|| <= c2 ||g||^vartheta

    within 1e-12 slack (absolute, scaled by the comparison magnitude).
    """
    g = np.asarray(g, dtype=float)
    d = np.asarray(d, dtype=float)
    gn = float(np.linalg.norm(g))
    lhs = float(np.dot(g, d))
    bound = -c1 * gn ** (1.0 + vartheta)
    slack1 = 1e-12 * max(1.0, abs(bound))
    slack2 = 1e-12 * max(1.0, c2 * gn**vartheta)
    return lhs <= bound + slack1 and float(np.linalg.norm(d)) <= c2 * gn**vartheta + slack2


def higda_step_size(params: SolverParams, grad_hoelder: float) -> float:
    """Largest admissible fixed step for the known-constant method:

        alpha = min( gamma^{2/(p-1)} / c2,
                     ((p+1) ctilde / (2 c2^{(p+1)/2} calL))^{2/(p-1)} )

    where calL is the Hoelder constant of the envelope gradient.
    """
    if grad_hoelder <= 0:
        raise AdmissibilityError("the gradient Hoelder constant must be positive")
    p, c2 = params.p, params.c2
    ct = params.ctilde()
    e = 2.0 / (p - 1.0)
    cap = params.gamma**e / c2
    term = ((p + 1.0) * ct / (2.0 * c2 ** ((p + 1.0) / 2.0) * grad_hoelder)) ** e
    return min(cap, term)


@dataclass
class _Step:
    alpha: float
    x_new: np.ndarray
    oracle_new: InexactOracle
    lbar: Optional[float] = None
    backtracks: int = 0


class _Engine:
    """Shared outer loop; controllers supply the step rule."""

    def __init__(
        self,
        f,
        params: SolverParams,
        inner: InnerSolverConfig,
        budget: Budget,
        clock,
        x_true: Optional[np.ndarray],
        stride: int,
        flag_rho_hat: Optional[float] = None,
        flag_vartheta: Optional[float] = None,
    ):
        self.f = f
        self.params = params
        self.inner = inner
        self.budget = budget
        self.clock = clock
        self.x_true = x_true
        self.stride = max(int(stride), 1)
        self.flag_rho_hat = flag_rho_hat
        self.flag_vartheta = flag_vartheta
        self.rows: list[TraceRow] = []

    def oracle_at(self, x: np.ndarray, k: int) -> InexactOracle:
        o = inexact_oracle(
            self.f,
            self.params.p,
            self.params.gamma,
            x,
            self.inner,
            eps_budget=self.params.eps(k),
            mu=self.params.mu,
        )
        self.clock.add(o.cert.inner_iters + 1)
        return o

    def _rel(self, x: np.ndarray) -> Optional[float]:
        if self.x_true is None:
            return None
        return relative_error(x, self.x_true)

    def run(self, x0: np.ndarray, controller) -> tuple[list[TraceRow], str]:
        x = np.asarray(x0, dtype=float).copy()
        oracle = self.oracle_at(x, 0)
        k = 0
        while True:
            gn = oracle.grad_norm
            if gn <= self.budget.grad_tol:
                self._final_row(k, x, oracle)
                return self.rows, "stationary", x
            if (
                self.budget.max_seconds is not None
                and self.clock.now() >= self.budget.max_seconds
            ):
                self._final_row(k, x, oracle)
                return self.rows, "budget", x
            if self.budget.max_iters is not None and k >= self.budget.max_iters:
                self._final_row(k, x, oracle)
                return self.rows, "iters", x
            try:
                step = controller.step(self, k, x, oracle)
            except SolverAbort as abort:
                self._final_row(k, x, oracle)
                abort.trace = RunTrace(header={}, rows=self.rows)
                raise
            flag = None
            if self.flag_rho_hat is not None and self.flag_vartheta is not None:
                target = (
                    oracle.value_eps
                    - self.flag_rho_hat * gn ** (1.0 + self.flag_vartheta)
                    + self.params.eps(k + 1)
                )
                flag = 1 if step.oracle_new.value_eps <= target else 0
            if k % self.stride == 0:
                self.rows.append(
                    TraceRow(
                        iter=k,
                        wall_time_s=self.clock.now(),
                        value_eps=oracle.value_eps,
                        grad_eps_norm=gn,
                        step_alpha=step.alpha,
                        lbar=step.lbar,
                        inner_iters=oracle.cert.inner_iters,
                        backtracks=step.backtracks,
                        relative_error=self._rel(x),
                        descent_ok=flag,
                    )
                )
            x = step.x_new
            oracle = step.oracle_new
            k += 1

    def _final_row(self, k: int, x: np.ndarray, oracle: InexactOracle) -> None:
        self.rows.append(
            TraceRow(
                iter=k,
                wall_time_s=self.clock.now(),
                value_eps=oracle.value_eps,
                grad_eps_norm=oracle.grad_norm,
                inner_iters=oracle.cert.inner_iters,
                relative_error=self._rel(x),
            )
        )


class _FixedStepController:
    def __init__(self, alpha: float, omega: float):
        self.alpha = alpha
        self.omega = omega

    def step(self, eng: _Engine, k: int, x: np.ndarray, oracle: InexactOracle) -> _Step:
        d = direction_power(oracle.grad_eps, self.omega)
        x_new = x + self.alpha * d
        return _Step(self.alpha, x_new, eng.oracle_at(x_new, k + 1))


class _ProxFreeController:
    """Trial steps from a growing local-constant ladder.

    The ladder base depends on the scenario: S1 restarts from lbar0
    every iteration, S2 starts from the last accepted constant, S3
    starts from a finite-difference estimate of the local constant
    computed from the previous accepted step (lbar0 at k = 0; an
    estimate of exactly 0 leaves the step at its gamma-cap).
    """

    def __init__(self, params: SolverParams):
        self.params = params
        self.lbar_accepted = params.lbar0
        self.prev_x: Optional[np.ndarray] = None
        self.prev_g: Optional[np.ndarray] = None

    def _base(self, k: int, x: np.ndarray, g: np.ndarray) -> float:
        params = self.params
        if params.scenario == "S1":
            return params.lbar0
        if params.scenario == "S2":
            return self.lbar_accepted
        if self.prev_x is None:
            # No accepted step yet, so no finite-difference estimate.
            return params.lbar0
        num = float(np.linalg.norm(g - self.prev_g))
        if num == 0.0:
            return 0.0
        den = float(np.linalg.norm(x - self.prev_x)) ** ((params.p - 1.0) / 2.0)
        return num / den

    def step(self, eng: _Engine, k: int, x: np.ndarray, oracle: InexactOracle) -> _Step:
        params = self.params
        p, c2 = params.p, params.c2
        g = oracle.grad_eps
        gn = oracle.grad_norm
        d = direction_power(g, params.step_omega())
        ct = params.ctilde()
        e = 2.0 / (p - 1.0)
        cap = params.gamma**e / c2
        ghigh = gn ** ((p + 1.0) / (p - 1.0))
        eps_next = params.eps(k + 1)
        base = self._base(k, x, g)
        for i in range(params.max_inner_trials):
            lbar = params.lbar_growth**i * base
            if lbar > 0.0:
                alpha = min(cap, (ct / (c2 ** ((p + 1.0) / 2.0) * lbar)) ** e)
            else:
                alpha = cap
            x_new = x + alpha * d
            cand = eng.oracle_at(x_new, k + 1)
            bracket = ct - (2.0 * lbar / (p + 1.0)) * alpha ** ((p - 1.0) / 2.0) * c2 ** (
                (p + 1.0) / 2.0
            )
            if cand.value_eps <= oracle.value_eps - alpha * bracket * ghigh + eps_next:
                self.lbar_accepted = lbar
                self.prev_x = x
                self.prev_g = g
                return _Step(alpha, x_new, cand, lbar=lbar, backtracks=i)
        raise SolverAbort(
            f"no acceptable step after {params.max_inner_trials} ladder trials "
            f"at iteration {k} (scenario {params.scenario})"
        )


class _ArmijoController:
    def __init__(self, params: SolverParams):
        self.params = params
        self.omega = params.search_omega()

    def step(self, eng: _Engine, k: int, x: np.ndarray, oracle: InexactOracle) -> _Step:
        params = self.params
        gn = oracle.grad_norm
        d = direction_power(oracle.grad_eps, self.omega)
        vartheta = self.omega + 1.0
        decrease = params.armijo_lambda * params.ctilde() * gn ** (1.0 + vartheta)
        eps_next = params.eps(k + 1)
        alpha = 1.0
        for j in range(params.max_backtracks + 1):
            x_new = x + alpha * d
            cand = eng.oracle_at(x_new, k + 1)
            if cand.value_eps <= oracle.value_eps - alpha * decrease + eps_next:
                return _Step(alpha, x_new, cand, backtracks=j)
            alpha *= params.armijo_upsilon
        raise SolverAbort(
            f"line search exhausted {params.max_backtracks} backtracks at iteration {k}"
        )


class _RuleController:
    def __init__(self, direction_rule, step_rule):
        self.direction_rule = direction_rule
        self.step_rule = step_rule

    def step(self, eng: _Engine, k: int, x: np.ndarray, oracle: InexactOracle) -> _Step:
        d = self.direction_rule(k, oracle.grad_eps)
        alpha = float(self.step_rule(k, x, oracle.grad_eps, d))
        if alpha <= 0.0:
            raise SolverAbort(f"step rule returned nonpositive alpha={alpha} at k={k}")
        x_new = x + alpha * d
        return _Step(alpha, x_new, eng.oracle_at(x_new, k + 1))


def _base_header(alg: str, f, params: SolverParams, inner, budget, clock, stride) -> dict:
    header = {
        "alg": alg,
        "problem": getattr(f, "name", "") or "custom",
        "dim": getattr(f, "dim", None),
        "rho": getattr(f, "rho", None),
        "p": params.p,
        "gamma": params.gamma,
        "c1": params.c1,
        "c2": params.c2,
        "mu": params.mu,
        "eps_scale": params.eps_scale,
        "inner.kind": inner.kind,
        "inner.alpha0": inner.alpha0,
        "inner.max_iters": inner.max_iters,
        "inner.move_tol": inner.move_tol,
        "budget.grad_tol": budget.grad_tol,
        "clock.mode": clock.mode,
        "value_kind": "envelope",
    }
    if budget.max_iters is not None:
        header["budget.max_iters"] = budget.max_iters
    if budget.max_seconds is not None:
        header["budget.max_seconds"] = budget.max_seconds
    if clock.seconds_per_unit is not None:
        header["clock.seconds_per_unit"] = clock.seconds_per_unit
    if stride != 1:
        header["stride"] = stride
    return header


def _finish(engine: _Engine, header: dict, controller, x0) -> RunTrace:
    try:
        rows, status, x = engine.run(np.asarray(x0, dtype=float), controller)
    except SolverAbort as abort:
        header["status"] = "aborted"
        if abort.trace is not None:
            abort.trace.header = header
        raise
    header["status"] = status
    return RunTrace(header=header, rows=rows, x_final=x)


def higda_run(
    f,
    params: SolverParams,
    x0,
    budget: Budget,
    grad_hoelder: float,
    inner: Optional[InnerSolverConfig] = None,
    clock=None,
    x_true=None,
    stride: int = 1,
) -> RunTrace:
    """Fixed-step descent; needs the envelope-gradient Hoelder constant.

    The constant can come from :func:`proxsmooth.envelope.smoothness_constants`
    when a confining radius is known (safeguarded mode), or be supplied
    directly.  The direction exponent is fixed at (3-p)/(p-1).
    """
    if params.omega is not None and params.omega != params.step_omega():
        raise AdmissibilityError(
            "the fixed-step method requires omega = (3-p)/(p-1); leave omega unset"
        )
    inner = inner or InnerSolverConfig()
    clock = clock or WallClock()
    alpha = higda_step_size(params, grad_hoelder)
    engine = _Engine(f, params, inner, budget, clock, x_true, stride)
    header = _base_header("higda", f, params, inner, budget, clock, stride)
    header["grad_hoelder"] = grad_hoelder
    header["alpha"] = alpha
    header["omega"] = params.step_omega()
    return _finish(engine, header, _FixedStepController(alpha, params.step_omega()), x0)


def pf_higda_run(
    f,
    params: SolverParams,
    x0,
    budget: Budget,
    inner: Optional[InnerSolverConfig] = None,
    clock=None,
    x_true=None,
    stride: int = 1,
) -> RunTrace:
    """Parameter-free fixed-exponent descent (scenarios S1/S2/S3)."""
    if params.omega is not None and params.omega != params.step_omega():
        raise AdmissibilityError(
            "the parameter-free method requires omega = (3-p)/(p-1); leave omega unset"
        )
    inner = inner or InnerSolverConfig()
    clock = clock or WallClock()
    engine = _Engine(f, params, inner, budget, clock, x_true, stride)
    header = _base_header("pf-higda", f, params, inner, budget, clock, stride)
    header["scenario"] = params.scenario
    header["lbar_growth"] = params.lbar_growth
    header["lbar0"] = params.lbar0
    header["omega"] = params.step_omega()
    return _finish(engine, header, _ProxFreeController(params), x0)


def ideals_run(
    f,
    params: SolverParams,
    x0,
    budget: Budget,
    inner: Optional[InnerSolverConfig] = None,
    clock=None,
    x_true=None,
    stride: int = 1,
) -> RunTrace:
    """Backtracking line-search descent with direction -||g||^omega g."""
    inner = inner or InnerSolverConfig()
    clock = clock or WallClock()
    engine = _Engine(f, params, inner, budget, clock, x_true, stride)
    header = _base_header("ideals", f, params, inner, budget, clock, stride)
    header["omega"] = params.search_omega()
    header["armijo_lambda"] = params.armijo_lambda
    header["armijo_upsilon"] = params.armijo_upsilon
    return _finish(engine, header, _ArmijoController(params), x0)


def itsdeal_generic_run(
    f,
    params: SolverParams,
    x0,
    budget: Budget,
    direction_rule: Callable[[int, np.ndarray], np.ndarray],
    step_rule: Callable[[int, np.ndarray, np.ndarray, np.ndarray], float],
    inner: Optional[InnerSolverConfig] = None,
    clock=None,
    x_true=None,
    stride: int = 1,
    rho_hat: Optional[float] = None,
    vartheta: Optional[float] = None,
) -> RunTrace:
    """Generic driver: caller supplies direction and step rules.

    When ``rho_hat`` and ``vartheta`` are given, each recorded row gets
    a descent_ok flag stating whether the step achieved

        value_{k+1} <= value_k - rho_hat * ||g_k||^{1+vartheta} + eps_{k+1}.

    The flag is reported, not enforced: with uncertifiable oracle
    accuracy a failed row is diagnostic, not an error.
    """
    inner = inner or InnerSolverConfig()
    clock = clock or WallClock()
    engine = _Engine(
        f, params, inner, budget, clock, x_true, stride,
        flag_rho_hat=rho_hat, flag_vartheta=vartheta,
    )
    header = _base_header("generic", f, params, inner, budget, clock, stride)
    if rho_hat is not None:
        header["rho_hat"] = rho_hat
    if vartheta is not None:
        header["vartheta"] = vartheta
    return _finish(engine, header, _RuleController(direction_rule, step_rule), x0)


def sg_run(
    f,
    x0,
    budget: Budget,
    step_kind: str = "decaying",
    alpha0: float = 0.95,
    clock=None,
    x_true=None,
    stride: int = 1,
) -> RunTrace:
    """Normalized subgradient descent on f itself (baseline).

    Uses the same step schedules as the inner solver but runs against
    the outer budget and traces every recorded iterate; the value
    column holds phi(x^k), not an envelope estimate.
    """
    cfg = InnerSolverConfig(kind=step_kind, alpha0=alpha0, max_iters=1)
    clock = clock or WallClock()
    x = np.asarray(x0, dtype=float).copy()
    rows: list[TraceRow] = []
    stride = max(int(stride), 1)
    k = 0
    status = "budget"
    while True:
        v, zeta = f.value_and_subgradient(x)
        clock.add(1)
        zn = float(np.linalg.norm(zeta))
        rel = relative_error(x, x_true) if x_true is not None else None
        row = TraceRow(
            iter=k,
            wall_time_s=clock.now(),
            value_eps=float(v),
            grad_eps_norm=zn,
            relative_error=rel,
        )
        if zn == 0.0:
            rows.append(row)
            status = "stationary"
            break
        if budget.max_seconds is not None and clock.now() >= budget.max_seconds:
            rows.append(row)
            status = "budget"
            break
        if budget.max_iters is not None and k >= budget.max_iters:
            rows.append(row)
            status = "iters"
            break
        alpha = cfg.step_size(k)
        if k % stride == 0:
            row.step_alpha = alpha
            rows.append(row)
        x = x - (alpha / zn) * zeta
        k += 1
    alg = "sg-dss" if step_kind == "decaying" else "sg-css"
    header = {
        "alg": alg,
        "problem": getattr(f, "name", "") or "custom",
        "dim": getattr(f, "dim", None),
        "alpha0": alpha0,
        "step_kind": step_kind,
        "budget.grad_tol": budget.grad_tol,
        "clock.mode": clock.mode,
        "value_kind": "objective",
        "status": status,
    }
    if budget.max_iters is not None:
        header["budget.max_iters"] = budget.max_iters
    if budget.max_seconds is not None:
        header["budget.max_seconds"] = budget.max_seconds
    if clock.seconds_per_unit is not None:
        header["clock.seconds_per_unit"] = clock.seconds_per_unit
    if stride != 1:
        header["stride"] = stride
    return RunTrace(header=header, rows=rows, x_final=x)


def realized_rho_hat(trace: RunTrace, params: SolverParams, alg: str) -> float:
    """Per-iteration decrease coefficient actually guaranteed by a run.

    For the line-search method every accepted step satisfies the Armijo
    inequality with coefficient alpha_k * lambda * ctilde, so the run-
    wide guarantee uses the smallest accepted step.  For the step-size
    methods the accepted (alpha_k, Lbar_{k+1}) pairs give

        alpha_k * (ctilde - (2 Lbar/(p+1)) alpha_k^{(p-1)/2} c2^{(p+1)/2}).
    """
    steps = [r for r in trace.rows if r.step_alpha is not None]
    if not steps:
        raise ValueError("trace has no accepted steps")
    p, c2 = params.p, params.c2
    ct = params.ctilde()
    if alg == "ideals":
        return min(r.step_alpha for r in steps) * params.armijo_lambda * ct
    if alg in ("higda", "pf-higda"):
        vals = []
        for r in steps:
            lbar = r.lbar
            if lbar is None:
                if "grad_hoelder" not in trace.header:
                    raise ValueError("fixed-step trace lacks its gradient constant")
                lbar = float(trace.header["grad_hoelder"])
            vals.append(
                r.step_alpha
                * (ct - (2.0 * lbar / (p + 1.0)) * r.step_alpha ** ((p - 1.0) / 2.0)
                   * c2 ** ((p + 1.0) / 2.0))
            )
        out = min(vals)
        if out <= 0:
            raise ValueError("realized decrease coefficient is nonpositive")
        return out
    raise ValueError(f"unknown algorithm {alg!r}")


@dataclass(frozen=True)
class RateReport:
    """Residual-rate comparison: observed min gradient norms vs the
    telescoped bound ((value_0 - f_star + eps_total)/((N+1) rho_hat))^{1/(1+vartheta)}."""

    n: np.ndarray
    min_grad: np.ndarray
    bound: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return self.min_grad / self.bound


def residual_rate_report(
    trace: RunTrace,
    params: SolverParams,
    f_star_bound: float,
    rho_hat: float,
    vartheta: float,
) -> RateReport:
    """Compare min_{k<=N} ||g_k|| against the theoretical envelope.

    ``f_star_bound`` must lower-bound the envelope (any lower bound of
    phi works).  The bound holds for every N whenever each accepted
    step decreased the estimate by rho_hat * ||g_k||^{1+vartheta} up to
    the eps slack, which :func:`realized_rho_hat` extracts from a trace.
    """
    if rho_hat <= 0:
        raise ValueError("rho_hat must be positive")
    grads = np.array([r.grad_eps_norm for r in trace.rows])
    if grads.size == 0:
        raise ValueError("trace has no rows")
    value0 = trace.rows[0].value_eps
    num = value0 - f_star_bound + params.eps_total()
    if num < 0:
        raise ValueError("f_star_bound exceeds the initial envelope estimate")
    n = np.arange(grads.size)
    min_grad = np.minimum.accumulate(grads)
    bound = (num / ((n + 1.0) * rho_hat)) ** (1.0 / (1.0 + vartheta))
    return RateReport(n=n, min_grad=min_grad, bound=bound)
