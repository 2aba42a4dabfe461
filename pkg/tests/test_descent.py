"""Outer descent loops: step rules, contracts, budgets, and traces."""

import math

import numpy as np
import pytest

from proxsmooth.descent import (
    Budget,
    DEFAULT_SECONDS_PER_UNIT,
    SolverAbort,
    SolverParams,
    VirtualClock,
    WallClock,
    check_direction_pair,
    direction_power,
    higda_run,
    higda_step_size,
    ideals_run,
    itsdeal_generic_run,
    make_clock,
    pf_higda_run,
    realized_rho_hat,
    residual_rate_report,
    sg_run,
)
from proxsmooth.descent import _ProxFreeController
from proxsmooth.envelope import AdmissibilityError
from proxsmooth.objectives import (
    absolute,
    double_well,
    generate_instance,
    quadratic,
    sparse_recovery_objective,
    zero_function,
)
from proxsmooth.prox import TIGHT_INNER, InnerSolverConfig

INNER = InnerSolverConfig(kind="decaying", alpha0=0.95, max_iters=300, move_tol=1e-8)


def test_virtual_clock_accumulates():
    clock = VirtualClock(seconds_per_unit=0.5)
    assert clock.now() == 0.0
    clock.add(3)
    assert clock.now() == 1.5
    clock.add(1)
    assert clock.now() == 2.0
    with pytest.raises(ValueError):
        VirtualClock(seconds_per_unit=0.0)


def test_make_clock():
    assert isinstance(make_clock("wall"), WallClock)
    v = make_clock("virtual")
    assert v.seconds_per_unit == DEFAULT_SECONDS_PER_UNIT
    assert make_clock("virtual", 1e-3).seconds_per_unit == 1e-3
    with pytest.raises(ValueError):
        make_clock("cpu")


def test_solver_params_defaults():
    params = SolverParams(p=1.25)
    # ctilde = 1 - 0.9^{p-1} for unit constants and the default mu
    assert params.ctilde() == pytest.approx(1.0 - 0.9 ** 0.25)
    assert params.step_omega() == pytest.approx((3.0 - 1.25) / 0.25)
    assert params.search_omega() == pytest.approx((2.0 - 1.25) / 0.25)
    explicit = SolverParams(p=1.25, omega=1.5)
    assert explicit.search_omega() == 1.5
    # eps schedule: eps_scale / (k+1)^2, summable
    assert params.eps(0) == 1.0
    assert params.eps(3) == pytest.approx(1.0 / 16.0)
    assert params.eps_total() == pytest.approx(math.pi**2 / 6.0)


def test_solver_params_validation():
    with pytest.raises(AdmissibilityError):
        SolverParams(p=2.5)
    with pytest.raises(AdmissibilityError):
        SolverParams(p=1.0)
    with pytest.raises(AdmissibilityError):
        SolverParams(gamma=0.0)
    with pytest.raises(AdmissibilityError):
        SolverParams(scenario="S4")
    with pytest.raises(AdmissibilityError):
        SolverParams(lbar_growth=1.0)
    with pytest.raises(AdmissibilityError):
        SolverParams(armijo_upsilon=1.0)
    # mu must stay below (c1/(c2 2^{2-p}))^{1/(p-1)}; at p=2 that is 1
    with pytest.raises(AdmissibilityError):
        SolverParams(p=2.0, mu=1.0)
    assert SolverParams(p=2.0, mu=0.999).ctilde() == pytest.approx(0.001)


def test_budget_validation():
    with pytest.raises(ValueError):
        Budget()
    with pytest.raises(ValueError):
        Budget(max_iters=0)
    with pytest.raises(ValueError):
        Budget(max_seconds=0.0)
    Budget(max_iters=10)
    Budget(max_seconds=1.0, grad_tol=0.0)


def test_direction_power():
    g = np.array([3.0, 4.0])
    assert np.array_equal(direction_power(np.zeros(2), 2.0), np.zeros(2))
    assert np.allclose(direction_power(g, 0.0), -g)
    assert np.allclose(direction_power(g, 1.0), -5.0 * g)
    assert np.linalg.norm(direction_power(g, 2.0)) == pytest.approx(5.0**3)


def test_check_direction_pair():
    g = np.array([0.6, -0.8])
    for omega in (0.0, 1.0, 3.0):
        d = direction_power(g, omega)
        assert check_direction_pair(g, d, 1.0, 1.0, omega + 1.0)
        # too long for the c2 cap
        assert not check_direction_pair(g, 3.0 * d, 1.0, 1.0, omega + 1.0)
        # not enough correlation for c1
        assert not check_direction_pair(g, 0.1 * d, 1.0, 1.0, omega + 1.0)
    # zero gradient admits the zero direction
    assert check_direction_pair(np.zeros(2), np.zeros(2), 1.0, 1.0, 2.0)


def test_higda_step_size_frozen():
    # p=2, mu=0.45, gamma=1, constant 3: min(1, (3*0.55/6)^2) = 0.075625
    params = SolverParams(p=2.0, gamma=1.0, mu=0.45)
    assert higda_step_size(params, 3.0) == pytest.approx(0.075625, rel=1e-15)
    # the gamma cap binds for small constants
    assert higda_step_size(params, 1e-6) == 1.0
    with pytest.raises(AdmissibilityError):
        higda_step_size(params, 0.0)


def test_higda_run_descends_quadratic():
    f = quadratic(1)
    # mu=0.45 keeps ctilde large enough that the fixed step makes
    # visible progress within the iteration budget
    params = SolverParams(p=2.0, gamma=1.0, mu=0.45)
    budget = Budget(max_iters=300, grad_tol=1e-10)
    trace = higda_run(f, params, np.array([3.0]), budget, grad_hoelder=2.0,
                      inner=INNER, clock=VirtualClock())
    assert trace.header["alg"] == "higda"
    assert trace.header["alpha"] == higda_step_size(params, 2.0)
    vals = trace.column("value_eps")
    assert vals[-1] < 0.05 * vals[0]
    # fixed step recorded on every non-final row
    alphas = [a for a in trace.column("step_alpha") if a is not None]
    assert len(alphas) == len(trace.rows) - 1
    assert all(a == trace.header["alpha"] for a in alphas)


def test_higda_rejects_explicit_omega():
    params = SolverParams(p=1.5, omega=1.0)
    with pytest.raises(AdmissibilityError):
        higda_run(quadratic(1), params, np.array([1.0]), Budget(max_iters=5), 1.0)
    with pytest.raises(AdmissibilityError):
        pf_higda_run(quadratic(1), params, np.array([1.0]), Budget(max_iters=5))


def _reverify_pf_rows(trace, params):
    ct = params.ctilde()
    p, c2 = params.p, params.c2
    for prev, nxt in zip(trace.rows, trace.rows[1:]):
        if prev.step_alpha is None:
            continue
        alpha, lbar, gn = prev.step_alpha, prev.lbar, prev.grad_eps_norm
        bracket = ct - (2.0 * lbar / (p + 1.0)) * alpha ** ((p - 1.0) / 2.0) * c2 ** (
            (p + 1.0) / 2.0
        )
        rhs = (
            prev.value_eps
            - alpha * bracket * gn ** ((p + 1.0) / (p - 1.0))
            + params.eps(prev.iter + 1)
        )
        assert nxt.value_eps <= rhs + 1e-9 * max(1.0, abs(rhs))


def test_pf_higda_scenarios_accept_and_satisfy_bracket():
    f = quadratic(1)
    budget = Budget(max_iters=25, grad_tol=1e-10)
    for scenario in ("S1", "S2", "S3"):
        params = SolverParams(p=1.5, gamma=0.5, scenario=scenario, lbar0=1e-3)
        trace = pf_higda_run(f, params, np.array([2.0]), budget,
                             inner=INNER, clock=VirtualClock())
        assert trace.header["scenario"] == scenario
        steps = [r for r in trace.rows if r.step_alpha is not None]
        assert steps and all(r.lbar is not None for r in steps)
        assert all(r.backtracks < params.max_inner_trials for r in steps)
        _reverify_pf_rows(trace, params)
        assert trace.rows[-1].value_eps < trace.rows[0].value_eps


def test_pf_s3_base_cases():
    params = SolverParams(p=1.5, scenario="S3", lbar0=0.123)
    ctrl = _ProxFreeController(params)
    g = np.array([0.4])
    # before any accepted step the estimate falls back to lbar0
    assert ctrl._base(0, np.array([1.0]), g) == 0.123
    # identical consecutive gradients give a zero estimate, which the
    # ladder maps to the gamma-capped step instead of dividing by zero
    ctrl.prev_x = np.array([1.5])
    ctrl.prev_g = g.copy()
    assert ctrl._base(3, np.array([1.0]), g) == 0.0
    # generic case: ||dg|| / ||dx||^{(p-1)/2}
    ctrl.prev_g = np.array([0.1])
    est = ctrl._base(3, np.array([1.0]), g)
    assert est == pytest.approx(0.3 / 0.5 ** 0.25)


def test_ideals_first_step_accepted_at_one():
    # from x0=4 on the p=2 quadratic the unit step more than satisfies
    # the decrease test, so no backtracking happens at k=0
    f = quadratic(1)
    params = SolverParams(p=2.0, gamma=1.0)
    trace = ideals_run(f, params, np.array([4.0]), Budget(max_iters=3),
                       inner=TIGHT_INNER, clock=VirtualClock())
    assert trace.rows[0].step_alpha == 1.0
    assert trace.rows[0].backtracks == 0
    assert trace.rows[0].value_eps == pytest.approx(4.0, abs=1e-8)
    assert trace.rows[0].grad_eps_norm == pytest.approx(2.0, abs=1e-7)
    assert trace.x_final is not None and trace.x_final.shape == (1,)


def _reverify_armijo_rows(trace, params):
    omega = params.search_omega()
    decrease = params.armijo_lambda * params.ctilde()
    for prev, nxt in zip(trace.rows, trace.rows[1:]):
        if prev.step_alpha is None:
            continue
        rhs = (
            prev.value_eps
            - prev.step_alpha * decrease * prev.grad_eps_norm ** (2.0 + omega)
            + params.eps(prev.iter + 1)
        )
        assert nxt.value_eps <= rhs + 1e-9 * max(1.0, abs(rhs))


def test_ideals_armijo_contract_from_trace():
    f = double_well()
    params = SolverParams(p=1.5, gamma=0.5)
    trace = ideals_run(f, params, np.array([1.4]), Budget(max_iters=40),
                       inner=INNER, clock=VirtualClock())
    steps = [r for r in trace.rows if r.step_alpha is not None]
    assert steps
    assert all(r.backtracks <= params.max_backtracks for r in steps)
    _reverify_armijo_rows(trace, params)


def test_ideals_abort_carries_partial_trace():
    # omega=8 blows up the direction length so the single allowed trial
    # at alpha=1 overshoots and the search gives up immediately
    inst = generate_instance(n=20, m=10, k1=2, k2=1, lambda_bar=0.5, seed=0)
    f = sparse_recovery_objective(inst)
    params = SolverParams(p=1.25, gamma=0.9, omega=8.0, max_backtracks=0)
    with pytest.raises(SolverAbort) as info:
        ideals_run(f, params, np.zeros(20), Budget(max_iters=50),
                   inner=INNER, clock=VirtualClock())
    trace = info.value.trace
    assert trace is not None
    assert trace.header["status"] == "aborted"
    assert trace.rows, "partial trace must keep the rows before the abort"
    assert trace.rows[-1].step_alpha is None


def test_generic_run_matches_higda():
    f = quadratic(2)
    params = SolverParams(p=2.0, gamma=1.0)
    alpha = higda_step_size(params, 2.0)
    budget = Budget(max_iters=15, grad_tol=1e-12)
    x0 = np.array([1.0, -2.0])
    ref = higda_run(f, params, x0, budget, grad_hoelder=2.0,
                    inner=INNER, clock=VirtualClock())
    gen = itsdeal_generic_run(
        f, params, x0, budget,
        direction_rule=lambda k, g: direction_power(g, params.step_omega()),
        step_rule=lambda k, x, g, d: alpha,
        inner=INNER, clock=VirtualClock(),
    )
    assert len(ref.rows) == len(gen.rows)
    for a, b in zip(ref.rows, gen.rows):
        assert a.value_eps == b.value_eps
        assert a.grad_eps_norm == b.grad_eps_norm
        assert a.step_alpha == b.step_alpha


def test_generic_run_descent_flags():
    f = quadratic(1)
    params = SolverParams(p=2.0, gamma=1.0)
    trace = itsdeal_generic_run(
        f, params, np.array([2.0]), Budget(max_iters=10),
        direction_rule=lambda k, g: -g,
        step_rule=lambda k, x, g, d: 0.4,
        inner=INNER, clock=VirtualClock(),
        rho_hat=0.01, vartheta=1.0,
    )
    flags = [r.descent_ok for r in trace.rows if r.step_alpha is not None]
    assert flags and set(flags) <= {0, 1}
    assert trace.header["rho_hat"] == 0.01
    # a hostile step rule aborts instead of looping
    with pytest.raises(SolverAbort):
        itsdeal_generic_run(
            f, params, np.array([2.0]), Budget(max_iters=10),
            direction_rule=lambda k, g: -g,
            step_rule=lambda k, x, g, d: 0.0,
            inner=INNER, clock=VirtualClock(),
        )


def test_sg_run_value_is_objective():
    f = quadratic(1)
    trace = sg_run(f, np.array([2.0]), Budget(max_iters=20), step_kind="decaying",
                   alpha0=0.5, clock=VirtualClock())
    assert trace.header["alg"] == "sg-dss"
    assert trace.header["value_kind"] == "objective"
    assert trace.rows[0].value_eps == 2.0  # phi(x0), not the envelope
    assert trace.rows[0].step_alpha == 0.5
    # normalized first step moves exactly alpha0
    assert trace.rows[1].value_eps == pytest.approx(0.5 * 1.5**2)
    css = sg_run(f, np.array([2.0]), Budget(max_iters=5), step_kind="constant",
                 alpha0=0.3, clock=VirtualClock())
    assert css.header["alg"] == "sg-css"
    assert all(r.step_alpha == 0.3 for r in css.rows if r.step_alpha is not None)


def test_sg_run_stationary_stop():
    trace = sg_run(zero_function(2), np.ones(2), Budget(max_iters=50),
                   clock=VirtualClock())
    assert trace.header["status"] == "stationary"
    assert len(trace.rows) == 1
    assert trace.rows[0].grad_eps_norm == 0.0


def test_budget_stops():
    f = quadratic(1)
    params = SolverParams(p=2.0, gamma=1.0)
    clock = VirtualClock(seconds_per_unit=1.0)  # one second per inner iter
    trace = ideals_run(f, params, np.array([4.0]),
                       Budget(max_seconds=1000.0, grad_tol=0.0),
                       inner=INNER, clock=clock)
    assert trace.header["status"] == "budget"
    assert trace.rows[-1].wall_time_s >= 1000.0
    trace = ideals_run(f, params, np.array([4.0]), Budget(max_iters=4),
                       inner=INNER, clock=VirtualClock())
    assert trace.header["status"] == "iters"
    assert trace.rows[-1].iter == 4


def test_grad_tol_stop_on_stationary_start():
    f = double_well()
    params = SolverParams(p=1.5, gamma=0.6)
    trace = ideals_run(f, params, np.array([0.0]), Budget(max_iters=50),
                       inner=TIGHT_INNER, clock=VirtualClock())
    # x=0 is subproblem-stationary, so the run ends before stepping
    assert trace.header["status"] == "stationary"
    assert len(trace.rows) == 1


def test_stride_thins_rows():
    f = quadratic(1)
    params = SolverParams(p=2.0, gamma=1.0)
    trace = ideals_run(f, params, np.array([4.0]), Budget(max_iters=10),
                       inner=INNER, clock=VirtualClock(), stride=4)
    iters = trace.column("iter")
    assert iters == [0, 4, 8, 10]  # every 4th plus the final row
    assert trace.header["stride"] == "4" or trace.header["stride"] == 4


def test_relative_error_column():
    f = quadratic(2)
    params = SolverParams(p=2.0, gamma=1.0)
    x_true = np.array([0.0, 0.0])
    with pytest.raises(ValueError):
        ideals_run(f, params, np.ones(2), Budget(max_iters=2),
                   inner=INNER, clock=VirtualClock(), x_true=x_true)
    x_true = np.array([1.0, 1.0])
    trace = ideals_run(f, params, np.ones(2), Budget(max_iters=2),
                       inner=INNER, clock=VirtualClock(), x_true=x_true)
    assert trace.rows[0].relative_error == pytest.approx(0.0)


def test_realized_rho_hat_and_rate_report():
    f = quadratic(1)
    params = SolverParams(p=1.5, gamma=0.5)
    trace = ideals_run(f, params, np.array([2.0]),
                       Budget(max_iters=60, grad_tol=0.0),
                       inner=INNER, clock=VirtualClock())
    rho = realized_rho_hat(trace, params, "ideals")
    steps = [r.step_alpha for r in trace.rows if r.step_alpha is not None]
    assert rho == pytest.approx(min(steps) * params.armijo_lambda * params.ctilde())
    vartheta = params.search_omega() + 1.0
    report = residual_rate_report(trace, params, 0.0, rho, vartheta)
    assert np.all(report.min_grad <= report.bound + 1e-12)
    assert np.all(np.diff(report.min_grad) <= 1e-15)
    assert np.all(report.ratio <= 1.0 + 1e-12)


def test_realized_rho_hat_pf():
    f = quadratic(1)
    params = SolverParams(p=1.5, gamma=0.5, scenario="S2")
    trace = pf_higda_run(f, params, np.array([2.0]), Budget(max_iters=20),
                         inner=INNER, clock=VirtualClock())
    rho = realized_rho_hat(trace, params, "pf-higda")
    assert rho > 0.0
    with pytest.raises(ValueError):
        realized_rho_hat(trace, params, "sgd")


def test_rate_report_validation():
    f = quadratic(1)
    params = SolverParams(p=1.5, gamma=0.5)
    trace = ideals_run(f, params, np.array([2.0]), Budget(max_iters=5),
                       inner=INNER, clock=VirtualClock())
    with pytest.raises(ValueError):
        residual_rate_report(trace, params, 0.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        residual_rate_report(trace, params, 1e9, 0.1, 2.0)


def test_absolute_ideals_converges_to_kink():
    # with the default eps schedule the search happily accepts value-neutral
    # reflections across the kink, so shrink the slack to force contraction
    f = absolute()
    params = SolverParams(p=2.0, gamma=0.5, eps_scale=1e-12)
    trace = ideals_run(f, params, np.array([1.7]),
                       Budget(max_iters=60, grad_tol=1e-5),
                       inner=TIGHT_INNER, clock=VirtualClock())
    assert trace.header["status"] == "stationary"
    # the envelope gradient vanishes only at the minimizer x = 0
    assert trace.rows[-1].grad_eps_norm <= 1e-5
    assert trace.rows[-1].value_eps <= 1e-9
