"""Experiment harness: rosters of algorithms raced on identical
instances with deterministic sub-seeding and budget metering.

Directory layout per experiment:

    <out>/<experiment>/<label>/k1=<v>/trial<t>.csv   one trace per trial
    <out>/<experiment>/trials.csv                    per-trial final results
    <out>/<experiment>/summary.csv                   success table (when
                                                     thresholds are set) or
                                                     per-cell aggregates
    <out>/<experiment>/selection.csv                 best roster entry per
                                                     group (sweep kinds)

Sub-seeding: the instance for (cell k1, trial t) is drawn from
``numpy.random.SeedSequence([master_seed, k1, t])``, so it depends only
on those values: reordering cells or the roster, or changing --jobs,
never changes any trial's data.  All roster entries see identical
instances.  Aggregate files are sorted by key before writing, so they
are byte-stable at any worker count; individual trace files are
byte-stable whenever the clock is virtual.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from proxsmooth.descent import (
    Budget,
    SolverAbort,
    SolverParams,
    higda_run,
    ideals_run,
    make_clock,
    pf_higda_run,
    sg_run,
)
from proxsmooth.objectives import generate_instance, sparse_recovery_objective
from proxsmooth.prox import InnerSolverConfig
from proxsmooth.trace import fmt_float

_KINDS = ("comparison", "p-sweep", "omega-sweep", "success")
ALGORITHM_NAMES = ("ideals", "pf-higda", "higda", "sg-dss", "sg-css")


@dataclass(frozen=True)
class AlgorithmSpec:
    """One roster entry: an algorithm name plus its parameters."""

    name: str
    p: float = 1.25
    omega: Optional[float] = None
    scenario: str = "S1"
    alpha: float = 0.01  # constant-step size for sg-css
    gamma: float = 0.9
    eps_scale: float = 1.0
    grad_hoelder: Optional[float] = None  # required for higda
    stride: int = 1
    label: str = ""

    def __post_init__(self):
        if self.name not in ALGORITHM_NAMES:
            raise ValueError(f"unknown algorithm {self.name!r}; choose from {ALGORITHM_NAMES}")
        if self.name == "higda" and self.grad_hoelder is None:
            raise ValueError("higda needs grad_hoelder in its roster entry")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        if self.name == "sg-dss":
            return "sg-dss"
        if self.name == "sg-css":
            return f"sg-css-a{self.alpha:g}"
        bits = [self.name, f"p{self.p:g}"]
        if self.name == "pf-higda":
            bits.append(self.scenario)
        if self.name == "ideals":
            omega = self.omega
            if omega is None:
                omega = (2.0 - self.p) / (self.p - 1.0)
            bits.append(f"w{omega:g}")
        return "-".join(bits)


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment block: instance family, roster, budget, metering."""

    name: str
    kind: str
    roster: tuple[AlgorithmSpec, ...]
    n: int = 200
    m: int = 100
    k1: tuple[int, ...] = (10,)
    k2: int = 6
    sigma: float = 1.0
    lambda_bar: float = 0.5
    trials: int = 1
    master_seed: int = 0
    budget_s: float = 5.0
    max_iters: Optional[int] = None
    grad_tol: float = 1e-8
    thresholds: tuple[float, ...] = (1e-2, 1e-3)
    clock_mode: str = "virtual"
    seconds_per_unit: Optional[float] = None
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"experiment kind must be one of {_KINDS}")
        if not self.roster:
            raise ValueError("experiment roster is empty")
        if len({a.label for a in self.roster}) != len(self.roster):
            raise ValueError("roster labels are not unique")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        for th in self.thresholds:
            if not 0.0 < th < 1.0:
                raise ValueError(f"success thresholds must lie in (0, 1), got {th}")
        if not self.k1:
            raise ValueError("at least one k1 cell is required")


def trial_seed(master_seed: int, k1: int, trial: int) -> np.random.SeedSequence:
    """Deterministic sub-seed for one (cell, trial); order-independent."""
    return np.random.SeedSequence([int(master_seed), int(k1), int(trial)])


@dataclass(frozen=True)
class TrialResult:
    label: str
    k1: int
    trial: int
    status: str
    iters: int
    final_value: float
    final_relative_error: float
    final_grad_norm: float


@dataclass
class SuccessTable:
    """Success counts per (algorithm label, k1, threshold)."""

    rows: list[tuple[str, int, float, int, int]] = field(default_factory=list)

    def add(self, label: str, k1: int, threshold: float, successes: int, trials: int):
        self.rows.append((label, k1, threshold, successes, trials))

    def probability(self, label: str, k1: int, threshold: float) -> float:
        for l, c, th, s, t in self.rows:
            if l == label and c == k1 and th == threshold:
                return s / t
        raise KeyError((label, k1, threshold))

    def to_csv(self) -> str:
        out = ["algorithm,k1,threshold,successes,trials,probability"]
        for l, c, th, s, t in sorted(self.rows):
            out.append(f"{l},{c},{fmt_float(th)},{s},{t},{fmt_float(s / t)}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "SuccessTable":
        table = cls()
        lines = [l for l in text.splitlines() if l]
        if lines[0] != "algorithm,k1,threshold,successes,trials,probability":
            raise ValueError("not a success table")
        for line in lines[1:]:
            l, c, th, s, t, _p = line.split(",")
            table.add(l, int(c), float(th), int(s), int(t))
        return table


def run_trial(spec: ExperimentSpec, alg: AlgorithmSpec, k1: int, trial: int, outdir) -> TrialResult:
    """Run one (algorithm, cell, trial) and write its trace file."""
    seed_seq = trial_seed(spec.master_seed, k1, trial)
    seed = int(seed_seq.generate_state(1)[0])
    inst = generate_instance(
        n=spec.n, m=spec.m, k1=k1, k2=spec.k2,
        sigma=spec.sigma, lambda_bar=spec.lambda_bar, seed=seed,
    )
    f = sparse_recovery_objective(inst)
    x0 = np.zeros(spec.n)
    budget = Budget(
        max_iters=spec.max_iters, max_seconds=spec.budget_s, grad_tol=spec.grad_tol
    )
    clock = make_clock(spec.clock_mode, spec.seconds_per_unit)
    status = None
    try:
        if alg.name == "ideals":
            params = SolverParams(p=alg.p, gamma=alg.gamma, omega=alg.omega,
                                  eps_scale=alg.eps_scale)
            trace = ideals_run(f, params, x0, budget, inner=spec.inner, clock=clock,
                               x_true=inst.x_true, stride=alg.stride)
        elif alg.name == "pf-higda":
            params = SolverParams(p=alg.p, gamma=alg.gamma, scenario=alg.scenario,
                                  eps_scale=alg.eps_scale)
            trace = pf_higda_run(f, params, x0, budget, inner=spec.inner, clock=clock,
                                 x_true=inst.x_true, stride=alg.stride)
        elif alg.name == "higda":
            params = SolverParams(p=alg.p, gamma=alg.gamma, eps_scale=alg.eps_scale)
            trace = higda_run(f, params, x0, budget, alg.grad_hoelder, inner=spec.inner,
                              clock=clock, x_true=inst.x_true, stride=alg.stride)
        elif alg.name == "sg-dss":
            trace = sg_run(f, x0, budget, step_kind="decaying", alpha0=0.95,
                           clock=clock, x_true=inst.x_true, stride=alg.stride)
        else:  # sg-css
            trace = sg_run(f, x0, budget, step_kind="constant", alpha0=alg.alpha,
                           clock=clock, x_true=inst.x_true, stride=alg.stride)
        status = trace.header["status"]
    except SolverAbort as abort:
        trace = abort.trace
        status = "aborted"
    trace.header.update(
        {
            "experiment": spec.name,
            "label": alg.label,
            "master_seed": spec.master_seed,
            "k1": k1,
            "trial": trial,
            "instance.seed": seed,
            "instance.n": spec.n,
            "instance.m": spec.m,
            "instance.k2": spec.k2,
            "instance.sigma": spec.sigma,
            "instance.lambda_bar": spec.lambda_bar,
            "status": status,
        }
    )
    cell_dir = Path(outdir) / spec.name / alg.label / f"k1={k1}"
    cell_dir.mkdir(parents=True, exist_ok=True)
    trace.write(cell_dir / f"trial{trial}.csv")
    last = trace.final_row()
    return TrialResult(
        label=alg.label,
        k1=k1,
        trial=trial,
        status=status,
        iters=last.iter,
        final_value=last.value_eps,
        final_relative_error=(
            last.relative_error if last.relative_error is not None else math.nan
        ),
        final_grad_norm=last.grad_eps_norm,
    )


def _task(args):
    spec, alg, k1, trial, outdir = args
    return run_trial(spec, alg, k1, trial, outdir)


def run_experiment(spec: ExperimentSpec, outdir, jobs: int = 1) -> list[TrialResult]:
    """Run all (roster x cells x trials) tasks and write aggregate files."""
    tasks = [
        (spec, alg, k1, trial, outdir)
        for alg in spec.roster
        for k1 in spec.k1
        for trial in range(spec.trials)
    ]
    if jobs <= 1:
        results = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks, chunksize=1))
    results.sort(key=lambda r: (r.label, r.k1, r.trial))
    exp_dir = Path(outdir) / spec.name
    exp_dir.mkdir(parents=True, exist_ok=True)
    _write_trials(exp_dir / "trials.csv", results)
    table = success_table(spec, results)
    with open(exp_dir / "summary.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table.to_csv())
    if spec.kind in ("p-sweep", "omega-sweep"):
        _write_selection(exp_dir / "selection.csv", spec, results)
    return results


def _write_trials(path, results: list[TrialResult]) -> None:
    lines = ["algorithm,k1,trial,status,iters,final_value,final_relative_error,final_grad_norm"]
    for r in results:
        lines.append(
            f"{r.label},{r.k1},{r.trial},{r.status},{r.iters},"
            f"{fmt_float(r.final_value)},{fmt_float(r.final_relative_error)},"
            f"{fmt_float(r.final_grad_norm)}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def success_table(spec: ExperimentSpec, results: list[TrialResult]) -> SuccessTable:
    """Fraction of trials whose final relative error beats each threshold.

    Aborted trials and NaN errors count as failures; a solver that never
    moves from x0 = 0 has relative error 1 and so never succeeds.
    """
    table = SuccessTable()
    for alg in spec.roster:
        for k1 in spec.k1:
            cell = [r for r in results if r.label == alg.label and r.k1 == k1]
            for th in spec.thresholds:
                wins = sum(
                    1
                    for r in cell
                    if r.status != "aborted"
                    and not math.isnan(r.final_relative_error)
                    and r.final_relative_error < th
                )
                table.add(alg.label, k1, th, wins, len(cell))
    return table


def _median(values: list[float]) -> float:
    vals = sorted(values)
    mid = len(vals) // 2
    if len(vals) % 2:
        return vals[mid]
    return 0.5 * (vals[mid - 1] + vals[mid])


def _write_selection(path, spec: ExperimentSpec, results: list[TrialResult]) -> None:
    # Group roster entries by p and pick the argmin of median final error.
    groups: dict[float, list[AlgorithmSpec]] = {}
    for alg in spec.roster:
        groups.setdefault(alg.p, []).append(alg)
    lines = ["p,best_label,median_final_relative_error"]
    for p in sorted(groups):
        best_label, best_err = None, math.inf
        for alg in groups[p]:
            errs = [
                r.final_relative_error
                for r in results
                if r.label == alg.label and not math.isnan(r.final_relative_error)
            ]
            if not errs:
                continue
            med = _median(errs)
            if med < best_err:
                best_label, best_err = alg.label, med
        if best_label is not None:
            lines.append(f"{fmt_float(p)},{best_label},{fmt_float(best_err)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def run_comparison(spec: ExperimentSpec, outdir, jobs: int = 1) -> list[TrialResult]:
    """Race the roster on identical instances (single or multi cell)."""
    return run_experiment(spec, outdir, jobs)


def sweep_p(
    base: ExperimentSpec,
    algorithm: str,
    p_values,
    scenarios=("S1", "S2", "S3"),
    omegas=None,
    outdir=".",
    jobs: int = 1,
) -> list[TrialResult]:
    """Cross an algorithm over p and scenario (or omega) grids.

    Builds the roster product and runs it as one experiment; the
    per-group best configuration lands in selection.csv.
    """
    roster = []
    for p in p_values:
        if algorithm == "pf-higda":
            for sc in scenarios:
                roster.append(AlgorithmSpec(name="pf-higda", p=p, scenario=sc))
        elif algorithm == "ideals":
            for omega in omegas or (None,):
                roster.append(AlgorithmSpec(name="ideals", p=p, omega=omega))
        else:
            raise ValueError(f"sweep does not support algorithm {algorithm!r}")
    kind = "omega-sweep" if algorithm == "ideals" and omegas else "p-sweep"
    spec = _replace_spec(base, roster=tuple(roster), kind=kind)
    return run_experiment(spec, outdir, jobs)


def success_probability(spec: ExperimentSpec, outdir, jobs: int = 1) -> SuccessTable:
    """Run the success-curve protocol and return the table."""
    results = run_experiment(spec, outdir, jobs)
    return success_table(spec, results)


def _replace_spec(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    return replace(spec, **kw)
