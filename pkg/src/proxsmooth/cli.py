"""Command-line interface.

Subcommands:

* ``solve``: run one algorithm on one problem, write a trace CSV.
* ``bench``: run the experiment blocks of a TOML spec file.
* ``verify``: run the invariant suite, print a JSON report.
* ``gen-instance``: generate and save a sparse recovery instance.

Exit codes: 0 on success, 1 on failed verification, 2 on configuration
errors (including inadmissible parameter combinations), 3 when a solver
aborts (step-acceptance caps exhausted).  There is no service mode;
every invocation is a batch run that writes files and exits.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

import numpy as np

from proxsmooth import __version__
from proxsmooth.bench import AlgorithmSpec, ExperimentSpec, run_experiment
from proxsmooth.config import ConfigError, header_entries, load_toml, resolve
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
from proxsmooth.envelope import AdmissibilityError, safeguarded_bounds
from proxsmooth.objectives import (
    absolute,
    double_well,
    generate_instance,
    load_instance,
    quadratic,
    save_instance,
    sparse_recovery_objective,
)
from proxsmooth.prox import InnerSolverConfig
from proxsmooth.verify import run_verification

_ALGS = ("ideals", "pf-higda", "higda", "sg-dss", "sg-css")
_PROBLEMS = ("rsr", "quadratic", "abs", "double-well")

_FLAG_TO_KEY = {
    "alg": "alg",
    "p": "p",
    "gamma": "gamma",
    "mu": "mu",
    "omega": "omega",
    "scenario": "scenario",
    "eps_scale": "eps_scale",
    "max_inner_trials": "max_inner_trials",
    "max_backtracks": "max_backtracks",
    "grad_hoelder": "grad_hoelder",
    "sg_alpha": "sg_alpha",
    "budget_s": "budget.seconds",
    "max_iters": "budget.max_iters",
    "grad_tol": "budget.grad_tol",
    "clock": "clock.mode",
    "seconds_per_unit": "clock.seconds_per_unit",
    "problem": "problem.name",
    "dim": "problem.dim",
    "n": "problem.n",
    "m": "problem.m",
    "k1": "problem.k1",
    "k2": "problem.k2",
    "sigma": "problem.sigma",
    "lambda_bar": "problem.lambda_bar",
    "instance": "problem.instance",
    "radius": "safeguard.radius",
    "gamma_max": "safeguard.gamma_max",
    "seed": "run.seed",
    "out": "run.out",
    "jobs": "run.jobs",
    "stride": "run.stride",
    "x0": "run.x0",
}


def _add_solve_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="TOML config file; flags override it")
    sp.add_argument("--alg", choices=_ALGS)
    sp.add_argument("--p", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--omega", type=float)
    sp.add_argument("--scenario", choices=("S1", "S2", "S3"))
    sp.add_argument("--eps-scale", type=float, dest="eps_scale")
    sp.add_argument("--max-inner-trials", type=int, dest="max_inner_trials")
    sp.add_argument("--max-backtracks", type=int, dest="max_backtracks")
    sp.add_argument("--grad-hoelder", type=float, dest="grad_hoelder")
    sp.add_argument("--sg-alpha", type=float, dest="sg_alpha")
    sp.add_argument("--budget-s", type=float, dest="budget_s")
    sp.add_argument("--max-iters", type=int, dest="max_iters")
    sp.add_argument("--grad-tol", type=float, dest="grad_tol")
    sp.add_argument("--clock", choices=("wall", "virtual"))
    sp.add_argument("--seconds-per-unit", type=float, dest="seconds_per_unit")
    sp.add_argument("--problem", choices=_PROBLEMS)
    sp.add_argument("--dim", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--k1", type=int)
    sp.add_argument("--k2", type=int)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--lambda-bar", type=float, dest="lambda_bar")
    sp.add_argument("--instance", help="path to a saved instance (.npz)")
    sp.add_argument("--radius", type=float, help="safeguarded-mode confinement radius")
    sp.add_argument("--gamma-max", type=float, dest="gamma_max")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--jobs", type=int)
    sp.add_argument("--stride", type=int)
    sp.add_argument("--x0", choices=("zeros", "random"))


def _overrides_from_args(args: argparse.Namespace) -> dict:
    out = {}
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def _build_problem(cfg: dict):
    """Returns (objective, x_true or None, instance or None)."""
    name = cfg["problem.name"]
    if name == "rsr":
        if cfg["problem.instance"]:
            inst = load_instance(cfg["problem.instance"])
        else:
            inst = generate_instance(
                n=cfg["problem.n"], m=cfg["problem.m"],
                k1=cfg["problem.k1"], k2=cfg["problem.k2"],
                sigma=cfg["problem.sigma"], lambda_bar=cfg["problem.lambda_bar"],
                seed=cfg["run.seed"],
            )
        return sparse_recovery_objective(inst), inst.x_true, inst
    if name == "quadratic":
        return quadratic(cfg["problem.dim"]), None, None
    if name == "abs":
        return absolute(), None, None
    if name == "double-well":
        return double_well(), None, None
    raise ConfigError(f"unknown problem {name!r}")


def _build_x0(cfg: dict, dim: int) -> np.ndarray:
    if cfg["run.x0"] == "zeros":
        return np.zeros(dim)
    if cfg["run.x0"] == "random":
        return np.random.default_rng(cfg["run.seed"]).normal(size=dim)
    raise ConfigError(f"unknown x0 source {cfg['run.x0']!r}")


def cmd_solve(args: argparse.Namespace) -> int:
    file_values = load_toml(args.config) if args.config else {}
    cfg = resolve(file_values, _overrides_from_args(args))
    if cfg["budget.seconds"] is None and cfg["budget.max_iters"] is None:
        raise ConfigError("set --budget-s or --max-iters")
    f, x_true, _inst = _build_problem(cfg)
    x0 = _build_x0(cfg, f.dim)
    params = SolverParams(
        p=cfg["p"], gamma=cfg["gamma"], c1=cfg["c1"], c2=cfg["c2"],
        mu=cfg["mu"], omega=cfg["omega"], scenario=cfg["scenario"],
        lbar_growth=cfg["lbar_growth"], lbar0=cfg["lbar0"],
        armijo_lambda=cfg["armijo_lambda"], armijo_upsilon=cfg["armijo_upsilon"],
        eps_scale=cfg["eps_scale"],
        max_inner_trials=cfg["max_inner_trials"],
        max_backtracks=cfg["max_backtracks"],
    )
    inner = InnerSolverConfig(
        kind=cfg["inner.kind"], alpha0=cfg["inner.alpha0"],
        max_iters=cfg["inner.max_iters"], move_tol=cfg["inner.move_tol"],
    )
    budget = Budget(
        max_iters=cfg["budget.max_iters"], max_seconds=cfg["budget.seconds"],
        grad_tol=cfg["budget.grad_tol"],
    )
    clock = make_clock(cfg["clock.mode"], cfg["clock.seconds_per_unit"])
    alg = cfg["alg"]
    common = dict(inner=inner, clock=clock, x_true=x_true, stride=cfg["run.stride"])
    out_dir = Path(cfg["run.out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.csv"
    try:
        if alg == "ideals":
            trace = ideals_run(f, params, x0, budget, **common)
        elif alg == "pf-higda":
            trace = pf_higda_run(f, params, x0, budget, **common)
        elif alg == "higda":
            gh = cfg["grad_hoelder"]
            if gh is None:
                if cfg["safeguard.radius"] is None or cfg["safeguard.gamma_max"] is None:
                    raise ConfigError(
                        "higda needs the gradient Hoelder constant: pass "
                        "--grad-hoelder, or --radius and --gamma-max to derive it"
                    )
                bounds = safeguarded_bounds(
                    f, params.p, params.gamma,
                    cfg["safeguard.radius"], cfg["safeguard.gamma_max"],
                )
                gh = bounds.grad_hoelder
            trace = higda_run(f, params, x0, budget, gh, **common)
        elif alg == "sg-dss":
            trace = sg_run(f, x0, budget, step_kind="decaying",
                           alpha0=cfg["inner.alpha0"], clock=clock,
                           x_true=x_true, stride=cfg["run.stride"])
        elif alg == "sg-css":
            trace = sg_run(f, x0, budget, step_kind="constant",
                           alpha0=cfg["sg_alpha"], clock=clock,
                           x_true=x_true, stride=cfg["run.stride"])
        else:
            raise ConfigError(f"unknown algorithm {alg!r}")
    except SolverAbort as abort:
        if abort.trace is not None:
            abort.trace.header.update(header_entries(cfg))
            abort.trace.write(trace_path)
        print(f"solver abort: {abort}", file=sys.stderr)
        print(f"partial trace written to {trace_path}", file=sys.stderr)
        return 3
    trace.header.update(header_entries(cfg))
    trace.write(trace_path)
    if trace.x_final is not None:
        np.save(out_dir / "solution.npy", trace.x_final)
    last = trace.final_row()
    print(f"wrote {trace_path}")
    print(
        f"status={trace.header['status']} iters={last.iter} "
        f"value={last.value_eps:.6g} grad_norm={last.grad_eps_norm:.6g}"
        + (
            f" relative_error={last.relative_error:.6g}"
            if last.relative_error is not None
            else ""
        )
    )
    return 0


def _bench_spec_from_toml(path, seed_override=None) -> list[ExperimentSpec]:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"spec file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed spec file {path}: {exc}")
    known_top = {"instance", "metering", "inner", "experiment"}
    unknown = set(doc) - known_top
    if unknown:
        raise ConfigError(f"unknown spec sections: {sorted(unknown)}")
    inst = doc.get("instance", {})
    met = doc.get("metering", {})
    inner_tbl = doc.get("inner", {})
    _require_keys("instance", inst, {"n", "m", "k2", "sigma", "lambda_bar"})
    _require_keys(
        "metering", met,
        {"clock", "seconds_per_unit", "budget_s", "max_iters", "grad_tol",
         "trials", "master_seed", "thresholds"},
    )
    _require_keys("inner", inner_tbl, {"kind", "alpha0", "max_iters", "move_tol"})
    try:
        inner = InnerSolverConfig(**inner_tbl) if inner_tbl else InnerSolverConfig()
    except ValueError as exc:
        raise ConfigError(f"bad [inner] table: {exc}")
    blocks = doc.get("experiment", [])
    if not blocks:
        raise ConfigError("spec file has no [[experiment]] blocks")
    # metering keys may be overridden per block
    block_metering = {"trials", "budget_s", "max_iters", "grad_tol",
                      "thresholds", "clock", "seconds_per_unit"}
    specs = []
    for block in blocks:
        block = dict(block)
        _require_keys(
            "experiment", block,
            {"name", "kind", "k1", "roster"} | block_metering,
        )
        met_block = dict(met)
        met_block.update({k: block[k] for k in block_metering if k in block})
        roster_tables = block.get("roster", [])
        if not roster_tables:
            raise ConfigError(f"experiment {block.get('name')!r} has an empty roster")
        roster = []
        for tbl in roster_tables:
            _require_keys(
                "roster entry", tbl,
                {"name", "p", "omega", "scenario", "alpha", "gamma",
                 "eps_scale", "grad_hoelder", "stride", "label"},
            )
            try:
                roster.append(AlgorithmSpec(**tbl))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad roster entry {tbl}: {exc}")
        k1 = block["k1"]
        k1 = tuple(k1) if isinstance(k1, list) else (int(k1),)
        try:
            specs.append(
                ExperimentSpec(
                    name=str(block["name"]),
                    kind=str(block["kind"]),
                    roster=tuple(roster),
                    n=int(inst.get("n", 200)),
                    m=int(inst.get("m", 100)),
                    k1=k1,
                    k2=int(inst.get("k2", 6)),
                    sigma=float(inst.get("sigma", 1.0)),
                    lambda_bar=float(inst.get("lambda_bar", 0.5)),
                    trials=int(met_block.get("trials", 1)),
                    master_seed=int(
                        seed_override if seed_override is not None
                        else met_block.get("master_seed", 0)
                    ),
                    budget_s=float(met_block.get("budget_s", 5.0)),
                    max_iters=met_block.get("max_iters"),
                    grad_tol=float(met_block.get("grad_tol", 1e-8)),
                    thresholds=tuple(met_block.get("thresholds", [1e-2, 1e-3])),
                    clock_mode=str(met_block.get("clock", "virtual")),
                    seconds_per_unit=met_block.get("seconds_per_unit"),
                    inner=inner,
                )
            )
        except ValueError as exc:
            raise ConfigError(f"bad experiment block {block.get('name')!r}: {exc}")
    return specs


def _require_keys(section: str, table: dict, allowed: set) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")


def cmd_bench(args: argparse.Namespace) -> int:
    specs = _bench_spec_from_toml(args.spec, seed_override=args.seed)
    outdir = Path(args.out)
    for spec in specs:
        results = run_experiment(spec, outdir, jobs=args.jobs)
        aborted = sum(1 for r in results if r.status == "aborted")
        print(
            f"experiment {spec.name}: {len(results)} trials"
            + (f" ({aborted} aborted)" if aborted else "")
            + f" -> {outdir / spec.name}"
        )
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    report = run_verification(
        inject_delta_violation=args.inject_delta_violation,
        example_p=args.example_p,
    )
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0 if report["passed"] else 1


def cmd_gen_instance(args: argparse.Namespace) -> int:
    inst = generate_instance(
        n=args.n, m=args.m, k1=args.k1, k2=args.k2,
        sigma=args.sigma, lambda_bar=args.lambda_bar, seed=args.seed,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_instance(inst, out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxsmooth",
        description="Smoothing descent methods for weakly convex minimization",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="run one algorithm on one problem")
    _add_solve_flags(sp)
    sp.set_defaults(func=cmd_solve)

    bp = sub.add_parser("bench", help="run the experiments of a spec file")
    bp.add_argument("--spec", required=True, help="experiment spec (TOML)")
    bp.add_argument("--out", default="out")
    bp.add_argument("--jobs", type=int, default=1)
    bp.add_argument("--seed", type=int, help="override the master seed")
    bp.set_defaults(func=cmd_bench)

    vp = sub.add_parser("verify", help="run the invariant suite")
    vp.add_argument("--out", help="also write the JSON report here")
    vp.add_argument(
        "--inject-delta-violation", action="store_true",
        help="understate accuracy claims to prove the bound check can fail",
    )
    vp.add_argument("--example-p", type=float, dest="example_p",
                    help="probe the prox-map group at this exponent")
    vp.set_defaults(func=cmd_verify)

    gp = sub.add_parser("gen-instance", help="generate a sparse recovery instance")
    gp.add_argument("--n", type=int, required=True)
    gp.add_argument("--m", type=int, required=True)
    gp.add_argument("--k1", type=int, required=True)
    gp.add_argument("--k2", type=int, required=True)
    gp.add_argument("--sigma", type=float, default=1.0)
    gp.add_argument("--lambda-bar", type=float, dest="lambda_bar", default=0.5)
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--out", required=True)
    gp.set_defaults(func=cmd_gen_instance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, AdmissibilityError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
