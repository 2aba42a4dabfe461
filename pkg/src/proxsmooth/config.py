"""Configuration loading for the command-line tools.

Configs are TOML files (tables become dotted keys) merged with CLI
flags; flags win.  Unknown keys are rejected.  A resolved config is a
flat dict of typed scalars that can be echoed into a trace header as
``cfg.<key>=<value>`` lines and re-parsed to an equal dict, so every
output file records exactly how it was produced.
"""

from __future__ import annotations

from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from proxsmooth.trace import fmt_float

# key -> (type, default).  None defaults mean "unset"; optional keys
# are omitted from headers when unset.
SOLVE_SCHEMA: dict[str, tuple[type, object]] = {
    "alg": (str, "ideals"),
    "p": (float, 1.25),
    "gamma": (float, 0.9),
    "c1": (float, 1.0),
    "c2": (float, 1.0),
    "mu": (float, None),
    "omega": (float, None),
    "scenario": (str, "S1"),
    "lbar_growth": (float, 3.0),
    "lbar0": (float, 1e-3),
    "armijo_lambda": (float, 0.5),
    "armijo_upsilon": (float, 0.4),
    "eps_scale": (float, 1.0),
    "max_inner_trials": (int, 60),
    "max_backtracks": (int, 50),
    "grad_hoelder": (float, None),
    "sg_alpha": (float, 0.01),
    "inner.kind": (str, "decaying"),
    "inner.alpha0": (float, 0.95),
    "inner.max_iters": (int, 200),
    "inner.move_tol": (float, 1e-3),
    "budget.seconds": (float, None),
    "budget.max_iters": (int, None),
    "budget.grad_tol": (float, 1e-8),
    "clock.mode": (str, "wall"),
    "clock.seconds_per_unit": (float, None),
    "problem.name": (str, "rsr"),
    "problem.dim": (int, 1),
    "problem.n": (int, 200),
    "problem.m": (int, 100),
    "problem.k1": (int, 10),
    "problem.k2": (int, 6),
    "problem.sigma": (float, 1.0),
    "problem.lambda_bar": (float, 0.5),
    "problem.instance": (str, None),
    "safeguard.radius": (float, None),
    "safeguard.gamma_max": (float, None),
    "run.seed": (int, 0),
    "run.out": (str, "out"),
    "run.jobs": (int, 1),
    "run.stride": (int, 1),
    "run.x0": (str, "zeros"),
}


class ConfigError(ValueError):
    """A config file or flag set failed validation."""


def flatten(tree: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, prefix=f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def _coerce(key: str, value, target: type):
    if value is None:
        return None
    if target is float:
        if isinstance(value, bool) or isinstance(value, str):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if target is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if target is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}")
        return value
    raise AssertionError(f"unsupported schema type for {key}")


def resolve(
    file_values: Optional[dict] = None,
    overrides: Optional[dict] = None,
    schema: Optional[dict] = None,
) -> dict:
    """Merge defaults, file values, and overrides into a typed config."""
    schema = schema or SOLVE_SCHEMA
    cfg = {key: default for key, (_, default) in schema.items()}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if key not in schema:
                raise ConfigError(f"unknown config key {key!r}")
            cfg[key] = _coerce(key, value, schema[key][0])
    return cfg


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return flatten(tomllib.load(fh))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}")


def header_entries(cfg: dict) -> dict:
    """Render a resolved config as header entries (cfg.<key>=value)."""
    out = {}
    for key in sorted(cfg):
        value = cfg[key]
        if value is None:
            continue
        out[f"cfg.{key}"] = value
    return out


def from_header(header: dict, schema: Optional[dict] = None) -> dict:
    """Rebuild the resolved config from parsed header lines.

    Accepts the header dict of :class:`proxsmooth.trace.RunTrace` (all
    string values) and returns a typed config equal to the one that was
    echoed, including unset optional keys.
    """
    schema = schema or SOLVE_SCHEMA
    cfg = {key: None for key in schema}
    for key, text in header.items():
        if not key.startswith("cfg."):
            continue
        name = key[4:]
        if name not in schema:
            raise ConfigError(f"header contains unknown config key {name!r}")
        target = schema[name][0]
        if target is float:
            cfg[name] = float(text)
        elif target is int:
            cfg[name] = int(text)
        else:
            cfg[name] = str(text)
    return cfg


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt_float(value)
    return str(value)
