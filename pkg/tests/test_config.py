"""Config resolution: defaults, merging, and header round-trips."""

import pytest

from proxsmooth.config import (
    ConfigError,
    SOLVE_SCHEMA,
    flatten,
    from_header,
    header_entries,
    load_toml,
    resolve,
)


def test_defaults_resolve():
    cfg = resolve()
    assert cfg["alg"] == "ideals"
    assert cfg["p"] == 1.25
    assert cfg["problem.lambda_bar"] == 0.5
    assert cfg["budget.seconds"] is None
    assert set(cfg) == set(SOLVE_SCHEMA)


def test_overrides_win_over_file():
    cfg = resolve({"p": 1.5, "gamma": 0.4}, {"p": 2.0})
    assert cfg["p"] == 2.0
    assert cfg["gamma"] == 0.4


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        resolve({"does.not.exist": 1})
    with pytest.raises(ConfigError):
        resolve(None, {"alg0": "ideals"})


def test_type_coercion_rules():
    # ints are accepted where floats are expected
    assert resolve(None, {"p": 2})["p"] == 2.0
    assert isinstance(resolve(None, {"p": 2})["p"], float)
    with pytest.raises(ConfigError):
        resolve(None, {"p": "2.0"})  # strings never coerce to numbers
    with pytest.raises(ConfigError):
        resolve(None, {"p": True})  # bools are not numbers
    with pytest.raises(ConfigError):
        resolve(None, {"run.seed": 1.5})  # fractional int
    with pytest.raises(ConfigError):
        resolve(None, {"alg": 3})


def test_flatten_nested_tables():
    tree = {"budget": {"seconds": 5.0}, "p": 1.5, "inner": {"kind": "constant"}}
    flat = flatten(tree)
    assert flat == {"budget.seconds": 5.0, "p": 1.5, "inner.kind": "constant"}


def test_load_toml_and_resolve(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('p = 1.5\n[budget]\nseconds = 2.0\n[problem]\nname = "abs"\n')
    cfg = resolve(load_toml(path))
    assert cfg["p"] == 1.5
    assert cfg["budget.seconds"] == 2.0
    assert cfg["problem.name"] == "abs"


def test_load_toml_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_toml(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("p = = 1\n")
    with pytest.raises(ConfigError):
        load_toml(bad)


def test_header_roundtrip_exact():
    cfg = resolve(None, {"p": 1.25, "run.seed": 3, "budget.seconds": 0.1})
    entries = header_entries(cfg)
    assert all(key.startswith("cfg.") for key in entries)
    # unset optional keys are omitted
    assert "cfg.omega" not in entries
    # stringify as a trace header would, then parse back
    header = {k: str(v) if not isinstance(v, str) else v for k, v in entries.items()}
    back = from_header(header)
    assert back == cfg


def test_from_header_rejects_unknown():
    with pytest.raises(ConfigError):
        from_header({"cfg.bogus": "1"})
