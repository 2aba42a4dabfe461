"""Run traces and their on-disk CSV format.

A trace file is a block of '#'-prefixed key=value header lines (the
fully resolved configuration plus run metadata), one column-name row,
then one row per recorded iteration.  Floats are written with 17
significant digits so parsing the file reproduces the exact doubles;
a run under a deterministic clock therefore serializes to identical
bytes every time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

FORMAT_MARKER = "proxsmooth-trace-v1"

COLUMNS = [
    "iter",
    "wall_time_s",
    "value_eps",
    "grad_eps_norm",
    "step_alpha",
    "lbar",
    "inner_iters",
    "backtracks",
    "relative_error",
    "descent_ok",
]


def fmt_float(x: float) -> str:
    return "%.17g" % float(x)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return fmt_float(value)


@dataclass
class TraceRow:
    iter: int
    wall_time_s: float
    value_eps: float
    grad_eps_norm: float
    step_alpha: Optional[float] = None
    lbar: Optional[float] = None
    inner_iters: Optional[int] = None
    backtracks: Optional[int] = None
    relative_error: Optional[float] = None
    descent_ok: Optional[int] = None

    def to_csv_row(self) -> str:
        return ",".join(_cell(getattr(self, name)) for name in COLUMNS)


_INT_COLS = {"iter", "inner_iters", "backtracks", "descent_ok"}


def _parse_cell(name: str, text: str):
    if text == "":
        return None
    if name in _INT_COLS:
        return int(text)
    return float(text)


@dataclass
class RunTrace:
    """Header metadata plus recorded iteration rows."""

    header: dict = field(default_factory=dict)
    rows: list[TraceRow] = field(default_factory=list)
    # final iterate of the producing run; in-memory only, not serialized
    x_final: object = field(default=None, compare=False, repr=False)

    def final_row(self) -> TraceRow:
        if not self.rows:
            raise ValueError("trace has no rows")
        return self.rows[-1]

    def column(self, name: str) -> list:
        if name not in COLUMNS:
            raise KeyError(f"unknown trace column {name!r}")
        return [getattr(r, name) for r in self.rows]

    def header_lines(self) -> list[str]:
        lines = [f"# format={FORMAT_MARKER}"]
        for key in sorted(self.header):
            value = self.header[key]
            if value is None:
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = fmt_float(value)
            else:
                text = str(value)
            if "\n" in text:
                raise ValueError(f"header value for {key!r} contains a newline")
            lines.append(f"# {key}={text}")
        return lines

    def to_csv(self) -> str:
        out = self.header_lines()
        out.append(",".join(COLUMNS))
        out.extend(row.to_csv_row() for row in self.rows)
        return "\n".join(out) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "RunTrace":
        header: dict = {}
        rows: list[TraceRow] = []
        saw_columns = False
        for line in text.splitlines():
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" not in body:
                    raise ValueError(f"malformed header line: {line!r}")
                key, value = body.split("=", 1)
                if key == "format":
                    if value != FORMAT_MARKER:
                        raise ValueError(f"unsupported trace format {value!r}")
                    continue
                header[key] = value
                continue
            if not saw_columns:
                if line.split(",") != COLUMNS:
                    raise ValueError("trace column row does not match the format")
                saw_columns = True
                continue
            cells = line.split(",")
            if len(cells) != len(COLUMNS):
                raise ValueError(f"row has {len(cells)} cells, expected {len(COLUMNS)}")
            rows.append(
                TraceRow(**{n: _parse_cell(n, c) for n, c in zip(COLUMNS, cells)})
            )
        if not saw_columns:
            raise ValueError("trace file has no column row")
        return cls(header=header, rows=rows)

    @classmethod
    def read(cls, path) -> "RunTrace":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_csv(fh.read())


# fields() is used by tests to keep COLUMNS and TraceRow in sync.
assert [f.name for f in fields(TraceRow)] == COLUMNS
