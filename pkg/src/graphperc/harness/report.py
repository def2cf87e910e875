"""Reports and their deterministic serialisations."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

FORMATS = ("csv", "json", "plotdata")


@dataclass
class Check:
    """One pass/fail verdict together with what it was judged on."""

    name: str
    oracle: float
    measured: float
    tolerance: float
    reps: int
    passed: bool
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        s = (f"{status} {self.name}: measured={self.measured:.6g} oracle={self.oracle:.6g} "
             f"tol={self.tolerance:.3g} reps={self.reps}")
        return s + (f" ({self.note})" if self.note else "")


@dataclass
class Report:
    experiment: str
    seed: int
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"{self.experiment} (seed {self.seed}): "
                 f"{'PASS' if self.passed else 'FAIL'}"]
        lines += ["  " + c.line() for c in self.checks]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "passed": self.passed,
            "meta": self.meta,
            "columns": self.columns,
            "rows": [{c: row.get(c) for c in self.columns} for row in self.rows],
            "checks": [vars(c) for c in self.checks],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(d["experiment"], d["seed"], list(d["columns"]),
                   [dict(r) for r in d["rows"]],
                   [Check(**c) for c in d["checks"]], dict(d["meta"]))


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def to_csv(report: Report) -> str:
    out = [",".join(report.columns)]
    for row in report.rows:
        out.append(",".join(_fmt(row.get(c)) for c in report.columns))
    return "\n".join(out) + "\n"


def to_json(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=2, allow_nan=True) + "\n"


def to_plotdata(report: Report) -> str:
    out = [f"# experiment: {report.experiment}", f"# seed: {report.seed}",
           "# " + " ".join(report.columns)]
    for row in report.rows:
        cells = []
        for c in report.columns:
            s = _fmt(row.get(c))
            cells.append(s.replace(" ", "_") if s else "?")
        out.append(" ".join(cells))
    return "\n".join(out) + "\n"


def emit(report: Report, path, fmt: str = "csv") -> None:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    text = {"csv": to_csv, "json": to_json, "plotdata": to_plotdata}[fmt](report)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def read_json(path) -> Report:
    return Report.from_dict(json.loads(Path(path).read_text()))
