"""Report assembly and flat-file emission (CSV + JSON, deterministic)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import mpmath

CSV_COLUMNS = ("experiment", "n", "s", "t", "quantity", "numeric", "predicted", "abs_err", "rel_err")

_NSTR_DIGITS = 17


def fmt(x) -> str:
    """Deterministic decimal rendering of a number-or-string."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    return mpmath.nstr(x, _NSTR_DIGITS)


@dataclass
class Row:
    experiment: str
    n: object
    s: object
    t: object
    quantity: str
    numeric: object
    predicted: object = None

    def as_csv(self):
        abs_err = rel_err = None
        if self.predicted is not None and not isinstance(self.predicted, str):
            abs_err = abs(self.numeric - self.predicted)
            denom = abs(self.predicted)
            rel_err = abs_err / denom if denom > 0 else None
        return [
            self.experiment,
            fmt(self.n),
            fmt(self.s),
            fmt(self.t),
            self.quantity,
            fmt(self.numeric),
            fmt(self.predicted),
            fmt(abs_err),
            fmt(rel_err),
        ]


@dataclass
class Criterion:
    id: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        extras = "  ".join(f"{k}={fmt(v)}" for k, v in sorted(self.details.items()))
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.id}  {extras}"


@dataclass
class Report:
    experiment: str
    config_echo: dict
    rows: list = field(default_factory=list)
    criteria: list = field(default_factory=list)
    runtimes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_json(self) -> str:
        """Deterministic body; runtimes go to the sidecar, not here."""
        payload = {
            "experiment": self.experiment,
            "config": self.config_echo,
            "rows": [dict(zip(CSV_COLUMNS, r.as_csv())) for r in self.rows],
            "criteria": [
                {"id": c.id, "passed": c.passed, "details": {k: fmt(v) for k, v in c.details.items()}}
                for c in self.criteria
            ],
            "passed": self.passed,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for r in self.rows:
            lines.append(",".join(r.as_csv()))
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str):
        os.makedirs(out_dir, exist_ok=True)
        base = os.path.join(out_dir, self.experiment.lower())
        with open(base + ".csv", "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())
        with open(base + ".json", "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        # wall-clock data is not part of the deterministic surface
        with open(base + ".meta.json", "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"runtimes_seconds": self.runtimes}, sort_keys=True, indent=2) + "\n")
        return base
