"""Plain-text configuration: INI sections, lossless round-trip.

Grammar (configparser dialect): three sections, all keys optional with
defaults; numeric values are decimal strings handed to mpmath unparsed, so
parse -> serialize -> parse is the identity on the stored strings.

    [ensemble]
    potential   = 0 0 2        ; V coefficients, ascending degree
    deformation = 0 0 1        ; Q coefficients, ascending (omit for ground)
    s           = 2            ; deformation strength ('inf' for ground)
    t           = 1            ; curvature Q''(0)/2 echo (must match deformation)
    n_list      = 32 48 64 96 128

    [model]
    modes   = 48               ; Chebyshev modes per ray
    tol     = 1e-12            ; mesh tolerance (truncation + residual target)
    method  = dense            ; dense | neumann

    [run]
    precision = 60
    out       = out
    threads   = 1
    n_min_fit = 32
    experiments = E2 E3
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

import mpmath
from mpmath import mpf

from ..errors import DomainError

_DEFAULTS = {
    "ensemble": {
        "potential": "0 0 2",
        "deformation": "0 0 1",
        "s": "2",
        "t": "1",
        "n_list": "32 48 64 96 128",
    },
    "model": {
        "modes": "48",
        "tol": "1e-12",
        "method": "dense",
    },
    "run": {
        "precision": "60",
        "out": "out",
        "threads": "1",
        "n_min_fit": "32",
        "experiments": "E1 E2 E3 E4 E5 E6",
    },
}


@dataclass(frozen=True)
class Config:
    """Raw string-valued configuration with typed accessors."""

    sections: dict = field(default_factory=dict)

    def get(self, section: str, key: str) -> str:
        try:
            return self.sections[section][key]
        except KeyError:
            raise DomainError(f"missing config key [{section}] {key}") from None

    # typed accessors ------------------------------------------------------
    def potential_coeffs(self):
        return tuple(mpf(v) for v in self.get("ensemble", "potential").split())

    def deformation_coeffs(self):
        return tuple(mpf(v) for v in self.get("ensemble", "deformation").split())

    def s(self):
        raw = self.get("ensemble", "s").strip().lower()
        return mpmath.inf if raw in ("inf", "+inf", "infinity") else mpf(raw)

    def t(self):
        return mpf(self.get("ensemble", "t"))

    def n_list(self):
        return tuple(int(v) for v in self.get("ensemble", "n_list").split())

    def modes(self):
        return int(self.get("model", "modes"))

    def tol(self):
        return self.get("model", "tol")

    def method(self):
        return self.get("model", "method")

    def precision(self):
        return int(self.get("run", "precision"))

    def out_dir(self):
        return self.get("run", "out")

    def threads(self):
        return int(self.get("run", "threads"))

    def n_min_fit(self):
        return int(self.get("run", "n_min_fit"))

    def experiments(self):
        return tuple(self.get("run", "experiments").split())


def _validate(cfg: Config) -> Config:
    coeffs = cfg.potential_coeffs()
    if len(coeffs) < 3 or len(coeffs) % 2 == 0:
        raise DomainError("potential must have even degree >= 2 (odd coefficient count >= 3)")
    if coeffs[-1] <= 0:
        raise DomainError("potential leading coefficient must be positive")
    d = cfg.deformation_coeffs()
    if len(d) < 3 or d[0] != 0 or d[1] != 0:
        raise DomainError("deformation must satisfy Q(0) = Q'(0) = 0")
    if cfg.t() <= 0:
        raise DomainError(f"deformation curvature t must be positive, got {cfg.get('ensemble', 't')}")
    if d[2] != cfg.t():
        raise DomainError("configured t does not match Q''(0)/2 of the deformation coefficients")
    if any(n < 1 for n in cfg.n_list()):
        raise DomainError("n_list entries must be positive")
    if cfg.precision() < 50:
        raise DomainError("precision below the 50-digit floor")
    if cfg.method() not in ("dense", "neumann"):
        raise DomainError(f"unknown solve method {cfg.method()!r}")
    known = {"E1", "E2", "E3", "E4", "E5", "E6"}
    bad = [e for e in cfg.experiments() if e not in known]
    if bad:
        raise DomainError(f"unknown experiments {bad}; choose from {sorted(known)}")
    return cfg


def parse_config(text: str | None = None, path: str | None = None, overrides: dict | None = None) -> Config:
    """Parse (text or file), apply defaults and overrides, validate."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    elif text is not None:
        cp.read_string(text)
    sections = {}
    for sec, defaults in _DEFAULTS.items():
        merged = dict(defaults)
        if cp.has_section(sec):
            for k, v in cp.items(sec):
                merged[k] = v.strip()
        sections[sec] = merged
    for sec, kv in (overrides or {}).items():
        sections.setdefault(sec, {}).update({k: str(v) for k, v in kv.items()})
    return _validate(Config(sections=sections))


def serialize_config(cfg: Config) -> str:
    """Canonical text form; parse(serialize(c)) preserves every value."""
    cp = configparser.ConfigParser()
    for sec in sorted(cfg.sections):
        cp.add_section(sec)
        for k in sorted(cfg.sections[sec]):
            cp.set(sec, k, cfg.sections[sec][k])
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
