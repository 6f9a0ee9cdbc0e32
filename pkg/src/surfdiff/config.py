"""Run configuration: a plain ``key = value`` text format.

Grammar (one setting per line)::

    # comment
    key = value          # numbers, words, or comma-separated lists

Keys are case-sensitive; unknown keys are rejected.  ``alpha`` is the bump
amplitude for the ``poisson`` family and the correlation parameter for
``gaussian``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .fields import (BumpSpec, GaussianFieldParams, PoissonFieldParams, flat_field, ridge_field,
                     sample_gaussian_field, sample_poisson_field)

MODES = ("surface", "cell", "bounds", "mcmc", "ensemble", "verify")
FAMILIES = ("flat", "ridge", "poisson", "gaussian")

# keys that only make sense for some families
_FAMILY_KEYS = {
    "lambda": {"poisson"},
    "alpha": {"poisson", "gaussian"},
    "modes": {"gaussian"},
    "threshold": {"gaussian"},
    "amplitude": {"ridge"},
    "waves": {"ridge"},
}


class ConfigError(ValueError):
    def __init__(self, message, line=None, key=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.key = key


@dataclass(frozen=True)
class FieldSpec:
    """Picklable recipe for realizations of one family at a given R and seed."""

    family: str
    lam: float = 0.5
    alpha: float = 1.0
    modes: int = 1024
    threshold: float = 1e-3
    amplitude: float = 1.0
    waves: int = 1

    def __call__(self, R, seed):
        if self.family == "flat":
            return flat_field(R)
        if self.family == "ridge":
            return ridge_field(self.amplitude, R, self.waves)
        if self.family == "poisson":
            return sample_poisson_field(PoissonFieldParams(self.lam, R, seed, BumpSpec(self.alpha)))
        if self.family == "gaussian":
            return sample_gaussian_field(GaussianFieldParams(self.alpha, R, seed, self.modes,
                                                             self.threshold))
        raise ValueError(f"unknown family {self.family!r}")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "cell"
    family: str = "flat"
    spec: FieldSpec = FieldSpec("flat")
    R: float = 1.0
    R_list: tuple = ()
    seeds_per_R: int = 50
    n0: int | None = None
    max_n: int = 1024
    tol_rel: float = 1e-2
    cg_tol: float = 1e-10
    precond: str = "amg"
    seed: int = 0
    out: str | None = None
    summary_out: str | None = None
    msd_out: str | None = None
    grid_n: int = 128
    dt: float = 1e-4
    T: float = 100.0
    delta: float = 0.5
    x0: tuple = (0.0, 0.0)
    threads: int = 1

    def realize(self, R=None, seed=None):
        return self.spec(self.R if R is None else R, self.seed if seed is None else seed)


def _num(v, key, line, kind=float):
    try:
        x = kind(v)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {v!r}", line, key) from None
    if kind is float and not math.isfinite(x):
        raise ConfigError(f"{key}: must be finite", line, key)
    return x


def _list(v, key, line):
    return tuple(_num(s.strip(), key, line) for s in v.split(",") if s.strip())


_PARSERS = {
    "mode": str, "family": str, "precond": str, "out": str, "summary_out": str, "msd_out": str,
    "R": float, "tol_rel": float, "cg_tol": float, "dt": float, "T": float, "delta": float,
    "lambda": float, "alpha": float, "threshold": float, "amplitude": float,
    "seeds_per_R": int, "n0": int, "max_n": int, "seed": int, "grid_n": int, "threads": int,
    "modes": int, "waves": int,
    "R_list": "list", "x0": "list",
}


def parse_pairs(text: str) -> list[tuple[str, str, int]]:
    pairs = []
    seen = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", no, key)
        if not val:
            raise ConfigError(f"{key}: missing value", no, key)
        if key in seen:
            raise ConfigError(f"{key}: duplicate (first set on line {seen[key]})", no, key)
        seen[key] = no
        pairs.append((key, val, no))
    return pairs


def build_config(pairs) -> RunConfig:
    vals = {}
    lines = {}
    for key, val, no in pairs:
        p = _PARSERS[key]
        if p == "list":
            v = _list(val, key, no)
        elif p is str:
            v = val
        else:
            v = _num(val, key, no, p)
        vals[key] = v
        lines[key] = no
    return validate(vals, lines)


def validate(vals: dict, lines=None) -> RunConfig:
    lines = lines or {}

    def err(key, msg):
        raise ConfigError(f"{key}: {msg}" if not msg.startswith(key) else msg,
                          lines.get(key), key)

    mode = vals.get("mode", "cell")
    if mode not in MODES:
        err("mode", f"must be one of {', '.join(MODES)}")
    family = vals.get("family", "flat")
    if family not in FAMILIES:
        err("family", f"must be one of {', '.join(FAMILIES)}")
    for key, fams in _FAMILY_KEYS.items():
        if key in vals and family not in fams:
            err(key, f"not valid for family {family!r}")

    defaults = {"flat": 1.0, "ridge": 1.0, "poisson": 20.0, "gaussian": 10.0}
    R = vals.get("R", defaults[family])
    R_list = tuple(vals.get("R_list", ()))
    spec = FieldSpec(family, lam=vals.get("lambda", 0.5), alpha=vals.get("alpha", 1.0),
                     modes=vals.get("modes", 1024), threshold=vals.get("threshold", 1e-3),
                     amplitude=vals.get("amplitude", 1.0), waves=vals.get("waves", 1))
    for r_key, Rs in (("R", (R,)), ("R_list", R_list)):
        for r in Rs:
            if not r > 0:
                err(r_key, "R must be positive")
            if family == "poisson" and not r > 2:
                err(r_key, "R must exceed bump diameter 2")
    if family == "poisson":
        if not spec.lam > 0:
            err("lambda", "must be positive")
        if not spec.alpha > 0:
            err("alpha", "must be positive")
    if family == "gaussian":
        for r in (R,) + R_list:
            try:
                GaussianFieldParams(spec.alpha, r, 0, spec.modes, spec.threshold)
            except ValueError as exc:
                err("alpha" if "alpha" in str(exc) else "modes" if "modes" in str(exc) else
                    ("R_list" if r in R_list and r != R else "R"), str(exc))
    if family == "ridge" and spec.waves < 1:
        err("waves", "must be >= 1")

    cfg = RunConfig(mode=mode, family=family, spec=spec, R=R, R_list=R_list)
    simple = {f.name for f in fields(RunConfig)} - {"mode", "family", "spec", "R", "R_list"}
    cfg = replace(cfg, **{k: v for k, v in vals.items() if k in simple})
    if cfg.mode == "ensemble" and not cfg.R_list:
        cfg = replace(cfg, R_list=(cfg.R,))
    checks = [
        ("seeds_per_R", cfg.seeds_per_R >= 2, "must be >= 2"),
        ("max_n", cfg.max_n >= 2, "must be >= 2"),
        ("n0", cfg.n0 is None or cfg.n0 >= 2, "must be >= 2"),
        ("tol_rel", cfg.tol_rel > 0, "must be positive"),
        ("cg_tol", cfg.cg_tol > 0, "must be positive"),
        ("precond", cfg.precond in ("amg", "jacobi", "none"), "must be amg, jacobi or none"),
        ("grid_n", cfg.grid_n >= 2, "must be >= 2"),
        ("threads", cfg.threads >= 1, "must be >= 1"),
        ("seed", 0 <= cfg.seed < 2**64, "must be an unsigned 64-bit integer"),
        ("x0", len(cfg.x0) == 2, "needs two coordinates"),
    ]
    for key, ok, msg in checks:
        if not ok:
            err(key, msg)
    if cfg.mode == "mcmc":
        from .sde import SimulationPlan

        try:
            SimulationPlan(cfg.dt, cfg.T, cfg.delta, cfg.x0, cfg.seed)
        except ValueError as exc:
            err("dt", str(exc))
    return cfg


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate; ``overrides`` (key -> string value) win over the text."""
    pairs = parse_pairs(text)
    if overrides:
        pairs = [p for p in pairs if p[0] not in overrides]
        for k, v in overrides.items():
            if k not in _PARSERS:
                raise ConfigError(f"unknown key {k!r}", None, k)
            pairs.append((k, str(v), None))
    return build_config(pairs)
