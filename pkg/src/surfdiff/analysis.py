"""Checks of the structural identities on computed tensors, and ensemble sweeps."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cell import ConvergenceError, refine_until
from .csvio import failed_tensor_row, tensor_row
from .rng import derive_seed

log = logging.getLogger(__name__)


def det_relation(et) -> float:
    """``|det(D) Z^2 - 1|``; zero for an exact two-dimensional tensor."""
    return abs(float(np.linalg.det(et.D)) * et.Z**2 - 1.0)


@dataclass
class SandwichResult:
    passed: bool
    eigenvalues: tuple
    margins: dict


def eigen_sandwich(D, Z, tol=1e-6, allowance=1e-2) -> SandwichResult:
    """Check ``1/Z^2 <= l1 <= 1/Z <= l2 <= 1`` with slack ``tol + allowance``.

    Margins are signed: negative means the inequality is violated before slack.
    """
    D = np.asarray(D, float)
    l1, l2 = np.linalg.eigvalsh(0.5 * (D + D.T))
    margins = {
        "1/Z^2<=l1": l1 - 1.0 / Z**2,
        "l1<=1/Z": 1.0 / Z - l1,
        "1/Z<=l2": l2 - 1.0 / Z,
        "l2<=1": 1.0 - l2,
    }
    slack = tol + allowance
    return SandwichResult(all(m >= -slack for m in margins.values()), (l1, l2), margins)


def isotropy_deviation(D) -> float:
    D = np.asarray(D, float)
    return max(abs(D[0, 0] - D[1, 1]), 2.0 * abs(D[0, 1])) / np.trace(D)


def bound_violations(D, lower, upper, directions=20, tol=1e-6, seed=0) -> int:
    """Directions ``e`` for which ``e.lower.e <= e.D.e <= e.upper.e`` fails beyond ``tol``."""
    th = np.random.default_rng(seed).uniform(0, 2 * np.pi, directions)
    E = np.column_stack((np.cos(th), np.sin(th)))
    q = lambda M: np.einsum("ki,ij,kj->k", E, np.asarray(M), E)
    d, lo, up = q(D), q(lower), q(upper)
    return int(np.sum((d < lo - tol) | (d > up + tol)))


def _one(task):
    factory, R, seed, tol_rel, kw = task
    try:
        fld = factory(R, seed)
        et = refine_until(fld, tol_rel=tol_rel, **kw)
        row = tensor_row(et, seed)
        row["R"] = float(R)
        return row
    except (ConvergenceError, ValueError, FloatingPointError) as exc:
        log.warning("realization R=%s seed=%s failed: %s", R, seed, exc)
        return failed_tensor_row(seed, R)


@dataclass
class EnsembleSummary:
    family: str
    rows: list  # per-realization tensor rows
    summary: list  # per-R aggregate rows


def realization_seed(master: int, R: float, k: int) -> int:
    return derive_seed(master, int(round(R * 1_000_000)), k)


def summarize(rows) -> list[dict]:
    """Per-R aggregates of tensor rows; failed (non-finite) rows are skipped."""
    out = []
    for R in sorted({r["R"] for r in rows}):
        sel = [r for r in rows if r["R"] == R and math.isfinite(r["D11"])]
        if not sel:
            continue
        a = {k: np.array([r[k] for r in sel]) for k in ("D11", "D12", "D22", "Z")}
        sd = lambda x: float(x.std(ddof=1)) if len(x) > 1 else 0.0
        mz = float(a["Z"].mean())
        out.append({"R": R, "count": len(sel), "meanD11": float(a["D11"].mean()),
                    "stdD11": sd(a["D11"]), "meanD22": float(a["D22"].mean()),
                    "stdD22": sd(a["D22"]), "meanD12": float(a["D12"].mean()),
                    "meanZ": mz, "area_scaling_ref": 1.0 / mz})
    return out


def ensemble_run(factory, R_list, seeds_per_R, tol_rel=1e-2, master_seed=0, workers=1,
                 family="", **refine_kw) -> EnsembleSummary:
    """Sample ``seeds_per_R`` fields for every R, refine each, aggregate.

    ``factory(R, seed)`` must be picklable when ``workers > 1``.  Seeds are
    derived from ``(master_seed, R, k)``, so results do not depend on
    scheduling or worker count.
    """
    if seeds_per_R < 2:
        raise ValueError("seeds_per_R must be >= 2")
    tasks = [(factory, float(R), realization_seed(master_seed, R, k), tol_rel, refine_kw)
             for R in R_list for k in range(seeds_per_R)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_one, tasks, chunksize=1))
    else:
        rows = [_one(t) for t in tasks]
    return EnsembleSummary(family, rows, summarize(rows))


def check_tensor_rows(rows, allowance=1e-2, tol=1e-6) -> list[str]:
    """Re-assert the sandwich and depletion bounds on loaded rows; returns failures."""
    bad = []
    for r in rows:
        if not math.isfinite(r["D11"]):
            bad.append(f"seed={r['seed']} R={r['R']}: failed realization")
            continue
        D = np.array([[r["D11"], r["D12"]], [r["D12"], r["D22"]]])
        l1, l2 = np.linalg.eigvalsh(D)
        Z = r["Z"]
        if l1 < 1.0 / Z**2 - allowance or l2 > 1.0 + tol:
            bad.append(f"seed={r['seed']} R={r['R']}: depletion violated ({l1:.6g}, {l2:.6g})")
        slack = tol + allowance
        for i in (1, 2):
            d = r[f"D{i}{i}"]
            if not (r[f"lower{i}{i}"] - slack <= d <= r[f"upper{i}{i}"] + slack):
                bad.append(f"seed={r['seed']} R={r['R']}: bound on D{i}{i} violated")
    return bad
