"""CSV schemas shared by the CLI and the analysis loaders (17 significant digits)."""

from __future__ import annotations

import csv
import math
from pathlib import Path

TENSOR_COLUMNS = ("seed", "R", "n", "Z", "D11", "D12", "D22", "lower11", "lower22",
                  "upper11", "upper22", "det_residual", "converged")
BOUNDS_COLUMNS = ("seed", "R", "n", "Z", "lower11", "lower12", "lower22",
                  "upper11", "upper12", "upper22")
TRAJECTORY_COLUMNS = ("seed", "dt", "T", "delta", "D11", "D12", "D22", "se11", "se12", "se22")
MSD_COLUMNS = ("lag", "msd")
SUMMARY_COLUMNS = ("R", "count", "meanD11", "stdD11", "meanD22", "stdD22", "meanD12",
                   "meanZ", "area_scaling_ref")

_INT_COLUMNS = {"seed", "n", "count"}
_BOOL_COLUMNS = {"converged"}


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def tensor_row(et, seed) -> dict:
    lower = et.lower if et.lower is not None else [[math.nan] * 2] * 2
    upper = et.upper if et.upper is not None else [[math.nan] * 2] * 2
    return {"seed": int(seed), "R": et.R, "n": int(et.n), "Z": et.Z,
            "D11": et.D[0, 0], "D12": et.D[0, 1], "D22": et.D[1, 1],
            "lower11": lower[0][0], "lower22": lower[1][1],
            "upper11": upper[0][0], "upper22": upper[1][1],
            "det_residual": et.det_residual, "converged": bool(et.converged)}


def failed_tensor_row(seed, R) -> dict:
    row = {c: math.nan for c in TENSOR_COLUMNS}
    row.update(seed=int(seed), R=float(R), n=0, converged=False)
    return row


def write_rows(rows, columns, dest) -> None:
    """Write dict rows to a path or an open text stream."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_rows(rows, columns, fh)
        return
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])


def _parse(col, s):
    if col in _BOOL_COLUMNS:
        return s.strip().lower() == "true"
    if col in _INT_COLUMNS:
        return int(s)
    return float(s)


def read_rows(src) -> list[dict]:
    with open(src, newline="") as fh:
        return [{k: _parse(k, v) for k, v in r.items()} for r in csv.DictReader(fh)]
