"""Mesh refinement on one realization: tensor, duality residual and solver cost per level.

    python scripts/refinement_study.py --family gaussian --R 10 --levels 5
"""

import argparse
import time

from surfdiff.cell import default_n0, relative_change, solve_cell
from surfdiff.config import FieldSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--family", choices=["poisson", "gaussian", "ridge"], default="gaussian")
    ap.add_argument("--R", type=float, default=10.0)
    ap.add_argument("--alpha", type=float, default=None, help="bump amplitude or correlation")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--precond", choices=["amg", "jacobi"], default="amg")
    a = ap.parse_args()

    alpha = a.alpha if a.alpha is not None else (0.1 if a.family == "gaussian" else 1.0)
    fld = FieldSpec(a.family, alpha=alpha)(a.R, a.seed)
    n = default_n0(fld)
    prev = None
    print(f"{'n':>5} {'D11':>10} {'D12':>10} {'D22':>10} {'det res':>9} {'change':>9} "
          f"{'CG its':>7} {'time':>6}")
    for _ in range(a.levels):
        t0 = time.perf_counter()
        et = solve_cell(fld, n, precond=a.precond)
        dt = time.perf_counter() - t0
        ch = relative_change(et.D, prev.D) if prev is not None else float("nan")
        print(f"{n:5d} {et.D[0, 0]:10.6f} {et.D[0, 1]:10.6f} {et.D[1, 1]:10.6f} "
              f"{et.det_residual:9.2e} {ch:9.2e} {int(et.iterations.max()):7d} {dt:6.2f}")
        prev, n = et, 2 * n


if __name__ == "__main__":
    main()
