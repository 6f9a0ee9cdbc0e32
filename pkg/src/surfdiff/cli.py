"""``surfdiff`` command line.

Exit codes: 0 success/pass, 1 usage or configuration error, 2 numerical
failure, 3 verification failure.  Errors are reported on stderr as one JSON
object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import csvio
from .analysis import ensemble_run
from .cell import ConvergenceError, build_mesh, bounds_from_system, assemble, refine_until
from .config import MODES, ConfigError, parse_config
from .fields import dump_grid
from .sde import SimulationError, SimulationPlan, simulate

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3


class NumericalFailure(RuntimeError):
    pass


@contextmanager
def _sink(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _refine(cfg, fld):
    return refine_until(fld, tol_rel=cfg.tol_rel, n0=cfg.n0, max_n=cfg.max_n, cg_tol=cfg.cg_tol,
                        precond=cfg.precond)


def run_surface(cfg):
    fld = cfg.realize()
    dump_grid(fld, cfg.grid_n, cfg.out or "surface.txt", seed=cfg.seed)
    return EXIT_OK


def run_cell(cfg):
    et = _refine(cfg, cfg.realize())
    row = csvio.tensor_row(et, cfg.seed)
    row["R"] = cfg.R
    with _sink(cfg.out) as fh:
        csvio.write_rows([row], csvio.TENSOR_COLUMNS, fh)
    if not et.converged:
        raise NumericalFailure(f"mesh refinement did not reach tol_rel={cfg.tol_rel} "
                               f"by n={et.n}")
    return EXIT_OK


def run_bounds(cfg):
    fld = cfg.realize()
    n = cfg.n0 or max(4, int(np.ceil(8 * fld.period / fld.length_scale)))
    system = assemble(fld, build_mesh(fld.period, n))
    lo, up = bounds_from_system(system)
    row = {"seed": cfg.seed, "R": cfg.R, "n": n, "Z": system.Z,
           "lower11": lo[0, 0], "lower12": lo[0, 1], "lower22": lo[1, 1],
           "upper11": up[0, 0], "upper12": up[0, 1], "upper22": up[1, 1]}
    with _sink(cfg.out) as fh:
        csvio.write_rows([row], csvio.BOUNDS_COLUMNS, fh)
    return EXIT_OK


def run_mcmc(cfg):
    fld = cfg.realize()
    plan = SimulationPlan(cfg.dt, cfg.T, cfg.delta, tuple(cfg.x0), cfg.seed)
    st = simulate(fld, plan)
    D, se = st.D, st.se
    row = {"seed": cfg.seed, "dt": cfg.dt, "T": cfg.T, "delta": cfg.delta,
           "D11": D[0, 0], "D12": D[0, 1], "D22": D[1, 1],
           "se11": se[0, 0], "se12": se[0, 1], "se22": se[1, 1]}
    with _sink(cfg.out) as fh:
        csvio.write_rows([row], csvio.TRAJECTORY_COLUMNS, fh)
    if cfg.msd_out:
        rows = [{"lag": a, "msd": b} for a, b in st.msd]
        csvio.write_rows(rows, csvio.MSD_COLUMNS, cfg.msd_out)
    return EXIT_OK


def run_ensemble(cfg):
    ens = ensemble_run(cfg.spec, cfg.R_list, cfg.seeds_per_R, tol_rel=cfg.tol_rel,
                       master_seed=cfg.seed, workers=cfg.threads, family=cfg.family,
                       n0=cfg.n0, max_n=cfg.max_n, cg_tol=cfg.cg_tol, precond=cfg.precond)
    with _sink(cfg.out) as fh:
        csvio.write_rows(ens.rows, csvio.TENSOR_COLUMNS, fh)
    summary = cfg.summary_out
    if summary is None and cfg.out not in (None, "-"):
        summary = str(Path(cfg.out).with_suffix("")) + ".summary.csv"
    with _sink(summary) as fh:
        csvio.write_rows(ens.summary, csvio.SUMMARY_COLUMNS, fh)
    return EXIT_OK


def run_verify(cfg):
    from .verify import run_suite

    checks, et = run_suite(cfg.realize(), tol_rel=cfg.tol_rel, n0=cfg.n0, max_n=cfg.max_n,
                           cg_tol=cfg.cg_tol, precond=cfg.precond)
    with _sink(cfg.out) as fh:
        for c in checks:
            print(c.line(), file=fh)
        D = et.D
        print(f"D = [[{D[0, 0]:.10g}, {D[0, 1]:.10g}], [{D[1, 0]:.10g}, {D[1, 1]:.10g}]]  "
              f"Z = {et.Z:.10g}  n = {et.n}", file=fh)
        ok = all(c.passed for c in checks)
        print("RESULT", "PASS" if ok else "FAIL", file=fh)
    return EXIT_OK if ok else EXIT_VERIFY


RUNNERS = {"surface": run_surface, "cell": run_cell, "bounds": run_bounds, "mcmc": run_mcmc,
           "ensemble": run_ensemble, "verify": run_verify}


def build_parser():
    p = argparse.ArgumentParser(prog="surfdiff", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="mode", required=True)
    for m in MODES:
        s = sub.add_parser(m)
        s.add_argument("--config", type=Path, help="key = value config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--out")
        s.add_argument("--threads", type=int)
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
    return p


def _error(kind, message, code, **extra):
    rec = {"error": kind, "message": message, "exit": code, **extra}
    print(json.dumps(rec), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"mode": args.mode}
    for item in args.set:
        if "=" not in item:
            return _error("usage", f"--set expects KEY=VALUE, got {item!r}", EXIT_USAGE)
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for k in ("seed", "out", "threads"):
        if getattr(args, k) is not None:
            overrides[k] = getattr(args, k)
    try:
        text = args.config.read_text() if args.config else ""
        cfg = parse_config(text, overrides)
    except OSError as exc:
        return _error("usage", str(exc), EXIT_USAGE)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_USAGE, line=exc.line, key=exc.key)
    try:
        return RUNNERS[cfg.mode](cfg)
    except (ConvergenceError, SimulationError, NumericalFailure, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_NUMERIC)
    except ValueError as exc:
        return _error("ValueError", str(exc), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
