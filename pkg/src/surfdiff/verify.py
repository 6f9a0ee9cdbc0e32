"""Invariant suite run by ``surfdiff verify`` and reused by the tests.

Finite-difference oracles here only ever look at field *values* or
*gradients*, never at the quantity they check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import bound_violations, det_relation, eigen_sandwich
from .cell import refine_until
from .geometry import conductivity_from_jet, diffusion_sqrt_at, drift_from_jet, metric_at


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}".rstrip()


def fd_gradient(fld, pts, delta=1e-5):
    """Central differences of the height; shape (n, 2)."""
    pts = np.atleast_2d(pts)
    out = np.empty((len(pts), 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = delta
        out[:, k] = (fld.jet(pts + e)[:, 0] - fld.jet(pts - e)[:, 0]) / (2 * delta)
    return out


def fd_hessian(fld, pts, delta=1e-5):
    """Central differences of the gradient; shape (n, 2, 2)."""
    pts = np.atleast_2d(pts)
    out = np.empty((len(pts), 2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = delta
        out[:, :, k] = (fld.jet(pts + e)[:, 1:3] - fld.jet(pts - e)[:, 1:3]) / (2 * delta)
    return out


def fd_drift(fld, pts, delta=1e-6):
    """``G^{-1/2} div(sqrt(G) g^{-1})`` by differencing the conductivity built from gradients."""
    pts = np.atleast_2d(pts)
    div = np.zeros((len(pts), 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = delta
        Ap = np.array(conductivity_from_jet(fld.jet(pts + e))[:3])
        Am = np.array(conductivity_from_jet(fld.jet(pts - e))[:3])
        dA = (Ap - Am) / (2 * delta)  # rows A11, A12, A22
        # (div M)_j = sum_i d_i M_ij
        row = (dA[0], dA[1]) if i == 0 else (dA[1], dA[2])
        div[:, 0] += row[0]
        div[:, 1] += row[1]
    sg = conductivity_from_jet(fld.jet(pts))[3]
    return div / sg[:, None]


def dyadic_points(period, count, seed=0, bits=20):
    """Random points on a 2^-bits grid, so that x + period is exact."""
    rng = np.random.default_rng(seed)
    return np.floor(rng.uniform(0, period, (count, 2)) * 2**bits) / 2**bits


def field_checks(fld, npts=100, seed=0) -> list[Check]:
    L = fld.period
    pts = dyadic_points(L, npts, seed)
    base = fld.jet(pts)
    same = all(np.array_equal(base, fld.jet(pts + s))
               for s in ([L, 0.0], [0.0, L], [L, L], [-L, 0.0]))
    out = [Check("periodicity (bit-exact jets across one period)", same)]
    pts = np.random.default_rng(seed + 1).uniform(0, L, (npts, 2))
    j = fld.jet(pts)
    gerr = np.linalg.norm(j[:, 1:3] - fd_gradient(fld, pts), axis=1)
    gscale = 1 + np.linalg.norm(j[:, 1:3], axis=1)
    out.append(Check("gradient vs FD", bool(np.all(gerr <= 1e-5 * gscale)),
                     f"max err {np.max(gerr / gscale):.2e}"))
    H = np.stack([np.column_stack((j[:, 3], j[:, 4])), np.column_stack((j[:, 4], j[:, 5]))], 1)
    herr = np.abs(H - fd_hessian(fld, pts)).reshape(npts, -1).max(axis=1)
    hscale = 1 + np.abs(H).reshape(npts, -1).max(axis=1)
    out.append(Check("hessian vs FD", bool(np.all(herr <= 1e-4 * hscale)),
                     f"max err {np.max(herr / hscale):.2e}"))
    return out


def geometry_checks(fld, npts=100, seed=0) -> list[Check]:
    L = fld.period
    pts = np.random.default_rng(seed + 2).uniform(0, L, (npts, 2))
    uni, sq = 0.0, 0.0
    for x in pts:
        m = metric_at(fld, x)
        uni = max(uni, abs(np.linalg.det(m.area_element * m.inv_g) - 1.0))
        S = diffusion_sqrt_at(fld, x)
        sq = max(sq, np.abs(S @ S - 2 * m.inv_g).max())
    F = drift_from_jet(fld.jet(pts))
    Ffd = fd_drift(fld, pts)
    scale = np.maximum(np.linalg.norm(Ffd, axis=1), 1.0)
    derr = np.max(np.linalg.norm(F - Ffd, axis=1) / scale)
    return [
        Check("unimodularity det(sqrt|g| g^-1) = 1", uni <= 1e-10, f"max dev {uni:.2e}"),
        Check("diffusion sqrt squares to 2 g^-1", sq <= 1e-12, f"max dev {sq:.2e}"),
        Check("drift vs FD divergence", derr <= 1e-4, f"max rel err {derr:.2e}"),
    ]


def tensor_checks(et, allowance=1e-2) -> list[Check]:
    Z = et.Z
    l1, l2 = np.linalg.eigvalsh(et.D)
    viol = bound_violations(et.D, et.lower, et.upper, tol=1e-6 + allowance)
    sand = eigen_sandwich(et.D, Z, allowance=allowance)
    res = det_relation(et)
    return [
        Check("refinement converged", bool(et.converged), f"n={et.n}"),
        Check("symmetry", et.asymmetry <= 1e-10, f"|D12-D21| = {et.asymmetry:.1e}"),
        Check("positive definite", l1 > 0, f"eigenvalues {l1:.6g}, {l2:.6g}"),
        Check("Voigt-Reuss sandwich (20 directions)", viol == 0, f"{viol} violations"),
        Check("depletion 1/Z^2 <= eig <= 1", l1 >= 1 / Z**2 - allowance and l2 <= 1 + 1e-6,
              f"1/Z^2={1 / Z**2:.6g}"),
        Check("eigenvalue sandwich 1/Z^2 <= l1 <= 1/Z <= l2 <= 1", sand.passed,
              " ".join(f"{k}:{v:+.2e}" for k, v in sand.margins.items())),
        Check("duality |det(D) Z^2 - 1| <= 0.03", res <= 0.03, f"residual {res:.2e}"),
    ]


def run_suite(fld, tol_rel=1e-2, n0=None, max_n=1024, cg_tol=1e-10, precond="amg"):
    """All checks for one realization; returns ``(checks, tensor)``."""
    checks = field_checks(fld) + geometry_checks(fld)
    et = refine_until(fld, tol_rel=tol_rel, n0=n0, max_n=max_n, cg_tol=cg_tol, precond=precond)
    return checks + tensor_checks(et), et
