"""Periodic P1 finite elements for the cell problem on ``[0, R]^2``.

For each unit direction ``e`` the corrector ``chi_e`` solves

    -div(A (e + grad chi_e)) = 0,   chi_e periodic, mean zero,

with conductivity ``A = sqrt(det g) g^{-1}``.  The effective tensor is

    D_ij = 1/(R^2 Z_R) * int (e_i + grad chi_i) . A (e_j + grad chi_j) dx.

Coefficients are sampled once per element at the centroid; ``Z_R`` and the
Voigt-Reuss bounds use the same samples, so the discrete tensor obeys the
bounds exactly (up to the linear-solver tolerance).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fields import FieldRealization
from .geometry import conductivity_from_jet

log = logging.getLogger(__name__)

# reference P1 gradients (times the spacing) of the two triangles in a unit square
# lower: (0,0) (1,0) (1,1); upper: (0,0) (1,1) (0,1)
_REF_GRADS = np.array([
    [[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]],
    [[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]],
])
_REF_VERTS = np.array([
    [[0, 0], [1, 0], [1, 1]],
    [[0, 0], [1, 1], [0, 1]],
])
_REF_CENTROIDS = np.array([[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]])


class ConvergenceError(RuntimeError):
    def __init__(self, message, iterations, residual):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class PeriodicMesh:
    """Uniform triangulation of ``[0, R]^2``; each square is cut along its main diagonal.

    Elements are stored type-major: ``e = t * n^2 + i * n + j`` for square
    ``(i, j)`` and triangle type ``t`` (0 lower, 1 upper).
    """

    R: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not self.R > 0:
            raise ValueError("R must be positive")

    @property
    def h(self) -> float:
        return self.R / self.n

    @property
    def num_unknowns(self) -> int:
        return self.n * self.n

    @property
    def num_elements(self) -> int:
        return 2 * self.n * self.n

    @property
    def element_area(self) -> float:
        return 0.5 * self.h * self.h

    def vertex_index(self, i, j):
        """Unknown index of grid vertex ``(i, j)`` after periodic identification."""
        n = self.n
        return (np.asarray(i) % n) * n + np.asarray(j) % n

    @property
    def elements(self) -> np.ndarray:
        n = self.n
        I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        out = np.empty((2, n * n, 3), dtype=np.int64)
        for t in range(2):
            for a in range(3):
                di, dj = _REF_VERTS[t, a]
                out[t, :, a] = self.vertex_index(I + di, J + dj).ravel()
        return out.reshape(-1, 3)

    def centroid_axes(self, t: int):
        """Tensor-grid coordinates of the centroids of type-``t`` triangles."""
        base = np.arange(self.n) * self.h
        cx, cy = _REF_CENTROIDS[t] * self.h
        return base + cx, base + cy

    @property
    def centroids(self) -> np.ndarray:
        pts = []
        for t in range(2):
            xs, ys = self.centroid_axes(t)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            pts.append(np.column_stack((X.ravel(), Y.ravel())))
        return np.vstack(pts)

    @property
    def grads(self) -> np.ndarray:
        """Basis gradients per element, shape ``(2 n^2, 3, 2)``."""
        g = _REF_GRADS / self.h
        return np.repeat(g, self.n * self.n, axis=0)


def build_mesh(R: float, n: int) -> PeriodicMesh:
    return PeriodicMesh(float(R), int(n))


@dataclass
class CellSystem:
    """Stiffness, loads and the centroid samples they were built from."""

    mesh: PeriodicMesh
    stiffness: sp.csr_matrix
    loads: np.ndarray  # (2, N)
    A: np.ndarray  # (E, 3): A11, A12, A22
    sqrt_g: np.ndarray  # (E,)
    grad_h: np.ndarray  # (E, 2)

    def __iter__(self):
        return iter((self.stiffness, self.loads))

    @property
    def Z(self) -> float:
        return float(self.sqrt_g.mean())


def sample_centroids(field: FieldRealization, mesh: PeriodicMesh) -> np.ndarray:
    """Field jet at every element centroid, shape ``(E, 6)``."""
    out = []
    for t in range(2):
        xs, ys = mesh.centroid_axes(t)
        out.append(field.jet_grid(xs, ys).reshape(-1, 6))
    return np.vstack(out)


def assemble(field: FieldRealization, mesh: PeriodicMesh) -> CellSystem:
    if abs(field.period - mesh.R) > 1e-12 * mesh.R:
        raise ValueError(f"mesh period {mesh.R} does not match field period {field.period}")
    jet = sample_centroids(field, mesh)
    A11, A12, A22, sg = conductivity_from_jet(jet)
    elems = mesh.elements
    g = mesh.grads
    g1 = g[:, :, 0]
    g2 = g[:, :, 1]
    area = mesh.element_area
    # area * grad_a . A grad_b for every element
    Ke = area * (
        A11[:, None, None] * g1[:, :, None] * g1[:, None, :]
        + A12[:, None, None] * (g1[:, :, None] * g2[:, None, :] + g2[:, :, None] * g1[:, None, :])
        + A22[:, None, None] * g2[:, :, None] * g2[:, None, :]
    )
    N = mesh.num_unknowns
    rows = np.repeat(elems, 3, axis=1).ravel()
    cols = np.tile(elems, (1, 3)).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    K = (K + K.T) * 0.5
    loads = np.empty((2, N))
    for d, (a1, a2) in enumerate(((A11, A12), (A12, A22))):
        be = -area * (a1[:, None] * g1 + a2[:, None] * g2)
        loads[d] = np.bincount(elems.ravel(), weights=be.ravel(), minlength=N)
    return CellSystem(mesh, K.tocsr(), loads, np.column_stack((A11, A12, A22)), sg, jet[:, 1:3])


@dataclass
class CorrectorSolution:
    chi: np.ndarray  # (2, N)
    residuals: np.ndarray
    iterations: np.ndarray


def _preconditioner(K, kind):
    if kind == "jacobi":
        d = K.diagonal()
        inv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 0.0)
        return lambda r: inv * r
    if kind == "amg":
        import pyamg

        # pyamg seeds its spectral-radius estimates from the global numpy RNG; pin it so the
        # hierarchy (and hence D to the last bit) does not depend on process history
        saved = np.random.get_state()
        np.random.seed(0)
        try:
            ml = pyamg.smoothed_aggregation_solver(K, B=np.ones((K.shape[0], 1)),
                                                   symmetry="symmetric", coarse_solver="pinv")
        finally:
            np.random.set_state(saved)
        M = ml.aspreconditioner(cycle="V")
        return lambda r: M @ r
    if kind in (None, "none"):
        return lambda r: r.copy()
    raise ValueError(f"unknown preconditioner {kind!r}")


def pcg(K, b, tol=1e-10, maxiter=None, precond="jacobi", x0=None, callback=None):
    """Preconditioned CG on the mean-zero subspace of a matrix whose nullspace is the constants.

    Returns ``(x, iterations, relative_residual)``; raises
    :class:`ConvergenceError` when ``maxiter`` is exhausted.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    apply_m = precond if callable(precond) else _preconditioner(K, precond)
    b = b - b.mean()
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, float) - np.mean(x0)
    if bnorm == 0.0:
        return x, 0, 0.0
    r = b - K @ x
    r -= r.mean()
    z = apply_m(r)
    z -= z.mean()
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > tol:
        if it >= maxiter:
            raise ConvergenceError(f"CG did not converge in {maxiter} iterations "
                                   f"(relative residual {res:.3e})", it, res)
        Kp = K @ p
        a = rz / (p @ Kp)
        x += a * p
        r -= a * Kp
        r -= r.mean()
        it += 1
        if callback is not None:
            callback(x)
        res = np.linalg.norm(r) / bnorm
        z = apply_m(r)
        z -= z.mean()
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    x -= x.mean()
    return x, it, res


def solve_correctors(stiffness, loads, tol=1e-10, maxiter=None, precond="jacobi") -> CorrectorSolution:
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not callable(precond):
        precond = _preconditioner(stiffness, precond)
    chis, res, its = [], [], []
    for b in loads:
        x, it, r = pcg(stiffness, b, tol=tol, maxiter=maxiter, precond=precond)
        chis.append(x)
        res.append(r)
        its.append(it)
    return CorrectorSolution(np.array(chis), np.array(res), np.array(its))


@dataclass
class EffectiveTensor:
    D: np.ndarray
    Z: float
    R: float
    n: int
    period: float = 0.0
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    converged: bool = True
    asymmetry: float = 0.0
    history: list = field(default_factory=list)
    residuals: np.ndarray | None = None
    iterations: np.ndarray | None = None

    @property
    def det_residual(self) -> float:
        return abs(np.linalg.det(self.D) * self.Z**2 - 1.0)


def effective_tensor(field: FieldRealization, mesh: PeriodicMesh, correctors: CorrectorSolution,
                     system: CellSystem | None = None) -> EffectiveTensor:
    if system is None:
        system = assemble(field, mesh)
    elems = mesh.elements
    g = mesh.grads
    A11, A12, A22 = system.A.T
    # gradients of e_i + chi_i on every element, shape (2, E, 2)
    W = np.einsum("dea,eak->dek", correctors.chi[:, elems], g)
    W[0, :, 0] += 1.0
    W[1, :, 1] += 1.0
    AW1 = A11 * W[:, :, 0] + A12 * W[:, :, 1]
    AW2 = A12 * W[:, :, 0] + A22 * W[:, :, 1]
    Z = system.Z
    D = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            D[i, j] = np.mean(W[i, :, 0] * AW1[j] + W[i, :, 1] * AW2[j]) / Z
    asym = abs(D[0, 1] - D[1, 0])
    D = 0.5 * (D + D.T)
    return EffectiveTensor(D, Z, float(field.provenance.get("R", field.period)), mesh.n,
                           period=field.period, asymmetry=asym,
                           residuals=correctors.residuals, iterations=correctors.iterations)


def bounds_from_system(system: CellSystem):
    """Reuss (lower) and Voigt (upper) bounds from the centroid samples."""
    A11, A12, A22 = system.A.T
    Z = system.Z
    upper = np.array([[A11.mean(), A12.mean()], [A12.mean(), A22.mean()]]) / Z
    p = system.grad_h
    sg = system.sqrt_g
    # g / sqrt(det g) = (I + p p^T) / sqrt(G)
    m11 = ((1.0 + p[:, 0] ** 2) / sg).mean()
    m12 = (p[:, 0] * p[:, 1] / sg).mean()
    m22 = ((1.0 + p[:, 1] ** 2) / sg).mean()
    lower = np.linalg.inv(np.array([[m11, m12], [m12, m22]])) / Z
    return lower, upper


def voigt_reuss_bounds(field: FieldRealization, mesh: PeriodicMesh):
    return bounds_from_system(assemble(field, mesh))


def default_n0(field: FieldRealization, per_length: int = 8) -> int:
    """Smallest n giving ``per_length`` elements across the field's shortest feature."""
    return max(4, math.ceil(per_length * field.period / field.length_scale - 1e-9))


def relative_change(D_new, D_old) -> float:
    """Largest entry change, scaled by ``sqrt(D_ii D_jj)`` of the newer tensor."""
    d = np.sqrt(np.abs(np.diag(D_new)))
    return float(np.max(np.abs(D_new - D_old) / np.outer(d, d)))


def solve_cell(field: FieldRealization, n: int, cg_tol=1e-10, precond="amg") -> EffectiveTensor:
    """One mesh level: assemble, solve both correctors, return the tensor with bounds."""
    mesh = build_mesh(field.period, n)
    system = assemble(field, mesh)
    sol = solve_correctors(system.stiffness, system.loads, tol=cg_tol, precond=precond)
    et = effective_tensor(field, mesh, sol, system)
    et.lower, et.upper = bounds_from_system(system)
    return et


def refine_until(field: FieldRealization, tol_rel=1e-2, n0=None, max_n=1024, cg_tol=1e-10,
                 precond="amg") -> EffectiveTensor:
    """Double ``n`` until successive tensors differ by at most ``tol_rel``.

    The finest tensor is returned with the whole history.  If ``max_n`` is
    reached first, ``converged`` is False.
    """
    if not tol_rel > 0:
        raise ValueError("tol_rel must be positive")
    n = default_n0(field) if n0 is None else int(n0)
    history = []
    prev = None
    while True:
        et = solve_cell(field, n, cg_tol=cg_tol, precond=precond)
        change = math.inf if prev is None else relative_change(et.D, prev.D)
        history.append((n, et.D.copy(), change))
        log.debug("n=%d D=%s change=%.3g", n, et.D.ravel(), change)
        if change <= tol_rel:
            et.converged = True
            break
        if 2 * n > max_n:
            et.converged = False
            break
        prev = et
        n *= 2
    et.history = history
    return et
