"""Random surface height fields on a periodic square cell.

Two realization types back every family:

* :class:`BumpField` -- a periodic sum of compactly supported bumps
  (the Poisson protrusion surface).
* :class:`TrigField` -- a finite trigonometric sum on a wavevector lattice
  (Gaussian fields, plus the flat and ridge test surfaces).

A realization evaluates the height together with its gradient and Hessian.
The canonical output is a *jet*: an ``(n, 6)`` array with columns
``h, hx, hy, hxx, hxy, hyy``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .rng import generator

JET_COLUMNS = ("h", "hx", "hy", "hxx", "hxy", "hyy")


@dataclass(frozen=True)
class BumpSpec:
    """Bump ``amplitude * exp(-1/(1-|x|^2))`` supported on the unit disc."""

    amplitude: float = 1.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("bump amplitude must be positive")


@dataclass(frozen=True)
class PoissonFieldParams:
    intensity: float
    R: float
    seed: int = 0
    bump: BumpSpec = field(default_factory=BumpSpec)

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")
        if not self.R > 2:
            raise ValueError("R must exceed bump diameter 2")


@dataclass(frozen=True)
class GaussianFieldParams:
    """Gaussian field with autocovariance ``exp(-pi*alpha*|r|^2)``.

    ``R`` is the half-width of the sample region; the realization is periodic
    with period ``2R``.  ``modes`` counts real degrees of freedom and must be a
    perfect square (side ``s`` gives the wavevector box ``|m_i| <= s//2``).
    """

    alpha: float
    R: float
    seed: int = 0
    modes: int = 1024
    threshold: float = 1e-3

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.modes <= 0:
            raise ValueError("modes must be positive")
        s = math.isqrt(self.modes)
        if s * s != self.modes or s < 2:
            raise ValueError(f"modes={self.modes} is not a perfect square >= 4")
        c = gaussian_covariance(self.alpha, self.R)
        if c > self.threshold:
            raise ValueError(
                f"(alpha={self.alpha}, R={self.R}) is not decorrelated: "
                f"c(R)={c:.3g} > threshold {self.threshold:g}"
            )


def gaussian_covariance(alpha, r):
    r = np.asarray(r, dtype=float)
    return np.exp(-np.pi * alpha * r * r)


def bump_eval(spec: BumpSpec, x):
    """Value, gradient (2,) and Hessian (2, 2) of one bump centred at the origin."""
    v = K.bump_point(float(spec.amplitude), float(x[0]), float(x[1]))
    return v[0], np.array([v[1], v[2]]), np.array([[v[3], v[4]], [v[4], v[5]]])


class FieldRealization:
    """A smooth height field, periodic with ``period`` in both axes.

    Instances are immutable after construction.  ``length_scale`` is the
    shortest feature size, used to pick a starting mesh.
    """

    family = "abstract"

    def __init__(self, period, length_scale, provenance=None):
        self.period = float(period)
        self.length_scale = float(length_scale)
        self.provenance = dict(provenance or {})

    # subclasses provide the packed arguments of _kernels.eval_many
    def kernel_args(self):
        raise NotImplementedError

    def jet(self, points) -> np.ndarray:
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
        return K.eval_many(*self._kind_and_args(pts))

    def _kind_and_args(self, pts):
        kind, rest = self.kernel_args()
        return (kind, pts, self.period) + rest

    def jet_grid(self, xs, ys) -> np.ndarray:
        """Jet on the tensor grid ``xs x ys``; shape ``(len(xs), len(ys), 6)``."""
        X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
        out = self.jet(np.column_stack((X.ravel(), Y.ravel())))
        return out.reshape(X.shape + (6,))

    def evaluate(self, points):
        """Return ``(h, grad, hess)`` with shapes (n,), (n, 2), (n, 2, 2)."""
        j = self.jet(points)
        hess = np.empty((len(j), 2, 2))
        hess[:, 0, 0] = j[:, 3]
        hess[:, 0, 1] = hess[:, 1, 0] = j[:, 4]
        hess[:, 1, 1] = j[:, 5]
        return j[:, 0], j[:, 1:3], hess

    def __call__(self, x):
        return self.jet(np.asarray(x, float).reshape(1, 2))[0, 0]


_EMPTY2 = np.zeros((0, 2))
_EMPTY1 = np.zeros(0)
_EMPTYI = np.zeros(1, dtype=np.int64)


class TrigField(FieldRealization):
    """``h(x) = sum_m a_m cos(k_m.x) + b_m sin(k_m.x)`` with ``k_m = 2 pi m / period``.

    ``lattice`` holds the integer wavevectors ``m`` (shape (P, 2)).
    """

    family = "trig"

    def __init__(self, lattice, cos_coef, sin_coef, period, length_scale, provenance=None,
                 family=None):
        super().__init__(period, length_scale, provenance)
        self.lattice = np.asarray(lattice, dtype=np.int64).reshape(-1, 2)
        self.cos_coef = np.ascontiguousarray(cos_coef, dtype=float).reshape(-1)
        self.sin_coef = np.ascontiguousarray(sin_coef, dtype=float).reshape(-1)
        self.kvec = np.ascontiguousarray(self.lattice * (2.0 * np.pi / self.period))
        if family:
            self.family = family
        for a in (self.lattice, self.cos_coef, self.sin_coef, self.kvec):
            a.setflags(write=False)

    def kernel_args(self):
        return K.KIND_TRIG, (self.kvec, self.cos_coef, self.sin_coef, _EMPTY2, 0.0,
                             _EMPTYI, _EMPTYI, 0)

    def jet_grid(self, xs, ys):
        # separable evaluation through the dense coefficient box
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        if len(self.lattice) == 0:
            return np.zeros((len(xs), len(ys), 6))
        k = 2.0 * np.pi / self.period
        m1 = np.unique(self.lattice[:, 0])
        m2 = np.unique(self.lattice[:, 1])
        C = np.zeros((len(m1), len(m2)), dtype=complex)
        i1 = np.searchsorted(m1, self.lattice[:, 0])
        i2 = np.searchsorted(m2, self.lattice[:, 1])
        np.add.at(C, (i1, i2), self.cos_coef - 1j * self.sin_coef)
        xw = np.mod(xs, self.period)
        yw = np.mod(ys, self.period)
        E1 = np.exp(1j * k * np.outer(m1, xw))
        E2 = np.exp(1j * k * np.outer(m2, yw))
        D1 = 1j * k * m1[:, None]
        D2 = 1j * k * m2[None, :]
        out = np.empty((len(xs), len(ys), 6))
        for col, fac in enumerate((1.0, D1, D2, D1 * D1, D1 * D2, D2 * D2)):
            out[..., col] = (E1.T @ (C * fac) @ E2).real
        return out


class BumpField(FieldRealization):
    """Periodic sum of unit-radius bumps centred at ``centers`` (wrapped into the cell)."""

    family = "poisson"

    def __init__(self, centers, amplitude, period, provenance=None):
        if not period > 2:
            raise ValueError("R must exceed bump diameter 2")
        super().__init__(period, 1.0, provenance)
        c = np.mod(np.asarray(centers, dtype=float).reshape(-1, 2), self.period)
        self.centers = np.ascontiguousarray(c)
        self.amplitude = float(amplitude)
        nb = int(math.floor(self.period))
        w = self.period / nb
        b = np.minimum((c // w).astype(np.int64), nb - 1)
        flat = b[:, 0] * nb + b[:, 1]
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=nb * nb)
        self._bin_start = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        self._bin_items = order.astype(np.int64)
        self._nb = nb
        for a in (self.centers, self._bin_start, self._bin_items):
            a.setflags(write=False)

    def kernel_args(self):
        return K.KIND_BUMPS, (_EMPTY2, _EMPTY1, _EMPTY1, self.centers, self.amplitude,
                              self._bin_start, self._bin_items, self._nb)


def flat_field(period: float = 1.0) -> TrigField:
    return TrigField(np.zeros((0, 2)), [], [], period, period,
                     {"family": "flat", "period": period}, family="flat")


def ridge_field(amplitude: float = 1.0, period: float = 1.0, waves: int = 1) -> TrigField:
    """``h = amplitude * sin(2 pi waves x1 / period)``."""
    return TrigField([[waves, 0]], [0.0], [amplitude], period, period / waves,
                     {"family": "ridge", "amplitude": amplitude, "period": period,
                      "waves": waves}, family="ridge")


def sample_poisson_field(params: PoissonFieldParams) -> BumpField:
    rng = generator(params.seed)
    L = params.R
    n = rng.poisson(params.intensity * L * L)
    centers = rng.uniform(0.0, L, size=(n, 2))
    prov = {"family": "poisson", "intensity": params.intensity, "R": L,
            "amplitude": params.bump.amplitude, "seed": params.seed}
    return BumpField(centers, params.bump.amplitude, L, prov)


def gaussian_lattice(modes: int) -> np.ndarray:
    """Half-plane representatives of the box ``|m_i| <= sqrt(modes)//2``, origin excluded."""
    k = math.isqrt(modes) // 2
    r = np.arange(-k, k + 1)
    m1, m2 = np.meshgrid(r, r, indexing="ij")
    m1 = m1.ravel()
    m2 = m2.ravel()
    keep = (m2 > 0) | ((m2 == 0) & (m1 > 0))
    return np.column_stack((m1[keep], m2[keep]))


def gaussian_mode_variances(alpha: float, period: float, lattice) -> np.ndarray:
    """Spectral density of the Gaussian covariance at ``m/period``, summing to 1."""
    xi2 = (np.asarray(lattice, float) ** 2).sum(axis=1) / period**2
    w = np.exp(-np.pi * xi2 / alpha)
    return w / w.sum()


def sample_gaussian_field(params: GaussianFieldParams) -> TrigField:
    L = 2.0 * params.R
    lat = gaussian_lattice(params.modes)
    sd = np.sqrt(gaussian_mode_variances(params.alpha, L, lat))
    rng = generator(params.seed)
    z = rng.standard_normal((len(lat), 2))
    prov = {"family": "gaussian", **asdict(params)}
    return TrigField(lat, sd * z[:, 0], sd * z[:, 1], L, 1.0 / math.sqrt(params.alpha),
                     prov, family="gaussian")


def dump_grid(fld: FieldRealization, n: int, path, seed=None) -> None:
    """Write the field on the ``n x n`` vertex grid as plain text."""
    L = fld.period
    xs = np.arange(n) * (L / n)
    jet = fld.jet_grid(xs, xs)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    rows = np.column_stack((X.ravel(), Y.ravel(), jet[..., 0].ravel(), jet[..., 1].ravel(),
                            jet[..., 2].ravel()))
    if seed is None:
        seed = fld.provenance.get("seed", 0)
    R = fld.provenance.get("R", L)
    header = f"field={fld.family} R={R!r} n={n} seed={seed}"
    np.savetxt(Path(path), rows, fmt="%.17g", header=header, comments="# ")


def load_grid(path):
    """Read a grid file; returns ``(header dict, rows (n*n, 5))``."""
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise ValueError(f"{path}: missing header line")
    header = dict(tok.split("=", 1) for tok in first[1:].split())
    rows = np.loadtxt(path, comments="#", ndmin=2)
    n = int(header["n"])
    if rows.shape != (n * n, 5):
        raise ValueError(f"{path}: expected {n * n} rows of 5 columns, got {rows.shape}")
    return header, rows
