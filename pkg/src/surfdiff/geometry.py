"""Riemannian quantities of a Monge-gauge surface ``(x, h(x))``.

With ``p = grad h``, ``H = hess h`` and ``G = 1 + |p|^2``:

    g        = I + p p^T,             det g = G
    g^{-1}   = I - p p^T / G          (Sherman-Morrison)
    A        = sqrt(G) g^{-1}         (cell-problem conductivity, det A = 1)

Drift of the surface Brownian motion, ``F = G^{-1/2} div(sqrt(G) g^{-1})``.
Differentiating column ``j`` of ``sqrt(G) I - p p^T / sqrt(G)``:

    d_j sqrt(G)                = (H p)_j / sqrt(G)
    sum_i d_i (p_i p_j)        = tr(H) p_j + (H p)_j
    sum_i p_i p_j d_i G^{-1/2} = -p_j (p.H p) / G^{3/2}

The ``(H p)`` terms cancel, leaving

    F = -(G tr(H) - p.H p) / G^2 * p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FieldRealization


@dataclass(frozen=True)
class MetricPoint:
    grad_h: np.ndarray
    hess_h: np.ndarray
    det_g: float
    inv_g: np.ndarray
    area_element: float


@dataclass(frozen=True)
class AverageArea:
    Z: float
    R: float
    resolution: int
    error: float


def _point_jet(field: FieldRealization, x) -> np.ndarray:
    return field.jet(np.asarray(x, float).reshape(1, 2))[0]


def metric_from_grad(grad, hess=None) -> MetricPoint:
    p = np.asarray(grad, float).reshape(2)
    G = 1.0 + p @ p
    inv_g = np.eye(2) - np.outer(p, p) / G
    hess = np.zeros((2, 2)) if hess is None else np.asarray(hess, float)
    return MetricPoint(p, hess, G, inv_g, float(np.sqrt(G)))


def metric_at(field: FieldRealization, x) -> MetricPoint:
    j = _point_jet(field, x)
    return metric_from_grad(j[1:3], [[j[3], j[4]], [j[4], j[5]]])


def drift_from_jet(jet) -> np.ndarray:
    """Vectorised drift for an ``(n, 6)`` jet; returns ``(n, 2)``."""
    jet = np.atleast_2d(jet)
    gx, gy, hxx, hxy, hyy = jet[:, 1], jet[:, 2], jet[:, 3], jet[:, 4], jet[:, 5]
    G = 1.0 + gx * gx + gy * gy
    php = gx * gx * hxx + 2.0 * gx * gy * hxy + gy * gy * hyy
    c = -(G * (hxx + hyy) - php) / (G * G)
    return np.column_stack((c * gx, c * gy))


def drift_at(field: FieldRealization, x) -> np.ndarray:
    return drift_from_jet(_point_jet(field, x))[0]


def sqrt_spd_2x2(A) -> np.ndarray:
    """Symmetric positive square root of a 2x2 SPD matrix (closed form)."""
    A = np.asarray(A, float)
    s = np.sqrt(np.linalg.det(A))
    t = np.sqrt(np.trace(A) + 2.0 * s)
    return (A + s * np.eye(2)) / t


def diffusion_sqrt_at(field: FieldRealization, x) -> np.ndarray:
    """``S`` with ``S @ S = 2 g^{-1}`` at ``x``."""
    return sqrt_spd_2x2(2.0 * metric_at(field, x).inv_g)


def conductivity_from_jet(jet):
    """Entries ``(A11, A12, A22)`` of ``sqrt(G) g^{-1}`` and the area element ``sqrt(G)``."""
    jet = np.atleast_2d(jet)
    gx, gy = jet[..., 1], jet[..., 2]
    G = 1.0 + gx * gx + gy * gy
    sg = np.sqrt(G)
    return sg - gx * gx / sg, -gx * gy / sg, sg - gy * gy / sg, sg


def area_element(field: FieldRealization, points) -> np.ndarray:
    j = field.jet(points)
    return np.sqrt(1.0 + j[:, 1] ** 2 + j[:, 2] ** 2)


def _midpoint_area(field: FieldRealization, n: int) -> float:
    L = field.period
    xs = (np.arange(n) + 0.5) * (L / n)
    j = field.jet_grid(xs, xs)
    return float(np.sqrt(1.0 + j[..., 1] ** 2 + j[..., 2] ** 2).mean())


def average_area(field: FieldRealization, resolution: int) -> AverageArea:
    """Midpoint-rule average of the area element over one period cell.

    The error estimate compares against half the resolution (Richardson
    factor 1/3 for a second-order rule).
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    Z = _midpoint_area(field, resolution)
    Zc = _midpoint_area(field, max(resolution // 2, 1))
    return AverageArea(Z, field.period, resolution, abs(Z - Zc) / 3.0)
