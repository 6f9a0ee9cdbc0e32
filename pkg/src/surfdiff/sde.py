"""Euler-Maruyama simulation of Brownian motion on the surface, seen in the plane.

    dX = F(X) dt + sqrt(2 g^{-1}(X)) dB

The long-time diffusion tensor is estimated ergodically from the increments of
one trajectory sampled every ``delta`` time units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .fields import FieldRealization
from .geometry import drift_at, diffusion_sqrt_at
from .rng import step_normals

_BLOCK = 1 << 17


class SimulationError(RuntimeError):
    def __init__(self, step):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


@dataclass(frozen=True)
class SimulationPlan:
    dt: float = 1e-4
    T: float = 100.0
    delta: float = 0.5
    x0: tuple = (0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.dt <= self.delta <= self.T):
            raise ValueError("need 0 < dt <= delta <= T")
        k = round(self.delta / self.dt)
        if abs(k * self.dt - self.delta) > 1e-9 * self.delta:
            raise ValueError("delta must be an integer multiple of dt")

    @property
    def steps_per_sample(self) -> int:
        return int(round(self.delta / self.dt))

    @property
    def num_samples(self) -> int:
        return int(math.floor(self.T / self.delta + 1e-9))

    @property
    def num_steps(self) -> int:
        return self.num_samples * self.steps_per_sample


@dataclass
class TrajectoryStats:
    """Second-moment statistics of sampled increments.

    ``sums`` holds the sums of dx*dx, dx*dy, dy*dy; ``batches`` the per-batch
    tensor estimates used for the batch-means standard error.  Merging two
    stats adds sums and pools batches, so it is associative and commutative.
    """

    delta: float
    count: int
    sums: np.ndarray
    batches: np.ndarray  # (B, 3)
    msd: np.ndarray = field(default_factory=lambda: np.zeros((1, 2)))
    seed: int = 0
    dt: float = 0.0
    T: float = 0.0

    @property
    def D(self) -> np.ndarray:
        s = self.sums / (2.0 * self.delta * self.count)
        return np.array([[s[0], s[1]], [s[1], s[2]]])

    @property
    def se(self) -> np.ndarray:
        b = self.batches
        if len(b) < 2:
            return np.full((2, 2), np.inf)
        e = b.std(axis=0, ddof=1) / math.sqrt(len(b))
        return np.array([[e[0], e[1]], [e[1], e[2]]])

    def merge(self, other: "TrajectoryStats") -> "TrajectoryStats":
        if self.delta != other.delta:
            raise ValueError("cannot merge statistics with different sampling intervals")
        return TrajectoryStats(self.delta, self.count + other.count, self.sums + other.sums,
                               np.vstack((self.batches, other.batches)), self.msd, self.seed,
                               self.dt, self.T)


def em_step(fld: FieldRealization, x, dt: float, noise) -> np.ndarray:
    """One Euler-Maruyama step from ``x`` with standard normal pair ``noise``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, float)
    return x + drift_at(fld, x) * dt + diffusion_sqrt_at(fld, x) @ np.asarray(noise) * math.sqrt(dt)


def coarsen_noise(noise: np.ndarray) -> np.ndarray:
    """Normals driving the same Brownian path at twice the step."""
    n = len(noise) // 2 * 2
    return (noise[0:n:2] + noise[1:n:2]) / math.sqrt(2.0)


def increment_stats(positions, delta, nbatch=20, max_lag=50) -> TrajectoryStats:
    """Statistics of the increments of ``positions`` (first row is the start point)."""
    positions = np.asarray(positions, float)
    inc = np.diff(positions, axis=0)
    m = len(inc)
    if m == 0:
        raise ValueError("need at least two positions")
    prod = np.column_stack((inc[:, 0] ** 2, inc[:, 0] * inc[:, 1], inc[:, 1] ** 2))
    nb = max(1, min(nbatch, m // 5))
    size = m // nb
    batches = prod[: nb * size].reshape(nb, size, 3).mean(axis=1) / (2.0 * delta)
    lags = np.arange(0, min(max_lag, m) + 1)
    msd = np.zeros((len(lags), 2))
    msd[:, 0] = lags * delta
    for k in lags[1:]:
        d = positions[k:] - positions[:-k]
        msd[k, 1] = np.mean((d * d).sum(axis=1))
    return TrajectoryStats(delta, m, prod.sum(axis=0), batches, msd)


def sample_path(fld: FieldRealization, plan: SimulationPlan, noise=None, drift=True) -> np.ndarray:
    """Positions at times ``0, delta, 2 delta, ...``; shape ``(num_samples + 1, 2)``.

    ``noise`` optionally supplies the standard normals for every step; by
    default step ``k`` uses the pair keyed by ``(plan.seed, k)``.
    """
    every = plan.steps_per_sample
    total = plan.num_steps
    if noise is not None:
        noise = np.asarray(noise, float)
        if len(noise) < total:
            raise ValueError(f"need {total} noise rows, got {len(noise)}")
    kind, rest = fld.kernel_args()
    block = max(every, (_BLOCK // every) * every)
    x, y = map(float, plan.x0)
    out = [np.array([[x, y]])]
    start = 0
    while start < total:
        cnt = min(block, total - start)
        z = noise[start:start + cnt] if noise is not None else step_normals(plan.seed, start, cnt)
        samples, status = K.em_walk(kind, x, y, plan.dt, np.ascontiguousarray(z), drift, every,
                                    fld.period, *rest)
        if status >= 0:
            raise SimulationError(start + status)
        out.append(samples)
        x, y = samples[-1]
        start += cnt
    return np.vstack(out)


def simulate(fld: FieldRealization, plan: SimulationPlan, noise=None, drift=True,
             nbatch=20) -> TrajectoryStats:
    path = sample_path(fld, plan, noise=noise, drift=drift)
    st = increment_stats(path, plan.delta, nbatch=nbatch)
    st.seed, st.dt, st.T = plan.seed, plan.dt, plan.T
    return st
