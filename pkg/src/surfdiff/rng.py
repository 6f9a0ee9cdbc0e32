"""Reproducible randomness.

Everything random in the package flows from one master seed.  Child seeds are
derived by key (not by draw order) so that ensembles give identical results no
matter how tasks are scheduled, and SDE noise is addressed by step index.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

_U64 = np.uint64
_TWO_M53 = 2.0**-53


def derive_seed(master: int, *keys: int) -> int:
    """Return a 64-bit seed determined only by ``master`` and ``keys``."""
    ss = SeedSequence(int(master) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generator(seed: int) -> Generator:
    """A counter-based generator for one realization."""
    return Generator(Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))


def step_normals(seed: int, start: int, count: int) -> np.ndarray:
    """Standard normal pairs for steps ``start .. start+count-1``, shape (count, 2).

    Step ``k`` always receives the same pair for a given seed, independent of
    how the range is split into blocks.
    """
    if count <= 0:
        return np.zeros((0, 2))
    bg = Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF, counter=int(start))
    words = bg.random_raw(4 * count).reshape(count, 4)
    # two of the four words per counter; u1 in (0, 1] keeps the log finite
    u1 = ((words[:, 0] >> _U64(11)).astype(np.float64) + 1.0) * _TWO_M53
    u2 = (words[:, 1] >> _U64(11)).astype(np.float64) * _TWO_M53
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    return np.column_stack((rad * np.cos(ang), rad * np.sin(ang)))
