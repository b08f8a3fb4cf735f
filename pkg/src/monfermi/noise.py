"""Deterministic per-trajectory random streams.

Every trajectory owns one PCG64 generator seeded from
``SeedSequence(master_seed, spawn_key=(cell, trajectory_index))``. Batched
draws consume the stream exactly like the equivalent sequence of single
draws, which the fast quantum-jump path relies on.
"""

from __future__ import annotations

import hashlib

import numpy as np


def cell_key(unraveling: str, gamma: float, L: int) -> int:
    """Stable 63-bit identifier of an ensemble cell."""
    tag = f"{unraveling}|{float(gamma)!r}|{int(L)}".encode()
    return int.from_bytes(hashlib.sha256(tag).digest()[:8], "little") >> 1


class NoiseStream:
    """Gaussian increments and uniforms for one trajectory.

    Parameters
    ----------
    master_seed : int
        Run-wide seed (any non-negative integer, 64-bit in practice).
    trajectory_index : int
        Index of the trajectory inside its cell.
    cell : int
        Cell identifier, see :func:`cell_key`.
    """

    def __init__(self, master_seed: int, trajectory_index: int = 0, cell: int = 0):
        if master_seed < 0 or trajectory_index < 0 or cell < 0:
            raise ValueError("seed components must be non-negative")
        self.master_seed = int(master_seed)
        self.trajectory_index = int(trajectory_index)
        self.cell = int(cell)
        ss = np.random.SeedSequence(self.master_seed,
                                    spawn_key=(self.cell, self.trajectory_index))
        self._rng = np.random.Generator(np.random.PCG64(ss))

    def gaussian_increments(self, L: int, variance: float) -> np.ndarray:
        """``L`` independent normal draws with mean 0 and the given variance."""
        if variance < 0:
            raise ValueError(f"variance must be non-negative, got {variance}")
        return np.sqrt(variance) * self._rng.standard_normal(L)

    def uniform(self) -> float:
        """One draw from [0, 1)."""
        return float(self._rng.random())

    def uniforms(self, k: int) -> np.ndarray:
        """``k`` uniforms; identical to ``k`` successive :meth:`uniform` calls."""
        return self._rng.random(k)

    def state(self) -> dict:
        return self._rng.bit_generator.state
