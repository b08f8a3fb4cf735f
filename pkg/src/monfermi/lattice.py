"""Single-particle hopping matrix of the periodic tight-binding chain and its
step propagators.

The Hamiltonian is static, so every propagator is built once from a single
Hermitian eigendecomposition and then reused for the whole run.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class HoppingMatrix:
    """Hermitian L x L hopping matrix with periodic closure.

    Attributes
    ----------
    L : int
        Number of sites.
    lam : float
        Hopping amplitude; bonds carry ``lam / 2``.
    entries : np.ndarray
        Complex (L, L) matrix.
    """

    L: int
    lam: float
    entries: np.ndarray


@dataclass(frozen=True)
class Propagator:
    """Single-particle step operator.

    ``kind`` is ``"unitary"`` for ``exp(-i H dt)`` or ``"qj-effective"`` for the
    no-jump evolution ``exp(-3 gamma dt / 2) exp(-i H dt)``. ``eigenvalues`` and
    ``eigenvectors`` are the decomposition the matrix was built from; they let
    callers take arbitrary powers without repeated multiplication.
    """

    entries: np.ndarray
    dt: float
    kind: str
    gamma: float = 0.0
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None

    @property
    def scale(self) -> float:
        """Scalar prefactor multiplying the unitary part."""
        if self.kind == "qj-effective":
            return float(np.exp(-1.5 * self.gamma * self.dt))
        return 1.0

    def phases(self, steps: int = 1) -> np.ndarray:
        """Eigenbasis phases of ``steps`` consecutive unitary factors."""
        return np.exp(-1j * self.eigenvalues * (self.dt * steps))


def build_hopping(L: int, lam: float = 1.0) -> HoppingMatrix:
    """Nearest-neighbour hopping ``lam/2`` on a ring of ``L`` sites.

    The matrix is filled literally from ``H_ij = lam/2 (d_{i+1,j} + d_{i-1,j})``
    with indices taken mod L. At ``L = 2`` both terms land on the same bond, so
    the off-diagonal entry is ``lam``.
    """
    if not isinstance(L, (int, np.integer)) or L < 2 or L % 2:
        raise ValueError(f"L must be an even integer >= 2, got {L!r}")
    H = np.zeros((L, L), dtype=complex)
    for i in range(L):
        H[i, (i + 1) % L] += lam / 2
        H[i, (i - 1) % L] += lam / 2
    return HoppingMatrix(L=int(L), lam=float(lam), entries=H)


def spectral_decompose(H: HoppingMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix.

    Degenerate pairs of the cosine band come back in whatever orthonormal basis
    LAPACK picks; only functions of H are consumed downstream.
    """
    M = H.entries if isinstance(H, HoppingMatrix) else np.asarray(H)
    if np.iscomplexobj(M) and not np.any(M.imag):
        M = M.real  # real symmetric input gets real orthogonal eigenvectors
    w, V = np.linalg.eigh(M)
    return w, V


@lru_cache(maxsize=64)
def _cached_decomposition(L: int, lam: float) -> tuple[np.ndarray, np.ndarray]:
    w, V = spectral_decompose(build_hopping(L, lam))
    w.setflags(write=False)
    V.setflags(write=False)
    return w, V


def _decomposition(H: HoppingMatrix) -> tuple[np.ndarray, np.ndarray]:
    ref = build_hopping(H.L, H.lam).entries
    if H.entries.shape == ref.shape and np.array_equal(H.entries, ref):
        return _cached_decomposition(H.L, H.lam)
    return spectral_decompose(H)


def unitary_propagator(H: HoppingMatrix, dt: float) -> Propagator:
    """``V diag(exp(-i w dt)) V^dagger`` for the hopping matrix ``H``."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    w, V = _decomposition(H)
    P = (V * np.exp(-1j * w * dt)) @ V.conj().T
    return Propagator(entries=P, dt=float(dt), kind="unitary",
                      eigenvalues=w, eigenvectors=V)


def qj_effective_propagator(H: HoppingMatrix, gamma: float, dt: float) -> Propagator:
    """No-jump propagator ``exp(-i (H - 3i gamma/2) dt)``.

    The anti-Hermitian part is proportional to the identity on the
    single-particle space, so the result is a real scalar times the unitary
    propagator. The scalar drops out of every renormalized state.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    U = unitary_propagator(H, dt)
    scale = np.exp(-1.5 * gamma * dt)
    return Propagator(entries=scale * U.entries, dt=U.dt, kind="qj-effective",
                      gamma=float(gamma), eigenvalues=U.eigenvalues,
                      eigenvectors=U.eigenvectors)


def translation_matrix(L: int) -> np.ndarray:
    """Permutation matrix shifting every site by one (mod L)."""
    return np.roll(np.eye(L), 1, axis=0)
