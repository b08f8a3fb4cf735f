"""Slater-determinant trajectory states and their observables.

A number-conserving Gaussian pure state of N fermions on L sites is stored as
an L x N matrix ``U`` with orthonormal columns. Column ``mu`` holds the site
amplitudes of the ``mu``-th orbital; the correlation matrix is ``U U^dagger``.

The IPR is evaluated on the columns exactly as they come out of the
evolution + QR pipeline. It is not invariant under unitary remixing of the
columns, even though the physical state is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack
from scipy.special import xlogy

RANK_TOL = 1e-13
OVERFLOW_LIMIT = 1e100


class RenormalizationError(ArithmeticError):
    """Raised when the propagated matrix loses column rank."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


@dataclass
class SlaterState:
    """L x N orbital matrix with orthonormal columns."""

    U: np.ndarray

    @property
    def L(self) -> int:
        return self.U.shape[0]

    @property
    def N(self) -> int:
        return self.U.shape[1]

    def copy(self) -> "SlaterState":
        return SlaterState(self.U.copy())

    def orthonormality_error(self) -> float:
        """``max |U^dagger U - I|``."""
        G = self.U.conj().T @ self.U
        return float(np.abs(G - np.eye(self.N)).max())


def neel_state(L: int) -> SlaterState:
    """Half filling with sites 2, 4, ..., L occupied (1-based)."""
    if L < 2 or L % 2:
        raise ValueError(f"Neel state needs an even L >= 2, got {L}")
    N = L // 2
    U = np.zeros((L, N), dtype=complex, order="F")
    U[np.arange(1, L, 2), np.arange(N)] = 1.0
    return SlaterState(U)


def occupations(s: SlaterState | np.ndarray) -> np.ndarray:
    """Site occupations ``n_j = sum_mu |U_{j mu}|^2``."""
    U = s.U if isinstance(s, SlaterState) else s
    return np.einsum("ij,ij->i", U.real, U.real) + np.einsum("ij,ij->i", U.imag, U.imag)


def _householder_qr(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin Householder QR via LAPACK; returns (Q, diag(R))."""
    V = np.asfortranarray(V, dtype=complex)
    qr, tau, _, info = lapack.zgeqrf(V)
    if info != 0:
        raise RenormalizationError(f"zgeqrf failed with info={info}")
    N = V.shape[1]
    rdiag = qr.diagonal()[:N].copy()
    Q, _, info = lapack.zungqr(qr[:, :N], tau)
    if info != 0:
        raise RenormalizationError(f"zungqr failed with info={info}")
    return Q, rdiag


def renormalize(V: np.ndarray, step: int | None = None) -> SlaterState:
    """Orthonormalize the columns of ``V`` by Householder QR, keeping ``Q1``.

    Only the column span matters, so an overall scale is irrelevant. Matrices
    whose entries approach the floating-point range are rescaled first.
    """
    V = np.asarray(V)
    if not np.all(np.isfinite(V)):
        raise RenormalizationError("non-finite amplitudes", step)
    peak = np.abs(V).max() if V.size else 0.0
    if peak > OVERFLOW_LIMIT:
        V = V / peak
    Q, rdiag = _householder_qr(V)
    if V.shape[1] and np.abs(rdiag).min() < RANK_TOL:
        raise RenormalizationError(
            f"rank deficient (min |R_ii| = {np.abs(rdiag).min():.3e})", step)
    return SlaterState(Q)


def correlation_matrix(s: SlaterState) -> np.ndarray:
    """``C = U U^dagger``.

    With orbitals ``sum_j U_{j mu} c_j^dagger``, entry (i, j) is
    ``<c_j^dagger c_i>``, i.e. the complex conjugate of ``<c_i^dagger c_j>``.
    Diagonal and spectrum are unaffected by the convention.
    """
    return s.U @ s.U.conj().T


def entanglement_entropy(s: SlaterState, ell: int | None = None) -> float:
    """Von Neumann entropy (natural log) of the first ``ell`` sites.

    Uses the eigenvalues ``nu`` of the restricted correlation matrix:
    ``S = -sum[nu ln nu + (1 - nu) ln(1 - nu)]``.
    """
    L = s.L
    if ell is None:
        ell = L // 2
    if not 1 <= ell <= L:
        raise ValueError(f"subsystem length must be in [1, {L}], got {ell}")
    A = s.U[:ell]
    nu = np.linalg.eigvalsh(A @ A.conj().T)
    nu = np.clip(nu, 0.0, 1.0)
    return float(-(xlogy(nu, nu) + xlogy(1 - nu, 1 - nu)).sum())


def ipr_instant(s: SlaterState) -> float:
    """Orbital-averaged IPR ``(2/L) sum_mu sum_j |U_{j mu}|^4``."""
    a2 = s.U.real**2 + s.U.imag**2
    return float(2.0 / s.L * np.sum(a2 * a2))
