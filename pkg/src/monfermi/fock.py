"""Exact many-body reference for small chains.

States live in the fixed-particle-number sector, indexed by L-bit
configurations. Fermionic signs follow the Jordan-Wigner ordering of sites
0..L-1: a basis state is ``c^dag_{i1} c^dag_{i2} ... |0>`` with
``i1 < i2 < ...``. The oracle draws from the same :class:`NoiseStream` in the
same order as the Gaussian engine (occupations first, then draws), so both can
be run side by side on one realization.
"""

from __future__ import annotations

from itertools import combinations
from math import comb

import numpy as np

from .lattice import HoppingMatrix
from .noise import NoiseStream
from .unravelings import StepEvent, jump_probabilities, select_branch

MAX_DIM = 10_000


class FockBasis:
    """Configurations of ``N`` fermions on ``L`` sites.

    By default ordered lexicographically by the tuple of occupied sites.
    ``order`` may be any permutation of that default, to check that nothing
    depends on the ordering.
    """

    def __init__(self, L: int, N: int, order=None):
        if not 0 <= N <= L:
            raise ValueError(f"need 0 <= N <= L, got N={N}, L={L}")
        dim = comb(L, N)
        if dim > MAX_DIM:
            raise ValueError(f"Fock dimension {dim} exceeds cap {MAX_DIM}")
        states = [sum(1 << i for i in occ) for occ in combinations(range(L), N)]
        if order is not None:
            order = np.asarray(order)
            if sorted(order.tolist()) != list(range(dim)):
                raise ValueError("order must be a permutation of the basis indices")
            states = [states[k] for k in order]
        self.L, self.N = L, N
        self.states = np.array(states, dtype=np.int64)
        self.index = {s: k for k, s in enumerate(states)}
        self.occ = ((self.states[:, None] >> np.arange(L)) & 1).astype(float)

    def __len__(self):
        return len(self.states)

    def configuration(self, k: int) -> tuple[int, ...]:
        s = int(self.states[k])
        return tuple(i for i in range(self.L) if s >> i & 1)


def build_basis(L: int, N: int, order=None) -> FockBasis:
    return FockBasis(L, N, order)


def _hop_sign(s: int, i: int, j: int) -> int:
    """Sign of ``c^dag_i c_j`` acting on configuration ``s`` (i != j)."""
    lo, hi = min(i, j), max(i, j)
    between = (s >> (lo + 1)) & ((1 << (hi - lo - 1)) - 1) if hi - lo > 1 else 0
    return -1 if bin(between).count("1") % 2 else 1


def many_body_matrix(H: HoppingMatrix | np.ndarray, basis: FockBasis) -> np.ndarray:
    """Dense matrix of ``sum_ij H_ij c^dag_i c_j`` in ``basis``."""
    h = H.entries if isinstance(H, HoppingMatrix) else np.asarray(H)
    L = basis.L
    dim = len(basis)
    M = np.zeros((dim, dim), dtype=complex)
    for col, s in enumerate(basis.states.tolist()):
        for j in range(L):
            if not s >> j & 1:
                continue
            M[col, col] += h[j, j]
            for i in range(L):
                if i == j or h[i, j] == 0 or s >> i & 1:
                    continue
                t = s ^ (1 << j) ^ (1 << i)
                M[basis.index[t], col] += _hop_sign(s, i, j) * h[i, j]
    return M


def slater_to_fock(U: np.ndarray, basis: FockBasis) -> np.ndarray:
    """Amplitudes ``det(U[occupied rows])`` of the Slater determinant."""
    U = np.asarray(U)
    psi = np.empty(len(basis), dtype=complex)
    for k in range(len(basis)):
        rows = list(basis.configuration(k))
        psi[k] = np.linalg.det(U[rows, :])
    return psi


def occupations(psi: np.ndarray, basis: FockBasis) -> np.ndarray:
    return (np.abs(psi) ** 2) @ basis.occ


def correlations(psi: np.ndarray, basis: FockBasis) -> np.ndarray:
    """``G[i, j] = <c^dag_i c_j>``."""
    L = basis.L
    G = np.zeros((L, L), dtype=complex)
    for col, s in enumerate(basis.states.tolist()):
        a = psi[col]
        if a == 0:
            continue
        for j in range(L):
            if not s >> j & 1:
                continue
            G[j, j] += abs(a) ** 2
            for i in range(L):
                if i == j or s >> i & 1:
                    continue
                t = s ^ (1 << j) ^ (1 << i)
                G[i, j] += np.conj(psi[basis.index[t]]) * _hop_sign(s, i, j) * a
    return G


def entanglement_entropy(psi: np.ndarray, basis: FockBasis, ell: int | None = None) -> float:
    """Von Neumann entropy (natural log) of sites ``0..ell-1``.

    The block sits at the start of the Jordan-Wigner string, so its reduced
    density matrix follows from an ordinary bipartite reshaping of the
    amplitudes.
    """
    L = basis.L
    ell = L // 2 if ell is None else ell
    maskA = (1 << ell) - 1
    a_keys, b_keys = {}, {}
    rows, cols = [], []
    for s in basis.states.tolist():
        rows.append(a_keys.setdefault(s & maskA, len(a_keys)))
        cols.append(b_keys.setdefault(s >> ell, len(b_keys)))
    M = np.zeros((len(a_keys), len(b_keys)), dtype=complex)
    M[rows, cols] = psi
    sv = np.linalg.svd(M, compute_uv=False)
    p = sv**2
    p = p[p > 1e-300]
    return float(-(p * np.log(p)).sum())


def neel_fock(basis: FockBasis) -> np.ndarray:
    s = sum(1 << i for i in range(1, basis.L, 2))
    psi = np.zeros(len(basis), dtype=complex)
    psi[basis.index[s]] = 1.0
    return psi


class FockEngine:
    """Precomputed many-body propagator for one (H, dt) configuration."""

    def __init__(self, H: HoppingMatrix, N: int, dt: float, order=None):
        self.basis = build_basis(H.L, N, order)
        self.H_many = many_body_matrix(H, self.basis)
        self.dt = dt
        E, Vm = np.linalg.eigh(self.H_many)
        self.propagator = (Vm * np.exp(-1j * E * dt)) @ Vm.conj().T


def _normalize(psi):
    return psi / np.linalg.norm(psi)


def oracle_qsd_step(psi: np.ndarray, engine: FockEngine, gamma: float, dt: float,
                    ns: NoiseStream) -> np.ndarray:
    """Exact QSD step with the same noise draws as the Gaussian engine."""
    basis = engine.basis
    n = occupations(psi, basis)
    dW = ns.gaussian_increments(basis.L, gamma * dt)
    phi = engine.propagator @ psi
    phi = phi * np.exp(basis.occ @ (dW + (2.0 * n - 1.0) * gamma * dt))
    return _normalize(phi)


def oracle_qj_step(psi: np.ndarray, engine: FockEngine, gamma: float, dt: float,
                   ns: NoiseStream, step: int = 0) -> tuple[np.ndarray, StepEvent]:
    """Exact QJ step sharing the branch selection of the Gaussian engine."""
    basis = engine.basis
    p = jump_probabilities(occupations(psi, basis), gamma, dt)
    site = select_branch(p, ns.uniform())
    if site is None:
        phi = engine.propagator @ psi * np.exp(-1.5 * gamma * basis.N * dt)
        return _normalize(phi), StepEvent("no-jump", step)
    phi = psi * (1.0 + basis.occ[:, site])
    return _normalize(phi), StepEvent("jump", step, site)
