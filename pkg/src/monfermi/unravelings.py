"""Quantum-state-diffusion and quantum-jump trajectories of the monitored chain.

Both unravelings act on the L x N orbital matrix of a Slater determinant:

* QSD step: ``V = M exp(-i H dt) U`` with the diagonal
  ``M_jj = exp(dW_j + (2 n_j - 1) gamma dt)``, ``dW_j ~ N(0, gamma dt)`` and
  ``n_j`` taken from the state at the start of the step.
* QJ step: with probability ``p_l = gamma (1 + 3 n_l) dt`` row ``l`` is doubled
  (the action of ``1 + n_l = exp(n_l ln 2)``); otherwise the no-jump
  propagator is applied.

Every step ends with a Householder QR renormalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import (
    RenormalizationError,
    SlaterState,
    _householder_qr,
    entanglement_entropy,
    ipr_instant,
    neel_state,
    occupations,
    renormalize,
)
from .lattice import Propagator, build_hopping, qj_effective_propagator, unitary_propagator
from .noise import NoiseStream, cell_key
from .stats import Histogram

QSD_DT = 0.05
MAX_JUMP_PROBABILITY = 0.1
UNRAVELINGS = ("qsd", "qj")


class ConfigError(ValueError):
    """Invalid trajectory or ensemble configuration."""


class TrajectoryError(RuntimeError):
    """A trajectory failed; carries its seed context."""

    def __init__(self, message: str, seed: int, index: int, step: int | None = None):
        super().__init__(f"trajectory (seed={seed}, index={index}"
                         + (f", step={step}" if step is not None else "") + f"): {message}")
        self.seed = seed
        self.index = index
        self.step = step


@dataclass(frozen=True)
class StepEvent:
    kind: str  # "jump" | "no-jump" | "qsd"
    step_index: int
    site: int | None = None  # 0-based site of a jump

    def __post_init__(self):
        if (self.kind == "jump") != (self.site is not None):
            raise ValueError("site is required for jumps and only for jumps")


def default_qj_dt(L: int, gamma: float) -> float:
    """``0.16 / L``, shortened when needed so that ``4 gamma L dt <= 0.1``.

    The result is ``1 / k`` for an integer ``k`` so that unit sampling
    intervals fall on the step grid.
    """
    per_unit = max(L / 0.16, 4.0 * gamma * L / MAX_JUMP_PROBABILITY)
    return 1.0 / math.ceil(per_unit - 1e-9)


@dataclass
class TrajectoryConfig:
    """Parameters of a single trajectory.

    ``dt`` and ``burn_in`` default to the unraveling-specific step and to 20%
    of ``t_final``. ``max_jump_probability`` bounds the worst-case total jump
    probability ``4 gamma L dt`` of a QJ step.
    """

    L: int
    gamma: float
    unraveling: str = "qsd"
    t_final: float = 400.0
    dt: float | None = None
    burn_in: float | None = None
    sample_every: float = 1.0
    lam: float = 1.0
    record_entropy: bool = True
    fast_jumps: bool = True
    debug: bool = False
    max_jump_probability: float = MAX_JUMP_PROBABILITY

    def __post_init__(self):
        if self.unraveling not in UNRAVELINGS:
            raise ConfigError(f"unraveling must be one of {UNRAVELINGS}, got {self.unraveling!r}")
        if self.L < 2 or self.L % 2:
            raise ConfigError(f"L must be even and >= 2, got {self.L}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be non-negative, got {self.gamma}")
        if self.dt is None:
            self.dt = QSD_DT if self.unraveling == "qsd" else default_qj_dt(self.L, self.gamma)
        if self.burn_in is None:
            self.burn_in = 0.2 * self.t_final
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not 0 <= self.burn_in < self.t_final:
            raise ConfigError("burn_in must lie in [0, t_final)")
        if self.sample_every < self.dt:
            raise ConfigError("sample_every must be at least one step")
        if self.unraveling == "qj":
            worst = 4.0 * self.gamma * self.L * self.dt
            if worst > self.max_jump_probability:
                raise ConfigError(
                    f"QJ step too large: 4*gamma*L*dt = {worst:.4g} exceeds "
                    f"{self.max_jump_probability}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def sample_stride(self) -> int:
        return max(1, int(round(self.sample_every / self.dt)))

    @property
    def first_sample_step(self) -> int:
        stride = self.sample_stride
        first = math.ceil(self.burn_in / self.dt - 1e-9)
        return stride * math.ceil(first / stride)


@dataclass
class TrajectoryRecord:
    """Everything kept from one trajectory after burn-in."""

    histogram: Histogram
    n_samples: int
    ipr_mean: float
    entropy_mean: float | None
    sublattice_mean: float
    occupation_profile: np.ndarray
    n_steps: int
    jump_counts: np.ndarray | None = None
    max_number_error: float = 0.0
    max_orthonormality_error: float = 0.0
    entropy_series: list[float] = field(default_factory=list)
    seed: int = 0
    index: int = 0

    @property
    def total_jumps(self) -> int:
        return 0 if self.jump_counts is None else int(self.jump_counts.sum())


# ---------------------------------------------------------------- single steps

def _qsd_apply(U: np.ndarray, P: np.ndarray, dW: np.ndarray, gamma: float, dt: float,
               step: int | None = None) -> np.ndarray:
    n = occupations(U)
    m = np.exp(dW + (2.0 * n - 1.0) * gamma * dt)
    if m.max() > 1e100:
        m = m / m.max()
    V = m[:, None] * (P @ U)
    Q, rdiag = _householder_qr(V)
    if np.abs(rdiag).min() < 1e-13:
        raise RenormalizationError("rank deficient after QSD step", step)
    return Q


def qsd_step(s: SlaterState, prop: Propagator, gamma: float, dt: float,
             ns: NoiseStream, step: int | None = None) -> SlaterState:
    """One Trotterized QSD step followed by QR renormalization."""
    dW = ns.gaussian_increments(s.L, gamma * dt)
    return SlaterState(_qsd_apply(s.U, prop.entries, dW, gamma, dt, step))


def jump_probabilities(n: np.ndarray, gamma: float, dt: float) -> np.ndarray:
    return gamma * (1.0 + 3.0 * n) * dt


def select_branch(p: np.ndarray, u: float) -> int | None:
    """Site whose cumulative interval contains ``u``, or None for no jump.

    ``[0, 1)`` is split into consecutive intervals of length ``p_0, p_1, ...``
    followed by the no-jump remainder.
    """
    cum = np.cumsum(p)
    if cum[-1] >= 1.0:
        raise ConfigError(f"total jump probability {cum[-1]:.4g} >= 1; dt too large")
    if u >= cum[-1]:
        return None
    return int(np.searchsorted(cum, u, side="right"))


def apply_jump(U: np.ndarray, site: int, step: int | None = None) -> np.ndarray:
    V = np.array(U, dtype=complex, order="F")
    V[site] *= 2.0
    return renormalize(V, step).U


def qj_step(s: SlaterState, prop_eff: Propagator, gamma: float, dt: float,
            ns: NoiseStream, step: int = 0) -> tuple[SlaterState, StepEvent]:
    """One quantum-jump step; returns the new state and what happened."""
    p = jump_probabilities(occupations(s), gamma, dt)
    site = select_branch(p, ns.uniform())
    if site is None:
        return renormalize(prop_eff.entries @ s.U, step), StepEvent("no-jump", step)
    return SlaterState(apply_jump(s.U, site, step)), StepEvent("jump", step, site)


def _rank_one_jump(W: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Q factor of ``W + a b^T`` for orthonormal ``W`` and unit ``a`` with ``W^dag a = conj(b)``.

    This is the renormalized jump ``(1 + e_l e_l^T) U`` written in any
    orthonormal frame (``a`` is the frame image of ``e_l``, ``b`` the row
    ``U[l]``). Its Gram matrix ``1 + 3 conj(b) b^T`` has a closed-form
    Cholesky factor, so Gram-Schmidt reduces to prefix sums::

        t_k = 1 + 3 sum_{j<=k} |b_j|^2
        q_k = sqrt(t_{k-1}/t_k) (v_k - 3 b_k / t_{k-1} sum_{j<k} conj(b_j) v_j)

    The result equals the Householder Q up to column phases, in O(L N).
    """
    V = W + np.outer(a, b)
    t = 1.0 + 3.0 * np.cumsum(b.real**2 + b.imag**2)
    t_prev = np.concatenate([[1.0], t[:-1]])
    S = np.zeros_like(V)
    np.cumsum((V * b.conj())[:, :-1], axis=1, out=S[:, 1:])
    V -= (3.0 * b / t_prev) * S
    V *= np.sqrt(t_prev / t)
    return V


# ----------------------------------------------------------------- trajectories

class _Sampler:
    def __init__(self, cfg: TrajectoryConfig):
        self.cfg = cfg
        L = cfg.L
        self.hist = Histogram()
        self.profile = np.zeros(L)
        self.ipr = 0.0
        self.entropies: list[float] = []
        self.count = 0
        self.number_error = 0.0
        self.ortho_error = 0.0

    def __call__(self, U: np.ndarray):
        s = SlaterState(U)
        n = occupations(U)
        self.hist.add(n)
        self.profile += n
        self.ipr += ipr_instant(s)
        if self.cfg.record_entropy:
            self.entropies.append(entanglement_entropy(s, self.cfg.L // 2))
        self.number_error = max(self.number_error, abs(n.sum() - s.N))
        self.ortho_error = max(self.ortho_error, s.orthonormality_error())
        self.count += 1

    def record(self, n_steps, jump_counts, seed, index) -> TrajectoryRecord:
        c = max(self.count, 1)
        profile = self.profile / c
        return TrajectoryRecord(
            histogram=self.hist,
            n_samples=self.count,
            ipr_mean=self.ipr / c,
            entropy_mean=float(np.mean(self.entropies)) if self.entropies else None,
            sublattice_mean=float(profile[1::2].mean()),
            occupation_profile=profile,
            n_steps=n_steps,
            jump_counts=jump_counts,
            max_number_error=self.number_error,
            max_orthonormality_error=self.ortho_error,
            entropy_series=self.entropies,
            seed=seed,
            index=index,
        )


def _run_qsd(cfg, prop, ns, sample):
    U = neel_state(cfg.L).U
    P = prop.entries
    gamma, dt, L = cfg.gamma, cfg.dt, cfg.L
    stride, first = cfg.sample_stride, cfg.first_sample_step
    for step in range(1, cfg.n_steps + 1):
        dW = ns.gaussian_increments(L, gamma * dt)
        U = _qsd_apply(U, P, dW, gamma, dt, step)
        if cfg.debug and step % 100 == 0:
            err = SlaterState(U).orthonormality_error()
            if err > 1e-10:
                raise RenormalizationError(f"orthonormality drift {err:.2e}", step)
        if step >= first and step % stride == 0:
            sample(U)
    return None


def _run_qj_literal(cfg, prop_eff, ns, sample):
    s = neel_state(cfg.L)
    jumps = np.zeros(cfg.L, dtype=np.int64)
    stride, first = cfg.sample_stride, cfg.first_sample_step
    for step in range(1, cfg.n_steps + 1):
        s, ev = qj_step(s, prop_eff, cfg.gamma, cfg.dt, ns, step)
        if ev.kind == "jump":
            jumps[ev.site] += 1
        if step >= first and step % stride == 0:
            sample(s.U)
    return jumps


def _run_qj_fast(cfg, prop_eff, ns, sample):
    """Event-driven QJ evolution, step-for-step equivalent to :func:`qj_step`.

    The total jump probability ``gamma dt (L + 3N)`` does not depend on the
    state, so steps whose uniform exceeds it are no-jump steps without looking
    at the state. Runs of no-jump steps are unitary up to a scalar and are
    applied at once in the eigenbasis of H, where the orbitals are kept.
    Jumps are renormalized with :func:`_rank_one_jump`.
    Occupations are only evaluated at candidate jump steps and at sampling
    times. Column phases may differ from the literal step sequence; moduli
    of the site amplitudes do not.
    """
    L, gamma, dt = cfg.L, cfg.gamma, cfg.dt
    N = L // 2
    V = prop_eff.eigenvectors
    if np.iscomplexobj(V):
        raise ConfigError("fast jump path needs a real symmetric hopping matrix")
    w = prop_eff.eigenvalues
    W = np.ascontiguousarray(V.T @ neel_state(L).U)
    cur = 0  # step index that W currently represents
    p_total = gamma * dt * (L + 3 * N)
    if p_total >= 1.0:
        raise ConfigError(f"total jump probability {p_total:.4g} >= 1; dt too large")
    threshold = p_total * (1 + 1e-12) + 1e-15
    jumps = np.zeros(L, dtype=np.int64)
    stride, first = cfg.sample_stride, cfg.first_sample_step

    def to_sites(W):
        # real (L, 2N) view: columns interleave real and imaginary parts
        return V @ W.view(np.float64)

    start = 1
    while start <= cfg.n_steps:
        # chunks end on the sampling grid
        stop = min(cfg.n_steps, -(-start // stride) * stride)
        u = ns.uniforms(stop - start + 1)
        for k in np.flatnonzero(u < threshold):
            step = start + int(k)
            if step - 1 > cur:
                W *= np.exp(-1j * w * (dt * (step - 1 - cur)))[:, None]
            cur = step - 1
            X = to_sites(W)
            cum = np.cumsum(gamma * dt * (1.0 + 3.0 * np.einsum("ij,ij->i", X, X)))
            if cum[-1] >= 1.0:
                raise ConfigError(f"total jump probability {cum[-1]:.4g} >= 1")
            if u[k] >= cum[-1]:
                continue
            site = int(np.searchsorted(cum, u[k], side="right"))
            # renormalize in the eigenbasis, where e_site becomes V[site]
            W = _rank_one_jump(W, V[site], X[site].view(np.complex128).copy())
            cur = step
            jumps[site] += 1
        if stop >= first and stop % stride == 0:
            if stop > cur:
                W *= np.exp(-1j * w * (dt * (stop - cur)))[:, None]
            cur = stop
            # a Householder pass per sample keeps rounding drift from accumulating
            Q, rdiag = _householder_qr(W)
            if np.abs(rdiag).min() < 1e-13:
                raise RenormalizationError("rank deficient", stop)
            W = np.ascontiguousarray(Q)
            sample(to_sites(W).view(np.complex128))
        start = stop + 1
    return jumps


def run_trajectory(cfg: TrajectoryConfig, seed: int, idx: int,
                   cell: int | None = None) -> TrajectoryRecord:
    """Evolve the Neel state to ``t_final`` and collect post-burn-in samples."""
    if cell is None:
        cell = cell_key(cfg.unraveling, cfg.gamma, cfg.L)
    ns = NoiseStream(seed, idx, cell)
    H = build_hopping(cfg.L, cfg.lam)
    sample = _Sampler(cfg)
    try:
        if cfg.unraveling == "qsd":
            jumps = _run_qsd(cfg, unitary_propagator(H, cfg.dt), ns, sample)
        else:
            prop = qj_effective_propagator(H, cfg.gamma, cfg.dt)
            runner = _run_qj_fast if cfg.fast_jumps else _run_qj_literal
            jumps = runner(cfg, prop, ns, sample)
    except (RenormalizationError, FloatingPointError) as exc:
        raise TrajectoryError(str(exc), seed, idx, getattr(exc, "step", None)) from exc
    return sample.record(cfg.n_steps, jumps, seed, idx)
