"""Ensemble orchestration, oracle verification and file outputs."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from pathlib import Path

import numpy as np

from . import fock
from .gaussian import entanglement_entropy, neel_state, occupations
from .lattice import build_hopping, qj_effective_propagator, unitary_propagator
from .noise import NoiseStream, cell_key
from .stats import (
    BINS,
    Histogram,
    bifurcation_scan,
    find_maxima,
    fit_power_law,
    merge,
    normalized_density,
)
from .unravelings import (
    ConfigError,
    TrajectoryConfig,
    TrajectoryError,
    qj_step,
    qsd_step,
    run_trajectory,
)

log = logging.getLogger(__name__)

PRESETS = {
    "desk": {"L_list": [16, 32, 64], "n_trajectories": 48, "t_final": 400.0},
    "paper": {"L_list": [128], "n_trajectories": 80, "t_final": 1000.0},
}
VERIFY_TOL = 1e-6
MAX_FAILURE_FRACTION = 0.1


class RunFailure(RuntimeError):
    """Too many trajectories of a cell failed."""


@dataclass
class RunConfig:
    """Ensemble run: every (unraveling, gamma, L) cell gets ``n_trajectories``
    independent trajectories seeded from ``(master_seed, cell, index)``."""

    unravelings: list = field(default_factory=lambda: ["qsd"])
    gamma_list: list = field(default_factory=lambda: [0.1])
    L_list: list = field(default_factory=lambda: [64])
    n_trajectories: int = 80
    t_final: float = 400.0
    dt: float | None = None
    burn_in: float | None = None
    sample_every: float = 1.0
    lam: float = 1.0
    master_seed: int = 0
    workers: int = 1
    out: str | None = None
    bins: int = BINS
    smooth_window: int = 5
    prominence: float = 0.05
    weighted_fit: bool = False
    record_entropy: bool = True

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories must be >= 1")
        if any(g < 0 for g in self.gamma_list):
            raise ConfigError("all gamma must be >= 0")
        for u in self.unravelings:
            if u not in ("qsd", "qj"):
                raise ConfigError(f"unknown unraveling {u!r}")
        self.gamma_list = [float(g) for g in self.gamma_list]
        self.L_list = [int(L) for L in self.L_list]
        list(self.trajectory_configs())  # validates every cell, including the QJ step bound

    def trajectory_configs(self):
        for unr, g, L in product(self.unravelings, self.gamma_list, self.L_list):
            yield TrajectoryConfig(L=L, gamma=g, unraveling=unr, t_final=self.t_final,
                                   dt=self.dt, burn_in=self.burn_in,
                                   sample_every=self.sample_every, lam=self.lam,
                                   record_entropy=self.record_entropy)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")  # scheduling does not change results
        return d


def effective_workers(requested: int) -> int:
    cap = os.environ.get("MONFERMI_THREADS")
    n = max(1, int(requested))
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return None, None
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return float(x.mean()), se


@dataclass
class CellSummary:
    unraveling: str
    gamma: float
    L: int
    dt: float
    cell: int
    histogram: Histogram
    n_ok: int
    failures: list
    n_bar: float
    n_bar_stderr: float
    n_site_mean: float
    n_hist_mean: float
    ipr_mean: float
    ipr_stderr: float
    entropy_mean: float | None
    entropy_stderr: float | None
    max_number_error: float
    max_orthonormality_error: float
    jump_rate_per_site: float | None
    expected_jump_rate_per_site: float | None
    maxima: object = None

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["histogram"] = self.histogram.to_dict()
        d["maxima"] = self.maxima.to_dict()
        return d


def summarize_cell(cfg: TrajectoryConfig, cell: int, records, failures, run: RunConfig) -> CellSummary:
    h = Histogram(run.bins)
    for r in records:
        h = merge(h, r.histogram)
    n_bar, n_se = _mean_se([r.sublattice_mean for r in records])
    ipr, ipr_se = _mean_se([r.ipr_mean for r in records])
    ents = [r.entropy_mean for r in records if r.entropy_mean is not None]
    ent, ent_se = _mean_se(ents) if ents else (None, None)
    site_mean = float(np.mean([r.occupation_profile.mean() for r in records]))
    rate = expected = None
    if cfg.unraveling == "qj":
        jumps = sum(r.total_jumps for r in records)
        rate = jumps / (len(records) * cfg.L * cfg.n_steps * cfg.dt)
        expected = cfg.gamma * (1 + 3 * (cfg.L // 2) / cfg.L)
    return CellSummary(
        unraveling=cfg.unraveling, gamma=cfg.gamma, L=cfg.L, dt=cfg.dt, cell=cell,
        histogram=h, n_ok=len(records), failures=failures,
        n_bar=n_bar, n_bar_stderr=n_se, n_site_mean=site_mean, n_hist_mean=h.mean(),
        ipr_mean=ipr, ipr_stderr=ipr_se, entropy_mean=ent, entropy_stderr=ent_se,
        max_number_error=max(r.max_number_error for r in records),
        max_orthonormality_error=max(r.max_orthonormality_error for r in records),
        jump_rate_per_site=rate, expected_jump_rate_per_site=expected,
        maxima=find_maxima(h, run.smooth_window, run.prominence),
    )


@dataclass
class EnsembleReport:
    config: dict
    cells: list
    bifurcations: dict
    power_laws: dict
    # wall time and worker count; kept out of report.json so reruns stay byte identical
    timing: dict = field(default_factory=dict, compare=False)

    def cell(self, unraveling: str, gamma: float, L: int) -> CellSummary:
        for c in self.cells:
            if c.unraveling == unraveling and c.L == L and math.isclose(c.gamma, gamma):
                return c
        raise KeyError((unraveling, gamma, L))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "cells": [c.to_dict() for c in self.cells],
            "bifurcations": {k: v.to_dict() for k, v in self.bifurcations.items()},
            "power_laws": {k: v.to_dict() for k, v in self.power_laws.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _trajectory_task(args):
    cfg, seed, idx, cell = args
    try:
        return run_trajectory(cfg, seed, idx, cell)
    except TrajectoryError as exc:
        return str(exc)  # messages pickle reliably; the exception type does not


def run_ensemble(run: RunConfig, write: bool = True) -> EnsembleReport:
    """Run every cell, merge per-cell records in trajectory order and analyse.

    The report depends only on ``run``; worker count and completion order do
    not enter.
    """
    t0 = time.perf_counter()
    cfgs = list(run.trajectory_configs())
    tasks = []
    for cfg in cfgs:
        cell = cell_key(cfg.unraveling, cfg.gamma, cfg.L)
        tasks += [(cfg, run.master_seed, i, cell) for i in range(run.n_trajectories)]
    workers = effective_workers(run.workers)
    if workers == 1:
        results = [_trajectory_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_trajectory_task, tasks, chunksize=1))

    cells = []
    for c, cfg in enumerate(cfgs):
        chunk = results[c * run.n_trajectories:(c + 1) * run.n_trajectories]
        records = [r for r in chunk if not isinstance(r, str)]
        failures = [r for r in chunk if isinstance(r, str)]
        for f in failures:
            log.warning("%s", f)
        if len(failures) > MAX_FAILURE_FRACTION * run.n_trajectories or not records:
            raise RunFailure(f"{len(failures)} of {run.n_trajectories} trajectories failed "
                             f"in cell {cfg.unraveling} gamma={cfg.gamma} L={cfg.L}")
        cells.append(summarize_cell(cfg, chunk_cell(tasks, c, run), records, failures, run))

    bif = {}
    for unr, L in product(run.unravelings, run.L_list):
        reps = [(c.gamma, c.maxima) for c in cells if c.unraveling == unr and c.L == L]
        if len(reps) >= 2:
            bif[f"{unr}_L{L}"] = bifurcation_scan(reps)
    fits = {}
    if len(set(run.L_list)) >= 3:
        for unr, g in product(run.unravelings, run.gamma_list):
            pts = [(c.L, c.ipr_mean, c.ipr_stderr) for c in cells
                   if c.unraveling == unr and c.gamma == g]
            fits[f"{unr}_g{g!r}"] = fit_power_law(sorted(pts), weighted=run.weighted_fit)

    config = run.to_dict()
    config["seeds"] = {f"{c.unraveling}_g{c.gamma!r}_L{c.L}": c.cell for c in cells}
    timing = {"wall_time_s": time.perf_counter() - t0, "workers": workers}
    report = EnsembleReport(config, cells, bif, fits, timing)
    if write and run.out:
        emit_outputs(report, run.out)
    return report


def chunk_cell(tasks, c: int, run: RunConfig) -> int:
    return tasks[c * run.n_trajectories][3]


# ------------------------------------------------------------------ outputs

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def density_filename(unraveling: str, gamma: float, L: int) -> str:
    return f"pn_{unraveling}_g{gamma:g}_L{L}.csv"


def emit_outputs(report: EnsembleReport, directory, plots: bool = True) -> list[Path]:
    """Write the CSV tables, ``report.json`` and (optionally) PNG figures."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    try:
        for c in report.cells:
            path = out / density_filename(c.unraveling, c.gamma, c.L)
            rows = zip(c.histogram.centers, normalized_density(c.histogram))
            _write_csv(path, ["n", "P"], rows)
            written.append(path)
        for unr in sorted({c.unraveling for c in report.cells}):
            rows = [(c.gamma, c.L, c.maxima.n_plus, c.maxima.n_minus, c.maxima.modality)
                    for c in sorted(report.cells, key=lambda c: (c.L, c.gamma))
                    if c.unraveling == unr]
            path = out / f"maxima_{unr}.csv"
            _write_csv(path, ["gamma", "L", "n_plus", "n_minus", "modality"], rows)
            written.append(path)
        rows = []
        for c in sorted(report.cells, key=lambda c: (c.unraveling, c.gamma, c.L)):
            fit = report.power_laws.get(f"{c.unraveling}_g{c.gamma!r}")
            rows.append((c.unraveling, c.gamma, c.L, c.ipr_mean, c.ipr_stderr,
                         fit.alpha if fit else None))
        path = out / "ipr_scaling.csv"
        _write_csv(path, ["unraveling", "gamma", "L", "ipr_mean", "ipr_stderr", "alpha"], rows)
        written.append(path)
        path = out / "report.json"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_json())
        written.append(path)
        if report.timing:
            path = out / "timing.json"
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps(report.timing, indent=2) + "\n")
            written.append(path)
        if plots:
            from .plotting import render_report
            written += render_report(report, out)
    except OSError as exc:
        raise OSError(f"writing outputs to {out} failed: {exc}") from exc
    return written


# ------------------------------------------------------------- verification

def verify(L: int = 6, gamma: float = 0.3, steps: int = 200, seed: int = 0,
           dt: float | None = None, unravelings=("qsd", "qj")) -> dict:
    """Run the Gaussian engine and the Fock oracle on shared noise.

    Returns per-unraveling maximum deviations of site occupations and
    half-chain entropy, whether the QJ event sequences coincide, and an
    overall ``passed`` flag (all deviations below ``1e-6``).
    """
    if L > 10:
        raise ConfigError("verify is limited to L <= 10")
    H = build_hopping(L)
    result = {"L": L, "gamma": gamma, "steps": steps, "seed": seed, "tolerance": VERIFY_TOL}
    passed = True
    for unr in unravelings:
        step_dt = dt if dt is not None else (0.05 if unr == "qsd" else 0.16 / L)
        engine = fock.FockEngine(H, L // 2, step_dt)
        cell = cell_key(unr, gamma, L)
        ns_g, ns_f = NoiseStream(seed, 0, cell), NoiseStream(seed, 0, cell)
        s = neel_state(L)
        psi = fock.neel_fock(engine.basis)
        occ_dev = ent_dev = 0.0
        events_equal = True
        jumps = 0
        if unr == "qsd":
            prop = unitary_propagator(H, step_dt)
        else:
            prop = qj_effective_propagator(H, gamma, step_dt)
        for k in range(1, steps + 1):
            if unr == "qsd":
                s = qsd_step(s, prop, gamma, step_dt, ns_g, k)
                psi = fock.oracle_qsd_step(psi, engine, gamma, step_dt, ns_f)
            else:
                s, e1 = qj_step(s, prop, gamma, step_dt, ns_g, k)
                psi, e2 = fock.oracle_qj_step(psi, engine, gamma, step_dt, ns_f, k)
                events_equal &= e1 == e2
                jumps += e1.kind == "jump"
            occ_dev = max(occ_dev, float(np.abs(occupations(s) - fock.occupations(psi, engine.basis)).max()))
            ent_dev = max(ent_dev, abs(entanglement_entropy(s, L // 2)
                                       - fock.entanglement_entropy(psi, engine.basis, L // 2)))
        ok = occ_dev < VERIFY_TOL and ent_dev < VERIFY_TOL and events_equal
        passed &= ok
        result[unr] = {"dt": step_dt, "max_occupation_deviation": occ_dev,
                       "max_entropy_deviation": ent_dev, "events_equal": bool(events_equal),
                       "jumps": int(jumps), "passed": bool(ok)}
    result["passed"] = bool(passed)
    return result
