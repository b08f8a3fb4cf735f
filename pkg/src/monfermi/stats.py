"""Ensemble statistics: occupation histograms, maxima, bifurcation threshold,
IPR power-law fits and histogram distances."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

BINS = 100


@dataclass
class Histogram:
    """Fixed uniform binning of values in [0, 1]; the value 1 falls in the last bin."""

    bin_count: int = BINS
    counts: np.ndarray = None

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.bin_count, dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (self.bin_count,):
                raise ValueError("counts do not match bin_count")

    @classmethod
    def from_values(cls, values, bin_count: int = BINS) -> "Histogram":
        h = cls(bin_count)
        h.add(values)
        return h

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def width(self) -> float:
        return 1.0 / self.bin_count

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.bin_count + 1)

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.bin_count) + 0.5) / self.bin_count

    def add(self, values) -> None:
        idx = np.floor(np.asarray(values, dtype=float) * self.bin_count).astype(np.int64)
        np.clip(idx, 0, self.bin_count - 1, out=idx)
        self.counts += np.bincount(idx.ravel(), minlength=self.bin_count)

    def mirrored(self) -> "Histogram":
        """Histogram of ``1 - n``."""
        return Histogram(self.bin_count, self.counts[::-1].copy())

    def mean(self) -> float:
        """Mean of the binned distribution (bin centers)."""
        return float(self.centers @ self.counts / self.total)

    def to_dict(self) -> dict:
        return {"bin_count": self.bin_count, "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Histogram":
        return cls(d["bin_count"], np.array(d["counts"], dtype=np.int64))


def merge(a: Histogram, b: Histogram) -> Histogram:
    if a.bin_count != b.bin_count:
        raise ValueError(f"bin mismatch: {a.bin_count} vs {b.bin_count}")
    return Histogram(a.bin_count, a.counts + b.counts)


def normalized_density(h: Histogram) -> np.ndarray:
    """Counts scaled so the density integrates to one over [0, 1]."""
    if h.total == 0:
        raise ValueError("empty histogram")
    return h.counts / (h.total * h.width)


@dataclass
class MaximaReport:
    n_plus: float
    p_plus: float
    n_minus: float | None = None
    p_minus: float | None = None

    @property
    def modality(self) -> str:
        return "unimodal" if self.n_minus is None else "bimodal"

    def to_dict(self) -> dict:
        return {"n_plus": self.n_plus, "p_plus": self.p_plus, "n_minus": self.n_minus,
                "p_minus": self.p_minus, "modality": self.modality}


def smoothed_density(h: Histogram, window: int = 5) -> np.ndarray:
    """Centered moving average of the density, truncated at the edges.

    Window sums are formed from integer counts so mirrored histograms give
    exactly mirrored output.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("smoothing window must be a positive odd integer")
    half = window // 2
    c = np.concatenate([[0], np.cumsum(h.counts)])
    k = np.arange(h.bin_count)
    lo = np.maximum(k - half, 0)
    hi = np.minimum(k + half + 1, h.bin_count)
    return (c[hi] - c[lo]) / (hi - lo) / (h.total * h.width)


def find_maxima(h: Histogram, smooth_window: int = 5, prominence: float = 0.05) -> MaximaReport:
    """Global and secondary maximum of the smoothed occupation density.

    A local maximum is kept when its topographic prominence (height above
    the higher of the two minima separating it from taller peaks or the
    boundaries) is at least ``prominence`` times the global peak height.
    Peaks at the two boundary bins count. Equal heights, including the bins
    of a flat-topped peak, are ordered by distance of the bin center from 1/2.
    """
    s = smoothed_density(h, smooth_window)
    centers = h.centers
    padded = np.concatenate([[-1.0], s, [-1.0]])
    peaks, props = find_peaks(padded, prominence=prominence * s.max(), plateau_size=1)
    # a flat-topped peak is represented by its bin closest to 1/2
    peaks = [min(range(lo - 1, hi), key=lambda k: (abs(centers[k] - 0.5), k))
             for lo, hi in zip(props["left_edges"], props["right_edges"])]
    if len(peaks) == 0:
        peaks = np.flatnonzero(s == s.max())
    order = sorted(peaks, key=lambda k: (-s[k], abs(centers[k] - 0.5), k))
    top = order[0]
    if len(order) == 1:
        return MaximaReport(float(centers[top]), float(s[top]))
    sec = order[1]
    return MaximaReport(float(centers[top]), float(s[top]), float(centers[sec]), float(s[sec]))


@dataclass
class BifurcationEstimate:
    threshold: float | None
    bracket: tuple[float, float] | None
    monotonic: bool = True
    message: str = ""

    def to_dict(self) -> dict:
        return {"threshold": self.threshold,
                "bracket": list(self.bracket) if self.bracket else None,
                "monotonic": self.monotonic, "message": self.message}


def bifurcation_scan(reports) -> BifurcationEstimate:
    """Midpoint between the largest unimodal gamma and the next bimodal one.

    ``reports`` is an iterable of ``(gamma, MaximaReport)``. ``monotonic`` is
    False when some bimodal gamma lies below the largest unimodal one.
    """
    reports = sorted(reports, key=lambda r: r[0])
    uni = [g for g, r in reports if r.modality == "unimodal"]
    bi = [g for g, r in reports if r.modality == "bimodal"]
    if not uni or not bi:
        return BifurcationEstimate(None, None, True, "no bifurcation in scanned range")
    low = max(uni)
    above = [g for g in bi if g > low]
    if not above:
        return BifurcationEstimate(None, None, False, "no bifurcation in scanned range")
    high = min(above)
    return BifurcationEstimate(0.5 * (low + high), (low, high), min(bi) > low)


@dataclass
class PowerLawFit:
    alpha: float
    intercept: float
    r_squared: float
    points: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "intercept": self.intercept,
                "r_squared": self.r_squared,
                "points": [list(map(float, p)) for p in self.points]}


def fit_power_law(points, weighted: bool = False) -> PowerLawFit:
    """Least-squares line through ``(ln L, ln IPR)``; ``alpha = -slope``.

    ``points`` holds ``(L, ipr)`` or ``(L, ipr, stderr)`` tuples. With
    ``weighted=True`` each point is weighted by ``(ipr / stderr)^2``, the
    inverse variance of ``ln ipr``.
    """
    pts = [tuple(p) for p in points]
    L = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    if np.any(y <= 0):
        raise ValueError("IPR values must be positive")
    if len(np.unique(L)) < 3:
        raise ValueError("need at least three distinct system sizes")
    x, ly = np.log(L), np.log(y)
    if weighted:
        err = np.array([p[2] for p in pts], dtype=float)
        wts = (y / err) ** 2
    else:
        wts = np.ones_like(x)
    xm = np.average(x, weights=wts)
    ym = np.average(ly, weights=wts)
    sxx = np.sum(wts * (x - xm) ** 2)
    slope = np.sum(wts * (x - xm) * (ly - ym)) / sxx
    intercept = ym - slope * xm
    ss_res = np.sum(wts * (ly - intercept - slope * x) ** 2)
    ss_tot = np.sum(wts * (ly - ym) ** 2)
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(float(-slope), float(intercept), float(min(max(r2, 0.0), 1.0)), pts)


def ks_distance(a: Histogram, b: Histogram) -> float:
    """Largest gap between the two binned cumulative distributions."""
    if a.bin_count != b.bin_count:
        raise ValueError(f"bin mismatch: {a.bin_count} vs {b.bin_count}")
    ca = np.cumsum(a.counts) / a.total
    cb = np.cumsum(b.counts) / b.total
    return float(np.abs(ca - cb).max())
