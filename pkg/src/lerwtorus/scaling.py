"""Reductions from raw samples to tail curves, exponents and distances."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

Z95 = 1.959963984540054


def wilson_interval(successes, trials, z: float = Z95):
    """Score interval for a binomial proportion.  Vectorised over arrays."""
    k = np.asarray(successes, float)
    n = np.asarray(trials, float)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # exact at the boundaries, where centre - half cancels only up to rounding
    lo = np.where(k <= 0, 0.0, np.clip(centre - half, 0, 1))
    hi = np.where(k >= n, 1.0, np.clip(centre + half, 0, 1))
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


@dataclass
class SurvivalCurve:
    thresholds: np.ndarray
    estimates: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    exceed: np.ndarray
    n: int
    scale: float = 1.0

    @property
    def half_widths(self) -> np.ndarray:
        return (self.upper - self.lower) / 2

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}


def survival(samples, scale: float = 1.0, grid=()) -> SurvivalCurve:
    """Empirical P(sample > lambda * scale) on an increasing lambda grid, with
    95% Wilson intervals."""
    x = np.asarray(samples, float)
    lam = np.asarray(grid, float)
    if x.size == 0:
        raise ValueError("no samples")
    if lam.size == 0:
        raise ValueError("empty threshold grid")
    if np.any(np.diff(lam) <= 0):
        raise ValueError("threshold grid must be strictly increasing")
    if not scale > 0:
        raise ValueError("scale must be positive")
    ordered = np.sort(x / scale)
    exceed = x.size - np.searchsorted(ordered, lam, side="right")
    lo, hi = wilson_interval(exceed, x.size)
    return SurvivalCurve(lam, exceed / x.size, lo, hi, exceed, int(x.size), float(scale))


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    r_squared: float
    points: int

    def to_dict(self) -> dict:
        return asdict(self)


def line_fit(x, y) -> ExponentFit:
    """Ordinary least squares y = intercept + slope * x."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size != y.size:
        raise ValueError("x and y differ in length")
    if x.size < 2:
        raise ValueError("need at least two points")
    if np.ptp(x) == 0:
        raise ValueError("x values are all equal")
    xm, ym = x.mean(), y.mean()
    sxx = ((x - xm) ** 2).sum()
    slope = ((x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    ss_res = float((resid**2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 or ss_res <= 1e-15 * max(ss_tot, 1e-300) else 1 - ss_res / ss_tot
    stderr = float(np.sqrt(ss_res / (x.size - 2) / sxx)) if x.size > 2 else 0.0
    return ExponentFit(float(slope), float(intercept), stderr, float(min(max(r2, 0.0), 1.0)), int(x.size))


def exponent_fit(points: Sequence[tuple[float, float]]) -> ExponentFit:
    """Fit y = C x^slope by least squares on (log x, log y)."""
    pts = np.asarray(points, float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("need at least two (x, y) points")
    if np.any(pts <= 0):
        raise ValueError("exponent fit needs positive x and y")
    return line_fit(np.log(pts[:, 0]), np.log(pts[:, 1]))


def ks_distance(samples, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov statistic.

    ``cdf`` is a callable CDF, or a second sample (then the two-sample
    statistic sup |F_a - F_b| is returned).
    """
    x = np.sort(np.asarray(samples, float))
    if x.size == 0:
        raise ValueError("no samples")
    if not callable(cdf):
        y = np.sort(np.asarray(cdf, float))
        if y.size == 0:
            raise ValueError("no reference samples")
        grid = np.concatenate([x, y])
        fa = np.searchsorted(x, grid, side="right") / x.size
        fb = np.searchsorted(y, grid, side="right") / y.size
        return float(np.abs(fa - fb).max())
    n = x.size
    f = np.asarray(cdf(x), float)
    i = np.arange(1, n + 1)
    return float(max((i / n - f).max(), (f - (i - 1) / n).max(), 0.0))


def _as_mapping(p) -> Mapping:
    if isinstance(p, Mapping):
        return p
    arr = np.asarray(p, float)
    return {k: float(v) for k, v in enumerate(arr) if v != 0}


def tv_distance(p, q, tol: float = 1e-9) -> float:
    """Half the l1 distance between two normalised laws.

    Accepts mappings (outcome -> probability) or arrays indexed by outcome.
    """
    p, q = _as_mapping(p), _as_mapping(q)
    for name, law in (("p", p), ("q", q)):
        total = sum(law.values())
        if any(v < 0 for v in law.values()) or abs(float(total) - 1) > tol:
            raise ValueError(f"{name} is not a normalised distribution (sum {float(total)!r})")
    support = set(p) | set(q)
    diff = sum(abs(p.get(k, 0) - q.get(k, 0)) for k in support)
    if isinstance(diff, Fraction):
        return diff / 2
    return float(diff) / 2


def empirical_law(samples) -> dict:
    values, counts = np.unique(np.asarray(samples), return_counts=True)
    n = counts.sum()
    return {v.item(): c / n for v, c in zip(values, counts)}
