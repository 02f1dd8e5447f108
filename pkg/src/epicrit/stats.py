"""Empirical distributions, two-sample KS comparisons and simple intervals.

Censored observations (runs or passages still alive at a horizon) are kept as
a count next to the sorted uncensored samples.  Empirical CDFs always use the
full sample size as denominator, so a censored sample carries mass ``c / n``
at or beyond the horizon, and KS distances are taken over the region strictly
below the common horizon only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Sorted uncensored samples plus ``censored_count`` samples at ``horizon``."""

    samples: np.ndarray
    censored_count: int = 0
    horizon: float = math.inf

    @classmethod
    def from_values(cls, values, censored=None, horizon: float = math.inf) -> EmpiricalDistribution:
        """Build from raw values; ``censored`` is an optional boolean mask of the same length."""
        v = np.asarray(values, float).ravel()
        if censored is None:
            mask = np.zeros(v.size, bool)
        else:
            mask = np.asarray(censored, bool).ravel()
            if mask.size != v.size:
                raise ValueError("censoring mask and values differ in length")
        if np.isnan(v[~mask]).any():
            raise ValueError("uncensored samples contain nan")
        return cls(samples=np.sort(v[~mask]), censored_count=int(mask.sum()), horizon=float(horizon))

    def __post_init__(self):
        s = np.asarray(self.samples, float)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if s.size > 1 and np.any(np.diff(s) < 0):
            raise ValueError("samples must be sorted ascending")
        if self.censored_count < 0:
            raise ValueError("censored_count must be nonnegative")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return int(self.samples.size + self.censored_count)

    @property
    def censored_fraction(self) -> float:
        return self.censored_count / self.n if self.n else 0.0

    def cdf(self, x) -> np.ndarray:
        """``P(X <= x)`` with full-sample denominators (censored mass excluded)."""
        return np.searchsorted(self.samples, x, side="right") / self.n


def _nonempty(*dists):
    for d in dists:
        if d.n == 0:
            raise ValueError("empty sample")


def ks_two_sample(A: EmpiricalDistribution, B: EmpiricalDistribution) -> float:
    """Sup distance between the empirical CDFs below the common horizon."""
    _nonempty(A, B)
    h = min(A.horizon, B.horizon)
    pts = np.concatenate([A.samples, B.samples])
    pts = pts[pts < h]
    if pts.size == 0:
        return 0.0
    return float(np.max(np.abs(A.cdf(pts) - B.cdf(pts))))


def ks_c(alpha: float) -> float:
    """``c(alpha) = sqrt(-ln(alpha / 2) / 2)``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(-math.log(alpha / 2) / 2)


def ks_critical(nA: int, nB: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS threshold ``c(alpha) sqrt((nA + nB) / (nA nB))``."""
    if nA < 50 or nB < 50:
        raise ValueError(f"asymptotic KS threshold needs at least 50 samples per side, got {nA} and {nB}")
    return ks_c(alpha) * math.sqrt((nA + nB) / (nA * nB))


def mean_ci(samples, confidence: float = 0.95) -> tuple[float, float]:
    """Sample mean and normal-approximation half-width ``z * s / sqrt(n)``."""
    x = np.asarray(samples, float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return float(x.mean()), z * sd / math.sqrt(x.size)


def quantiles(dist: EmpiricalDistribution, probs) -> np.ndarray:
    """Linear interpolation between order statistics (Hyndman-Fan type 7).

    With ``h = (n - 1) q`` the quantile is ``x[floor(h)] + (h - floor(h))
    (x[floor(h) + 1] - x[floor(h)])`` over the full sample, censored values
    counted as ``+inf``.  A quantile touching the censored mass is ``inf``.
    """
    _nonempty(dist)
    x = np.concatenate([dist.samples, np.full(dist.censored_count, np.inf)])
    q = np.atleast_1d(np.asarray(probs, float))
    if np.any((q < 0) | (q > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    h = (x.size - 1) * q
    lo = np.floor(h).astype(int)
    hi = np.minimum(lo + 1, x.size - 1)
    w = h - lo
    with np.errstate(invalid="ignore"):
        out = np.where(w == 0, x[lo], x[lo] + w * (x[hi] - x[lo]))
    out = np.where(np.isinf(x[hi]) & (w > 0), np.inf, out)
    return out


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("empty sample")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = k / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class Proportion:
    estimate: float
    lower: float
    upper: float
    n: int


def survival_fraction(dist: EmpiricalDistribution, t: float, confidence: float = 0.95) -> Proportion:
    """Fraction of samples strictly greater than ``t`` (censored count as survivors) with a Wilson interval.

    An exact zero has a strictly positive upper bound, and the lower bound is 0.
    """
    _nonempty(dist)
    k = int(dist.samples.size - np.searchsorted(dist.samples, t, side="right")) + dist.censored_count
    lo, hi = wilson_interval(k, dist.n, confidence)
    return Proportion(k / dist.n, lo, hi, dist.n)


def two_proportion_z(k1: int, n1: int, k2: int, n2: int) -> float:
    """Pooled two-proportion z statistic (0 when both proportions are 0 or 1)."""
    p = (k1 + k2) / (n1 + n2)
    var = p * (1 - p) * (1 / n1 + 1 / n2)
    if var == 0:
        return 0.0
    return (k1 / n1 - k2 / n2) / math.sqrt(var)


@dataclass(frozen=True)
class Verdict:
    D: float
    critical: float
    threshold: float
    censored_A: float
    censored_B: float
    censor_z: float
    passed: bool

    def row(self) -> str:
        return (
            f"D={self.D:.6g} ks_critical={self.critical:.6g} threshold={self.threshold:.6g} "
            f"censored_A={self.censored_A:.6g} censored_B={self.censored_B:.6g} "
            f"{'PASS' if self.passed else 'FAIL'}"
        )


def compare(A: EmpiricalDistribution, B: EmpiricalDistribution, alpha: float = 0.01, floor: float = 0.0) -> Verdict:
    """KS comparison below the horizon plus a censoring-fraction check.

    Passes when ``D < max(floor, ks_critical)`` and the two censoring
    fractions are not distinguishable by a two-sided two-proportion test at
    level ``alpha``.
    """
    _nonempty(A, B)
    D = ks_two_sample(A, B)
    crit = ks_critical(A.n, B.n, alpha)
    thr = max(floor, crit)
    z = two_proportion_z(A.censored_count, A.n, B.censored_count, B.n)
    zc = NormalDist().inv_cdf(1 - alpha / 2)
    return Verdict(D, crit, thr, A.censored_fraction, B.censored_fraction, z, bool(D < thr and abs(z) <= zc))
