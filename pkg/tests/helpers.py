"""Shared statistical helpers for the tests."""

import numpy as np
from scipy import stats as sps


def chi2_pvalue(counts, pmf, min_expected=5.0):
    """Chi-square goodness of fit, pooling sparse cells into their neighbours."""
    counts = np.asarray(counts, float)
    pmf = np.asarray(pmf, float)
    n = counts.sum()
    obs, exp = [], []
    o = e = 0.0
    for c, q in zip(counts, pmf):
        o += c
        e += q * n
        if e >= min_expected:
            obs.append(o)
            exp.append(e)
            o = e = 0.0
    if e > 0 or o > 0:
        obs[-1] += o
        exp[-1] += e
    obs, exp = np.array(obs), np.array(exp)
    exp *= obs.sum() / exp.sum()
    return sps.chisquare(obs, exp).pvalue


def ks_critical_01(n, m):
    return 1.6276 * np.sqrt((n + m) / (n * m))
