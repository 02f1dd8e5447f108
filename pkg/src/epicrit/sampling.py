"""Reproducible random streams and exact discrete samplers.

Every simulation in the package draws from a :class:`numpy.random.Generator`
obtained through :func:`derive_stream`.  Replicate ``r`` of an experiment uses
``stream_id = r``; within a replicate all draws come from that one stream in a
fixed order (sites in lexicographic order, individuals in index order).

The binomial sampler is exact for all ``(n, q)``.  It uses sequential
inversion when ``min(q, 1 - q) * n`` is below :data:`INVERSION_MEAN_LIMIT`
and Hörmann's BTRS transformed-rejection method above it.  The hot path of
the critical models has ``n * q`` of order one, where inversion is cheapest.
The samplers are compiled with numba and can be called from other kernels.
"""

from __future__ import annotations

import math

import numba
import numpy as np

RngStream = np.random.Generator

#: mean below which the binomial sampler switches from BTRS to inversion
INVERSION_MEAN_LIMIT = 10.0

_UINT64 = 2**64

_STIRLING_TAIL = np.array(
    [
        math.lgamma(k + 1.0) - ((k + 0.5) * math.log(k + 1.0) - (k + 1.0) + 0.5 * math.log(2 * math.pi))
        for k in range(10)
    ]
)


def derive_stream(base_seed: int, stream_id: int) -> np.random.Generator:
    """Return the generator for ``(base_seed, stream_id)``.

    Streams are PCG64 generators seeded from
    ``SeedSequence(base_seed, spawn_key=(stream_id,))``.  Distinct stream ids
    are independent in the sense of :class:`numpy.random.SeedSequence`
    spawning; the same pair always reproduces the same sequence.
    """
    stream_id = int(stream_id)
    if stream_id < 0:
        raise ValueError(f"stream_id must be nonnegative, got {stream_id}")
    ss = np.random.SeedSequence(int(base_seed) % _UINT64, spawn_key=(stream_id,))
    return np.random.Generator(np.random.PCG64(ss))


def stream_id(rng: np.random.Generator) -> int:
    """Stream id a generator was derived with (0 for foreign generators)."""
    key = getattr(rng.bit_generator.seed_seq, "spawn_key", ())
    return int(key[0]) if key else 0


def _check_probability(q: float) -> float:
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {q!r}")
    return q


def sample_bernoulli(q: float, rng: np.random.Generator) -> int:
    """Return 1 with probability ``q`` and 0 otherwise."""
    return int(_bernoulli(rng, _check_probability(q)))


def sample_binomial(n: int, q: float, rng: np.random.Generator) -> int:
    """Draw one exact Binomial(n, q) variate."""
    q = _check_probability(q)
    n = int(n)
    if n < 0:
        raise ValueError(f"trial count must be nonnegative, got {n}")
    return int(binomial(rng, n, q))


def sample_distinct(k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``k`` distinct integers uniformly from ``range(n)``."""
    if not 0 <= k <= n:
        raise ValueError(f"cannot draw {k} distinct values from range({n})")
    out = np.empty(k, dtype=np.int64)
    distinct(rng, k, n, out)
    return out


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True)
def _bernoulli(rng, q):
    return 1 if rng.random() < q else 0


@numba.njit(cache=True, inline="always")
def _binomial_inversion(rng, n, p):
    # p <= 1/2 and n * p < INVERSION_MEAN_LIMIT
    ratio = p / (1.0 - p)
    f0 = math.exp(n * math.log1p(-p))
    while True:
        u = rng.random()
        f = f0
        k = 0
        ok = True
        while u > f:
            u -= f
            k += 1
            if k > n:
                ok = False
                break
            f *= ratio * (n - k + 1) / k
            if f == 0.0:
                ok = False
                break
        if ok:
            return k


@numba.njit(cache=True, inline="always")
def _stirling_tail(k):
    # log(k!) - [(k + 1/2) log(k + 1) - (k + 1) + log(2 pi) / 2]
    if k < 10:
        return _STIRLING_TAIL[k]
    m = k + 1.0
    m2 = m * m
    return (1.0 / 12 - (1.0 / 360 - 1.0 / 1260 / m2) / m2) / m


@numba.njit(cache=True, inline="always")
def _binomial_btrs(rng, n, p):
    # p <= 1/2 and n * p >= INVERSION_MEAN_LIMIT
    spq = math.sqrt(n * p * (1.0 - p))
    b = 1.15 + 2.53 * spq
    a = -0.0873 + 0.0248 * b + 0.01 * p
    c = n * p + 0.5
    v_r = 0.92 - 4.2 / b
    while True:
        u = rng.random() - 0.5
        v = rng.random()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + c)
        if k < 0 or k > n:
            continue
        if us >= 0.07 and v <= v_r:
            return np.int64(k)
        # slow path: exact log-ratio bound, rarely reached
        alpha = (2.83 + 5.1 / b) * spq
        r = p / (1.0 - p)
        m = math.floor((n + 1) * p)
        v = math.log(v * alpha / (a / (us * us) + b))
        bound = (
            (m + 0.5) * math.log((m + 1.0) / (r * (n - m + 1.0)))
            + (n + 1.0) * math.log((n - m + 1.0) / (n - k + 1.0))
            + (k + 0.5) * math.log(r * (n - k + 1.0) / (k + 1.0))
            + _stirling_tail(m)
            + _stirling_tail(n - m)
            - _stirling_tail(k)
            - _stirling_tail(n - k)
        )
        if v <= bound:
            return np.int64(k)


@numba.njit(cache=True, inline="always")
def binomial(rng, n, q):
    """Exact Binomial(n, q) draw; consumes no randomness when degenerate."""
    if n <= 0 or q <= 0.0:
        return np.int64(0)
    if q >= 1.0:
        return np.int64(n)
    flip = q > 0.5
    p = 1.0 - q if flip else q
    if n * p < INVERSION_MEAN_LIMIT:
        k = _binomial_inversion(rng, n, p)
    else:
        k = _binomial_btrs(rng, n, p)
    return np.int64(n - k) if flip else np.int64(k)


@numba.njit(cache=True)
def distinct(rng, k, n, out):
    """Fill ``out[:k]`` with ``k`` distinct uniform integers from ``[0, n)``."""
    if k <= 48:
        i = 0
        while i < k:
            x = rng.integers(0, n)
            dup = False
            for j in range(i):
                if out[j] == x:
                    dup = True
                    break
            if not dup:
                out[i] = x
                i += 1
        return
    # selection sampling (Knuth, algorithm S)
    need = k
    i = 0
    for x in range(n):
        if rng.random() * (n - x) < need:
            out[i] = x
            i += 1
            need -= 1
            if need == 0:
                return
