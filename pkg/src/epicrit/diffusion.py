"""Scalar limit diffusions and first-passage functionals.

Square-root diffusions (Feller, the SIS limit and the SIR limit pair) are
integrated by explicit Euler-Maruyama with full truncation at zero, and a
path is absorbed the first time the truncated value is exactly zero.  The
passage functionals simulate Brownian motion with parabolic drift and the
Ornstein-Uhlenbeck process on the same time grid and report the first grid
time at which the barrier is crossed.

Time units are the rescaled ones of the limit theorems; defaults are
``dt = 1e-3`` and ``horizon = 50``.  Paths that survive to the horizon give
*censored* passage samples, which are kept and reported, never dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .sampling import derive_stream

DEFAULT_DT = 1e-3
DEFAULT_HORIZON = 50.0
#: time steps at or above this are refused
MAX_DT = 0.1

_MODELS = {"feller": 0, "sis": 1, "sir": 2}


@dataclass
class SdePath:
    """A discretised path on the grid ``k * dt``.

    ``values`` has shape ``(n + 1,)`` for scalar diffusions and ``(n + 1, 2)``
    holding ``(J, R)`` for the SIR pair.  ``absorbed_at`` is the first grid
    index at which the (first) component is zero, or ``None``.
    """

    dt: float
    values: np.ndarray
    absorbed_at: int | None = None

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.values))

    @property
    def horizon(self) -> float:
        return self.dt * (len(self.values) - 1)


@dataclass(frozen=True)
class PassageSample:
    """First-passage time on a grid, or a censoring flag at ``horizon``."""

    time: float
    horizon: float
    censored: bool = False

    def __post_init__(self):
        if not self.censored and self.time > self.horizon:
            raise ValueError("uncensored passage time beyond the horizon")


def _steps(dt: float, horizon: float) -> int:
    dt = float(dt)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt >= MAX_DT:
        raise ValueError(f"dt = {dt} is too coarse for the Euler scheme (need dt < {MAX_DT})")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    return int(round(horizon / dt))


def _rng(rng):
    return np.random.default_rng() if rng is None else rng


# ---------------------------------------------------------------------------
# kernels


@numba.njit(cache=True)
def _euler(rng, model, b, a, dt, n, noise, record):
    # model 0: dY = aY dt + sqrt(Y) dW
    # model 1: dY = (aY - Y^2) dt + sqrt(Y) dW
    # model 2: dJ = (aJ - J R) dt + sqrt(J) dW, dR = J dt
    vals = np.zeros((n + 1 if record else 1, 2))
    y = b
    r = 0.0
    vals[0, 0] = y
    absorbed = 0 if y <= 0.0 else -1
    integral = 0.0
    sq = math.sqrt(dt)
    k = 0
    while k < n and absorbed < 0:
        if model == 0:
            drift = a * y
        elif model == 1:
            drift = a * y - y * y
        else:
            drift = a * y - y * r
        z = rng.standard_normal() if noise else 0.0
        y_new = y + drift * dt + math.sqrt(max(y, 0.0)) * sq * z
        if y_new < 0.0:
            y_new = 0.0
        r += y * dt
        integral += 0.5 * (y + y_new) * dt
        y = y_new
        k += 1
        if record:
            vals[k, 0] = y
            vals[k, 1] = r
        if y == 0.0:
            absorbed = k
    if record:
        for j in range(k + 1, n + 1):
            vals[j, 1] = r
    else:
        vals[0, 0] = y
        vals[0, 1] = r
    return vals, absorbed, integral


@numba.njit(cache=True)
def _parabolic(rng, b, a, dt, n):
    if b <= 0.0:
        return 0, False
    s = 0.0
    sq = math.sqrt(dt)
    for k in range(1, n + 1):
        s += a * dt + 0.5 * dt * dt * (2 * k - 1) + sq * rng.standard_normal()
        if s >= b:
            return k, False
    return n, True


@numba.njit(cache=True)
def _ou(rng, v0, level, reversion, dt, n):
    if v0 <= level:
        return 0, False
    v = v0
    sq = math.sqrt(dt)
    for k in range(1, n + 1):
        v += -reversion * v * dt + sq * rng.standard_normal()
        if v <= level:
            return k, False
    return n, True


# ---------------------------------------------------------------------------
# paths


def _path(model, b, a, dt, horizon, rng, noise):
    if b < 0:
        raise ValueError(f"initial value must be nonnegative, got {b}")
    n = _steps(dt, horizon)
    vals, absorbed, _ = _euler(_rng(rng), _MODELS[model], float(b), float(a), float(dt), n, bool(noise), True)
    values = vals if model == "sir" else vals[:, 0].copy()
    return SdePath(dt=float(dt), values=values, absorbed_at=None if absorbed < 0 else int(absorbed))


def feller_path(b, a=0.0, dt=DEFAULT_DT, horizon=DEFAULT_HORIZON, rng=None, noise=True) -> SdePath:
    """Feller diffusion ``dY = aY dt + sqrt(Y) dW`` from ``Y_0 = b``.

    ``noise=False`` integrates the deterministic skeleton.
    """
    return _path("feller", b, a, dt, horizon, rng, noise)


def sis_limit_path(b, a=0.0, dt=DEFAULT_DT, horizon=DEFAULT_HORIZON, rng=None, noise=True) -> SdePath:
    """SIS scaling limit ``dY = (aY - Y**2) dt + sqrt(Y) dW`` from ``Y_0 = b``."""
    return _path("sis", b, a, dt, horizon, rng, noise)


def sir_limit_path(b, a=0.0, dt=DEFAULT_DT, horizon=DEFAULT_HORIZON, rng=None, noise=True) -> SdePath:
    """SIR scaling limit pair from ``(J_0, R_0) = (b, 0)``.

    ``dJ = (aJ - JR) dt + sqrt(J) dW`` and ``dR = J dt``; ``values[:, 0]``
    is ``J`` and ``values[:, 1]`` is ``R``.
    """
    return _path("sir", b, a, dt, horizon, rng, noise)


def path_integral(path: SdePath) -> float:
    """Trapezoidal ``integral of Y dt`` up to absorption or the horizon.

    For an SIR pair the ``J`` component is integrated.
    """
    v = path.values if path.values.ndim == 1 else path.values[:, 0]
    if v.size < 2:
        return 0.0
    end = v.size if path.absorbed_at is None else path.absorbed_at + 1
    return float(np.trapezoid(v[:end], dx=path.dt)) if end > 1 else 0.0


# ---------------------------------------------------------------------------
# passage times


def parabolic_passage_time(b, a=0.0, dt=DEFAULT_DT, horizon=DEFAULT_HORIZON, rng=None) -> PassageSample:
    """First grid time at which ``W_t + t**2/2 + a t`` reaches ``b``.

    The increments of ``t**2/2`` are taken exactly on the grid.  Note that
    the time change linking this passage to the SIR limit with drift ``a``
    maps that drift to ``-a`` here, since ``J(s) = b + a s - s**2/2 + W_s``
    in the clock ``s = R``.
    """
    if b < 0:
        raise ValueError(f"level must be nonnegative, got {b}")
    n = _steps(dt, horizon)
    k, cens = _parabolic(_rng(rng), float(b), float(a), float(dt), n)
    return PassageSample(time=k * float(dt), horizon=n * float(dt), censored=bool(cens))


def ou_passage_time(b, a=0.0, dt=DEFAULT_DT, horizon=DEFAULT_HORIZON, rng=None, reversion=1.0) -> PassageSample:
    """Passage time ``tau(b - a; -a)`` of ``dV = -reversion * V dt + dW``.

    Equivalently, ``U = V + a`` solves ``dU = (a - U) ds + dW`` (for unit
    reversion) from ``U_0 = b`` and the sample is its hitting time of 0.  The
    standard process has ``reversion = 1``; other values are accepted for
    diagnostics.
    """
    if b < 0:
        raise ValueError(f"initial value must be nonnegative, got {b}")
    if reversion < 0:
        raise ValueError("reversion must be nonnegative")
    n = _steps(dt, horizon)
    k, cens = _ou(_rng(rng), float(b) - float(a), -float(a), float(reversion), float(dt), n)
    return PassageSample(time=k * float(dt), horizon=n * float(dt), censored=bool(cens))


# ---------------------------------------------------------------------------
# batches with per-path streams


@dataclass
class PathBatch:
    """Summaries of ``n`` independent paths, path ``i`` drawn from stream ``first_stream + i``.

    ``values[i, j]`` is the (first) component at ``times[j]``; ``integral`` is
    the time-changed clock ``int Y dt`` up to absorption, censored when the
    path is alive at the horizon.
    """

    times: np.ndarray
    values: np.ndarray
    integral: np.ndarray
    absorbed_time: np.ndarray
    censored: np.ndarray


def batch_paths(
    model: str,
    b: float,
    a: float,
    n: int,
    base_seed: int,
    times=(),
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
    first_stream: int = 0,
    noise: bool = True,
) -> PathBatch:
    """Simulate ``n`` paths of ``'feller'``, ``'sis'`` or ``'sir'`` and summarise them."""
    if model not in _MODELS:
        raise ValueError(f"unknown diffusion {model!r}")
    if b < 0:
        raise ValueError("initial value must be nonnegative")
    steps = _steps(dt, horizon)
    times = np.asarray(times, float)
    idx = np.rint(times / dt).astype(np.int64)
    if np.any(idx > steps) or np.any(idx < 0):
        raise ValueError("requested times outside [0, horizon]")
    need_record = idx.size > 0
    vals = np.zeros((n, idx.size))
    integral = np.zeros(n)
    absorbed_time = np.full(n, np.inf)
    censored = np.zeros(n, bool)
    for i in range(n):
        rng = derive_stream(base_seed, first_stream + i)
        path, absorbed, integ = _euler(rng, _MODELS[model], float(b), float(a), float(dt), steps, noise, need_record)
        if need_record:
            vals[i] = path[idx, 0]
        integral[i] = integ
        if absorbed >= 0:
            absorbed_time[i] = absorbed * dt
        else:
            censored[i] = True
    return PathBatch(times=times, values=vals, integral=integral, absorbed_time=absorbed_time, censored=censored)


def batch_passage_times(
    kind: str,
    b: float,
    a: float,
    n: int,
    base_seed: int,
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
    first_stream: int = 0,
    reversion: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """``n`` passage times of ``'parabolic'`` or ``'ou'`` type as ``(times, censored)``."""
    fn = {"parabolic": parabolic_passage_time, "ou": ou_passage_time}.get(kind)
    if fn is None:
        raise ValueError(f"unknown passage kind {kind!r}")
    extra = {"reversion": reversion} if kind == "ou" else {}
    t = np.empty(n)
    c = np.zeros(n, bool)
    for i in range(n):
        s = fn(b, a, dt, horizon, derive_stream(base_seed, first_stream + i), **extra)
        t[i] = s.time
        c[i] = s.censored
    return t, c
